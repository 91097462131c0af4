#include "spgan/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace spgan {

void AdamState::step(std::map<std::string, Tensor>& params) {
  for (const auto& [name, t] : params) {
    if (!t.tracked())
      throw std::invalid_argument("adam_step: parameter '" + name +
                                  "' has no gradient (not watched on a tape)");
    for (double g : t.grad())
      if (!std::isfinite(g))
        throw std::runtime_error("adam_step: non-finite gradient in parameter '" +
                                 name + "'; step aborted");
  }

  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (auto& [name, t] : params) {
    Moments& mom = moments_[name];
    const size_t n = static_cast<size_t>(t.size());
    if (mom.m.empty()) {
      mom.m.assign(n, 0.0);
      mom.v.assign(n, 0.0);
    } else if (mom.m.size() != n) {
      throw std::invalid_argument("adam_step: parameter '" + name +
                                  "' changed size across steps");
    }
    const auto grad = t.grad();
    double* val = t.data();
    for (size_t i = 0; i < n; ++i) {
      const double g = grad[i];
      mom.m[i] = cfg_.beta1 * mom.m[i] + (1.0 - cfg_.beta1) * g;
      mom.v[i] = cfg_.beta2 * mom.v[i] + (1.0 - cfg_.beta2) * g * g;
      const double m_hat = mom.m[i] / bc1;
      const double v_hat = mom.v[i] / bc2;
      val[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
    }
  }
}

}  // namespace spgan
