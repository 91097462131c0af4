#include "spgan/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "spgan/rng.hpp"

namespace spgan {

namespace {

GradCheckResult run_check(const std::function<Tensor(const Tensor&)>& f,
                          const Tensor& point, double h,
                          const std::vector<int64_t>& coords) {
  if (h < 1e-8 || h > 1e-4)
    throw std::invalid_argument("grad_check: h must lie in [1e-8, 1e-4]");

  // analytic gradient via the tape
  Tensor x = point.detached();
  std::vector<double> analytic;
  {
    Tape tape;
    tape.watch(x);
    Tensor loss = f(x);
    if (loss.size() != 1)
      throw std::invalid_argument("grad_check: f must be scalar-valued");
    tape.backward(loss);
    analytic.assign(x.grad().begin(), x.grad().end());
  }

  Tensor probe = point.detached();
  double* pv = probe.data();
  GradCheckResult res;
  for (int64_t i : coords) {
    const double saved = pv[i];
    pv[i] = saved + h;
    const double fp = f(probe).item();
    pv[i] = saved - h;
    const double fm = f(probe).item();
    pv[i] = saved;
    const double fd = (fp - fm) / (2.0 * h);
    const double a = analytic[static_cast<size_t>(i)];
    const double denom = std::max({std::abs(a), std::abs(fd), 1e-8});
    res.max_rel_err = std::max(res.max_rel_err, std::abs(a - fd) / denom);
    ++res.coords_checked;
  }
  return res;
}

}  // namespace

GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& f,
                           const Tensor& point, double h, int64_t sample,
                           uint64_t sample_seed) {
  const int64_t n = point.size();
  std::vector<int64_t> coords;
  if (sample > 0 && sample < n) {
    SeededRng rng(sample_seed);
    std::unordered_set<int64_t> seen;
    while (static_cast<int64_t>(coords.size()) < sample) {
      const int64_t i = static_cast<int64_t>(rng.below(static_cast<uint64_t>(n)));
      if (seen.insert(i).second) coords.push_back(i);
    }
  } else {
    coords.resize(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
  }
  return run_check(f, point, h, coords);
}

GradCheckResult grad_check_coords(const std::function<Tensor(const Tensor&)>& f,
                                  const Tensor& point, double h,
                                  const std::vector<int64_t>& coords) {
  for (int64_t i : coords)
    if (i < 0 || i >= point.size())
      throw std::invalid_argument("grad_check_coords: coordinate out of range");
  return run_check(f, point, h, coords);
}

}  // namespace spgan
