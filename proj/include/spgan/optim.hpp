#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spgan/tensor.hpp"

namespace spgan {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moment buffers are keyed by parameter name
// and created on first use; updates run in name order.
class AdamState {
 public:
  explicit AdamState(AdamConfig cfg = {}) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  int64_t step_count() const { return step_; }

  // theta <- theta - lr * m_hat / (sqrt(v_hat) + eps), applied in place to
  // every named tensor using its tape gradient. Non-finite gradients abort
  // the whole step before any parameter changes, naming the offender.
  void step(std::map<std::string, Tensor>& params);

  struct Moments {
    std::vector<double> m, v;
  };
  std::map<std::string, Moments>& moments() { return moments_; }
  const std::map<std::string, Moments>& moments() const { return moments_; }
  void set_step_count(int64_t s) { step_ = s; }

 private:
  AdamConfig cfg_;
  std::map<std::string, Moments> moments_;
  int64_t step_ = 0;
};

}  // namespace spgan
