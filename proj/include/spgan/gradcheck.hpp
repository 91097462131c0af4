#pragma once

#include <cstdint>
#include <functional>

#include "spgan/tensor.hpp"

namespace spgan {

struct GradCheckResult {
  double max_rel_err = 0.0;
  int64_t coords_checked = 0;
};

// Central-difference verification of the tape gradient of a scalar-valued
// function. The difference side uses forward evaluations only, never the
// tape, so it is an independent oracle for every differentiable op.
//
// Relative error per coordinate: |a - b| / max(|a|, |b|, 1e-8).
// h must lie in [1e-8, 1e-4]. With sample > 0, that many seeded random
// coordinates are checked instead of all of them (for large points).
GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& f,
                           const Tensor& point, double h = 1e-6,
                           int64_t sample = 0, uint64_t sample_seed = 0);

// Same check restricted to an explicit coordinate list.
GradCheckResult grad_check_coords(const std::function<Tensor(const Tensor&)>& f,
                                  const Tensor& point, double h,
                                  const std::vector<int64_t>& coords);

}  // namespace spgan
