#pragma once

#include <string>
#include <vector>

#include "spgan/graph.hpp"

namespace spgan {

// Receptive-field statistics of one output pixel along one path.
// offset is the exact field center of output pixel 0 in input coordinates,
// kept in half-pixel units (always a half-integer for integer strides).
struct RFStat {
  int rf = 1;
  int jump = 1;
  int64_t offset_x2 = 1;  // 1 == 0.5 pixels, the center of input pixel 0
  double offset() const { return static_cast<double>(offset_x2) / 2.0; }
};

struct RFPath {
  std::vector<std::string> nodes;  // input .. output, in order
  RFStat stat;
  std::string joined() const;
};

struct RFReport {
  std::vector<RFPath> paths;
  std::vector<int> distinct_rf;  // sorted unique rf values at the output
  int output_jump = 0;           // common jump of all paths
};

// Fold rf' = rf + (k-1)*jump, jump' = jump*stride,
// offset' = offset + ((k-1)/2 - pad_left)*jump over every root-to-output
// path. Non-conv nodes contribute k=1, stride=1. Graphs with upsampling
// (conv_transpose) nodes or mismatched output jumps are rejected.
RFReport analyze(const LayerGraph& g);

// Inclusive input-pixel index bounds.
struct SupportBox {
  int y0 = 0, y1 = -1, x0 = 0, x1 = -1;
  int height() const { return y1 - y0 + 1; }
  int width() const { return x1 - x0 + 1; }
  bool operator==(const SupportBox&) const = default;
};

struct AnalyticBox {
  SupportBox box;
  bool clipped = false;  // unclipped field would cross the image border
};

// Symbolic field of one output pixel for a single path, clipped to R.
AnalyticBox rf_pixel_box(const RFStat& s, int out_row, int out_col, int resolution);

// Union over all paths of the report.
AnalyticBox rf_union_box(const RFReport& rep, int out_row, int out_col, int resolution);

// The graph with activations and normalizations replaced by identity;
// executed with all-positive constant kernels so gradient support is exact.
LayerGraph support_mode(const LayerGraph& g);

// Empirical oracle: runs the support-mode graph at R on a unit input,
// backpropagates from output pixel (channel 0, row, col) and returns the
// bounding box of nonzero input gradients, one per input channel.
std::vector<SupportBox> empirical_rf(const LayerGraph& g, int out_row, int out_col,
                                     int resolution);

// Same probe with caller-supplied parameters (e.g. selected fusion
// channels zeroed to isolate one path).
std::vector<SupportBox> empirical_support(const LayerGraph& g, const ModelParams& params,
                                          int out_row, int out_col, int resolution);

}  // namespace spgan
