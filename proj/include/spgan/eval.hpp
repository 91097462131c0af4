#pragma once

#include <string>
#include <vector>

#include "spgan/image.hpp"

namespace spgan {

struct PcaModel {
  std::vector<double> mean;
  std::vector<std::vector<double>> components;  // orthonormal, one per row
  std::vector<double> eigenvalues;              // descending
  int dim() const { return static_cast<int>(mean.size()); }
  int q() const { return static_cast<int>(components.size()); }
};

enum class ScatterLabel { real, generated_p16, generated_p70, generated_skip };
const char* to_string(ScatterLabel l);
ScatterLabel scatter_label_from_string(const std::string& s);

struct ScatterPoint {
  double x = 0.0, y = 0.0;
  ScatterLabel label = ScatterLabel::real;
};

// Downsampled raw pixels, flattened channels-major; length = C * side^2.
std::vector<double> featurize(const MaskImage& mask, int side = 32);
std::vector<double> featurize(const EMImage& em, int side = 32);

// Top-q eigenpairs of the mean-centered covariance (divisor n-1) via
// matrix-free power iteration with deflation (tolerance 1e-12, at most
// 10k iterations per component). Component signs follow the
// largest-magnitude-entry-positive convention.
PcaModel fit_pca(const std::vector<std::vector<double>>& vectors, int q = 2);

// (v - mean) . components
std::vector<double> project(const PcaModel& model, const std::vector<double>& v);

// CSV "x,y,label", 17 significant digits, input order preserved.
void emit_scatter(const std::vector<ScatterPoint>& points, const std::string& path);

// Tiled grid with 2-px white separators; P6 for masks, P5 for EM images.
void emit_grid(const std::vector<MaskImage>& images, int cols, const std::string& path);
void emit_grid(const std::vector<EMImage>& images, int cols, const std::string& path);

}  // namespace spgan
