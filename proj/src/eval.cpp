#include "spgan/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "spgan/train.hpp"

namespace spgan {

namespace {

void fail(const std::string& msg) { throw std::invalid_argument(msg); }

// y += (X_c^T (X_c v)) / (n-1) - sum_j lam_j c_j (c_j . v), matrix-free
void apply_deflated_cov(const std::vector<std::vector<double>>& centered,
                        const PcaModel& found, const std::vector<double>& v,
                        std::vector<double>& y) {
  const size_t dim = v.size();
  const size_t n = centered.size();
  std::fill(y.begin(), y.end(), 0.0);
  for (size_t i = 0; i < n; ++i) {
    const auto& row = centered[i];
    double dot = 0.0;
    for (size_t j = 0; j < dim; ++j) dot += row[j] * v[j];
    for (size_t j = 0; j < dim; ++j) y[j] += row[j] * dot;
  }
  const double div = static_cast<double>(n - 1);
  for (size_t j = 0; j < dim; ++j) y[j] /= div;
  for (int c = 0; c < found.q(); ++c) {
    const auto& comp = found.components[static_cast<size_t>(c)];
    double dot = 0.0;
    for (size_t j = 0; j < dim; ++j) dot += comp[j] * v[j];
    const double w = found.eigenvalues[static_cast<size_t>(c)] * dot;
    for (size_t j = 0; j < dim; ++j) y[j] -= w * comp[j];
  }
}

void orthogonalize(const PcaModel& found, std::vector<double>& v) {
  for (int c = 0; c < found.q(); ++c) {
    const auto& comp = found.components[static_cast<size_t>(c)];
    double dot = 0.0;
    for (size_t j = 0; j < v.size(); ++j) dot += comp[j] * v[j];
    for (size_t j = 0; j < v.size(); ++j) v[j] -= dot * comp[j];
  }
}

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// deterministic unit vector orthogonal to the found components, for
// zero-eigenvalue completion
std::vector<double> orthonormal_completion(const PcaModel& found, size_t dim) {
  for (size_t j = 0; j < dim; ++j) {
    std::vector<double> e(dim, 0.0);
    e[j] = 1.0;
    orthogonalize(found, e);
    const double n = norm2(e);
    if (n > 1e-6) {
      for (auto& x : e) x /= n;
      return e;
    }
  }
  fail("fit_pca: cannot complete an orthonormal basis");
  return {};
}

void fix_sign(std::vector<double>& comp) {
  size_t arg = 0;
  for (size_t j = 1; j < comp.size(); ++j)
    if (std::abs(comp[j]) > std::abs(comp[arg])) arg = j;
  if (comp[arg] < 0.0)
    for (auto& x : comp) x = -x;
}

}  // namespace

const char* to_string(ScatterLabel l) {
  switch (l) {
    case ScatterLabel::real: return "real";
    case ScatterLabel::generated_p16: return "generated-p16";
    case ScatterLabel::generated_p70: return "generated-p70";
    case ScatterLabel::generated_skip: return "generated-skip";
  }
  return "?";
}

ScatterLabel scatter_label_from_string(const std::string& s) {
  if (s == "real") return ScatterLabel::real;
  if (s == "generated-p16") return ScatterLabel::generated_p16;
  if (s == "generated-p70") return ScatterLabel::generated_p70;
  if (s == "generated-skip") return ScatterLabel::generated_skip;
  fail("unknown scatter label '" + s + "'");
  return ScatterLabel::real;
}

std::vector<double> featurize(const MaskImage& mask, int side) {
  if (side > mask.resolution) fail("featurize: side exceeds mask resolution");
  const Tensor t = side == mask.resolution ? mask.field
                                           : resize_nearest(mask.field, side, side);
  return std::vector<double>(t.data(), t.data() + t.size());
}

std::vector<double> featurize(const EMImage& em, int side) {
  if (side > em.resolution) fail("featurize: side exceeds image resolution");
  const Tensor t = side == em.resolution ? em.intensity
                                         : resize_bilinear(em.intensity, side, side);
  return std::vector<double>(t.data(), t.data() + t.size());
}

PcaModel fit_pca(const std::vector<std::vector<double>>& vectors, int q) {
  const size_t n = vectors.size();
  if (n < 2) fail("fit_pca: need at least 2 vectors");
  const size_t dim = vectors[0].size();
  for (const auto& v : vectors)
    if (v.size() != dim) fail("fit_pca: vectors have unequal lengths");
  if (q < 1 || q > static_cast<int>(std::min(n - 1, dim)))
    fail("fit_pca: q must lie in [1, min(n-1, dim)]");

  PcaModel model;
  model.mean.assign(dim, 0.0);
  for (const auto& v : vectors)
    for (size_t j = 0; j < dim; ++j) model.mean[j] += v[j];
  for (auto& m : model.mean) m /= static_cast<double>(n);

  std::vector<std::vector<double>> centered(n, std::vector<double>(dim));
  double trace = 0.0;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < dim; ++j) {
      const double c = vectors[i][j] - model.mean[j];
      centered[i][j] = c;
      trace += c * c;
    }
  trace /= static_cast<double>(n - 1);
  if (trace == 0.0) fail("fit_pca: degenerate covariance");

  constexpr int kMaxIter = 10000;
  constexpr double kTol = 1e-12;
  for (int comp = 0; comp < q; ++comp) {
    // deterministic start, mildly uneven so it is never orthogonal to the
    // dominant direction by symmetry
    std::vector<double> v(dim);
    for (size_t j = 0; j < dim; ++j)
      v[j] = 1.0 + 0.01 * static_cast<double>((j * 2654435761ULL) % 97) / 97.0;
    orthogonalize(model, v);
    double nv = norm2(v);
    if (nv < 1e-12) {
      v = orthonormal_completion(model, dim);
    } else {
      for (auto& x : v) x /= nv;
    }

    std::vector<double> y(dim);
    double lambda = 0.0;
    bool degenerate = false;
    for (int it = 0; it < kMaxIter; ++it) {
      apply_deflated_cov(centered, model, v, y);
      orthogonalize(model, y);
      const double ny = norm2(y);
      if (ny < trace * 1e-15) {  // deflated operator is numerically zero
        degenerate = true;
        break;
      }
      double diff = 0.0;
      for (size_t j = 0; j < dim; ++j) {
        const double next = y[j] / ny;
        diff += std::abs(next - v[j]);
        v[j] = next;
      }
      lambda = ny;  // ||C v|| with unit v converging to the eigenvalue
      if (diff < kTol) break;
    }
    if (degenerate) {
      v = orthonormal_completion(model, dim);
      lambda = 0.0;
    } else {
      // Rayleigh quotient at the converged vector
      apply_deflated_cov(centered, model, v, y);
      lambda = 0.0;
      for (size_t j = 0; j < dim; ++j) lambda += v[j] * y[j];
      if (lambda < 0.0) lambda = 0.0;
    }
    fix_sign(v);
    model.components.push_back(std::move(v));
    model.eigenvalues.push_back(lambda);
  }
  return model;
}

std::vector<double> project(const PcaModel& model, const std::vector<double>& v) {
  if (static_cast<int>(v.size()) != model.dim())
    fail("project: vector length " + std::to_string(v.size()) +
         " does not match model dim " + std::to_string(model.dim()));
  std::vector<double> out(static_cast<size_t>(model.q()), 0.0);
  for (int c = 0; c < model.q(); ++c) {
    const auto& comp = model.components[static_cast<size_t>(c)];
    double dot = 0.0;
    for (size_t j = 0; j < v.size(); ++j) dot += (v[j] - model.mean[j]) * comp[j];
    out[static_cast<size_t>(c)] = dot;
  }
  return out;
}

void emit_scatter(const std::vector<ScatterPoint>& points, const std::string& path) {
  if (points.empty()) fail("emit_scatter: no points");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("emit_scatter: cannot open '" + path + "'");
  out << "x,y,label\n";
  for (const auto& p : points)
    out << format_g17(p.x) << "," << format_g17(p.y) << "," << to_string(p.label)
        << "\n";
  if (!out) throw std::runtime_error("emit_scatter: write failed for '" + path + "'");
}

namespace {

// shared tiling logic; white fill, 2-px separators
template <typename GetPixel>
PnmImage tile(int n, int r, int cols, int channels, GetPixel&& pixel) {
  if (cols < 1) fail("emit_grid: cols must be >= 1");
  const int rows = (n + cols - 1) / cols;
  const int sep = 2;
  PnmImage img;
  img.channels = channels;
  img.width = cols * r + (cols - 1) * sep;
  img.height = rows * r + (rows - 1) * sep;
  img.data.assign(static_cast<size_t>(img.width) * img.height * channels, 255);
  for (int i = 0; i < n; ++i) {
    const int gy = (i / cols) * (r + sep);
    const int gx = (i % cols) * (r + sep);
    for (int y = 0; y < r; ++y)
      for (int x = 0; x < r; ++x)
        for (int c = 0; c < channels; ++c)
          img.data[((static_cast<size_t>(gy + y) * img.width) + (gx + x)) * channels +
                   static_cast<size_t>(c)] = pixel(i, y, x, c);
  }
  return img;
}

}  // namespace

void emit_grid(const std::vector<MaskImage>& images, int cols, const std::string& path) {
  if (images.empty()) fail("emit_grid: no images");
  const int r = images[0].resolution;
  for (const auto& m : images)
    if (m.resolution != r) fail("emit_grid: mixed image sizes");
  const int64_t hw = static_cast<int64_t>(r) * r;
  write_pnm(path, tile(static_cast<int>(images.size()), r, cols, 3,
                       [&](int i, int y, int x, int c) -> uint8_t {
                         const double v =
                             images[static_cast<size_t>(i)].field.data()
                                 [c * hw + static_cast<int64_t>(y) * r + x];
                         return v == 1.0 ? 255 : 0;
                       }));
}

void emit_grid(const std::vector<EMImage>& images, int cols, const std::string& path) {
  if (images.empty()) fail("emit_grid: no images");
  const int r = images[0].resolution;
  for (const auto& m : images)
    if (m.resolution != r) fail("emit_grid: mixed image sizes");
  write_pnm(path, tile(static_cast<int>(images.size()), r, cols, 1,
                       [&](int i, int y, int x, int) -> uint8_t {
                         const double v = std::clamp(
                             images[static_cast<size_t>(i)].intensity.data()
                                 [static_cast<int64_t>(y) * r + x],
                             0.0, 1.0);
                         return static_cast<uint8_t>(std::lround(v * 255.0));
                       }));
}

}  // namespace spgan
