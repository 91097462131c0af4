#include "spgan/data.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "spgan/rng.hpp"

namespace spgan {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

struct Grid {
  int r;
  std::vector<uint8_t> v;
  explicit Grid(int res) : r(res), v(static_cast<size_t>(res) * res, 0) {}
  uint8_t& at(int y, int x) { return v[static_cast<size_t>(y) * r + x]; }
  uint8_t at(int y, int x) const { return v[static_cast<size_t>(y) * r + x]; }
  bool in(int y, int x) const { return y >= 0 && y < r && x >= 0 && x < r; }
};

void paint_disk(Grid& g, double cy, double cx, double rad) {
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - rad)));
  const int y1 = std::min(g.r - 1, static_cast<int>(std::ceil(cy + rad)));
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - rad)));
  const int x1 = std::min(g.r - 1, static_cast<int>(std::ceil(cx + rad)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double dy = y - cy, dx = x - cx;
      if (dy * dy + dx * dx <= rad * rad) g.at(y, x) = 1;
    }
}

// Random walk dilated to 2-4 px, the membrane look-alike.
void paint_membrane(Grid& g, SeededRng& rng) {
  const int r = g.r;
  double y = rng.uniform(0.1 * r, 0.9 * r);
  double x = rng.uniform(0.1 * r, 0.9 * r);
  double angle = rng.uniform(0.0, kTwoPi);
  const double rad = rng.uniform(1.0, 2.0);  // thickness 2-4 px
  const int steps = 3 * r;
  for (int i = 0; i < steps; ++i) {
    paint_disk(g, y, x, rad);
    angle += 0.35 * rng.normal();
    y += std::sin(angle);
    x += std::cos(angle);
    if (y < -2 * rad || y > r + 2 * rad || x < -2 * rad || x > r + 2 * rad) break;
  }
}

// Perturbed-boundary ellipse; returns the pixels it would set that are
// currently clear, so the caller can keep the total area in range.
std::vector<int64_t> ellipse_pixels(const Grid& g, SeededRng& rng, double scale) {
  const int r = g.r;
  const double cy = rng.uniform(0.12 * r, 0.88 * r);
  const double cx = rng.uniform(0.12 * r, 0.88 * r);
  const double a = scale * rng.uniform(r / 14.0, r / 6.0);
  const double b = scale * rng.uniform(r / 14.0, r / 6.0);
  const double theta = rng.uniform(0.0, kTwoPi);
  const double amp = rng.uniform(0.08, 0.22);
  const int lobes = 3 + static_cast<int>(rng.below(4));
  const double phase = rng.uniform(0.0, kTwoPi);
  const double ct = std::cos(theta), st = std::sin(theta);
  const double reach = std::max(a, b) * (1.0 + amp) + 1.0;

  std::vector<int64_t> fresh;
  const int y0 = std::max(0, static_cast<int>(cy - reach));
  const int y1 = std::min(r - 1, static_cast<int>(cy + reach));
  const int x0 = std::max(0, static_cast<int>(cx - reach));
  const int x1 = std::min(r - 1, static_cast<int>(cx + reach));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double dy = y - cy, dx = x - cx;
      const double u = dx * ct + dy * st;
      const double v = -dx * st + dy * ct;
      const double rn = std::sqrt((u / a) * (u / a) + (v / b) * (v / b));
      const double phi = std::atan2(v, u);
      if (rn <= 1.0 + amp * std::sin(lobes * phi + phase) && !g.at(y, x))
        fresh.push_back(static_cast<int64_t>(y) * r + x);
    }
  return fresh;
}

// Smooth low-frequency field, a handful of random cosines.
std::vector<double> smooth_noise(int r, SeededRng& rng) {
  struct Wave {
    double fy, fx, phase, amp;
  };
  std::vector<Wave> waves(6);
  for (auto& w : waves) {
    w.fy = rng.uniform(0.5, 5.0);
    w.fx = rng.uniform(0.5, 5.0);
    w.phase = rng.uniform(0.0, kTwoPi);
    w.amp = rng.uniform(0.01, 0.045);
  }
  std::vector<double> field(static_cast<size_t>(r) * r, 0.0);
  for (int y = 0; y < r; ++y)
    for (int x = 0; x < r; ++x) {
      double acc = 0.0;
      for (const auto& w : waves)
        acc += w.amp * std::cos(kTwoPi * (w.fy * y + w.fx * x) / r + w.phase);
      field[static_cast<size_t>(y) * r + x] = acc;
    }
  return field;
}

EMImage render_em(const MaskImage& mask, SeededRng& rng) {
  const int r = mask.resolution;
  static const double kBase[3] = {0.38, 0.12, 0.64};  // mito, membrane, background
  const auto noise = smooth_noise(r, rng);
  Tensor em = Tensor::zeros({1, r, r});
  for (int y = 0; y < r; ++y)
    for (int x = 0; x < r; ++x) {
      const int cls = mask.class_at(y, x);
      double v = kBase[cls] + noise[static_cast<size_t>(y) * r + x];
      // darken class boundaries, the membrane-adjacent shading of EM data
      const bool edge = (y > 0 && mask.class_at(y - 1, x) != cls) ||
                        (y < r - 1 && mask.class_at(y + 1, x) != cls) ||
                        (x > 0 && mask.class_at(y, x - 1) != cls) ||
                        (x < r - 1 && mask.class_at(y, x + 1) != cls);
      if (edge) v *= 0.7;
      em.data()[static_cast<int64_t>(y) * r + x] = std::clamp(v, 0.0, 1.0);
    }
  return EMImage{r, std::move(em)};
}

MaskImage synth_mask(int r, SeededRng& rng) {
  Grid membrane(r);
  const int walks = 2 + static_cast<int>(rng.below(3));
  for (int i = 0; i < walks; ++i) paint_membrane(membrane, rng);

  // mitochondria painted last so their area count is exact
  Grid mito(r);
  const int64_t total = static_cast<int64_t>(r) * r;
  const int64_t target = static_cast<int64_t>(rng.uniform(0.07, 0.16) * total);
  const int64_t hard_cap = static_cast<int64_t>(0.19 * total);
  int64_t area = 0;
  double scale = 1.0;
  for (int attempt = 0; attempt < 200 && area < target; ++attempt) {
    const auto fresh = ellipse_pixels(mito, rng, scale);
    if (area + static_cast<int64_t>(fresh.size()) > hard_cap) {
      scale *= 0.8;  // blob too big for the remaining budget
      continue;
    }
    if (fresh.empty()) continue;
    for (int64_t p : fresh) mito.v[static_cast<size_t>(p)] = 1;
    area += static_cast<int64_t>(fresh.size());
  }
  // deterministic fallback: tile small squares until the floor is met
  const int64_t floor_area = static_cast<int64_t>(0.05 * total) + 1;
  for (int y = 2; y < r - 6 && area < floor_area; y += 8)
    for (int x = 2; x < r - 6 && area < floor_area; x += 8)
      for (int dy = 0; dy < 4 && area < floor_area; ++dy)
        for (int dx = 0; dx < 4 && area < floor_area; ++dx)
          if (!mito.at(y + dy, x + dx)) {
            mito.at(y + dy, x + dx) = 1;
            ++area;
          }

  Tensor field = Tensor::zeros({3, r, r});
  const int64_t hw = total;
  for (int64_t p = 0; p < hw; ++p) {
    int cls = 2;
    if (mito.v[static_cast<size_t>(p)])
      cls = 0;
    else if (membrane.v[static_cast<size_t>(p)])
      cls = 1;
    field.data()[cls * hw + p] = 1.0;
  }
  return MaskImage{r, std::move(field)};
}

}  // namespace

PairedDataset synth_corpus(int n, int resolution, uint64_t seed) {
  if (n < 1) throw std::invalid_argument("synth_corpus: n must be >= 1");
  if (resolution < 16)
    throw std::invalid_argument("synth_corpus: resolution must be >= 16");
  PairedDataset ds;
  ds.provenance = Provenance::synthetic;
  ds.resolution = resolution;
  for (int i = 0; i < n; ++i) {
    SeededRng rng(SeededRng::derive(seed, static_cast<uint64_t>(i)));
    MaskImage mask = synth_mask(resolution, rng);
    EMImage em = render_em(mask, rng);
    ds.items.push_back(PairedItem{std::move(mask), std::move(em)});
  }
  return ds;
}

AugmentedPair augment(const MaskImage& mask, const EMImage* em, double crop_area,
                      uint64_t seed) {
  if (!(crop_area > 0.0 && crop_area <= 1.0))
    throw std::invalid_argument("augment: crop_area must lie in (0,1]");
  const int r = mask.resolution;
  if (em && em->resolution != r)
    throw std::invalid_argument("augment: mask and image resolutions differ");

  SeededRng rng(seed);
  const bool flip_v = rng.bernoulli(0.5);
  const bool flip_h = rng.bernoulli(0.5);
  const int side =
      std::max(1, static_cast<int>(std::floor(r * std::sqrt(crop_area))));
  const int oy = static_cast<int>(rng.below(static_cast<uint64_t>(r - side + 1)));
  const int ox = static_cast<int>(rng.below(static_cast<uint64_t>(r - side + 1)));

  const auto transform = [&](const Tensor& t) {
    const int c = t.shape()[0];
    Tensor crop = Tensor::zeros({c, side, side});
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
          int sy = oy + y, sx = ox + x;
          if (flip_v) sy = r - 1 - sy;
          if (flip_h) sx = r - 1 - sx;
          crop.data()[(static_cast<int64_t>(ch) * side + y) * side + x] =
              t.data()[(static_cast<int64_t>(ch) * r + sy) * r + sx];
        }
    return crop;
  };

  AugmentedPair out;
  Tensor mcrop = transform(mask.field);
  out.mask = MaskImage{r, side == r ? std::move(mcrop)
                                    : resize_nearest(mcrop, r, r)};
  if (em) {
    Tensor ecrop = transform(em->intensity);
    Tensor up = side == r ? std::move(ecrop) : resize_bilinear(ecrop, r, r);
    for (int64_t i = 0; i < up.size(); ++i)
      up.data()[i] = std::clamp(up.data()[i], 0.0, 1.0);
    out.em = EMImage{r, std::move(up)};
  }
  return out;
}

MaskImage harden_mask(const Tensor& soft) {
  if (soft.rank() != 3 || soft.shape()[0] != 3 || soft.shape()[1] != soft.shape()[2])
    throw std::invalid_argument("harden_mask: expected (3,R,R), got " +
                                shape_str(soft.shape()));
  const int r = soft.shape()[1];
  const int64_t hw = static_cast<int64_t>(r) * r;
  Tensor field = Tensor::zeros({3, r, r});
  for (int64_t p = 0; p < hw; ++p) {
    const double s =
        soft.data()[p] + soft.data()[hw + p] + soft.data()[2 * hw + p];
    if (std::abs(s - 1.0) > 1e-6)
      throw std::invalid_argument("harden_mask: pixel " + std::to_string(p) +
                                  " channel sum " + std::to_string(s) +
                                  " is not a simplex");
    int best = 0;
    for (int c = 1; c < 3; ++c)
      if (soft.data()[c * hw + p] > soft.data()[best * hw + p]) best = c;
    field.data()[best * hw + p] = 1.0;
  }
  return MaskImage{r, std::move(field)};
}

}  // namespace spgan
