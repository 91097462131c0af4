#include "spgan/gradsuite.hpp"

#include <algorithm>
#include <cmath>

#include "spgan/models.hpp"
#include "spgan/ops.hpp"
#include "spgan/rng.hpp"

namespace spgan {

namespace {

constexpr double kThreshold = 1e-5;
constexpr double kH = 1e-6;

Tensor rand_tensor(Shape shape, SeededRng& rng, double lo, double hi) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(lo, hi);
  return t;
}

std::vector<double> rand_coeffs(int64_t n, SeededRng& rng) {
  std::vector<double> c(static_cast<size_t>(n));
  for (auto& v : c) v = rng.uniform(0.5, 1.5);
  return c;
}

struct Collector {
  GradSuiteResult& out;

  GradSuiteEntry& entry(const std::string& name) {
    for (auto& e : out.entries)
      if (e.name == name) return e;
    out.entries.push_back(GradSuiteEntry{name, 0.0, 0, true});
    return out.entries.back();
  }

  void fold(const std::string& name, const GradCheckResult& r) {
    GradSuiteEntry& e = entry(name);
    e.max_rel_err = std::max(e.max_rel_err, r.max_rel_err);
    e.coords_checked += r.coords_checked;
  }
};

// deliberately wrong backward (3x instead of 2x), the negative control
Tensor buggy_square_sum(const Tensor& x) {
  Tensor out = Tensor::scalar(0.0);
  double acc = 0.0;
  for (int64_t i = 0; i < x.size(); ++i) acc += x.data()[i] * x.data()[i];
  out.data()[0] = acc;
  Tape* tape = common_tape({&x});
  if (tape) {
    tape->adopt(out);
    auto px = x.payload();
    auto py = out.payload();
    tape->record([px, py]() {
      for (size_t i = 0; i < px->value.size(); ++i)
        px->grad[i] += 3.0 * px->value[i] * py->grad[0];
    });
  }
  return out;
}

void check_block(Collector& col, const std::string& name, const LayerGraph& g,
                 const ModelParams& params, const Tensor& input, SeededRng& rng,
                 uint64_t seed) {
  // output weighting fixed per seed
  Tensor probe_out = forward(g, params, input);
  const auto coeffs = rand_coeffs(probe_out.size(), rng);

  col.fold(name + ".input",
           grad_check(
               [&](const Tensor& t) {
                 return weighted_sum(forward(g, params, t), coeffs);
               },
               input, kH));

  for (const auto& [id, lp] : params.entries()) {
    ModelParams varied = params;
    col.fold(name + ".params",
             grad_check(
                 [&](const Tensor& t) {
                   varied.at(id).kernel = t;
                   return weighted_sum(forward(g, varied, input), coeffs);
                 },
                 lp.kernel, kH, /*sample=*/8, seed ^ std::hash<std::string>{}(id)));
    col.fold(name + ".params",
             grad_check(
                 [&](const Tensor& t) {
                   varied = params;
                   varied.at(id).bias = t;
                   return weighted_sum(forward(g, varied, input), coeffs);
                 },
                 lp.bias, kH, /*sample=*/4, seed ^ (std::hash<std::string>{}(id) + 1)));
  }
}

}  // namespace

GradSuiteResult run_grad_suite(int seeds) {
  GradSuiteResult out;
  Collector col{out};

  for (int s = 0; s < seeds; ++s) {
    const uint64_t seed = 1000 + static_cast<uint64_t>(s);
    SeededRng rng(seed);

    // conv2d, random small geometry
    {
      const int cin = 1 + static_cast<int>(rng.below(3));
      const int cout = 1 + static_cast<int>(rng.below(3));
      const int k = 1 + static_cast<int>(rng.below(4));
      const int stride = 1 + static_cast<int>(rng.below(2));
      const Pad4 pad{static_cast<int>(rng.below(3)), static_cast<int>(rng.below(3)),
                     static_cast<int>(rng.below(3)), static_cast<int>(rng.below(3))};
      const int h = 5 + static_cast<int>(rng.below(4));
      const int w = 5 + static_cast<int>(rng.below(4));
      Tensor x = rand_tensor({cin, h, w}, rng, -1.0, 1.0);
      Tensor kern = rand_tensor({cout, cin, k, k}, rng, -1.0, 1.0);
      Tensor bias = rand_tensor({cout}, rng, -0.5, 0.5);
      Tensor y = conv2d(x, kern, bias, stride, pad);
      const auto coeffs = rand_coeffs(y.size(), rng);
      const auto f_x = [&](const Tensor& t) {
        return weighted_sum(conv2d(t, kern, bias, stride, pad), coeffs);
      };
      const auto f_k = [&](const Tensor& t) {
        return weighted_sum(conv2d(x, t, bias, stride, pad), coeffs);
      };
      const auto f_b = [&](const Tensor& t) {
        return weighted_sum(conv2d(x, kern, t, stride, pad), coeffs);
      };
      col.fold("conv2d.input", grad_check(f_x, x, kH));
      col.fold("conv2d.kernel", grad_check(f_k, kern, kH));
      col.fold("conv2d.bias", grad_check(f_b, bias, kH));
    }

    // conv_transpose2d
    {
      const int cin = 1 + static_cast<int>(rng.below(3));
      const int cout = 1 + static_cast<int>(rng.below(3));
      const int k = 1 + static_cast<int>(rng.below(4));
      const int stride = 1 + static_cast<int>(rng.below(2));
      const int pad = static_cast<int>(rng.below(static_cast<uint64_t>(k) / 2 + 1));
      const int h = 4 + static_cast<int>(rng.below(3));
      const int w = 4 + static_cast<int>(rng.below(3));
      Tensor x = rand_tensor({cin, h, w}, rng, -1.0, 1.0);
      Tensor kern = rand_tensor({cin, cout, k, k}, rng, -1.0, 1.0);
      Tensor bias = rand_tensor({cout}, rng, -0.5, 0.5);
      Tensor y = conv_transpose2d(x, kern, bias, stride, pad);
      const auto coeffs = rand_coeffs(y.size(), rng);
      col.fold("conv_transpose2d.input",
               grad_check(
                   [&](const Tensor& t) {
                     return weighted_sum(conv_transpose2d(t, kern, bias, stride, pad),
                                         coeffs);
                   },
                   x, kH));
      col.fold("conv_transpose2d.kernel",
               grad_check(
                   [&](const Tensor& t) {
                     return weighted_sum(conv_transpose2d(x, t, bias, stride, pad),
                                         coeffs);
                   },
                   kern, kH));
      col.fold("conv_transpose2d.bias",
               grad_check(
                   [&](const Tensor& t) {
                     return weighted_sum(conv_transpose2d(x, kern, t, stride, pad),
                                         coeffs);
                   },
                   bias, kH));
    }

    // instance_norm on 2x4x4
    {
      Tensor x = rand_tensor({2, 4, 4}, rng, -2.0, 2.0);
      const auto coeffs = rand_coeffs(x.size(), rng);
      col.fold("instance_norm.input",
               grad_check(
                   [&](const Tensor& t) {
                     return weighted_sum(instance_norm(t), coeffs);
                   },
                   x, kH));
    }

    // pointwise; values bounded away from the relu kink by construction
    {
      Tensor x = rand_tensor({3, 4, 4}, rng, -2.0, 2.0);
      for (int64_t i = 0; i < x.size(); ++i)
        if (std::abs(x.data()[i]) < 1e-3) x.data()[i] = 1e-3;
      const auto coeffs = rand_coeffs(x.size(), rng);
      col.fold("relu", grad_check(
                           [&](const Tensor& t) {
                             return weighted_sum(relu(t), coeffs);
                           },
                           x, kH));
      col.fold("leaky_relu", grad_check(
                                 [&](const Tensor& t) {
                                   return weighted_sum(leaky_relu(t, 0.2), coeffs);
                                 },
                                 x, kH));
      col.fold("sigmoid", grad_check(
                              [&](const Tensor& t) {
                                return weighted_sum(sigmoid(t), coeffs);
                              },
                              x, kH));
    }

    // channel softmax on logits
    {
      Tensor x = rand_tensor({3, 3, 3}, rng, -2.0, 2.0);
      const auto coeffs = rand_coeffs(x.size(), rng);
      col.fold("channel_softmax",
               grad_check(
                   [&](const Tensor& t) {
                     return weighted_sum(channel_softmax(t), coeffs);
                   },
                   x, kH));
    }

    // losses
    {
      Tensor p = rand_tensor({4, 4}, rng, 0.05, 0.95);
      Tensor t = Tensor::zeros({4, 4});
      for (int64_t i = 0; i < t.size(); ++i)
        t.data()[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
      col.fold("bce_loss.prob", grad_check(
                                    [&](const Tensor& q) {
                                      return bce_loss(q, t);
                                    },
                                    p, kH));
      Tensor a = rand_tensor({4, 4}, rng, -1.0, 1.0);
      Tensor b = rand_tensor({4, 4}, rng, -1.0, 1.0);
      for (int64_t i = 0; i < a.size(); ++i)  // keep clear of the |.| tie
        if (std::abs(a.data()[i] - b.data()[i]) < 1e-3)
          a.data()[i] = b.data()[i] + 1e-3;
      col.fold("l1_loss.a", grad_check(
                                [&](const Tensor& q) {
                                  return l1_loss(q, b);
                                },
                                a, kH));
    }

    // full blocks at small shapes
    {
      SeededRng init(seed * 7 + 1);
      const LayerGraph g = build_mask_generator(16, 4);
      const ModelParams params = ModelParams::init(g, init, 0.2);
      Tensor z = rand_tensor({4, 4, 4}, rng, -1.0, 1.0);
      check_block(col, "block.mask_generator", g, params, z, rng, seed);
    }
    {
      SeededRng init(seed * 7 + 2);
      const LayerGraph g = build_unet_generator(8, 2);
      const ModelParams params = ModelParams::init(g, init, 0.2);
      Tensor x = rand_tensor({3, 8, 8}, rng, 0.0, 1.0);
      check_block(col, "block.unet_generator", g, params, x, rng, seed);
    }
    for (const DiscVariant v : {DiscVariant::p16, DiscVariant::p70, DiscVariant::skip}) {
      SeededRng init(seed * 7 + 3 + static_cast<uint64_t>(v));
      const LayerGraph g = build_discriminator(v, 3, 8);
      const ModelParams params = ModelParams::init(g, init, 0.2);
      Tensor x = rand_tensor({3, 8, 8}, rng, 0.0, 1.0);
      check_block(col, std::string("block.disc_") + to_string(v), g, params, x, rng,
                  seed);
    }
  }

  // negative control: wrong backward must be caught loudly
  {
    SeededRng rng(99);
    Tensor x = rand_tensor({5}, rng, 0.5, 1.5);
    const auto r = grad_check([](const Tensor& t) { return buggy_square_sum(t); }, x, kH);
    GradSuiteEntry e{"negative_control", r.max_rel_err, r.coords_checked,
                     r.max_rel_err > 1e-2};
    out.entries.push_back(e);
  }

  for (auto& e : out.entries) {
    if (e.name != "negative_control") e.pass = e.max_rel_err < kThreshold;
    out.all_pass = out.all_pass && e.pass;
  }
  return out;
}

}  // namespace spgan
