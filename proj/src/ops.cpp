#include "spgan/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace spgan {

namespace {

using detail::TensorData;
using Payload = std::shared_ptr<TensorData>;

constexpr double kBceClamp = 1e-12;

inline int ceil_div(int a, int b) {  // b > 0
  const int q = a / b, r = a % b;
  return q + (r > 0 ? 1 : 0);
}
inline int floor_div(int a, int b) {  // b > 0
  const int q = a / b, r = a % b;
  return q - (r < 0 ? 1 : 0);
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

void require_rank3(const Tensor& t, const char* role) {
  require(t.rank() == 3, std::string(role) + ": expected rank-3 (C,H,W), got " +
                             shape_str(t.shape()));
}

// Accumulate into grad buffers only for tracked payloads.
inline bool wants_grad(const Payload& p) { return p->tracked; }

struct ConvDims {
  int cin, h, w;
  int cout, k;
  int ho, wo;
};

ConvDims conv_dims(const Tensor& x, const Tensor& kernel, const Tensor& bias,
                   int stride, Pad4 pad) {
  require_rank3(x, "conv2d input");
  require(kernel.rank() == 4, "conv2d kernel: expected rank-4 (C_out,C_in,k,k), got " +
                                  shape_str(kernel.shape()));
  ConvDims d{};
  d.cin = x.shape()[0];
  d.h = x.shape()[1];
  d.w = x.shape()[2];
  d.cout = kernel.shape()[0];
  d.k = kernel.shape()[2];
  require(kernel.shape()[3] == d.k, "conv2d kernel: non-square kernel " +
                                        shape_str(kernel.shape()));
  require(kernel.shape()[1] == d.cin,
          "conv2d: kernel C_in=" + std::to_string(kernel.shape()[1]) +
              " does not match input C=" + std::to_string(d.cin));
  require(bias.rank() == 1 && bias.shape()[0] == d.cout,
          "conv2d bias: expected shape (" + std::to_string(d.cout) + "), got " +
              shape_str(bias.shape()));
  require(d.k >= 1, "conv2d: kernel extent k=" + std::to_string(d.k) + " must be >= 1");
  require(stride >= 1, "conv2d: stride=" + std::to_string(stride) + " must be >= 1");
  require(pad.left >= 0 && pad.right >= 0 && pad.top >= 0 && pad.bottom >= 0,
          "conv2d: negative padding");
  const int hp = d.h + pad.top + pad.bottom;
  const int wp = d.w + pad.left + pad.right;
  require(hp >= d.k, "conv2d: padded height " + std::to_string(hp) +
                         " is smaller than kernel extent " + std::to_string(d.k));
  require(wp >= d.k, "conv2d: padded width " + std::to_string(wp) +
                         " is smaller than kernel extent " + std::to_string(d.k));
  d.ho = (hp - d.k) / stride + 1;
  d.wo = (wp - d.k) / stride + 1;
  return d;
}

}  // namespace

// --- conv2d ---------------------------------------------------------------

Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias,
              int stride, Pad4 pad) {
  const ConvDims d = conv_dims(x, kernel, bias, stride, pad);
  Tensor out = Tensor::zeros({d.cout, d.ho, d.wo});

  const double* xv = x.data();
  const double* wv = kernel.data();
  const double* bv = bias.data();
  double* yv = out.data();
  const int s = stride;

  for (int co = 0; co < d.cout; ++co) {
    double* yplane = yv + static_cast<int64_t>(co) * d.ho * d.wo;
    const double b = bv[co];
    for (int64_t i = 0; i < static_cast<int64_t>(d.ho) * d.wo; ++i) yplane[i] = b;
    for (int ci = 0; ci < d.cin; ++ci) {
      const double* xplane = xv + static_cast<int64_t>(ci) * d.h * d.w;
      const double* wbase = wv + ((static_cast<int64_t>(co) * d.cin + ci) * d.k) * d.k;
      for (int ky = 0; ky < d.k; ++ky) {
        const double* wrow = wbase + static_cast<int64_t>(ky) * d.k;
        for (int oy = 0; oy < d.ho; ++oy) {
          const int iy = oy * s - pad.top + ky;
          if (iy < 0 || iy >= d.h) continue;
          const double* xrow = xplane + static_cast<int64_t>(iy) * d.w;
          double* yrow = yplane + static_cast<int64_t>(oy) * d.wo;
          for (int kx = 0; kx < d.k; ++kx) {
            const double wgt = wrow[kx];
            const int base = kx - pad.left;
            const int ox0 = std::max(0, ceil_div(-base, s));
            const int ox1 = std::min(d.wo - 1, floor_div(d.w - 1 - base, s));
            const double* xr = xrow + base;
            for (int ox = ox0; ox <= ox1; ++ox) yrow[ox] += wgt * xr[ox * s];
          }
        }
      }
    }
  }

  Tape* tape = common_tape({&x, &kernel, &bias});
  if (tape) {
    tape->adopt(out);
    Payload px = x.payload(), pw = kernel.payload(), pb = bias.payload(),
            py = out.payload();
    tape->record([px, pw, pb, py, d, s, pad]() {
      const double* gy = py->grad.data();
      // bias grad: plane sums
      if (wants_grad(pb)) {
        for (int co = 0; co < d.cout; ++co) {
          double acc = 0.0;
          const double* gplane = gy + static_cast<int64_t>(co) * d.ho * d.wo;
          for (int64_t i = 0; i < static_cast<int64_t>(d.ho) * d.wo; ++i)
            acc += gplane[i];
          pb->grad[co] += acc;
        }
      }
      // kernel grad: correlate input with gy
      if (wants_grad(pw)) {
        const double* xv = px->value.data();
        for (int co = 0; co < d.cout; ++co) {
          const double* gplane = gy + static_cast<int64_t>(co) * d.ho * d.wo;
          for (int ci = 0; ci < d.cin; ++ci) {
            const double* xplane = xv + static_cast<int64_t>(ci) * d.h * d.w;
            double* gw = pw->grad.data() +
                         ((static_cast<int64_t>(co) * d.cin + ci) * d.k) * d.k;
            for (int ky = 0; ky < d.k; ++ky) {
              for (int kx = 0; kx < d.k; ++kx) {
                const int base = kx - pad.left;
                const int ox0 = std::max(0, ceil_div(-base, s));
                const int ox1 = std::min(d.wo - 1, floor_div(d.w - 1 - base, s));
                double acc = 0.0;
                for (int oy = 0; oy < d.ho; ++oy) {
                  const int iy = oy * s - pad.top + ky;
                  if (iy < 0 || iy >= d.h) continue;
                  const double* xrow = xplane + static_cast<int64_t>(iy) * d.w + base;
                  const double* grow = gplane + static_cast<int64_t>(oy) * d.wo;
                  for (int ox = ox0; ox <= ox1; ++ox) acc += grow[ox] * xrow[ox * s];
                }
                gw[static_cast<int64_t>(ky) * d.k + kx] += acc;
              }
            }
          }
        }
      }
      // input grad: scatter gy through the kernel
      if (wants_grad(px)) {
        const double* wv = pw->value.data();
        for (int ci = 0; ci < d.cin; ++ci) {
          double* gxplane = px->grad.data() + static_cast<int64_t>(ci) * d.h * d.w;
          for (int co = 0; co < d.cout; ++co) {
            const double* gplane = gy + static_cast<int64_t>(co) * d.ho * d.wo;
            const double* wbase =
                wv + ((static_cast<int64_t>(co) * d.cin + ci) * d.k) * d.k;
            for (int ky = 0; ky < d.k; ++ky) {
              const double* wrow = wbase + static_cast<int64_t>(ky) * d.k;
              for (int oy = 0; oy < d.ho; ++oy) {
                const int iy = oy * s - pad.top + ky;
                if (iy < 0 || iy >= d.h) continue;
                double* gxrow = gxplane + static_cast<int64_t>(iy) * d.w;
                const double* grow = gplane + static_cast<int64_t>(oy) * d.wo;
                for (int kx = 0; kx < d.k; ++kx) {
                  const double wgt = wrow[kx];
                  const int base = kx - pad.left;
                  const int ox0 = std::max(0, ceil_div(-base, s));
                  const int ox1 = std::min(d.wo - 1, floor_div(d.w - 1 - base, s));
                  double* gxr = gxrow + base;
                  for (int ox = ox0; ox <= ox1; ++ox) gxr[ox * s] += wgt * grow[ox];
                }
              }
            }
          }
        }
      }
    });
  }
  return out;
}

// --- conv_transpose2d -------------------------------------------------------

Tensor conv_transpose2d(const Tensor& x, const Tensor& kernel,
                        const Tensor& bias, int stride, int pad) {
  require_rank3(x, "conv_transpose2d input");
  require(kernel.rank() == 4,
          "conv_transpose2d kernel: expected rank-4 (C_in,C_out,k,k), got " +
              shape_str(kernel.shape()));
  const int cin = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  const int cout = kernel.shape()[1], k = kernel.shape()[2];
  require(kernel.shape()[3] == k, "conv_transpose2d kernel: non-square kernel " +
                                      shape_str(kernel.shape()));
  require(kernel.shape()[0] == cin,
          "conv_transpose2d: kernel C_in=" + std::to_string(kernel.shape()[0]) +
              " does not match input C=" + std::to_string(cin));
  require(bias.rank() == 1 && bias.shape()[0] == cout,
          "conv_transpose2d bias: expected shape (" + std::to_string(cout) +
              "), got " + shape_str(bias.shape()));
  require(k >= 1, "conv_transpose2d: kernel extent must be >= 1");
  require(stride >= 1, "conv_transpose2d: stride must be >= 1");
  require(pad >= 0, "conv_transpose2d: negative padding");
  const int ho = (h - 1) * stride - 2 * pad + k;
  const int wo = (w - 1) * stride - 2 * pad + k;
  require(ho >= 1 && wo >= 1, "conv_transpose2d: output extent " +
                                  std::to_string(ho) + "x" + std::to_string(wo) +
                                  " is non-positive");

  Tensor out = Tensor::zeros({cout, ho, wo});
  const double* xv = x.data();
  const double* wv = kernel.data();
  const double* bv = bias.data();
  double* yv = out.data();
  const int s = stride;

  for (int co = 0; co < cout; ++co) {
    double* yplane = yv + static_cast<int64_t>(co) * ho * wo;
    const double b = bv[co];
    for (int64_t i = 0; i < static_cast<int64_t>(ho) * wo; ++i) yplane[i] = b;
  }
  for (int ci = 0; ci < cin; ++ci) {
    const double* xplane = xv + static_cast<int64_t>(ci) * h * w;
    for (int co = 0; co < cout; ++co) {
      double* yplane = yv + static_cast<int64_t>(co) * ho * wo;
      const double* wbase = wv + ((static_cast<int64_t>(ci) * cout + co) * k) * k;
      for (int ky = 0; ky < k; ++ky) {
        const double* wrow = wbase + static_cast<int64_t>(ky) * k;
        for (int iy = 0; iy < h; ++iy) {
          const int oy = iy * s - pad + ky;
          if (oy < 0 || oy >= ho) continue;
          const double* xrow = xplane + static_cast<int64_t>(iy) * w;
          double* yrow = yplane + static_cast<int64_t>(oy) * wo;
          for (int kx = 0; kx < k; ++kx) {
            const double wgt = wrow[kx];
            const int base = kx - pad;
            const int ix0 = std::max(0, ceil_div(-base, s));
            const int ix1 = std::min(w - 1, floor_div(wo - 1 - base, s));
            double* yr = yrow + base;
            for (int ix = ix0; ix <= ix1; ++ix) yr[ix * s] += wgt * xrow[ix];
          }
        }
      }
    }
  }

  Tape* tape = common_tape({&x, &kernel, &bias});
  if (tape) {
    tape->adopt(out);
    Payload px = x.payload(), pw = kernel.payload(), pb = bias.payload(),
            py = out.payload();
    tape->record([px, pw, pb, py, cin, cout, h, w, ho, wo, k, s, pad]() {
      const double* gy = py->grad.data();
      if (wants_grad(pb)) {
        for (int co = 0; co < cout; ++co) {
          double acc = 0.0;
          const double* gplane = gy + static_cast<int64_t>(co) * ho * wo;
          for (int64_t i = 0; i < static_cast<int64_t>(ho) * wo; ++i) acc += gplane[i];
          pb->grad[co] += acc;
        }
      }
      if (wants_grad(pw)) {
        const double* xv = px->value.data();
        for (int ci = 0; ci < cin; ++ci) {
          const double* xplane = xv + static_cast<int64_t>(ci) * h * w;
          for (int co = 0; co < cout; ++co) {
            const double* gplane = gy + static_cast<int64_t>(co) * ho * wo;
            double* gw = pw->grad.data() +
                         ((static_cast<int64_t>(ci) * cout + co) * k) * k;
            for (int ky = 0; ky < k; ++ky) {
              for (int kx = 0; kx < k; ++kx) {
                const int base = kx - pad;
                const int ix0 = std::max(0, ceil_div(-base, s));
                const int ix1 = std::min(w - 1, floor_div(wo - 1 - base, s));
                double acc = 0.0;
                for (int iy = 0; iy < h; ++iy) {
                  const int oy = iy * s - pad + ky;
                  if (oy < 0 || oy >= ho) continue;
                  const double* xrow = xplane + static_cast<int64_t>(iy) * w;
                  const double* grow = gplane + static_cast<int64_t>(oy) * wo + base;
                  for (int ix = ix0; ix <= ix1; ++ix) acc += xrow[ix] * grow[ix * s];
                }
                gw[static_cast<int64_t>(ky) * k + kx] += acc;
              }
            }
          }
        }
      }
      if (wants_grad(px)) {
        const double* wv = pw->value.data();
        for (int ci = 0; ci < cin; ++ci) {
          double* gxplane = px->grad.data() + static_cast<int64_t>(ci) * h * w;
          for (int co = 0; co < cout; ++co) {
            const double* gplane = gy + static_cast<int64_t>(co) * ho * wo;
            const double* wbase =
                wv + ((static_cast<int64_t>(ci) * cout + co) * k) * k;
            for (int ky = 0; ky < k; ++ky) {
              const double* wrow = wbase + static_cast<int64_t>(ky) * k;
              for (int iy = 0; iy < h; ++iy) {
                const int oy = iy * s - pad + ky;
                if (oy < 0 || oy >= ho) continue;
                double* gxrow = gxplane + static_cast<int64_t>(iy) * w;
                const double* grow = gplane + static_cast<int64_t>(oy) * wo;
                for (int kx = 0; kx < k; ++kx) {
                  const double wgt = wrow[kx];
                  const int base = kx - pad;
                  const int ix0 = std::max(0, ceil_div(-base, s));
                  const int ix1 = std::min(w - 1, floor_div(wo - 1 - base, s));
                  const double* gr = grow + base;
                  for (int ix = ix0; ix <= ix1; ++ix) gxrow[ix] += wgt * gr[ix * s];
                }
              }
            }
          }
        }
      }
    });
  }
  return out;
}

// --- instance_norm ----------------------------------------------------------

Tensor instance_norm(const Tensor& x, double eps) {
  require_rank3(x, "instance_norm input");
  require(eps > 0.0, "instance_norm: eps must be > 0");
  const int c = x.shape()[0];
  const int64_t n = static_cast<int64_t>(x.shape()[1]) * x.shape()[2];
  require(n >= 1, "instance_norm: empty spatial extent");

  Tensor out = Tensor::zeros(x.shape());
  std::vector<double> inv_std(static_cast<size_t>(c));
  const double* xv = x.data();
  double* yv = out.data();
  for (int ch = 0; ch < c; ++ch) {
    const double* xp = xv + ch * n;
    double* yp = yv + ch * n;
    double mean = 0.0;
    for (int64_t i = 0; i < n; ++i) mean += xp[i];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      const double dvi = xp[i] - mean;
      var += dvi * dvi;
    }
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<size_t>(ch)] = is;
    for (int64_t i = 0; i < n; ++i) yp[i] = (xp[i] - mean) * is;
  }

  Tape* tape = common_tape({&x});
  if (tape) {
    tape->adopt(out);
    Payload px = x.payload(), py = out.payload();
    tape->record([px, py, c, n, inv_std = std::move(inv_std)]() {
      if (!wants_grad(px)) return;
      // y is the normalized value itself, so
      // dx = inv_std * (g - mean(g) - y * mean(g*y))
      for (int ch = 0; ch < c; ++ch) {
        const double* g = py->grad.data() + ch * n;
        const double* y = py->value.data() + ch * n;
        double* gx = px->grad.data() + ch * n;
        double gmean = 0.0, gymean = 0.0;
        for (int64_t i = 0; i < n; ++i) {
          gmean += g[i];
          gymean += g[i] * y[i];
        }
        gmean /= static_cast<double>(n);
        gymean /= static_cast<double>(n);
        const double is = inv_std[static_cast<size_t>(ch)];
        for (int64_t i = 0; i < n; ++i)
          gx[i] += is * (g[i] - gmean - y[i] * gymean);
      }
    });
  }
  return out;
}

// --- pointwise --------------------------------------------------------------

Tensor pointwise(const Tensor& x, Pointwise kind, double alpha) {
  Tensor out = Tensor::zeros(x.shape());
  const double* xv = x.data();
  double* yv = out.data();
  const int64_t n = x.size();
  switch (kind) {
    case Pointwise::relu:
      for (int64_t i = 0; i < n; ++i) yv[i] = xv[i] > 0.0 ? xv[i] : 0.0;
      break;
    case Pointwise::leaky_relu:
      for (int64_t i = 0; i < n; ++i) yv[i] = xv[i] > 0.0 ? xv[i] : alpha * xv[i];
      break;
    case Pointwise::sigmoid:
      for (int64_t i = 0; i < n; ++i) {
        const double v = xv[i];
        yv[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                         : std::exp(v) / (1.0 + std::exp(v));
      }
      break;
  }

  Tape* tape = common_tape({&x});
  if (tape) {
    tape->adopt(out);
    Payload px = x.payload(), py = out.payload();
    tape->record([px, py, kind, alpha, n]() {
      if (!wants_grad(px)) return;
      const double* g = py->grad.data();
      const double* xv = px->value.data();
      const double* yv = py->value.data();
      double* gx = px->grad.data();
      switch (kind) {
        case Pointwise::relu:
          for (int64_t i = 0; i < n; ++i) gx[i] += xv[i] > 0.0 ? g[i] : 0.0;
          break;
        case Pointwise::leaky_relu:
          for (int64_t i = 0; i < n; ++i)
            gx[i] += xv[i] > 0.0 ? g[i] : alpha * g[i];
          break;
        case Pointwise::sigmoid:
          for (int64_t i = 0; i < n; ++i) gx[i] += yv[i] * (1.0 - yv[i]) * g[i];
          break;
      }
    });
  }
  return out;
}

// --- channel_softmax ----------------------------------------------------------

Tensor channel_softmax(const Tensor& x) {
  require_rank3(x, "channel_softmax input");
  const int c = x.shape()[0];
  require(c >= 2, "channel_softmax: needs C >= 2, got C=" + std::to_string(c));
  const int64_t hw = static_cast<int64_t>(x.shape()[1]) * x.shape()[2];

  Tensor out = Tensor::zeros(x.shape());
  const double* xv = x.data();
  double* yv = out.data();
  for (int64_t p = 0; p < hw; ++p) {
    double m = xv[p];
    for (int ch = 1; ch < c; ++ch) m = std::max(m, xv[ch * hw + p]);
    double z = 0.0;
    for (int ch = 0; ch < c; ++ch) {
      const double e = std::exp(xv[ch * hw + p] - m);
      yv[ch * hw + p] = e;
      z += e;
    }
    for (int ch = 0; ch < c; ++ch) yv[ch * hw + p] /= z;
  }

  Tape* tape = common_tape({&x});
  if (tape) {
    tape->adopt(out);
    Payload px = x.payload(), py = out.payload();
    tape->record([px, py, c, hw]() {
      if (!wants_grad(px)) return;
      const double* g = py->grad.data();
      const double* s = py->value.data();
      double* gx = px->grad.data();
      for (int64_t p = 0; p < hw; ++p) {
        double dot = 0.0;
        for (int ch = 0; ch < c; ++ch) dot += g[ch * hw + p] * s[ch * hw + p];
        for (int ch = 0; ch < c; ++ch)
          gx[ch * hw + p] += s[ch * hw + p] * (g[ch * hw + p] - dot);
      }
    });
  }
  return out;
}

// --- concat_channels ----------------------------------------------------------

Tensor concat_channels(const std::vector<Tensor>& inputs) {
  require(!inputs.empty(), "concat_channels: no inputs");
  for (const Tensor& t : inputs) require_rank3(t, "concat_channels input");
  const int h = inputs[0].shape()[1], w = inputs[0].shape()[2];
  int ctot = 0;
  for (const Tensor& t : inputs) {
    require(t.shape()[1] == h && t.shape()[2] == w,
            "concat_channels: spatial mismatch, " + shape_str(t.shape()) +
                " vs expected HxW " + std::to_string(h) + "x" + std::to_string(w));
    ctot += t.shape()[0];
  }
  Tensor out = Tensor::zeros({ctot, h, w});
  double* yv = out.data();
  int64_t off = 0;
  for (const Tensor& t : inputs) {
    std::copy(t.data(), t.data() + t.size(), yv + off);
    off += t.size();
  }

  std::vector<const Tensor*> ptrs;
  for (const Tensor& t : inputs) ptrs.push_back(&t);
  Tape* tape = nullptr;
  for (const Tensor& t : inputs) {
    Tape* tt = common_tape({&t});
    if (tt) {
      if (tape && tape != tt)
        throw std::logic_error("concat_channels: arguments live on different tapes");
      tape = tt;
    }
  }
  if (tape) {
    tape->adopt(out);
    std::vector<Payload> pin;
    for (const Tensor& t : inputs) pin.push_back(t.payload());
    Payload py = out.payload();
    tape->record([pin, py]() {
      const double* g = py->grad.data();
      int64_t off = 0;
      for (const Payload& p : pin) {
        const int64_t sz = static_cast<int64_t>(p->value.size());
        if (wants_grad(p)) {
          double* gp = p->grad.data();
          for (int64_t i = 0; i < sz; ++i) gp[i] += g[off + i];
        }
        off += sz;
      }
    });
  }
  return out;
}

// --- losses --------------------------------------------------------------

Tensor bce_loss(const Tensor& prob, const Tensor& target) {
  require(prob.shape() == target.shape(),
          "bce_loss: shape mismatch " + shape_str(prob.shape()) + " vs " +
              shape_str(target.shape()));
  const int64_t n = prob.size();
  require(n >= 1, "bce_loss: empty input");
  const double* pv = prob.data();
  const double* tv = target.data();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double p = std::clamp(pv[i], kBceClamp, 1.0 - kBceClamp);
    acc += -(tv[i] * std::log(p) + (1.0 - tv[i]) * std::log(1.0 - p));
  }
  Tensor out = Tensor::scalar(acc / static_cast<double>(n));

  Tape* tape = common_tape({&prob, &target});
  if (tape) {
    tape->adopt(out);
    Payload pp = prob.payload(), pt = target.payload(), py = out.payload();
    tape->record([pp, pt, py, n]() {
      const double g = py->grad[0] / static_cast<double>(n);
      const double* pv = pp->value.data();
      const double* tv = pt->value.data();
      if (wants_grad(pp)) {
        double* gp = pp->grad.data();
        for (int64_t i = 0; i < n; ++i) {
          const double p = pv[i];
          if (p <= kBceClamp || p >= 1.0 - kBceClamp) continue;  // clamp plateau
          gp[i] += g * (-tv[i] / p + (1.0 - tv[i]) / (1.0 - p));
        }
      }
      if (wants_grad(pt)) {
        double* gt = pt->grad.data();
        for (int64_t i = 0; i < n; ++i) {
          const double p = std::clamp(pv[i], kBceClamp, 1.0 - kBceClamp);
          gt[i] += g * std::log((1.0 - p) / p);
        }
      }
    });
  }
  return out;
}

Tensor l1_loss(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "l1_loss: shape mismatch " +
                                      shape_str(a.shape()) + " vs " +
                                      shape_str(b.shape()));
  const int64_t n = a.size();
  require(n >= 1, "l1_loss: empty input");
  const double* av = a.data();
  const double* bv = b.data();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) acc += std::abs(av[i] - bv[i]);
  Tensor out = Tensor::scalar(acc / static_cast<double>(n));

  Tape* tape = common_tape({&a, &b});
  if (tape) {
    tape->adopt(out);
    Payload pa = a.payload(), pb = b.payload(), py = out.payload();
    tape->record([pa, pb, py, n]() {
      const double g = py->grad[0] / static_cast<double>(n);
      const double* av = pa->value.data();
      const double* bv = pb->value.data();
      for (int64_t i = 0; i < n; ++i) {
        const double dlt = av[i] - bv[i];
        const double sgn = dlt > 0.0 ? 1.0 : (dlt < 0.0 ? -1.0 : 0.0);
        if (wants_grad(pa)) pa->grad[i] += g * sgn;
        if (wants_grad(pb)) pb->grad[i] -= g * sgn;
      }
    });
  }
  return out;
}

// --- helpers --------------------------------------------------------------

Tensor sum(const Tensor& x) {
  const int64_t n = x.size();
  const double* xv = x.data();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) acc += xv[i];
  Tensor out = Tensor::scalar(acc);
  Tape* tape = common_tape({&x});
  if (tape) {
    tape->adopt(out);
    Payload px = x.payload(), py = out.payload();
    tape->record([px, py, n]() {
      if (!wants_grad(px)) return;
      const double g = py->grad[0];
      for (int64_t i = 0; i < n; ++i) px->grad[i] += g;
    });
  }
  return out;
}

Tensor weighted_sum(const Tensor& x, const std::vector<double>& coeffs) {
  require(static_cast<int64_t>(coeffs.size()) == x.size(),
          "weighted_sum: coefficient count " + std::to_string(coeffs.size()) +
              " does not match tensor size " + std::to_string(x.size()));
  const int64_t n = x.size();
  const double* xv = x.data();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) acc += coeffs[static_cast<size_t>(i)] * xv[i];
  Tensor out = Tensor::scalar(acc);
  Tape* tape = common_tape({&x});
  if (tape) {
    tape->adopt(out);
    Payload px = x.payload(), py = out.payload();
    tape->record([px, py, coeffs, n]() {
      if (!wants_grad(px)) return;
      const double g = py->grad[0];
      for (int64_t i = 0; i < n; ++i)
        px->grad[i] += g * coeffs[static_cast<size_t>(i)];
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "add: shape mismatch " + shape_str(a.shape()) +
                                      " vs " + shape_str(b.shape()));
  const int64_t n = a.size();
  Tensor out = Tensor::zeros(a.shape());
  const double* av = a.data();
  const double* bv = b.data();
  double* yv = out.data();
  for (int64_t i = 0; i < n; ++i) yv[i] = av[i] + bv[i];
  Tape* tape = common_tape({&a, &b});
  if (tape) {
    tape->adopt(out);
    Payload pa = a.payload(), pb = b.payload(), py = out.payload();
    tape->record([pa, pb, py, n]() {
      const double* g = py->grad.data();
      if (wants_grad(pa))
        for (int64_t i = 0; i < n; ++i) pa->grad[i] += g[i];
      if (wants_grad(pb))
        for (int64_t i = 0; i < n; ++i) pb->grad[i] += g[i];
    });
  }
  return out;
}

Tensor scale(const Tensor& x, double c) {
  const int64_t n = x.size();
  Tensor out = Tensor::zeros(x.shape());
  const double* xv = x.data();
  double* yv = out.data();
  for (int64_t i = 0; i < n; ++i) yv[i] = c * xv[i];
  Tape* tape = common_tape({&x});
  if (tape) {
    tape->adopt(out);
    Payload px = x.payload(), py = out.payload();
    tape->record([px, py, c, n]() {
      if (!wants_grad(px)) return;
      const double* g = py->grad.data();
      for (int64_t i = 0; i < n; ++i) px->grad[i] += c * g[i];
    });
  }
  return out;
}

Tensor pick(const Tensor& x, int c, int y, int xcol) {
  require_rank3(x, "pick input");
  require(c >= 0 && c < x.shape()[0] && y >= 0 && y < x.shape()[1] && xcol >= 0 &&
              xcol < x.shape()[2],
          "pick: index (" + std::to_string(c) + "," + std::to_string(y) + "," +
              std::to_string(xcol) + ") out of range for " + shape_str(x.shape()));
  const int64_t idx =
      (static_cast<int64_t>(c) * x.shape()[1] + y) * x.shape()[2] + xcol;
  Tensor out = Tensor::scalar(x.data()[idx]);
  Tape* tape = common_tape({&x});
  if (tape) {
    tape->adopt(out);
    Payload px = x.payload(), py = out.payload();
    tape->record([px, py, idx]() {
      if (wants_grad(px)) px->grad[static_cast<size_t>(idx)] += py->grad[0];
    });
  }
  return out;
}

}  // namespace spgan
