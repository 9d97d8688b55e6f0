#include "devgan/ops.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <vector>

#include "devgan/error.hpp"
#include "devgan/kernels/gemm.hpp"

namespace devgan::ops {

namespace {

using kernels::ConvGeometry;
using kernels::DenseOperand;
using kernels::Im2colOperand;

std::atomic<std::uint64_t> g_forward_macs{0};

void require_rank(const Var& v, std::size_t rank, const char* what) {
  if (v.value().rank() != rank) {
    throw Error(ErrorCode::shape_mismatch, std::string(what) + " must have rank " +
                                               std::to_string(rank) + ", got " +
                                               shape_str(v.shape()));
  }
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorCode::shape_mismatch, std::string(op) + ": shapes " + shape_str(a.shape()) +
                                               " and " + shape_str(b.shape()) + " differ");
  }
}

// y[n] (+)= W[cout x patch] * im2col(x[n]) for every sample.
void conv_forward_raw(const double* x, std::size_t batch, const ConvGeometry& g, const double* w,
                      std::size_t cout, double* y, bool accumulate) {
  const std::size_t in_stride = g.channels * g.height * g.width;
  const std::size_t out_stride = cout * g.positions();
  for (std::size_t n = 0; n < batch; ++n) {
    kernels::gemm(cout, g.positions(), g.patch_size(), DenseOperand{w, g.patch_size()},
                  Im2colOperand{x + n * in_stride, g}, y + n * out_stride, g.positions(),
                  accumulate);
  }
}

// dx[n] += im2col^T(W^T * dy[n]): the adjoint of conv_forward_raw.
void conv_input_grad(const double* dy, std::size_t batch, const ConvGeometry& g, const double* w,
                     std::size_t cout, double* dx) {
  const std::size_t in_stride = g.channels * g.height * g.width;
  const std::size_t out_stride = cout * g.positions();
  const std::size_t kk = g.kernel_h * g.kernel_w;

  if (g.stride == 1 && g.kernel_h == g.kernel_w && g.pad + 1 <= g.kernel_h) {
    // Stride-1 adjoint is a stride-1 convolution of dy with the spatially
    // flipped, channel-transposed kernel.
    std::vector<double> flipped(g.channels * cout * kk);
    for (std::size_t co = 0; co < cout; ++co) {
      for (std::size_t ci = 0; ci < g.channels; ++ci) {
        const double* src = w + (co * g.channels + ci) * kk;
        double* dst = flipped.data() + (ci * cout + co) * kk;
        for (std::size_t t = 0; t < kk; ++t) dst[t] = src[kk - 1 - t];
      }
    }
    const ConvGeometry back = kernels::make_geometry(cout, g.out_h, g.out_w, g.kernel_h,
                                                     g.kernel_w, 1, g.kernel_h - 1 - g.pad);
    for (std::size_t n = 0; n < batch; ++n) {
      kernels::gemm(g.channels, back.positions(), back.patch_size(),
                    DenseOperand{flipped.data(), back.patch_size()},
                    Im2colOperand{dy + n * out_stride, back}, dx + n * in_stride,
                    back.positions(), true);
    }
    return;
  }

  std::vector<double> col(g.patch_size() * g.positions());
  for (std::size_t n = 0; n < batch; ++n) {
    kernels::gemm(g.patch_size(), g.positions(), cout,
                  DenseOperand{w, g.patch_size(), /*transposed=*/true},
                  DenseOperand{dy + n * out_stride, g.positions()}, col.data(), g.positions(),
                  false);
    kernels::col2im_add(col.data(), g, dx + n * in_stride);
  }
}

// dw += sum_n dy[n] * im2col(x[n])^T
void conv_weight_grad(const double* dy, const double* x, std::size_t batch, const ConvGeometry& g,
                      std::size_t cout, double* dw) {
  const std::size_t in_stride = g.channels * g.height * g.width;
  const std::size_t out_stride = cout * g.positions();
  for (std::size_t n = 0; n < batch; ++n) {
    kernels::gemm(cout, g.patch_size(), g.positions(),
                  DenseOperand{dy + n * out_stride, g.positions()},
                  Im2colOperand{x + n * in_stride, g, /*transposed=*/true}, dw, g.patch_size(),
                  true);
  }
}

void add_bias(double* y, std::size_t batch, std::size_t channels, std::size_t plane,
              const double* bias) {
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      double* p = y + (n * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] += bias[c];
    }
  }
}

void bias_grad(const double* dy, std::size_t batch, std::size_t channels, std::size_t plane,
               double* db) {
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double* p = dy + (n * channels + c) * plane;
      double s = 0.0;
      for (std::size_t i = 0; i < plane; ++i) s += p[i];
      db[c] += s;
    }
  }
}

template <typename Fn>
Var elementwise(const char* name, Var input, Fn&& forward, BackwardRule rule) {
  const Tensor& x = input.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = forward(x[i]);
  return input.tape().record(name, std::move(y), {input}, std::move(rule));
}

}  // namespace

Var conv2d(Var input, Var weight, Var bias, std::size_t stride, std::size_t pad) {
  require_rank(input, 4, "conv2d input");
  require_rank(weight, 4, "conv2d weight");
  const Shape& xs = input.shape();
  const Shape& ws = weight.shape();
  if (xs[1] != ws[1]) {
    throw Error(ErrorCode::shape_mismatch, "conv2d: input " + shape_str(xs) +
                                               " has Cin=" + std::to_string(xs[1]) +
                                               " but weight " + shape_str(ws) + " expects " +
                                               std::to_string(ws[1]));
  }
  if (bias.value().size() != ws[0]) {
    throw Error(ErrorCode::shape_mismatch, "conv2d: bias " + shape_str(bias.shape()) +
                                               " does not match weight " + shape_str(ws));
  }
  const ConvGeometry g = kernels::make_geometry(xs[1], xs[2], xs[3], ws[2], ws[3], stride, pad);
  const std::size_t batch = xs[0];
  const std::size_t cout = ws[0];

  Tensor y(Shape{batch, cout, g.out_h, g.out_w});
  conv_forward_raw(input.value().ptr(), batch, g, weight.value().ptr(), cout, y.ptr(), false);
  add_bias(y.ptr(), batch, cout, g.positions(), bias.value().ptr());
  g_forward_macs += batch * cout * g.positions() * g.patch_size();

  return input.tape().record(
      "conv2d", std::move(y), {input, weight, bias},
      [g, batch, cout](const BackwardContext& ctx) {
        const double* dy = ctx.grad_output.ptr();
        if (Tensor* dx = ctx.grad(0)) {
          conv_input_grad(dy, batch, g, ctx.input(1).ptr(), cout, dx->ptr());
        }
        if (Tensor* dw = ctx.grad(1)) {
          conv_weight_grad(dy, ctx.input(0).ptr(), batch, g, cout, dw->ptr());
        }
        if (Tensor* db = ctx.grad(2)) bias_grad(dy, batch, cout, g.positions(), db->ptr());
      });
}

Var conv_transpose2d(Var input, Var weight, Var bias, std::size_t stride, std::size_t pad,
                     std::size_t output_pad) {
  require_rank(input, 4, "conv_transpose2d input");
  require_rank(weight, 4, "conv_transpose2d weight");
  const Shape& xs = input.shape();
  const Shape& ws = weight.shape();
  if (xs[1] != ws[0]) {
    throw Error(ErrorCode::shape_mismatch, "conv_transpose2d: input " + shape_str(xs) +
                                               " has Cin=" + std::to_string(xs[1]) +
                                               " but weight " + shape_str(ws) + " expects " +
                                               std::to_string(ws[0]));
  }
  if (bias.value().size() != ws[1]) {
    throw Error(ErrorCode::shape_mismatch, "conv_transpose2d: bias " + shape_str(bias.shape()) +
                                               " does not match weight " + shape_str(ws));
  }
  if (stride == 0 || output_pad >= stride) {
    throw Error(ErrorCode::invalid_argument, "conv_transpose2d needs stride >= 1 and output_pad < stride");
  }
  const std::size_t batch = xs[0];
  const std::size_t cin = xs[1];
  const std::size_t cout = ws[1];
  const std::size_t full_h = (xs[2] - 1) * stride + ws[2] + output_pad;
  const std::size_t full_w = (xs[3] - 1) * stride + ws[3] + output_pad;
  if (full_h <= 2 * pad || full_w <= 2 * pad) {
    throw Error(ErrorCode::invalid_argument, "conv_transpose2d output would be empty");
  }
  // Geometry of the equivalent forward conv mapping the output back to the input grid.
  const ConvGeometry g = kernels::make_geometry(cout, full_h - 2 * pad, full_w - 2 * pad, ws[2],
                                                ws[3], stride, pad);
  if (g.out_h != xs[2] || g.out_w != xs[3]) {
    throw Error(ErrorCode::invalid_argument, "conv_transpose2d geometry is not invertible");
  }

  Tensor y(Shape{batch, cout, g.height, g.width});
  conv_input_grad(input.value().ptr(), batch, g, weight.value().ptr(), cin, y.ptr());
  add_bias(y.ptr(), batch, cout, g.height * g.width, bias.value().ptr());
  g_forward_macs += batch * cin * g.positions() * g.patch_size();

  return input.tape().record(
      "conv_transpose2d", std::move(y), {input, weight, bias},
      [g, batch, cin, cout](const BackwardContext& ctx) {
        const double* dy = ctx.grad_output.ptr();
        if (Tensor* dx = ctx.grad(0)) {
          conv_forward_raw(dy, batch, g, ctx.input(1).ptr(), cin, dx->ptr(), true);
        }
        if (Tensor* dw = ctx.grad(1)) {
          conv_weight_grad(ctx.input(0).ptr(), dy, batch, g, cin, dw->ptr());
        }
        if (Tensor* db = ctx.grad(2)) {
          bias_grad(dy, batch, cout, g.height * g.width, db->ptr());
        }
      });
}

Var instance_norm(Var input, Var gamma, Var beta, double eps) {
  require_rank(input, 4, "instance_norm input");
  const Shape& xs = input.shape();
  const std::size_t batch = xs[0];
  const std::size_t channels = xs[1];
  const std::size_t plane = xs[2] * xs[3];
  if (plane == 0) throw Error(ErrorCode::shape_mismatch, "instance_norm on an empty plane");
  if (gamma.value().size() != channels || beta.value().size() != channels) {
    throw Error(ErrorCode::shape_mismatch, "instance_norm: gamma/beta must have " +
                                               std::to_string(channels) + " entries");
  }
  if (!(eps > 0.0)) throw Error(ErrorCode::invalid_argument, "instance_norm eps must be > 0");

  const Tensor& x = input.value();
  const Tensor& gm = gamma.value();
  const Tensor& bt = beta.value();
  Tensor y(xs);
  std::vector<double> mean(batch * channels);
  std::vector<double> inv_std(batch * channels);
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t idx = n * channels + c;
      const double* p = x.ptr() + idx * plane;
      double s = 0.0;
      for (std::size_t i = 0; i < plane; ++i) s += p[i];
      const double mu = s / static_cast<double>(plane);
      double v = 0.0;
      for (std::size_t i = 0; i < plane; ++i) v += (p[i] - mu) * (p[i] - mu);
      v /= static_cast<double>(plane);
      const double is = 1.0 / std::sqrt(v + eps);
      mean[idx] = mu;
      inv_std[idx] = is;
      double* q = y.ptr() + idx * plane;
      for (std::size_t i = 0; i < plane; ++i) q[i] = (p[i] - mu) * is * gm[c] + bt[c];
    }
  }

  return input.tape().record(
      "instance_norm", std::move(y), {input, gamma, beta},
      [batch, channels, plane, mean = std::move(mean),
       inv_std = std::move(inv_std)](const BackwardContext& ctx) {
        const Tensor& xv = ctx.input(0);
        const Tensor& gv = ctx.input(1);
        const double* dy = ctx.grad_output.ptr();
        Tensor* dx = ctx.grad(0);
        Tensor* dgamma = ctx.grad(1);
        Tensor* dbeta = ctx.grad(2);
        const double m = static_cast<double>(plane);
        for (std::size_t n = 0; n < batch; ++n) {
          for (std::size_t c = 0; c < channels; ++c) {
            const std::size_t idx = n * channels + c;
            const double* p = xv.ptr() + idx * plane;
            const double* g = dy + idx * plane;
            const double mu = mean[idx];
            const double is = inv_std[idx];
            double sum_dy = 0.0;
            double sum_dy_xhat = 0.0;
            for (std::size_t i = 0; i < plane; ++i) {
              sum_dy += g[i];
              sum_dy_xhat += g[i] * (p[i] - mu) * is;
            }
            if (dgamma != nullptr) (*dgamma)[c] += sum_dy_xhat;
            if (dbeta != nullptr) (*dbeta)[c] += sum_dy;
            if (dx == nullptr) continue;
            // With dxhat = gamma*dy the sums over dxhat are gamma times the sums above.
            const double scale_c = gv[c] * is / m;
            double* out = dx->ptr() + idx * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              const double xhat = (p[i] - mu) * is;
              out[i] += scale_c * (m * g[i] - sum_dy - xhat * sum_dy_xhat);
            }
          }
        }
      });
}

Var relu(Var input) {
  return elementwise("relu", input, [](double v) { return v > 0.0 ? v : 0.0; },
                     [](const BackwardContext& ctx) {
                       const Tensor& x = ctx.input(0);
                       Tensor& dx = *ctx.grad(0);
                       for (std::size_t i = 0; i < x.size(); ++i) {
                         if (x[i] > 0.0) dx[i] += ctx.grad_output[i];
                       }
                     });
}

Var leaky_relu(Var input, double slope) {
  if (!(slope > 0.0 && slope < 1.0)) {
    throw Error(ErrorCode::invalid_argument, "leaky_relu slope must lie in (0, 1)");
  }
  return elementwise("leaky_relu", input, [slope](double v) { return v > 0.0 ? v : slope * v; },
                     [slope](const BackwardContext& ctx) {
                       const Tensor& x = ctx.input(0);
                       Tensor& dx = *ctx.grad(0);
                       for (std::size_t i = 0; i < x.size(); ++i) {
                         dx[i] += x[i] > 0.0 ? ctx.grad_output[i] : slope * ctx.grad_output[i];
                       }
                     });
}

Var tanh(Var input) {
  return elementwise("tanh", input, [](double v) { return std::tanh(v); },
                     [](const BackwardContext& ctx) {
                       const Tensor& y = ctx.output;
                       Tensor& dx = *ctx.grad(0);
                       for (std::size_t i = 0; i < y.size(); ++i) {
                         dx[i] += ctx.grad_output[i] * (1.0 - y[i] * y[i]);
                       }
                     });
}

Var activation(Var input, Activation act) {
  switch (act.kind) {
    case ActivationKind::relu:
      return relu(input);
    case ActivationKind::leaky_relu:
      return leaky_relu(input, act.slope);
    case ActivationKind::tanh:
      return tanh(input);
  }
  throw Error(ErrorCode::invalid_argument, "unknown activation");
}

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] + b.value()[i];
  return a.tape().record("add", std::move(y), {a, b}, [](const BackwardContext& ctx) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (Tensor* d = ctx.grad(k)) {
        for (std::size_t i = 0; i < d->size(); ++i) (*d)[i] += ctx.grad_output[i];
      }
    }
  });
}

Var scale(Var a, double factor) {
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] * factor;
  return a.tape().record("scale", std::move(y), {a}, [factor](const BackwardContext& ctx) {
    Tensor& d = *ctx.grad(0);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += factor * ctx.grad_output[i];
  });
}

Var sum(Var input) {
  double s = 0.0;
  for (double v : input.value().data()) s += v;
  return input.tape().record("sum", Tensor::scalar(s), {input}, [](const BackwardContext& ctx) {
    Tensor& d = *ctx.grad(0);
    const double g = ctx.grad_output[0];
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g;
  });
}

Var weighted_sum(Var input, const Tensor& weights) {
  if (weights.shape() != input.shape()) {
    throw Error(ErrorCode::shape_mismatch, "weighted_sum: weights " + shape_str(weights.shape()) +
                                               " vs input " + shape_str(input.shape()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) s += input.value()[i] * weights[i];
  return input.tape().record("weighted_sum", Tensor::scalar(s), {input},
                             [weights](const BackwardContext& ctx) {
                               Tensor& d = *ctx.grad(0);
                               const double g = ctx.grad_output[0];
                               for (std::size_t i = 0; i < d.size(); ++i) d[i] += g * weights[i];
                             });
}

Var l1_loss(Var a, Var b) {
  require_same_shape(a, b, "l1_loss");
  const std::size_t n = a.value().size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::abs(a.value()[i] - b.value()[i]);
  return a.tape().record(
      "l1_loss", Tensor::scalar(s / static_cast<double>(n)), {a, b},
      [n](const BackwardContext& ctx) {
        const double g = ctx.grad_output[0] / static_cast<double>(n);
        const Tensor& av = ctx.input(0);
        const Tensor& bv = ctx.input(1);
        for (std::size_t i = 0; i < n; ++i) {
          const double diff = av[i] - bv[i];
          const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
          if (Tensor* da = ctx.grad(0)) (*da)[i] += g * sign;
          if (Tensor* db = ctx.grad(1)) (*db)[i] -= g * sign;
        }
      });
}

Var mse_loss(Var a, Var b) {
  require_same_shape(a, b, "mse_loss");
  const std::size_t n = a.value().size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double diff = a.value()[i] - b.value()[i];
    s += diff * diff;
  }
  return a.tape().record(
      "mse_loss", Tensor::scalar(s / static_cast<double>(n)), {a, b},
      [n](const BackwardContext& ctx) {
        const double g = 2.0 * ctx.grad_output[0] / static_cast<double>(n);
        const Tensor& av = ctx.input(0);
        const Tensor& bv = ctx.input(1);
        for (std::size_t i = 0; i < n; ++i) {
          const double diff = av[i] - bv[i];
          if (Tensor* da = ctx.grad(0)) (*da)[i] += g * diff;
          if (Tensor* db = ctx.grad(1)) (*db)[i] -= g * diff;
        }
      });
}

Var bce_with_logits(Var logits, double target) {
  const Tensor& x = logits.value();
  const std::size_t n = x.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s += std::max(x[i], 0.0) - x[i] * target + std::log1p(std::exp(-std::abs(x[i])));
  }
  return logits.tape().record(
      "bce_with_logits", Tensor::scalar(s / static_cast<double>(n)), {logits},
      [n, target](const BackwardContext& ctx) {
        const Tensor& xv = ctx.input(0);
        Tensor& d = *ctx.grad(0);
        const double g = ctx.grad_output[0] / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
          const double sig = 1.0 / (1.0 + std::exp(-xv[i]));
          d[i] += g * (sig - target);
        }
      });
}

Var detach(Var input) { return input.tape().constant(input.value()); }

Var full_like(Var input, double value) {
  return input.tape().constant(Tensor(input.shape(), value));
}

std::uint64_t forward_conv_macs() { return g_forward_macs.load(); }

void reset_forward_conv_macs() { g_forward_macs.store(0); }

}  // namespace devgan::ops
