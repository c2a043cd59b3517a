#include "styleforge/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "styleforge/kernels.hpp"

namespace styleforge {

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                                shape_string(b.shape()));
  }
}

void require_rank(const Var& x, int rank, const char* op) {
  if (x.value().rank() != rank) {
    throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                                shape_string(x.shape()));
  }
}

// Gradient buffer of input i, or nullptr when that input does not need one.
real* input_grad(Node& self, std::size_t i) {
  Node& in = self.input(i);
  return in.requires_grad ? in.grad_buffer().data() : nullptr;
}

template <class Forward, class Derivative>
Var elementwise(const Var& x, Forward f, Derivative df) {
  Tensor out(x.shape());
  const Tensor& xv = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  return make_op(std::move(out), {x}, [df](Node& self) {
    real* dx = input_grad(self, 0);
    if (!dx) return;
    const Tensor& xv = self.input(0).value;
    const Tensor& yv = self.value;
    for (std::size_t i = 0; i < yv.size(); ++i) dx[i] += self.grad[i] * df(xv[i], yv[i]);
  });
}

Tensor scalar_tensor(real v) { return Tensor({1}, std::vector<real>{v}); }

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  out += b.value();
  return make_op(std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (real* d = input_grad(self, k)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i];
      }
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make_op(std::move(out), {a, b}, [](Node& self) {
    if (real* d = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i];
    }
    if (real* d = input_grad(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_op(std::move(out), {a, b}, [](Node& self) {
    const Tensor& av = self.input(0).value;
    const Tensor& bv = self.input(1).value;
    if (real* d = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i] * bv[i];
    }
    if (real* d = input_grad(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i] * av[i];
    }
  });
}

Var scale(const Var& a, real factor) {
  Tensor out = a.value();
  out *= factor;
  return make_op(std::move(out), {a}, [factor](Node& self) {
    if (real* d = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += factor * self.grad[i];
    }
  });
}

Var add_scalar(const Var& a, real value) {
  Tensor out = a.value();
  for (auto& v : out.values()) v += value;
  return make_op(std::move(out), {a}, [](Node& self) {
    if (real* d = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i];
    }
  });
}

Var relu(const Var& x) {
  return elementwise(
      x, [](real v) { return v > 0 || v != v ? v : real(0); },  // NaN passes through
      [](real v, real) { return v > 0 ? real(1) : real(0); });
}

Var leaky_relu(const Var& x, real slope) {
  return elementwise(
      x, [slope](real v) { return v > 0 ? v : slope * v; },
      [slope](real v, real) { return v > 0 ? real(1) : slope; });
}

Var tanh(const Var& x) {
  return elementwise(
      x, [](real v) { return std::tanh(v); }, [](real, real y) { return real(1) - y * y; });
}

Var exp(const Var& x) {
  return elementwise(
      x, [](real v) { return std::exp(v); }, [](real, real y) { return y; });
}

Var softplus(const Var& x) {
  return elementwise(
      x, [](real v) { return std::max(v, real(0)) + std::log1p(std::exp(-std::abs(v))); },
      [](real v, real) {
        // logistic(v)
        return v >= 0 ? real(1) / (real(1) + std::exp(-v)) : std::exp(v) / (real(1) + std::exp(v));
      });
}

Var sum(const Var& x) {
  double s = 0;
  for (real v : x.value().values()) s += v;
  return make_op(scalar_tensor(static_cast<real>(s)), {x}, [](Node& self) {
    if (real* d = input_grad(self, 0)) {
      const real g = self.grad[0];
      const std::size_t n = self.input(0).value.size();
      for (std::size_t i = 0; i < n; ++i) d[i] += g;
    }
  });
}

Var mean(const Var& x) {
  const std::size_t n = x.value().size();
  if (n == 0) throw std::invalid_argument("mean of empty tensor");
  double s = 0;
  for (real v : x.value().values()) s += v;
  return make_op(scalar_tensor(static_cast<real>(s / n)), {x}, [n](Node& self) {
    if (real* d = input_grad(self, 0)) {
      const real g = self.grad[0] / static_cast<real>(n);
      for (std::size_t i = 0; i < n; ++i) d[i] += g;
    }
  });
}

Var l1_loss(const Var& a, const Var& b) {
  require_same_shape(a, b, "l1_loss");
  const std::size_t n = a.value().size();
  if (n == 0) throw std::invalid_argument("l1_loss of empty tensors");
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) s += std::abs(static_cast<double>(a.value()[i]) - b.value()[i]);
  return make_op(scalar_tensor(static_cast<real>(s / n)), {a, b}, [n](Node& self) {
    const Tensor& av = self.input(0).value;
    const Tensor& bv = self.input(1).value;
    const real g = self.grad[0] / static_cast<real>(n);
    real* da = input_grad(self, 0);
    real* db = input_grad(self, 1);
    for (std::size_t i = 0; i < n; ++i) {
      const real diff = av[i] - bv[i];
      const real s = diff > 0 ? g : (diff < 0 ? -g : real(0));
      if (da) da[i] += s;
      if (db) db[i] -= s;
    }
  });
}

Var mse_to(const Var& x, real target) {
  const std::size_t n = x.value().size();
  if (n == 0) throw std::invalid_argument("mse_to of empty tensor");
  double s = 0;
  for (real v : x.value().values()) s += (static_cast<double>(v) - target) * (static_cast<double>(v) - target);
  return make_op(scalar_tensor(static_cast<real>(s / n)), {x}, [n, target](Node& self) {
    if (real* d = input_grad(self, 0)) {
      const Tensor& xv = self.input(0).value;
      const real g = real(2) * self.grad[0] / static_cast<real>(n);
      for (std::size_t i = 0; i < n; ++i) d[i] += g * (xv[i] - target);
    }
  });
}

Var softmax_cross_entropy(const Var& logits, const Tensor& targets) {
  require_rank(logits, 2, "softmax_cross_entropy");
  if (targets.shape() != logits.shape()) {
    throw std::invalid_argument("softmax_cross_entropy: targets " + shape_string(targets.shape()) +
                                " do not match logits " + shape_string(logits.shape()));
  }
  const int rows = logits.dim(0);
  const int k = logits.dim(1);
  Tensor probs(logits.shape());
  double loss = 0;
  for (int r = 0; r < rows; ++r) {
    real mx = logits.value().at(r, 0);
    for (int j = 1; j < k; ++j) mx = std::max(mx, logits.value().at(r, j));
    double z = 0;
    for (int j = 0; j < k; ++j) z += std::exp(static_cast<double>(logits.value().at(r, j)) - mx);
    const double log_z = std::log(z) + mx;
    for (int j = 0; j < k; ++j) {
      const double log_p = logits.value().at(r, j) - log_z;
      probs.at(r, j) = static_cast<real>(std::exp(log_p));
      loss -= targets.at(r, j) * log_p;
    }
  }
  loss /= rows;
  return make_op(scalar_tensor(static_cast<real>(loss)), {logits},
                 [probs = std::move(probs), targets, rows, k](Node& self) {
                   real* d = input_grad(self, 0);
                   if (!d) return;
                   const real g = self.grad[0] / static_cast<real>(rows);
                   for (int r = 0; r < rows; ++r) {
                     real mass = 0;
                     for (int j = 0; j < k; ++j) mass += targets.at(r, j);
                     for (int j = 0; j < k; ++j) {
                       d[r * k + j] += g * (probs.at(r, j) * mass - targets.at(r, j));
                     }
                   }
                 });
}

Var kl_standard_normal(const Var& mu, const Var& logvar) {
  require_same_shape(mu, logvar, "kl_standard_normal");
  require_rank(mu, 2, "kl_standard_normal");
  const int rows = mu.dim(0);
  double s = 0;
  for (std::size_t i = 0; i < mu.value().size(); ++i) {
    const double m = mu.value()[i];
    const double lv = logvar.value()[i];
    s += m * m + std::exp(lv) - lv - 1.0;
  }
  const real value = static_cast<real>(0.5 * s / rows);
  return make_op(scalar_tensor(value), {mu, logvar}, [rows](Node& self) {
    const real g = self.grad[0] / static_cast<real>(rows);
    const Tensor& m = self.input(0).value;
    const Tensor& lv = self.input(1).value;
    if (real* d = input_grad(self, 0)) {
      for (std::size_t i = 0; i < m.size(); ++i) d[i] += g * m[i];
    }
    if (real* d = input_grad(self, 1)) {
      for (std::size_t i = 0; i < lv.size(); ++i) d[i] += g * real(0.5) * (std::exp(lv[i]) - real(1));
    }
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  require_rank(x, 2, "linear");
  require_rank(weight, 2, "linear");
  const int n = x.dim(0);
  const int in = x.dim(1);
  const int out = weight.dim(0);
  if (weight.dim(1) != in) {
    throw std::invalid_argument("linear: input width " + std::to_string(in) + " but weight is " +
                                shape_string(weight.shape()));
  }
  if (bias.defined() && bias.value().size() != static_cast<std::size_t>(out)) {
    throw std::invalid_argument("linear: bias length mismatch");
  }
  Tensor y({n, out});
  kernels::gemm(false, true, n, out, in, 1, x.value().data(), weight.value().data(), 0, y.data());
  if (bias.defined()) {
    for (int r = 0; r < n; ++r)
      for (int j = 0; j < out; ++j) y.at(r, j) += bias.value()[j];
  }
  std::vector<Var> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  const bool has_bias = bias.defined();
  return make_op(std::move(y), std::move(inputs), [n, in, out, has_bias](Node& self) {
    const real* dy = self.grad.data();
    if (real* dx = input_grad(self, 0)) {
      kernels::gemm(false, false, n, in, out, 1, dy, self.input(1).value.data(), 1, dx);
    }
    if (real* dw = input_grad(self, 1)) {
      kernels::gemm(true, false, out, in, n, 1, dy, self.input(0).value.data(), 1, dw);
    }
    if (has_bias) {
      if (real* db = input_grad(self, 2)) {
        for (int r = 0; r < n; ++r)
          for (int j = 0; j < out; ++j) db[j] += dy[r * out + j];
      }
    }
  });
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad) {
  require_rank(x, 4, "conv2d");
  require_rank(weight, 4, "conv2d");
  const int n = x.dim(0);
  const int cout = weight.dim(0);
  const int k = weight.dim(2);
  kernels::ConvGeometry g{x.dim(1), x.dim(2), x.dim(3), k, stride, pad};
  if (weight.dim(1) != g.channels || weight.dim(3) != k) {
    throw std::invalid_argument("conv2d: input " + shape_string(x.shape()) + " incompatible with weight " +
                                shape_string(weight.shape()));
  }
  if (g.out_height() <= 0 || g.out_width() <= 0) {
    throw std::invalid_argument("conv2d: input " + shape_string(x.shape()) + " too small for kernel");
  }
  if (bias.defined() && bias.value().size() != static_cast<std::size_t>(cout)) {
    throw std::invalid_argument("conv2d: bias length mismatch");
  }
  const int oh = g.out_height();
  const int ow = g.out_width();
  const int spatial = oh * ow;
  const int patch = g.patch_size();
  const long in_stride = static_cast<long>(g.channels) * g.height * g.width;
  const bool direct = k == 1 && stride == 1 && pad == 0;

  Tensor y({n, cout, oh, ow});
  std::vector<real> cols(direct ? 0 : static_cast<std::size_t>(patch) * spatial);
  for (int s = 0; s < n; ++s) {
    const real* src = x.value().data() + s * in_stride;
    const real* colp = src;
    if (!direct) {
      kernels::im2col(src, g, cols.data());
      colp = cols.data();
    }
    real* dst = y.data() + static_cast<long>(s) * cout * spatial;
    kernels::gemm(false, false, cout, spatial, patch, 1, weight.value().data(), colp, 0, dst);
    if (bias.defined()) {
      for (int c = 0; c < cout; ++c) {
        const real b = bias.value()[c];
        real* plane = dst + static_cast<long>(c) * spatial;
        for (int i = 0; i < spatial; ++i) plane[i] += b;
      }
    }
  }

  std::vector<Var> inputs{x, weight};
  const bool has_bias = bias.defined();
  if (has_bias) inputs.push_back(bias);
  return make_op(std::move(y), std::move(inputs), [g, n, cout, spatial, patch, in_stride, direct, has_bias](Node& self) {
    const Tensor& xv = self.input(0).value;
    const Tensor& wv = self.input(1).value;
    real* dx = input_grad(self, 0);
    real* dw = input_grad(self, 1);
    real* db = has_bias ? input_grad(self, 2) : nullptr;
    std::vector<real> cols(direct || !dw ? 0 : static_cast<std::size_t>(patch) * spatial);
    std::vector<real> dcols(direct || !dx ? 0 : static_cast<std::size_t>(patch) * spatial);
    for (int s = 0; s < n; ++s) {
      const real* dy = self.grad.data() + static_cast<long>(s) * cout * spatial;
      if (dw) {
        const real* colp = xv.data() + s * in_stride;
        if (!direct) {
          kernels::im2col(colp, g, cols.data());
          colp = cols.data();
        }
        kernels::gemm(false, true, cout, patch, spatial, 1, dy, colp, 1, dw);
      }
      if (dx) {
        real* dxs = dx + s * in_stride;
        if (direct) {
          kernels::gemm(true, false, patch, spatial, cout, 1, wv.data(), dy, 1, dxs);
        } else {
          kernels::gemm(true, false, patch, spatial, cout, 1, wv.data(), dy, 0, dcols.data());
          kernels::col2im(dcols.data(), g, dxs);
        }
      }
      if (db) {
        for (int c = 0; c < cout; ++c) {
          double acc = 0;
          for (int i = 0; i < spatial; ++i) acc += dy[static_cast<long>(c) * spatial + i];
          db[c] += static_cast<real>(acc);
        }
      }
    }
  });
}

Var instance_norm(const Var& x, real eps) {
  require_rank(x, 4, "instance_norm");
  const int planes = x.dim(0) * x.dim(1);
  const int size = x.dim(2) * x.dim(3);
  Tensor y(x.shape());
  std::vector<real> inv_std(static_cast<std::size_t>(planes));
  kernels::normalize_planes(x.value().data(), planes, size, eps, y.data(), inv_std.data());
  return make_op(std::move(y), {x}, [inv_std = std::move(inv_std), planes, size](Node& self) {
    if (real* dx = input_grad(self, 0)) {
      kernels::normalize_planes_backward(self.grad.data(), self.value.data(), inv_std.data(), planes, size, dx);
    }
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, real eps) {
  require_rank(x, 4, "layer_norm");
  const int n = x.dim(0);
  const int c = x.dim(1);
  const int spatial = x.dim(2) * x.dim(3);
  if (gamma.value().size() != static_cast<std::size_t>(c) || beta.value().size() != static_cast<std::size_t>(c)) {
    throw std::invalid_argument("layer_norm: affine parameters must have one entry per channel");
  }
  Tensor normalized(x.shape());
  std::vector<real> inv_std(static_cast<std::size_t>(n));
  kernels::normalize_planes(x.value().data(), n, c * spatial, eps, normalized.data(), inv_std.data());
  Tensor y(x.shape());
  for (int s = 0; s < n; ++s)
    for (int ch = 0; ch < c; ++ch) {
      const long off = (static_cast<long>(s) * c + ch) * spatial;
      const real gm = gamma.value()[ch];
      const real bt = beta.value()[ch];
      for (int i = 0; i < spatial; ++i) y[off + i] = normalized[off + i] * gm + bt;
    }
  return make_op(std::move(y), {x, gamma, beta},
                 [normalized = std::move(normalized), inv_std = std::move(inv_std), n, c, spatial](Node& self) {
                   const real* dy = self.grad.data();
                   const Tensor& gm = self.input(1).value;
                   if (real* dg = input_grad(self, 1)) {
                     for (int s = 0; s < n; ++s)
                       for (int ch = 0; ch < c; ++ch) {
                         const long off = (static_cast<long>(s) * c + ch) * spatial;
                         double acc = 0;
                         for (int i = 0; i < spatial; ++i) acc += dy[off + i] * normalized[off + i];
                         dg[ch] += static_cast<real>(acc);
                       }
                   }
                   if (real* db = input_grad(self, 2)) {
                     for (int s = 0; s < n; ++s)
                       for (int ch = 0; ch < c; ++ch) {
                         const long off = (static_cast<long>(s) * c + ch) * spatial;
                         double acc = 0;
                         for (int i = 0; i < spatial; ++i) acc += dy[off + i];
                         db[ch] += static_cast<real>(acc);
                       }
                   }
                   if (real* dx = input_grad(self, 0)) {
                     Tensor dnorm(self.value.shape());
                     for (int s = 0; s < n; ++s)
                       for (int ch = 0; ch < c; ++ch) {
                         const long off = (static_cast<long>(s) * c + ch) * spatial;
                         for (int i = 0; i < spatial; ++i) dnorm[off + i] = dy[off + i] * gm[ch];
                       }
                     kernels::normalize_planes_backward(dnorm.data(), normalized.data(), inv_std.data(), n,
                                                        c * spatial, dx);
                   }
                 });
}

Var channel_affine(const Var& x, const Var& scale_nc, const Var& bias_nc) {
  require_rank(x, 4, "channel_affine");
  const int n = x.dim(0);
  const int c = x.dim(1);
  const Shape expected{n, c};
  if (scale_nc.shape() != expected || bias_nc.shape() != expected) {
    throw std::invalid_argument("channel_affine: scale/bias must be " + shape_string(expected) + ", got " +
                                shape_string(scale_nc.shape()) + " and " + shape_string(bias_nc.shape()));
  }
  const int spatial = x.dim(2) * x.dim(3);
  Tensor y(x.shape());
  for (int p = 0; p < n * c; ++p) {
    const real s = scale_nc.value()[p];
    const real b = bias_nc.value()[p];
    const long off = static_cast<long>(p) * spatial;
    for (int i = 0; i < spatial; ++i) y[off + i] = x.value()[off + i] * s + b;
  }
  return make_op(std::move(y), {x, scale_nc, bias_nc}, [n, c, spatial](Node& self) {
    const real* dy = self.grad.data();
    const Tensor& xv = self.input(0).value;
    const Tensor& sv = self.input(1).value;
    real* dx = input_grad(self, 0);
    real* ds = input_grad(self, 1);
    real* db = input_grad(self, 2);
    for (int p = 0; p < n * c; ++p) {
      const long off = static_cast<long>(p) * spatial;
      double acc_s = 0;
      double acc_b = 0;
      for (int i = 0; i < spatial; ++i) {
        acc_s += static_cast<double>(dy[off + i]) * xv[off + i];
        acc_b += dy[off + i];
        if (dx) dx[off + i] += dy[off + i] * sv[p];
      }
      if (ds) ds[p] += static_cast<real>(acc_s);
      if (db) db[p] += static_cast<real>(acc_b);
    }
  });
}

Var adain(const Var& x, const Var& scale_nc, const Var& bias_nc, real eps) {
  return channel_affine(instance_norm(x, eps), scale_nc, bias_nc);
}

Var upsample_nearest2x(const Var& x) {
  require_rank(x, 4, "upsample_nearest2x");
  const int planes = x.dim(0) * x.dim(1);
  const int h = x.dim(2);
  const int w = x.dim(3);
  Tensor y({x.dim(0), x.dim(1), 2 * h, 2 * w});
  for (int p = 0; p < planes; ++p) {
    const real* src = x.value().data() + static_cast<long>(p) * h * w;
    real* dst = y.data() + static_cast<long>(p) * 4 * h * w;
    for (int yy = 0; yy < 2 * h; ++yy)
      for (int xx = 0; xx < 2 * w; ++xx) dst[yy * 2 * w + xx] = src[(yy / 2) * w + xx / 2];
  }
  return make_op(std::move(y), {x}, [planes, h, w](Node& self) {
    real* dx = input_grad(self, 0);
    if (!dx) return;
    for (int p = 0; p < planes; ++p) {
      const real* dy = self.grad.data() + static_cast<long>(p) * 4 * h * w;
      real* d = dx + static_cast<long>(p) * h * w;
      for (int yy = 0; yy < 2 * h; ++yy)
        for (int xx = 0; xx < 2 * w; ++xx) d[(yy / 2) * w + xx / 2] += dy[yy * 2 * w + xx];
    }
  });
}

Var avg_pool2x2(const Var& x) {
  require_rank(x, 4, "avg_pool2x2");
  const int planes = x.dim(0) * x.dim(1);
  const int h = x.dim(2);
  const int w = x.dim(3);
  if (h % 2 || w % 2) throw std::invalid_argument("avg_pool2x2: odd spatial size " + shape_string(x.shape()));
  const int oh = h / 2;
  const int ow = w / 2;
  Tensor y({x.dim(0), x.dim(1), oh, ow});
  for (int p = 0; p < planes; ++p) {
    const real* src = x.value().data() + static_cast<long>(p) * h * w;
    real* dst = y.data() + static_cast<long>(p) * oh * ow;
    for (int yy = 0; yy < oh; ++yy)
      for (int xx = 0; xx < ow; ++xx) {
        const real* s = src + 2 * yy * w + 2 * xx;
        dst[yy * ow + xx] = real(0.25) * (s[0] + s[1] + s[w] + s[w + 1]);
      }
  }
  return make_op(std::move(y), {x}, [planes, h, w, oh, ow](Node& self) {
    real* dx = input_grad(self, 0);
    if (!dx) return;
    for (int p = 0; p < planes; ++p) {
      const real* dy = self.grad.data() + static_cast<long>(p) * oh * ow;
      real* d = dx + static_cast<long>(p) * h * w;
      for (int yy = 0; yy < oh; ++yy)
        for (int xx = 0; xx < ow; ++xx) {
          const real g = real(0.25) * dy[yy * ow + xx];
          real* t = d + 2 * yy * w + 2 * xx;
          t[0] += g;
          t[1] += g;
          t[w] += g;
          t[w + 1] += g;
        }
    }
  });
}

Var global_avg_pool(const Var& x) {
  require_rank(x, 4, "global_avg_pool");
  const int n = x.dim(0);
  const int c = x.dim(1);
  const int spatial = x.dim(2) * x.dim(3);
  Tensor y({n, c});
  for (int p = 0; p < n * c; ++p) {
    double acc = 0;
    const real* src = x.value().data() + static_cast<long>(p) * spatial;
    for (int i = 0; i < spatial; ++i) acc += src[i];
    y[p] = static_cast<real>(acc / spatial);
  }
  return make_op(std::move(y), {x}, [n, c, spatial](Node& self) {
    real* dx = input_grad(self, 0);
    if (!dx) return;
    for (int p = 0; p < n * c; ++p) {
      const real g = self.grad[p] / static_cast<real>(spatial);
      real* d = dx + static_cast<long>(p) * spatial;
      for (int i = 0; i < spatial; ++i) d[i] += g;
    }
  });
}

Var concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis < 0 || axis >= static_cast<int>(first.size())) {
    throw std::invalid_argument("concat: axis " + std::to_string(axis) + " out of range for " + shape_string(first));
  }
  long n = 1;
  for (int d = 0; d < axis; ++d) n *= first[static_cast<std::size_t>(d)];
  long inner = 1;
  for (std::size_t d = static_cast<std::size_t>(axis) + 1; d < first.size(); ++d) inner *= first[d];
  int total = 0;
  std::vector<int> widths;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = static_cast<int>(d) == axis || s[d] == first[d];
    if (!ok) {
      throw std::invalid_argument("concat: incompatible shapes " + shape_string(first) + " and " + shape_string(s));
    }
    widths.push_back(s[static_cast<std::size_t>(axis)]);
    total += widths.back();
  }
  Shape out_shape = first;
  out_shape[static_cast<std::size_t>(axis)] = total;
  Tensor y(out_shape);
  int offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    for (long s = 0; s < n; ++s) {
      std::copy(v.data() + static_cast<long>(s) * widths[k] * inner,
                v.data() + static_cast<long>(s + 1) * widths[k] * inner,
                y.data() + (static_cast<long>(s) * total + offset) * inner);
    }
    offset += widths[k];
  }
  return make_op(std::move(y), parts, [widths, n, total, inner](Node& self) {
    int offset = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      if (real* d = input_grad(self, k)) {
        for (long s = 0; s < n; ++s) {
          const real* src = self.grad.data() + (static_cast<long>(s) * total + offset) * inner;
          real* dst = d + static_cast<long>(s) * widths[k] * inner;
          for (long i = 0; i < widths[k] * inner; ++i) dst[i] += src[i];
        }
      }
      offset += widths[k];
    }
  });
}

Var slice(const Var& x, int axis, int begin, int count) {
  const Shape& s = x.shape();
  if (axis < 0 || axis >= static_cast<int>(s.size()) || begin < 0 || count < 0 || begin + count > s[axis]) {
    throw std::invalid_argument("slice out of range: axis " + std::to_string(axis) + " [" + std::to_string(begin) +
                                ", +" + std::to_string(count) + ") of " + shape_string(s));
  }
  long outer = 1;
  for (int d = 0; d < axis; ++d) outer *= s[d];
  long inner = 1;
  for (std::size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];
  const int full = s[axis];
  Shape out_shape = s;
  out_shape[axis] = count;
  Tensor y(out_shape);
  for (long o = 0; o < outer; ++o) {
    const real* src = x.value().data() + (o * full + begin) * inner;
    std::copy(src, src + count * inner, y.data() + o * count * inner);
  }
  return make_op(std::move(y), {x}, [outer, inner, full, begin, count](Node& self) {
    real* d = input_grad(self, 0);
    if (!d) return;
    for (long o = 0; o < outer; ++o) {
      const real* src = self.grad.data() + o * count * inner;
      real* dst = d + (o * full + begin) * inner;
      for (long i = 0; i < count * inner; ++i) dst[i] += src[i];
    }
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor y = x.value().reshaped(std::move(shape));
  return make_op(std::move(y), {x}, [](Node& self) {
    if (real* d = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i];
    }
  });
}

Var gram(const Var& x) {
  require_rank(x, 4, "gram");
  const int n = x.dim(0);
  const int c = x.dim(1);
  const int spatial = x.dim(2) * x.dim(3);
  if (spatial < 1 || c < 1) throw std::invalid_argument("gram: empty feature map " + shape_string(x.shape()));
  const real norm = real(1) / static_cast<real>(static_cast<long>(c) * spatial);
  Tensor y({n, c, c});
  for (int s = 0; s < n; ++s) {
    const real* f = x.value().data() + static_cast<long>(s) * c * spatial;
    kernels::gemm(false, true, c, c, spatial, norm, f, f, 0, y.data() + static_cast<long>(s) * c * c);
  }
  return make_op(std::move(y), {x}, [n, c, spatial, norm](Node& self) {
    real* dx = input_grad(self, 0);
    if (!dx) return;
    std::vector<real> sym(static_cast<std::size_t>(c) * c);
    for (int s = 0; s < n; ++s) {
      const real* dg = self.grad.data() + static_cast<long>(s) * c * c;
      for (int a = 0; a < c; ++a)
        for (int b = 0; b < c; ++b) sym[a * c + b] = dg[a * c + b] + dg[b * c + a];
      const real* f = self.input(0).value.data() + static_cast<long>(s) * c * spatial;
      kernels::gemm(false, false, c, spatial, c, norm, sym.data(), f, 1, dx + static_cast<long>(s) * c * spatial);
    }
  });
}

}  // namespace styleforge
