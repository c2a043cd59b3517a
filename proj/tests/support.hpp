#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "styleforge/config.hpp"
#include "styleforge/nn.hpp"

namespace styleforge::testing {

/// Very small networks for 8×8 or 16×16 inputs.
inline RunConfig tiny_config(int resolution = 16) {
  RunConfig c;
  c.resolution = resolution;
  c.style_dim = 4;
  c.base_channels = 4;
  c.downsample_layers = 2;
  c.residual_blocks = 2;
  c.upsample_kernel = 3;
  c.style_encoder_channels = 4;
  c.style_encoder_downsamples = 2;
  c.mapping_hidden = 8;
  c.disc_scales = 2;
  c.disc_channels = 4;
  c.disc_layers = 2;
  c.init_std = 0.3;
  c.perceptual_pretrain_steps = 0;
  c.batch_size = 4;
  c.iterations = 10;
  c.checkpoint_interval = 5;
  c.log_interval = 1;
  return c;
}

/// ‖numeric − analytic‖₂ / ‖numeric‖₂ for d loss / d input over all
/// coordinates of `input`, using central differences with step h.
inline double gradient_relative_error(Var input, const std::function<Var()>& loss, double h = 1e-7) {
  input.set_requires_grad(true);
  input.zero_grad();
  Var value = loss();
  backward(value);
  const Tensor analytic = input.grad().empty() ? Tensor(input.shape()) : input.grad();
  double diff = 0;
  double norm = 0;
  Tensor& x = input.mutable_value();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const real saved = x[i];
    x[i] = saved + static_cast<real>(h);
    const double up = loss().item();
    x[i] = saved - static_cast<real>(h);
    const double down = loss().item();
    x[i] = saved;
    const double numeric = (up - down) / (2 * h);
    diff += (numeric - analytic[i]) * (numeric - analytic[i]);
    norm += numeric * numeric;
  }
  input.zero_grad();
  return std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12);
}

inline double norm_of(const Tensor& t) {
  double s = 0;
  for (std::size_t i = 0; i < t.size(); ++i) s += static_cast<double>(t[i]) * t[i];
  return std::sqrt(s);
}

}  // namespace styleforge::testing
