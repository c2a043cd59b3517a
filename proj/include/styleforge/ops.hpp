#pragma once

#include <vector>

#include "styleforge/autograd.hpp"

// Differentiable operations. Images are N×C×H×W, feature rows N×F.

namespace styleforge {

inline constexpr real kNormEpsilon = real(1e-5);

// Elementwise arithmetic (operands must have identical shapes).
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, real factor);
Var add_scalar(const Var& a, real value);

Var relu(const Var& x);
Var leaky_relu(const Var& x, real slope = real(0.2));
Var tanh(const Var& x);
Var exp(const Var& x);
/// log(1 + e^x), evaluated stably.
Var softplus(const Var& x);

Var sum(const Var& x);
Var mean(const Var& x);
/// mean |a - b|
Var l1_loss(const Var& a, const Var& b);
/// mean (x - target)^2
Var mse_to(const Var& x, real target);
/// Mean over rows of the cross-entropy between softmax(logits) and the
/// target distribution in each row (one-hot or soft).
Var softmax_cross_entropy(const Var& logits, const Tensor& targets);
/// Mean over rows of KL(N(mu, exp(logvar)) || N(0, I)), summed over columns.
Var kl_standard_normal(const Var& mu, const Var& logvar);

/// x: N×in, weight: out×in, bias: out (may be undefined).
Var linear(const Var& x, const Var& weight, const Var& bias);
/// x: N×Cin×H×W, weight: Cout×Cin×k×k, bias: Cout (may be undefined). Zero padding.
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad);

/// Per-sample, per-channel normalization over spatial positions.
Var instance_norm(const Var& x, real eps = kNormEpsilon);
/// Per-sample normalization over C×H×W followed by a per-channel affine map.
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, real eps = kNormEpsilon);
/// out[n,c] = x[n,c]·scale[n,c] + bias[n,c] with scale, bias N×C.
Var channel_affine(const Var& x, const Var& scale, const Var& bias);
/// Adaptive instance normalization: instance_norm then channel_affine.
Var adain(const Var& x, const Var& scale, const Var& bias, real eps = kNormEpsilon);

Var upsample_nearest2x(const Var& x);
/// 2×2 average pooling with stride 2 (H, W must be even).
Var avg_pool2x2(const Var& x);
/// N×C×H×W -> N×C
Var global_avg_pool(const Var& x);

/// Concatenates along `axis`; all other dimensions must agree.
Var concat(const std::vector<Var>& parts, int axis = 1);
/// Elements [begin, begin+count) along the given axis (0 or 1).
Var slice(const Var& x, int axis, int begin, int count);
Var reshape(const Var& x, Shape shape);

/// Gram matrices: N×C×H×W -> N×C×C, G[a][b] = Σ f_a f_b / (C·H·W).
Var gram(const Var& x);

}  // namespace styleforge
