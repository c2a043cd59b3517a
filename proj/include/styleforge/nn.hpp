#pragma once

#include <string>
#include <utility>
#include <vector>

#include "styleforge/ops.hpp"
#include "styleforge/rng.hpp"

namespace styleforge {

/// Named trainable arrays, in registration order.
class ParamList {
 public:
  void add(std::string name, Var param);
  void append(const ParamList& other);

  const std::vector<std::pair<std::string, Var>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();
  void set_requires_grad(bool flag);

 private:
  std::vector<std::pair<std::string, Var>> entries_;
};

/// Leaf parameter drawn from N(0, stddev²); stddev 0 gives zeros.
Var make_param(Shape shape, Rng& rng, double stddev);
Var make_filled_param(Shape shape, real value);

struct Conv2d {
  Var weight;
  Var bias;
  int stride = 1;
  int pad = 0;

  Conv2d() = default;
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad, Rng& rng, double init_std);

  Var operator()(const Var& x) const { return conv2d(x, weight, bias, stride, pad); }
  int out_channels() const { return weight.dim(0); }
  void collect(ParamList& list, const std::string& prefix) const;
};

struct Linear {
  Var weight;
  Var bias;

  Linear() = default;
  Linear(int in_features, int out_features, Rng& rng, double init_std);

  Var operator()(const Var& x) const { return linear(x, weight, bias); }
  int out_features() const { return weight.dim(0); }
  void collect(ParamList& list, const std::string& prefix) const;
};

/// Layer normalization with a learned per-channel affine map.
struct LayerNorm {
  Var gamma;
  Var beta;

  LayerNorm() = default;
  explicit LayerNorm(int channels);

  Var operator()(const Var& x) const { return layer_norm(x, gamma, beta); }
  void collect(ParamList& list, const std::string& prefix) const;
};

}  // namespace styleforge
