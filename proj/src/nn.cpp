#include "styleforge/nn.hpp"

namespace styleforge {

void ParamList::add(std::string name, Var param) { entries_.emplace_back(std::move(name), std::move(param)); }

void ParamList::append(const ParamList& other) {
  entries_.insert(entries_.end(), other.entries_.begin(), other.entries_.end());
}

std::size_t ParamList::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : entries_) n += p.value().size();
  return n;
}

void ParamList::zero_grad() {
  for (auto& [name, p] : entries_) p.zero_grad();
}

void ParamList::set_requires_grad(bool flag) {
  for (auto& [name, p] : entries_) p.set_requires_grad(flag);
}

Var make_param(Shape shape, Rng& rng, double stddev) {
  Tensor t = stddev > 0 ? rng.normal_tensor(std::move(shape), stddev) : Tensor(std::move(shape));
  return Var(std::move(t), true);
}

Var make_filled_param(Shape shape, real value) { return Var(Tensor(std::move(shape), value), true); }

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride_, int pad_, Rng& rng, double init_std)
    : weight(make_param({out_channels, in_channels, kernel, kernel}, rng, init_std)),
      bias(make_filled_param({out_channels}, 0)),
      stride(stride_),
      pad(pad_) {}

void Conv2d::collect(ParamList& list, const std::string& prefix) const {
  list.add(prefix + ".weight", weight);
  list.add(prefix + ".bias", bias);
}

Linear::Linear(int in_features, int out_features, Rng& rng, double init_std)
    : weight(make_param({out_features, in_features}, rng, init_std)), bias(make_filled_param({out_features}, 0)) {}

void Linear::collect(ParamList& list, const std::string& prefix) const {
  list.add(prefix + ".weight", weight);
  list.add(prefix + ".bias", bias);
}

LayerNorm::LayerNorm(int channels) : gamma(make_filled_param({channels}, 1)), beta(make_filled_param({channels}, 0)) {}

void LayerNorm::collect(ParamList& list, const std::string& prefix) const {
  list.add(prefix + ".gamma", gamma);
  list.add(prefix + ".beta", beta);
}

}  // namespace styleforge
