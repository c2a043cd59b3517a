#include "styleforge/optim.hpp"

#include <cmath>

#include "styleforge/error.hpp"

namespace styleforge {

Adam::Adam(ParamList params, double learning_rate, double beta1, double beta2, double epsilon)
    : params_(std::move(params)), lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
  for (const auto& [name, p] : params_.entries()) {
    m_.emplace_back(p.shape());
    v_.emplace_back(p.shape());
  }
}

void Adam::step() {
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  const auto& entries = params_.entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    Var p = entries[k].second;
    const Tensor& g = p.grad();
    if (g.empty()) continue;
    Tensor& w = p.mutable_value();
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i];
      m[i] = static_cast<real>(beta1_ * m[i] + (1.0 - beta1_) * gi);
      v[i] = static_cast<real>(beta2_ * v[i] + (1.0 - beta2_) * gi * gi);
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] = static_cast<real>(w[i] - lr_ * mhat / (std::sqrt(vhat) + eps_));
    }
  }
}

void Adam::export_state(std::map<std::string, Tensor>& out, const std::string& prefix) const {
  const auto& entries = params_.entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    out[prefix + "." + entries[k].first + ".m"] = m_[k];
    out[prefix + "." + entries[k].first + ".v"] = v_[k];
  }
}

void Adam::import_state(const std::map<std::string, Tensor>& in, const std::string& prefix, std::int64_t steps) {
  const auto& entries = params_.entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    for (auto [suffix, dst] : {std::pair{".m", &m_[k]}, std::pair{".v", &v_[k]}}) {
      const std::string key = prefix + "." + entries[k].first + suffix;
      const auto it = in.find(key);
      if (it == in.end()) throw DataError("checkpoint is missing optimizer state '" + key + "'");
      if (it->second.shape() != dst->shape()) throw DataError("optimizer state '" + key + "' has the wrong shape");
      *dst = it->second;
    }
  }
  steps_ = steps;
}

}  // namespace styleforge
