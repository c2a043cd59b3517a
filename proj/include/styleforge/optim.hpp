#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "styleforge/nn.hpp"

namespace styleforge {

/// Adam over one parameter group. Parameters that received no gradient
/// since the last zero_grad are left untouched, moments included.
class Adam {
 public:
  Adam() = default;
  Adam(ParamList params, double learning_rate, double beta1, double beta2, double epsilon = 1e-8);

  void step();
  void zero_grad() { params_.zero_grad(); }

  const ParamList& params() const { return params_; }
  std::int64_t steps() const { return steps_; }

  /// Moments as named arrays "<prefix>.<param>.m" / ".v".
  void export_state(std::map<std::string, Tensor>& out, const std::string& prefix) const;
  /// Restores moments exported by export_state and the step counter.
  void import_state(const std::map<std::string, Tensor>& in, const std::string& prefix, std::int64_t steps);

 private:
  ParamList params_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  double lr_ = 0;
  double beta1_ = 0;
  double beta2_ = 0;
  double eps_ = 0;
  std::int64_t steps_ = 0;
};

}  // namespace styleforge
