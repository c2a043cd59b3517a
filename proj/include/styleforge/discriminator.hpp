#pragma once

#include <string>
#include <vector>

#include "styleforge/config.hpp"
#include "styleforge/nn.hpp"

namespace styleforge {

struct DiscriminatorOutput {
  std::vector<Var> patch_logits;  // one N×1×h×w map per scale, finest first
  Var class_logits;               // N×D, average-pooled from the finest scale
};

/// Multi-scale patch discriminator D_c with the auxiliary domain classifier
/// D_cls sharing the finest-scale trunk. Scale s sees the image average-
/// pooled by 2^s.
class PatchDiscriminator {
 public:
  PatchDiscriminator() = default;
  PatchDiscriminator(const RunConfig& config, int num_domains, Rng& rng);

  DiscriminatorOutput forward(const Var& images) const;
  int scales() const { return static_cast<int>(trunks_.size()); }
  int num_domains() const { return num_domains_; }
  void collect(ParamList& list, const std::string& prefix) const;

 private:
  int num_domains_ = 0;
  std::vector<std::vector<Conv2d>> trunks_;
  std::vector<Conv2d> adv_heads_;
  Conv2d cls_head_;
};

/// LSGAN critic loss: mean over scales of mean((D(real) − 1)²) + mean(D(fake)²).
Var adv_loss_d(const DiscriminatorOutput& real_out, const DiscriminatorOutput& fake_out);
/// LSGAN generator loss: mean over scales of mean((D(fake) − 1)²).
Var adv_loss_g(const DiscriminatorOutput& fake);
/// Cross-entropy of the pooled class logits against labels (N×D).
Var cls_loss(const DiscriminatorOutput& out, const Tensor& labels);

}  // namespace styleforge
