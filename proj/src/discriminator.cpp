#include "styleforge/discriminator.hpp"

#include <stdexcept>

namespace styleforge {

PatchDiscriminator::PatchDiscriminator(const RunConfig& config, int num_domains, Rng& rng)
    : num_domains_(num_domains) {
  const double std = config.init_std;
  int top_channels = 0;
  for (int s = 0; s < config.disc_scales; ++s) {
    std::vector<Conv2d> trunk;
    int in = 3;
    int out = config.disc_channels;
    for (int l = 0; l < config.disc_layers; ++l) {
      trunk.emplace_back(in, out, 4, 2, 1, rng, std);
      in = out;
      out *= 2;
    }
    adv_heads_.emplace_back(in, 1, 1, 1, 0, rng, std);
    trunks_.push_back(std::move(trunk));
    if (s == 0) top_channels = in;
  }
  cls_head_ = Conv2d(top_channels, num_domains, 1, 1, 0, rng, std);
}

DiscriminatorOutput PatchDiscriminator::forward(const Var& images) const {
  if (images.value().rank() != 4 || images.dim(1) != 3) {
    throw std::invalid_argument("discriminator expects N×3×H×W images, got " + shape_string(images.shape()));
  }
  DiscriminatorOutput out;
  Var scaled = images;
  for (std::size_t s = 0; s < trunks_.size(); ++s) {
    if (s > 0) scaled = avg_pool2x2(scaled);
    Var h = scaled;
    for (const auto& conv : trunks_[s]) h = leaky_relu(conv(h));
    out.patch_logits.push_back(adv_heads_[s](h));
    if (s == 0) out.class_logits = global_avg_pool(cls_head_(h));
  }
  return out;
}

void PatchDiscriminator::collect(ParamList& list, const std::string& prefix) const {
  for (std::size_t s = 0; s < trunks_.size(); ++s) {
    const std::string p = prefix + ".scale" + std::to_string(s);
    for (std::size_t l = 0; l < trunks_[s].size(); ++l) trunks_[s][l].collect(list, p + ".conv" + std::to_string(l));
    adv_heads_[s].collect(list, p + ".adv");
  }
  cls_head_.collect(list, prefix + ".cls");
}

Var adv_loss_d(const DiscriminatorOutput& real_out, const DiscriminatorOutput& fake_out) {
  if (real_out.patch_logits.size() != fake_out.patch_logits.size() || real_out.patch_logits.empty()) {
    throw std::invalid_argument("adv_loss_d: real and fake outputs have different scale counts");
  }
  Var total;
  for (std::size_t s = 0; s < real_out.patch_logits.size(); ++s) {
    if (real_out.patch_logits[s].shape() != fake_out.patch_logits[s].shape()) {
      throw std::invalid_argument("adv_loss_d: shape mismatch at scale " + std::to_string(s));
    }
    Var term = add(mse_to(real_out.patch_logits[s], 1), mse_to(fake_out.patch_logits[s], 0));
    total = total.defined() ? add(total, term) : term;
  }
  return scale(total, real(1) / static_cast<real>(real_out.patch_logits.size()));
}

Var adv_loss_g(const DiscriminatorOutput& fake) {
  if (fake.patch_logits.empty()) throw std::invalid_argument("adv_loss_g: no scales");
  Var total;
  for (const auto& logits : fake.patch_logits) {
    Var term = mse_to(logits, 1);
    total = total.defined() ? add(total, term) : term;
  }
  return scale(total, real(1) / static_cast<real>(fake.patch_logits.size()));
}

Var cls_loss(const DiscriminatorOutput& out, const Tensor& labels) {
  return softmax_cross_entropy(out.class_logits, labels);
}

}  // namespace styleforge
