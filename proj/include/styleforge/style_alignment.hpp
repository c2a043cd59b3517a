#pragma once

#include <string>
#include <vector>

#include "styleforge/config.hpp"
#include "styleforge/data.hpp"
#include "styleforge/nn.hpp"

namespace styleforge {

/// Output of the style encoder in KL-ablation mode.
struct GaussianCode {
  Var mean;
  Var logvar;
};

/// Convolutional down-sampling stack over the image with the domain label
/// broadcast as extra constant input planes, global average pooling, and a
/// final linear projection to the style code.
class StyleEncoder {
 public:
  StyleEncoder() = default;
  StyleEncoder(const RunConfig& config, int num_domains, Rng& rng);

  /// images N×3×H×W, labels N×D (one-hot or blended rows) -> N×style_dim.
  /// In KL-ablation mode this is the posterior mean.
  Var encode(const Var& images, const Tensor& labels) const;
  /// KL-ablation mode only: (mean, logvar), each N×style_dim.
  GaussianCode encode_distribution(const Var& images, const Tensor& labels) const;

  int style_dim() const { return style_dim_; }
  int num_domains() const { return num_domains_; }
  bool distribution_head() const { return distribution_head_; }
  void collect(ParamList& list, const std::string& prefix) const;

 private:
  Var features(const Var& images, const Tensor& labels) const;

  int style_dim_ = 0;
  int num_domains_ = 0;
  bool distribution_head_ = false;
  std::vector<Conv2d> convs_;
  Linear head_;
};

/// Fully-connected critic on style codes: 3 layers, leaky rectifiers,
/// hidden width 4·style_dim, one logit per row.
class StyleDiscriminator {
 public:
  StyleDiscriminator() = default;
  StyleDiscriminator(int style_dim, Rng& rng, double init_std);

  Var logits(const Var& codes) const;
  int style_dim() const { return style_dim_; }
  void collect(ParamList& list, const std::string& prefix) const;

 private:
  int style_dim_ = 0;
  Linear fc1_, fc2_, fc3_;
};

/// N codes with i.i.d. standard-normal entries.
Tensor sample_style(int count, int style_dim, Rng& rng);

/// Reparameterized posterior sample mean + exp(logvar/2)·eps.
Var sample_posterior(const GaussianCode& code, Rng& rng);

/// Critic objective −[log σ(D(z_s)) + log(1 − σ(D(z_enc)))], batch-averaged.
Var style_adv_loss_discriminator(const Var& logits_sampled, const Var& logits_encoded);
/// Encoder objective −log σ(D(z_enc)), batch-averaged (non-saturating).
Var style_adv_loss_encoder(const Var& logits_encoded);
/// KL(N(mean, exp(logvar)) ‖ N(0, I)); refuses encoders without the KL head.
Var kl_ablation_loss(const StyleEncoder& encoder, const GaussianCode& code);

// ---- stand-alone training of the style space ----------------------------

enum class AlignmentMode { adversarial, kl };

struct AlignmentSettings {
  AlignmentMode mode = AlignmentMode::adversarial;
  double alignment_weight = 10.0;  // λ2 for adversarial, the KL weight otherwise
  int steps = 2000;
  int batch_size = 32;
  double learning_rate = 0;         // encoder and domain head; ≤0 uses the run config's rate
  double critic_learning_rate = 0;  // ≤0 uses learning_rate
  int critic_steps = 1;             // critic updates per encoder update
  std::uint64_t seed = 0;
};

/// Style encoder trained on its own: the alignment term (adversarial or KL)
/// plus a linear domain head on the codes, which stands in for the
/// domain-consistency pressure the generator applies in the full model.
struct AlignmentRun {
  StyleEncoder encoder;
  StyleDiscriminator discriminator;
  Linear domain_head;
  std::vector<double> discriminator_loss;  // per step (adversarial mode)
};

/// Trains on dataset.styles only (content images are not used).
AlignmentRun train_style_alignment(const RunConfig& config, const Dataset& dataset, const AlignmentSettings& settings);

/// Codes for every style image of every domain, in dataset order.
/// KL-mode encoders yield posterior samples (the code the generator would
/// consume), deterministic encoders their single output.
struct EncodedStyles {
  std::vector<Tensor> codes;  // per domain: count×style_dim
};
EncodedStyles encode_dataset_styles(const StyleEncoder& encoder, const Dataset& dataset, Rng& rng,
                                    int chunk = 32);

}  // namespace styleforge
