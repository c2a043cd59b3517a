#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace styleforge {

/// Weights of the generator-side objective terms.
struct LossWeights {
  double image_adversarial = 1.0;    // λ1
  double style_adversarial = 10.0;   // λ2
  double identity_content = 100.0;   // λ3, shared by identity and content terms
  double style_preserving = 30.0;    // λ4
  double classification = 1.0;       // λ5
  double kl = 0.0;                   // ablation only
  bool use_identity = true;
  bool use_content = true;

  void validate() const;
};

enum class PerceptualBackend { tiny, vgg16 };

struct RunConfig {
  // data
  int resolution = 256;
  bool random_crop = false;

  // style space
  int style_dim = 20;
  bool kl_ablation = false;  // encoder emits (mean, logvar) for the KL comparison

  // architecture scale
  int base_channels = 64;
  int downsample_layers = 2;
  int residual_blocks = 6;
  int upsample_kernel = 5;
  int style_encoder_channels = 64;
  int style_encoder_downsamples = 4;
  int mapping_hidden = 256;
  int disc_scales = 3;
  int disc_channels = 64;
  int disc_layers = 4;
  double init_std = 0.02;

  // perceptual features
  PerceptualBackend perceptual_backend = PerceptualBackend::tiny;
  std::string perceptual_weights;
  int perceptual_pretrain_steps = 300;

  LossWeights weights;

  // optimization
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  std::int64_t iterations = 350000;
  int batch_size = 1;
  double sampled_code_fraction = 0.5;

  // bookkeeping
  std::uint64_t seed = 0;
  std::int64_t checkpoint_interval = 10000;
  std::int64_t log_interval = 100;

  /// Throws ConfigError on any violated invariant.
  void validate() const;
  /// Flat `key = value` text, one entry per line, every key present.
  std::string to_text() const;
  /// Overrides one field from its text form. Unknown keys are errors.
  void set(const std::string& key, const std::string& value);
};

/// Parses `key = value` lines over the defaults; `#` starts a comment.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Desk-scale preset: 64 px, small widths, 2 discriminator scales, batch 8.
RunConfig desk_config();

}  // namespace styleforge
