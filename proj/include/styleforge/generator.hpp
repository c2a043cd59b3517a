#pragma once

#include <string>
#include <vector>

#include "styleforge/config.hpp"
#include "styleforge/nn.hpp"

namespace styleforge {

enum class NormKind { none, instance, adaptive_instance, layer };
enum class LayerRole { stem, downsample, residual, upsample, output };

/// Static description of one generator layer, for introspection.
struct LayerInfo {
  std::string name;
  LayerRole role;
  NormKind norm;
};

/// Channel-wise (scale, bias) for one AdaIN-equipped residual block, N×C each.
struct AdaINParams {
  Var scale;
  Var bias;
};
using AdaINParamSet = std::vector<AdaINParams>;

/// conv → norm → ReLU → conv (→ norm) plus identity skip.
struct ResidualBlock {
  Conv2d conv1;
  Conv2d conv2;
  bool adaptive = false;

  /// Instance-normalized block.
  Var forward(const Var& x) const;
  /// AdaIN block: the single (scale, bias) pair follows the first conv.
  Var forward(const Var& x, const AdaINParams& params) const;
  void collect(ParamList& list, const std::string& prefix) const;
};

/// E_c: stem and down-sampling convolutions plus the first half of the
/// residual blocks, all instance-normalized.
class ContentEncoder {
 public:
  ContentEncoder() = default;
  ContentEncoder(const RunConfig& config, Rng& rng);

  Var encode(const Var& images) const;
  int out_channels() const { return out_channels_; }
  int downsample_factor() const { return 1 << static_cast<int>(downs_.size()); }
  void collect(ParamList& list, const std::string& prefix) const;
  void describe(std::vector<LayerInfo>& layers) const;

 private:
  Conv2d stem_;
  std::vector<Conv2d> downs_;
  std::vector<ResidualBlock> blocks_;
  int out_channels_ = 0;
};

/// Dec_c: AdaIN residual blocks, layer-normalized up-sampling layers, and a
/// tanh output convolution.
class Decoder {
 public:
  Decoder() = default;
  Decoder(const RunConfig& config, int in_channels, Rng& rng);

  Var decode(const Var& content, const AdaINParamSet& params) const;
  /// Channel count of each AdaIN layer, in order.
  std::vector<int> adain_channels() const;
  void collect(ParamList& list, const std::string& prefix) const;
  void describe(std::vector<LayerInfo>& layers) const;

 private:
  std::vector<ResidualBlock> blocks_;
  std::vector<Conv2d> ups_;
  std::vector<LayerNorm> up_norms_;
  Conv2d out_;
};

/// MLP from [z, d] to every AdaIN layer's scale and bias. Scales are
/// emitted as 1 + raw so an untrained network starts near identity.
class MappingNetwork {
 public:
  MappingNetwork() = default;
  MappingNetwork(int style_dim, int num_domains, int hidden, std::vector<int> adain_channels, Rng& rng,
                 double init_std);

  /// codes N×style_dim, labels N×D.
  AdaINParamSet map(const Var& codes, const Tensor& labels) const;
  int input_width() const { return style_dim_ + num_domains_; }
  void collect(ParamList& list, const std::string& prefix) const;

 private:
  int style_dim_ = 0;
  int num_domains_ = 0;
  std::vector<int> channels_;
  Linear fc1_, fc2_, fc3_;
};

/// G(x, z, d) = Dec_c(E_c(x), map(z, d)).
class Generator {
 public:
  Generator() = default;
  Generator(const RunConfig& config, int num_domains, Rng& rng);

  Var encode_content(const Var& images) const;
  AdaINParamSet map_style(const Var& codes, const Tensor& labels) const;
  Var decode(const Var& content, const AdaINParamSet& params) const;
  Var generate(const Var& images, const Var& codes, const Tensor& labels) const;

  std::vector<LayerInfo> layers() const;
  int style_dim() const { return style_dim_; }
  int num_domains() const { return num_domains_; }
  int resolution() const { return resolution_; }
  const ContentEncoder& content_encoder() const { return encoder_; }
  void collect(ParamList& list, const std::string& prefix) const;

 private:
  int style_dim_ = 0;
  int num_domains_ = 0;
  int resolution_ = 0;
  ContentEncoder encoder_;
  Decoder decoder_;
  MappingNetwork mapping_;
};

}  // namespace styleforge
