#include "styleforge/generator.hpp"

#include <stdexcept>

namespace styleforge {

// ---- residual block -------------------------------------------------------------

Var ResidualBlock::forward(const Var& x) const {
  Var h = relu(instance_norm(conv1(x)));
  return add(x, instance_norm(conv2(h)));
}

Var ResidualBlock::forward(const Var& x, const AdaINParams& params) const {
  Var h = relu(adain(conv1(x), params.scale, params.bias));
  return add(x, conv2(h));
}

void ResidualBlock::collect(ParamList& list, const std::string& prefix) const {
  conv1.collect(list, prefix + ".conv1");
  conv2.collect(list, prefix + ".conv2");
}

namespace {

// Even split; an odd count gives the extra block to the IN half.
int instance_blocks(int total) { return total - total / 2; }

ResidualBlock make_block(int channels, bool adaptive, Rng& rng, double std) {
  return {Conv2d(channels, channels, 3, 1, 1, rng, std), Conv2d(channels, channels, 3, 1, 1, rng, std), adaptive};
}

}  // namespace

// ---- content encoder --------------------------------------------------------------

ContentEncoder::ContentEncoder(const RunConfig& config, Rng& rng) {
  const double std = config.init_std;
  int channels = config.base_channels;
  stem_ = Conv2d(3, channels, 7, 1, 3, rng, std);
  for (int i = 0; i < config.downsample_layers; ++i) {
    downs_.emplace_back(channels, channels * 2, 4, 2, 1, rng, std);
    channels *= 2;
  }
  for (int i = 0; i < instance_blocks(config.residual_blocks); ++i) blocks_.push_back(make_block(channels, false, rng, std));
  out_channels_ = channels;
}

Var ContentEncoder::encode(const Var& images) const {
  if (images.value().rank() != 4 || images.dim(1) != 3) {
    throw std::invalid_argument("content encoder expects N×3×H×W images, got " + shape_string(images.shape()));
  }
  const int factor = downsample_factor();
  if (images.dim(2) % factor || images.dim(3) % factor) {
    throw std::invalid_argument("image size " + shape_string(images.shape()) + " is not divisible by " +
                                std::to_string(factor));
  }
  Var h = relu(instance_norm(stem_(images)));
  for (const auto& down : downs_) h = relu(instance_norm(down(h)));
  for (const auto& block : blocks_) h = block.forward(h);
  return h;
}

void ContentEncoder::collect(ParamList& list, const std::string& prefix) const {
  stem_.collect(list, prefix + ".stem");
  for (std::size_t i = 0; i < downs_.size(); ++i) downs_[i].collect(list, prefix + ".down" + std::to_string(i));
  for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect(list, prefix + ".res" + std::to_string(i));
}

void ContentEncoder::describe(std::vector<LayerInfo>& layers) const {
  layers.push_back({"content_encoder.stem", LayerRole::stem, NormKind::instance});
  for (std::size_t i = 0; i < downs_.size(); ++i) {
    layers.push_back({"content_encoder.down" + std::to_string(i), LayerRole::downsample, NormKind::instance});
  }
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    layers.push_back({"content_encoder.res" + std::to_string(i), LayerRole::residual, NormKind::instance});
  }
}

// ---- decoder ---------------------------------------------------------------------------

Decoder::Decoder(const RunConfig& config, int in_channels, Rng& rng) {
  const double std = config.init_std;
  int channels = in_channels;
  for (int i = 0; i < config.residual_blocks / 2; ++i) blocks_.push_back(make_block(channels, true, rng, std));
  const int k = config.upsample_kernel;
  for (int i = 0; i < config.downsample_layers; ++i) {
    ups_.emplace_back(channels, channels / 2, k, 1, k / 2, rng, std);
    up_norms_.emplace_back(channels / 2);
    channels /= 2;
  }
  out_ = Conv2d(channels, 3, 7, 1, 3, rng, std);
}

Var Decoder::decode(const Var& content, const AdaINParamSet& params) const {
  if (params.size() != blocks_.size()) {
    throw std::invalid_argument("decoder needs " + std::to_string(blocks_.size()) + " AdaIN parameter pairs, got " +
                                std::to_string(params.size()));
  }
  Var h = content;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const int c = blocks_[i].conv1.out_channels();
    if (params[i].scale.shape() != Shape{content.dim(0), c} || params[i].bias.shape() != Shape{content.dim(0), c}) {
      throw std::invalid_argument("AdaIN parameters for block " + std::to_string(i) + " must be " +
                                  shape_string({content.dim(0), c}));
    }
    h = blocks_[i].forward(h, params[i]);
  }
  for (std::size_t i = 0; i < ups_.size(); ++i) h = relu(up_norms_[i](ups_[i](upsample_nearest2x(h))));
  return tanh(out_(h));
}

std::vector<int> Decoder::adain_channels() const {
  std::vector<int> out;
  for (const auto& b : blocks_) out.push_back(b.conv1.out_channels());
  return out;
}

void Decoder::collect(ParamList& list, const std::string& prefix) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect(list, prefix + ".res" + std::to_string(i));
  for (std::size_t i = 0; i < ups_.size(); ++i) {
    ups_[i].collect(list, prefix + ".up" + std::to_string(i));
    up_norms_[i].collect(list, prefix + ".up" + std::to_string(i) + ".norm");
  }
  out_.collect(list, prefix + ".out");
}

void Decoder::describe(std::vector<LayerInfo>& layers) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    layers.push_back({"decoder.res" + std::to_string(i), LayerRole::residual, NormKind::adaptive_instance});
  }
  for (std::size_t i = 0; i < ups_.size(); ++i) {
    layers.push_back({"decoder.up" + std::to_string(i), LayerRole::upsample, NormKind::layer});
  }
  layers.push_back({"decoder.out", LayerRole::output, NormKind::none});
}

// ---- mapping network -------------------------------------------------------------------

MappingNetwork::MappingNetwork(int style_dim, int num_domains, int hidden, std::vector<int> adain_channels,
                               Rng& rng, double init_std)
    : style_dim_(style_dim), num_domains_(num_domains), channels_(std::move(adain_channels)) {
  int total = 0;
  for (int c : channels_) total += 2 * c;
  fc1_ = Linear(style_dim + num_domains, hidden, rng, init_std);
  fc2_ = Linear(hidden, hidden, rng, init_std);
  fc3_ = Linear(hidden, std::max(total, 1), rng, init_std);
}

AdaINParamSet MappingNetwork::map(const Var& codes, const Tensor& labels) const {
  if (codes.value().rank() != 2 || codes.dim(1) != style_dim_) {
    throw std::invalid_argument("mapping network expects N×" + std::to_string(style_dim_) + " codes, got " +
                                shape_string(codes.shape()));
  }
  if (labels.rank() != 2 || labels.dim(0) != codes.dim(0) || labels.dim(1) != num_domains_) {
    throw std::invalid_argument("mapping network labels must be " + std::to_string(codes.dim(0)) + "×" +
                                std::to_string(num_domains_) + ", got " + shape_string(labels.shape()));
  }
  Var h = concat({codes, constant(labels)});
  Var raw = fc3_(relu(fc2_(relu(fc1_(h)))));
  AdaINParamSet out;
  int offset = 0;
  for (int c : channels_) {
    out.push_back({add_scalar(slice(raw, 1, offset, c), 1), slice(raw, 1, offset + c, c)});
    offset += 2 * c;
  }
  return out;
}

void MappingNetwork::collect(ParamList& list, const std::string& prefix) const {
  fc1_.collect(list, prefix + ".fc1");
  fc2_.collect(list, prefix + ".fc2");
  fc3_.collect(list, prefix + ".fc3");
}

// ---- generator ----------------------------------------------------------------------------

Generator::Generator(const RunConfig& config, int num_domains, Rng& rng)
    : style_dim_(config.style_dim),
      num_domains_(num_domains),
      resolution_(config.resolution),
      encoder_(config, rng),
      decoder_(config, encoder_.out_channels(), rng),
      mapping_(config.style_dim, num_domains, config.mapping_hidden, decoder_.adain_channels(), rng,
               config.init_std) {}

Var Generator::encode_content(const Var& images) const { return encoder_.encode(images); }

AdaINParamSet Generator::map_style(const Var& codes, const Tensor& labels) const {
  return mapping_.map(codes, labels);
}

Var Generator::decode(const Var& content, const AdaINParamSet& params) const {
  return decoder_.decode(content, params);
}

Var Generator::generate(const Var& images, const Var& codes, const Tensor& labels) const {
  return decode(encode_content(images), map_style(codes, labels));
}

std::vector<LayerInfo> Generator::layers() const {
  std::vector<LayerInfo> out;
  encoder_.describe(out);
  decoder_.describe(out);
  return out;
}

void Generator::collect(ParamList& list, const std::string& prefix) const {
  encoder_.collect(list, prefix + ".content_encoder");
  decoder_.collect(list, prefix + ".decoder");
  mapping_.collect(list, prefix + ".mapping");
}

}  // namespace styleforge
