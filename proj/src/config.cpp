#include "styleforge/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "styleforge/error.hpp"

namespace styleforge {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  T value{};
  in >> value;
  if (in.fail() || !in.eof()) {
    std::string rest;
    if (!in.fail()) in >> rest;
    if (in.fail() || !rest.empty()) throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + text + "'");
}

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <class T>
Field number_field(std::string key, T RunConfig::*member) {
  return {key,
          [member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return format_double(c.*member);
            } else {
              return std::to_string(c.*member);
            }
          },
          [member, key](RunConfig& c, const std::string& v) { c.*member = parse_number<T>(key, v); }};
}

Field weight_field(std::string key, double LossWeights::*member) {
  return {key, [member](const RunConfig& c) { return format_double(c.weights.*member); },
          [member, key](RunConfig& c, const std::string& v) { c.weights.*member = parse_number<double>(key, v); }};
}

Field bool_field(std::string key, std::function<bool&(RunConfig&)> ref) {
  return {key, [ref](const RunConfig& c) { return ref(const_cast<RunConfig&>(c)) ? "true" : "false"; },
          [ref, key](RunConfig& c, const std::string& v) { ref(c) = parse_bool(key, v); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      number_field("resolution", &RunConfig::resolution),
      bool_field("random_crop", [](RunConfig& c) -> bool& { return c.random_crop; }),
      number_field("style_dim", &RunConfig::style_dim),
      bool_field("kl_ablation", [](RunConfig& c) -> bool& { return c.kl_ablation; }),
      number_field("base_channels", &RunConfig::base_channels),
      number_field("downsample_layers", &RunConfig::downsample_layers),
      number_field("residual_blocks", &RunConfig::residual_blocks),
      number_field("upsample_kernel", &RunConfig::upsample_kernel),
      number_field("style_encoder_channels", &RunConfig::style_encoder_channels),
      number_field("style_encoder_downsamples", &RunConfig::style_encoder_downsamples),
      number_field("mapping_hidden", &RunConfig::mapping_hidden),
      number_field("disc_scales", &RunConfig::disc_scales),
      number_field("disc_channels", &RunConfig::disc_channels),
      number_field("disc_layers", &RunConfig::disc_layers),
      number_field("init_std", &RunConfig::init_std),
      {"perceptual_backend",
       [](const RunConfig& c) { return c.perceptual_backend == PerceptualBackend::tiny ? "tiny" : "vgg16"; },
       [](RunConfig& c, const std::string& v) {
         if (v == "tiny") {
           c.perceptual_backend = PerceptualBackend::tiny;
         } else if (v == "vgg16") {
           c.perceptual_backend = PerceptualBackend::vgg16;
         } else {
           throw ConfigError("config key 'perceptual_backend': expected tiny or vgg16, got '" + v + "'");
         }
       }},
      {"perceptual_weights", [](const RunConfig& c) { return c.perceptual_weights; },
       [](RunConfig& c, const std::string& v) { c.perceptual_weights = v; }},
      number_field("perceptual_pretrain_steps", &RunConfig::perceptual_pretrain_steps),
      weight_field("lambda_image_adversarial", &LossWeights::image_adversarial),
      weight_field("lambda_style_adversarial", &LossWeights::style_adversarial),
      weight_field("lambda_identity_content", &LossWeights::identity_content),
      weight_field("lambda_style_preserving", &LossWeights::style_preserving),
      weight_field("lambda_classification", &LossWeights::classification),
      weight_field("lambda_kl", &LossWeights::kl),
      bool_field("use_identity_loss", [](RunConfig& c) -> bool& { return c.weights.use_identity; }),
      bool_field("use_content_loss", [](RunConfig& c) -> bool& { return c.weights.use_content; }),
      number_field("learning_rate", &RunConfig::learning_rate),
      number_field("beta1", &RunConfig::beta1),
      number_field("beta2", &RunConfig::beta2),
      number_field("iterations", &RunConfig::iterations),
      number_field("batch_size", &RunConfig::batch_size),
      number_field("sampled_code_fraction", &RunConfig::sampled_code_fraction),
      number_field("seed", &RunConfig::seed),
      number_field("checkpoint_interval", &RunConfig::checkpoint_interval),
      number_field("log_interval", &RunConfig::log_interval),
  };
  return table;
}

}  // namespace

void LossWeights::validate() const {
  for (double w : {image_adversarial, style_adversarial, identity_content, style_preserving, classification, kl}) {
    if (!(w >= 0.0)) throw ConfigError("loss weights must be non-negative");
  }
}

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid config: " + what);
  };
  require(style_dim >= 1, "style_dim must be >= 1");
  require(resolution >= 8, "resolution must be >= 8");
  require(downsample_layers >= 0 && downsample_layers <= 6, "downsample_layers must be in [0, 6]");
  require(resolution % (1 << downsample_layers) == 0,
          "resolution must be a multiple of 2^downsample_layers");
  require(resolution % (1 << style_encoder_downsamples) == 0,
          "resolution must be a multiple of 2^style_encoder_downsamples");
  require((resolution >> (disc_scales - 1)) >= (1 << disc_layers),
          "resolution too small for disc_scales and disc_layers");
  require(base_channels >= 1 && style_encoder_channels >= 1 && disc_channels >= 1, "channel counts must be >= 1");
  require(residual_blocks >= 0, "residual_blocks must be >= 0");
  require(upsample_kernel >= 1 && upsample_kernel % 2 == 1, "upsample_kernel must be odd");
  require(style_encoder_downsamples >= 0, "style_encoder_downsamples must be >= 0");
  require(mapping_hidden >= 1, "mapping_hidden must be >= 1");
  require(disc_scales >= 1 && disc_layers >= 1, "disc_scales and disc_layers must be >= 1");
  require(init_std > 0, "init_std must be > 0");
  require(learning_rate > 0, "learning_rate must be > 0");
  require(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1, "Adam betas must be in [0, 1)");
  require(iterations >= 0, "iterations must be >= 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(sampled_code_fraction >= 0 && sampled_code_fraction <= 1, "sampled_code_fraction must be in [0, 1]");
  require(checkpoint_interval >= 1 && log_interval >= 1, "intervals must be >= 1");
  require(perceptual_pretrain_steps >= 0, "perceptual_pretrain_steps must be >= 0");
  require(perceptual_backend == PerceptualBackend::tiny || !perceptual_weights.empty(),
          "perceptual_backend = vgg16 needs perceptual_weights");
  weights.validate();
  require(weights.kl == 0.0 || kl_ablation, "lambda_kl > 0 is only allowed with kl_ablation = true");
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  for (const auto& f : fields()) out << f.key << " = " << f.get(*this) << '\n';
  return out.str();
}

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(*this, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

RunConfig parse_config(const std::string& text) {
  RunConfig config;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  config.validate();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

RunConfig desk_config() {
  RunConfig c;
  c.resolution = 64;
  c.base_channels = 8;
  c.downsample_layers = 2;
  c.residual_blocks = 6;
  c.upsample_kernel = 3;
  c.style_encoder_channels = 16;
  c.style_encoder_downsamples = 3;
  c.mapping_hidden = 128;
  c.disc_scales = 2;
  c.disc_channels = 16;
  c.disc_layers = 3;
  c.iterations = 5000;
  c.batch_size = 8;
  c.checkpoint_interval = 1000;
  c.log_interval = 50;
  return c;
}

}  // namespace styleforge
