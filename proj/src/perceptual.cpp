#include "styleforge/perceptual.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "styleforge/checkpoint.hpp"
#include "styleforge/error.hpp"
#include "styleforge/optim.hpp"

namespace styleforge {

namespace {

double he_std(int in_channels, int kernel) { return std::sqrt(2.0 / (in_channels * kernel * kernel)); }

void copy_into(Var& param, const Tensor& source, const std::string& name) {
  if (source.shape() != param.shape()) {
    throw DataError("entry '" + name + "' has shape " + shape_string(source.shape()) + ", expected " +
                    shape_string(param.shape()));
  }
  param.mutable_value() = source;
}

}  // namespace

// ---- tiny backend ---------------------------------------------------------------

TinyFeatureNet::TinyFeatureNet(Rng& rng) {
  const int widths[] = {3, kWidth, 2 * kWidth, 4 * kWidth, 4 * kWidth};
  for (int i = 0; i < 4; ++i) convs_.emplace_back(widths[i], widths[i + 1], 3, 1, 1, rng, he_std(widths[i], 3));
}

std::vector<Var> TinyFeatureNet::features(const Var& images) const {
  std::vector<Var> taps;
  Var h = images;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    if (i > 0) h = avg_pool2x2(h);
    h = relu(convs_[i](h));
    taps.push_back(h);
  }
  return taps;
}

void TinyFeatureNet::collect(ParamList& list, const std::string& prefix) const {
  for (std::size_t i = 0; i < convs_.size(); ++i) convs_[i].collect(list, prefix + ".conv" + std::to_string(i));
}

// ---- VGG-16 backend -------------------------------------------------------------

namespace {

struct VggLayer {
  const char* name;
  int in;
  int out;
  bool pool_before;
  bool tap;
};

constexpr VggLayer kVggLayers[] = {
    {"conv1_1", 3, 64, false, true},     {"conv1_2", 64, 64, false, false},
    {"conv2_1", 64, 128, true, true},    {"conv2_2", 128, 128, false, false},
    {"conv3_1", 128, 256, true, true},   {"conv3_2", 256, 256, false, false},
    {"conv3_3", 256, 256, false, false}, {"conv4_1", 256, 512, true, true},
};

// ImageNet channel statistics for inputs in [0, 1].
constexpr real kVggMean[3] = {real(0.485), real(0.456), real(0.406)};
constexpr real kVggStd[3] = {real(0.229), real(0.224), real(0.225)};

}  // namespace

std::vector<std::pair<std::string, Shape>> Vgg16Features::expected_entries() {
  std::vector<std::pair<std::string, Shape>> out;
  for (const auto& l : kVggLayers) {
    out.emplace_back(std::string("vgg16.") + l.name + ".weight", Shape{l.out, l.in, 3, 3});
    out.emplace_back(std::string("vgg16.") + l.name + ".bias", Shape{l.out});
  }
  return out;
}

Vgg16Features::Vgg16Features(const std::map<std::string, Tensor>& arrays) {
  Rng unused(0);
  for (const auto& l : kVggLayers) {
    Conv2d conv(l.in, l.out, 3, 1, 1, unused, 0);
    for (auto [field, param] : {std::pair{".weight", &conv.weight}, std::pair{".bias", &conv.bias}}) {
      const std::string key = std::string("vgg16.") + l.name + field;
      const auto it = arrays.find(key);
      if (it == arrays.end()) throw DataError("VGG-16 weight file lacks entry '" + key + "'");
      copy_into(*param, it->second, key);
      param->set_requires_grad(false);
    }
    names_.emplace_back(l.name);
    convs_.push_back(std::move(conv));
  }
}

std::unique_ptr<Vgg16Features> Vgg16Features::load(const std::filesystem::path& path) {
  return std::make_unique<Vgg16Features>(read_archive(path).arrays);
}

std::vector<Var> Vgg16Features::features(const Var& images) const {
  const int n = images.dim(0);
  Tensor scale_t({n, 3});
  Tensor bias_t({n, 3});
  for (int s = 0; s < n; ++s)
    for (int c = 0; c < 3; ++c) {
      // ((x + 1)/2 − mean)/std
      scale_t.at(s, c) = real(0.5) / kVggStd[c];
      bias_t.at(s, c) = (real(0.5) - kVggMean[c]) / kVggStd[c];
    }
  Var h = channel_affine(images, constant(scale_t), constant(bias_t));
  std::vector<Var> taps;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    if (kVggLayers[i].pool_before) h = avg_pool2x2(h);
    h = relu(convs_[i](h));
    if (kVggLayers[i].tap) taps.push_back(h);
  }
  return taps;
}

void Vgg16Features::collect(ParamList& list, const std::string& prefix) const {
  for (std::size_t i = 0; i < convs_.size(); ++i) convs_[i].collect(list, prefix + "." + names_[i]);
}

// ---- Gram loss ---------------------------------------------------------------------

Var style_preserving_loss(const FeatureExtractor& extractor, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument("style preserving loss needs equal shapes, got " + shape_string(a.shape()) +
                                " and " + shape_string(b.shape()));
  }
  const std::vector<Var> fa = extractor.features(a);
  const std::vector<Var> fb = extractor.features(b);
  Var total;
  for (std::size_t i = 0; i < fa.size(); ++i) {
    Var term = l1_loss(gram(fa[i]), gram(fb[i]));
    total = total.defined() ? add(total, term) : term;
  }
  return total;
}

// ---- domain classifier -----------------------------------------------------------

DomainClassifier::DomainClassifier(int num_domains, Rng& rng)
    : trunk_(rng), head_(4 * TinyFeatureNet::kWidth, num_domains, rng, std::sqrt(1.0 / (4 * TinyFeatureNet::kWidth))) {}

Var DomainClassifier::logits(const Var& images) const {
  return head_(global_avg_pool(trunk_.features(images).back()));
}

std::vector<int> DomainClassifier::predict(const Tensor& images) const {
  NoGradGuard no_grad;
  std::vector<int> out;
  constexpr int kChunk = 32;
  for (int begin = 0; begin < images.dim(0); begin += kChunk) {
    const int count = std::min(kChunk, images.dim(0) - begin);
    const Tensor scores = logits(constant(images.slice_batch(begin, count))).value();
    for (int r = 0; r < count; ++r) {
      int best = 0;
      for (int k = 1; k < scores.dim(1); ++k)
        if (scores.at(r, k) > scores.at(r, best)) best = k;
      out.push_back(best);
    }
  }
  return out;
}

void DomainClassifier::collect(ParamList& list, const std::string& prefix) const {
  trunk_.collect(list, prefix + ".trunk");
  head_.collect(list, prefix + ".head");
}

namespace {

double accuracy_on(const DomainClassifier& classifier, const Dataset& dataset,
                   const std::vector<std::vector<int>>& split) {
  std::size_t hits = 0;
  std::size_t total = 0;
  for (int dom = 0; dom < static_cast<int>(split.size()); ++dom) {
    if (split[static_cast<std::size_t>(dom)].empty()) continue;
    std::vector<Tensor> images;
    for (int i : split[static_cast<std::size_t>(dom)])
      images.push_back(center_view(dataset, dataset.styles[static_cast<std::size_t>(dom)][static_cast<std::size_t>(i)]));
    for (int p : classifier.predict(stack_batch(images))) hits += p == dom;
    total += images.size();
  }
  return total ? static_cast<double>(hits) / static_cast<double>(total) : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

TrainedClassifier train_domain_classifier(const Dataset& dataset, const ClassifierSettings& settings) {
  const int d = dataset.domains.size();
  Rng init = Rng::for_stream(settings.seed, 0, 201);
  TrainedClassifier result{DomainClassifier(d, init), 0, 0};

  std::vector<std::vector<int>> train(static_cast<std::size_t>(d));
  std::vector<std::vector<int>> holdout(static_cast<std::size_t>(d));
  for (int dom = 0; dom < d; ++dom) {
    const int count = static_cast<int>(dataset.styles[static_cast<std::size_t>(dom)].size());
    const int held = std::min(count - 1, static_cast<int>(std::floor(count * settings.holdout_fraction)));
    for (int i = 0; i < count; ++i) (i < count - held ? train : holdout)[static_cast<std::size_t>(dom)].push_back(i);
  }

  ParamList params;
  result.classifier.collect(params, "classifier");
  Adam opt(params, settings.learning_rate, 0.9, 0.999);
  for (int step = 0; step < settings.steps; ++step) {
    Rng rng = Rng::for_stream(settings.seed, static_cast<std::uint64_t>(step), 202);
    std::vector<Tensor> images;
    std::vector<int> labels;
    for (int i = 0; i < settings.batch_size; ++i) {
      const int dom = rng.uniform_int(d);
      const auto& pool = train[static_cast<std::size_t>(dom)];
      const int pick = pool[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(pool.size())))];
      images.push_back(center_view(dataset, dataset.styles[static_cast<std::size_t>(dom)][static_cast<std::size_t>(pick)]));
      labels.push_back(dom);
    }
    Var loss = softmax_cross_entropy(result.classifier.logits(constant(stack_batch(images))),
                                     dataset.domains.onehot_batch(labels));
    if (!std::isfinite(loss.item())) throw NumericalError("non-finite classifier loss at step " + std::to_string(step));
    backward(loss);
    opt.step();
    opt.zero_grad();
  }
  params.set_requires_grad(false);
  result.train_accuracy = accuracy_on(result.classifier, dataset, train);
  result.holdout_accuracy = accuracy_on(result.classifier, dataset, holdout);
  return result;
}

// ---- backend selection ----------------------------------------------------------

std::unique_ptr<FeatureExtractor> build_feature_extractor(const RunConfig& config, const Dataset* dataset) {
  if (config.perceptual_backend == PerceptualBackend::vgg16) {
    if (config.perceptual_weights.empty()) throw ConfigError("perceptual_backend = vgg16 needs perceptual_weights");
    return Vgg16Features::load(config.perceptual_weights);
  }
  if (config.perceptual_pretrain_steps > 0 && dataset == nullptr) {
    throw std::invalid_argument("pre-training the tiny perceptual backend needs a dataset");
  }
  ClassifierSettings settings;
  settings.steps = config.perceptual_pretrain_steps;
  settings.seed = config.seed;
  TinyFeatureNet net;
  if (settings.steps > 0) {
    net = train_domain_classifier(*dataset, settings).classifier.trunk();
  } else {
    Rng rng = Rng::for_stream(config.seed, 0, 201);
    net = TinyFeatureNet(rng);
  }
  ParamList params;
  net.collect(params, "perceptual");
  params.set_requires_grad(false);
  return std::make_unique<TinyFeatureNet>(std::move(net));
}

std::unique_ptr<FeatureExtractor> restore_feature_extractor(const RunConfig& config,
                                                            const std::map<std::string, Tensor>& arrays) {
  if (config.perceptual_backend == PerceptualBackend::vgg16) return build_feature_extractor(config, nullptr);
  Rng unused(0);
  auto net = std::make_unique<TinyFeatureNet>(unused);
  ParamList params;
  net->collect(params, "perceptual");
  for (auto& [name, param] : params.entries()) {
    const auto it = arrays.find(name);
    if (it == arrays.end()) throw DataError("checkpoint lacks perceptual entry '" + name + "'");
    Var p = param;
    copy_into(p, it->second, name);
    p.set_requires_grad(false);
  }
  return net;
}

}  // namespace styleforge
