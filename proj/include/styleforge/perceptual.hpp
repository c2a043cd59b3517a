#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "styleforge/config.hpp"
#include "styleforge/data.hpp"
#include "styleforge/nn.hpp"

namespace styleforge {

/// Frozen network exposing four feature taps.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  /// Four feature maps, shallow to deep, for N×3×H×W images in [-1, 1].
  virtual std::vector<Var> features(const Var& images) const = 0;
  virtual std::string backend_name() const = 0;
  virtual void collect(ParamList& list, const std::string& prefix) const = 0;
};

/// Small four-stage CNN: conv3×3 + ReLU taps separated by 2×2 pooling.
class TinyFeatureNet : public FeatureExtractor {
 public:
  static constexpr int kWidth = 8;

  TinyFeatureNet() = default;
  explicit TinyFeatureNet(Rng& rng);

  std::vector<Var> features(const Var& images) const override;
  std::string backend_name() const override { return "tiny"; }
  void collect(ParamList& list, const std::string& prefix) const override;
  int out_channels() const { return convs_.back().out_channels(); }

 private:
  std::vector<Conv2d> convs_;
};

/// First four blocks of the 16-layer VGG network; taps after conv1_1,
/// conv2_1, conv3_1 and conv4_1 (each rectified). Weights are read from a
/// checkpoint archive with entries vgg16.convB_L.weight / .bias.
class Vgg16Features : public FeatureExtractor {
 public:
  explicit Vgg16Features(const std::map<std::string, Tensor>& arrays);
  static std::unique_ptr<Vgg16Features> load(const std::filesystem::path& path);
  /// Entry names and shapes the weight file must provide.
  static std::vector<std::pair<std::string, Shape>> expected_entries();

  std::vector<Var> features(const Var& images) const override;
  std::string backend_name() const override { return "vgg16"; }
  void collect(ParamList& list, const std::string& prefix) const override;

 private:
  std::vector<std::string> names_;
  std::vector<Conv2d> convs_;
};

/// Σ over taps of mean |gram(F_i(a)) − gram(F_i(b))|.
Var style_preserving_loss(const FeatureExtractor& extractor, const Var& a, const Var& b);

/// TinyFeatureNet trunk with a global-pooled linear domain head.
class DomainClassifier {
 public:
  DomainClassifier() = default;
  DomainClassifier(int num_domains, Rng& rng);

  Var logits(const Var& images) const;
  /// Arg-max domain per image, evaluated without recording gradients.
  std::vector<int> predict(const Tensor& images) const;
  const TinyFeatureNet& trunk() const { return trunk_; }
  TinyFeatureNet& trunk() { return trunk_; }
  int num_domains() const { return head_.out_features(); }
  void collect(ParamList& list, const std::string& prefix) const;

 private:
  TinyFeatureNet trunk_;
  Linear head_;
};

struct ClassifierSettings {
  int steps = 300;
  int batch_size = 16;
  double learning_rate = 1e-3;
  /// Trailing fraction of each domain's images withheld from training.
  double holdout_fraction = 0.0;
  std::uint64_t seed = 0;
};

struct TrainedClassifier {
  DomainClassifier classifier;
  double train_accuracy = 0;
  double holdout_accuracy = 0;  // NaN when nothing is held out
};

/// Trains a domain classifier on the dataset's real style images.
TrainedClassifier train_domain_classifier(const Dataset& dataset, const ClassifierSettings& settings);

/// Extractor selected by the run configuration. The tiny backend is
/// pre-trained on the dataset's domain labels, then frozen.
std::unique_ptr<FeatureExtractor> build_feature_extractor(const RunConfig& config, const Dataset* dataset);

/// Tiny backend restored from named arrays (prefix "perceptual").
std::unique_ptr<FeatureExtractor> restore_feature_extractor(const RunConfig& config,
                                                            const std::map<std::string, Tensor>& arrays);

}  // namespace styleforge
