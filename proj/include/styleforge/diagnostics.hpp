#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "styleforge/data.hpp"
#include "styleforge/generator.hpp"
#include "styleforge/perceptual.hpp"
#include "styleforge/style_alignment.hpp"

namespace styleforge {

// ---- style space ----------------------------------------------------------------

enum class Coverage { inadequate, excessive, aligned };
std::string to_string(Coverage coverage);

inline constexpr double kInadequateTrace = 1e-2;
inline constexpr double kExcessiveMargin = 0.1;

/// inadequate when the mean per-domain covariance trace is below
/// kInadequateTrace; otherwise excessive when the probe accuracy is below
/// chance + kExcessiveMargin; otherwise aligned.
Coverage classify_coverage(double mean_domain_trace, double probe_accuracy, int num_domains);

/// Counts over equal-width bins on [0, upper], normalized to sum 1.
struct Histogram {
  double upper = 0;
  std::vector<double> density;
};

struct StyleSpaceReport {
  int style_dim = 0;
  std::vector<int> domain_sizes;
  std::vector<std::vector<double>> domain_means;
  std::vector<double> domain_traces;  // trace of each domain's covariance
  double mean_domain_trace = 0;
  double min_domain_trace = 0;
  std::vector<double> joint_mean;      // per dimension
  std::vector<double> joint_variance;  // per dimension
  double mean_joint_variance = 0;
  double mean_within_l1 = 0;
  double mean_cross_l1 = 0;
  Histogram within_l1;
  Histogram cross_l1;
  double probe_accuracy = 0;  // held-out accuracy of a linear domain probe
  Coverage coverage = Coverage::aligned;
  // two leading principal components of the joint codes
  std::vector<int> pca_domain;
  std::vector<std::array<double, 2>> pca_points;
  std::array<double, 2> pca_explained{};
};

/// Statistics of per-domain code sets (each count×style_dim, count ≥ 2).
StyleSpaceReport style_space_report(const std::vector<Tensor>& codes, int n_pairs, Rng& rng, int bins = 20);
/// Encodes every style image of the dataset, then reports on the codes.
StyleSpaceReport style_space_report(const StyleEncoder& encoder, const Dataset& dataset, int n_pairs, Rng& rng);

/// Softmax regression on standardized codes; alternate samples of each
/// domain train and test. Returns test accuracy.
double linear_probe_accuracy(const std::vector<Tensor>& codes, int iterations = 300);

/// Writes style_space.json, style_pca.csv and style_l1_histogram.csv.
void write_style_space_report(const StyleSpaceReport& report, const std::vector<std::string>& domain_names,
                              const std::filesystem::path& out_dir);

// ---- re-classification --------------------------------------------------------

struct ClassifierReport {
  std::vector<std::string> domains;
  std::vector<std::vector<double>> confusion;  // row = intended domain, rows sum to 1
  std::vector<double> per_domain_accuracy;
  double mean_accuracy = 0;
  double exemplar_accuracy = 0;
  double sampled_accuracy = 0;
  int images = 0;
};

/// Stylizes every content image into every domain, once with an exemplar
/// code from a random style image of that domain and once with a sampled
/// code, and classifies the outputs.
ClassifierReport reclassification_accuracy(const Generator& generator, const StyleEncoder& encoder,
                                           const std::vector<Tensor>& contents, const Dataset& styles,
                                           const DomainClassifier& classifier, Rng& rng);

/// The classifier applied to the dataset's real style images.
ClassifierReport real_image_accuracy(const Dataset& styles, const DomainClassifier& classifier);

void write_classifier_report(const ClassifierReport& report, const std::filesystem::path& out_dir);

// ---- diversity and interpolation ------------------------------------------------

/// Mean over image pairs of the mean absolute difference of perceptual
/// features (averaged over taps) between generate(content, code_i, domain)
/// outputs. codes: n×style_dim, n ≥ 2.
double diversity_score(const Generator& generator, const FeatureExtractor& extractor, const Tensor& content,
                       const Tensor& label, const Tensor& codes);
/// Same with n_codes codes drawn from N(0, I).
double diversity_score(const Generator& generator, const FeatureExtractor& extractor, const Tensor& content,
                       const Tensor& label, int n_codes, Rng& rng);

struct InterpolationResult {
  std::vector<Tensor> frames;       // 1×3×H×W each
  std::vector<double> step_deltas;  // mean |frame[i+1] − frame[i]|
  double max_delta = 0;
  double mean_delta = 0;
  double smoothness_ratio = 0;  // max / mean, 0 when all deltas vanish
};

/// Frames for z(t) = (1−t)·z_a + t·z_b, labels blended the same way,
/// t = i/(steps−1). Each frame is generated on its own so the endpoints equal
/// generate(content, z_a, d_a) and generate(content, z_b, d_b) exactly.
InterpolationResult interpolation_path(const Generator& generator, const Tensor& content, const Tensor& z_a,
                                       const Tensor& z_b, const Tensor& label_a, const Tensor& label_b, int steps);

/// mean |E_c(x) − E_c(G(x, z, d))| over a batch.
double content_fidelity_error(const Generator& generator, const Tensor& contents, const Tensor& codes,
                              const Tensor& labels);

}  // namespace styleforge
