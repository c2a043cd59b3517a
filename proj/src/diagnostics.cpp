#include "styleforge/diagnostics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <stdexcept>

#include "styleforge/error.hpp"

namespace styleforge {

namespace fs = std::filesystem;

std::string to_string(Coverage coverage) {
  switch (coverage) {
    case Coverage::inadequate:
      return "inadequate coverage";
    case Coverage::excessive:
      return "excessive coverage";
    case Coverage::aligned:
      return "aligned";
  }
  return "unknown";
}

Coverage classify_coverage(double mean_domain_trace, double probe_accuracy, int num_domains) {
  if (mean_domain_trace < kInadequateTrace) return Coverage::inadequate;
  if (probe_accuracy < 1.0 / num_domains + kExcessiveMargin) return Coverage::excessive;
  return Coverage::aligned;
}

namespace {

double row_l1(const Tensor& a, int i, const Tensor& b, int j) {
  const int f = a.dim(1);
  double s = 0;
  for (int k = 0; k < f; ++k) s += std::abs(static_cast<double>(a.at(i, k)) - b.at(j, k));
  return s;
}

Histogram histogram(const std::vector<double>& values, double upper, int bins) {
  Histogram h;
  h.upper = upper;
  h.density.assign(static_cast<std::size_t>(bins), 0.0);
  if (values.empty() || upper <= 0) return h;
  for (double v : values) {
    const int b = std::clamp(static_cast<int>(v / upper * bins), 0, bins - 1);
    h.density[static_cast<std::size_t>(b)] += 1;
  }
  for (double& d : h.density) d /= static_cast<double>(values.size());
  return h;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

// ---- linear probe -----------------------------------------------------------------

double linear_probe_accuracy(const std::vector<Tensor>& codes, int iterations) {
  const int k = static_cast<int>(codes.size());
  if (k < 2) throw std::invalid_argument("linear probe needs at least two domains");
  const int f = codes.front().dim(1);
  std::vector<std::vector<double>> train_x, test_x;
  std::vector<int> train_y, test_y;
  for (int d = 0; d < k; ++d) {
    const Tensor& c = codes[static_cast<std::size_t>(d)];
    if (c.dim(0) < 2) throw std::invalid_argument("linear probe needs at least two codes per domain");
    for (int i = 0; i < c.dim(0); ++i) {
      std::vector<double> row(static_cast<std::size_t>(f));
      for (int j = 0; j < f; ++j) row[static_cast<std::size_t>(j)] = c.at(i, j);
      (i % 2 == 0 ? train_x : test_x).push_back(std::move(row));
      (i % 2 == 0 ? train_y : test_y).push_back(d);
    }
  }
  // standardize with training statistics
  std::vector<double> mu(static_cast<std::size_t>(f), 0.0), sd(static_cast<std::size_t>(f), 0.0);
  for (const auto& r : train_x)
    for (int j = 0; j < f; ++j) mu[static_cast<std::size_t>(j)] += r[static_cast<std::size_t>(j)] / static_cast<double>(train_x.size());
  for (const auto& r : train_x)
    for (int j = 0; j < f; ++j) {
      const double e = r[static_cast<std::size_t>(j)] - mu[static_cast<std::size_t>(j)];
      sd[static_cast<std::size_t>(j)] += e * e / static_cast<double>(train_x.size());
    }
  for (double& s : sd) s = std::sqrt(s) + 1e-12;
  auto standardize = [&](std::vector<std::vector<double>>& rows) {
    for (auto& r : rows)
      for (int j = 0; j < f; ++j)
        r[static_cast<std::size_t>(j)] = (r[static_cast<std::size_t>(j)] - mu[static_cast<std::size_t>(j)]) / sd[static_cast<std::size_t>(j)];
  };
  standardize(train_x);
  standardize(test_x);

  const auto n = static_cast<Eigen::Index>(train_x.size());
  Eigen::MatrixXd x(n, f + 1);
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < f; ++j) x(i, j) = train_x[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    x(i, f) = 1.0;
    y(i, train_y[static_cast<std::size_t>(i)]) = 1.0;
  }
  // full-batch gradient descent on the mean cross-entropy with a small ridge
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(f + 1, k);
  constexpr double kRate = 0.5;
  constexpr double kRidge = 1e-4;
  for (int it = 0; it < iterations; ++it) {
    Eigen::MatrixXd z = x * w;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double m = z.row(i).maxCoeff();
      z.row(i) = (z.row(i).array() - m).exp();
      z.row(i) /= z.row(i).sum();
    }
    w -= kRate * (x.transpose() * (z - y) / static_cast<double>(n) + kRidge * w);
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < test_x.size(); ++i) {
    Eigen::VectorXd xi(f + 1);
    for (int j = 0; j < f; ++j) xi(j) = test_x[i][static_cast<std::size_t>(j)];
    xi(f) = 1.0;
    Eigen::Index best;
    (w.transpose() * xi).maxCoeff(&best);
    hits += static_cast<int>(best) == test_y[i];
  }
  return static_cast<double>(hits) / static_cast<double>(test_x.size());
}

// ---- style space report -----------------------------------------------------------

StyleSpaceReport style_space_report(const std::vector<Tensor>& codes, int n_pairs, Rng& rng, int bins) {
  if (codes.size() < 2) throw std::invalid_argument("style space report needs at least two domains");
  StyleSpaceReport r;
  r.style_dim = codes.front().dim(1);
  const int f = r.style_dim;
  const int k = static_cast<int>(codes.size());
  int total = 0;
  for (int d = 0; d < k; ++d) {
    const Tensor& c = codes[static_cast<std::size_t>(d)];
    if (c.rank() != 2 || c.dim(1) != f) throw std::invalid_argument("style codes must all be count×" + std::to_string(f));
    if (c.dim(0) < 2) throw std::invalid_argument("domain " + std::to_string(d) + " has fewer than two codes");
    const int m = c.dim(0);
    r.domain_sizes.push_back(m);
    total += m;
    std::vector<double> mean(static_cast<std::size_t>(f), 0.0);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < f; ++j) mean[static_cast<std::size_t>(j)] += c.at(i, j) / static_cast<double>(m);
    double trace = 0;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < f; ++j) {
        const double e = c.at(i, j) - mean[static_cast<std::size_t>(j)];
        trace += e * e / static_cast<double>(m - 1);
      }
    r.domain_means.push_back(std::move(mean));
    r.domain_traces.push_back(trace);
  }
  r.mean_domain_trace = mean_of(r.domain_traces);
  r.min_domain_trace = *std::min_element(r.domain_traces.begin(), r.domain_traces.end());

  Eigen::MatrixXd joint(total, f);
  int row = 0;
  for (int d = 0; d < k; ++d) {
    const Tensor& c = codes[static_cast<std::size_t>(d)];
    for (int i = 0; i < c.dim(0); ++i, ++row) {
      for (int j = 0; j < f; ++j) joint(row, j) = c.at(i, j);
      r.pca_domain.push_back(d);
    }
  }
  const Eigen::RowVectorXd mean = joint.colwise().mean();
  const Eigen::MatrixXd centered = joint.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(total - 1);
  for (int j = 0; j < f; ++j) {
    r.joint_mean.push_back(mean(j));
    r.joint_variance.push_back(cov(j, j));
  }
  r.mean_joint_variance = mean_of(r.joint_variance);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const double var_total = std::max(cov.trace(), 1e-300);
  for (int p = 0; p < 2; ++p) {
    const int col = f - 1 - p;
    if (col < 0) break;
    r.pca_explained[static_cast<std::size_t>(p)] = eig.eigenvalues()(col) / var_total;
  }
  const Eigen::MatrixXd projected =
      f >= 2 ? Eigen::MatrixXd(centered * eig.eigenvectors().rightCols(2).rowwise().reverse())
             : Eigen::MatrixXd(centered * eig.eigenvectors());
  for (int i = 0; i < total; ++i) r.pca_points.push_back({projected(i, 0), f >= 2 ? projected(i, 1) : 0.0});

  std::vector<double> within, cross;
  for (int p = 0; p < n_pairs; ++p) {
    const int d = rng.uniform_int(k);
    const Tensor& c = codes[static_cast<std::size_t>(d)];
    const int i = rng.uniform_int(c.dim(0));
    int j = rng.uniform_int(c.dim(0) - 1);
    if (j >= i) ++j;
    within.push_back(row_l1(c, i, c, j));

    const int d2 = (d + 1 + rng.uniform_int(k - 1)) % k;
    const Tensor& c2 = codes[static_cast<std::size_t>(d2)];
    cross.push_back(row_l1(c, rng.uniform_int(c.dim(0)), c2, rng.uniform_int(c2.dim(0))));
  }
  r.mean_within_l1 = mean_of(within);
  r.mean_cross_l1 = mean_of(cross);
  double upper = 0;
  for (double v : within) upper = std::max(upper, v);
  for (double v : cross) upper = std::max(upper, v);
  r.within_l1 = histogram(within, upper, bins);
  r.cross_l1 = histogram(cross, upper, bins);

  r.probe_accuracy = linear_probe_accuracy(codes);
  r.coverage = classify_coverage(r.mean_domain_trace, r.probe_accuracy, k);
  return r;
}

StyleSpaceReport style_space_report(const StyleEncoder& encoder, const Dataset& dataset, int n_pairs, Rng& rng) {
  return style_space_report(encode_dataset_styles(encoder, dataset, rng).codes, n_pairs, rng);
}

void write_style_space_report(const StyleSpaceReport& r, const std::vector<std::string>& names, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  nlohmann::ordered_json j;
  j["coverage"] = to_string(r.coverage);
  j["style_dim"] = r.style_dim;
  j["probe_accuracy"] = r.probe_accuracy;
  j["mean_joint_variance"] = r.mean_joint_variance;
  j["mean_domain_trace"] = r.mean_domain_trace;
  j["min_domain_trace"] = r.min_domain_trace;
  j["mean_within_domain_l1"] = r.mean_within_l1;
  j["mean_cross_domain_l1"] = r.mean_cross_l1;
  j["pca_explained"] = r.pca_explained;
  j["joint_mean"] = r.joint_mean;
  j["joint_variance"] = r.joint_variance;
  for (std::size_t d = 0; d < r.domain_traces.size(); ++d) {
    const std::string name = d < names.size() ? names[d] : std::to_string(d);
    j["domains"][name] = {{"count", r.domain_sizes[d]}, {"trace", r.domain_traces[d]}, {"mean", r.domain_means[d]}};
  }
  std::ofstream(out_dir / "style_space.json") << j.dump(2) << '\n';

  std::ofstream pca(out_dir / "style_pca.csv");
  pca << "domain,pc1,pc2\n";
  for (std::size_t i = 0; i < r.pca_points.size(); ++i) {
    const auto d = static_cast<std::size_t>(r.pca_domain[i]);
    pca << (d < names.size() ? names[d] : std::to_string(d)) << ',' << r.pca_points[i][0] << ',' << r.pca_points[i][1]
        << '\n';
  }

  std::ofstream hist(out_dir / "style_l1_histogram.csv");
  hist << "bin_low,bin_high,within_domain,cross_domain\n";
  const std::size_t bins = r.within_l1.density.size();
  for (std::size_t b = 0; b < bins; ++b) {
    const double w = r.within_l1.upper / static_cast<double>(bins);
    hist << w * static_cast<double>(b) << ',' << w * static_cast<double>(b + 1) << ',' << r.within_l1.density[b] << ','
         << r.cross_l1.density[b] << '\n';
  }
}

// ---- re-classification ---------------------------------------------------------------

namespace {

void finish(ClassifierReport& r, const std::vector<std::vector<double>>& counts) {
  const std::size_t k = counts.size();
  r.confusion.assign(k, std::vector<double>(k, 0.0));
  r.per_domain_accuracy.assign(k, 0.0);
  double hits = 0, total = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double row = std::accumulate(counts[i].begin(), counts[i].end(), 0.0);
    for (std::size_t j = 0; j < k; ++j) r.confusion[i][j] = row > 0 ? counts[i][j] / row : 0.0;
    r.per_domain_accuracy[i] = r.confusion[i][i];
    hits += counts[i][i];
    total += row;
  }
  r.mean_accuracy = total > 0 ? hits / total : 0.0;
  r.images = static_cast<int>(total);
}

}  // namespace

ClassifierReport reclassification_accuracy(const Generator& generator, const StyleEncoder& encoder,
                                           const std::vector<Tensor>& contents, const Dataset& styles,
                                           const DomainClassifier& classifier, Rng& rng) {
  const int k = styles.domains.size();
  if (classifier.num_domains() != k) {
    throw ConfigError("classifier predicts " + std::to_string(classifier.num_domains()) + " domains, dataset has " +
                      std::to_string(k));
  }
  if (generator.num_domains() != k) throw ConfigError("generator and dataset disagree on the domain count");
  if (contents.empty()) throw std::invalid_argument("re-classification needs at least one content image");
  NoGradGuard no_grad;
  ClassifierReport r;
  r.domains = styles.domains.names();
  std::vector<std::vector<double>> counts(static_cast<std::size_t>(k), std::vector<double>(static_cast<std::size_t>(k), 0));
  double exemplar_hits = 0, sampled_hits = 0;
  const int n = static_cast<int>(contents.size());
  std::vector<Tensor> content_views;
  for (const auto& c : contents) content_views.push_back(center_view(styles, c));
  const Var x = constant(stack_batch(content_views));
  const Var code = generator.encode_content(x);
  for (int d = 0; d < k; ++d) {
    const Tensor labels = styles.domains.onehot_batch(std::vector<int>(static_cast<std::size_t>(n), d));
    const auto& pool = styles.styles[static_cast<std::size_t>(d)];
    std::vector<Tensor> exemplars;
    for (int i = 0; i < n; ++i)
      exemplars.push_back(center_view(styles, pool[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(pool.size())))]));
    const Var z_exemplar = encoder.encode(constant(stack_batch(exemplars)), labels);
    const Var z_sampled = constant(sample_style(n, generator.style_dim(), rng));
    for (int mode = 0; mode < 2; ++mode) {
      const Var out = generator.decode(code, generator.map_style(mode == 0 ? z_exemplar : z_sampled, labels));
      for (int p : classifier.predict(out.value())) {
        counts[static_cast<std::size_t>(d)][static_cast<std::size_t>(p)] += 1;
        if (p == d) (mode == 0 ? exemplar_hits : sampled_hits) += 1;
      }
    }
  }
  finish(r, counts);
  r.exemplar_accuracy = exemplar_hits / (static_cast<double>(n) * k);
  r.sampled_accuracy = sampled_hits / (static_cast<double>(n) * k);
  return r;
}

ClassifierReport real_image_accuracy(const Dataset& styles, const DomainClassifier& classifier) {
  const int k = styles.domains.size();
  if (classifier.num_domains() != k) throw ConfigError("classifier and dataset disagree on the domain count");
  ClassifierReport r;
  r.domains = styles.domains.names();
  std::vector<std::vector<double>> counts(static_cast<std::size_t>(k), std::vector<double>(static_cast<std::size_t>(k), 0));
  for (int d = 0; d < k; ++d) {
    std::vector<Tensor> images;
    for (const auto& s : styles.styles[static_cast<std::size_t>(d)]) images.push_back(center_view(styles, s));
    for (int p : classifier.predict(stack_batch(images))) counts[static_cast<std::size_t>(d)][static_cast<std::size_t>(p)] += 1;
  }
  finish(r, counts);
  r.exemplar_accuracy = r.sampled_accuracy = r.mean_accuracy;
  return r;
}

void write_classifier_report(const ClassifierReport& r, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::ofstream csv(out_dir / "reclassification.csv");
  csv << "domain,accuracy";
  for (const auto& name : r.domains) csv << ",as_" << name;
  csv << '\n';
  for (std::size_t i = 0; i < r.domains.size(); ++i) {
    csv << r.domains[i] << ',' << r.per_domain_accuracy[i];
    for (double v : r.confusion[i]) csv << ',' << v;
    csv << '\n';
  }
  nlohmann::ordered_json j;
  j["mean_accuracy"] = r.mean_accuracy;
  j["exemplar_accuracy"] = r.exemplar_accuracy;
  j["sampled_accuracy"] = r.sampled_accuracy;
  j["images"] = r.images;
  for (std::size_t i = 0; i < r.domains.size(); ++i) j["per_domain"][r.domains[i]] = r.per_domain_accuracy[i];
  std::ofstream(out_dir / "reclassification.json") << j.dump(2) << '\n';
}

// ---- diversity ---------------------------------------------------------------------

namespace {

Tensor as_batch(const Tensor& image) { return image.rank() == 4 ? image : image.reshaped({1, image.dim(0), image.dim(1), image.dim(2)}); }

Tensor as_label_row(const Tensor& label) { return label.rank() == 2 ? label : label.reshaped({1, label.dim(0)}); }

Tensor repeat_rows(const Tensor& row, int n) { return stack_batch(std::vector<Tensor>(static_cast<std::size_t>(n), row)); }

}  // namespace

double diversity_score(const Generator& generator, const FeatureExtractor& extractor, const Tensor& content,
                       const Tensor& label, const Tensor& codes) {
  const int n = codes.dim(0);
  if (n < 2) throw std::invalid_argument("diversity score needs at least two codes");
  NoGradGuard no_grad;
  const Tensor x = repeat_rows(as_batch(content), n);
  const Tensor labels = repeat_rows(as_label_row(label), n);
  const Var out = generator.generate(constant(x), constant(codes), labels);
  const std::vector<Var> taps = extractor.features(out);
  double total = 0;
  int pairs = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j, ++pairs) {
      double pair = 0;
      for (const Var& tap : taps) {
        const Tensor& t = tap.value();
        const std::size_t per = t.size() / static_cast<std::size_t>(n);
        const real* a = t.data() + per * static_cast<std::size_t>(i);
        const real* b = t.data() + per * static_cast<std::size_t>(j);
        double s = 0;
        for (std::size_t e = 0; e < per; ++e) s += std::abs(static_cast<double>(a[e]) - b[e]);
        pair += s / static_cast<double>(per);
      }
      total += pair / static_cast<double>(taps.size());
    }
  return total / pairs;
}

double diversity_score(const Generator& generator, const FeatureExtractor& extractor, const Tensor& content,
                       const Tensor& label, int n_codes, Rng& rng) {
  if (n_codes < 2) throw std::invalid_argument("diversity score needs at least two codes");
  return diversity_score(generator, extractor, content, label, sample_style(n_codes, generator.style_dim(), rng));
}

// ---- interpolation -----------------------------------------------------------------

InterpolationResult interpolation_path(const Generator& generator, const Tensor& content, const Tensor& z_a,
                                       const Tensor& z_b, const Tensor& label_a, const Tensor& label_b, int steps) {
  if (steps < 2) throw std::invalid_argument("interpolation needs at least 2 steps");
  const Tensor za = as_label_row(z_a);
  const Tensor zb = as_label_row(z_b);
  const Tensor la = as_label_row(label_a);
  const Tensor lb = as_label_row(label_b);
  if (za.shape() != zb.shape()) {
    throw std::invalid_argument("interpolation codes differ in length: " + shape_string(za.shape()) + " vs " +
                                shape_string(zb.shape()));
  }
  if (la.shape() != lb.shape()) throw std::invalid_argument("interpolation labels differ in length");
  NoGradGuard no_grad;
  const Var x = constant(as_batch(content));
  InterpolationResult r;
  for (int i = 0; i < steps; ++i) {
    const real t = static_cast<real>(i) / static_cast<real>(steps - 1);
    Tensor z(za.shape());
    Tensor l(la.shape());
    for (std::size_t e = 0; e < z.size(); ++e) z[e] = (1 - t) * za[e] + t * zb[e];
    for (std::size_t e = 0; e < l.size(); ++e) l[e] = (1 - t) * la[e] + t * lb[e];
    r.frames.push_back(generator.generate(x, constant(z), l).value());
  }
  for (int i = 0; i + 1 < steps; ++i) {
    r.step_deltas.push_back(static_cast<double>(mean_abs_diff(r.frames[static_cast<std::size_t>(i)],
                                                              r.frames[static_cast<std::size_t>(i + 1)])));
  }
  r.max_delta = *std::max_element(r.step_deltas.begin(), r.step_deltas.end());
  r.mean_delta = mean_of(r.step_deltas);
  r.smoothness_ratio = r.mean_delta > 0 ? r.max_delta / r.mean_delta : 0.0;
  return r;
}

double content_fidelity_error(const Generator& generator, const Tensor& contents, const Tensor& codes,
                              const Tensor& labels) {
  NoGradGuard no_grad;
  const Var x = constant(contents);
  const Var code = generator.encode_content(x);
  const Var out = generator.decode(code, generator.map_style(constant(codes), labels));
  return static_cast<double>(mean_abs_diff(generator.encode_content(out).value(), code.value()));
}

}  // namespace styleforge
