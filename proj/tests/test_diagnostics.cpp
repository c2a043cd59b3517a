#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "styleforge/diagnostics.hpp"
#include "styleforge/error.hpp"
#include "styleforge/toy_data.hpp"
#include "support.hpp"

using namespace styleforge;
using styleforge::testing::tiny_config;
namespace fs = std::filesystem;

namespace {

Dataset small_dataset(int per_domain = 6) {
  ToyDataOptions opts;
  opts.images_per_domain = per_domain;
  opts.content_images = 4;
  opts.size = 16;
  return make_toy_dataset(opts);
}

std::vector<Tensor> gaussian_codes(int domains, int count, int dim, double spread, double separation,
                                   std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Tensor> out;
  for (int d = 0; d < domains; ++d) {
    Tensor t = rng.normal_tensor({count, dim}, spread);
    for (int i = 0; i < count; ++i) t.at(i, d % dim) += static_cast<real>(separation);
    out.push_back(t);
  }
  return out;
}

double histogram_total(const Histogram& h) {
  double s = 0;
  for (double v : h.density) s += v;
  return s;
}

}  // namespace

TEST_SUITE("style space report") {
  TEST_CASE("coverage predicates") {
    CHECK(classify_coverage(1e-3, 1.0, 3) == Coverage::inadequate);
    CHECK(classify_coverage(0.5, 0.40, 3) == Coverage::excessive);
    CHECK(classify_coverage(0.5, 0.95, 3) == Coverage::aligned);
    CHECK(classify_coverage(0.5, 0.60, 2) == Coverage::aligned);
    CHECK(classify_coverage(0.5, 0.59, 2) == Coverage::excessive);
    CHECK(to_string(Coverage::aligned) == "aligned");
  }

  TEST_CASE("standard-normal codes: moments, pair distances and histograms") {
    Rng rng(1);
    const std::vector<Tensor> codes = gaussian_codes(3, 2000, 20, 1.0, 0.0, 2);
    const StyleSpaceReport r = style_space_report(codes, 20000, rng);
    CHECK(r.style_dim == 20);
    CHECK(r.mean_joint_variance == doctest::Approx(1.0).epsilon(0.05));
    CHECK(std::abs(r.mean_cross_l1 - 20 * 2 / std::sqrt(M_PI)) < 0.5);
    CHECK(std::abs(r.mean_within_l1 - 20 * 2 / std::sqrt(M_PI)) < 0.5);
    CHECK(histogram_total(r.within_l1) == doctest::Approx(1.0));
    CHECK(histogram_total(r.cross_l1) == doctest::Approx(1.0));
    CHECK(r.probe_accuracy >= 0);
    CHECK(r.probe_accuracy < 1.0 / 3 + 0.1);
    CHECK(r.coverage == Coverage::excessive);
    CHECK(r.pca_points.size() == 6000);
    CHECK(r.pca_explained[0] >= r.pca_explained[1]);
  }

  TEST_CASE("separated domains are aligned, collapsed codes are inadequate") {
    Rng rng(3);
    const StyleSpaceReport separated = style_space_report(gaussian_codes(3, 200, 8, 0.6, 3.0, 4), 1000, rng);
    CHECK(separated.probe_accuracy >= 0.9);
    CHECK(separated.probe_accuracy <= 1.0);
    CHECK(separated.coverage == Coverage::aligned);

    std::vector<Tensor> constant_codes(3, Tensor({50, 8}, real(0.25)));
    const StyleSpaceReport collapsed = style_space_report(constant_codes, 200, rng);
    CHECK(collapsed.mean_domain_trace < kInadequateTrace);
    CHECK(collapsed.coverage == Coverage::inadequate);
    CHECK(std::isfinite(collapsed.probe_accuracy));
  }

  TEST_CASE("an untrained encoder with near-constant output is flagged") {
    RunConfig config = tiny_config(16);
    config.init_std = 0.02;
    Rng rng(5);
    StyleEncoder encoder(config, 3, rng);
    const StyleSpaceReport r = style_space_report(encoder, small_dataset(), 100, rng);
    CHECK(r.coverage == Coverage::inadequate);
  }

  TEST_CASE("too few codes is an error") {
    Rng rng(6);
    CHECK_THROWS_AS(style_space_report({Tensor({1, 4}), Tensor({3, 4})}, 10, rng), std::invalid_argument);
  }

  TEST_CASE("report files") {
    Rng rng(7);
    const StyleSpaceReport r = style_space_report(gaussian_codes(2, 30, 4, 1.0, 2.0, 8), 100, rng);
    const fs::path dir = fs::current_path() / "scratch" / "style_report";
    fs::remove_all(dir);
    write_style_space_report(r, {"a", "b"}, dir);
    std::ifstream json_file(dir / "style_space.json");
    const auto j = nlohmann::json::parse(json_file);
    CHECK(j.contains("probe_accuracy"));
    CHECK(fs::exists(dir / "style_pca.csv"));
    CHECK(fs::exists(dir / "style_l1_histogram.csv"));
  }
}

TEST_SUITE("re-classification") {
  TEST_CASE("confusion rows sum to one and accuracies are proportions") {
    const Dataset ds = small_dataset();
    const RunConfig config = tiny_config(16);
    Rng rng(10);
    Generator g(config, 3, rng);
    StyleEncoder e(config, 3, rng);
    DomainClassifier classifier(3, rng);
    const ClassifierReport r = reclassification_accuracy(g, e, ds.contents, ds, classifier, rng);
    CHECK(r.images == 2 * 3 * static_cast<int>(ds.contents.size()));
    for (const auto& row : r.confusion) {
      double s = 0;
      for (double v : row) s += v;
      CHECK(s == doctest::Approx(1.0));
    }
    for (double a : {r.mean_accuracy, r.exemplar_accuracy, r.sampled_accuracy}) {
      CHECK(a >= 0);
      CHECK(a <= 1);
    }
    DomainClassifier wrong(2, rng);
    CHECK_THROWS_AS(reclassification_accuracy(g, e, ds.contents, ds, wrong, rng), ConfigError);
  }

  TEST_CASE("an input-blind classifier scores chance") {
    const Dataset ds = small_dataset();
    Rng rng(11);
    DomainClassifier classifier(3, rng);
    ParamList params;
    classifier.collect(params, "c");
    for (const auto& [name, param] : params.entries()) {
      Var p = param;
      if (name == "c.head.weight") p.mutable_value().fill(0);
      if (name == "c.head.bias") p.mutable_value()[1] = 1;
    }
    const ClassifierReport r = real_image_accuracy(ds, classifier);
    CHECK(r.mean_accuracy == doctest::Approx(1.0 / 3));
  }

  TEST_CASE("real-image accuracy on held-out images equals the held-out score") {
    const Dataset ds = small_dataset(10);
    ClassifierSettings settings;
    settings.steps = 40;
    settings.batch_size = 8;
    settings.holdout_fraction = 0.3;
    const TrainedClassifier trained = train_domain_classifier(ds, settings);
    Dataset held = ds;
    for (auto& images : held.styles) images.erase(images.begin(), images.end() - 3);
    CHECK(real_image_accuracy(held, trained.classifier).mean_accuracy ==
          doctest::Approx(trained.holdout_accuracy));
    settings.holdout_fraction = 0;
    const TrainedClassifier all = train_domain_classifier(ds, settings);
    CHECK(std::isnan(all.holdout_accuracy));
    CHECK(real_image_accuracy(ds, all.classifier).mean_accuracy == doctest::Approx(all.train_accuracy));
  }
}

TEST_SUITE("diversity and interpolation") {
  struct Fixture {
    RunConfig config = tiny_config(16);
    Rng rng{20};
    Generator g{config, 3, rng};
    TinyFeatureNet net{rng};
    Tensor content = Rng(21).normal_tensor({3, 16, 16}, 0.5);
    Tensor label = DomainRegistry({"a", "b", "c"}).onehot(1);
  };

  TEST_CASE("repeated codes score exactly zero") {
    Fixture f;
    Rng zr(22);
    const Tensor one = sample_style(1, 4, zr);
    const Tensor repeated = stack_batch(std::vector<Tensor>(8, one));
    CHECK(diversity_score(f.g, f.net, f.content, f.label, repeated) == 0.0);
    CHECK(diversity_score(f.g, f.net, f.content, f.label, 8, zr) > 0.0);
    CHECK_THROWS_AS(diversity_score(f.g, f.net, f.content, f.label, 1, zr), std::invalid_argument);
  }

  TEST_CASE("score does not depend on the order of the codes") {
    Fixture f;
    Rng zr(23);
    const Tensor codes = sample_style(5, 4, zr);
    std::vector<Tensor> rows;
    for (int i = 4; i >= 0; --i) rows.push_back(codes.slice_batch(i, 1));
    CHECK(diversity_score(f.g, f.net, f.content, f.label, codes) ==
          doctest::Approx(diversity_score(f.g, f.net, f.content, f.label, stack_batch(rows))).epsilon(1e-5));
  }

  TEST_CASE("interpolation endpoints are exact generate outputs") {
    Fixture f;
    Rng zr(24);
    const Tensor za = sample_style(1, 4, zr);
    const Tensor zb = sample_style(1, 4, zr);
    const Tensor la = DomainRegistry({"a", "b", "c"}).onehot(0);
    const Tensor lb = DomainRegistry({"a", "b", "c"}).onehot(2);
    const InterpolationResult path = interpolation_path(f.g, f.content, za, zb, la, lb, 11);
    REQUIRE(path.frames.size() == 11);
    CHECK(path.step_deltas.size() == 10);
    const Var x = constant(f.content.reshaped({1, 3, 16, 16}));
    const Tensor first = f.g.generate(x, constant(za), la.reshaped({1, 3})).value();
    const Tensor last = f.g.generate(x, constant(zb), lb.reshaped({1, 3})).value();
    CHECK(max_abs_diff(path.frames.front(), first) == 0);
    CHECK(max_abs_diff(path.frames.back(), last) == 0);
    CHECK(path.max_delta >= path.mean_delta);

    const InterpolationResult two = interpolation_path(f.g, f.content, za, zb, la, la, 2);
    CHECK(two.frames.size() == 2);
    CHECK_THROWS_AS(interpolation_path(f.g, f.content, za, zb, la, la, 1), std::invalid_argument);
    CHECK_THROWS_AS(interpolation_path(f.g, f.content, za, sample_style(1, 5, zr), la, la, 3), std::invalid_argument);
  }

  TEST_CASE("content fidelity error is zero only for identical encodings") {
    Fixture f;
    Rng zr(25);
    const Tensor contents = zr.normal_tensor({2, 3, 16, 16}, 0.5);
    const double err = content_fidelity_error(f.g, contents, sample_style(2, 4, zr), DomainRegistry({"a", "b", "c"}).onehot_batch({0, 1}));
    CHECK(err > 0);
    CHECK(std::isfinite(err));
  }
}
