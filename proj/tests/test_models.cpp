#include <doctest.h>

#include <filesystem>

#include "styleforge/checkpoint.hpp"
#include "styleforge/discriminator.hpp"
#include "styleforge/generator.hpp"
#include "styleforge/perceptual.hpp"
#include "styleforge/error.hpp"
#include "styleforge/style_alignment.hpp"
#include "styleforge/toy_data.hpp"
#include "support.hpp"

using namespace styleforge;
using styleforge::testing::norm_of;
using styleforge::testing::tiny_config;

namespace {

Tensor labels_for(int n, int d) {
  Tensor t({n, d});
  for (int i = 0; i < n; ++i) t.at(i, i % d) = 1;
  return t;
}

Var images(int n, int side, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t({n, 3, side, side});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<real>(rng.uniform(-1, 1));
  return constant(t);
}

double grad_norm(const ParamList& params, const std::string& needle) {
  double total = 0;
  for (const auto& [name, p] : params.entries()) {
    if (name.find(needle) != std::string::npos && !p.grad().empty()) total += norm_of(p.grad());
  }
  return total;
}

}  // namespace

TEST_SUITE("style encoder") {
  TEST_CASE("code length is style_dim at every accepted resolution") {
    RunConfig config = tiny_config(16);
    config.style_dim = 20;
    Rng rng(1);
    StyleEncoder encoder(config, 3, rng);
    for (int side : {8, 16, 32, 48}) {
      CAPTURE(side);
      CHECK(encoder.encode(images(2, side, 2), labels_for(2, 3)).shape() == Shape{2, 20});
    }
  }

  TEST_CASE("deterministic and label dependent") {
    const RunConfig config = tiny_config(16);
    Rng rng(3);
    StyleEncoder encoder(config, 3, rng);
    Var x = images(1, 16, 4);
    Tensor d0({1, 3}), d1({1, 3});
    d0[0] = 1;
    d1[1] = 1;
    const Tensor a = encoder.encode(x, d0).value();
    CHECK(max_abs_diff(a, encoder.encode(x, d0).value()) == 0);
    CHECK(max_abs_diff(a, encoder.encode(x, d1).value()) > 0);
    for (real v : a.values()) CHECK(std::isfinite(v));
  }

  TEST_CASE("the KL head exists only in ablation mode") {
    RunConfig config = tiny_config(16);
    Rng rng(5);
    StyleEncoder plain(config, 3, rng);
    CHECK_FALSE(plain.distribution_head());
    CHECK_THROWS_AS(plain.encode_distribution(images(1, 16, 6), labels_for(1, 3)), std::logic_error);
    GaussianCode fake{constant(Tensor({1, 4})), constant(Tensor({1, 4}))};
    CHECK_THROWS_AS(kl_ablation_loss(plain, fake), std::logic_error);
    config.kl_ablation = true;
    StyleEncoder kl(config, 3, rng);
    const GaussianCode code = kl.encode_distribution(images(2, 16, 7), labels_for(2, 3));
    CHECK(code.mean.shape() == Shape{2, 4});
    CHECK(code.logvar.shape() == Shape{2, 4});
    CHECK(kl_ablation_loss(kl, code).item() >= 0);
  }

  TEST_CASE("critic accepts style_dim-wide codes only") {
    Rng rng(8);
    StyleDiscriminator critic(20, rng, 0.02);
    CHECK(critic.logits(constant(Tensor({3, 20}))).shape() == Shape{3, 1});
    CHECK_THROWS_AS(critic.logits(constant(Tensor({3, 19}))), std::invalid_argument);
  }
}

TEST_SUITE("stand-alone alignment") {
  Dataset small_toy() {
    ToyDataOptions o;
    o.size = 16;
    o.images_per_domain = 4;
    o.content_images = 1;
    return make_toy_dataset(o);
  }

  TEST_CASE("one critic loss per encoder step, reproducible") {
    const Dataset ds = small_toy();
    AlignmentSettings s;
    s.steps = 3;
    s.batch_size = 4;
    s.critic_steps = 4;
    s.seed = 9;
    const AlignmentRun a = train_style_alignment(tiny_config(16), ds, s);
    const AlignmentRun b = train_style_alignment(tiny_config(16), ds, s);
    CHECK(a.discriminator_loss.size() == 3);
    CHECK(a.discriminator_loss == b.discriminator_loss);
    const Var x = images(2, 16, 10);
    CHECK(max_abs_diff(a.encoder.encode(x, labels_for(2, 3)).value(), b.encoder.encode(x, labels_for(2, 3)).value()) == 0);
  }

  TEST_CASE("encoder and critic learning rates are separate") {
    const Dataset ds = small_toy();
    const RunConfig config = tiny_config(16);
    AlignmentSettings s;
    s.steps = 3;
    s.batch_size = 4;
    s.learning_rate = 1e-30;
    s.critic_learning_rate = 1e-2;
    s.seed = 11;
    Rng init = Rng::for_stream(s.seed, 0, 101);
    const StyleEncoder fresh(config, 3, init);
    const AlignmentRun run = train_style_alignment(config, ds, s);
    const Var x = images(2, 16, 12);
    CHECK(max_abs_diff(fresh.encode(x, labels_for(2, 3)).value(), run.encoder.encode(x, labels_for(2, 3)).value()) < 1e-6);
    CHECK(run.discriminator_loss.back() != doctest::Approx(run.discriminator_loss.front()));
  }

  TEST_CASE("KL mode trains the distribution head without a critic") {
    AlignmentSettings s;
    s.mode = AlignmentMode::kl;
    s.steps = 2;
    s.batch_size = 4;
    const AlignmentRun run = train_style_alignment(tiny_config(16), small_toy(), s);
    CHECK(run.encoder.distribution_head());
    CHECK(run.discriminator_loss.empty());
  }

  TEST_CASE("at least one critic step") {
    AlignmentSettings s;
    s.steps = 1;
    s.critic_steps = 0;
    CHECK_THROWS_AS(train_style_alignment(tiny_config(16), small_toy(), s), ConfigError);
  }
}

TEST_SUITE("style sampling") {
  TEST_CASE("standard-normal moments over 10k samples") {
    Rng rng(2024);
    const Tensor z = sample_style(10000, 20, rng);
    REQUIRE(z.shape() == Shape{10000, 20});
    for (int j = 0; j < 20; ++j) {
      double m = 0, v = 0;
      for (int i = 0; i < 10000; ++i) m += z.at(i, j);
      m /= 10000;
      for (int i = 0; i < 10000; ++i) v += (z.at(i, j) - m) * (z.at(i, j) - m);
      v /= 9999;
      CAPTURE(j);
      CHECK(std::abs(m) <= 0.05);
      CHECK(v >= 0.95);
      CHECK(v <= 1.05);
    }
  }

  TEST_CASE("mean pairwise L1 distance in 20 dimensions") {
    Rng rng(77);
    const Tensor z = sample_style(4000, 20, rng);
    double total = 0;
    for (int i = 0; i < 2000; ++i) {
      for (int j = 0; j < 20; ++j) total += std::abs(z.at(2 * i, j) - z.at(2 * i + 1, j));
    }
    const double oracle = 20 * 2 / std::sqrt(M_PI);
    CHECK(oracle == doctest::Approx(22.57).epsilon(1e-3));
    CHECK(std::abs(total / 2000 - oracle) < 0.5);
  }

  TEST_CASE("fixed seed reproduces the codes") {
    Rng a(9), b(9);
    CHECK(max_abs_diff(sample_style(3, 20, a), sample_style(3, 20, b)) == 0);
  }
}

TEST_SUITE("generator") {
  TEST_CASE("content code shape and output range") {
    const RunConfig config = tiny_config(16);
    Rng rng(10);
    Generator g(config, 3, rng);
    Var x = images(2, 16, 11);
    const Var code = g.encode_content(x);
    CHECK(code.dim(2) == 4);
    CHECK(code.dim(3) == 4);
    Rng zr(12);
    const Var out = g.generate(x, constant(sample_style(2, 4, zr)), labels_for(2, 3));
    CHECK(out.shape() == x.shape());
    for (real v : out.value().values()) {
      CHECK(v >= -1);
      CHECK(v <= 1);
    }
    CHECK_THROWS_AS(g.encode_content(images(1, 18, 1)), std::invalid_argument);
  }

  TEST_CASE("desk-size content encoder contracts 64 to 16") {
    RunConfig config = tiny_config(64);
    Rng rng(13);
    ContentEncoder enc(config, rng);
    const Var code = enc.encode(images(1, 64, 14));
    CHECK(code.dim(2) == 16);
    CHECK(code.dim(3) == 16);
  }

  TEST_CASE("normalization placement") {
    RunConfig config = tiny_config(16);
    config.residual_blocks = 6;
    Rng rng(15);
    Generator g(config, 3, rng);
    int in_res = 0, adain_res = 0, ups = 0;
    for (const auto& layer : g.layers()) {
      CAPTURE(layer.name);
      switch (layer.role) {
        case LayerRole::stem:
        case LayerRole::downsample:
          CHECK(layer.norm == NormKind::instance);
          break;
        case LayerRole::residual:
          if (layer.norm == NormKind::instance) {
            CHECK(adain_res == 0);  // every IN block precedes every AdaIN block
            ++in_res;
          } else {
            CHECK(layer.norm == NormKind::adaptive_instance);
            ++adain_res;
          }
          break;
        case LayerRole::upsample:
          CHECK(layer.norm == NormKind::layer);
          ++ups;
          break;
        case LayerRole::output:
          CHECK(layer.norm == NormKind::none);
          break;
      }
    }
    CHECK(in_res == 3);
    CHECK(adain_res == 3);
    CHECK(ups == config.downsample_layers);

    config.residual_blocks = 5;
    Generator odd(config, 3, rng);
    int odd_in = 0;
    for (const auto& layer : odd.layers()) odd_in += layer.role == LayerRole::residual && layer.norm == NormKind::instance;
    CHECK(odd_in == 3);
  }

  TEST_CASE("mapping network widths and AdaIN parameter counts") {
    RunConfig config = tiny_config(16);
    config.style_dim = 20;
    config.residual_blocks = 6;
    Rng rng(16);
    MappingNetwork mapping(20, 5, 32, {16, 16, 16}, rng, 0.02);
    CHECK(mapping.input_width() == 25);
    Rng zr(17);
    const AdaINParamSet params = mapping.map(constant(sample_style(2, 20, zr)), labels_for(2, 5));
    REQUIRE(params.size() == 3);
    for (const auto& p : params) {
      CHECK(p.scale.shape() == Shape{2, 16});
      CHECK(p.bias.shape() == Shape{2, 16});
    }
    CHECK_THROWS_AS(mapping.map(constant(Tensor({2, 19})), labels_for(2, 5)), std::invalid_argument);
    CHECK_THROWS_AS(mapping.map(constant(Tensor({2, 20})), labels_for(2, 4)), std::invalid_argument);
  }

  TEST_CASE("deterministic, compositional, and label sensitive") {
    const RunConfig config = tiny_config(16);
    Rng rng(18);
    Generator g(config, 3, rng);
    Var x = images(2, 16, 19);
    Rng zr(20);
    Var z = constant(sample_style(2, 4, zr));
    const Tensor d = labels_for(2, 3);
    const Tensor out = g.generate(x, z, d).value();
    CHECK(max_abs_diff(out, g.generate(x, z, d).value()) == 0);
    CHECK(max_abs_diff(out, g.decode(g.encode_content(x), g.map_style(z, d)).value()) == 0);
    const AdaINParamSet a = g.map_style(z, d);
    Tensor other({2, 3});
    other.at(0, 2) = 1;
    other.at(1, 2) = 1;
    const AdaINParamSet b = g.map_style(z, other);
    CHECK(max_abs_diff(a[0].scale.value(), b[0].scale.value()) > 0);

    // Shifting the content changes its code.
    Tensor shifted(x.shape());
    for (int n = 0; n < 2; ++n)
      for (int c = 0; c < 3; ++c)
        for (int h = 0; h < 16; ++h)
          for (int w = 0; w < 16; ++w) shifted.at(n, c, h, w) = x.value().at(n, c, h, (w + 8) % 16);
    CHECK(max_abs_diff(g.encode_content(x).value(), g.encode_content(constant(shifted)).value()) > 0);
    CHECK_THROWS_AS(g.decode(g.encode_content(x), AdaINParamSet{}), std::invalid_argument);
  }

  TEST_CASE("gradients reach the code, the label pathway and the content image") {
    const RunConfig config = tiny_config(16);
    Rng rng(21);
    Generator g(config, 3, rng);
    Var x(images(2, 16, 22).value(), true);
    Rng zr(23);
    Var z(sample_style(2, 4, zr), true);
    backward(mean(g.generate(x, z, labels_for(2, 3))));
    CHECK(norm_of(x.grad()) > 0);
    CHECK(norm_of(z.grad()) > 0);
    ParamList params;
    g.collect(params, "g");
    Tensor fc1;
    for (const auto& [name, p] : params.entries())
      if (name == "g.mapping.fc1.weight") fc1 = p.grad();
    REQUIRE_FALSE(fc1.empty());
    double label_columns = 0;
    for (int r = 0; r < fc1.dim(0); ++r)
      for (int c = 4; c < 7; ++c) label_columns += std::abs(fc1.at(r, c));
    CHECK(label_columns > 0);
    CHECK(grad_norm(params, "content_encoder") > 0);
    CHECK(grad_norm(params, "decoder") > 0);
  }
}

TEST_SUITE("image discriminator") {
  TEST_CASE("one patch map per scale on progressively pooled inputs") {
    RunConfig config = tiny_config(32);
    config.disc_scales = 3;
    Rng rng(24);
    PatchDiscriminator d(config, 3, rng);
    CHECK(d.scales() == 3);
    const DiscriminatorOutput out = d.forward(images(2, 32, 25));
    REQUIRE(out.patch_logits.size() == 3);
    CHECK(out.patch_logits[0].shape() == Shape{2, 1, 8, 8});
    CHECK(out.patch_logits[1].shape() == Shape{2, 1, 4, 4});
    CHECK(out.patch_logits[2].shape() == Shape{2, 1, 2, 2});
    CHECK(out.class_logits.shape() == Shape{2, 3});
  }

  TEST_CASE("the classifier shares the finest trunk") {
    const RunConfig config = tiny_config(16);
    Rng rng(26);
    PatchDiscriminator d(config, 3, rng);
    backward(cls_loss(d.forward(images(2, 16, 27)), labels_for(2, 3)));
    ParamList params;
    d.collect(params, "d");
    CHECK(grad_norm(params, "scale0.conv") > 0);
    CHECK(grad_norm(params, "scale1.") == 0);
    CHECK(grad_norm(params, ".adv.") == 0);
  }
}

TEST_SUITE("perceptual features") {
  std::map<std::string, Tensor> random_vgg(std::uint64_t seed) {
    Rng rng(seed);
    std::map<std::string, Tensor> arrays;
    for (const auto& [name, shape] : Vgg16Features::expected_entries()) arrays[name] = rng.normal_tensor(shape, 0.05);
    return arrays;
  }

  void check_properties(const FeatureExtractor& net) {
    Var a = images(2, 16, 30);
    Var b = images(2, 16, 31);
    const auto taps = net.features(a);
    CHECK(taps.size() == 4);
    CHECK(max_abs_diff(taps[3].value(), net.features(a)[3].value()) == 0);
    CHECK(style_preserving_loss(net, a, a).item() == 0);
    const real ab = style_preserving_loss(net, a, b).item();
    CHECK(ab > 0);
    CHECK(ab == doctest::Approx(style_preserving_loss(net, b, a).item()).epsilon(1e-6));
    ParamList params;
    net.collect(params, "p");
    for (const auto& [name, p] : params.entries()) CHECK_FALSE(p.requires_grad());
  }

  TEST_CASE("tiny backend properties") {
    RunConfig config = tiny_config(16);
    config.perceptual_pretrain_steps = 0;
    auto net = build_feature_extractor(config, nullptr);
    CHECK(net->backend_name() == "tiny");
    check_properties(*net);
  }

  TEST_CASE("vgg16 backend loads from an archive and keeps the properties") {
    const auto dir = std::filesystem::current_path() / "scratch" / "vgg";
    std::filesystem::create_directories(dir);
    Archive archive;
    archive.arrays = random_vgg(32);
    write_archive(dir / "vgg16.sfck", archive);
    RunConfig config = tiny_config(16);
    config.perceptual_backend = PerceptualBackend::vgg16;
    config.perceptual_weights = (dir / "vgg16.sfck").string();
    auto net = build_feature_extractor(config, nullptr);
    CHECK(net->backend_name() == "vgg16");
    check_properties(*net);
    const auto taps = net->features(images(1, 16, 33));
    CHECK(taps[0].dim(1) == 64);
    CHECK(taps[3].dim(1) == 512);
    CHECK(taps[3].dim(2) == 2);

    auto missing = random_vgg(34);
    missing.erase(missing.begin());
    CHECK_THROWS(Vgg16Features{missing});
  }

  TEST_CASE("pre-training the tiny backend needs a dataset") {
    RunConfig config = tiny_config(16);
    config.perceptual_pretrain_steps = 5;
    CHECK_THROWS_AS(build_feature_extractor(config, nullptr), std::invalid_argument);
  }
}
