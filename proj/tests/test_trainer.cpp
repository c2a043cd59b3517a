#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "styleforge/error.hpp"
#include "styleforge/toy_data.hpp"
#include "styleforge/trainer.hpp"
#include "support.hpp"

using namespace styleforge;
using styleforge::testing::tiny_config;
namespace fs = std::filesystem;

namespace {

Dataset small_dataset() {
  ToyDataOptions opts;
  opts.images_per_domain = 6;
  opts.content_images = 6;
  opts.size = 16;
  return make_toy_dataset(opts);
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::current_path() / "scratch" / name;
  fs::remove_all(dir);
  return dir;
}

std::vector<LossReport> collect_reports(const RunConfig& config, const Dataset& ds, const fs::path& out = {}) {
  std::vector<LossReport> reports;
  TrainOptions options;
  options.out_dir = out;
  options.on_report = [&](const LossReport& r) { reports.push_back(r); };
  train(config, ds, options);
  return reports;
}

std::map<std::string, Tensor> snapshot(const ParamList& params) {
  std::map<std::string, Tensor> out;
  for (const auto& [name, p] : params.entries()) out[name] = p.value();
  return out;
}

std::set<std::string> changed(const ParamList& params, const std::map<std::string, Tensor>& before) {
  std::set<std::string> out;
  for (const auto& [name, p] : params.entries())
    if (max_abs_diff(p.value(), before.at(name)) > 0) out.insert(name);
  return out;
}

ParamList all_trainable(const Models& m) {
  ParamList all;
  all.append(m.generator_group());
  all.append(m.image_discriminator_group());
  all.append(m.style_discriminator_group());
  return all;
}

std::vector<double> fields(const LossReport& r) {
  return {r.image_adv_d, r.cls_real, r.style_adv_d, r.image_adv_g, r.style_adv_e, r.identity,
          r.content,     r.style_preserving, r.cls_fake, r.kl, r.total};
}

Tensor probe_output(const TrainState& s) {
  Rng rng(5);
  const Tensor x = rng.normal_tensor({2, 3, 16, 16}, 0.5);
  const Tensor z = sample_style(2, s.config.style_dim, rng);
  return s.models.generator.generate(constant(x), constant(z), s.domains.onehot_batch({0, 2})).value();
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("parameter groups are disjoint and exclude the perceptual backend") {
    const TrainState s = init_state(tiny_config(16), small_dataset());
    const ParamList g = s.models.generator_group();
    const ParamList dc = s.models.image_discriminator_group();
    const ParamList ds = s.models.style_discriminator_group();
    std::set<Node*> seen;
    std::size_t total = 0;
    for (const ParamList* list : {&g, &dc, &ds}) {
      for (const auto& [name, p] : list->entries()) {
        seen.insert(p.node());
        ++total;
      }
    }
    CHECK(seen.size() == total);
    ParamList perceptual;
    s.models.perceptual->collect(perceptual, "perceptual");
    for (const auto& [name, p] : perceptual.entries()) {
      CHECK(seen.count(p.node()) == 0);
      CHECK_FALSE(p.requires_grad());
    }
    bool has_encoder = false, has_mapping = false;
    for (const auto& [name, p] : g.entries()) {
      has_encoder = has_encoder || name.rfind("style_encoder.", 0) == 0;
      has_mapping = has_mapping || name.find("mapping") != std::string::npos;
    }
    CHECK(has_encoder);
    CHECK(has_mapping);
    bool cls_head = false;
    for (const auto& [name, p] : dc.entries()) cls_head = cls_head || name.find(".cls.") != std::string::npos;
    CHECK(cls_head);
  }

  TEST_CASE("identical seeds give identical loss curves") {
    const Dataset ds = small_dataset();
    const auto a = collect_reports(tiny_config(16), ds);
    const auto b = collect_reports(tiny_config(16), ds);
    REQUIRE(a.size() == 10);
    REQUIRE(b.size() == 10);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(fields(a[i]) == fields(b[i]));
    RunConfig other = tiny_config(16);
    other.seed = 1;
    CHECK(fields(collect_reports(other, ds).back()) != fields(a.back()));
  }

  TEST_CASE("report totals equal the weighted component sums") {
    const auto reports = collect_reports(tiny_config(16), small_dataset());
    for (const auto& r : reports) {
      CHECK(r.total == doctest::Approx(weighted_total(r, LossWeights{})));
      for (double v : fields(r)) CHECK(v >= 0);
    }
  }

  TEST_CASE("style-adversarial-only training touches only the encoder and its critic") {
    RunConfig config = tiny_config(16);
    config.weights.image_adversarial = 0;
    config.weights.identity_content = 0;
    config.weights.style_preserving = 0;
    config.weights.classification = 0;
    const Dataset ds = small_dataset();
    TrainState s = init_state(config, ds);
    const ParamList all = all_trainable(s.models);
    const auto before = snapshot(all);
    for (int i = 0; i < 3; ++i) advance(s, ds);
    const auto moved = changed(all, before);
    CHECK_FALSE(moved.empty());
    for (const auto& name : moved) {
      CAPTURE(name);
      CHECK((name.rfind("style_encoder.", 0) == 0 || name.rfind("style_discriminator.", 0) == 0));
    }
    bool encoder_moved = false, critic_moved = false;
    for (const auto& name : moved) {
      encoder_moved = encoder_moved || name.rfind("style_encoder.", 0) == 0;
      critic_moved = critic_moved || name.rfind("style_discriminator.", 0) == 0;
    }
    CHECK(encoder_moved);
    CHECK(critic_moved);
  }

  TEST_CASE("a zero style-preserving weight removes its gradient path") {
    RunConfig config = tiny_config(16);
    config.weights = LossWeights{};
    config.weights.image_adversarial = 0;
    config.weights.style_adversarial = 0;
    config.weights.identity_content = 0;
    config.weights.classification = 0;
    const Dataset ds = small_dataset();
    TrainState s = init_state(config, ds);
    const ParamList all = all_trainable(s.models);
    const auto before = snapshot(all);
    const LossReport r = advance(s, ds);
    CHECK(r.style_preserving > 0);
    for (const auto& name : changed(all, before)) {
      CAPTURE(name);
      CHECK(name.find("discriminator") == std::string::npos);
    }
    config.weights.style_preserving = 0;
    config.weights.identity_content = 100;
    TrainState t = init_state(config, ds);
    CHECK(advance(t, ds).style_preserving == 0);
  }

  TEST_CASE("every call steps each optimizer once") {
    const Dataset ds = small_dataset();
    TrainState s = init_state(tiny_config(16), ds);
    for (int i = 1; i <= 3; ++i) {
      advance(s, ds);
      CHECK(s.step == i);
      CHECK(s.generator_opt.steps() == i);
      CHECK(s.image_discriminator_opt.steps() == i);
      CHECK(s.style_discriminator_opt.steps() == i);
    }
    std::map<std::string, Tensor> moments;
    s.generator_opt.export_state(moments, "adam.generator");
    for (const auto& [name, p] : s.generator_opt.params().entries()) {
      CHECK(moments.at("adam.generator." + name + ".m").shape() == p.shape());
      CHECK(moments.at("adam.generator." + name + ".v").shape() == p.shape());
    }
  }

  TEST_CASE("non-finite losses halt before any parameter changes") {
    const Dataset ds = small_dataset();
    TrainState s = init_state(tiny_config(16), ds);
    const ParamList all = all_trainable(s.models);
    Var head = all.entries().front().second;
    head.mutable_value()[0] = std::nanf("");
    const auto before = snapshot(all);
    CHECK_THROWS_AS(advance(s, ds), NumericalError);
    for (const auto& [name, p] : all.entries()) {
      const Tensor& old = before.at(name);
      bool same = true;
      for (std::size_t i = 0; i < old.size(); ++i)
        same = same && (old[i] == p.value()[i] || (std::isnan(old[i]) && std::isnan(p.value()[i])));
      CAPTURE(name);
      CHECK(same);
    }
    CHECK(s.step == 0);
  }

  TEST_CASE("dataset resolution must match the config") {
    CHECK_THROWS_AS(init_state(tiny_config(32), small_dataset()), ConfigError);
  }
}

TEST_SUITE("checkpoints") {
  TEST_CASE("zero iterations writes the untouched initial state") {
    RunConfig config = tiny_config(16);
    config.iterations = 0;
    const Dataset ds = small_dataset();
    const fs::path dir = fresh_dir("zero");
    TrainOptions options;
    options.out_dir = dir;
    const TrainState trained = train(config, ds, options);
    const TrainState fresh = init_state(config, ds);
    CHECK(trained.step == 0);
    REQUIRE(fs::exists(checkpoint_path(dir, 0)));
    CHECK(latest_checkpoint(dir) == checkpoint_path(dir, 0));
    const TrainState loaded = load_checkpoint(checkpoint_path(dir, 0));
    const auto a = snapshot(all_trainable(fresh.models));
    const ParamList restored = all_trainable(loaded.models);
    for (const auto& [name, p] : restored.entries()) CHECK(max_abs_diff(p.value(), a.at(name)) == 0);
    CHECK(fs::exists(dir / "config.txt"));
    CHECK(fs::exists(dir / "losses.csv"));
  }

  TEST_CASE("save and load reproduce forward outputs") {
    const Dataset ds = small_dataset();
    TrainState s = init_state(tiny_config(16), ds);
    for (int i = 0; i < 3; ++i) advance(s, ds);
    const fs::path dir = fresh_dir("roundtrip");
    save_checkpoint(s, dir / "state.sfck");
    CHECK(fs::exists(manifest_path(dir / "state.sfck")));
    const TrainState back = load_checkpoint(dir / "state.sfck");
    CHECK(back.step == 3);
    CHECK(back.domains.names() == s.domains.names());
    CHECK(back.config.to_text() == s.config.to_text());
    CHECK(max_abs_diff(probe_output(s), probe_output(back)) <= 1e-6);
    Rng rng(1);
    const Tensor images = rng.normal_tensor({2, 3, 16, 16}, 0.5);
    const auto da = s.models.image_discriminator.forward(constant(images));
    const auto db = back.models.image_discriminator.forward(constant(images));
    CHECK(max_abs_diff(da.class_logits.value(), db.class_logits.value()) <= 1e-6);
    const auto fa = s.models.perceptual->features(constant(images));
    const auto fb = back.models.perceptual->features(constant(images));
    CHECK(max_abs_diff(fa[3].value(), fb[3].value()) <= 1e-6);
  }

  TEST_CASE("resuming continues the original trajectory") {
    const Dataset ds = small_dataset();
    const RunConfig config = tiny_config(16);
    const fs::path dir = fresh_dir("resume");
    const auto straight = collect_reports(config, ds, dir);
    REQUIRE(straight.size() == 10);
    TrainState resumed = load_checkpoint(checkpoint_path(dir, 5));
    REQUIRE(resumed.step == 5);
    for (int i = 5; i < 10; ++i) {
      const LossReport r = advance(resumed, ds);
      const auto want = fields(straight[i]);
      const auto got = fields(r);
      CAPTURE(i);
      for (std::size_t k = 0; k < want.size(); ++k) CHECK(std::abs(want[k] - got[k]) <= 1e-6);
    }
  }

  TEST_CASE("damaged archives are data errors") {
    const Dataset ds = small_dataset();
    const TrainState s = init_state(tiny_config(16), ds);
    const fs::path dir = fresh_dir("damaged");
    fs::create_directories(dir);
    save_checkpoint(s, dir / "ok.sfck");
    const auto size = fs::file_size(dir / "ok.sfck");
    fs::copy_file(dir / "ok.sfck", dir / "short.sfck");
    fs::resize_file(dir / "short.sfck", size / 2);
    CHECK_THROWS_AS(read_archive(dir / "short.sfck"), DataError);
    std::ofstream(dir / "junk.sfck") << "JUNKJUNKJUNK";
    CHECK_THROWS_AS(read_archive(dir / "junk.sfck"), DataError);
    CHECK_THROWS_AS(load_checkpoint(dir / "absent.sfck"), DataError);
    fs::remove(manifest_path(dir / "ok.sfck"));
    CHECK_THROWS_AS(load_checkpoint(dir / "ok.sfck"), DataError);
  }

  TEST_CASE("archive layout is little-endian with a fixed header") {
    const fs::path dir = fresh_dir("layout");
    fs::create_directories(dir);
    Archive a;
    a.arrays["w"] = Tensor({2}, std::vector<real>{real(1), real(-2)});
    a.manifest.emplace_back("note", "x");
    write_archive(dir / "a.sfck", a);
    std::ifstream in(dir / "a.sfck", std::ios::binary);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
    const std::vector<unsigned char> head = {'S', 'F', 'C', 'K', 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 'w', 1, 0, 0, 0, 2, 0, 0, 0};
    REQUIRE(bytes.size() == head.size() + 8);
    CHECK(std::equal(head.begin(), head.end(), bytes.begin()));
    // 1.0f and -2.0f
    CHECK(std::vector<unsigned char>(bytes.end() - 8, bytes.end()) ==
          std::vector<unsigned char>{0, 0, 0x80, 0x3f, 0, 0, 0, 0xc0});
    const Archive back = read_archive(dir / "a.sfck");
    CHECK(back.get("note") == "x");
    CHECK(back.arrays.at("w")[1] == -2);
  }
}
