#include "cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "styleforge/diagnostics.hpp"
#include "styleforge/error.hpp"
#include "styleforge/kernels.hpp"
#include "styleforge/toy_data.hpp"
#include "styleforge/trainer.hpp"

namespace styleforge::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::string data;
  std::string out;
  std::string checkpoint;
  std::string content;
  std::string style;
  std::vector<std::string> domains;
  int n = 0;
  int steps = 11;
  std::uint64_t seed = 0;
  std::int64_t iterations = -1;
  bool resume = false;
  int size = 64;
};

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) throw DataError(std::string(what) + " not found: " + path);
}

void require_dir(const std::string& path, const char* what) {
  if (!fs::is_directory(path)) throw DataError(std::string(what) + " not found: " + path);
}

fs::path resolve_checkpoint(const std::string& path) {
  if (fs::is_directory(path)) {
    if (auto latest = latest_checkpoint(path)) return *latest;
    throw DataError("no checkpoint under " + path);
  }
  require_file(path, "checkpoint");
  return path;
}

std::string numbered(const char* stem, int i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%02d.png", stem, i);
  return buf;
}

Tensor single(const Tensor& chw) { return chw.reshaped({1, chw.dim(0), chw.dim(1), chw.dim(2)}); }

// Evaluation classifier seed, kept apart from the perceptual pre-training stream.
std::uint64_t classifier_seed(std::uint64_t seed) { return seed * 0x9E3779B97F4A7C15ull + 0xC1A55ull; }

Dataset load_matching_dataset(const TrainState& state, const std::string& root) {
  require_dir(root, "dataset directory");
  Dataset ds = load_dataset(root, state.config.resolution, state.config.random_crop);
  if (ds.domains.names() != state.domains.names()) {
    throw ConfigError("dataset domains do not match the checkpoint's domains");
  }
  return ds;
}

// ---- verbs ---------------------------------------------------------------------

int cmd_train(const Options& o) {
  require_file(o.config, "config file");
  require_dir(o.data, "dataset directory");
  RunConfig config = load_config(o.config);
  if (o.iterations >= 0) config.iterations = o.iterations;
  if (o.seed != 0) config.seed = o.seed;
  config.validate();
  const Dataset dataset = load_dataset(o.data, config.resolution, config.random_crop);

  TrainOptions options;
  options.out_dir = o.out;
  options.quiet = false;
  const auto latest = o.resume ? latest_checkpoint(o.out) : std::nullopt;
  if (latest) {
    TrainState state = load_checkpoint(*latest);
    if (state.domains.names() != dataset.domains.names()) {
      throw ConfigError("dataset domains do not match the checkpoint being resumed");
    }
    state.config.iterations = config.iterations;
    std::cout << "resuming from " << latest->string() << " at step " << state.step << '\n';
    run_training(state, dataset, options);
    std::cout << "final checkpoint " << checkpoint_path(o.out, state.step).string() << '\n';
  } else {
    TrainState state = train(config, dataset, options);
    std::cout << "final checkpoint " << checkpoint_path(o.out, state.step).string() << '\n';
  }
  return kExitOk;
}

int cmd_stylize(const Options& o) {
  require_file(o.content, "content image");
  require_file(o.style, "style image");
  const TrainState state = load_checkpoint(resolve_checkpoint(o.checkpoint));
  const int d = state.domains.index_of(o.domains.front());
  const int res = state.config.resolution;
  NoGradGuard no_grad;
  const Var x = constant(single(load_image(o.content, res)));
  const Var y = constant(single(load_image(o.style, res)));
  const Tensor label = state.domains.onehot_batch({d});
  const Var z = state.models.style_encoder.encode(y, label);
  const Var out = state.models.generator.generate(x, z, label);
  if (fs::path(o.out).has_parent_path()) fs::create_directories(fs::path(o.out).parent_path());
  save_image(o.out, out.value());
  std::cout << o.out << '\n';
  return kExitOk;
}

int cmd_sample(const Options& o) {
  require_file(o.content, "content image");
  if (o.n < 1) throw ConfigError("--n must be at least 1");
  const TrainState state = load_checkpoint(resolve_checkpoint(o.checkpoint));
  const int d = state.domains.index_of(o.domains.front());
  Rng rng(o.seed);
  const Tensor codes = sample_style(o.n, state.config.style_dim, rng);
  NoGradGuard no_grad;
  const Tensor x = single(load_image(o.content, state.config.resolution));
  const Tensor label = state.domains.onehot_batch({d});
  fs::create_directories(o.out);
  std::vector<Tensor> images;
  for (int i = 0; i < o.n; ++i) {
    const Tensor z = codes.slice_batch(i, 1);
    images.push_back(state.models.generator.generate(constant(x), constant(z), label).value());
    save_image(fs::path(o.out) / numbered("sample", i), images.back());
  }
  save_image(fs::path(o.out) / "grid.png", tile_images(images, std::min(o.n, 4)));
  std::cout << o.n << " samples written to " << o.out << '\n';
  return kExitOk;
}

int cmd_interpolate(const Options& o) {
  require_file(o.content, "content image");
  if (o.steps < 2) throw ConfigError("--steps must be at least 2");
  if (o.domains.size() > 2) throw ConfigError("--domain takes one (intra-domain) or two (inter-domain) names");
  const TrainState state = load_checkpoint(resolve_checkpoint(o.checkpoint));
  const int da = state.domains.index_of(o.domains.front());
  const int db = state.domains.index_of(o.domains.back());
  Rng rng(o.seed);
  const Tensor codes = sample_style(2, state.config.style_dim, rng);
  const Tensor x = load_image(o.content, state.config.resolution);
  const InterpolationResult path =
      interpolation_path(state.models.generator, x, codes.slice_batch(0, 1), codes.slice_batch(1, 1),
                         state.domains.onehot_batch({da}), state.domains.onehot_batch({db}), o.steps);
  fs::create_directories(o.out);
  for (std::size_t i = 0; i < path.frames.size(); ++i) save_image(fs::path(o.out) / numbered("frame", static_cast<int>(i)), path.frames[i]);
  save_image(fs::path(o.out) / "grid.png", tile_images(path.frames, static_cast<int>(path.frames.size())));
  std::ofstream csv(fs::path(o.out) / "interpolation.csv");
  csv << "step,mean_abs_delta\n";
  for (std::size_t i = 0; i < path.step_deltas.size(); ++i) csv << i << ',' << path.step_deltas[i] << '\n';
  nlohmann::ordered_json j;
  j["steps"] = o.steps;
  j["from_domain"] = state.domains.name(da);
  j["to_domain"] = state.domains.name(db);
  j["max_step_delta"] = path.max_delta;
  j["mean_step_delta"] = path.mean_delta;
  j["max_over_mean"] = path.smoothness_ratio;
  std::ofstream(fs::path(o.out) / "interpolation.json") << j.dump(2) << '\n';
  std::cout << "max/mean step delta " << path.smoothness_ratio << '\n';
  return kExitOk;
}

int cmd_evaluate(const Options& o) {
  const TrainState state = load_checkpoint(resolve_checkpoint(o.checkpoint));
  const Dataset ds = load_matching_dataset(state, o.data);
  ClassifierSettings settings;
  settings.holdout_fraction = 0.2;
  settings.seed = classifier_seed(o.seed);
  const TrainedClassifier judge = train_domain_classifier(ds, settings);

  const int n = std::min<int>(o.n > 0 ? o.n : 32, static_cast<int>(ds.contents.size()));
  const std::vector<Tensor> contents(ds.contents.begin(), ds.contents.begin() + n);
  Rng rng(o.seed);
  const ClassifierReport report = reclassification_accuracy(state.models.generator, state.models.style_encoder, contents,
                                                            ds, judge.classifier, rng);
  write_classifier_report(report, o.out);

  std::ofstream div(fs::path(o.out) / "diversity.csv");
  div << "domain,diversity,repeated_code_floor\n";
  const Tensor content = center_view(ds, ds.contents.front());
  for (int d = 0; d < ds.domains.size(); ++d) {
    const Tensor label = ds.domains.onehot(d);
    const Tensor codes = sample_style(8, state.config.style_dim, rng);
    const Tensor repeated = stack_batch(std::vector<Tensor>(8, codes.slice_batch(0, 1)));
    div << ds.domains.name(d) << ',' << diversity_score(state.models.generator, *state.models.perceptual, content, label, codes)
        << ',' << diversity_score(state.models.generator, *state.models.perceptual, content, label, repeated) << '\n';
  }

  nlohmann::ordered_json j;
  j["checkpoint_step"] = state.step;
  j["classifier_train_accuracy"] = judge.train_accuracy;
  j["classifier_holdout_accuracy"] = judge.holdout_accuracy;
  j["reclassification_accuracy"] = report.mean_accuracy;
  j["exemplar_accuracy"] = report.exemplar_accuracy;
  j["sampled_accuracy"] = report.sampled_accuracy;
  std::ofstream(fs::path(o.out) / "summary.json") << j.dump(2) << '\n';
  std::cout << "re-classification accuracy " << report.mean_accuracy << " (classifier held-out " << judge.holdout_accuracy
            << ")\n";
  return kExitOk;
}

int cmd_diagnose(const Options& o) {
  const TrainState state = load_checkpoint(resolve_checkpoint(o.checkpoint));
  const Dataset ds = load_matching_dataset(state, o.data);
  Rng rng(o.seed);
  const StyleSpaceReport report = style_space_report(state.models.style_encoder, ds, o.n > 0 ? o.n : 2000, rng);
  write_style_space_report(report, ds.domains.names(), o.out);
  std::cout << to_string(report.coverage) << ": probe accuracy " << report.probe_accuracy << ", mean joint variance "
            << report.mean_joint_variance << ", mean domain trace " << report.mean_domain_trace << '\n';
  return kExitOk;
}

int cmd_make_toy(const Options& o) {
  ToyDataOptions toy;
  if (o.n > 0) toy.images_per_domain = toy.content_images = o.n;
  toy.size = o.size;
  if (o.seed != 0) toy.seed = o.seed;
  write_toy_dataset(o.out, toy);
  std::cout << "toy dataset written to " << o.out << '\n';
  return kExitOk;
}

int report(const char* kind, const std::exception& e, int code) {
  std::cerr << "styleforge: " << kind << ": " << e.what() << '\n';
  return code;
}

void apply_thread_env() {
  if (const char* env = std::getenv("STYLEFORGE_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || n < 1) throw ConfigError(std::string("STYLEFORGE_THREADS must be a positive integer, got '") + env + "'");
    kernels::set_threads(static_cast<int>(n));
  }
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Multimodal multi-domain style transfer: training, inference and diagnostics", "styleforge"};
  app.require_subcommand(1);
  Options o;

  auto* train = app.add_subcommand("train", "Train a model and write checkpoints, losses and a config echo");
  train->add_option("--config", o.config, "Run configuration (key = value lines)")->required();
  train->add_option("--data", o.data, "Dataset root with content/ and styles/<domain>/")->required();
  train->add_option("--out", o.out, "Run directory")->required();
  train->add_option("--iterations", o.iterations, "Override the configured iteration count")->check(CLI::NonNegativeNumber);
  train->add_option("--seed", o.seed, "Override the configured seed");
  train->add_flag("--resume", o.resume, "Continue from the newest checkpoint in --out");

  auto* stylize = app.add_subcommand("stylize", "Exemplar-guided stylization of one content image");
  stylize->add_option("--checkpoint", o.checkpoint, "Checkpoint file or run directory")->required();
  stylize->add_option("--content", o.content)->required();
  stylize->add_option("--style", o.style)->required();
  stylize->add_option("--domain", o.domains, "Domain of the style image")->required()->expected(1);
  stylize->add_option("--out", o.out, "Output PNG")->required();

  auto* sample = app.add_subcommand("sample", "Stylize with codes drawn from the standard normal prior");
  sample->add_option("--checkpoint", o.checkpoint)->required();
  sample->add_option("--content", o.content)->required();
  sample->add_option("--domain", o.domains)->required()->expected(1);
  sample->add_option("--n", o.n, "Number of samples")->default_val(8);
  sample->add_option("--seed", o.seed)->default_val(0);
  sample->add_option("--out", o.out, "Output directory")->required();

  auto* interpolate = app.add_subcommand("interpolate", "Linear path between two sampled codes");
  interpolate->add_option("--checkpoint", o.checkpoint)->required();
  interpolate->add_option("--content", o.content)->required();
  interpolate->add_option("--domain", o.domains, "One domain, or two for an inter-domain path")->required()->expected(1, 2);
  interpolate->add_option("--steps", o.steps, "Frames including both endpoints")->default_val(11);
  interpolate->add_option("--seed", o.seed)->default_val(0);
  interpolate->add_option("--out", o.out, "Output directory")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Domain re-classification and diversity of stylized outputs");
  evaluate->add_option("--checkpoint", o.checkpoint)->required();
  evaluate->add_option("--data", o.data)->required();
  evaluate->add_option("--n", o.n, "Content images to stylize (default 32)");
  evaluate->add_option("--seed", o.seed)->default_val(0);
  evaluate->add_option("--out", o.out)->required();

  auto* diagnose = app.add_subcommand("diagnose", "Style-space coverage report with PCA and L1 histograms");
  diagnose->add_option("--checkpoint", o.checkpoint)->required();
  diagnose->add_option("--data", o.data)->required();
  diagnose->add_option("--n", o.n, "Random code pairs for the L1 histograms (default 2000)");
  diagnose->add_option("--seed", o.seed)->default_val(0);
  diagnose->add_option("--out", o.out)->required();

  auto* toy = app.add_subcommand("make-toy", "Write the synthetic three-domain texture dataset");
  toy->add_option("--out", o.out)->required();
  toy->add_option("--n", o.n, "Images per domain and content images (default 200)");
  toy->add_option("--size", o.size, "Image side length")->default_val(64);
  toy->add_option("--seed", o.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    apply_thread_env();
    if (*train) return cmd_train(o);
    if (*stylize) return cmd_stylize(o);
    if (*sample) return cmd_sample(o);
    if (*interpolate) return cmd_interpolate(o);
    if (*evaluate) return cmd_evaluate(o);
    if (*diagnose) return cmd_diagnose(o);
    if (*toy) return cmd_make_toy(o);
  } catch (const ConfigError& e) {
    return report("configuration error", e, kExitUsage);
  } catch (const DataError& e) {
    return report("data error", e, kExitData);
  } catch (const NumericalError& e) {
    return report("numerical failure", e, kExitNumerical);
  } catch (const std::invalid_argument& e) {
    return report("invalid input", e, kExitUsage);
  } catch (const std::exception& e) {
    return report("error", e, kExitFailure);
  }
  return kExitUsage;
}

}  // namespace styleforge::cli
