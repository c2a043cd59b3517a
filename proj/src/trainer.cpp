#include "styleforge/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "styleforge/error.hpp"

namespace styleforge {

namespace fs = std::filesystem;

// ---- parameter groups -----------------------------------------------------------

ParamList Models::generator_group() const {
  ParamList list;
  style_encoder.collect(list, "style_encoder");
  generator.collect(list, "generator");
  return list;
}

ParamList Models::image_discriminator_group() const {
  ParamList list;
  image_discriminator.collect(list, "image_discriminator");
  return list;
}

ParamList Models::style_discriminator_group() const {
  ParamList list;
  style_discriminator.collect(list, "style_discriminator");
  return list;
}

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kBatchStream = 2;
constexpr std::uint64_t kCodeStream = 3;

Models build_models(const RunConfig& config, int num_domains, Rng& rng) {
  Models m;
  m.style_encoder = StyleEncoder(config, num_domains, rng);
  m.generator = Generator(config, num_domains, rng);
  m.style_discriminator = StyleDiscriminator(config.style_dim, rng, config.init_std);
  m.image_discriminator = PatchDiscriminator(config, num_domains, rng);
  return m;
}

void attach_optimizers(TrainState& s) {
  const RunConfig& c = s.config;
  s.generator_opt = Adam(s.models.generator_group(), c.learning_rate, c.beta1, c.beta2);
  s.image_discriminator_opt = Adam(s.models.image_discriminator_group(), c.learning_rate, c.beta1, c.beta2);
  s.style_discriminator_opt = Adam(s.models.style_discriminator_group(), c.learning_rate, c.beta1, c.beta2);
}

/// Parameters of the listed groups stop receiving gradients for the guard's
/// lifetime.
class FreezeGuard {
 public:
  explicit FreezeGuard(std::vector<ParamList> groups) : groups_(std::move(groups)) {
    for (auto& g : groups_) g.set_requires_grad(false);
  }
  ~FreezeGuard() {
    for (auto& g : groups_) g.set_requires_grad(true);
  }
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  std::vector<ParamList> groups_;
};

double checked(const Var& v, const char* name, std::int64_t step) {
  const double value = v.item();
  if (!std::isfinite(value)) {
    throw NumericalError(std::string("non-finite ") + name + " loss at step " + std::to_string(step) +
                         "; parameters left at their previous values");
  }
  return value;
}

void update(Adam& opt, const Var& loss, const char* group, std::int64_t step) {
  if (loss.defined() && loss.requires_grad()) backward(loss);
  for (const auto& [name, p] : opt.params().entries()) {
    if (!p.grad().empty() && !p.grad().all_finite()) {
      opt.zero_grad();
      throw NumericalError("non-finite gradient for " + name + " (" + group + " update) at step " +
                           std::to_string(step));
    }
  }
  opt.step();
  opt.zero_grad();
}

}  // namespace

TrainState init_state(const RunConfig& config, const Dataset& dataset) {
  config.validate();
  if (dataset.resolution != config.resolution) {
    throw ConfigError("dataset was loaded at " + std::to_string(dataset.resolution) + " px but the config asks for " +
                      std::to_string(config.resolution));
  }
  TrainState s;
  s.config = config;
  s.domains = dataset.domains;
  Rng rng = Rng::for_stream(config.seed, 0, kInitStream);
  s.models = build_models(config, dataset.domains.size(), rng);
  s.models.perceptual = build_feature_extractor(config, &dataset);
  attach_optimizers(s);
  return s;
}

Rng batch_rng(std::uint64_t seed, std::int64_t step) {
  return Rng::for_stream(seed, static_cast<std::uint64_t>(step), kBatchStream);
}

Rng code_rng(std::uint64_t seed, std::int64_t step) {
  return Rng::for_stream(seed, static_cast<std::uint64_t>(step), kCodeStream);
}

// ---- one step -----------------------------------------------------------------------

LossReport train_step(TrainState& state, const Batch& batch, Rng& rng) {
  const RunConfig& cfg = state.config;
  const LossWeights& w = cfg.weights;
  Models& m = state.models;
  const std::int64_t step = state.step + 1;

  const int n = batch.content.dim(0);
  const int n_sampled = std::clamp(static_cast<int>(std::lround(n * cfg.sampled_code_fraction)), 0, n);
  const int n_exemplar = n - n_sampled;
  const Var x = constant(batch.content);
  const Var y = constant(batch.style);
  const Tensor& labels = batch.onehot;

  const double w_cid = w.use_identity ? w.identity_content : 0.0;
  const double w_cp = w.use_content ? w.identity_content : 0.0;
  const bool need_fakes = w.image_adversarial > 0 || w_cp > 0 || w.style_preserving > 0 || w.classification > 0;
  const bool need_codes = need_fakes || w.style_adversarial > 0 || w_cid > 0 || w.kl > 0;

  LossReport report;
  report.step = step;
  ObjectiveTerms terms;

  // ---- generator-side graph, built once against the pre-update critics ----
  Var z_enc;
  if (need_codes) {
    if (cfg.kl_ablation) {
      const GaussianCode posterior = m.style_encoder.encode_distribution(y, labels);
      z_enc = sample_posterior(posterior, rng);
      if (w.kl > 0) terms.kl = kl_ablation_loss(m.style_encoder, posterior);
    } else {
      z_enc = m.style_encoder.encode(y, labels);
    }
  }
  const Tensor z_prior = sample_style(n_sampled, cfg.style_dim, rng);

  Var fake;
  Var content_code;
  if (need_fakes) {
    content_code = m.generator.encode_content(x);
    std::vector<Var> parts;
    if (n_exemplar > 0) {
      parts.push_back(m.generator.decode(slice(content_code, 0, 0, n_exemplar),
                                         m.generator.map_style(slice(z_enc, 0, 0, n_exemplar),
                                                               labels.slice_batch(0, n_exemplar))));
    }
    if (n_sampled > 0) {
      parts.push_back(m.generator.decode(slice(content_code, 0, n_exemplar, n_sampled),
                                         m.generator.map_style(constant(z_prior), labels.slice_batch(n_exemplar, n_sampled))));
    }
    fake = parts.size() == 1 ? parts.front() : concat(parts, 0);
  }
  if (w_cid > 0) {
    terms.identity = l1_loss(m.generator.generate(y, z_enc, labels), y);
    report.identity = checked(terms.identity, "identity", step);
  }
  if (w_cp > 0) {
    terms.content = content_preserving_loss_from_code(m.generator, content_code, fake);
    report.content = checked(terms.content, "content", step);
  }
  if (w.style_preserving > 0) {
    if (n_exemplar == 0) throw ConfigError("style preserving loss needs exemplar-guided rows (sampled_code_fraction < 1)");
    terms.style_preserving =
        style_preserving_loss(*m.perceptual, slice(y, 0, 0, n_exemplar), slice(fake, 0, 0, n_exemplar));
    report.style_preserving = checked(terms.style_preserving, "style preserving", step);
  }
  if (terms.kl.defined()) report.kl = checked(terms.kl, "KL", step);

  // ---- (1) image discriminator: LSGAN on reals vs detached fakes, cls on reals ----
  {
    Var loss;
    if (w.image_adversarial > 0 || w.classification > 0) {
      const DiscriminatorOutput real_out = m.image_discriminator.forward(y);
      if (w.image_adversarial > 0) {
        Var adv = adv_loss_d(real_out, m.image_discriminator.forward(detach(fake)));
        report.image_adv_d = checked(adv, "image adversarial (critic)", step);
        loss = scale(adv, static_cast<real>(w.image_adversarial));
      }
      if (w.classification > 0) {
        Var cls = cls_loss(real_out, labels);
        report.cls_real = checked(cls, "classification (real)", step);
        Var weighted = scale(cls, static_cast<real>(w.classification));
        loss = loss.defined() ? add(loss, weighted) : weighted;
      }
    }
    update(state.image_discriminator_opt, loss, "image discriminator", step);
  }

  // ---- (2) style discriminator: prior samples vs detached encoded codes ----
  {
    Var loss;
    if (w.style_adversarial > 0) {
      Var adv = style_adv_loss_discriminator(
          m.style_discriminator.logits(constant(sample_style(n, cfg.style_dim, rng))),
          m.style_discriminator.logits(detach(z_enc)));
      report.style_adv_d = checked(adv, "style adversarial (critic)", step);
      loss = scale(adv, static_cast<real>(w.style_adversarial));
    }
    update(state.style_discriminator_opt, loss, "style discriminator", step);
  }

  // ---- (3) generator group against the updated, frozen critics ----
  {
    FreezeGuard freeze({m.image_discriminator_group(), m.style_discriminator_group()});
    if (w.image_adversarial > 0 || w.classification > 0) {
      const DiscriminatorOutput fake_out = m.image_discriminator.forward(fake);
      if (w.image_adversarial > 0) {
        terms.image_adversarial = adv_loss_g(fake_out);
        report.image_adv_g = checked(terms.image_adversarial, "image adversarial", step);
      }
      if (w.classification > 0) {
        terms.classification = cls_loss(fake_out, labels);
        report.cls_fake = checked(terms.classification, "classification (fake)", step);
      }
    }
    if (w.style_adversarial > 0) {
      terms.style_adversarial = style_adv_loss_encoder(m.style_discriminator.logits(z_enc));
      report.style_adv_e = checked(terms.style_adversarial, "style adversarial", step);
    }
    Var total = total_objective(terms, w);
    checked(total, "total", step);
    report.total = weighted_total(report, w);
    update(state.generator_opt, total, "generator", step);
  }

  state.step = step;
  return report;
}

LossReport advance(TrainState& state, const Dataset& dataset) {
  Rng brng = batch_rng(state.config.seed, state.step);
  const Batch batch = sample_batch(dataset, state.config.batch_size, brng);
  Rng crng = code_rng(state.config.seed, state.step);
  return train_step(state, batch, crng);
}

// ---- loop -----------------------------------------------------------------------------

fs::path checkpoint_path(const fs::path& run_dir, std::int64_t step) {
  char name[64];
  std::snprintf(name, sizeof name, "step_%08lld.sfck", static_cast<long long>(step));
  return run_dir / "checkpoints" / name;
}

std::optional<fs::path> latest_checkpoint(const fs::path& run_dir) {
  const fs::path dir = run_dir / "checkpoints";
  if (!fs::is_directory(dir)) return std::nullopt;
  std::optional<fs::path> best;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".sfck") continue;
    if (!best || entry.path().filename() > best->filename()) best = entry.path();
  }
  return best;
}

void run_training(TrainState& state, const Dataset& dataset, const TrainOptions& options) {
  const RunConfig& cfg = state.config;
  std::ofstream csv;
  if (!options.out_dir.empty()) {
    fs::create_directories(options.out_dir);
    std::ofstream(options.out_dir / "config.txt") << cfg.to_text();
    const fs::path csv_path = options.out_dir / "losses.csv";
    const bool fresh = !fs::exists(csv_path) || fs::file_size(csv_path) == 0;
    csv.open(csv_path, std::ios::app);
    if (!csv) throw DataError("cannot write " + csv_path.string());
    if (fresh) csv << LossReport::csv_header() << '\n';
  }
  std::int64_t last_saved = -1;
  while (state.step < cfg.iterations) {
    const LossReport report = advance(state, dataset);
    const bool log = cfg.log_interval > 0 && (state.step % cfg.log_interval == 0 || state.step == cfg.iterations);
    if (log) {
      if (csv.is_open()) csv << report.csv_row() << '\n' << std::flush;
      if (options.on_report) options.on_report(report);
      if (!options.quiet) std::fprintf(stderr, "step %lld  total %.4f\n", static_cast<long long>(report.step), report.total);
    }
    if (!options.out_dir.empty() && cfg.checkpoint_interval > 0 && state.step % cfg.checkpoint_interval == 0) {
      save_checkpoint(state, checkpoint_path(options.out_dir, state.step));
      last_saved = state.step;
    }
  }
  if (!options.out_dir.empty() && last_saved != state.step) save_checkpoint(state, checkpoint_path(options.out_dir, state.step));
}

TrainState train(const RunConfig& config, const Dataset& dataset, const TrainOptions& options) {
  TrainState state = init_state(config, dataset);
  run_training(state, dataset, options);
  return state;
}

// ---- persistence ---------------------------------------------------------------------

namespace {

void export_params(const ParamList& list, std::map<std::string, Tensor>& out) {
  for (const auto& [name, p] : list.entries()) out[name] = p.value();
}

void import_params(const ParamList& list, const std::map<std::string, Tensor>& in) {
  for (const auto& [name, p] : list.entries()) {
    const auto it = in.find(name);
    if (it == in.end()) throw DataError("checkpoint is missing parameter '" + name + "'");
    if (it->second.shape() != p.shape()) {
      throw DataError("checkpoint parameter '" + name + "' has shape " + shape_string(it->second.shape()) +
                      ", the configured network expects " + shape_string(p.shape()));
    }
    Var handle = p;
    handle.mutable_value() = it->second;
  }
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(item);
  return out;
}

std::int64_t parse_int(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw DataError("checkpoint manifest entry '" + key + "' is not an integer: '" + text + "'");
}

}  // namespace

Archive to_archive(const TrainState& s) {
  Archive a;
  export_params(s.models.generator_group(), a.arrays);
  export_params(s.models.image_discriminator_group(), a.arrays);
  export_params(s.models.style_discriminator_group(), a.arrays);
  if (s.models.perceptual && s.config.perceptual_backend == PerceptualBackend::tiny) {
    ParamList perceptual;
    s.models.perceptual->collect(perceptual, "perceptual");
    export_params(perceptual, a.arrays);
  }
  s.generator_opt.export_state(a.arrays, "adam.generator");
  s.image_discriminator_opt.export_state(a.arrays, "adam.image_discriminator");
  s.style_discriminator_opt.export_state(a.arrays, "adam.style_discriminator");

  std::string domains;
  for (const auto& name : s.domains.names()) {
    if (name.find(',') != std::string::npos) throw DataError("domain name '" + name + "' contains a comma");
    domains += (domains.empty() ? "" : ",") + name;
  }
  a.manifest = {{"format", "styleforge-checkpoint"},
                {"step", std::to_string(s.step)},
                {"seed", std::to_string(s.config.seed)},
                {"domains", domains},
                {"adam.generator.steps", std::to_string(s.generator_opt.steps())},
                {"adam.image_discriminator.steps", std::to_string(s.image_discriminator_opt.steps())},
                {"adam.style_discriminator.steps", std::to_string(s.style_discriminator_opt.steps())}};
  std::istringstream config_text(s.config.to_text());
  std::string line;
  while (std::getline(config_text, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) a.manifest.emplace_back("config." + line.substr(0, eq), line.substr(eq + 3));
  }
  for (const auto& [name, t] : a.arrays) a.manifest.emplace_back("shape." + name, shape_string(t.shape()));
  return a;
}

TrainState from_archive(const Archive& a) {
  if (a.get("format") != "styleforge-checkpoint") throw DataError("archive is not a training checkpoint (manifest missing?)");
  TrainState s;
  for (const auto& [key, value] : a.manifest) {
    if (key.rfind("config.", 0) == 0) s.config.set(key.substr(7), value);
  }
  s.config.validate();
  s.domains = DomainRegistry(split_list(a.require("domains")));
  s.step = parse_int("step", a.require("step"));

  Rng unused(0);
  s.models = build_models(s.config, s.domains.size(), unused);
  import_params(s.models.generator_group(), a.arrays);
  import_params(s.models.image_discriminator_group(), a.arrays);
  import_params(s.models.style_discriminator_group(), a.arrays);
  s.models.perceptual = restore_feature_extractor(s.config, a.arrays);

  attach_optimizers(s);
  s.generator_opt.import_state(a.arrays, "adam.generator", parse_int("steps", a.require("adam.generator.steps")));
  s.image_discriminator_opt.import_state(a.arrays, "adam.image_discriminator",
                                         parse_int("steps", a.require("adam.image_discriminator.steps")));
  s.style_discriminator_opt.import_state(a.arrays, "adam.style_discriminator",
                                         parse_int("steps", a.require("adam.style_discriminator.steps")));
  return s;
}

void save_checkpoint(const TrainState& state, const fs::path& path) { write_archive(path, to_archive(state)); }

TrainState load_checkpoint(const fs::path& path) { return from_archive(read_archive(path)); }

}  // namespace styleforge
