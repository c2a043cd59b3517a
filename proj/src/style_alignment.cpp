#include "styleforge/style_alignment.hpp"

#include <algorithm>
#include <cmath>

#include "styleforge/error.hpp"
#include "styleforge/optim.hpp"

namespace styleforge {

namespace {

Tensor label_planes(const Tensor& labels, int height, int width) {
  const int n = labels.dim(0);
  const int d = labels.dim(1);
  Tensor planes({n, d, height, width});
  const std::size_t spatial = static_cast<std::size_t>(height) * width;
  for (int s = 0; s < n; ++s)
    for (int k = 0; k < d; ++k) {
      real* p = planes.data() + (static_cast<std::size_t>(s) * d + k) * spatial;
      std::fill(p, p + spatial, labels.at(s, k));
    }
  return planes;
}

void require_finite(const Var& v, const char* what) {
  if (!v.value().all_finite()) throw NumericalError(std::string("non-finite ") + what);
}

}  // namespace

// ---- encoder ----------------------------------------------------------------

StyleEncoder::StyleEncoder(const RunConfig& config, int num_domains, Rng& rng)
    : style_dim_(config.style_dim), num_domains_(num_domains), distribution_head_(config.kl_ablation) {
  const double std = config.init_std;
  int channels = config.style_encoder_channels;
  convs_.emplace_back(3 + num_domains, channels, 3, 1, 1, rng, std);
  for (int i = 0; i < config.style_encoder_downsamples; ++i) {
    const int next = std::min(channels * 2, config.style_encoder_channels * 4);
    convs_.emplace_back(channels, next, 4, 2, 1, rng, std);
    channels = next;
  }
  head_ = Linear(channels, distribution_head_ ? 2 * style_dim_ : style_dim_, rng, std);
}

Var StyleEncoder::features(const Var& images, const Tensor& labels) const {
  if (images.value().rank() != 4 || images.dim(1) != 3) {
    throw std::invalid_argument("style encoder expects N×3×H×W images, got " + shape_string(images.shape()));
  }
  if (labels.rank() != 2 || labels.dim(0) != images.dim(0) || labels.dim(1) != num_domains_) {
    throw std::invalid_argument("style encoder labels must be " + std::to_string(images.dim(0)) + "×" +
                                std::to_string(num_domains_) + ", got " + shape_string(labels.shape()));
  }
  Var h = concat({images, constant(label_planes(labels, images.dim(2), images.dim(3)))});
  for (const auto& conv : convs_) h = relu(conv(h));
  return head_(global_avg_pool(h));
}

Var StyleEncoder::encode(const Var& images, const Tensor& labels) const {
  Var out = features(images, labels);
  return distribution_head_ ? slice(out, 1, 0, style_dim_) : out;
}

GaussianCode StyleEncoder::encode_distribution(const Var& images, const Tensor& labels) const {
  if (!distribution_head_) {
    throw std::logic_error("encode_distribution needs an encoder built with kl_ablation = true");
  }
  Var out = features(images, labels);
  return {slice(out, 1, 0, style_dim_), slice(out, 1, style_dim_, style_dim_)};
}

void StyleEncoder::collect(ParamList& list, const std::string& prefix) const {
  for (std::size_t i = 0; i < convs_.size(); ++i) convs_[i].collect(list, prefix + ".conv" + std::to_string(i));
  head_.collect(list, prefix + ".head");
}

// ---- critic -------------------------------------------------------------------

StyleDiscriminator::StyleDiscriminator(int style_dim, Rng& rng, double init_std)
    : style_dim_(style_dim),
      fc1_(style_dim, 4 * style_dim, rng, init_std),
      fc2_(4 * style_dim, 4 * style_dim, rng, init_std),
      fc3_(4 * style_dim, 1, rng, init_std) {}

Var StyleDiscriminator::logits(const Var& codes) const {
  if (codes.value().rank() != 2 || codes.dim(1) != style_dim_) {
    throw std::invalid_argument("style discriminator expects N×" + std::to_string(style_dim_) + " codes, got " +
                                shape_string(codes.shape()));
  }
  return fc3_(leaky_relu(fc2_(leaky_relu(fc1_(codes)))));
}

void StyleDiscriminator::collect(ParamList& list, const std::string& prefix) const {
  fc1_.collect(list, prefix + ".fc1");
  fc2_.collect(list, prefix + ".fc2");
  fc3_.collect(list, prefix + ".fc3");
}

// ---- sampling and losses ---------------------------------------------------------

Tensor sample_style(int count, int style_dim, Rng& rng) { return rng.normal_tensor({count, style_dim}); }

Var sample_posterior(const GaussianCode& code, Rng& rng) {
  Var noise = constant(rng.normal_tensor(code.mean.shape()));
  return add(code.mean, mul(exp(scale(code.logvar, real(0.5))), noise));
}

Var style_adv_loss_discriminator(const Var& logits_sampled, const Var& logits_encoded) {
  require_finite(logits_sampled, "style discriminator logits");
  require_finite(logits_encoded, "style discriminator logits");
  // −log σ(a) = softplus(−a), −log(1 − σ(b)) = softplus(b)
  return add(mean(softplus(scale(logits_sampled, -1))), mean(softplus(logits_encoded)));
}

Var style_adv_loss_encoder(const Var& logits_encoded) {
  require_finite(logits_encoded, "style discriminator logits");
  return mean(softplus(scale(logits_encoded, -1)));
}

Var kl_ablation_loss(const StyleEncoder& encoder, const GaussianCode& code) {
  if (!encoder.distribution_head()) {
    throw std::logic_error("KL loss requested for an encoder without the KL-ablation head");
  }
  return kl_standard_normal(code.mean, code.logvar);
}

// ---- stand-alone alignment ------------------------------------------------------

AlignmentRun train_style_alignment(const RunConfig& base_config, const Dataset& dataset,
                                   const AlignmentSettings& settings) {
  RunConfig config = base_config;
  config.kl_ablation = settings.mode == AlignmentMode::kl;
  const int d = dataset.domains.size();
  Rng init = Rng::for_stream(settings.seed, 0, 101);
  AlignmentRun run{StyleEncoder(config, d, init), StyleDiscriminator(config.style_dim, init, config.init_std),
                   Linear(config.style_dim, d, init, config.init_std), {}};

  ParamList encoder_params;
  run.encoder.collect(encoder_params, "style_encoder");
  run.domain_head.collect(encoder_params, "domain_head");
  ParamList critic_params;
  run.discriminator.collect(critic_params, "style_discriminator");
  if (settings.critic_steps < 1) throw ConfigError("critic_steps must be at least 1");
  const double lr = settings.learning_rate > 0 ? settings.learning_rate : config.learning_rate;
  const double critic_lr = settings.critic_learning_rate > 0 ? settings.critic_learning_rate : lr;
  Adam encoder_opt(encoder_params, lr, config.beta1, config.beta2);
  Adam critic_opt(critic_params, critic_lr, config.beta1, config.beta2);

  for (int step = 0; step < settings.steps; ++step) {
    Rng rng = Rng::for_stream(settings.seed, static_cast<std::uint64_t>(step), 102);
    std::vector<Tensor> images;
    std::vector<int> labels;
    for (int i = 0; i < settings.batch_size; ++i) {
      const int dom = rng.uniform_int(d);
      const auto& pool = dataset.styles[static_cast<std::size_t>(dom)];
      images.push_back(center_view(dataset, pool[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(pool.size())))]));
      labels.push_back(dom);
    }
    const Var batch = constant(stack_batch(images));
    const Tensor onehot = dataset.domains.onehot_batch(labels);

    Var codes;
    Var alignment;
    if (settings.mode == AlignmentMode::adversarial) {
      codes = run.encoder.encode(batch, onehot);
      // critic updates on detached codes, fresh prior samples each time
      const Var encoded = detach(codes);
      for (int k = 0; k < settings.critic_steps; ++k) {
        Var critic_loss = style_adv_loss_discriminator(
            run.discriminator.logits(constant(sample_style(settings.batch_size, config.style_dim, rng))),
            run.discriminator.logits(encoded));
        backward(critic_loss);
        critic_opt.step();
        critic_opt.zero_grad();
        if (k + 1 == settings.critic_steps) run.discriminator_loss.push_back(critic_loss.item());
      }

      critic_params.set_requires_grad(false);
      alignment = style_adv_loss_encoder(run.discriminator.logits(codes));
    } else {
      const GaussianCode posterior = run.encoder.encode_distribution(batch, onehot);
      codes = sample_posterior(posterior, rng);
      alignment = kl_ablation_loss(run.encoder, posterior);
    }
    Var loss = add(scale(alignment, static_cast<real>(settings.alignment_weight)),
                   softmax_cross_entropy(run.domain_head(codes), onehot));
    if (!std::isfinite(loss.item())) {
      throw NumericalError("non-finite alignment loss at step " + std::to_string(step));
    }
    backward(loss);
    encoder_opt.step();
    encoder_opt.zero_grad();
    critic_params.set_requires_grad(true);
  }
  return run;
}

EncodedStyles encode_dataset_styles(const StyleEncoder& encoder, const Dataset& dataset, Rng& rng, int chunk) {
  NoGradGuard no_grad;
  EncodedStyles out;
  for (int dom = 0; dom < dataset.domains.size(); ++dom) {
    const auto& pool = dataset.styles[static_cast<std::size_t>(dom)];
    std::vector<Tensor> rows;
    for (std::size_t begin = 0; begin < pool.size(); begin += static_cast<std::size_t>(chunk)) {
      const std::size_t end = std::min(pool.size(), begin + static_cast<std::size_t>(chunk));
      std::vector<Tensor> images;
      for (std::size_t i = begin; i < end; ++i) images.push_back(center_view(dataset, pool[i]));
      const Var batch = constant(stack_batch(images));
      const Tensor onehot = dataset.domains.onehot_batch(std::vector<int>(end - begin, dom));
      Var codes = encoder.distribution_head() ? sample_posterior(encoder.encode_distribution(batch, onehot), rng)
                                              : encoder.encode(batch, onehot);
      for (std::size_t r = 0; r < end - begin; ++r) rows.push_back(codes.value().sample(static_cast<int>(r)));
    }
    out.codes.push_back(stack_batch(rows));
  }
  return out;
}

}  // namespace styleforge
