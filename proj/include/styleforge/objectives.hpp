#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "styleforge/config.hpp"
#include "styleforge/generator.hpp"
#include "styleforge/style_alignment.hpp"

namespace styleforge {

/// mean |E_c(y_tilde) − E_c(x)|; both encodings keep their gradient paths.
Var content_preserving_loss(const Generator& generator, const Var& content, const Var& stylized);
/// Same, reusing an already computed E_c(x).
Var content_preserving_loss_from_code(const Generator& generator, const Var& content_code, const Var& stylized);

/// mean |G(y, E_s(y, d), d) − y|.
Var conditional_identity_loss(const Generator& generator, const StyleEncoder& encoder, const Var& style,
                              const Tensor& labels);

/// Generator-side terms of the objective; undefined entries are absent.
struct ObjectiveTerms {
  Var image_adversarial;  // LSGAN, generator side
  Var style_adversarial;  // encoder side
  Var identity;
  Var content;
  Var style_preserving;
  Var classification;     // on generated images
  Var kl;                 // ablation only
};

/// λ1·adv + λ2·style_adv + λ3·(identity + content) + λ4·sp + λ5·cls + w_kl·kl.
/// Zero-weight and disabled terms are left out of the graph. Throws
/// std::invalid_argument when a term with positive weight is missing.
Var total_objective(const ObjectiveTerms& terms, const LossWeights& weights);

enum class ParamGroup { generator, image_discriminator, style_discriminator };

/// Parameter groups updated by a named generator-side term.
std::vector<ParamGroup> groups_updated_by(const std::string& term);

/// Component values of one training step.
struct LossReport {
  std::int64_t step = 0;
  // critic side
  double image_adv_d = 0;
  double cls_real = 0;
  double style_adv_d = 0;
  // generator side
  double image_adv_g = 0;
  double style_adv_e = 0;
  double identity = 0;
  double content = 0;
  double style_preserving = 0;
  double cls_fake = 0;
  double kl = 0;
  double total = 0;  // weighted generator-side total

  static std::string csv_header();
  std::string csv_row() const;
};

/// Σ weight·component over the generator-side values of a report, using the
/// same term selection as total_objective.
double weighted_total(const LossReport& report, const LossWeights& weights);

}  // namespace styleforge
