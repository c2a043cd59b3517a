#include "styleforge/objectives.hpp"

#include <cstdio>
#include <stdexcept>

namespace styleforge {

Var content_preserving_loss(const Generator& generator, const Var& content, const Var& stylized) {
  return content_preserving_loss_from_code(generator, generator.encode_content(content), stylized);
}

Var content_preserving_loss_from_code(const Generator& generator, const Var& content_code, const Var& stylized) {
  Var code = generator.encode_content(stylized);
  if (code.shape() != content_code.shape()) {
    throw std::invalid_argument("content codes differ in shape: " + shape_string(code.shape()) + " vs " +
                                shape_string(content_code.shape()));
  }
  return l1_loss(code, content_code);
}

Var conditional_identity_loss(const Generator& generator, const StyleEncoder& encoder, const Var& style,
                              const Tensor& labels) {
  return l1_loss(generator.generate(style, encoder.encode(style, labels), labels), style);
}

namespace {

struct Term {
  const Var* value;
  double weight;
  const char* name;
};

std::vector<Term> active_terms(const ObjectiveTerms& t, const LossWeights& w) {
  return {{&t.image_adversarial, w.image_adversarial, "image_adversarial"},
          {&t.style_adversarial, w.style_adversarial, "style_adversarial"},
          {&t.identity, w.use_identity ? w.identity_content : 0.0, "identity"},
          {&t.content, w.use_content ? w.identity_content : 0.0, "content"},
          {&t.style_preserving, w.style_preserving, "style_preserving"},
          {&t.classification, w.classification, "classification"},
          {&t.kl, w.kl, "kl"}};
}

}  // namespace

Var total_objective(const ObjectiveTerms& terms, const LossWeights& weights) {
  Var total;
  for (const Term& term : active_terms(terms, weights)) {
    if (term.weight == 0) continue;
    if (!term.value->defined()) {
      throw std::invalid_argument(std::string("objective term '") + term.name + "' has positive weight but was not computed");
    }
    Var weighted = scale(*term.value, static_cast<real>(term.weight));
    total = total.defined() ? add(total, weighted) : weighted;
  }
  return total.defined() ? total : constant(Tensor({1}));
}

std::vector<ParamGroup> groups_updated_by(const std::string& term) {
  if (term == "image_adversarial" || term == "identity" || term == "content" || term == "style_preserving" ||
      term == "classification" || term == "kl" || term == "style_adversarial") {
    return {ParamGroup::generator};
  }
  if (term == "image_adv_d" || term == "cls_real") return {ParamGroup::image_discriminator};
  if (term == "style_adv_d") return {ParamGroup::style_discriminator};
  throw std::invalid_argument("unknown objective term '" + term + "'");
}

std::string LossReport::csv_header() {
  return "step,image_adv_d,cls_real,style_adv_d,image_adv_g,style_adv_e,identity,content,style_preserving,cls_fake,kl,"
         "total";
}

std::string LossReport::csv_row() const {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%lld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g",
                static_cast<long long>(step), image_adv_d, cls_real, style_adv_d, image_adv_g, style_adv_e, identity,
                content, style_preserving, cls_fake, kl, total);
  return buf;
}

double weighted_total(const LossReport& r, const LossWeights& w) {
  return w.image_adversarial * r.image_adv_g + w.style_adversarial * r.style_adv_e +
         (w.use_identity ? w.identity_content * r.identity : 0.0) +
         (w.use_content ? w.identity_content * r.content : 0.0) + w.style_preserving * r.style_preserving +
         w.classification * r.cls_fake + w.kl * r.kl;
}

}  // namespace styleforge
