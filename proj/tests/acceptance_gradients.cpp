// Finite-difference sweep over every loss, run by the acceptance suite.
// Prints one "<loss> <relative error>" line per check, then "worst <max>".
#include <cstdio>
#include <string>
#include <vector>

#include "styleforge/discriminator.hpp"
#include "styleforge/generator.hpp"
#include "styleforge/objectives.hpp"
#include "styleforge/perceptual.hpp"
#include "styleforge/style_alignment.hpp"
#include "support.hpp"

using namespace styleforge;
using styleforge::testing::gradient_relative_error;

static_assert(sizeof(real) == sizeof(double), "gradient checks need the double-precision build");

namespace {

constexpr int kSide = 8;

Var random_image(int n, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t({n, 3, kSide, kSide});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<real>(rng.uniform(-0.9, 0.9));
  return Var(t, true);
}

Var random_input(Shape shape, std::uint64_t seed, double stddev = 1.0) {
  Rng rng(seed);
  return Var(rng.normal_tensor(std::move(shape), stddev), true);
}

Tensor labels_for(int n, int d) {
  Tensor t({n, d});
  for (int i = 0; i < n; ++i) t.at(i, i % d) = 1;
  return t;
}

struct Sweep {
  std::vector<std::pair<std::string, double>> results;
  void check(const std::string& name, Var input, const std::function<Var()>& loss) {
    results.emplace_back(name, gradient_relative_error(std::move(input), loss));
  }
};

}  // namespace

int main() {
  const RunConfig config = testing::tiny_config(kSide);
  Sweep s;
  for (std::uint64_t trial = 0; trial < 3; ++trial) {
    const std::uint64_t seed = 1000 * (trial + 1);
    Rng rng(seed);

    StyleDiscriminator critic(config.style_dim, rng, 0.5);
    Var sampled = random_input({6, config.style_dim}, seed + 1);
    Var encoded = random_input({6, config.style_dim}, seed + 2);
    auto s_adv_d = [&] { return style_adv_loss_discriminator(critic.logits(sampled), critic.logits(encoded)); };
    s.check("style_adv_critic/encoded", encoded, s_adv_d);
    s.check("style_adv_critic/sampled", sampled, s_adv_d);

    StyleEncoder encoder(config, 3, rng);
    Var styles = random_image(3, seed + 3);
    const Tensor labels = labels_for(3, 3);
    s.check("style_adv_encoder/image", styles,
            [&] { return style_adv_loss_encoder(critic.logits(encoder.encode(styles, labels))); });

    PatchDiscriminator disc(config, 3, rng);
    Var reals = random_image(2, seed + 4);
    Var fakes = random_image(2, seed + 5);
    auto c_adv_d = [&] { return adv_loss_d(disc.forward(reals), disc.forward(fakes)); };
    s.check("image_adv_critic/real", reals, c_adv_d);
    s.check("image_adv_critic/fake", fakes, c_adv_d);
    s.check("image_adv_generator/fake", fakes, [&] { return adv_loss_g(disc.forward(fakes)); });
    const Tensor two = labels_for(2, 3);
    s.check("classification/image", reals, [&] { return cls_loss(disc.forward(reals), two); });

    Generator generator(config, 3, rng);
    Var content = random_image(2, seed + 6);
    Var stylized = random_image(2, seed + 7);
    auto cp = [&] { return content_preserving_loss(generator, content, stylized); };
    s.check("content_preserving/output", stylized, cp);
    s.check("content_preserving/content", content, cp);

    TinyFeatureNet net(rng);
    Var target = random_image(2, seed + 8);
    s.check("style_preserving/output", stylized, [&] { return style_preserving_loss(net, target, stylized); });

    s.check("conditional_identity/style", styles,
            [&] { return conditional_identity_loss(generator, encoder, styles, labels); });

    Var mu = random_input({3, config.style_dim}, seed + 9);
    Var logvar = random_input({3, config.style_dim}, seed + 10, 0.5);
    s.check("kl/mean", mu, [&] { return kl_standard_normal(mu, logvar); });
    s.check("kl/logvar", logvar, [&] { return kl_standard_normal(mu, logvar); });
  }

  double worst = 0;
  for (const auto& [name, err] : s.results) {
    std::printf("%s %.3e\n", name.c_str(), err);
    worst = std::max(worst, err);
  }
  std::printf("worst %.6e\n", worst);
  return worst < 1e-3 ? 0 : 1;
}
