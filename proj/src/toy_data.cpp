#include "styleforge/toy_data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "styleforge/error.hpp"
#include "styleforge/rng.hpp"

namespace styleforge {

namespace fs = std::filesystem;

namespace {

using Color = std::array<double, 3>;

// Dark, mid and light anchor per domain palette.
const std::array<std::array<Color, 3>, 3> kPalettes = {{
    {{{0.45, 0.08, 0.05}, {0.95, 0.50, 0.12}, {1.00, 0.90, 0.55}}},
    {{{0.05, 0.12, 0.38}, {0.15, 0.60, 0.72}, {0.85, 0.95, 1.00}}},
    {{{0.10, 0.26, 0.08}, {0.50, 0.62, 0.18}, {0.82, 0.92, 0.42}}},
}};

const char* const kNames[] = {"ember", "glacier", "moss"};

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v * 255.0), 0L, 255L)); }

Color palette_at(const std::array<Color, 3>& p, double t) {
  t = std::clamp(t, 0.0, 1.0);
  const int seg = t < 0.5 ? 0 : 1;
  const double f = seg == 0 ? t * 2 : (t - 0.5) * 2;
  Color c;
  for (int k = 0; k < 3; ++k) c[static_cast<std::size_t>(k)] = (1 - f) * p[static_cast<std::size_t>(seg)][static_cast<std::size_t>(k)] +
                                                               f * p[static_cast<std::size_t>(seg + 1)][static_cast<std::size_t>(k)];
  return c;
}

Rgb8Image style_image(int domain, int size, Rng& rng) {
  std::array<Color, 3> palette = kPalettes[static_cast<std::size_t>(domain % 3)];
  if (domain >= 3) {
    // palettes cycle beyond three domains; rotate channels to keep them apart
    for (auto& c : palette) std::rotate(c.begin(), c.begin() + (domain / 3) % 3, c.end());
  }
  // within-domain spread: per-image gain and per-anchor jitter
  const double gain = rng.uniform(0.7, 1.15);
  for (auto& c : palette)
    for (auto& v : c) v = std::clamp(gain * v + rng.uniform(-0.12, 0.12), 0.0, 1.0);

  const int family = domain % 3;
  const double angle = rng.uniform(0, std::numbers::pi);
  const double period = rng.uniform(12, 20) * size / 64.0;
  const double period2 = rng.uniform(14, 24) * size / 64.0;
  const double phase = rng.uniform(0, kTwoPi);
  const double phase2 = rng.uniform(0, kTwoPi);
  struct Blob {
    double x, y, r;
  };
  std::vector<Blob> blobs;
  if (family == 1) {
    const int count = 5 + rng.uniform_int(5);
    for (int i = 0; i < count; ++i) {
      blobs.push_back({rng.uniform(0, size), rng.uniform(0, size), rng.uniform(5, 10) * size / 64.0});
    }
  }

  Rgb8Image img;
  img.width = img.height = size;
  img.pixels.resize(static_cast<std::size_t>(size) * size * 3);
  for (int v = 0; v < size; ++v)
    for (int u = 0; u < size; ++u) {
      double t = 0;
      if (family == 0) {
        t = 0.5 + 0.5 * std::sin(kTwoPi * (u * std::cos(angle) + v * std::sin(angle)) / period + phase);
      } else if (family == 1) {
        double s = 0;
        for (const Blob& b : blobs) {
          const double dx = u - b.x;
          const double dy = v - b.y;
          s += std::exp(-(dx * dx + dy * dy) / (2 * b.r * b.r));
        }
        t = 1 - std::exp(-1.5 * s);
      } else {
        t = 0.5 + 0.25 * (std::sin(kTwoPi * u / period + phase) + std::sin(kTwoPi * v / period2 + phase2));
      }
      const Color c = palette_at(palette, t);
      for (int k = 0; k < 3; ++k)
        img.pixels[(static_cast<std::size_t>(v) * size + u) * 3 + k] = to_byte(c[static_cast<std::size_t>(k)]);
    }
  return img;
}

Rgb8Image content_image(int size, Rng& rng) {
  auto random_color = [&](double lo, double hi) {
    const double base = rng.uniform(lo, hi);
    Color c;
    for (auto& v : c) v = std::clamp(base + rng.uniform(-0.15, 0.15), 0.0, 1.0);
    return c;
  };
  const Color a = random_color(0.1, 0.9);
  const Color b = random_color(0.1, 0.9);
  const double gx = rng.uniform(-1, 1);
  const double gy = rng.uniform(-1, 1);

  struct Shape2 {
    bool circle;
    double cx, cy, rx, ry;
    Color color;
  };
  std::vector<Shape2> shapes;
  const int count = 2 + rng.uniform_int(3);
  for (int i = 0; i < count; ++i) {
    shapes.push_back({rng.uniform() < 0.5, rng.uniform(0.15, 0.85) * size, rng.uniform(0.15, 0.85) * size,
                      rng.uniform(0.08, 0.25) * size, rng.uniform(0.08, 0.25) * size, random_color(0.0, 1.0)});
  }

  Rgb8Image img;
  img.width = img.height = size;
  img.pixels.resize(static_cast<std::size_t>(size) * size * 3);
  for (int v = 0; v < size; ++v)
    for (int u = 0; u < size; ++u) {
      const double s = std::clamp(0.5 + 0.5 * (gx * (2.0 * u / size - 1) + gy * (2.0 * v / size - 1)), 0.0, 1.0);
      Color c;
      for (int k = 0; k < 3; ++k) c[static_cast<std::size_t>(k)] = (1 - s) * a[static_cast<std::size_t>(k)] + s * b[static_cast<std::size_t>(k)];
      for (const Shape2& sh : shapes) {
        // signed distance in pixels, negative inside; one-pixel soft edge
        double dist;
        if (sh.circle) {
          const double dx = (u + 0.5 - sh.cx) / sh.rx;
          const double dy = (v + 0.5 - sh.cy) / sh.ry;
          dist = (std::sqrt(dx * dx + dy * dy) - 1) * std::min(sh.rx, sh.ry);
        } else {
          dist = std::max(std::abs(u + 0.5 - sh.cx) - sh.rx, std::abs(v + 0.5 - sh.cy) - sh.ry);
        }
        const double cover = std::clamp(0.5 - dist, 0.0, 1.0);
        for (int k = 0; k < 3; ++k) {
          auto& ch = c[static_cast<std::size_t>(k)];
          ch = (1 - cover) * ch + cover * sh.color[static_cast<std::size_t>(k)];
        }
      }
      for (int k = 0; k < 3; ++k)
        img.pixels[(static_cast<std::size_t>(v) * size + u) * 3 + k] = to_byte(c[static_cast<std::size_t>(k)]);
    }
  return img;
}

void check(const ToyDataOptions& o) {
  if (o.domains < 2) throw ConfigError("toy dataset needs at least 2 domains");
  if (o.images_per_domain < 1 || o.content_images < 1) throw ConfigError("toy dataset needs at least one image per set");
  if (o.size < 8) throw ConfigError("toy image size must be at least 8");
}

std::string numbered(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05d.png", i);
  return buf;
}

}  // namespace

std::string toy_domain_name(int index) {
  return index < 3 ? kNames[index] : std::string(kNames[index % 3]) + "_" + std::to_string(index / 3);
}

void write_toy_dataset(const fs::path& root, const ToyDataOptions& o) {
  check(o);
  fs::create_directories(root / "content");
  for (int i = 0; i < o.content_images; ++i) {
    Rng rng = Rng::for_stream(o.seed, static_cast<std::uint64_t>(i), 1000);
    write_png(root / "content" / numbered(i), content_image(o.size, rng));
  }
  for (int d = 0; d < o.domains; ++d) {
    const fs::path dir = root / "styles" / toy_domain_name(d);
    fs::create_directories(dir);
    for (int i = 0; i < o.images_per_domain; ++i) {
      Rng rng = Rng::for_stream(o.seed, static_cast<std::uint64_t>(i), 2000 + static_cast<std::uint64_t>(d));
      write_png(dir / numbered(i), style_image(d, o.size, rng));
    }
  }
}

Dataset make_toy_dataset(const ToyDataOptions& o) {
  check(o);
  std::vector<std::string> names;
  for (int d = 0; d < o.domains; ++d) names.push_back(toy_domain_name(d));
  // load_dataset sorts domains by name; match that order here
  std::sort(names.begin(), names.end());
  Dataset ds;
  ds.domains = DomainRegistry(names);
  ds.resolution = o.size;
  for (int i = 0; i < o.content_images; ++i) {
    Rng rng = Rng::for_stream(o.seed, static_cast<std::uint64_t>(i), 1000);
    ds.contents.push_back(to_tensor(content_image(o.size, rng)));
  }
  ds.styles.resize(names.size());
  for (int d = 0; d < o.domains; ++d) {
    const int slot = ds.domains.index_of(toy_domain_name(d));
    for (int i = 0; i < o.images_per_domain; ++i) {
      Rng rng = Rng::for_stream(o.seed, static_cast<std::uint64_t>(i), 2000 + static_cast<std::uint64_t>(d));
      ds.styles[static_cast<std::size_t>(slot)].push_back(to_tensor(style_image(d, o.size, rng)));
    }
  }
  return ds;
}

}  // namespace styleforge
