#pragma once

#include <cstdint>
#include <filesystem>

#include "styleforge/data.hpp"

namespace styleforge {

/// Synthetic texture domains for desk-scale runs. Each domain pairs a
/// palette with a texture family (oriented gratings, soft blobs, plaids);
/// content images are smooth gradients with a few flat shapes.
struct ToyDataOptions {
  int domains = 3;  // at most 3 texture families, palettes cycle beyond that
  int images_per_domain = 200;
  int content_images = 200;
  int size = 64;
  std::uint64_t seed = 7;
};

/// Writes <root>/content/*.png and <root>/styles/<domain>/*.png.
void write_toy_dataset(const std::filesystem::path& root, const ToyDataOptions& options);

/// The same images, built in memory at options.size resolution.
Dataset make_toy_dataset(const ToyDataOptions& options);

/// Domain names used by the toy generator, in index order.
std::string toy_domain_name(int index);

}  // namespace styleforge
