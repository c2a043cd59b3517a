#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "styleforge/rng.hpp"
#include "styleforge/tensor.hpp"

namespace styleforge {

/// Style domains with stable indices in registration order.
class DomainRegistry {
 public:
  DomainRegistry() = default;
  /// Throws ConfigError on duplicates or fewer than two names.
  explicit DomainRegistry(std::vector<std::string> names);

  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(int index) const;
  /// Throws ConfigError for unregistered names.
  int index_of(const std::string& name) const;
  bool contains(const std::string& name) const;

  /// Length-D vector with a single 1 at `index`.
  Tensor onehot(int index) const;
  /// N×D matrix of one-hot rows.
  Tensor onehot_batch(const std::vector<int>& indices) const;

 private:
  std::vector<std::string> names_;
};

// ---- image files --------------------------------------------------------

struct Rgb8Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // interleaved RGB
};

/// Decodes a PNG or JPEG file (format sniffed from content).
Rgb8Image read_image_file(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Rgb8Image& image);

Rgb8Image resize_bilinear(const Rgb8Image& image, int width, int height);

/// 8-bit RGB to a 3×H×W tensor in [-1, 1] and back (clamped, rounded).
Tensor to_tensor(const Rgb8Image& image);
Rgb8Image to_rgb8(const Tensor& chw);

/// Loads, resizes to resolution×resolution and maps to [-1, 1]: 3×R×R.
Tensor load_image(const std::filesystem::path& path, int resolution);
/// Writes a 3×H×W (or 1×3×H×W) tensor in [-1, 1] as PNG.
void save_image(const std::filesystem::path& path, const Tensor& image);

/// Lays out equally sized 3×H×W images row-major on a grid.
Tensor tile_images(const std::vector<Tensor>& images, int columns);

// ---- dataset ------------------------------------------------------------

/// In-memory dataset: content photos plus one image set per style domain.
struct Dataset {
  DomainRegistry domains;
  int resolution = 0;
  bool random_crop = false;
  std::vector<Tensor> contents;               // 3×S×S each
  std::vector<std::vector<Tensor>> styles;    // [domain][image], 3×S×S
  std::vector<std::filesystem::path> content_paths;
  std::vector<std::vector<std::filesystem::path>> style_paths;

  /// Stored side length S (larger than resolution when random_crop is on).
  int stored_size() const;
};

/// Reads <root>/content/ and <root>/styles/<domain>/; domains sorted by name.
Dataset load_dataset(const std::filesystem::path& root, int resolution, bool random_crop = false);

/// Lists decodable image files (png/jpg/jpeg) of a directory, sorted.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

struct Batch {
  Tensor content;              // N×3×R×R
  Tensor style;                // N×3×R×R
  std::vector<int> labels;     // domain of each style image
  Tensor onehot;               // N×D
  std::vector<int> content_index;
  std::vector<int> style_index;  // index within the style image's domain
};

/// Draws N (content, style, label) triples; each example picks its domain
/// uniformly, then a style image from that domain.
Batch sample_batch(const Dataset& dataset, int batch_size, Rng& rng);

/// Center crop (or pass-through) of a stored image to the training resolution.
Tensor center_view(const Dataset& dataset, const Tensor& stored);

}  // namespace styleforge
