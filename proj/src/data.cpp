#include "styleforge/data.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <set>

#include "styleforge/error.hpp"

namespace styleforge {

namespace fs = std::filesystem;

// ---- registry -------------------------------------------------------------

DomainRegistry::DomainRegistry(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.size() < 2) throw ConfigError("at least two style domains are required");
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw ConfigError("empty domain name");
    if (!seen.insert(n).second) throw ConfigError("duplicate domain name '" + n + "'");
  }
}

const std::string& DomainRegistry::name(int index) const {
  if (index < 0 || index >= size()) throw ConfigError("domain index " + std::to_string(index) + " out of range");
  return names_[static_cast<std::size_t>(index)];
}

int DomainRegistry::index_of(const std::string& name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw ConfigError("unknown domain '" + name + "'");
  return static_cast<int>(it - names_.begin());
}

bool DomainRegistry::contains(const std::string& name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

Tensor DomainRegistry::onehot(int index) const {
  name(index);  // range check
  Tensor t({size()});
  t[static_cast<std::size_t>(index)] = 1;
  return t;
}

Tensor DomainRegistry::onehot_batch(const std::vector<int>& indices) const {
  Tensor t({static_cast<int>(indices.size()), size()});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    name(indices[r]);  // range check
    t.at(static_cast<int>(r), indices[r]) = 1;
  }
  return t;
}

// ---- decoding ---------------------------------------------------------------

namespace {

std::vector<std::uint8_t> read_header(const fs::path& path, std::size_t n) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image " + path.string());
  std::vector<std::uint8_t> buf(n);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
  buf.resize(static_cast<std::size_t>(in.gcount()));
  return buf;
}

Rgb8Image read_png(const fs::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw DataError("cannot decode PNG " + path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  Rgb8Image out;
  out.width = static_cast<int>(img.width);
  out.height = static_cast<int>(img.height);
  out.pixels.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw DataError("cannot decode PNG " + path.string() + ": " + msg);
  }
  return out;
}

struct JpegError {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegError*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

Rgb8Image read_jpeg(const fs::path& path) {
  std::FILE* file = std::fopen(path.c_str(), "rb");
  if (!file) throw DataError("cannot open image " + path.string());
  jpeg_decompress_struct cinfo{};
  JpegError err{};
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_error_exit;
  Rgb8Image out;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    std::fclose(file);
    throw DataError("cannot decode JPEG " + path.string() + ": " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, file);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  out.width = static_cast<int>(cinfo.output_width);
  out.height = static_cast<int>(cinfo.output_height);
  out.pixels.resize(static_cast<std::size_t>(out.width) * out.height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * out.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  std::fclose(file);
  return out;
}

bool has_image_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace

Rgb8Image read_image_file(const fs::path& path) {
  const auto head = read_header(path, 8);
  static const std::uint8_t png_sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (head.size() == 8 && std::equal(head.begin(), head.end(), png_sig)) return read_png(path);
  if (head.size() >= 3 && head[0] == 0xFF && head[1] == 0xD8 && head[2] == 0xFF) return read_jpeg(path);
  throw DataError("not a PNG or JPEG image: " + path.string());
}

void write_png(const fs::path& path, const Rgb8Image& image) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, image.pixels.data(), 0, nullptr)) {
    throw DataError("cannot write PNG " + path.string() + ": " + img.message);
  }
}

Rgb8Image resize_bilinear(const Rgb8Image& image, int width, int height) {
  if (image.width == width && image.height == height) return image;
  Rgb8Image out;
  out.width = width;
  out.height = height;
  out.pixels.resize(static_cast<std::size_t>(width) * height * 3);
  const double sx = static_cast<double>(image.width) / width;
  const double sy = static_cast<double>(image.height) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        auto px = [&](int yy, int xx) {
          return static_cast<double>(image.pixels[(static_cast<std::size_t>(yy) * image.width + xx) * 3 + c]);
        };
        const double v = (1 - wy) * ((1 - wx) * px(y0, x0) + wx * px(y0, x1)) + wy * ((1 - wx) * px(y1, x0) + wx * px(y1, x1));
        out.pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c] =
            static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

Tensor to_tensor(const Rgb8Image& image) {
  Tensor t({3, image.height, image.width});
  const std::size_t plane = static_cast<std::size_t>(image.width) * image.height;
  for (std::size_t i = 0; i < plane; ++i)
    for (int c = 0; c < 3; ++c) t[c * plane + i] = static_cast<real>(image.pixels[i * 3 + c] / 127.5 - 1.0);
  return t;
}

Rgb8Image to_rgb8(const Tensor& chw) {
  Tensor t = chw.rank() == 4 ? chw.reshaped({chw.dim(1), chw.dim(2), chw.dim(3)}) : chw;
  if (t.rank() != 3 || t.dim(0) != 3) throw std::invalid_argument("to_rgb8: expected 3×H×W, got " + shape_string(chw.shape()));
  Rgb8Image out;
  out.height = t.dim(1);
  out.width = t.dim(2);
  const std::size_t plane = static_cast<std::size_t>(out.width) * out.height;
  out.pixels.resize(plane * 3);
  for (std::size_t i = 0; i < plane; ++i)
    for (int c = 0; c < 3; ++c) {
      const double v = std::clamp(static_cast<double>(t[c * plane + i]), -1.0, 1.0);
      out.pixels[i * 3 + c] = static_cast<std::uint8_t>(std::lround((v + 1.0) * 127.5));
    }
  return out;
}

Tensor load_image(const fs::path& path, int resolution) {
  return to_tensor(resize_bilinear(read_image_file(path), resolution, resolution));
}

void save_image(const fs::path& path, const Tensor& image) { write_png(path, to_rgb8(image)); }

Tensor tile_images(const std::vector<Tensor>& images, int columns) {
  if (images.empty()) throw std::invalid_argument("tile_images: no images");
  std::vector<Tensor> flat;
  for (const auto& im : images) flat.push_back(im.rank() == 4 ? im.reshaped({im.dim(1), im.dim(2), im.dim(3)}) : im);
  const int h = flat[0].dim(1);
  const int w = flat[0].dim(2);
  columns = std::max(1, std::min(columns, static_cast<int>(flat.size())));
  const int rows = (static_cast<int>(flat.size()) + columns - 1) / columns;
  Tensor grid({3, rows * h, columns * w}, real(1));
  for (std::size_t k = 0; k < flat.size(); ++k) {
    if (flat[k].shape() != flat[0].shape()) throw std::invalid_argument("tile_images: images differ in size");
    const int r0 = static_cast<int>(k) / columns * h;
    const int c0 = static_cast<int>(k) % columns * w;
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          grid[(static_cast<std::size_t>(c) * rows * h + r0 + y) * columns * w + c0 + x] =
              flat[k][(static_cast<std::size_t>(c) * h + y) * w + x];
  }
  return grid;
}

// ---- dataset -----------------------------------------------------------------

int Dataset::stored_size() const { return random_crop ? resolution + resolution / 8 : resolution; }

std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("missing directory " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && has_image_extension(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

namespace {

std::vector<Tensor> load_all(const std::vector<fs::path>& files, int size) {
  std::vector<Tensor> out(files.size());
  std::vector<std::string> errors(files.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < files.size(); ++i) {
    try {
      out[i] = load_image(files[i], size);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw DataError(e);
  return out;
}

}  // namespace

Dataset load_dataset(const fs::path& root, int resolution, bool random_crop) {
  if (!fs::is_directory(root)) throw DataError("dataset root does not exist: " + root.string());
  const fs::path content_dir = root / "content";
  const fs::path styles_dir = root / "styles";
  if (!fs::is_directory(content_dir)) throw DataError("missing content directory " + content_dir.string());
  if (!fs::is_directory(styles_dir)) throw DataError("missing styles directory " + styles_dir.string());

  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(styles_dir)) {
    if (entry.is_directory()) names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());

  Dataset ds;
  ds.domains = DomainRegistry(names);
  ds.resolution = resolution;
  ds.random_crop = random_crop;
  const int stored = ds.stored_size();

  ds.content_paths = list_images(content_dir);
  if (ds.content_paths.empty()) throw DataError("no content images in " + content_dir.string());
  ds.contents = load_all(ds.content_paths, stored);
  for (const auto& name : names) {
    auto files = list_images(styles_dir / name);
    if (files.empty()) throw DataError("style domain directory is empty: " + (styles_dir / name).string());
    ds.styles.push_back(load_all(files, stored));
    ds.style_paths.push_back(std::move(files));
  }
  return ds;
}

namespace {

Tensor crop(const Tensor& img, int top, int left, int size) {
  const int h = img.dim(1);
  const int w = img.dim(2);
  Tensor out({3, size, size});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x)
        out[(static_cast<std::size_t>(c) * size + y) * size + x] =
            img[(static_cast<std::size_t>(c) * h + top + y) * w + left + x];
  return out;
}

}  // namespace

Tensor center_view(const Dataset& dataset, const Tensor& stored) {
  if (!dataset.random_crop) return stored;
  const int margin = dataset.stored_size() - dataset.resolution;
  return crop(stored, margin / 2, margin / 2, dataset.resolution);
}

Batch sample_batch(const Dataset& dataset, int batch_size, Rng& rng) {
  if (dataset.contents.empty()) throw DataError("dataset has no content images");
  for (std::size_t d = 0; d < dataset.styles.size(); ++d) {
    if (dataset.styles[d].empty()) throw DataError("style domain '" + dataset.domains.name(static_cast<int>(d)) + "' is empty");
  }
  const int margin = dataset.stored_size() - dataset.resolution;
  auto view = [&](const Tensor& stored) {
    if (!dataset.random_crop) return stored;
    const int top = rng.uniform_int(margin + 1);
    const int left = rng.uniform_int(margin + 1);
    return crop(stored, top, left, dataset.resolution);
  };

  Batch b;
  std::vector<Tensor> contents;
  std::vector<Tensor> styles;
  for (int i = 0; i < batch_size; ++i) {
    const int ci = rng.uniform_int(static_cast<int>(dataset.contents.size()));
    const int d = rng.uniform_int(dataset.domains.size());
    const int si = rng.uniform_int(static_cast<int>(dataset.styles[static_cast<std::size_t>(d)].size()));
    contents.push_back(view(dataset.contents[static_cast<std::size_t>(ci)]));
    styles.push_back(view(dataset.styles[static_cast<std::size_t>(d)][static_cast<std::size_t>(si)]));
    b.content_index.push_back(ci);
    b.style_index.push_back(si);
    b.labels.push_back(d);
  }
  b.content = stack_batch(contents);
  b.style = stack_batch(styles);
  b.onehot = dataset.domains.onehot_batch(b.labels);
  return b;
}

}  // namespace styleforge
