#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "styleforge/config.hpp"
#include "styleforge/data.hpp"
#include "styleforge/error.hpp"
#include "styleforge/toy_data.hpp"

using namespace styleforge;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  fs::path dir = fs::current_path() / "scratch" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Rgb8Image solid(int w, int h, std::uint8_t value) {
  Rgb8Image img;
  img.width = w;
  img.height = h;
  img.pixels.assign(static_cast<std::size_t>(w) * h * 3, value);
  return img;
}

}  // namespace

TEST_SUITE("domain registry") {
  TEST_CASE("stable indices and one-hot rows") {
    DomainRegistry reg({"monet", "vangogh", "picasso"});
    CHECK(reg.size() == 3);
    CHECK(reg.index_of("monet") == 0);
    CHECK(reg.index_of("vangogh") == 1);
    CHECK(reg.index_of("picasso") == 2);
    const Tensor one = reg.onehot(1);
    CHECK(std::vector<real>(one.values().begin(), one.values().end()) == std::vector<real>{0, 1, 0});
    const Tensor rows = reg.onehot_batch({2, 0});
    CHECK(rows.shape() == Shape{2, 3});
    CHECK(rows.at(0, 2) == 1);
    CHECK(rows.at(1, 0) == 1);
    for (int d = 0; d < 3; ++d) {
      const Tensor row = reg.onehot(d);
      double total = 0;
      for (real v : row.values()) total += v;
      CHECK(total == 1);
    }
  }

  TEST_CASE("five domains") {
    DomainRegistry reg({"cezanne", "monet", "morisot", "ukiyoe", "vangogh"});
    CHECK(reg.size() == 5);
  }

  TEST_CASE("invalid registries") {
    CHECK_THROWS_AS(DomainRegistry({"a", "a"}), ConfigError);
    CHECK_THROWS_AS(DomainRegistry({"only"}), ConfigError);
    DomainRegistry reg({"a", "b"});
    CHECK_THROWS_AS(reg.index_of("c"), ConfigError);
    CHECK_THROWS_AS(reg.onehot(2), ConfigError);
  }
}

TEST_SUITE("image io") {
  TEST_CASE("white and black map to the range endpoints") {
    const fs::path dir = scratch_dir("endpoints");
    write_png(dir / "white.png", solid(10, 6, 255));
    write_png(dir / "black.png", solid(10, 6, 0));
    const Tensor white = load_image(dir / "white.png", 8);
    const Tensor black = load_image(dir / "black.png", 8);
    CHECK(white.shape() == Shape{3, 8, 8});
    for (real v : white.values()) CHECK(v == 1.0f);
    for (real v : black.values()) CHECK(v == -1.0f);
  }

  TEST_CASE("large input is resized to the requested resolution") {
    const fs::path dir = scratch_dir("resize");
    write_png(dir / "big.png", solid(512, 512, 128));
    CHECK(load_image(dir / "big.png", 64).shape() == Shape{3, 64, 64});
  }

  TEST_CASE("8-bit values survive the [-1, 1] round trip") {
    Rgb8Image img;
    img.width = 256;
    img.height = 1;
    for (int v = 0; v < 256; ++v)
      for (int c = 0; c < 3; ++c) img.pixels.push_back(static_cast<std::uint8_t>(v));
    const Rgb8Image back = to_rgb8(to_tensor(img));
    CHECK(back.pixels == img.pixels);
  }

  TEST_CASE("unreadable and non-image files are data errors") {
    const fs::path dir = scratch_dir("bad");
    std::ofstream(dir / "notes.png") << "definitely not an image";
    CHECK_THROWS_AS(read_image_file(dir / "notes.png"), DataError);
    CHECK_THROWS_AS(read_image_file(dir / "missing.png"), DataError);
  }

  TEST_CASE("tiling lays images out row-major") {
    std::vector<Tensor> images;
    for (int i = 0; i < 3; ++i) images.push_back(Tensor({3, 2, 2}, static_cast<real>(i)));
    const Tensor grid = tile_images(images, 2);
    REQUIRE(grid.rank() == 3);
    CHECK(grid.dim(1) >= 4);
    CHECK(grid.dim(2) >= 4);
  }
}

TEST_SUITE("dataset") {
  TEST_CASE("toy dataset on disk loads identically to the in-memory build") {
    const fs::path root = scratch_dir("toy");
    ToyDataOptions opts;
    opts.images_per_domain = 4;
    opts.content_images = 3;
    opts.size = 16;
    write_toy_dataset(root, opts);
    const Dataset disk = load_dataset(root, 16);
    const Dataset memory = make_toy_dataset(opts);
    CHECK(disk.domains.names() == memory.domains.names());
    REQUIRE(disk.contents.size() == 3);
    REQUIRE(disk.styles.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(max_abs_diff(disk.contents[i], memory.contents[i]) < 1e-6);
    for (std::size_t d = 0; d < 3; ++d) {
      REQUIRE(disk.styles[d].size() == 4);
      for (std::size_t i = 0; i < 4; ++i) CHECK(max_abs_diff(disk.styles[d][i], memory.styles[d][i]) < 1e-6);
      for (const auto& p : disk.style_paths[d]) CHECK(p.parent_path().filename() == disk.domains.name(d));
    }
  }

  TEST_CASE("layout errors name the offending path") {
    const fs::path root = scratch_dir("broken");
    try {
      load_dataset(root / "nowhere", 16);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("nowhere") != std::string::npos);
    }
    fs::create_directories(root / "content");
    fs::create_directories(root / "styles" / "a");
    fs::create_directories(root / "styles" / "b");
    write_png(root / "content" / "c.png", solid(16, 16, 10));
    write_png(root / "styles" / "a" / "s.png", solid(16, 16, 20));
    try {
      load_dataset(root, 16);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("b") != std::string::npos);
    }
  }

  TEST_CASE("batches are label-consistent and seed-deterministic") {
    ToyDataOptions opts;
    opts.images_per_domain = 5;
    opts.content_images = 4;
    opts.size = 16;
    const Dataset ds = make_toy_dataset(opts);
    Rng a(99), b(99);
    const Batch first = sample_batch(ds, 4, a);
    const Batch second = sample_batch(ds, 4, b);
    CHECK(first.content.shape() == Shape{4, 3, 16, 16});
    CHECK(first.onehot.shape() == Shape{4, 3});
    CHECK(first.labels == second.labels);
    CHECK(first.style_index == second.style_index);
    CHECK(max_abs_diff(first.style, second.style) == 0);
    Rng c(5);
    for (int trial = 0; trial < 20; ++trial) {
      const Batch batch = sample_batch(ds, 4, c);
      for (int i = 0; i < 4; ++i) {
        const int d = batch.labels[i];
        CHECK(batch.onehot.at(i, d) == 1);
        const Tensor& source = ds.styles[d][batch.style_index[i]];
        CHECK(max_abs_diff(batch.style.sample(i).reshaped(source.shape()), source) == 0);
      }
    }
  }

  TEST_CASE("empty style domain is an error at sampling time") {
    ToyDataOptions opts;
    opts.images_per_domain = 2;
    opts.content_images = 2;
    opts.size = 16;
    Dataset ds = make_toy_dataset(opts);
    ds.styles[1].clear();
    Rng rng(1);
    CHECK_THROWS_AS(
        {
          for (int i = 0; i < 50; ++i) sample_batch(ds, 4, rng);
        },
        DataError);
  }
}

TEST_SUITE("config") {
  TEST_CASE("defaults carry the published hyperparameters") {
    const RunConfig c;
    CHECK(c.style_dim == 20);
    CHECK(c.resolution == 256);
    CHECK(c.learning_rate == 2e-4);
    CHECK(c.beta1 == 0.5);
    CHECK(c.beta2 == 0.999);
    CHECK(c.iterations == 350000);
    CHECK(c.weights.image_adversarial == 1);
    CHECK(c.weights.style_adversarial == 10);
    CHECK(c.weights.identity_content == 100);
    CHECK(c.weights.style_preserving == 30);
    CHECK(c.weights.classification == 1);
    CHECK(c.weights.kl == 0);
    CHECK_NOTHROW(c.validate());
    CHECK_NOTHROW(desk_config().validate());
  }

  TEST_CASE("text form round-trips every key") {
    RunConfig c = desk_config();
    c.seed = 1234;
    c.weights.style_preserving = 0;
    c.learning_rate = 3.5e-4;
    const RunConfig back = parse_config(c.to_text());
    CHECK(back.to_text() == c.to_text());
  }

  TEST_CASE("parsing rules") {
    const RunConfig c = parse_config("# desk run\nresolution = 32  # px\n\nstyle_dim=8\ndisc_scales = 2\ndisc_layers = 3\n");
    CHECK(c.resolution == 32);
    CHECK(c.style_dim == 8);
    CHECK_THROWS_AS(parse_config("no_such_key = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("style_dim = twenty\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("style_dim\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("style_dim = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("learning_rate = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("lambda_style_preserving = -1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("resolution = 60\ndownsample_layers = 3\n"), ConfigError);
    CHECK_THROWS_AS(load_config("/definitely/missing.cfg"), ConfigError);
  }
}
