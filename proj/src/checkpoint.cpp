#include "styleforge/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "styleforge/error.hpp"

namespace styleforge {

namespace fs = std::filesystem;

namespace {

static_assert(sizeof(float) == 4);

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in, const fs::path& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError("truncated checkpoint " + path.string());
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string Archive::get(const std::string& key, const std::string& fallback) const {
  for (const auto& [k, v] : manifest)
    if (k == key) return v;
  return fallback;
}

std::string Archive::require(const std::string& key) const {
  for (const auto& [k, v] : manifest)
    if (k == key) return v;
  throw DataError("checkpoint manifest has no '" + key + "' entry");
}

fs::path manifest_path(const fs::path& archive) {
  fs::path p = archive;
  p.replace_extension(".manifest");
  return p;
}

void write_archive(const fs::path& path, const Archive& archive) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  // Write to a temporary name first so a failed write never leaves a
  // truncated archive under the final name.
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out.write("SFCK", 4);
    put_u32(out, kArchiveVersion);
    put_u32(out, static_cast<std::uint32_t>(archive.arrays.size()));
    std::vector<unsigned char> buf;
    for (const auto& [name, t] : archive.arrays) {
      put_u32(out, static_cast<std::uint32_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      put_u32(out, static_cast<std::uint32_t>(t.rank()));
      for (int d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
      buf.resize(t.size() * 4);
      for (std::size_t i = 0; i < t.size(); ++i) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(t[i]));
        buf[4 * i] = static_cast<unsigned char>(bits);
        buf[4 * i + 1] = static_cast<unsigned char>(bits >> 8);
        buf[4 * i + 2] = static_cast<unsigned char>(bits >> 16);
        buf[4 * i + 3] = static_cast<unsigned char>(bits >> 24);
      }
      out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    }
    out.flush();
    if (!out) throw DataError("failed while writing checkpoint " + path.string() + " (disk full?)");
  }
  fs::rename(tmp, path);

  std::ofstream man(manifest_path(path));
  if (!man) throw DataError("cannot write manifest for " + path.string());
  for (const auto& [k, v] : archive.manifest) man << k << " = " << v << '\n';
  man.flush();
  if (!man) throw DataError("failed while writing manifest for " + path.string());
}

Archive read_archive(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "SFCK", 4) != 0) {
    throw DataError("not a checkpoint archive: " + path.string());
  }
  const std::uint32_t version = get_u32(in, path);
  if (version != kArchiveVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version) + " in " + path.string());
  }
  Archive archive;
  const std::uint32_t count = get_u32(in, path);
  std::vector<unsigned char> buf;
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::uint32_t name_len = get_u32(in, path);
    if (name_len > 4096) throw DataError("corrupt checkpoint entry name in " + path.string());
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw DataError("truncated checkpoint " + path.string());
    const std::uint32_t rank = get_u32(in, path);
    if (rank > 8) throw DataError("corrupt checkpoint entry '" + name + "'");
    Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(static_cast<int>(get_u32(in, path)));
    Tensor t(shape);
    buf.resize(t.size() * 4);
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
      throw DataError("truncated checkpoint entry '" + name + "' in " + path.string());
    }
    for (std::size_t i = 0; i < t.size(); ++i) {
      const std::uint32_t bits = static_cast<std::uint32_t>(buf[4 * i]) | (static_cast<std::uint32_t>(buf[4 * i + 1]) << 8) |
                                 (static_cast<std::uint32_t>(buf[4 * i + 2]) << 16) |
                                 (static_cast<std::uint32_t>(buf[4 * i + 3]) << 24);
      t[i] = static_cast<real>(std::bit_cast<float>(bits));
    }
    archive.arrays.emplace(std::move(name), std::move(t));
  }

  std::ifstream man(manifest_path(path));
  std::string line;
  while (man && std::getline(man, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    archive.manifest.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return archive;
}

}  // namespace styleforge
