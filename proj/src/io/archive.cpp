#include "gaudp/io/archive.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "gaudp/common.hpp"

namespace gaudp::io {

namespace {
constexpr char kMagic[4] = {'G', 'D', 'A', 'R'};

void put_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw ConfigError("archive: truncated stream");
  return v;
}
}  // namespace

void Archive::set_metadata(const nlohmann::ordered_json& meta) { metadata_json_ = meta.dump(); }

nlohmann::ordered_json Archive::metadata() const {
  return nlohmann::ordered_json::parse(metadata_json_);
}

void Archive::add(const std::string& name, AnyTensor t) {
  for (auto& [n, _] : entries_)
    if (n == name) throw ConfigError("archive: duplicate entry " + name);
  entries_.emplace_back(name, std::move(t));
}

bool Archive::has(const std::string& name) const {
  for (auto& [n, _] : entries_)
    if (n == name) return true;
  return false;
}

const AnyTensor& Archive::get(const std::string& name) const {
  for (auto& [n, t] : entries_)
    if (n == name) return t;
  throw ConfigError("archive: missing entry " + name);
}

void Archive::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("archive: cannot open " + path.string() + " for writing");
  os.write(kMagic, 4);
  os.write(reinterpret_cast<const char*>(&kVersion), 1);
  put_u32(os, static_cast<std::uint32_t>(metadata_json_.size()));
  os.write(metadata_json_.data(), static_cast<std::streamsize>(metadata_json_.size()));
  put_u32(os, static_cast<std::uint32_t>(entries_.size()));
  for (const auto& [name, tensor] : entries_) {
    put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_tensor(os, tensor);
  }
  if (!os) throw ConfigError("archive: write failed for " + path.string());
}

Archive Archive::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("archive: cannot open " + path.string());
  char magic[4] = {};
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw ConfigError("archive: bad magic in " + path.string());
  std::uint8_t version = 0;
  is.read(reinterpret_cast<char*>(&version), 1);
  if (!is || version != kVersion)
    throw ConfigError("archive: unsupported version in " + path.string());

  Archive a;
  std::uint32_t meta_len = get_u32(is);
  a.metadata_json_.resize(meta_len);
  is.read(a.metadata_json_.data(), meta_len);
  std::uint32_t count = get_u32(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t name_len = get_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) throw ConfigError("archive: truncated entry name");
    a.entries_.emplace_back(std::move(name), read_tensor(is));
  }
  return a;
}

}  // namespace gaudp::io
