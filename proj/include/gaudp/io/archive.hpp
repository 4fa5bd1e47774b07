#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gaudp/io/tensor_io.hpp"

namespace gaudp::io {

// Container for a group of named tensors plus one JSON metadata record.
// Layout: magic "GDAR", u8 version, metadata (u32 length + UTF-8 JSON),
// u32 entry count, then per entry: u32 name length, name, GDTN blob.
// Entry order is preserved, so save(load(x)) is byte-identical.
class Archive {
 public:
  static constexpr std::uint8_t kVersion = 1;

  void set_metadata(const nlohmann::ordered_json& meta);
  nlohmann::ordered_json metadata() const;

  void add(const std::string& name, AnyTensor t);
  void add(const std::string& name, const nn::Tensor32& t) { add(name, AnyTensor::wrap(t)); }
  void add(const std::string& name, const nn::Tensor64& t) { add(name, AnyTensor::wrap(t)); }

  bool has(const std::string& name) const;
  const AnyTensor& get(const std::string& name) const;
  const std::vector<std::pair<std::string, AnyTensor>>& entries() const { return entries_; }

  void save(const std::filesystem::path& path) const;
  static Archive load(const std::filesystem::path& path);

 private:
  std::string metadata_json_ = "{}";
  std::vector<std::pair<std::string, AnyTensor>> entries_;
};

}  // namespace gaudp::io
