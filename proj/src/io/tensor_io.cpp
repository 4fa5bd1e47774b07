#include "gaudp/io/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "gaudp/common.hpp"

namespace gaudp::io {

static_assert(std::endian::native == std::endian::little,
              "tensor IO assumes a little-endian host");

namespace {
constexpr char kMagic[4] = {'G', 'D', 'T', 'N'};

void put_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t get_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw ConfigError("tensor IO: truncated header");
  return v;
}
}  // namespace

void write_tensor(std::ostream& os, const AnyTensor& t) {
  os.write(kMagic, 4);
  std::uint8_t code = static_cast<std::uint8_t>(t.dtype);
  os.write(reinterpret_cast<const char*>(&code), 1);
  const auto& shape = t.dtype == Dtype::F32 ? t.f32.shape : t.f64.shape;
  std::uint8_t rank = static_cast<std::uint8_t>(shape.size());
  os.write(reinterpret_cast<const char*>(&rank), 1);
  for (std::size_t d : shape) put_u64(os, d);
  if (t.dtype == Dtype::F32) {
    os.write(reinterpret_cast<const char*>(t.f32.data.data()),
             static_cast<std::streamsize>(t.f32.data.size() * sizeof(float)));
  } else {
    os.write(reinterpret_cast<const char*>(t.f64.data.data()),
             static_cast<std::streamsize>(t.f64.data.size() * sizeof(double)));
  }
  if (!os) throw ConfigError("tensor IO: write failed");
}

AnyTensor read_tensor(std::istream& is) {
  char magic[4] = {};
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw ConfigError("tensor IO: bad magic (expected GDTN)");
  std::uint8_t code = 0, rank = 0;
  is.read(reinterpret_cast<char*>(&code), 1);
  is.read(reinterpret_cast<char*>(&rank), 1);
  if (!is) throw ConfigError("tensor IO: truncated header");
  if (code > 1) throw ConfigError("tensor IO: unknown dtype code " + std::to_string(code));
  std::vector<std::size_t> shape(rank);
  for (auto& d : shape) d = static_cast<std::size_t>(get_u64(is));
  std::size_t n = nn::Tensor64::numel_of(shape);

  AnyTensor out;
  out.dtype = static_cast<Dtype>(code);
  if (out.dtype == Dtype::F32) {
    out.f32.shape = shape;
    out.f32.data.resize(n);
    is.read(reinterpret_cast<char*>(out.f32.data.data()),
            static_cast<std::streamsize>(n * sizeof(float)));
  } else {
    out.f64.shape = shape;
    out.f64.data.resize(n);
    is.read(reinterpret_cast<char*>(out.f64.data.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
  }
  if (!is) throw ConfigError("tensor IO: truncated payload");
  return out;
}

void write_tensor_file(const std::filesystem::path& path, const AnyTensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("tensor IO: cannot open " + path.string() + " for writing");
  write_tensor(os, t);
}

AnyTensor read_tensor_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("tensor IO: cannot open " + path.string());
  return read_tensor(is);
}

}  // namespace gaudp::io
