#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <variant>

#include "gaudp/nn/tensor.hpp"

namespace gaudp::io {

// GDTN tensor file: magic "GDTN", u8 dtype code (0=f32, 1=f64), u8 rank,
// rank little-endian u64 dims, then the raw little-endian payload.

enum class Dtype : std::uint8_t { F32 = 0, F64 = 1 };

struct AnyTensor {
  Dtype dtype = Dtype::F32;
  nn::Tensor32 f32;
  nn::Tensor64 f64;

  static AnyTensor wrap(nn::Tensor32 t) {
    AnyTensor a;
    a.dtype = Dtype::F32;
    a.f32 = std::move(t);
    return a;
  }
  static AnyTensor wrap(nn::Tensor64 t) {
    AnyTensor a;
    a.dtype = Dtype::F64;
    a.f64 = std::move(t);
    return a;
  }

  nn::Tensor64 as_f64() const { return dtype == Dtype::F64 ? f64 : f32.cast<double>(); }
  nn::Tensor32 as_f32() const { return dtype == Dtype::F32 ? f32 : f64.cast<float>(); }
};

void write_tensor(std::ostream& os, const AnyTensor& t);
AnyTensor read_tensor(std::istream& is);

void write_tensor_file(const std::filesystem::path& path, const AnyTensor& t);
AnyTensor read_tensor_file(const std::filesystem::path& path);

inline void write_tensor_file(const std::filesystem::path& p, const nn::Tensor32& t) {
  write_tensor_file(p, AnyTensor::wrap(t));
}
inline void write_tensor_file(const std::filesystem::path& p, const nn::Tensor64& t) {
  write_tensor_file(p, AnyTensor::wrap(t));
}

}  // namespace gaudp::io
