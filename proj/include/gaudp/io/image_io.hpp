#pragma once

#include <filesystem>

#include "gaudp/nn/tensor.hpp"

namespace gaudp::io {

// rgb: [H,W,3] in [0,1]; quantized to 8-bit binary PPM (P6).
void write_ppm(const std::filesystem::path& path, const nn::Tensor64& rgb);

// depth: [H,W]; raw 32-bit little-endian floats, row-major.
void write_depth_raw(const std::filesystem::path& path, const nn::Tensor64& depth);

}  // namespace gaudp::io
