#include "gaudp/io/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "gaudp/common.hpp"

namespace gaudp::io {

void write_ppm(const std::filesystem::path& path, const nn::Tensor64& rgb) {
  if (rgb.rank() != 3 || rgb.dim(2) != 3) throw ConfigError("write_ppm: expected [H,W,3]");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("write_ppm: cannot open " + path.string());
  std::size_t h = rgb.dim(0), w = rgb.dim(1);
  os << "P6\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> row(w * 3);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w * 3; ++x) {
      double v = rgb.data[y * w * 3 + x];
      v = std::clamp(v, 0.0, 1.0);
      row[x] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
}

void write_depth_raw(const std::filesystem::path& path, const nn::Tensor64& depth) {
  if (depth.rank() != 2) throw ConfigError("write_depth_raw: expected [H,W]");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("write_depth_raw: cannot open " + path.string());
  for (double v : depth.data) {
    float f = static_cast<float>(v);
    os.write(reinterpret_cast<const char*>(&f), sizeof(f));
  }
}

}  // namespace gaudp::io
