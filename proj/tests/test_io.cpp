#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "gaudp/io/archive.hpp"
#include "gaudp/io/image_io.hpp"
#include "gaudp/io/tensor_io.hpp"
#include "gaudp/nn/rng.hpp"

using namespace gaudp;
namespace fs = std::filesystem;

namespace {
fs::path temp_dir() {
  fs::path p = fs::temp_directory_path() / "gaudp_io_test";
  fs::create_directories(p);
  return p;
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::vector<char>((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}
}  // namespace

TEST_CASE("tensor round-trip is bitwise") {
  nn::Rng rng(7);
  nn::Tensor64 t({3, 5, 2});
  for (auto& v : t.data) v = rng.normal();
  fs::path p = temp_dir() / "t.gdtn";
  io::write_tensor_file(p, t);
  auto back = io::read_tensor_file(p);
  REQUIRE(back.dtype == io::Dtype::F64);
  CHECK(back.f64.shape == t.shape);
  CHECK(back.f64.data == t.data);

  nn::Tensor32 f({4});
  for (auto& v : f.data) v = static_cast<float>(rng.normal());
  io::write_tensor_file(p, f);
  auto back32 = io::read_tensor_file(p);
  REQUIRE(back32.dtype == io::Dtype::F32);
  CHECK(back32.f32.data == f.data);
}

TEST_CASE("corrupted magic is rejected loudly") {
  fs::path p = temp_dir() / "bad.gdtn";
  nn::Tensor64 t({2});
  io::write_tensor_file(p, t);
  {
    std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XXXX", 4);
  }
  CHECK_THROWS_AS(io::read_tensor_file(p), ConfigError);
}

TEST_CASE("truncated payload is rejected") {
  fs::path p = temp_dir() / "trunc.gdtn";
  nn::Tensor64 t({8});
  io::write_tensor_file(p, t);
  fs::resize_file(p, fs::file_size(p) - 9);
  CHECK_THROWS_AS(io::read_tensor_file(p), ConfigError);
}

TEST_CASE("archive preserves entries, metadata and bytes") {
  io::Archive a;
  nlohmann::ordered_json meta;
  meta["frame"] = "camera_local";
  meta["views"] = {0, 1};
  a.set_metadata(meta);
  nn::Rng rng(3);
  nn::Tensor64 t1({4, 2});
  for (auto& v : t1.data) v = rng.normal();
  nn::Tensor32 t2({3});
  for (auto& v : t2.data) v = static_cast<float>(rng.uniform());
  a.add("alpha", t1);
  a.add("beta", t2);

  fs::path p = temp_dir() / "a.gdar";
  a.save(p);
  io::Archive b = io::Archive::load(p);
  CHECK(b.metadata()["frame"] == "camera_local");
  CHECK(b.get("alpha").f64.data == t1.data);
  CHECK(b.get("beta").f32.data == t2.data);

  // load-then-save byte identity
  fs::path p2 = temp_dir() / "b.gdar";
  b.save(p2);
  CHECK(slurp(p) == slurp(p2));

  CHECK_THROWS_AS(b.get("gamma"), ConfigError);
}

TEST_CASE("ppm writer clamps and quantizes") {
  nn::Tensor64 img({2, 2, 3});
  img.data = {0, 0.5, 1, 1.2, -0.3, 0.25, 1, 1, 1, 0, 0, 0};
  fs::path p = temp_dir() / "img.ppm";
  io::write_ppm(p, img);
  auto bytes = slurp(p);
  std::string header(bytes.begin(), bytes.begin() + 11);
  CHECK(header == "P6\n2 2\n255\n");
  REQUIRE(bytes.size() == 11 + 12);
  auto px = [&](int i) { return static_cast<unsigned char>(bytes[11 + i]); };
  CHECK(px(0) == 0);
  CHECK(px(1) == 128);
  CHECK(px(2) == 255);
  CHECK(px(3) == 255);  // clamped
  CHECK(px(4) == 0);    // clamped
}
