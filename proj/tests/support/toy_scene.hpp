#pragma once

#include <cstdint>
#include <vector>

#include "gaudp/camera.hpp"
#include "gaudp/gaussian.hpp"
#include "gaudp/renderer.hpp"

namespace gaudp::testsupport {

// Random raw Gaussians hovering in front of a canonical camera, sized so the
// rasterization window padding keeps finite differences smooth.
std::vector<RawGaussian> random_scene(int n, std::uint64_t seed, bool with_sh = false);

CameraModel canonical_camera(int size, double focal = 12.0);

RenderBatch make_batch(const std::vector<RawGaussian>& raws);

// Max relative error between analytic renderer gradients and central finite
// differences of a fixed random image loss, over all parameter classes.
double renderer_fd_max_rel(int n_gaussians, int image, std::uint64_t seed, double h,
                           bool with_sh = false);

// Ground-truth Gaussian scene for reconstruction experiments: a textured
// ground slab plus random blobs, and an arc of cameras looking at it.
struct ToyScene {
  std::vector<RawGaussian> gaussians;
  std::vector<CameraModel> cameras;  // train cameras first, then held-out
  int n_train = 0;

  RenderBatch batch() const;
};

ToyScene make_toy_scene(std::uint64_t seed, int image_size, int n_train = 4, int n_heldout = 2);

}  // namespace gaudp::testsupport
