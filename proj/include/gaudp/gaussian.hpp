#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "gaudp/geometry.hpp"
#include "gaudp/io/archive.hpp"

namespace gaudp {

// One anisotropic primitive in activated form. Invariants: |rot| = 1,
// scale > 0, opacity in (0,1), color in [0,1]^3.
struct Gaussian {
  Vec3 mu = Vec3::Zero();
  Vec3 scale = Vec3::Ones();          // per-axis standard deviations
  Vec4 rot = Vec4(1, 0, 0, 0);        // unit quaternion (w,x,y,z), w >= 0
  double opacity = 0.5;
  Vec3 color = Vec3::Zero();
  std::optional<Mat3> sh;             // degree-1 coefficients, rows = RGB, cols = basis

  bool valid(double tol = 1e-6) const;
};

// Unconstrained parameterization: gradient descent cannot leave the valid
// set because activation maps all finite values into it.
struct RawGaussian {
  Vec3 mu = Vec3::Zero();
  Vec3 log_scale = Vec3::Zero();
  Vec4 rot_raw = Vec4(1, 0, 0, 0);
  double opacity_logit = 0.0;
  Vec3 color_raw = Vec3::Zero();
  std::optional<Mat3> sh;

  bool all_finite() const;
};

// Channel layout of a raw Gaussian viewed as a feature vector (SH degree 0):
// [mu(3), log_scale(3), quat(4), opacity_logit(1), color_raw(3)] = 14.
inline constexpr int kRawChannels = 14;

enum class Frame { CameraLocal, World };

// Pixel-aligned grid of raw Gaussians tagged with its view of origin.
struct GaussianMap {
  int view_id = 0;
  int height = 0, width = 0;
  Frame frame = Frame::CameraLocal;
  std::vector<RawGaussian> grid;  // row-major, height*width entries

  RawGaussian& at(int row, int col) { return grid[static_cast<std::size_t>(row) * width + col]; }
  const RawGaussian& at(int row, int col) const {
    return grid[static_cast<std::size_t>(row) * width + col];
  }
  std::size_t size() const { return grid.size(); }
};

struct GaussianField {
  std::vector<GaussianMap> maps;  // one per view, view_ids = {0..N-1}
  Frame frame = Frame::CameraLocal;

  std::size_t total_gaussians() const;
  void validate() const;
};

struct FlatEntry {
  int view_id;
  int pixel_row;
  int pixel_col;
  const RawGaussian* raw;
};

double sigmoid(double x);
double logit(double p);

// Raw -> activated. Throws NumericalError when |rot_raw| < 1e-8.
Gaussian activate(const RawGaussian& raw);

// Sigma = R diag(scale^2) R^T.
Mat3 covariance(const Gaussian& g);

// Re-expresses every map through its per-view rigid transform and flips the
// frame tag. Covariances rotate with the means: quaternions are composed,
// scales are unchanged. Returns false (leaving the field untouched) when the
// field is already in the target frame.
bool transform_field(GaussianField& field, const std::vector<RigidTransform>& per_view,
                     Frame target);

// Row-major within view, views ascending. Entry index of (v,y,x) in a field
// of uniform HxW maps is v*H*W + y*W + x.
std::vector<FlatEntry> flatten(const GaussianField& field);
GaussianField unflatten(const std::vector<FlatEntry>& entries, int height, int width, Frame frame);

// Field <-> archive: one named tensor per parameter class plus metadata
// {frame, view_ids, height, width}.
io::Archive field_to_archive(const GaussianField& field);
GaussianField field_from_archive(const io::Archive& archive);

}  // namespace gaudp
