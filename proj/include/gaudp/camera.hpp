#pragma once

#include <nlohmann/json_fwd.hpp>

#include "gaudp/geometry.hpp"

namespace gaudp {

// Pinhole camera: pixel-unit intrinsics and a world-to-camera rigid pose.
// Camera frame: +z forward, +x right, +y down; pixel (col,row) = (x,y).
struct CameraModel {
  double fx = 1, fy = 1, cx = 0, cy = 0;
  int width = 0, height = 0;
  RigidTransform pose_world_to_cam;
  double z_near = 0.01, z_far = 100.0;

  void validate() const;

  Vec3 to_cam(const Vec3& p_world) const { return pose_world_to_cam.apply(p_world); }

  // Projects a camera-frame point; caller checks z > 0.
  Vec2 project(const Vec3& p_cam) const {
    return Vec2(fx * p_cam.x() / p_cam.z() + cx, fy * p_cam.y() / p_cam.z() + cy);
  }

  // Camera-frame point of pixel (col,row) at view-space depth z.
  Vec3 unproject(double col, double row, double z) const {
    return Vec3((col - cx) / fx * z, (row - cy) / fy * z, z);
  }

  // Camera placed at `eye` looking toward `target`, `up_hint` roughly up in
  // world (+z up world convention).
  static CameraModel look_at(const Vec3& eye, const Vec3& target, double fx, double fy, int width,
                             int height, const Vec3& up_hint = Vec3(0, 0, 1));
};

nlohmann::ordered_json camera_to_json(const CameraModel& cam);
CameraModel camera_from_json(const nlohmann::json& j);

}  // namespace gaudp
