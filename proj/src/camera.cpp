#include "gaudp/camera.hpp"

#include <nlohmann/json.hpp>

#include "gaudp/common.hpp"

namespace gaudp {

void CameraModel::validate() const {
  if (fx <= 0 || fy <= 0) throw ConfigError("camera: fx, fy must be positive");
  if (width <= 0 || height <= 0) throw ConfigError("camera: empty image plane");
  if (!(0 < z_near && z_near < z_far)) throw ConfigError("camera: need 0 < z_near < z_far");
  Mat3 rtr = pose_world_to_cam.rot.transpose() * pose_world_to_cam.rot;
  if ((rtr - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6)
    throw ConfigError("camera: rotation is not orthonormal");
}

CameraModel CameraModel::look_at(const Vec3& eye, const Vec3& target, double fx, double fy,
                                 int width, int height, const Vec3& up_hint) {
  Vec3 fwd = (target - eye).normalized();
  Vec3 right = fwd.cross(up_hint).normalized();
  Vec3 down = fwd.cross(right);  // +y down in camera frame

  CameraModel cam;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = (width - 1) / 2.0;
  cam.cy = (height - 1) / 2.0;
  cam.width = width;
  cam.height = height;
  Mat3 r_cam_rows;
  r_cam_rows.row(0) = right.transpose();
  r_cam_rows.row(1) = down.transpose();
  r_cam_rows.row(2) = fwd.transpose();
  cam.pose_world_to_cam.rot = r_cam_rows;
  cam.pose_world_to_cam.trans = -(r_cam_rows * eye);
  return cam;
}

nlohmann::ordered_json camera_to_json(const CameraModel& cam) {
  nlohmann::ordered_json j;
  j["fx"] = cam.fx;
  j["fy"] = cam.fy;
  j["cx"] = cam.cx;
  j["cy"] = cam.cy;
  j["width"] = cam.width;
  j["height"] = cam.height;
  j["z_near"] = cam.z_near;
  j["z_far"] = cam.z_far;
  std::vector<double> rot(9), trans(3);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot[r * 3 + c] = cam.pose_world_to_cam.rot(r, c);
  for (int r = 0; r < 3; ++r) trans[r] = cam.pose_world_to_cam.trans[r];
  j["rot_world_to_cam"] = rot;
  j["trans_world_to_cam"] = trans;
  return j;
}

CameraModel camera_from_json(const nlohmann::json& j) {
  CameraModel cam;
  cam.fx = j.at("fx").get<double>();
  cam.fy = j.at("fy").get<double>();
  cam.cx = j.at("cx").get<double>();
  cam.cy = j.at("cy").get<double>();
  cam.width = j.at("width").get<int>();
  cam.height = j.at("height").get<int>();
  cam.z_near = j.at("z_near").get<double>();
  cam.z_far = j.at("z_far").get<double>();
  auto rot = j.at("rot_world_to_cam").get<std::vector<double>>();
  auto trans = j.at("trans_world_to_cam").get<std::vector<double>>();
  if (rot.size() != 9 || trans.size() != 3) throw ConfigError("camera: malformed pose arrays");
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) cam.pose_world_to_cam.rot(r, c) = rot[r * 3 + c];
  for (int r = 0; r < 3; ++r) cam.pose_world_to_cam.trans[r] = trans[r];
  cam.validate();
  return cam;
}

}  // namespace gaudp
