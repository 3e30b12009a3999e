#include <cmath>

#include "citygen/errors.hpp"
#include "citygen/render.hpp"

namespace citygen::render {

void CameraIntrinsics::validate() const {
  if (!(fx > 0) || !(fy > 0) || !std::isfinite(fx) || !std::isfinite(fy))
    throw ValidationError("camera: focal lengths must be positive");
  if (width <= 0 || height <= 0) throw ValidationError("camera: image size must be positive");
  if (!(cx >= 0 && cx <= width && cy >= 0 && cy <= height))
    throw ValidationError("camera: principal point outside the image");
}

CameraIntrinsics CameraIntrinsics::from_fov(int width, int height, double fov_y_deg) {
  if (!(fov_y_deg > 0 && fov_y_deg < 180)) throw ValidationError("camera: field of view must be in (0, 180)");
  CameraIntrinsics k;
  k.width = width;
  k.height = height;
  k.fy = 0.5 * height / std::tan(0.5 * fov_y_deg * kPi / 180.0);
  k.fx = k.fy;
  k.cx = 0.5 * (width - 1);
  k.cy = 0.5 * (height - 1);
  k.validate();
  return k;
}

CameraIntrinsics CameraIntrinsics::resized(int new_width, int new_height) const {
  validate();
  if (new_width <= 0 || new_height <= 0) throw ValidationError("camera: image size must be positive");
  const double sx = static_cast<double>(new_width) / width;
  const double sy = static_cast<double>(new_height) / height;
  CameraIntrinsics k;
  k.width = new_width;
  k.height = new_height;
  k.fx = fx * sx;
  k.fy = fy * sy;
  k.cx = (cx + 0.5) * sx - 0.5;
  k.cy = (cy + 0.5) * sy - 0.5;
  return k;
}

void CameraPose::validate() const {
  const Mat3 g = rotation.transposed() * rotation;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      if (std::abs(g(r, c) - (r == c ? 1.0 : 0.0)) > 1e-9) throw ValidationError("camera: rotation is not orthonormal");
  if (std::abs(rotation.determinant() - 1.0) > 1e-9) throw ValidationError("camera: rotation has det != +1");
  if (!std::isfinite(position.x) || !std::isfinite(position.y) || !std::isfinite(position.z))
    throw ValidationError("camera: position is not finite");
}

CameraPose look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 f = normalize(target - eye);
  if (norm(f) == 0) throw DegenerateInputError("look_at: eye and target coincide");
  Vec3 right = cross(f, normalize(up));
  if (norm(right) < 1e-9) right = cross(f, Vec3{0, 1, 0});
  if (norm(right) < 1e-9) right = cross(f, Vec3{1, 0, 0});
  right = normalize(right);
  const Vec3 down = cross(f, right);
  return CameraPose{Mat3::from_rows(right, down, f), eye};
}

std::optional<Projection> project(const CameraIntrinsics& intr, const CameraPose& pose, const Vec3& world) {
  const Vec3 pc = pose.rotation * (world - pose.position);
  if (!(pc.z > 1e-12)) return std::nullopt;
  return Projection{intr.fx * pc.x / pc.z + intr.cx, intr.fy * pc.y / pc.z + intr.cy, pc.z};
}

Vec3 pixel_direction(const CameraIntrinsics& intr, const CameraPose& pose, double u, double v) {
  const Vec3 d{(u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0};
  return normalize(pose.rotation.transposed() * d);
}

RayGrid make_rays(const CameraIntrinsics& intr, const CameraPose& pose) {
  intr.validate();
  pose.validate();
  RayGrid g;
  g.width = intr.width;
  g.height = intr.height;
  g.rays.reserve(static_cast<std::size_t>(g.width) * g.height);
  const Mat3 to_world = pose.rotation.transposed();
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      const Vec3 d{(x - intr.cx) / intr.fx, (y - intr.cy) / intr.fy, 1.0};
      g.rays.push_back(Ray{pose.position, normalize(to_world * d)});
    }
  }
  return g;
}

}  // namespace citygen::render

namespace citygen::render {

void Trajectory::validate() const {
  if (poses.size() != intrinsics.size()) throw ValidationError("trajectory: pose and intrinsics counts differ");
  if (poses.size() < 2) throw ValidationError("trajectory needs at least 2 poses");
  for (std::size_t i = 0; i < poses.size(); ++i) {
    poses[i].validate();
    intrinsics[i].validate();
    if (intrinsics[i].width != intrinsics[0].width || intrinsics[i].height != intrinsics[0].height)
      throw ValidationError("trajectory: intrinsics must share one resolution");
  }
}

}  // namespace citygen::render
