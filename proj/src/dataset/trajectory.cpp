#include <cmath>

#include "citygen/dataset.hpp"
#include "citygen/errors.hpp"

namespace citygen::dataset {

void OrbitSpec::validate() const {
  if (frames < 2) throw ValidationError("orbit: at least 2 frames required");
  if (!(meters_per_pixel > 0) || !std::isfinite(meters_per_pixel))
    throw ValidationError("orbit: meters_per_pixel must be positive");
  if (!(radius_m > 0) || !(altitude_m > 0) || !std::isfinite(radius_m) || !std::isfinite(altitude_m))
    throw ValidationError("orbit: radius and altitude must be positive");
  if (!allow_out_of_range) {
    if (radius_m < kMinOrbitRadiusM || radius_m > kMaxOrbitRadiusM)
      throw ValidationError("orbit: radius outside [125, 813] m");
    if (altitude_m < kMinOrbitAltitudeM || altitude_m > kMaxOrbitAltitudeM)
      throw ValidationError("orbit: altitude outside [112, 884] m");
  }
  intrinsics.validate();
}

Trajectory orbit_trajectory(const OrbitSpec& spec, int layout_width, int layout_height) {
  spec.validate();
  if (!(spec.center_x >= 0 && spec.center_x <= layout_width && spec.center_y >= 0 && spec.center_y <= layout_height))
    throw DomainError("orbit: center lies outside the layout");
  const double r = spec.radius_m / spec.meters_per_pixel;
  const double z = spec.altitude_m / spec.meters_per_pixel;
  const Vec3 target{spec.center_x, spec.center_y, 0};
  Trajectory out;
  for (int i = 0; i < spec.frames; ++i) {
    const double theta = (spec.start_angle_deg + 360.0 * i / spec.frames) * kPi / 180.0;
    const Vec3 eye{spec.center_x + r * std::cos(theta), spec.center_y + r * std::sin(theta), z};
    out.push_back(render::look_at(eye, target), spec.intrinsics);
  }
  return out;
}

OrbitSpec evaluation_orbit(double center_x, double center_y, double meters_per_pixel) {
  OrbitSpec s;
  s.center_x = center_x;
  s.center_y = center_y;
  s.frames = 40;
  s.intrinsics = CameraIntrinsics::from_fov(960, 540, 45.0);
  s.meters_per_pixel = meters_per_pixel;
  return s;
}

Trajectory keypoint_trajectory(std::span<const Keypoint> points, int steps_per_segment,
                               const CameraIntrinsics& intrinsics) {
  if (points.size() < 2) throw ValidationError("keypoint trajectory needs at least 2 keypoints");
  if (steps_per_segment < 1) throw ValidationError("steps per segment must be >= 1");
  intrinsics.validate();
  for (std::size_t i = 0; i + 1 < points.size(); ++i)
    if (points[i] == points[i + 1]) throw ValidationError("duplicate consecutive keypoints");
  auto lerp = [](const Vec3& a, const Vec3& b, double u) { return a * (1.0 - u) + b * u; };
  Trajectory out;
  for (std::size_t s = 0; s + 1 < points.size(); ++s) {
    for (int k = 0; k < steps_per_segment; ++k) {
      const double u = static_cast<double>(k) / steps_per_segment;
      out.push_back(render::look_at(lerp(points[s].position, points[s + 1].position, u),
                                    lerp(points[s].target, points[s + 1].target, u)),
                    intrinsics);
    }
  }
  out.push_back(render::look_at(points.back().position, points.back().target), intrinsics);
  return out;
}

}  // namespace citygen::dataset
