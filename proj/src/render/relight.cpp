#include <algorithm>
#include <cmath>

#include "citygen/errors.hpp"
#include "citygen/render.hpp"

namespace citygen::render {

Raster<Vec3> surface_normals(const DepthImage& depth, const CameraIntrinsics& intr, const CameraPose& pose) {
  if (depth.width() != intr.width || depth.height() != intr.height)
    throw ValidationError("normals: depth size does not match the camera");
  const int w = depth.width(), h = depth.height();
  Raster<Vec3> points(w, h);
  Raster<std::uint8_t> valid(w, h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (std::isfinite(depth(x, y))) {
        points(x, y) = pose.position + pixel_direction(intr, pose, x, y) * depth(x, y);
        valid(x, y) = 1;
      }

  auto diff = [&](int x, int y, int dx, int dy, Vec3& out) {
    const bool fwd = valid.contains(x + dx, y + dy) && valid(x + dx, y + dy);
    const bool back = valid.contains(x - dx, y - dy) && valid(x - dx, y - dy);
    if (fwd && back) out = points(x + dx, y + dy) - points(x - dx, y - dy);
    else if (fwd) out = points(x + dx, y + dy) - points(x, y);
    else if (back) out = points(x, y) - points(x - dx, y - dy);
    else return false;
    return true;
  };

  Raster<Vec3> normals(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!valid(x, y)) continue;
      Vec3 du, dv;
      if (!diff(x, y, 1, 0, du) || !diff(x, y, 0, 1, dv)) continue;
      Vec3 n = normalize(cross(du, dv));
      if (dot(n, pose.position - points(x, y)) < 0) n = -n;
      normals(x, y) = n;
    }
  }
  return normals;
}

Raster<double> lambertian_shade(const Raster<Vec3>& normals, const Vec3& light_dir) {
  if (std::abs(norm(light_dir) - 1.0) > 1e-6) throw ValidationError("shade: light direction must be unit length");
  Raster<double> out(normals.width(), normals.height(), 0.0);
  for (std::size_t i = 0; i < out.size(); ++i)
    out.storage()[i] = std::max(0.0, -dot(normals.storage()[i], light_dir));
  return out;
}

std::vector<std::uint8_t> shadow_map(const layout::CityLayout& layout, const Vec3& light_dir,
                                     std::span<const Vec3> points, double bias) {
  if (!(light_dir.z < 0)) throw DomainError("shadow_map: light must point downward");
  const Vec3 d = -normalize(light_dir);  // toward the light
  std::vector<std::uint8_t> out(points.size(), 1);
  for (std::size_t q = 0; q < points.size(); ++q)
    if (first_hit(layout, points[q] + d * bias, d)) out[q] = 0;
  return out;
}

ColorImage relight(const ColorImage& color, const Raster<double>& shade, const Raster<std::uint8_t>& visibility,
                   double ambient) {
  if (!color.same_shape(shade) || !color.same_shape(visibility)) throw ValidationError("relight: size mismatch");
  ColorImage out = color;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double f = ambient + (1.0 - ambient) * shade.storage()[i] * visibility.storage()[i];
    auto& c = out.storage()[i];
    c = Rgb{static_cast<float>(std::clamp(c.r * f, 0.0, 1.0)), static_cast<float>(std::clamp(c.g * f, 0.0, 1.0)),
            static_cast<float>(std::clamp(c.b * f, 0.0, 1.0))};
  }
  return out;
}

}  // namespace citygen::render
