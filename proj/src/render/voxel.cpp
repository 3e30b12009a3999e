#include <algorithm>
#include <cmath>

#include "citygen/errors.hpp"
#include "citygen/render.hpp"

namespace citygen::render {

std::optional<VoxelHit> first_hit(const layout::CityLayout& layout, const Vec3& s, const Vec3& d, double t_max) {
  const int W = layout.width(), H = layout.height();
  if (W == 0 || H == 0) return std::nullopt;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const double lo[3] = {0, 0, 0};
  const double hi[3] = {static_cast<double>(W), static_cast<double>(H),
                        static_cast<double>(layout.max_height() + 1)};

  // Clip against the layout's bounding box.
  double t0 = 0, t1 = t_max;
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0) {
      if (s[a] < lo[a] || s[a] >= hi[a]) return std::nullopt;
      continue;
    }
    double ta = (lo[a] - s[a]) / d[a], tb = (hi[a] - s[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (!(t0 < t1)) return std::nullopt;

  const Vec3 start = s + d * t0;
  int cell[3], stepv[3];
  double tmax[3], tdelta[3];
  for (int a = 0; a < 3; ++a) {
    cell[a] = std::clamp(static_cast<int>(std::floor(start[a])), 0, static_cast<int>(hi[a]) - 1);
    if (d[a] > 0) {
      stepv[a] = 1;
      tmax[a] = (cell[a] + 1 - s[a]) / d[a];
      tdelta[a] = 1.0 / d[a];
    } else if (d[a] < 0) {
      stepv[a] = -1;
      tmax[a] = (cell[a] - s[a]) / d[a];
      tdelta[a] = -1.0 / d[a];
    } else {
      stepv[a] = 0;
      tmax[a] = kInf;
      tdelta[a] = kInf;
    }
  }
  double t_enter = t0;
  for (;;) {
    const auto cls = layout.at(cell[0], cell[1], cell[2]);
    if (cls != SemanticClass::kNull) return VoxelHit{cell[0], cell[1], cell[2], t_enter, cls};
    int a = 0;
    if (tmax[1] < tmax[a]) a = 1;
    if (tmax[2] < tmax[a]) a = 2;
    if (tmax[a] >= t1) return std::nullopt;
    cell[a] += stepv[a];
    if (cell[a] < 0 || cell[a] >= static_cast<int>(hi[a])) return std::nullopt;
    t_enter = tmax[a];
    tmax[a] += tdelta[a];
  }
}

}  // namespace citygen::render
