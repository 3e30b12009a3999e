#include <limits>

#include "citygen/dataset.hpp"
#include "citygen/parallel.hpp"

namespace citygen::dataset {

Annotation project_annotations(const layout::CityLayout& layout,
                               std::span<const layout::BuildingInstance> instances,
                               const CameraIntrinsics& intr, const CameraPose& pose, int threads) {
  intr.validate();
  pose.validate();
  const auto owner = layout::instance_id_raster(layout.width(), layout.height(), instances);
  Annotation out{Raster<std::uint8_t>(intr.width, intr.height, 0), Raster<std::uint32_t>(intr.width, intr.height, 0),
                 DepthImage(intr.width, intr.height, std::numeric_limits<double>::infinity())};
  parallel_for(0, intr.height, threads, [&](int y) {
    for (int x = 0; x < intr.width; ++x) {
      const auto hit = render::first_hit(layout, pose.position, render::pixel_direction(intr, pose, x, y));
      if (!hit) continue;
      out.semantic(x, y) = static_cast<std::uint8_t>(hit->label);
      out.depth(x, y) = hit->t;
      if (hit->label == SemanticClass::kBuilding) out.instance(x, y) = owner(hit->i, hit->j);
    }
  });
  return out;
}

}  // namespace citygen::dataset
