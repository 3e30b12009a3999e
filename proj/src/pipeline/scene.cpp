#include <algorithm>
#include <cmath>

#include "citygen/errors.hpp"
#include "citygen/pipeline.hpp"
#include "citygen/rng.hpp"

namespace citygen::pipeline {

using render::CameraIntrinsics;
using render::CameraPose;
using render::RenderOutput;

SceneRenderer::SceneRenderer(layout::CityLayout layout, SceneConfig config)
    : layout_(std::move(layout)),
      config_(std::move(config)),
      instances_(layout::instantiate_buildings(layout_)),
      encoder_(hash_values(config_.seed, 0x454E43u), config_.background_window.depth) {
  if (layout_.width() == 0 || layout_.height() == 0) throw ValidationError("scene: empty layout");
  config_.grid.validate();
  config_.settings.validate();
  table_ = std::make_shared<const param::HashGridTable>(
      param::HashGridTable::random(config_.grid, hash_values(config_.seed, 0x475249u)));
}

param::StyleCode SceneRenderer::style(std::uint32_t id) const {
  const auto it = styles_.find(id);
  if (it != styles_.end()) return it->second;
  return param::StyleCode::random(hash_values(config_.seed, 0x5354594Cu, id));
}

layout::Cell SceneRenderer::view_center(const CameraPose& pose) const {
  const Vec3 f = pose.forward();
  double gx = 0.5 * layout_.width(), gy = 0.5 * layout_.height();
  if (f.z < 0) {
    const double t = -pose.position.z / f.z;
    gx = pose.position.x + f.x * t;
    gy = pose.position.y + f.y * t;
  }
  auto clampi = [](double v, int hi) { return static_cast<int>(std::clamp(std::floor(v), 0.0, hi - 1.0)); };
  return {clampi(gx, layout_.width()), clampi(gy, layout_.height())};
}

std::optional<param::CellRect> SceneRenderer::screen_rect(const layout::BuildingInstance& b,
                                                          const CameraIntrinsics& intr,
                                                          const CameraPose& pose) const {
  double u0 = std::numeric_limits<double>::infinity(), v0 = u0, u1 = -u0, v1 = -u0;
  int behind = 0;
  for (int c = 0; c < 8; ++c) {
    const Vec3 p{static_cast<double>(c & 1 ? b.bbox_max.x + 1 : b.bbox_min.x),
                 static_cast<double>(c & 2 ? b.bbox_max.y + 1 : b.bbox_min.y),
                 static_cast<double>(c & 4 ? b.height_max + 1 : 0)};
    const auto pr = render::project(intr, pose, p);
    if (!pr) {
      ++behind;
      continue;
    }
    u0 = std::min(u0, pr->u);
    u1 = std::max(u1, pr->u);
    v0 = std::min(v0, pr->v);
    v1 = std::max(v1, pr->v);
  }
  if (behind == 8) return std::nullopt;
  int x0 = 0, y0 = 0, x1 = intr.width - 1, y1 = intr.height - 1;
  if (behind == 0) {
    // Pixel centers sit on integers; one pixel of slack on every side.
    x0 = std::max(x0, static_cast<int>(std::max(-1.0, std::floor(u0) - 1)));
    y0 = std::max(y0, static_cast<int>(std::max(-1.0, std::floor(v0) - 1)));
    x1 = std::min(x1, static_cast<int>(std::min<double>(intr.width, std::ceil(u1) + 1)));
    y1 = std::min(y1, static_cast<int>(std::min<double>(intr.height, std::ceil(v1) + 1)));
  }
  if (x1 < x0 || y1 < y0) return std::nullopt;
  return param::CellRect{x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

RenderOutput SceneRenderer::render_background(const render::RayGrid& rays, const CameraPose& pose) const {
  const auto window = layout::extract_window(layout_, view_center(pose), config_.background_window);
  const auto f_G = encoder_.global(window.height_patch, window.semantic_patch);
  const render::HashGridFeatures features(*table_, f_G);
  const render::ProceduralField field(config_.kappa, config_.background_gain);
  return render::march(window, rays, &features, field, config_.settings);
}

RenderOutput SceneRenderer::render_building(const layout::BuildingInstance& b, const render::RayGrid& rays,
                                            const param::CellRect& roi) const {
  const auto& dims = config_.building_window;
  auto window = layout::building_window(layout_, b, instances_, dims);
  // Only the target footprint is rendered; context cells never reach the
  // composite.
  for (int y = 0; y < window.semantic_patch.height(); ++y)
    for (int x = 0; x < window.semantic_patch.width(); ++x)
      if (window.instance_patch(x, y) != b.id) {
        window.semantic_patch(x, y) = to_int(SemanticClass::kNull);
        window.height_patch(x, y) = 0;
      }
  window.refresh_max_height();

  const int rx0 = std::max(0, b.bbox_min.x - window.origin.x);
  const int ry0 = std::max(0, b.bbox_min.y - window.origin.y);
  const int rx1 = std::min(window.semantic_patch.width() - 1, b.bbox_max.x - window.origin.x);
  const int ry1 = std::min(window.semantic_patch.height() - 1, b.bbox_max.y - window.origin.y);
  const auto f_B = encoder_.local(window.height_patch, window.semantic_patch,
                                  param::CellRect{rx0, ry0, rx1 - rx0 + 1, ry1 - ry0 + 1});
  const Vec3 half{static_cast<double>(dims.width / 2), static_cast<double>(dims.height / 2), 0.0};
  const render::BuildingFeatures features(f_B, dims.depth, half);
  const render::ProceduralField field(config_.kappa, config_.building_gain);

  Raster<std::uint8_t> mask(rays.width, rays.height, 0);
  for (int y = roi.y0; y < roi.y0 + roi.height; ++y)
    for (int x = roi.x0; x < roi.x0 + roi.width; ++x) mask(x, y) = 1;
  const auto z = style(b.id);
  render::MarchOptions opt;
  opt.style = &z;
  opt.origin_shift = Vec3{static_cast<double>(b.center.x), static_cast<double>(b.center.y), 0.0};
  opt.roi = &mask;
  return compose::isolate_instance(render::march(window, rays, &features, field, config_.settings, opt), b.id);
}

compose::CompositeResult SceneRenderer::render(const CameraIntrinsics& intr, const CameraPose& pose) const {
  intr.validate();
  pose.validate();
  const auto rays = render::make_rays(intr, pose);
  compose::Compositor compositor(render_background(rays, pose));
  if (config_.render_buildings) {
    for (const auto& b : instances_) {
      const auto roi = screen_rect(b, intr, pose);
      if (roi) compositor.add(render_building(b, rays, *roi));
    }
  }
  return compositor.finish();
}

}  // namespace citygen::pipeline
