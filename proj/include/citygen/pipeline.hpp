#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "citygen/composite.hpp"
#include "citygen/layout.hpp"
#include "citygen/param.hpp"
#include "citygen/render.hpp"

namespace citygen::pipeline {

struct SceneConfig {
  std::uint64_t seed = 0;
  param::HashGridConfig grid;
  render::RenderSettings settings;
  double kappa = 40.0;
  double background_gain = 2e4;  // hash features are ~1e-4
  double building_gain = 2.0;
  bool render_buildings = true;
  layout::WindowDims background_window = layout::kBackgroundWindow;
  layout::WindowDims building_window = layout::kBuildingWindow;
};

// Background render of a window around the view center, one render per
// visible building instance restricted to its screen-space bounding box,
// and depth-tested composition of the two.
class SceneRenderer {
 public:
  SceneRenderer(layout::CityLayout layout, SceneConfig config);

  const layout::CityLayout& layout() const { return layout_; }
  const std::vector<layout::BuildingInstance>& instances() const { return instances_; }
  const SceneConfig& config() const { return config_; }

  param::StyleCode style(std::uint32_t id) const;
  void set_style(std::uint32_t id, param::StyleCode z) { styles_[id] = std::move(z); }

  compose::CompositeResult render(const render::CameraIntrinsics& intr, const render::CameraPose& pose) const;

  // Ground point on the optical axis, clamped into the layout.
  layout::Cell view_center(const render::CameraPose& pose) const;

  // Screen-space rectangle covering the instance's box; nullopt when it
  // falls outside the image.
  std::optional<param::CellRect> screen_rect(const layout::BuildingInstance& b, const render::CameraIntrinsics& intr,
                                             const render::CameraPose& pose) const;

 private:
  render::RenderOutput render_background(const render::RayGrid& rays, const render::CameraPose& pose) const;
  render::RenderOutput render_building(const layout::BuildingInstance& b, const render::RayGrid& rays,
                                       const param::CellRect& roi) const;

  layout::CityLayout layout_;
  SceneConfig config_;
  std::vector<layout::BuildingInstance> instances_;
  std::shared_ptr<const param::HashGridTable> table_;
  param::ProceduralEncoder encoder_;
  std::map<std::uint32_t, param::StyleCode> styles_;
};

}  // namespace citygen::pipeline
