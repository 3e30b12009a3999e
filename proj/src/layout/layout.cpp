#include "citygen/layout.hpp"

#include <algorithm>
#include <string>

#include "citygen/errors.hpp"

namespace citygen::layout {

CityLayout::CityLayout(SemanticMap semantic, HeightField height)
    : semantic_(std::move(semantic)), height_(std::move(height)) {
  if (!semantic_.same_shape(height_))
    throw ValidationError("semantic map and height field dimensions differ");
  for (std::uint8_t v : semantic_.data())
    if (!is_map_class(v)) throw ValidationError("invalid semantic class code " + std::to_string(v));
  for (std::uint16_t h : height_.data()) max_height_ = std::max<int>(max_height_, h);
}

void LocalWindow::refresh_max_height() {
  max_height = 0;
  for (std::uint16_t h : height_patch.data()) max_height = std::max<int>(max_height, h);
}

LocalWindow extract_window(const CityLayout& layout, Cell center, WindowDims dims) {
  if (dims.width <= 0 || dims.height <= 0 || dims.depth <= 0)
    throw ValidationError("window dimensions must be positive");
  LocalWindow w;
  w.dims = dims;
  w.origin = {center.x - dims.width / 2, center.y - dims.height / 2};
  w.semantic_patch = Raster<std::uint8_t>(dims.width, dims.height, to_int(SemanticClass::kOthers));
  w.height_patch = Raster<std::uint16_t>(dims.width, dims.height, 0);
  w.instance_patch = Raster<std::uint32_t>(dims.width, dims.height, 0);
  const int x0 = std::max(0, w.origin.x), x1 = std::min(layout.width(), w.origin.x + dims.width);
  const int y0 = std::max(0, w.origin.y), y1 = std::min(layout.height(), w.origin.y + dims.height);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      w.semantic_patch(x - w.origin.x, y - w.origin.y) = layout.semantic()(x, y);
      w.height_patch(x - w.origin.x, y - w.origin.y) = layout.heights()(x, y);
    }
  }
  w.refresh_max_height();
  return w;
}

std::vector<BuildingInstance> instantiate_buildings(const SemanticMap& semantic) {
  const int W = semantic.width(), H = semantic.height();
  constexpr auto kBuilding = static_cast<std::uint8_t>(SemanticClass::kBuilding);
  Raster<std::uint32_t> label(W, H, 0);
  std::vector<BuildingInstance> out;
  std::vector<Cell> stack;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      if (semantic(x, y) != kBuilding || label(x, y) != 0) continue;
      BuildingInstance inst;
      inst.id = static_cast<std::uint32_t>(out.size() + 1);
      inst.bbox_min = {x, y};
      inst.bbox_max = {x, y};
      label(x, y) = inst.id;
      stack.push_back({x, y});
      while (!stack.empty()) {
        const Cell c = stack.back();
        stack.pop_back();
        inst.footprint.push_back(c);
        inst.bbox_min = {std::min(inst.bbox_min.x, c.x), std::min(inst.bbox_min.y, c.y)};
        inst.bbox_max = {std::max(inst.bbox_max.x, c.x), std::max(inst.bbox_max.y, c.y)};
        constexpr int kDx[] = {1, -1, 0, 0}, kDy[] = {0, 0, 1, -1};
        for (int d = 0; d < 4; ++d) {
          const int nx = c.x + kDx[d], ny = c.y + kDy[d];
          if (semantic.contains(nx, ny) && semantic(nx, ny) == kBuilding && label(nx, ny) == 0) {
            label(nx, ny) = inst.id;
            stack.push_back({nx, ny});
          }
        }
      }
      std::sort(inst.footprint.begin(), inst.footprint.end(),
                [](Cell a, Cell b) { return a.y != b.y ? a.y < b.y : a.x < b.x; });
      inst.center = {(inst.bbox_min.x + inst.bbox_max.x) / 2, (inst.bbox_min.y + inst.bbox_max.y) / 2};
      out.push_back(std::move(inst));
    }
  }
  return out;
}

std::vector<BuildingInstance> instantiate_buildings(const CityLayout& layout) {
  auto out = instantiate_buildings(layout.semantic());
  for (auto& inst : out)
    for (const Cell& c : inst.footprint)
      inst.height_max = std::max<int>(inst.height_max, layout.heights()(c.x, c.y));
  return out;
}

Raster<std::uint32_t> instance_id_raster(int width, int height,
                                         std::span<const BuildingInstance> instances) {
  Raster<std::uint32_t> out(width, height, 0);
  for (const auto& inst : instances)
    for (const Cell& c : inst.footprint)
      if (out.contains(c.x, c.y)) out(c.x, c.y) = inst.id;
  return out;
}

LocalWindow relabel_instance_window(const LocalWindow& window, const BuildingInstance& target,
                                    std::span<const BuildingInstance> all) {
  const bool overlaps = std::any_of(target.footprint.begin(), target.footprint.end(), [&](Cell c) {
    return window.contains_layout_cell(c.x, c.y);
  });
  if (!overlaps)
    throw ValidationError("building instance " + std::to_string(target.id) +
                          " does not overlap the window");
  LocalWindow w = window;
  for (const auto& inst : all) {
    if (inst.id == target.id) continue;
    for (const Cell& c : inst.footprint) {
      if (!w.contains_layout_cell(c.x, c.y)) continue;
      const int lx = c.x - w.origin.x, ly = c.y - w.origin.y;
      w.semantic_patch(lx, ly) = to_int(SemanticClass::kNull);
      w.height_patch(lx, ly) = 0;
      w.instance_patch(lx, ly) = 0;
    }
  }
  for (const Cell& c : target.footprint) {
    if (!w.contains_layout_cell(c.x, c.y)) continue;
    const int lx = c.x - w.origin.x, ly = c.y - w.origin.y;
    w.semantic_patch(lx, ly) = to_int(SemanticClass::kFacade);
    w.instance_patch(lx, ly) = target.id;
  }
  w.target_instance = target.id;
  w.refresh_max_height();
  return w;
}

LocalWindow building_window(const CityLayout& layout, const BuildingInstance& target,
                            std::span<const BuildingInstance> all, WindowDims dims) {
  return relabel_instance_window(extract_window(layout, target.center, dims), target, all);
}

CityLayout edit_building_height(const CityLayout& layout, const BuildingInstance& instance,
                                int new_height) {
  if (new_height < 1) throw ValidationError("building height must be at least 1 voxel");
  if (new_height > 65535) throw ValidationError("building height exceeds 65535 voxels");
  if (instance.footprint.empty()) throw NotFoundError("unknown building instance");
  constexpr auto kBuilding = static_cast<std::uint8_t>(SemanticClass::kBuilding);
  for (const Cell& c : instance.footprint)
    if (!layout.semantic().contains(c.x, c.y) || layout.semantic()(c.x, c.y) != kBuilding)
      throw NotFoundError("building instance " + std::to_string(instance.id) +
                          " does not match this layout");
  HeightField h = layout.heights();
  for (const Cell& c : instance.footprint) h(c.x, c.y) = static_cast<std::uint16_t>(new_height);
  return CityLayout(layout.semantic(), std::move(h));
}

CityLayout edit_building_height(const CityLayout& layout,
                                std::span<const BuildingInstance> instances, std::uint32_t id,
                                int new_height) {
  auto it = std::find_if(instances.begin(), instances.end(),
                         [&](const BuildingInstance& b) { return b.id == id; });
  if (it == instances.end()) throw NotFoundError("unknown building instance " + std::to_string(id));
  return edit_building_height(layout, *it, new_height);
}

}  // namespace citygen::layout
