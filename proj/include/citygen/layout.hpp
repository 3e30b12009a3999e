#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "citygen/geo.hpp"
#include "citygen/raster.hpp"

namespace citygen::layout {

using geo::HeightField;
using geo::SemanticMap;

struct Cell {
  int x = 0, y = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

// Implicit 3D semantic volume: column (i, j) holds S(i, j) for k <= H(i, j)
// and null above. Only S and H are stored.
class CityLayout {
 public:
  CityLayout() = default;
  CityLayout(SemanticMap semantic, HeightField height);

  int width() const { return semantic_.width(); }
  int height() const { return semantic_.height(); }
  const SemanticMap& semantic() const { return semantic_; }
  const HeightField& heights() const { return height_; }
  int max_height() const { return max_height_; }

  SemanticClass at(int i, int j, int k) const {
    if (!semantic_.contains(i, j) || k < 0) return SemanticClass::kNull;
    return k <= height_(i, j) ? static_cast<SemanticClass>(semantic_(i, j)) : SemanticClass::kNull;
  }

  friend bool operator==(const CityLayout& a, const CityLayout& b) {
    return a.semantic_ == b.semantic_ && a.height_ == b.height_;
  }

 private:
  SemanticMap semantic_;
  HeightField height_;
  int max_height_ = 0;
};

inline SemanticClass layout_at(const CityLayout& layout, int i, int j, int k) {
  return layout.at(i, j, k);
}

struct WindowDims {
  int height = 0;  // rows (N^H)
  int width = 0;   // columns (N^W)
  int depth = 0;   // vertical voxels (N^D)
};

inline constexpr WindowDims kBackgroundWindow{1536, 1536, 640};
inline constexpr WindowDims kBuildingWindow{672, 672, 640};

// Cropped (S, H) patch plus the instance owning each column. Cells past the
// layout bounds hold (others, 0); queries past the window itself are null.
struct LocalWindow {
  Cell origin;  // layout coordinates of the window's (0, 0) cell
  WindowDims dims;
  Raster<std::uint8_t> semantic_patch;
  Raster<std::uint16_t> height_patch;
  Raster<std::uint32_t> instance_patch;
  std::uint32_t target_instance = 0;  // nonzero after relabel_instance_window
  int max_height = 0;

  // Local-coordinate query; facade columns report roof at their top voxel.
  SemanticClass at(int i, int j, int k) const {
    if (!semantic_patch.contains(i, j) || k < 0 || k >= dims.depth) return SemanticClass::kNull;
    const int h = height_patch(i, j);
    if (k > h) return SemanticClass::kNull;
    const auto cls = static_cast<SemanticClass>(semantic_patch(i, j));
    if (cls == SemanticClass::kFacade && k == h) return SemanticClass::kRoof;
    return cls;
  }

  std::uint32_t instance_at(int i, int j) const {
    return instance_patch.contains(i, j) ? instance_patch(i, j) : 0;
  }

  bool contains_layout_cell(int x, int y) const {
    return semantic_patch.contains(x - origin.x, y - origin.y);
  }

  void refresh_max_height();
};

// Window of the given dims whose (dims.width/2, dims.height/2) cell sits at
// `center` in layout coordinates.
LocalWindow extract_window(const CityLayout& layout, Cell center, WindowDims dims);

struct BuildingInstance {
  std::uint32_t id = 0;
  Cell center;  // bounding-box center, rounded down
  std::vector<Cell> footprint;
  Cell bbox_min, bbox_max;
  int height_max = 0;

  friend bool operator==(const BuildingInstance&, const BuildingInstance&) = default;
};

// One instance per 4-connected component of building cells, ids 1..n in
// row-major order of each component's first cell.
std::vector<BuildingInstance> instantiate_buildings(const SemanticMap& semantic);
std::vector<BuildingInstance> instantiate_buildings(const CityLayout& layout);

// Per-cell owning instance id (0 for non-building cells).
Raster<std::uint32_t> instance_id_raster(int width, int height,
                                         std::span<const BuildingInstance> instances);

// Marks the target footprint as facade (roof on each column's top voxel) and
// erases every other instance to (null, 0). Throws ValidationError when the
// target does not overlap the window.
LocalWindow relabel_instance_window(const LocalWindow& window, const BuildingInstance& target,
                                    std::span<const BuildingInstance> all);

// Window of kBuildingWindow dims centred on the instance, relabeled.
LocalWindow building_window(const CityLayout& layout, const BuildingInstance& target,
                            std::span<const BuildingInstance> all,
                            WindowDims dims = kBuildingWindow);

// Copy of `layout` with the instance's footprint raised/lowered to
// new_height. Throws ValidationError for new_height < 1 and NotFoundError if
// the footprint is not a building of this layout.
CityLayout edit_building_height(const CityLayout& layout, const BuildingInstance& instance,
                                int new_height);
CityLayout edit_building_height(const CityLayout& layout,
                                std::span<const BuildingInstance> instances, std::uint32_t id,
                                int new_height);

}  // namespace citygen::layout
