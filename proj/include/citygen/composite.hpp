#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "citygen/param.hpp"
#include "citygen/raster.hpp"
#include "citygen/render.hpp"

namespace citygen::compose {

using render::RenderOutput;
using render::Trajectory;

using MaskImage = Raster<std::uint8_t>;  // values 0/1

struct MaskSet {
  MaskImage background;
  std::vector<MaskImage> buildings;
  // 0 = background, i + 1 = building i.
  Raster<std::int32_t> winner;
};

// Per pixel the nearest source with alpha >= 0.5 wins; background wins where
// none qualifies. Equal depths go to the building with the lowest index.
MaskSet derive_masks(const RenderOutput& bg, std::span<const RenderOutput> buildings);

struct CompositeResult {
  ColorImage image;
  MaskSet masks;
  Raster<std::int32_t> winner;
  // Annotation channels carried from the winning source.
  DepthImage depth;
  Raster<std::uint8_t> semantic;
  Raster<std::uint32_t> instance;
};

// I = I_G * M_G + sum_i I_Bi * M_Bi. Masks must be binary and sum to 1.
CompositeResult composite(const RenderOutput& bg, std::span<const RenderOutput> buildings, const MaskSet& masks);

// Streaming form of derive_masks + composite: sources are added one at a
// time and only the nearest building so far is kept per pixel. finish()
// returns the same result as composite(bg, all, derive_masks(bg, all)).
class Compositor {
 public:
  explicit Compositor(RenderOutput background);
  void add(const RenderOutput& building);
  std::size_t size() const { return count_; }
  CompositeResult finish() const;

 private:
  RenderOutput bg_;
  RenderOutput best_;
  Raster<std::int32_t> best_index_;  // 0: no qualifying building yet
  std::size_t count_ = 0;
};

// Building render restricted to its own instance: alpha and depth are
// cleared where instance != id, so context geometry never wins the depth test.
RenderOutput isolate_instance(const RenderOutput& building, std::uint32_t id);

// Mean squared difference of the two maps after normalizing each to zero
// mean and unit variance over the mask (empty mask: all pixels).
double depth_error(const DepthImage& pred, const DepthImage& ref, const MaskImage& mask = {});

struct CameraErrorOptions {
  // Adds the mean squared rotation geodesic angle (radians).
  bool rotation_term = false;
};

// Camera centers of both trajectories are centered and scaled to unit RMS
// radius; returns the mean squared distance of corresponding centers.
double camera_error(const Trajectory& a, const Trajectory& b, const CameraErrorOptions& options = {});

param::StyleCode style_interpolate(const param::StyleCode& z1, const param::StyleCode& z2, double t);

}  // namespace citygen::compose
