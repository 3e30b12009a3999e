#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "citygen/layout.hpp"
#include "citygen/math.hpp"
#include "citygen/mlp.hpp"
#include "citygen/param.hpp"
#include "citygen/raster.hpp"

namespace citygen::render {

// Pixel centers sit at integer image coordinates: pixel (x, y) looks through
// image point (x, y).
struct CameraIntrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;

  void validate() const;
  // Symmetric camera with the given vertical field of view (degrees).
  static CameraIntrinsics from_fov(int width, int height, double fov_y_deg);
  // Same field of view at another resolution.
  CameraIntrinsics resized(int new_width, int new_height) const;
};

// World -> camera rotation with rows (right, down, forward): camera x points
// right in the image, y down, z along the optical axis. World z is up.
struct CameraPose {
  Mat3 rotation;
  Vec3 position;

  Vec3 forward() const { return rotation.row(2); }
  void validate() const;
};

// Camera at `eye` looking at `target`. When the view is parallel to `up`
// (nadir shots) world +y is used to fix the roll.
CameraPose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = {0, 0, 1});

struct Projection {
  double u = 0, v = 0;  // pixel coordinates
  double depth = 0;     // camera-space z
};

// Pinhole projection; nullopt for points at or behind the camera plane.
std::optional<Projection> project(const CameraIntrinsics& intr, const CameraPose& pose, const Vec3& world);

struct Ray {
  Vec3 origin;
  Vec3 dir;  // unit
  double near = 0;
  double far = std::numeric_limits<double>::infinity();
};

Vec3 pixel_direction(const CameraIntrinsics& intr, const CameraPose& pose, double u, double v);

struct RayGrid {
  int width = 0, height = 0;
  std::vector<Ray> rays;  // row-major
  const Ray& at(int x, int y) const { return rays[static_cast<std::size_t>(y) * width + x]; }
};

RayGrid make_rays(const CameraIntrinsics& intr, const CameraPose& pose);

// Ordered camera path; frame i uses poses[i] with intrinsics[i].
struct Trajectory {
  std::vector<CameraPose> poses;
  std::vector<CameraIntrinsics> intrinsics;

  std::size_t size() const { return poses.size(); }
  void push_back(const CameraPose& pose, const CameraIntrinsics& intr) {
    poses.push_back(pose);
    intrinsics.push_back(intr);
  }
  // >= 2 poses, aligned lists, one shared resolution.
  void validate() const;
};

// First occupied layout voxel along origin + t * dir (dir unit) for t >= 0.
struct VoxelHit {
  int i = 0, j = 0, k = 0;
  double t = 0;  // ray distance at voxel entry
  SemanticClass label = SemanticClass::kNull;
};
std::optional<VoxelHit> first_hit(const layout::CityLayout& layout, const Vec3& origin, const Vec3& dir,
                                  double t_max = std::numeric_limits<double>::infinity());

struct RenderSettings {
  double step = 0.5;  // voxels
  int max_steps = 1 << 16;
  double stop_transmittance = 1e-3;
  Rgb sky{0.72f, 0.80f, 0.90f};
  int threads = 0;  // 0: hardware concurrency

  void validate() const;
};

// Per-sample feature vector at a position in field coordinates.
class FeatureSource {
 public:
  virtual ~FeatureSource() = default;
  virtual int size() const = 0;
  virtual void evaluate(const Vec3& p, std::span<double> out) const = 0;
};

// Background features: hash-grid lookup conditioned on f_G. Positions are
// clamped into the grid's cube.
class HashGridFeatures final : public FeatureSource {
 public:
  HashGridFeatures(const param::HashGridTable& table, const param::GlobalFeature& f_G);
  int size() const override { return table_.config().output_size(); }
  void evaluate(const Vec3& p, std::span<double> out) const override;

 private:
  const param::HashGridTable& table_;
  std::vector<std::int64_t> quantized_;
};

// Building features: sincos(concat(f_B, p_z)). Positions are relative to the
// instance center; `half_extent` maps them back to window cells.
class BuildingFeatures final : public FeatureSource {
 public:
  BuildingFeatures(const param::PixelFeatureMap& f_B, double depth, Vec3 half_extent,
                   int levels = param::kSinCosLevels);
  int size() const override { return 2 * levels_ * (f_B_.channels + 1); }
  void evaluate(const Vec3& p, std::span<double> out) const override;

 private:
  const param::PixelFeatureMap& f_B_;
  double depth_;
  Vec3 half_;
  int levels_;
};

class RadianceField {
 public:
  virtual ~RadianceField() = default;
  virtual double density(std::span<const double> feature, SemanticClass label) const = 0;
  virtual Rgb color(std::span<const double> feature, const param::StyleCode* style, SemanticClass label) const = 0;
};

// sigma = kappa for occupied voxels; color = per-class base color shaded by
// a fixed projection of the feature and a tint from the style code.
class ProceduralField final : public RadianceField {
 public:
  explicit ProceduralField(double kappa = 40.0, double feature_gain = 1.0);
  double density(std::span<const double> feature, SemanticClass label) const override;
  Rgb color(std::span<const double> feature, const param::StyleCode* style, SemanticClass label) const override;

 private:
  double kappa_;
  double gain_;
};

// Weights-backed heads. density: feature -> 1 (clamped at 0, zero for null
// labels). color: [feature, first style_dims of z, one-hot label (9)] -> 3,
// clamped to [0, 1].
class MlpField final : public RadianceField {
 public:
  MlpField(MlpWeights density_head, MlpWeights color_head, int style_dims = 0);
  double density(std::span<const double> feature, SemanticClass label) const override;
  Rgb color(std::span<const double> feature, const param::StyleCode* style, SemanticClass label) const override;

 private:
  MlpWeights density_;
  MlpWeights color_;
  int style_dims_;
};

struct RenderOutput {
  ColorImage color;
  DepthImage depth;  // expected ray distance; infinity where alpha == 0
  Raster<float> alpha;
  Raster<std::uint8_t> semantic;  // SemanticClass codes, null where alpha < 0.5
  Raster<std::uint32_t> instance;

  RenderOutput() = default;
  RenderOutput(int width, int height, Rgb sky);
};

struct MarchOptions {
  const param::StyleCode* style = nullptr;
  // Field coordinates are world positions minus this shift (building
  // windows pass the instance center at z = 0). Defaults to the window origin.
  std::optional<Vec3> origin_shift;
  // Pixels with a zero entry are skipped (left as sky).
  const Raster<std::uint8_t>* roi = nullptr;
};

// Per-sample record of one ray, for diagnostics and tests.
struct RayTrace {
  std::vector<double> t, transmittance, weight;
  std::vector<SemanticClass> label;
  double final_transmittance = 1.0;
};

// Rays are in world voxel coordinates; the window's origin places it in the
// world. `features` may be null when the field ignores features.
RenderOutput march(const layout::LocalWindow& window, const RayGrid& rays, const FeatureSource* features,
                   const RadianceField& field, const RenderSettings& settings, const MarchOptions& options = {});

RayTrace march_ray(const layout::LocalWindow& window, const Ray& ray, const FeatureSource* features,
                   const RadianceField& field, const RenderSettings& settings, const MarchOptions& options = {});

// ---- relighting ------------------------------------------------------------

Raster<Vec3> surface_normals(const DepthImage& depth, const CameraIntrinsics& intr, const CameraPose& pose);

// max(0, n . (-light_dir)); zero normals shade to 0.
Raster<double> lambertian_shade(const Raster<Vec3>& normals, const Vec3& light_dir);

// 1 where the point sees the light through the layout, 0 when an occupied
// voxel lies toward the light. light_dir is the direction light travels.
std::vector<std::uint8_t> shadow_map(const layout::CityLayout& layout, const Vec3& light_dir,
                                     std::span<const Vec3> points, double bias = 0.5);

// Multiplies color by ambient + (1 - ambient) * shade * visibility.
ColorImage relight(const ColorImage& color, const Raster<double>& shade, const Raster<std::uint8_t>& visibility,
                   double ambient = 0.35);

}  // namespace citygen::render
