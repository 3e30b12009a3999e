#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "citygen/image_io.hpp"
#include "citygen/layout.hpp"
#include "citygen/raster.hpp"
#include "citygen/render.hpp"

namespace citygen::dataset {

using render::CameraIntrinsics;
using render::CameraPose;
using render::Trajectory;

inline constexpr double kMinOrbitRadiusM = 125.0;
inline constexpr double kMaxOrbitRadiusM = 813.0;
inline constexpr double kMinOrbitAltitudeM = 112.0;
inline constexpr double kMaxOrbitAltitudeM = 884.0;

struct OrbitSpec {
  double center_x = 0, center_y = 0;  // layout cells
  double radius_m = 400;
  double altitude_m = 300;
  int frames = 60;
  CameraIntrinsics intrinsics = CameraIntrinsics::from_fov(960, 540, 45.0);
  double meters_per_pixel = 1.0;  // meters per layout cell
  double start_angle_deg = 0;
  bool allow_out_of_range = false;  // skip the radius/altitude range check

  void validate() const;
};

// Frames equally spaced on the circle around (center, altitude), each looking
// at (center, 0). Throws DomainError when the center lies outside the layout.
Trajectory orbit_trajectory(const OrbitSpec& spec, int layout_width, int layout_height);

// Evaluation preset: 40 frames at 960x540.
OrbitSpec evaluation_orbit(double center_x, double center_y, double meters_per_pixel = 1.0);

struct Keypoint {
  Vec3 position;
  Vec3 target;
  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

// Positions and targets interpolated linearly over each segment:
// (points - 1) * steps + 1 poses.
Trajectory keypoint_trajectory(std::span<const Keypoint> points, int steps_per_segment,
                               const CameraIntrinsics& intrinsics);

struct Annotation {
  Raster<std::uint8_t> semantic;   // SemanticClass codes, null for misses
  Raster<std::uint32_t> instance;  // building instance id, 0 elsewhere
  DepthImage depth;                // ray distance to the first hit, inf for misses
};

// First-hit ray casting through the layout volume.
Annotation project_annotations(const layout::CityLayout& layout,
                               std::span<const layout::BuildingInstance> instances,
                               const CameraIntrinsics& intr, const CameraPose& pose, int threads = 0);

struct Frame {
  ColorImage color;
  Raster<std::uint8_t> semantic;
  Raster<std::uint32_t> instance;
};

struct ExportedFile {
  std::string path;  // relative to the dataset directory
  std::string sha256;
};

struct Manifest {
  std::size_t frames = 0;
  int width = 0, height = 0;
  std::string config_hash;
  std::vector<ExportedFile> files;
};

// Writes frame_%05d_{color,semantic,instance}.png, frame_%05d_camera.txt and
// manifest.json. `config_text` is hashed into the manifest.
Manifest export_dataset(const Trajectory& trajectory, std::span<const Frame> frames,
                        const std::filesystem::path& out_dir, const std::string& config_text = "",
                        int threads = 0);

struct ImportedDataset {
  Trajectory trajectory;
  std::vector<Frame> frames;  // colors decoded from 8 bits
  Manifest manifest;
};

// Reads an exported directory back; checksums are verified.
ImportedDataset import_dataset(const std::filesystem::path& dir);

// Camera file text for one frame, and its parser.
std::string format_camera(const CameraIntrinsics& intr, const CameraPose& pose);
void parse_camera(const std::string& text, CameraIntrinsics& intr, CameraPose& pose);


}  // namespace citygen::dataset
