#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "citygen/image_io.hpp"
#include "citygen/raster.hpp"

namespace citygen {

// Semantic labels. Codes 0..6 are the map classes; facade/roof exist only
// inside building-instance windows and are never stored in a SemanticMap.
enum class SemanticClass : std::uint8_t {
  kNull = 0,
  kRoad = 1,
  kBuilding = 2,
  kGreenLand = 3,
  kConstruction = 4,
  kWater = 5,
  kOthers = 6,
  kFacade = 7,
  kRoof = 8,
};

inline constexpr int kNumMapClasses = 7;
inline constexpr int kNumLabels = 9;

constexpr int to_int(SemanticClass c) { return static_cast<int>(c); }
constexpr bool is_map_class(int code) { return code >= 0 && code < kNumMapClasses; }

std::string_view class_name(SemanticClass c);
// Accepts names ("roads", "buildings", "green_lands", ...) or numeric codes.
std::optional<SemanticClass> parse_class(std::string_view text);

// Display palette (roads red, buildings yellow, green lands green,
// construction cyan, water blue, others gray), extended with facade/roof.
const io::Palette& semantic_palette();

namespace geo {

inline constexpr double kMaxLatitude = 85.051128779806604;
inline constexpr double kEarthCircumference = 40075016.686;
inline constexpr int kTileSize = 256;
inline constexpr int kDefaultZoom = 18;

struct PixelCoord {
  double x = 0, y = 0;
};

// Global Web-Mercator (EPSG:3857) pixel coordinates with 256-pixel tiles.
PixelCoord lonlat_to_pixel(double lon, double lat, int zoom);
std::pair<double, double> pixel_to_lonlat(double x, double y, int zoom);
double meters_per_pixel(int zoom, double lat);

struct RasterConfig {
  int zoom = kDefaultZoom;
  PixelCoord origin;  // global pixel of the raster's top-left corner
  int width = 0;
  int height = 0;
  std::uint64_t seed = 0;

  // Latitude at the raster's center row, used for the meter/voxel scale.
  double center_latitude() const;
  double meters_per_voxel() const;
};

using SemanticMap = Raster<std::uint8_t>;   // SemanticClass codes
using HeightField = Raster<std::uint16_t>;  // voxel units

struct LonLat {
  double lon = 0, lat = 0;
};

enum class GeometryKind { kPolygon, kPolyline };

struct GeoFeature {
  GeometryKind kind = GeometryKind::kPolygon;
  // Polygons: rings[0] is the outer ring, the rest are holes; each ring is
  // closed (first == last). Polylines: each entry is one line string.
  std::vector<std::vector<LonLat>> rings;
  SemanticClass cls = SemanticClass::kOthers;
  std::optional<double> height_m;
  std::optional<double> width_m;  // stroke width for polylines
  int source_index = -1;          // position in the parsed collection
};

struct GeoVectorSet {
  std::vector<GeoFeature> features;
};

// Checks coordinate bounds, ring closure, self-intersection and required
// building heights. Throws ValidationError naming the offending feature.
void validate(const GeoVectorSet& vectors);

// Parses a GeoJSON FeatureCollection (Polygon, MultiPolygon, LineString,
// MultiLineString) using properties.class / .height / .width, then validates.
GeoVectorSet parse_geojson(std::string_view text);
GeoVectorSet load_geojson(const std::filesystem::path& path);

struct RasterizedLayout {
  SemanticMap semantic;
  HeightField height;
  RasterConfig config;
};

// Overlap priority (higher wins): others < green < construction < water <
// roads < buildings. Returns the rank used for that ordering.
int class_priority(SemanticClass c);

RasterizedLayout rasterize(const GeoVectorSet& vectors, const RasterConfig& config);

// Cells whose centers fall inside the ring (even-odd; the ring is closed
// implicitly). Vertices are in raster cell coordinates.
Raster<std::uint8_t> polygon_mask(const std::vector<PixelCoord>& ring, int width, int height);

// Classic 2D gradient-lattice noise: two octaves, 32-cell base period,
// permutation table shuffled from a seed. Output roughly in [-1, 1].
class PerlinNoise {
 public:
  static constexpr int kPeriod = 32;

  explicit PerlinNoise(std::uint64_t seed);
  // Explicit gradient table (256 entries); used to build degenerate fields.
  PerlinNoise(std::array<std::uint8_t, 256> permutation,
              std::array<std::array<double, 2>, 256> gradients);

  double octave(double x, double y) const;
  double sample(double x, double y) const;  // two summed octaves, normalized

 private:
  std::array<std::uint8_t, 512> perm_{};
  std::array<std::array<double, 2>, 256> grad_{};
};

inline constexpr int kTreeHeightMin = 8;
inline constexpr int kTreeHeightMax = 16;

// Tree heights in [8, 16] for every cell where mask is nonzero; zero
// elsewhere. Noise is evaluated at (offset + cell) so adjacent rasters agree.
HeightField perlin_height(const Raster<std::uint8_t>& mask, const PerlinNoise& noise,
                          PixelCoord offset = {});
HeightField perlin_height(const Raster<std::uint8_t>& mask, std::uint64_t seed,
                          PixelCoord offset = {});

// Raster exchange: <stem>_semantic.png (paletted), <stem>_height.png
// (16-bit gray) and <stem>_meta.txt (zoom, origin, seed, size).
void save_layout(const std::filesystem::path& dir, const RasterizedLayout& layout,
                 const std::string& stem = "layout");
RasterizedLayout load_layout(const std::filesystem::path& dir, const std::string& stem = "layout");

}  // namespace geo
}  // namespace citygen
