#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "citygen/errors.hpp"
#include "citygen/geo.hpp"
#include "citygen/image_io.hpp"
#include "citygen/math.hpp"
#include "citygen/rng.hpp"

namespace citygen::geo {

namespace {

constexpr std::uint16_t kRoadHeight = 4;
// Minimum stroke half-width keeps one-pixel lines 4-connected.
constexpr double kMinHalfWidth = 0.7072;

struct Point {
  double x, y;
};

struct Cover {
  int rank = -1;
  std::uint16_t building_height = 0;
};

void mark(Cover& cell, SemanticClass cls, std::uint16_t height) {
  const int rank = class_priority(cls);
  if (rank > cell.rank) cell.rank = rank;
  if (cls == SemanticClass::kBuilding) cell.building_height = std::max(cell.building_height, height);
}

std::vector<std::vector<Point>> to_pixels(const GeoFeature& f, const RasterConfig& config) {
  std::vector<std::vector<Point>> out;
  for (const auto& ring : f.rings) {
    std::vector<Point> pts;
    pts.reserve(ring.size());
    for (const LonLat& p : ring) {
      const PixelCoord px = lonlat_to_pixel(p.lon, p.lat, config.zoom);
      pts.push_back({px.x - config.origin.x, px.y - config.origin.y});
    }
    out.push_back(std::move(pts));
  }
  return out;
}

// Even-odd scanline fill sampling cell centers.
template <typename Fn>
void fill_polygon(const std::vector<std::vector<Point>>& rings, int width, int height, Fn&& visit) {
  double ymin = std::numeric_limits<double>::max(), ymax = std::numeric_limits<double>::lowest();
  for (const auto& r : rings)
    for (const Point& p : r) {
      ymin = std::min(ymin, p.y);
      ymax = std::max(ymax, p.y);
    }
  const int y0 = std::max(0, static_cast<int>(std::floor(ymin)));
  const int y1 = std::min(height - 1, static_cast<int>(std::ceil(ymax)));
  std::vector<double> xs;
  for (int y = y0; y <= y1; ++y) {
    const double yc = y + 0.5;
    xs.clear();
    for (const auto& r : rings) {
      for (std::size_t i = 0; i + 1 < r.size(); ++i) {
        const Point a = r[i], b = r[i + 1];
        if ((a.y <= yc) == (b.y <= yc)) continue;
        xs.push_back(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
      }
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      const int xa = std::max(0, static_cast<int>(std::ceil(xs[k] - 0.5)));
      const int xb = std::min(width, static_cast<int>(std::ceil(xs[k + 1] - 0.5)));
      for (int x = xa; x < xb; ++x) visit(x, y);
    }
  }
}

template <typename Fn>
void stroke_segment(Point a, Point b, double half_width, int width, int height, Fn&& visit) {
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - half_width)));
  const int x1 = std::min(width - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + half_width)));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - half_width)));
  const int y1 = std::min(height - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + half_width)));
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double cx = x + 0.5, cy = y + 0.5;
      double t = len2 > 0 ? ((cx - a.x) * dx + (cy - a.y) * dy) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const double ex = a.x + t * dx - cx, ey = a.y + t * dy - cy;
      if (ex * ex + ey * ey <= half_width * half_width) visit(x, y);
    }
  }
}

}  // namespace

int class_priority(SemanticClass c) {
  switch (c) {
    case SemanticClass::kOthers: return 0;
    case SemanticClass::kGreenLand: return 1;
    case SemanticClass::kConstruction: return 2;
    case SemanticClass::kWater: return 3;
    case SemanticClass::kRoad: return 4;
    case SemanticClass::kBuilding: return 5;
    default: return -1;
  }
}

Raster<std::uint8_t> polygon_mask(const std::vector<PixelCoord>& ring, int width, int height) {
  if (ring.size() < 3) throw ValidationError("polygon needs at least 3 vertices");
  std::vector<Point> pts;
  for (const auto& p : ring) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw ValidationError("polygon vertex is not finite");
    pts.push_back({p.x, p.y});
  }
  pts.push_back(pts.front());
  Raster<std::uint8_t> out(width, height, 0);
  fill_polygon({pts}, width, height, [&](int x, int y) { out(x, y) = 1; });
  return out;
}

RasterizedLayout rasterize(const GeoVectorSet& vectors, const RasterConfig& config) {
  if (config.zoom < 0) throw ValidationError("zoom must be non-negative");
  if (config.width <= 0 || config.height <= 0) throw ValidationError("raster size must be positive");
  validate(vectors);

  const double mpv = config.meters_per_voxel();
  std::vector<Cover> cover(static_cast<std::size_t>(config.width) * config.height);
  auto cell = [&](int x, int y) -> Cover& {
    return cover[static_cast<std::size_t>(y) * config.width + x];
  };

  for (const GeoFeature& f : vectors.features) {
    const auto rings = to_pixels(f, config);
    std::uint16_t h = 0;
    if (f.cls == SemanticClass::kBuilding) {
      const double vox = std::ceil(*f.height_m / mpv);
      h = static_cast<std::uint16_t>(std::clamp(vox, 0.0, 65535.0));
    }
    auto visit = [&](int x, int y) { mark(cell(x, y), f.cls, h); };
    if (f.kind == GeometryKind::kPolygon) {
      fill_polygon(rings, config.width, config.height, visit);
    } else {
      const double half = std::max(kMinHalfWidth, f.width_m ? *f.width_m / mpv / 2.0 : 0.0);
      for (const auto& line : rings)
        for (std::size_t i = 0; i + 1 < line.size(); ++i)
          stroke_segment(line[i], line[i + 1], half, config.width, config.height, visit);
    }
  }

  static constexpr SemanticClass kByRank[] = {SemanticClass::kOthers, SemanticClass::kGreenLand,
                                              SemanticClass::kConstruction, SemanticClass::kWater,
                                              SemanticClass::kRoad, SemanticClass::kBuilding};
  RasterizedLayout out{SemanticMap(config.width, config.height, to_int(SemanticClass::kOthers)),
                       HeightField(config.width, config.height, 0), config};
  Raster<std::uint8_t> green(config.width, config.height, 0);
  bool any_green = false;
  for (int y = 0; y < config.height; ++y) {
    for (int x = 0; x < config.width; ++x) {
      const Cover& c = cell(x, y);
      const SemanticClass cls = c.rank < 0 ? SemanticClass::kOthers : kByRank[c.rank];
      out.semantic(x, y) = static_cast<std::uint8_t>(cls);
      switch (cls) {
        case SemanticClass::kBuilding: out.height(x, y) = c.building_height; break;
        case SemanticClass::kRoad: out.height(x, y) = kRoadHeight; break;
        case SemanticClass::kGreenLand:
          green(x, y) = 1;
          any_green = true;
          break;
        default: break;
      }
    }
  }
  if (any_green) {
    const HeightField trees = perlin_height(green, config.seed, config.origin);
    for (std::size_t i = 0; i < trees.size(); ++i)
      if (green.data()[i]) out.height.data()[i] = trees.data()[i];
  }
  return out;
}

// ---------------------------------------------------------------------------

PerlinNoise::PerlinNoise(std::uint64_t seed) {
  std::array<std::uint8_t, 256> p{};
  for (int i = 0; i < 256; ++i) p[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i);
  Rng rng(hash_values(seed, 0x5045524CULL));
  for (int i = 255; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(p[static_cast<std::size_t>(i)], p[j]);
  }
  for (int i = 0; i < 512; ++i) perm_[static_cast<std::size_t>(i)] = p[static_cast<std::size_t>(i & 255)];
  for (int i = 0; i < 256; ++i) {
    const double a = (i & 7) * (kPi / 4.0);
    grad_[static_cast<std::size_t>(i)] = {std::cos(a), std::sin(a)};
  }
}

PerlinNoise::PerlinNoise(std::array<std::uint8_t, 256> permutation,
                         std::array<std::array<double, 2>, 256> gradients)
    : grad_(gradients) {
  for (int i = 0; i < 512; ++i)
    perm_[static_cast<std::size_t>(i)] = permutation[static_cast<std::size_t>(i & 255)];
}

double PerlinNoise::octave(double x, double y) const {
  const double fx = std::floor(x), fy = std::floor(y);
  const int xi = static_cast<int>(static_cast<long long>(fx) & 255);
  const int yi = static_cast<int>(static_cast<long long>(fy) & 255);
  const double rx = x - fx, ry = y - fy;
  auto fade = [](double t) { return t * t * t * (t * (t * 6 - 15) + 10); };
  auto corner = [&](int dx, int dy) {
    const std::size_t h =
        perm_[static_cast<std::size_t>(perm_[static_cast<std::size_t>(xi + dx)] + yi + dy)];
    const auto& g = grad_[h];
    return g[0] * (rx - dx) + g[1] * (ry - dy);
  };
  const double u = fade(rx), v = fade(ry);
  const double a = corner(0, 0) + u * (corner(1, 0) - corner(0, 0));
  const double b = corner(0, 1) + u * (corner(1, 1) - corner(0, 1));
  return a + v * (b - a);
}

double PerlinNoise::sample(double x, double y) const {
  const double p = kPeriod;
  // Unit gradients bound a single octave by sqrt(1/2); rescale to ~[-1, 1].
  const double n = octave(x / p, y / p) + 0.5 * octave(x / (p / 2), y / (p / 2));
  return std::clamp(n * std::sqrt(2.0) / 1.5, -1.0, 1.0);
}

HeightField perlin_height(const Raster<std::uint8_t>& mask, const PerlinNoise& noise,
                          PixelCoord offset) {
  HeightField out(mask.width(), mask.height(), 0);
  constexpr double mid = (kTreeHeightMin + kTreeHeightMax) / 2.0;
  constexpr double half = (kTreeHeightMax - kTreeHeightMin) / 2.0;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask(x, y)) continue;
      const double n = noise.sample(offset.x + x + 0.5, offset.y + y + 0.5);
      const double h = std::clamp(std::round(mid + half * n), double(kTreeHeightMin),
                                  double(kTreeHeightMax));
      out(x, y) = static_cast<std::uint16_t>(h);
    }
  }
  return out;
}

HeightField perlin_height(const Raster<std::uint8_t>& mask, std::uint64_t seed, PixelCoord offset) {
  return perlin_height(mask, PerlinNoise(seed), offset);
}

// ---------------------------------------------------------------------------

void save_layout(const std::filesystem::path& dir, const RasterizedLayout& layout,
                 const std::string& stem) {
  std::filesystem::create_directories(dir);
  io::write_png_indexed(dir / (stem + "_semantic.png"), layout.semantic, semantic_palette());
  io::write_png_gray16(dir / (stem + "_height.png"), layout.height);
  std::ostringstream meta;
  meta.precision(17);
  meta << "zoom=" << layout.config.zoom << "\n"
       << "origin_x=" << layout.config.origin.x << "\n"
       << "origin_y=" << layout.config.origin.y << "\n"
       << "width=" << layout.config.width << "\n"
       << "height=" << layout.config.height << "\n"
       << "seed=" << layout.config.seed << "\n";
  io::write_text_file(dir / (stem + "_meta.txt"), meta.str());
}

RasterizedLayout load_layout(const std::filesystem::path& dir, const std::string& stem) {
  RasterizedLayout out;
  out.semantic = io::read_png_indexed(dir / (stem + "_semantic.png"));
  out.height = io::read_png_gray16(dir / (stem + "_height.png"));
  if (!out.semantic.same_shape(out.height))
    throw ValidationError("semantic map and height field sizes differ");
  for (std::uint8_t v : out.semantic.data())
    if (!is_map_class(v)) throw ValidationError("semantic map holds an invalid class code");
  std::istringstream meta(io::read_text_file(dir / (stem + "_meta.txt")));
  std::string line;
  while (std::getline(meta, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "zoom") out.config.zoom = std::stoi(value);
    else if (key == "origin_x") out.config.origin.x = std::stod(value);
    else if (key == "origin_y") out.config.origin.y = std::stod(value);
    else if (key == "seed") out.config.seed = std::stoull(value);
  }
  out.config.width = out.semantic.width();
  out.config.height = out.semantic.height();
  return out;
}

}  // namespace citygen::geo
