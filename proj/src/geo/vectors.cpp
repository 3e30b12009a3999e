#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>

#include "citygen/errors.hpp"
#include "citygen/geo.hpp"
#include "citygen/image_io.hpp"

namespace citygen {

namespace {
constexpr std::string_view kClassNames[] = {"null",         "roads", "buildings", "green_lands",
                                            "construction", "water", "others",    "facade",
                                            "roof"};
}

std::string_view class_name(SemanticClass c) {
  const int i = to_int(c);
  return i >= 0 && i < kNumLabels ? kClassNames[i] : "invalid";
}

std::optional<SemanticClass> parse_class(std::string_view text) {
  int code = -1;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), code);
  if (ec == std::errc{} && ptr == text.data() + text.size()) {
    if (code >= 0 && code < kNumMapClasses) return static_cast<SemanticClass>(code);
    return std::nullopt;
  }
  struct Alias {
    std::string_view name;
    SemanticClass cls;
  };
  static constexpr Alias kAliases[] = {
      {"roads", SemanticClass::kRoad},          {"road", SemanticClass::kRoad},
      {"buildings", SemanticClass::kBuilding},  {"building", SemanticClass::kBuilding},
      {"green_lands", SemanticClass::kGreenLand}, {"green_land", SemanticClass::kGreenLand},
      {"green", SemanticClass::kGreenLand},     {"construction", SemanticClass::kConstruction},
      {"water", SemanticClass::kWater},         {"others", SemanticClass::kOthers},
      {"other", SemanticClass::kOthers},        {"null", SemanticClass::kNull},
  };
  for (const auto& a : kAliases)
    if (a.name == text) return a.cls;
  return std::nullopt;
}

const io::Palette& semantic_palette() {
  static const io::Palette palette = {
      {0, 0, 0},        // null
      {255, 0, 0},      // roads
      {255, 255, 0},    // buildings
      {0, 255, 0},      // green lands
      {0, 255, 255},    // construction
      {0, 0, 255},      // water
      {128, 128, 128},  // others
      {255, 128, 0},    // facade
      {255, 0, 255},    // roof
  };
  return palette;
}

namespace geo {
namespace {

using nlohmann::json;

struct P2 {
  double x, y;
};

double orient(P2 a, P2 b, P2 c) { return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x); }

bool on_segment(P2 a, P2 b, P2 p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

bool segments_intersect(P2 a, P2 b, P2 c, P2 d) {
  const double o1 = orient(a, b, c), o2 = orient(a, b, d);
  const double o3 = orient(c, d, a), o4 = orient(c, d, b);
  if (((o1 > 0 && o2 < 0) || (o1 < 0 && o2 > 0)) && ((o3 > 0 && o4 < 0) || (o3 < 0 && o4 > 0)))
    return true;
  if (o1 == 0 && on_segment(a, b, c)) return true;
  if (o2 == 0 && on_segment(a, b, d)) return true;
  if (o3 == 0 && on_segment(c, d, a)) return true;
  if (o4 == 0 && on_segment(c, d, b)) return true;
  return false;
}

bool ring_self_intersects(const std::vector<LonLat>& ring) {
  const std::size_t n = ring.size() - 1;  // closed ring: last == first
  auto pt = [&](std::size_t i) { return P2{ring[i].lon, ring[i].lat}; };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (segments_intersect(pt(i), pt(i + 1), pt(j), pt(j + 1))) return true;
    }
  }
  return false;
}

[[noreturn]] void fail(std::size_t index, const std::string& what) {
  throw ValidationError("feature " + std::to_string(index) + ": " + what);
}

std::vector<LonLat> parse_ring(const json& coords, std::size_t index) {
  if (!coords.is_array()) fail(index, "coordinates must be an array");
  std::vector<LonLat> ring;
  for (const auto& c : coords) {
    if (!c.is_array() || c.size() < 2 || !c[0].is_number() || !c[1].is_number())
      fail(index, "malformed position");
    ring.push_back({c[0].get<double>(), c[1].get<double>()});
  }
  return ring;
}

}  // namespace

void validate(const GeoVectorSet& vectors) {
  for (std::size_t i = 0; i < vectors.features.size(); ++i) {
    const GeoFeature& f = vectors.features[i];
    const std::size_t where = f.source_index >= 0 ? static_cast<std::size_t>(f.source_index) : i;
    if (!is_map_class(to_int(f.cls)) || f.cls == SemanticClass::kNull)
      fail(where, "invalid class");
    if (f.rings.empty()) fail(where, "empty geometry");
    for (const auto& ring : f.rings) {
      for (const LonLat& p : ring) {
        if (!(std::abs(p.lon) <= 180.0) || !(std::abs(p.lat) <= kMaxLatitude))
          fail(where, "coordinate outside Web-Mercator bounds");
      }
      if (f.kind == GeometryKind::kPolygon) {
        if (ring.size() < 4) fail(where, "polygon ring needs at least 4 positions");
        if (ring.front().lon != ring.back().lon || ring.front().lat != ring.back().lat)
          fail(where, "polygon ring is not closed");
        if (ring_self_intersects(ring)) fail(where, "polygon ring self-intersects");
      } else if (ring.size() < 2) {
        fail(where, "line string needs at least 2 positions");
      }
    }
    if (f.cls == SemanticClass::kBuilding && !f.height_m) fail(where, "building without height");
    if (f.height_m && !(*f.height_m >= 0.0)) fail(where, "negative height");
    if (f.width_m && !(*f.width_m > 0.0)) fail(where, "non-positive stroke width");
  }
}

GeoVectorSet parse_geojson(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("invalid GeoJSON: ") + e.what());
  }
  if (doc.value("type", "") != "FeatureCollection" || !doc.contains("features") ||
      !doc["features"].is_array())
    throw ValidationError("expected a GeoJSON FeatureCollection");

  GeoVectorSet out;
  std::size_t index = 0;
  for (const auto& feat : doc["features"]) {
    const json props = feat.value("properties", json::object());
    const json& geom = feat.contains("geometry") ? feat["geometry"] : json();
    if (!geom.is_object()) fail(index, "missing geometry");

    GeoFeature base;
    base.source_index = static_cast<int>(index);
    if (!props.contains("class")) fail(index, "missing properties.class");
    const json& cls = props["class"];
    std::optional<SemanticClass> parsed =
        cls.is_number_integer() ? parse_class(std::to_string(cls.get<int>()))
        : cls.is_string()       ? parse_class(cls.get<std::string>())
                                : std::nullopt;
    if (!parsed) fail(index, "unknown class");
    base.cls = *parsed;
    if (props.contains("height") && props["height"].is_number())
      base.height_m = props["height"].get<double>();
    if (props.contains("width") && props["width"].is_number())
      base.width_m = props["width"].get<double>();

    const std::string type = geom.value("type", "");
    const json& coords = geom.contains("coordinates") ? geom["coordinates"] : json();
    auto add_polygon = [&](const json& rings) {
      GeoFeature f = base;
      f.kind = GeometryKind::kPolygon;
      for (const auto& r : rings) f.rings.push_back(parse_ring(r, index));
      out.features.push_back(std::move(f));
    };
    if (type == "Polygon") {
      add_polygon(coords);
    } else if (type == "MultiPolygon") {
      for (const auto& poly : coords) add_polygon(poly);
    } else if (type == "LineString" || type == "MultiLineString") {
      GeoFeature f = base;
      f.kind = GeometryKind::kPolyline;
      if (type == "LineString") {
        f.rings.push_back(parse_ring(coords, index));
      } else {
        for (const auto& line : coords) f.rings.push_back(parse_ring(line, index));
      }
      out.features.push_back(std::move(f));
    } else {
      fail(index, "unsupported geometry type '" + type + "'");
    }
    ++index;
  }
  validate(out);
  return out;
}

GeoVectorSet load_geojson(const std::filesystem::path& path) {
  return parse_geojson(io::read_text_file(path));
}

}  // namespace geo
}  // namespace citygen
