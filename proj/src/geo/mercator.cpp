#include <cmath>
#include <string>

#include "citygen/errors.hpp"
#include "citygen/geo.hpp"
#include "citygen/math.hpp"

namespace citygen::geo {

namespace {
double world_size(int zoom) {
  if (zoom < 0 || zoom > 30) throw DomainError("zoom out of range: " + std::to_string(zoom));
  return kTileSize * std::ldexp(1.0, zoom);
}
}  // namespace

PixelCoord lonlat_to_pixel(double lon, double lat, int zoom) {
  if (!(std::abs(lat) <= kMaxLatitude))
    throw DomainError("latitude outside Web-Mercator bounds: " + std::to_string(lat));
  if (!(std::abs(lon) <= 180.0))
    throw DomainError("longitude outside [-180, 180]: " + std::to_string(lon));
  const double size = world_size(zoom);
  const double phi = lat * kPi / 180.0;
  const double x = (lon + 180.0) / 360.0 * size;
  const double y = (1.0 - std::asinh(std::tan(phi)) / kPi) / 2.0 * size;
  return {x, y};
}

std::pair<double, double> pixel_to_lonlat(double x, double y, int zoom) {
  const double size = world_size(zoom);
  const double lon = x / size * 360.0 - 180.0;
  const double n = kPi * (1.0 - 2.0 * y / size);
  const double lat = std::atan(std::sinh(n)) * 180.0 / kPi;
  return {lon, lat};
}

double meters_per_pixel(int zoom, double lat) {
  return kEarthCircumference * std::cos(lat * kPi / 180.0) / world_size(zoom);
}

double RasterConfig::center_latitude() const {
  return pixel_to_lonlat(origin.x + width / 2.0, origin.y + height / 2.0, zoom).second;
}

double RasterConfig::meters_per_voxel() const {
  return meters_per_pixel(zoom, center_latitude());
}

}  // namespace citygen::geo
