#include <algorithm>
#include <array>
#include <cmath>

#include "citygen/errors.hpp"
#include "citygen/parallel.hpp"
#include "citygen/render.hpp"

namespace citygen::render {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Ray/box slab test; returns false on a miss.
bool intersect_box(const Vec3& o, const Vec3& d, const Vec3& lo, const Vec3& hi, double& t0, double& t1) {
  t0 = -kInf;
  t1 = kInf;
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < lo[a] || o[a] > hi[a]) return false;
      continue;
    }
    double ta = (lo[a] - o[a]) / d[a];
    double tb = (hi[a] - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  return t0 < t1;
}

struct PixelResult {
  Rgb color;
  double depth = kInf;
  float alpha = 0.f;
  std::uint8_t semantic = 0;
  std::uint32_t instance = 0;
};

PixelResult march_one(const layout::LocalWindow& window, const Ray& ray, const FeatureSource* features,
                      const RadianceField& field, const RenderSettings& s, const MarchOptions& opt,
                      std::vector<double>& fbuf, RayTrace* trace) {
  PixelResult px;
  px.color = s.sky;
  const Vec3 origin_world{static_cast<double>(window.origin.x), static_cast<double>(window.origin.y), 0.0};
  // Field position = world - shift = local - (shift - origin); exact for
  // integer offsets, so shifting window, camera and shift together is exact.
  const Vec3 field_offset = opt.origin_shift.value_or(origin_world) - origin_world;
  const Vec3 o = ray.origin - origin_world;
  const Vec3& d = ray.dir;

  const double top = std::min<double>(window.dims.depth, window.max_height + 1);
  double t0, t1;
  if (top <= 0 ||
      !intersect_box(o, d, Vec3{0, 0, 0},
                     Vec3{static_cast<double>(window.semantic_patch.width()),
                          static_cast<double>(window.semantic_patch.height()), top},
                     t0, t1)) {
    return px;
  }
  t0 = std::max(t0, ray.near);
  t1 = std::min(t1, ray.far);
  if (!(t0 < t1)) return px;

  // Midpoint samples t_n = near + (n + 1/2) step on a grid anchored at the ray's near distance.
  const double step = s.step;
  long n = static_cast<long>(std::ceil((t0 - ray.near) / step - 0.5));
  if (n < 0) n = 0;
  double T = 1.0;
  double r = 0, g = 0, b = 0, depth_acc = 0;
  std::array<double, kNumLabels> sem{};
  for (int steps = 0; steps < s.max_steps; ++steps, ++n) {
    const double t = ray.near + (static_cast<double>(n) + 0.5) * step;
    if (t >= t1) break;
    if (t < t0) continue;
    const Vec3 p = o + d * t;
    const auto label = window.at(static_cast<int>(std::floor(p.x)), static_cast<int>(std::floor(p.y)),
                                 static_cast<int>(std::floor(p.z)));
    if (label == SemanticClass::kNull) continue;
    std::span<const double> feat;
    if (features) {
      features->evaluate(p - field_offset, fbuf);
      feat = fbuf;
    }
    const double sigma = field.density(feat, label);
    if (!(sigma > 0)) continue;
    const double alpha = 1.0 - std::exp(-sigma * step);
    const double w = T * alpha;
    const Rgb c = field.color(feat, opt.style, label);
    r += w * c.r;
    g += w * c.g;
    b += w * c.b;
    depth_acc += w * t;
    sem[to_int(label)] += w;
    if (trace) {
      trace->t.push_back(t);
      trace->transmittance.push_back(T);
      trace->weight.push_back(w);
      trace->label.push_back(label);
    }
    T *= 1.0 - alpha;
    if (T < s.stop_transmittance) break;
  }
  if (trace) trace->final_transmittance = T;

  const double a = 1.0 - T;
  px.alpha = static_cast<float>(a);
  px.color = Rgb{static_cast<float>(r + T * s.sky.r), static_cast<float>(g + T * s.sky.g),
                 static_cast<float>(b + T * s.sky.b)};
  px.depth = a > 0 ? depth_acc / std::max(a, 1e-12) : kInf;
  if (a >= 0.5) {
    int best = 0;
    for (int c = 1; c < kNumLabels; ++c)
      if (sem[c] > sem[best]) best = c;
    px.semantic = static_cast<std::uint8_t>(best);
    const auto cls = static_cast<SemanticClass>(best);
    if (cls == SemanticClass::kFacade || cls == SemanticClass::kRoof) px.instance = window.target_instance;
  }
  return px;
}

}  // namespace

void RenderSettings::validate() const {
  if (!(step > 0) || !std::isfinite(step)) throw ValidationError("render: step must be positive");
  if (max_steps <= 0) throw ValidationError("render: max_steps must be positive");
  if (!(stop_transmittance >= 0 && stop_transmittance < 1))
    throw ValidationError("render: stop transmittance must be in [0, 1)");
}

RenderOutput::RenderOutput(int width, int height, Rgb sky)
    : color(width, height, sky),
      depth(width, height, kInf),
      alpha(width, height, 0.f),
      semantic(width, height, 0),
      instance(width, height, 0) {}

RayTrace march_ray(const layout::LocalWindow& window, const Ray& ray, const FeatureSource* features,
                   const RadianceField& field, const RenderSettings& settings, const MarchOptions& options) {
  settings.validate();
  std::vector<double> fbuf(features ? static_cast<std::size_t>(features->size()) : 0);
  RayTrace trace;
  march_one(window, ray, features, field, settings, options, fbuf, &trace);
  return trace;
}

RenderOutput march(const layout::LocalWindow& window, const RayGrid& rays, const FeatureSource* features,
                   const RadianceField& field, const RenderSettings& settings, const MarchOptions& options) {
  settings.validate();
  if (rays.rays.size() != static_cast<std::size_t>(rays.width) * rays.height)
    throw ValidationError("render: ray grid size mismatch");
  if (options.roi && (options.roi->width() != rays.width || options.roi->height() != rays.height))
    throw ValidationError("render: region-of-interest mask size mismatch");
  RenderOutput out(rays.width, rays.height, settings.sky);
  parallel_for(0, rays.height, settings.threads, [&](int y) {
    std::vector<double> fbuf(features ? static_cast<std::size_t>(features->size()) : 0);
    for (int x = 0; x < rays.width; ++x) {
      if (options.roi && !(*options.roi)(x, y)) continue;
      const auto px = march_one(window, rays.at(x, y), features, field, settings, options, fbuf, nullptr);
      out.color(x, y) = px.color;
      out.depth(x, y) = px.depth;
      out.alpha(x, y) = px.alpha;
      out.semantic(x, y) = px.semantic;
      out.instance(x, y) = px.instance;
    }
  });
  return out;
}

}  // namespace citygen::render
