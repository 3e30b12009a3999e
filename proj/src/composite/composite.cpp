#include <algorithm>
#include <cmath>
#include <limits>

#include "citygen/composite.hpp"
#include "citygen/errors.hpp"

namespace citygen::compose {
namespace {

void check_shape(const RenderOutput& ref, const RenderOutput& o) {
  if (!ref.color.same_shape(o.color) || !ref.color.same_shape(o.depth) || !ref.color.same_shape(o.alpha) ||
      !ref.color.same_shape(o.semantic) || !ref.color.same_shape(o.instance))
    throw ValidationError("composite: render outputs differ in resolution");
}

struct Moments {
  double mean = 0, sd = 0;
};

Moments masked_moments(const DepthImage& d, const MaskImage& mask, std::size_t& count) {
  double sum = 0;
  count = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!mask.empty() && !mask.storage()[i]) continue;
    const double v = d.storage()[i];
    if (!std::isfinite(v)) throw DomainError("depth_error: non-finite depth inside the mask");
    sum += v;
    ++count;
  }
  if (count < 2) throw DegenerateInputError("depth_error: fewer than 2 valid pixels");
  const double mean = sum / static_cast<double>(count);
  double ss = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!mask.empty() && !mask.storage()[i]) continue;
    const double e = d.storage()[i] - mean;
    ss += e * e;
  }
  const double sd = std::sqrt(ss / static_cast<double>(count));
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean))))
    throw DegenerateInputError("depth_error: zero variance inside the mask");
  return {mean, sd};
}

std::vector<Vec3> normalized_centers(const Trajectory& t) {
  std::vector<Vec3> c;
  c.reserve(t.size());
  Vec3 mean;
  for (const auto& p : t.poses) {
    c.push_back(p.position);
    mean = mean + p.position;
  }
  mean = mean * (1.0 / static_cast<double>(c.size()));
  double ss = 0;
  for (auto& v : c) {
    v = v - mean;
    ss += dot(v, v);
  }
  const double rms = std::sqrt(ss / static_cast<double>(c.size()));
  if (!(rms > 0)) throw DegenerateInputError("camera_error: all camera centers coincide");
  for (auto& v : c) v = v * (1.0 / rms);
  return c;
}

double rotation_angle(const Mat3& a, const Mat3& b) {
  const Mat3 r = a * b.transposed();
  const double tr = r(0, 0) + r(1, 1) + r(2, 2);
  return std::acos(std::clamp((tr - 1.0) / 2.0, -1.0, 1.0));
}

}  // namespace

MaskSet derive_masks(const RenderOutput& bg, std::span<const RenderOutput> buildings) {
  for (const auto& b : buildings) check_shape(bg, b);
  const int w = bg.color.width(), h = bg.color.height();
  MaskSet m;
  m.background = MaskImage(w, h, 0);
  m.buildings.assign(buildings.size(), MaskImage(w, h, 0));
  m.winner = Raster<std::int32_t>(w, h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int win = -1;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < buildings.size(); ++i) {
        const auto& b = buildings[i];
        if (b.alpha(x, y) >= 0.5f && (win < 0 || b.depth(x, y) < best)) {
          win = static_cast<int>(i);
          best = b.depth(x, y);
        }
      }
      if (win >= 0 && bg.alpha(x, y) >= 0.5f && bg.depth(x, y) < best) win = -1;
      if (win < 0) {
        m.background(x, y) = 1;
      } else {
        m.buildings[win](x, y) = 1;
        m.winner(x, y) = win + 1;
      }
    }
  }
  return m;
}

CompositeResult composite(const RenderOutput& bg, std::span<const RenderOutput> buildings, const MaskSet& masks) {
  for (const auto& b : buildings) check_shape(bg, b);
  if (masks.buildings.size() != buildings.size())
    throw ValidationError("composite: mask count does not match the building count");
  const int w = bg.color.width(), h = bg.color.height();
  if (masks.background.width() != w || masks.background.height() != h)
    throw ValidationError("composite: mask resolution mismatch");
  for (const auto& m : masks.buildings)
    if (!m.same_shape(masks.background)) throw ValidationError("composite: mask resolution mismatch");

  CompositeResult out;
  out.masks = masks;
  out.image = ColorImage(w, h);
  out.winner = Raster<std::int32_t>(w, h, 0);
  out.depth = DepthImage(w, h);
  out.semantic = Raster<std::uint8_t>(w, h, 0);
  out.instance = Raster<std::uint32_t>(w, h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const RenderOutput* src = nullptr;
      int src_index = 0;
      int total = 0;
      auto take = [&](const MaskImage& m, const RenderOutput& o, int index) {
        const int v = m(x, y);
        if (v > 1) throw ValidationError("composite: masks must be binary");
        total += v;
        if (v) {
          src = &o;
          src_index = index;
        }
      };
      take(masks.background, bg, 0);
      for (std::size_t i = 0; i < buildings.size(); ++i) take(masks.buildings[i], buildings[i], static_cast<int>(i) + 1);
      if (total != 1) throw ValidationError("composite: masks do not partition the image");

      const float mg = masks.background(x, y);
      Rgb c{bg.color(x, y).r * mg, bg.color(x, y).g * mg, bg.color(x, y).b * mg};
      for (std::size_t i = 0; i < buildings.size(); ++i) {
        const float mb = masks.buildings[i](x, y);
        const Rgb& b = buildings[i].color(x, y);
        c.r += b.r * mb;
        c.g += b.g * mb;
        c.b += b.b * mb;
      }
      out.image(x, y) = c;
      out.winner(x, y) = src_index;
      out.depth(x, y) = src->depth(x, y);
      out.semantic(x, y) = src->semantic(x, y);
      out.instance(x, y) = src->instance(x, y);
    }
  }
  return out;
}

Compositor::Compositor(RenderOutput background)
    : bg_(std::move(background)),
      best_(bg_.color.width(), bg_.color.height(), Rgb{}),
      best_index_(bg_.color.width(), bg_.color.height(), 0) {}

void Compositor::add(const RenderOutput& b) {
  check_shape(bg_, b);
  ++count_;
  const auto index = static_cast<std::int32_t>(count_);
  for (std::size_t p = 0; p < b.alpha.size(); ++p) {
    if (b.alpha.storage()[p] < 0.5f) continue;
    if (best_index_.storage()[p] != 0 && !(b.depth.storage()[p] < best_.depth.storage()[p])) continue;
    best_index_.storage()[p] = index;
    best_.color.storage()[p] = b.color.storage()[p];
    best_.depth.storage()[p] = b.depth.storage()[p];
    best_.semantic.storage()[p] = b.semantic.storage()[p];
    best_.instance.storage()[p] = b.instance.storage()[p];
  }
}

CompositeResult Compositor::finish() const {
  const int w = bg_.color.width(), h = bg_.color.height();
  CompositeResult out;
  out.masks.background = MaskImage(w, h, 0);
  out.masks.buildings.assign(count_, MaskImage(w, h, 0));
  out.masks.winner = Raster<std::int32_t>(w, h, 0);
  out.image = bg_.color;
  out.depth = bg_.depth;
  out.semantic = bg_.semantic;
  out.instance = bg_.instance;
  for (std::size_t p = 0; p < bg_.color.size(); ++p) {
    const std::int32_t i = best_index_.storage()[p];
    const bool bg_nearer = bg_.alpha.storage()[p] >= 0.5f && bg_.depth.storage()[p] < best_.depth.storage()[p];
    if (i == 0 || bg_nearer) {
      out.masks.background.storage()[p] = 1;
      continue;
    }
    out.masks.buildings[static_cast<std::size_t>(i - 1)].storage()[p] = 1;
    out.masks.winner.storage()[p] = i;
    out.image.storage()[p] = best_.color.storage()[p];
    out.depth.storage()[p] = best_.depth.storage()[p];
    out.semantic.storage()[p] = best_.semantic.storage()[p];
    out.instance.storage()[p] = best_.instance.storage()[p];
  }
  out.winner = out.masks.winner;
  return out;
}

RenderOutput isolate_instance(const RenderOutput& building, std::uint32_t id) {
  RenderOutput out = building;
  for (std::size_t i = 0; i < out.instance.size(); ++i) {
    if (out.instance.storage()[i] == id && id != 0) continue;
    out.alpha.storage()[i] = 0.f;
    out.depth.storage()[i] = std::numeric_limits<double>::infinity();
  }
  return out;
}

double depth_error(const DepthImage& pred, const DepthImage& ref, const MaskImage& mask) {
  if (!pred.same_shape(ref)) throw ValidationError("depth_error: size mismatch");
  if (!mask.empty() && !mask.same_shape(pred)) throw ValidationError("depth_error: mask size mismatch");
  std::size_t n = 0;
  const Moments a = masked_moments(pred, mask, n);
  const Moments b = masked_moments(ref, mask, n);
  double sum = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask.empty() && !mask.storage()[i]) continue;
    const double e = (pred.storage()[i] - a.mean) / a.sd - (ref.storage()[i] - b.mean) / b.sd;
    sum += e * e;
  }
  return sum / static_cast<double>(n);
}

double camera_error(const Trajectory& a, const Trajectory& b, const CameraErrorOptions& options) {
  if (a.size() != b.size()) throw ValidationError("camera_error: trajectories differ in length");
  if (a.size() == 0) throw DegenerateInputError("camera_error: empty trajectories");
  const auto ca = normalized_centers(a);
  const auto cb = normalized_centers(b);
  double sum = 0;
  for (std::size_t i = 0; i < ca.size(); ++i) {
    const Vec3 d = ca[i] - cb[i];
    sum += dot(d, d);
    if (options.rotation_term) {
      const double ang = rotation_angle(a.poses[i].rotation, b.poses[i].rotation);
      sum += ang * ang;
    }
  }
  return sum / static_cast<double>(ca.size());
}

param::StyleCode style_interpolate(const param::StyleCode& z1, const param::StyleCode& z2, double t) {
  if (z1.z.size() != z2.z.size()) throw ValidationError("style_interpolate: length mismatch");
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("style_interpolate: t must be in [0, 1]");
  param::StyleCode out;
  out.z.resize(z1.z.size());
  for (std::size_t i = 0; i < out.z.size(); ++i) out.z[i] = (1.0 - t) * z1.z[i] + t * z2.z[i];
  return out;
}

}  // namespace citygen::compose
