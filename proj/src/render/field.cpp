#include <algorithm>
#include <array>
#include <cmath>

#include "citygen/errors.hpp"
#include "citygen/render.hpp"
#include "citygen/rng.hpp"

namespace citygen::render {
namespace {

Rgb base_color(SemanticClass c) {
  switch (c) {
    case SemanticClass::kRoad: return {0.36f, 0.36f, 0.38f};
    case SemanticClass::kBuilding: return {0.80f, 0.74f, 0.62f};
    case SemanticClass::kGreenLand: return {0.30f, 0.50f, 0.24f};
    case SemanticClass::kConstruction: return {0.64f, 0.52f, 0.38f};
    case SemanticClass::kWater: return {0.20f, 0.36f, 0.55f};
    case SemanticClass::kOthers: return {0.62f, 0.60f, 0.56f};
    case SemanticClass::kFacade: return {0.78f, 0.72f, 0.63f};
    case SemanticClass::kRoof: return {0.50f, 0.47f, 0.45f};
    case SemanticClass::kNull: break;
  }
  return {0.f, 0.f, 0.f};
}

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

}  // namespace

ProceduralField::ProceduralField(double kappa, double feature_gain) : kappa_(kappa), gain_(feature_gain) {
  if (!(kappa >= 0) || !std::isfinite(kappa)) throw ValidationError("field: kappa must be finite and >= 0");
  if (!std::isfinite(feature_gain)) throw ValidationError("field: feature gain must be finite");
}

double ProceduralField::density(std::span<const double>, SemanticClass label) const {
  return label == SemanticClass::kNull ? 0.0 : kappa_;
}

Rgb ProceduralField::color(std::span<const double> feature, const param::StyleCode* style, SemanticClass label) const {
  const Rgb base = base_color(label);
  double v = 0;
  for (std::size_t k = 0; k < feature.size(); ++k) v += (splitmix64(k) & 1 ? feature[k] : -feature[k]);
  if (!feature.empty()) v /= std::sqrt(static_cast<double>(feature.size()));
  const double shade = 1.0 + 0.25 * std::tanh(gain_ * v);
  std::array<double, 3> tint{0, 0, 0};
  if (style && (label == SemanticClass::kFacade || label == SemanticClass::kRoof))
    for (std::size_t c = 0; c < 3 && c < style->z.size(); ++c) tint[c] = 0.08 * std::tanh(style->z[c]);
  return {clamp01(base.r * shade + tint[0]), clamp01(base.g * shade + tint[1]), clamp01(base.b * shade + tint[2])};
}

MlpField::MlpField(MlpWeights density_head, MlpWeights color_head, int style_dims)
    : density_(std::move(density_head)), color_(std::move(color_head)), style_dims_(style_dims) {
  density_.validate();
  color_.validate();
  if (style_dims < 0) throw ValidationError("field: style_dims must be >= 0");
  if (density_.output_size() != 1) throw ValidationError("field: density head must output 1 value");
  if (color_.output_size() != 3) throw ValidationError("field: color head must output 3 values");
  if (color_.input_size() != density_.input_size() + style_dims + kNumLabels)
    throw ValidationError("field: color head input must be feature + style + 9 labels");
}

double MlpField::density(std::span<const double> feature, SemanticClass label) const {
  if (label == SemanticClass::kNull) return 0.0;
  const double s = mlp_forward(density_, feature)[0];
  return std::isfinite(s) && s > 0 ? s : 0.0;
}

Rgb MlpField::color(std::span<const double> feature, const param::StyleCode* style, SemanticClass label) const {
  std::vector<double> in(feature.begin(), feature.end());
  for (int i = 0; i < style_dims_; ++i)
    in.push_back(style && static_cast<std::size_t>(i) < style->z.size() ? style->z[i] : 0.0);
  for (int c = 0; c < kNumLabels; ++c) in.push_back(c == to_int(label) ? 1.0 : 0.0);
  const auto out = mlp_forward(color_, in);
  return {clamp01(out[0]), clamp01(out[1]), clamp01(out[2])};
}

HashGridFeatures::HashGridFeatures(const param::HashGridTable& table, const param::GlobalFeature& f_G)
    : table_(table), quantized_(param::quantize_feature(f_G.values, table.config())) {}

void HashGridFeatures::evaluate(const Vec3& p, std::span<double> out) const {
  const double m = table_.config().max_resolution;
  const Vec3 q{std::clamp(p.x, 0.0, m), std::clamp(p.y, 0.0, m), std::clamp(p.z, 0.0, m)};
  param::grid_lookup(q, quantized_, table_, out);
}

BuildingFeatures::BuildingFeatures(const param::PixelFeatureMap& f_B, double depth, Vec3 half_extent, int levels)
    : f_B_(f_B), depth_(depth), half_(half_extent), levels_(levels) {}

void BuildingFeatures::evaluate(const Vec3& p, std::span<double> out) const {
  const Vec3 cell{p.x + half_.x, p.y + half_.y, std::clamp(p.z, 0.0, depth_)};
  param::building_feature(cell, f_B_, depth_, levels_, out);
}

}  // namespace citygen::render
