#include <algorithm>
#include <array>
#include <cmath>

#include "citygen/errors.hpp"
#include "citygen/param.hpp"
#include "citygen/rng.hpp"

namespace citygen::param {

void sincos_encode(std::span<const double> x, int levels, std::span<double> out) {
  if (levels < 1) throw ValidationError("sincos: levels must be >= 1");
  if (out.size() != 2 * static_cast<std::size_t>(levels) * x.size())
    throw ValidationError("sincos: output size mismatch");
  double* dst = out.data();
  for (double v : x) {
    // Angle doubling: sin 2a = 2 sin a cos a, cos 2a = (cos a - sin a)(cos a + sin a).
    double s = std::sin(kPi * v);
    double c = std::cos(kPi * v);
    for (int i = 0; i < levels; ++i) {
      *dst++ = s;
      *dst++ = c;
      const double s2 = 2.0 * s * c;
      c = (c - s) * (c + s);
      s = s2;
    }
  }
}

std::vector<double> sincos_encode(std::span<const double> x, int levels) {
  std::vector<double> out(2 * static_cast<std::size_t>(std::max(levels, 0)) * x.size());
  sincos_encode(x, levels, out);
  return out;
}

void building_feature(const Vec3& p, const PixelFeatureMap& f_B, double depth, int levels, std::span<double> out) {
  if (!(depth > 0)) throw ValidationError("building_feature: depth must be positive");
  const double fx = std::floor(p.x), fy = std::floor(p.y);
  if (!(fx >= f_B.x0 && fy >= f_B.y0 && fx < f_B.x0 + f_B.width && fy < f_B.y0 + f_B.height))
    throw DomainError("building_feature: position outside the feature map");
  if (!(p.z >= 0.0 && p.z <= depth)) throw DomainError("building_feature: height outside the window");
  const auto cell = f_B.at(static_cast<int>(fx), static_cast<int>(fy));
  std::array<double, 128> small{};
  std::vector<double> big;
  std::span<double> values;
  const std::size_t n = cell.size() + 1;
  if (n <= small.size()) {
    values = std::span<double>(small.data(), n);
  } else {
    big.resize(n);
    values = big;
  }
  std::copy(cell.begin(), cell.end(), values.begin());
  values[n - 1] = 2.0 * p.z / depth - 1.0;
  sincos_encode(values, levels, out);
}

std::vector<double> building_feature(const Vec3& p, const PixelFeatureMap& f_B, double depth, int levels) {
  std::vector<double> out(2 * static_cast<std::size_t>(levels) * (f_B.channels + 1));
  building_feature(p, f_B, depth, levels, out);
  return out;
}

StyleCode StyleCode::random(std::uint64_t seed, int length) {
  if (length < 0) throw ValidationError("style code length must be non-negative");
  Rng rng(hash_values(seed, 0x5354594Cull));
  StyleCode s;
  s.z.resize(static_cast<std::size_t>(length));
  for (auto& v : s.z) v = rng.gaussian();
  return s;
}

namespace {

void check_inputs(const geo::HeightField& h, const geo::SemanticMap& s) {
  if (!h.same_shape(s)) throw ValidationError("encoder: height and semantic dimensions differ");
}

void check_rect(const geo::HeightField& h, CellRect r) {
  if (r.x0 < 0 || r.y0 < 0 || r.width < 0 || r.height < 0 || r.x0 + r.width > h.width() ||
      r.y0 + r.height > h.height())
    throw DomainError("encoder: rectangle outside the window");
}

GlobalFeature summary_feature(const geo::HeightField& h, const geo::SemanticMap& s, double depth) {
  check_inputs(h, s);
  if (h.empty()) return GlobalFeature{{0.0, 0.0}};
  double sum = 0;
  std::size_t buildings = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    sum += h.storage()[i];
    const auto c = static_cast<SemanticClass>(s.storage()[i]);
    buildings += c == SemanticClass::kBuilding || c == SemanticClass::kFacade || c == SemanticClass::kRoof;
  }
  const double n = static_cast<double>(h.size());
  return GlobalFeature{{sum / n / depth, static_cast<double>(buildings) / n}};
}

void cell_inputs(const geo::HeightField& h, const geo::SemanticMap& s, int x, int y, double depth,
                 std::span<double> in) {
  in[0] = std::clamp(2.0 * h(x, y) / depth - 1.0, -1.0, 1.0);
  const int label = s(x, y);
  if (label < 0 || label >= kNumLabels) throw ValidationError("encoder: invalid label");
  for (int c = 0; c < kNumLabels; ++c) in[1 + c] = c == label ? 1.0 : 0.0;
}

}  // namespace

GlobalFeature ProceduralEncoder::global(const geo::HeightField& h, const geo::SemanticMap& s) const {
  return summary_feature(h, s, depth_);
}

PixelFeatureMap ProceduralEncoder::local(const geo::HeightField& h, const geo::SemanticMap& s, CellRect r) const {
  check_inputs(h, s);
  check_rect(h, r);
  PixelFeatureMap f(r.x0, r.y0, r.width, r.height, kBuildingFeatureChannels);
  std::array<double, 1 + kNumLabels> in{};
  for (int y = r.y0; y < r.y0 + r.height; ++y) {
    for (int x = r.x0; x < r.x0 + r.width; ++x) {
      cell_inputs(h, s, x, y, depth_, in);
      auto cell = f.at(x, y);
      for (std::size_t c = 0; c < in.size(); ++c) cell[c] = static_cast<float>(in[c]);
      for (int c = static_cast<int>(in.size()); c < kBuildingFeatureChannels; ++c)
        cell[c] = static_cast<float>(2.0 * to_unit(hash_values(seed_, x, y, c)) - 1.0);
    }
  }
  return f;
}

MlpEncoder::MlpEncoder(render::MlpWeights weights, double depth) : weights_(std::move(weights)), depth_(depth) {
  weights_.validate();
  if (weights_.input_size() != 1 + kNumLabels || weights_.output_size() != kBuildingFeatureChannels)
    throw ValidationError("encoder MLP must map 10 inputs to 63 channels");
}

GlobalFeature MlpEncoder::global(const geo::HeightField& h, const geo::SemanticMap& s) const {
  return summary_feature(h, s, depth_);
}

PixelFeatureMap MlpEncoder::local(const geo::HeightField& h, const geo::SemanticMap& s, CellRect r) const {
  check_inputs(h, s);
  check_rect(h, r);
  PixelFeatureMap f(r.x0, r.y0, r.width, r.height, kBuildingFeatureChannels);
  std::array<double, 1 + kNumLabels> in{};
  for (int y = r.y0; y < r.y0 + r.height; ++y) {
    for (int x = r.x0; x < r.x0 + r.width; ++x) {
      cell_inputs(h, s, x, y, depth_, in);
      const auto outv = render::mlp_forward(weights_, in);
      auto cell = f.at(x, y);
      for (int c = 0; c < kBuildingFeatureChannels; ++c) cell[c] = static_cast<float>(std::clamp(outv[c], -1.0, 1.0));
    }
  }
  return f;
}

}  // namespace citygen::param
