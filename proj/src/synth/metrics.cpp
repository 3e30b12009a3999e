#include <algorithm>
#include <cmath>

#include "citygen/errors.hpp"
#include "citygen/synth.hpp"

namespace citygen::synth {

double height_l1(const HeightField& pred, const HeightField& gt) {
  if (!pred.same_shape(gt)) throw ValidationError("height_l1: dimension mismatch");
  if (pred.empty()) return 0.0;
  double sum = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    sum += std::abs(static_cast<double>(pred.storage()[i]) - gt.storage()[i]);
  return sum / static_cast<double>(pred.size());
}

double semantic_cross_entropy(const LogitMap& logits, const SemanticMap& gt) {
  if (!logits.same_shape(gt)) throw ValidationError("semantic_cross_entropy: dimension mismatch");
  if (gt.empty()) return 0.0;
  double sum = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const auto& l = logits.storage()[i];
    const int c = gt.storage()[i];
    if (!is_map_class(c)) throw ValidationError("semantic_cross_entropy: invalid class code");
    const double m = *std::max_element(l.begin(), l.end());
    double z = 0;
    for (double v : l) z += std::exp(v - m);
    sum += m + std::log(z) - l[c];
  }
  return sum / static_cast<double>(gt.size());
}

double height_smoothness(const HeightField& pred, const SemanticMap& guide, double edge_weight) {
  if (!pred.same_shape(guide)) throw ValidationError("height_smoothness: dimension mismatch");
  const int w = pred.width(), h = pred.height();
  double sx = 0, sy = 0;
  if (w > 1) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x + 1 < w; ++x) {
        const double d = std::abs(static_cast<double>(pred(x + 1, y)) - pred(x, y));
        const double edge = guide(x + 1, y) != guide(x, y) ? 1.0 : 0.0;
        sx += d * std::exp(-edge_weight * edge);
      }
    }
    sx /= static_cast<double>(w - 1) * h;
  }
  if (h > 1) {
    for (int y = 0; y + 1 < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double d = std::abs(static_cast<double>(pred(x, y + 1)) - pred(x, y));
        const double edge = guide(x, y + 1) != guide(x, y) ? 1.0 : 0.0;
        sy += d * std::exp(-edge_weight * edge);
      }
    }
    sy /= static_cast<double>(w) * (h - 1);
  }
  return sx + sy;
}

PatchMetrics patch_metrics(const HeightField& pred_h, const HeightField& gt_h, const LogitMap& logits,
                           const SemanticMap& gt_s, const MetricConfig& config) {
  PatchMetrics m;
  m.l1 = height_l1(pred_h, gt_h);
  m.smoothness = height_smoothness(pred_h, gt_s);
  m.cross_entropy = semantic_cross_entropy(logits, gt_s);
  m.combined = config.lambda_l1 * m.l1 + config.lambda_smooth * m.smoothness + config.lambda_ce * m.cross_entropy;
  return m;
}

}  // namespace citygen::synth
