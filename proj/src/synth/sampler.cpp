#include <algorithm>
#include <cmath>
#include <string>

#include "citygen/errors.hpp"
#include "citygen/rng.hpp"
#include "citygen/synth.hpp"

namespace citygen::synth {
namespace {

constexpr std::array<SemanticClass, 5> kBlockClasses{
    SemanticClass::kBuilding, SemanticClass::kGreenLand, SemanticClass::kOthers,
    SemanticClass::kConstruction, SemanticClass::kWater};

// Line i holds a road if two consecutive context cells along it are road.
template <typename Cell>
std::vector<char> detect_lines(int lines, int length, Cell&& ctx_road) {
  std::vector<char> found(static_cast<std::size_t>(lines), 0);
  for (int i = 0; i < lines; ++i)
    for (int t = 0; t + 1 < length && !found[i]; ++t)
      if (ctx_road(i, t) && ctx_road(i, t + 1)) found[i] = 1;
  return found;
}

// Adds new lines where a whole line is masked, keeping the gap between
// neighboring lines within [min_gap, max_gap] where possible.
std::vector<char> place_new_lines(std::vector<char>& lines, const std::vector<char>& free_line,
                                  int min_gap, int max_gap, Rng& rng) {
  const int n = static_cast<int>(lines.size());
  std::vector<char> added(lines.size(), 0);
  int gap = rng.range(min_gap, max_gap);
  int last = -rng.range(1, gap);
  for (int i = 0; i < n; ++i) {
    if (lines[i]) {
      last = i;
      gap = rng.range(min_gap, max_gap);
      continue;
    }
    if (!free_line[i] || i - last < gap) continue;
    bool crowded = false;
    for (int j = i + 1; j < std::min(n, i + min_gap); ++j) crowded |= lines[j] != 0;
    if (crowded) continue;
    lines[i] = added[i] = 1;
    last = i;
    gap = rng.range(min_gap, max_gap);
  }
  return added;
}

}  // namespace

ProceduralSampler::ProceduralSampler(std::shared_ptr<const ExemplarTokenizer> vocab)
    : ProceduralSampler(std::move(vocab), Params{}) {}

ProceduralSampler::ProceduralSampler(std::shared_ptr<const ExemplarTokenizer> vocab, Params params)
    : vocab_(std::move(vocab)), params_(params) {
  if (!vocab_) throw ValidationError("sampler needs a tokenizer vocabulary");
  if (params_.min_road_gap < 2 || params_.max_road_gap < params_.min_road_gap)
    throw ValidationError("invalid road gap range");
  double total = 0;
  for (double w : params_.block_weights) {
    if (!(w >= 0)) throw ValidationError("block weights must be non-negative");
    total += w;
  }
  if (total <= 0) throw ValidationError("block weights sum to zero");
  if (params_.min_building_height < 1 || params_.max_building_height < params_.min_building_height)
    throw ValidationError("invalid building height range");
}

TokenGrid ProceduralSampler::sample(const TokenGrid& masked, std::uint64_t seed) const {
  const int w = masked.width, h = masked.height;
  const int K = vocab_->vocabulary_size();
  for (auto t : masked.cells)
    if (t != kMaskToken && (t < 0 || t >= K)) throw ValidationError("context token out of vocabulary");

  TokenGrid out = masked;
  Rng rng(hash_values(seed, 0x53414D50u));
  const std::int32_t road = vocab_->token_for(SemanticClass::kRoad, 4);
  auto ctx_road = [&](int x, int y) {
    const auto t = masked.at(x, y);
    return t != kMaskToken && vocab_->exemplar(t).cls == SemanticClass::kRoad;
  };

  // Road rows (y) and columns (x) already present in the context.
  auto rows = detect_lines(h, w, [&](int y, int x) { return ctx_road(x, y); });
  auto cols = detect_lines(w, h, [&](int x, int y) { return ctx_road(x, y); });
  std::vector<char> free_row(h, 1), free_col(w, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (!masked.is_masked(x, y)) free_row[y] = free_col[x] = 0;
  const auto new_rows = place_new_lines(rows, free_row, params_.min_road_gap, params_.max_road_gap, rng);
  const auto new_cols = place_new_lines(cols, free_col, params_.min_road_gap, params_.max_road_gap, rng);

  // Extend context roads through adjacent masked runs; new lines are laid
  // over their whole length.
  auto fill_line = [&](int length, bool is_new, auto&& cell_masked, auto&& cell_road, auto&& set) {
    int t = 0;
    while (t < length) {
      if (!cell_masked(t)) {
        ++t;
        continue;
      }
      int end = t;
      while (end + 1 < length && cell_masked(end + 1)) ++end;
      const bool touches = (t > 0 && cell_road(t - 1)) || (end + 1 < length && cell_road(end + 1));
      if (is_new || touches)
        for (int u = t; u <= end; ++u) set(u);
      t = end + 1;
    }
  };
  for (int y = 0; y < h; ++y) {
    if (!rows[y]) continue;
    fill_line(
        w, new_rows[y] != 0, [&](int x) { return masked.is_masked(x, y); },
        [&](int x) { return ctx_road(x, y); }, [&](int x) { out.at(x, y) = road; });
  }
  for (int x = 0; x < w; ++x) {
    if (!cols[x]) continue;
    fill_line(
        h, new_cols[x] != 0, [&](int y) { return masked.is_masked(x, y); },
        [&](int y) { return ctx_road(x, y); }, [&](int y) { out.at(x, y) = road; });
  }

  // Remaining masked cells form blocks between roads.
  std::vector<int> stack;
  std::vector<int> comp;
  int comp_index = 0;
  for (int sy = 0; sy < h; ++sy) {
    for (int sx = 0; sx < w; ++sx) {
      if (out.at(sx, sy) != kMaskToken) continue;
      comp.clear();
      std::array<int, kNumMapClasses> neighbor{};
      int min_x = sx, min_y = sy;
      out.at(sx, sy) = -2;  // visited marker
      stack.push_back(sy * w + sx);
      while (!stack.empty()) {
        const int c = stack.back();
        stack.pop_back();
        comp.push_back(c);
        const int cx = c % w, cy = c / w;
        min_x = std::min(min_x, cx);
        min_y = std::min(min_y, cy);
        constexpr int dx[4] = {1, -1, 0, 0};
        constexpr int dy[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int nx = cx + dx[k], ny = cy + dy[k];
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const auto t = out.at(nx, ny);
          if (t == kMaskToken) {
            out.at(nx, ny) = -2;
            stack.push_back(ny * w + nx);
          } else if (t >= 0 && !masked.is_masked(nx, ny)) {
            const auto cls = vocab_->exemplar(t).cls;
            if (cls != SemanticClass::kRoad) ++neighbor[to_int(cls)];
          }
        }
      }

      Rng block_rng(hash_values(seed, 0x424C4Bu, comp_index++));
      SemanticClass cls = SemanticClass::kOthers;
      int best = 0;
      for (int c = 1; c < kNumMapClasses; ++c) {
        if (neighbor[c] > best) {
          best = neighbor[c];
          cls = static_cast<SemanticClass>(c);
        }
      }
      if (best == 0) {
        double total = 0;
        for (double wgt : params_.block_weights) total += wgt;
        double u = block_rng.uniform() * total;
        cls = kBlockClasses.back();
        for (std::size_t i = 0; i < kBlockClasses.size(); ++i) {
          if (u < params_.block_weights[i]) {
            cls = kBlockClasses[i];
            break;
          }
          u -= params_.block_weights[i];
        }
      }

      const std::int32_t green = vocab_->token_for(SemanticClass::kGreenLand, block_rng.range(8, 16));
      const std::int32_t others = vocab_->token_for(SemanticClass::kOthers, 0);
      for (int c : comp) {
        const int cx = c % w, cy = c / w;
        std::int32_t t = others;
        switch (cls) {
          case SemanticClass::kBuilding: {
            // 2x2-token lots separated by 1-token open strips.
            const int lx = cx - min_x, ly = cy - min_y;
            if (lx % 3 < 2 && ly % 3 < 2) {
              const double u = to_unit(hash_values(seed, 0x4C4F54u, comp_index, lx / 3, ly / 3));
              const double hgt = params_.min_building_height +
                                 (params_.max_building_height - params_.min_building_height) * u * u * u;
              t = vocab_->token_for(SemanticClass::kBuilding, std::round(hgt));
            }
            break;
          }
          case SemanticClass::kGreenLand:
            t = green;
            break;
          default:
            t = vocab_->token_for(cls, 0);
            break;
        }
        out.at(cx, cy) = t;
      }
    }
  }
  return out;
}

ReplaySampler::ReplaySampler(TokenGrid source) : source_(std::move(source)) {
  if (source_.width <= 0 || source_.height <= 0) throw ValidationError("replay source is empty");
  if (source_.masked_count() != 0) throw ValidationError("replay source contains masked cells");
}

TokenGrid ReplaySampler::sample(const TokenGrid& masked, std::uint64_t) const {
  TokenGrid out = masked;
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      if (out.is_masked(x, y)) out.at(x, y) = source_.at(x % source_.width, y % source_.height);
  return out;
}

std::unique_ptr<TokenSampler> make_sampler(const std::string& name) {
  if (name == "procedural") return std::make_unique<ProceduralSampler>(default_tokenizer());
  if (name.rfind("replay:", 0) == 0) {
    int token = 0;
    try {
      std::size_t used = 0;
      token = std::stoi(name.substr(7), &used);
      if (used != name.size() - 7) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ValidationError("replay sampler needs a token index: " + name);
    }
    if (token < 0 || token >= default_tokenizer()->vocabulary_size())
      throw ValidationError("replay token out of vocabulary: " + name);
    return std::make_unique<ReplaySampler>(TokenGrid(1, 1, token));
  }
  throw ValidationError("unknown sampler: " + name);
}

}  // namespace citygen::synth
