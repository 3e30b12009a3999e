#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "citygen/binary_io.hpp"
#include "citygen/errors.hpp"
#include "citygen/synth.hpp"

namespace citygen::synth {
namespace {

template <typename T>
void put(std::ostream& out, T v) {
  io::write_le(out, v);
}

template <typename T>
T get(std::istream& in) {
  return io::read_le<T>(in, "codebook");
}

}  // namespace

void PatchSpec::validate() const {
  if (patch_px <= 0 || downsample <= 0 || patch_px % downsample != 0)
    throw ValidationError("patch size must be a positive multiple of the downsample factor");
  if (!(overlap >= 0.0 && overlap < 1.0)) throw ValidationError("overlap must be in [0, 1)");
  if (stride_px() <= 0 || stride_px() % downsample != 0)
    throw ValidationError("stride must be a positive multiple of the downsample factor");
}

void Codebook::validate() const {
  if (K <= 0 || D <= 0) throw ValidationError("codebook: K and D must be positive");
  if (entries.size() != static_cast<std::size_t>(K) * static_cast<std::size_t>(D))
    throw ValidationError("codebook: entry count does not match K*D");
  for (float v : entries)
    if (!std::isfinite(v)) throw ValidationError("codebook: non-finite entry");
}

void save_codebook(const std::filesystem::path& path, const Codebook& codebook) {
  codebook.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(codebook.K));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(codebook.D));
  for (float v : codebook.entries) put<float>(out, v);
  if (!out) throw IoError("write failed: " + path.string());
}

Codebook load_codebook(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  Codebook cb;
  const auto k = get<std::uint32_t>(in);
  const auto d = get<std::uint32_t>(in);
  if (k == 0 || d == 0 || k > (1u << 20) || d > (1u << 16))
    throw ValidationError("codebook: implausible header");
  cb.K = static_cast<int>(k);
  cb.D = static_cast<int>(d);
  cb.entries.resize(static_cast<std::size_t>(k) * d);
  for (auto& v : cb.entries) v = get<float>(in);
  cb.validate();
  return cb;
}

std::size_t TokenGrid::masked_count() const {
  return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), kMaskToken));
}

TokenGrid TokenGrid::crop(int x0, int y0, int w, int h) const {
  if (x0 < 0 || y0 < 0 || w < 0 || h < 0 || x0 + w > width || y0 + h > height)
    throw DomainError("token crop out of bounds");
  TokenGrid out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at(x, y) = at(x0 + x, y0 + y);
  return out;
}

ExemplarTokenizer::ExemplarTokenizer(int block) : block_(block) {
  if (block <= 0) throw ValidationError("block size must be positive");
  first_.fill(-1);
  auto add = [&](SemanticClass c, int h) {
    const int ci = to_int(c);
    if (first_[ci] < 0) first_[ci] = static_cast<std::int32_t>(exemplars_.size());
    ++count_[ci];
    exemplars_.push_back({c, static_cast<std::uint16_t>(h)});
  };
  add(SemanticClass::kRoad, 4);
  add(SemanticClass::kWater, 0);
  add(SemanticClass::kOthers, 0);
  add(SemanticClass::kConstruction, 0);
  for (int h = 8; h <= 16; ++h) add(SemanticClass::kGreenLand, h);
  for (int h = 1; h <= 499; ++h) add(SemanticClass::kBuilding, h);
}

std::int32_t ExemplarTokenizer::token_for(SemanticClass cls, double height) const {
  int ci = to_int(cls);
  if (ci <= 0 || ci >= kNumMapClasses || first_[ci] < 0) ci = to_int(SemanticClass::kOthers);
  std::int32_t best = first_[ci];
  double best_d = std::numeric_limits<double>::infinity();
  for (std::int32_t t = first_[ci]; t < first_[ci] + count_[ci]; ++t) {
    const double d = std::abs(exemplars_[t].height - height);
    if (d < best_d) {
      best_d = d;
      best = t;
    }
  }
  return best;
}

TokenGrid ExemplarTokenizer::encode(const LayoutPatch& patch) const {
  const auto& s = patch.semantic;
  const auto& h = patch.height;
  if (!s.same_shape(h)) throw ValidationError("semantic and height dimensions differ");
  if (s.width() % block_ != 0 || s.height() % block_ != 0 || s.empty())
    throw ValidationError("patch dimensions must be positive multiples of the block size");
  TokenGrid out(s.width() / block_, s.height() / block_);
  for (int ty = 0; ty < out.height; ++ty) {
    for (int tx = 0; tx < out.width; ++tx) {
      std::array<int, kNumMapClasses> count{};
      std::array<double, kNumMapClasses> sum{};
      for (int y = ty * block_; y < (ty + 1) * block_; ++y) {
        for (int x = tx * block_; x < (tx + 1) * block_; ++x) {
          const int c = s(x, y);
          if (!is_map_class(c)) throw ValidationError("invalid class code in layout");
          ++count[c];
          sum[c] += h(x, y);
        }
      }
      int major = to_int(SemanticClass::kOthers);
      int best = -1;
      for (int c = 1; c < kNumMapClasses; ++c) {
        if (count[c] > best) {
          best = count[c];
          major = c;
        }
      }
      const double mean = count[major] > 0 ? sum[major] / count[major] : 0.0;
      out.at(tx, ty) = token_for(static_cast<SemanticClass>(major), mean);
    }
  }
  return out;
}

LayoutPatch ExemplarTokenizer::decode(const TokenGrid& tokens) const {
  LayoutPatch out{SemanticMap(tokens.width * block_, tokens.height * block_),
                  HeightField(tokens.width * block_, tokens.height * block_)};
  for (int ty = 0; ty < tokens.height; ++ty) {
    for (int tx = 0; tx < tokens.width; ++tx) {
      const std::int32_t t = tokens.at(tx, ty);
      if (t < 0 || t >= vocabulary_size()) throw ValidationError("token out of vocabulary");
      const Exemplar& e = exemplars_[t];
      for (int y = ty * block_; y < (ty + 1) * block_; ++y) {
        for (int x = tx * block_; x < (tx + 1) * block_; ++x) {
          out.semantic(x, y) = static_cast<std::uint8_t>(e.cls);
          out.height(x, y) = e.height;
        }
      }
    }
  }
  return out;
}

Codebook ExemplarTokenizer::codebook(int dim) const {
  if (dim < kNumMapClasses + 1) throw ValidationError("codebook dimension too small");
  Codebook cb;
  cb.K = vocabulary_size();
  cb.D = dim;
  cb.entries.assign(static_cast<std::size_t>(cb.K) * dim, 0.f);
  for (int k = 0; k < cb.K; ++k) {
    float* row = cb.entries.data() + static_cast<std::size_t>(k) * dim;
    row[to_int(exemplars_[k].cls)] = 1.f;
    row[kNumMapClasses] = static_cast<float>(exemplars_[k].height) / 64.f;
  }
  return cb;
}

std::shared_ptr<const ExemplarTokenizer> default_tokenizer() {
  static const auto tok = std::make_shared<const ExemplarTokenizer>();
  return tok;
}

}  // namespace citygen::synth
