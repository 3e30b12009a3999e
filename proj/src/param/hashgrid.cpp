#include <cmath>
#include <fstream>

#include "citygen/binary_io.hpp"
#include "citygen/errors.hpp"
#include "citygen/param.hpp"
#include "citygen/rng.hpp"

namespace citygen::param {

double HashGridConfig::growth() const {
  if (levels <= 1) return 1.0;
  return std::exp((std::log(max_resolution) - std::log(base_resolution)) / (levels - 1));
}

double HashGridConfig::resolution(int level) const { return base_resolution * std::pow(growth(), level); }

void HashGridConfig::validate() const {
  if (levels < 1) throw ValidationError("hash grid: levels must be >= 1");
  if (table_size == 0 || (table_size & (table_size - 1)) != 0)
    throw ValidationError("hash grid: table size must be a power of two");
  if (channels < 1) throw ValidationError("hash grid: channels must be >= 1");
  if (feature_dim < 0) throw ValidationError("hash grid: negative feature dimension");
  if (primes.size() != static_cast<std::size_t>(3 + feature_dim))
    throw ValidationError("hash grid: need exactly 3 + d_G primes");
  if (!(base_resolution > 0) || !(max_resolution >= base_resolution))
    throw ValidationError("hash grid: invalid resolution range");
  if (!(quantization > 0)) throw ValidationError("hash grid: quantization scale must be positive");
}

std::uint32_t hash_index(std::span<const std::int64_t> lattice, const HashGridConfig& config) {
  if (lattice.size() != config.primes.size())
    throw ValidationError("hash_index: expected " + std::to_string(config.primes.size()) + " coordinates");
  std::uint64_t h = 0;
  for (std::size_t m = 0; m < lattice.size(); ++m) h ^= static_cast<std::uint64_t>(lattice[m]) * config.primes[m];
  return static_cast<std::uint32_t>(h & (config.table_size - 1));
}

std::vector<std::int64_t> quantize_feature(std::span<const double> f_G, const HashGridConfig& config) {
  if (f_G.size() != static_cast<std::size_t>(config.feature_dim))
    throw ValidationError("global feature has " + std::to_string(f_G.size()) + " values, expected " +
                          std::to_string(config.feature_dim));
  std::vector<std::int64_t> q;
  q.reserve(f_G.size());
  for (double v : f_G) {
    if (!std::isfinite(v)) throw ValidationError("global feature is not finite");
    q.push_back(std::llround(v * config.quantization));
  }
  return q;
}

HashGridTable HashGridTable::random(const HashGridConfig& config, std::uint64_t seed) {
  config.validate();
  std::vector<float> data(static_cast<std::size_t>(config.levels) * config.table_size * config.channels);
  const std::uint64_t base = splitmix64(seed ^ 0x48415348ull);
  for (std::size_t i = 0; i < data.size(); ++i)
    data[i] = static_cast<float>((2.0 * to_unit(splitmix64(base + i)) - 1.0) * 1e-4);
  return HashGridTable(config, seed, std::move(data));
}

HashGridTable::HashGridTable(HashGridConfig config, std::uint64_t seed, std::vector<float> data)
    : config_(std::move(config)), seed_(seed), data_(std::move(data)) {
  config_.validate();
  if (data_.size() != static_cast<std::size_t>(config_.levels) * config_.table_size * config_.channels)
    throw ValidationError("hash table size does not match its configuration");
  for (float v : data_)
    if (!std::isfinite(v)) throw ValidationError("hash table entry is not finite");
}

void save_table(const std::filesystem::path& path, const HashGridTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const auto& c = table.config();
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.levels));
  io::write_le<std::uint32_t>(out, c.table_size);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.channels));
  io::write_le<std::uint64_t>(out, table.seed());
  for (float v : table.data()) io::write_le(out, v);
  if (!out) throw IoError("write failed: " + path.string());
}

HashGridTable load_table(const std::filesystem::path& path, HashGridConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  base.levels = static_cast<int>(io::read_le<std::uint32_t>(in, "hash table"));
  base.table_size = io::read_le<std::uint32_t>(in, "hash table");
  base.channels = static_cast<int>(io::read_le<std::uint32_t>(in, "hash table"));
  const auto seed = io::read_le<std::uint64_t>(in, "hash table");
  base.validate();
  if (base.levels > 64 || base.channels > 256 || base.table_size > (1u << 26))
    throw ValidationError("hash table: implausible header");
  std::vector<float> data(static_cast<std::size_t>(base.levels) * base.table_size * base.channels);
  for (auto& v : data) v = io::read_le<float>(in, "hash table");
  return HashGridTable(std::move(base), seed, std::move(data));
}

void grid_lookup(const Vec3& p, std::span<const std::int64_t> quantized_f, const HashGridTable& table,
                 std::span<double> out) {
  const auto& cfg = table.config();
  if (out.size() != static_cast<std::size_t>(cfg.output_size())) throw ValidationError("grid_lookup: output size");
  if (quantized_f.size() != static_cast<std::size_t>(cfg.feature_dim))
    throw ValidationError("grid_lookup: global feature size");
  for (int a = 0; a < 3; ++a)
    if (!(p[a] >= 0.0 && p[a] <= cfg.max_resolution)) throw DomainError("grid_lookup: position outside the window");

  std::uint64_t feature_hash = 0;
  for (std::size_t i = 0; i < quantized_f.size(); ++i)
    feature_hash ^= static_cast<std::uint64_t>(quantized_f[i]) * cfg.primes[3 + i];
  const std::uint64_t mask = cfg.table_size - 1;
  const double growth = cfg.growth();

  double scale = cfg.base_resolution / cfg.max_resolution;
  for (int level = 0; level < cfg.levels; ++level, scale *= growth) {
    double frac[3];
    std::uint64_t h0[3], h1[3];
    for (int a = 0; a < 3; ++a) {
      const double x = p[a] * scale;
      const double c = std::floor(x);
      frac[a] = x - c;
      const auto ci = static_cast<std::int64_t>(c);
      h0[a] = static_cast<std::uint64_t>(ci) * cfg.primes[a];
      h1[a] = static_cast<std::uint64_t>(ci + 1) * cfg.primes[a];
    }
    double* dst = out.data() + static_cast<std::size_t>(level) * cfg.channels;
    for (int ch = 0; ch < cfg.channels; ++ch) dst[ch] = 0.0;
    for (int corner = 0; corner < 8; ++corner) {
      const int bx = corner & 1, by = (corner >> 1) & 1, bz = (corner >> 2) & 1;
      const double w = (bx ? frac[0] : 1.0 - frac[0]) * (by ? frac[1] : 1.0 - frac[1]) *
                       (bz ? frac[2] : 1.0 - frac[2]);
      if (w == 0.0) continue;
      const std::uint64_t h = (bx ? h1[0] : h0[0]) ^ (by ? h1[1] : h0[1]) ^ (bz ? h1[2] : h0[2]) ^ feature_hash;
      const auto e = table.entry(level, static_cast<std::uint32_t>(h & mask));
      for (int ch = 0; ch < cfg.channels; ++ch) dst[ch] += w * e[ch];
    }
  }
}

std::vector<double> grid_lookup(const Vec3& p, const GlobalFeature& f_G, const HashGridTable& table) {
  std::vector<double> out(static_cast<std::size_t>(table.config().output_size()));
  const auto q = quantize_feature(f_G.values, table.config());
  grid_lookup(p, q, table, out);
  return out;
}

}  // namespace citygen::param
