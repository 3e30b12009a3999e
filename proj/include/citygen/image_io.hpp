#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "citygen/raster.hpp"

namespace citygen::io {

using Palette = std::vector<std::array<std::uint8_t, 3>>;

// 8-bit RGB, 8-bit paletted and 16-bit grayscale PNG codecs over libpng.
// Writers throw IoError on failure; readers also throw when the file's
// format does not match the requested raster type.

void write_png_rgb8(const std::filesystem::path& path, const Raster<std::array<std::uint8_t, 3>>& img);
Raster<std::array<std::uint8_t, 3>> read_png_rgb8(const std::filesystem::path& path);

void write_png_indexed(const std::filesystem::path& path, const Raster<std::uint8_t>& img,
                       const Palette& palette);
// Returns raw palette indices.
Raster<std::uint8_t> read_png_indexed(const std::filesystem::path& path);

void write_png_gray16(const std::filesystem::path& path, const Raster<std::uint16_t>& img);
Raster<std::uint16_t> read_png_gray16(const std::filesystem::path& path);

// In-memory variants used by the HTTP service.
std::vector<std::uint8_t> encode_png_rgb8(const Raster<std::array<std::uint8_t, 3>>& img);
std::vector<std::uint8_t> encode_png_indexed(const Raster<std::uint8_t>& img, const Palette& palette);

// Float color in [0,1] to 8-bit, round-to-nearest with clamping.
Raster<std::array<std::uint8_t, 3>> quantize(const ColorImage& img);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

std::string sha256_hex(const void* data, std::size_t size);
inline std::string sha256_hex(const std::string& s) { return sha256_hex(s.data(), s.size()); }
std::string sha256_file(const std::filesystem::path& path);

std::string base64_encode(const std::vector<std::uint8_t>& bytes);

}  // namespace citygen::io
