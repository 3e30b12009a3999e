#include "citygen/image_io.hpp"

#include <png.h>
#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "citygen/errors.hpp"

namespace citygen::io {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}
void flush_noop(png_structp) {}

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
  (void)png;
  throw IoError(std::string("libpng: ") + msg);
}
void png_warning_fn(png_structp, png_const_charp) {}

enum class Kind { kRgb8, kIndexed, kGray16 };

// Common encoder. `rows` yields a pointer to each packed row.
template <typename RowFn>
void encode(Kind kind, int width, int height, const Palette* palette, RowFn&& row_bytes,
            std::FILE* file, std::vector<std::uint8_t>* memory) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn,
                                            png_warning_fn);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};
  if (!info) throw IoError("png_create_info_struct failed");

  if (file)
    png_init_io(png, file);
  else
    png_set_write_fn(png, memory, write_to_vector, flush_noop);

  int color_type = PNG_COLOR_TYPE_RGB;
  int depth = 8;
  if (kind == Kind::kIndexed) color_type = PNG_COLOR_TYPE_PALETTE;
  if (kind == Kind::kGray16) {
    color_type = PNG_COLOR_TYPE_GRAY;
    depth = 16;
  }
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  std::vector<png_color> colors;
  if (kind == Kind::kIndexed) {
    for (const auto& c : *palette) colors.push_back(png_color{c[0], c[1], c[2]});
    png_set_PLTE(png, info, colors.data(), static_cast<int>(colors.size()));
  }
  png_write_info(png, info);
  if (kind == Kind::kGray16) png_set_swap(png);  // rows are host little-endian
  std::vector<std::uint8_t> buffer;
  for (int y = 0; y < height; ++y) {
    row_bytes(y, buffer);
    png_write_row(png, buffer.data());
  }
  png_write_end(png, nullptr);
}

struct Decoded {
  int width = 0, height = 0, color_type = 0, depth = 0;
  std::vector<std::vector<std::uint8_t>> rows;
};

Decoded decode_file(const std::filesystem::path& path, bool swap16) {
  FilePtr file(std::fopen(path.string().c_str(), "rb"));
  if (!file) throw IoError("cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn,
                                           png_warning_fn);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};
  png_init_io(png, file.get());
  png_read_info(png, info);
  Decoded d;
  d.width = static_cast<int>(png_get_image_width(png, info));
  d.height = static_cast<int>(png_get_image_height(png, info));
  d.color_type = png_get_color_type(png, info);
  d.depth = png_get_bit_depth(png, info);
  if (swap16 && d.depth == 16) png_set_swap(png);
  png_read_update_info(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  d.rows.assign(static_cast<std::size_t>(d.height), std::vector<std::uint8_t>(stride));
  for (auto& r : d.rows) png_read_row(png, r.data(), nullptr);
  png_read_end(png, nullptr);
  return d;
}

void write_file(const std::filesystem::path& path, auto&& body) {
  FilePtr file(std::fopen(path.string().c_str(), "wb"));
  if (!file) throw IoError("cannot write " + path.string());
  body(file.get());
}

}  // namespace

void write_png_rgb8(const std::filesystem::path& path, const Raster<std::array<std::uint8_t, 3>>& img) {
  write_file(path, [&](std::FILE* f) {
    encode(Kind::kRgb8, img.width(), img.height(), nullptr,
           [&](int y, std::vector<std::uint8_t>& buf) {
             buf.resize(static_cast<std::size_t>(img.width()) * 3);
             std::memcpy(buf.data(), &img(0, y), buf.size());
           },
           f, nullptr);
  });
}

std::vector<std::uint8_t> encode_png_rgb8(const Raster<std::array<std::uint8_t, 3>>& img) {
  std::vector<std::uint8_t> out;
  encode(Kind::kRgb8, img.width(), img.height(), nullptr,
         [&](int y, std::vector<std::uint8_t>& buf) {
           buf.resize(static_cast<std::size_t>(img.width()) * 3);
           std::memcpy(buf.data(), &img(0, y), buf.size());
         },
         nullptr, &out);
  return out;
}

Raster<std::array<std::uint8_t, 3>> read_png_rgb8(const std::filesystem::path& path) {
  Decoded d = decode_file(path, false);
  if (d.color_type != PNG_COLOR_TYPE_RGB || d.depth != 8)
    throw IoError(path.string() + ": expected 8-bit RGB PNG");
  Raster<std::array<std::uint8_t, 3>> img(d.width, d.height);
  for (int y = 0; y < d.height; ++y)
    std::memcpy(&img(0, y), d.rows[static_cast<std::size_t>(y)].data(),
                static_cast<std::size_t>(d.width) * 3);
  return img;
}

void write_png_indexed(const std::filesystem::path& path, const Raster<std::uint8_t>& img,
                       const Palette& palette) {
  write_file(path, [&](std::FILE* f) {
    encode(Kind::kIndexed, img.width(), img.height(), &palette,
           [&](int y, std::vector<std::uint8_t>& buf) {
             buf.assign(&img(0, y), &img(0, y) + img.width());
           },
           f, nullptr);
  });
}

std::vector<std::uint8_t> encode_png_indexed(const Raster<std::uint8_t>& img, const Palette& palette) {
  std::vector<std::uint8_t> out;
  encode(Kind::kIndexed, img.width(), img.height(), &palette,
         [&](int y, std::vector<std::uint8_t>& buf) {
           buf.assign(&img(0, y), &img(0, y) + img.width());
         },
         nullptr, &out);
  return out;
}

Raster<std::uint8_t> read_png_indexed(const std::filesystem::path& path) {
  Decoded d = decode_file(path, false);
  if (d.color_type != PNG_COLOR_TYPE_PALETTE || d.depth != 8)
    throw IoError(path.string() + ": expected 8-bit paletted PNG");
  Raster<std::uint8_t> img(d.width, d.height);
  for (int y = 0; y < d.height; ++y)
    std::memcpy(&img(0, y), d.rows[static_cast<std::size_t>(y)].data(),
                static_cast<std::size_t>(d.width));
  return img;
}

void write_png_gray16(const std::filesystem::path& path, const Raster<std::uint16_t>& img) {
  write_file(path, [&](std::FILE* f) {
    encode(Kind::kGray16, img.width(), img.height(), nullptr,
           [&](int y, std::vector<std::uint8_t>& buf) {
             buf.resize(static_cast<std::size_t>(img.width()) * 2);
             std::memcpy(buf.data(), &img(0, y), buf.size());
           },
           f, nullptr);
  });
}

Raster<std::uint16_t> read_png_gray16(const std::filesystem::path& path) {
  Decoded d = decode_file(path, true);
  if (d.color_type != PNG_COLOR_TYPE_GRAY || d.depth != 16)
    throw IoError(path.string() + ": expected 16-bit grayscale PNG");
  Raster<std::uint16_t> img(d.width, d.height);
  for (int y = 0; y < d.height; ++y)
    std::memcpy(&img(0, y), d.rows[static_cast<std::size_t>(y)].data(),
                static_cast<std::size_t>(d.width) * 2);
  return img;
}

Raster<std::array<std::uint8_t, 3>> quantize(const ColorImage& img) {
  Raster<std::array<std::uint8_t, 3>> out(img.width(), img.height());
  auto q = [](float v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.f, 1.f) * 255.f));
  };
  for (std::size_t i = 0; i < img.size(); ++i) {
    const Rgb& c = img.data()[i];
    out.data()[i] = {q(c.r), q(c.g), q(c.b)};
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::string sha256_hex(const void* data, std::size_t size) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(data, size, digest, &len, EVP_sha256(), nullptr))
    throw IoError("sha256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 15]);
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  const std::string bytes = read_text_file(path);
  return sha256_hex(bytes.data(), bytes.size());
}

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

}  // namespace citygen::io
