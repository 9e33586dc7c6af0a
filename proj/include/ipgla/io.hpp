#pragma once

// Grayscale image files: binary PGM (8/16 bit), PNG via libpng, and raw little-endian
// float64 dumps with a 16-byte header ("IPGLAF64", uint32 height, uint32 width).

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "ipgla/core.hpp"
#include "ipgla/image.hpp"

namespace ipgla {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kRawMagic[8] = {'I', 'P', 'G', 'L', 'A', 'F', '6', '4'};

namespace detail {

inline std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

inline void put_u32_le(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32_le(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

// Skips whitespace and '#' comments in a PNM header.
inline void pnm_skip(std::istream& is) {
  for (;;) {
    const int c = is.peek();
    if (c == '#') {
      std::string line;
      std::getline(is, line);
    } else if (std::isspace(c)) {
      is.get();
    } else {
      return;
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// PGM

/// Writes an 8-bit binary PGM; values are clipped to [0, 1].
inline void write_pgm(const std::string& path, const ImageBuffer& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << "P5\n" << img.width() << " " << img.height() << "\n255\n";
  std::vector<std::uint8_t> row(img.data.size());
  std::transform(img.data.begin(), img.data.end(), row.begin(), detail::to_u8);
  os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  if (!os) throw IoError("failed writing " + path);
}

/// Reads a binary (P5) or ASCII (P2) PGM with maxval up to 65535, scaled to [0, 1].
inline ImageBuffer read_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  std::string magic;
  is >> magic;
  if (magic != "P5" && magic != "P2") throw IoError(path + ": not a PGM file");
  std::size_t w = 0, h = 0, maxval = 0;
  detail::pnm_skip(is);
  is >> w;
  detail::pnm_skip(is);
  is >> h;
  detail::pnm_skip(is);
  is >> maxval;
  if (!is || w == 0 || h == 0 || maxval == 0 || maxval > 65535) throw IoError(path + ": bad PGM header");
  ImageBuffer img(Shape{h, w});
  const double scale = 1.0 / static_cast<double>(maxval);
  if (magic == "P2") {
    for (double& v : img.data) {
      std::size_t x = 0;
      if (!(is >> x)) throw IoError(path + ": truncated PGM data");
      v = static_cast<double>(x) * scale;
    }
    return img;
  }
  is.get();  // single whitespace after maxval
  const std::size_t bpp = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> buf(w * h * bpp);
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(is.gcount()) != buf.size()) throw IoError(path + ": truncated PGM data");
  for (std::size_t i = 0; i < w * h; ++i) {
    const unsigned v = bpp == 1 ? buf[i] : (static_cast<unsigned>(buf[2 * i]) << 8) | buf[2 * i + 1];
    img.data[i] = static_cast<double>(v) * scale;
  }
  return img;
}

// ---------------------------------------------------------------------------
// PNG

/// Writes an 8-bit grayscale PNG; values are clipped to [0, 1].
inline void write_png(const std::string& path, const ImageBuffer& img) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw IoError("cannot open " + path + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialisation failed");
  }
  std::vector<std::uint8_t> pixels(img.data.size());
  std::transform(img.data.begin(), img.data.end(), pixels.begin(), detail::to_u8);
  std::vector<png_bytep> rows(img.height());
  for (std::size_t r = 0; r < img.height(); ++r) rows[r] = pixels.data() + r * img.width();
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed writing " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// Reads an 8- or 16-bit PNG as grayscale in [0, 1]. Colour images are converted with
/// libpng's default luma weights; alpha is dropped.
inline ImageBuffer read_png(const std::string& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!fp) throw IoError("cannot open " + path);
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) throw IoError(path + ": not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng initialisation failed");
  }
  ImageBuffer img;
  std::vector<unsigned char> pixels;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(path + ": corrupt PNG");
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_COLOR || color == PNG_COLOR_TYPE_PALETTE) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  png_set_strip_alpha(png);
  if (depth == 16 && std::endian::native == std::endian::little) png_set_swap(png);
  png_read_update_info(png, info);
  const std::size_t w = png_get_image_width(png, info), h = png_get_image_height(png, info);
  const std::size_t bytes = png_get_rowbytes(png, info);
  const bool wide = png_get_bit_depth(png, info) == 16;
  pixels.resize(bytes * h);
  rows.resize(h);
  for (std::size_t r = 0; r < h; ++r) rows[r] = pixels.data() + r * bytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  img = ImageBuffer(Shape{h, w});
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      if (wide) {
        std::uint16_t v;
        std::memcpy(&v, rows[r] + 2 * c, 2);
        img(r, c) = v / 65535.0;
      } else {
        img(r, c) = rows[r][c] / 255.0;
      }
    }
  return img;
}

/// Dispatches on the file extension (.png, otherwise PGM).
inline ImageBuffer read_image(const std::string& path) {
  const auto dot = path.find_last_of('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == "png" ? read_png(path) : read_pgm(path);
}

// ---------------------------------------------------------------------------
// Raw float64 dumps

inline void write_raw(const std::string& path, const ImageBuffer& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os.write(kRawMagic, 8);
  detail::put_u32_le(os, static_cast<std::uint32_t>(img.height()));
  detail::put_u32_le(os, static_cast<std::uint32_t>(img.width()));
  for (double v : img.data) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
  }
  if (!os) throw IoError("failed writing " + path);
}

inline ImageBuffer read_raw(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  unsigned char header[16];
  is.read(reinterpret_cast<char*>(header), 16);
  if (is.gcount() != 16 || std::memcmp(header, kRawMagic, 8) != 0) throw IoError(path + ": not a raw float64 dump");
  const std::size_t h = detail::get_u32_le(header + 8), w = detail::get_u32_le(header + 12);
  ImageBuffer img(Shape{h, w});
  std::vector<unsigned char> buf(8 * h * w);
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(is.gcount()) != buf.size()) throw IoError(path + ": truncated raw dump");
  for (std::size_t i = 0; i < h * w; ++i) {
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(buf[8 * i + k]) << (8 * k);
    img.data[i] = std::bit_cast<double>(bits);
  }
  return img;
}

/// Linear rescale of [lo, hi] to [0, 1] for display (constant images map to 0).
inline ImageBuffer normalize_for_display(const ImageBuffer& img) {
  const auto [lo, hi] = std::minmax_element(img.data.begin(), img.data.end());
  ImageBuffer out(img.shape);
  const double span = *hi - *lo;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = span > 0.0 ? (img.data[i] - *lo) / span : 0.0;
  return out;
}

}  // namespace ipgla
