#pragma once

#include <png.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "dgnet/common.hpp"
#include "dgnet/tensor.hpp"

namespace dgnet {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

struct Rect {
  int x = 0, y = 0, w = 0, h = 0;
  bool operator==(const Rect&) const = default;
};

// True when the two rectangles share interior area (edge contact is allowed).
inline bool interiors_intersect(const Rect& a, const Rect& b) {
  const int ow = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  const int oh = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  return ow > 0 && oh > 0;
}

// 8-bit interleaved raster, 1 (gray) or 3 (RGB) channels.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, int c) : width(w), height(h), channels(c) {
    pixels.assign(static_cast<std::size_t>(w) * h * c, 0);
  }

  static Image filled(int w, int h, Rgb color) {
    Image img(w, h, 3);
    for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
      img.pixels[i] = color.r;
      img.pixels[i + 1] = color.g;
      img.pixels[i + 2] = color.b;
    }
    return img;
  }

  std::uint8_t& at(int y, int x, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  Rgb rgb_at(int y, int x) const {
    if (channels == 1) {
      const std::uint8_t v = at(y, x, 0);
      return {v, v, v};
    }
    return {at(y, x, 0), at(y, x, 1), at(y, x, 2)};
  }

  bool operator==(const Image&) const = default;

  Image crop(const Rect& r) const {
    if (r.x < 0 || r.y < 0 || r.w <= 0 || r.h <= 0 || r.x + r.w > width || r.y + r.h > height)
      throw ShapeMismatchError("Image::crop: rectangle out of bounds");
    Image out(r.w, r.h, channels);
    for (int y = 0; y < r.h; ++y)
      for (int x = 0; x < r.w; ++x)
        for (int c = 0; c < channels; ++c) out.at(y, x, c) = at(r.y + y, r.x + x, c);
    return out;
  }
};

// ---------------------------------------------------------------------------
// PNG I/O (libpng). All reads are normalised to 8-bit gray or RGB.
// ---------------------------------------------------------------------------

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace detail

inline Image load_png(const std::string& path) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("load_png: cannot open " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("load_png: png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("load_png: png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("load_png: failed to decode " + path);
  }

  png_init_io(png, fp.get());
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const png_byte color_type = png_get_color_type(png, info);
  const png_byte bit_depth = png_get_bit_depth(png, info);

  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  // Alpha is composited away against black to keep a fixed channel count.
  if (color_type & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS))
    png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("load_png: unsupported channel count in " + path);
  }

  Image img(static_cast<int>(w), static_cast<int>(h), channels);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y)
    rows[y] = img.pixels.data() + static_cast<std::size_t>(y) * w * channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

// Writes 8-bit gray or RGB with pinned encoder settings so identical pixels
// always produce identical bytes.
inline void save_png(const std::string& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3)
    throw IoError("save_png: unsupported channel count");
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("save_png: cannot open " + path + " for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("save_png: png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("save_png: png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("save_png: failed to encode " + path);
  }

  png_init_io(png, fp.get());
  png_set_compression_level(png, 6);
  png_set_filter(png, 0, PNG_FILTER_SUB);
  png_set_IHDR(png, info, img.width, img.height, 8,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y)
    rows[y] = const_cast<png_bytep>(img.pixels.data() +
                                    static_cast<std::size_t>(y) * img.width * img.channels);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// ---------------------------------------------------------------------------
// Resampling
// ---------------------------------------------------------------------------

// Bilinear resample of one scalar plane (row-major src_h x src_w).
inline std::vector<double> resample_plane(const std::vector<double>& src, int src_w, int src_h,
                                          int dst_w, int dst_h) {
  if (src_w <= 0 || src_h <= 0 || dst_w <= 0 || dst_h <= 0)
    throw ShapeMismatchError("resample_plane: nonpositive dimension");
  if (src_w == dst_w && src_h == dst_h) return src;
  std::vector<double> dst(static_cast<std::size_t>(dst_w) * dst_h);
  const double sx = static_cast<double>(src_w) / dst_w;
  const double sy = static_cast<double>(src_h) / dst_h;
  for (int y = 0; y < dst_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::min(std::max(fy, 0.0), static_cast<double>(src_h - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src_h - 1);
    const double wy = fy - y0;
    for (int x = 0; x < dst_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::min(std::max(fx, 0.0), static_cast<double>(src_w - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src_w - 1);
      const double wx = fx - x0;
      const double top = src[static_cast<std::size_t>(y0) * src_w + x0] * (1.0 - wx) +
                         src[static_cast<std::size_t>(y0) * src_w + x1] * wx;
      const double bot = src[static_cast<std::size_t>(y1) * src_w + x0] * (1.0 - wx) +
                         src[static_cast<std::size_t>(y1) * src_w + x1] * wx;
      dst[static_cast<std::size_t>(y) * dst_w + x] = top * (1.0 - wy) + bot * wy;
    }
  }
  return dst;
}

inline Image resize_bilinear(const Image& img, int dst_w, int dst_h) {
  if (img.width == dst_w && img.height == dst_h) return img;
  Image out(dst_w, dst_h, img.channels);
  std::vector<double> plane(static_cast<std::size_t>(img.width) * img.height);
  for (int c = 0; c < img.channels; ++c) {
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        plane[static_cast<std::size_t>(y) * img.width + x] = img.at(y, x, c);
    const std::vector<double> res = resample_plane(plane, img.width, img.height, dst_w, dst_h);
    for (int y = 0; y < dst_h; ++y)
      for (int x = 0; x < dst_w; ++x) {
        const double v = res[static_cast<std::size_t>(y) * dst_w + x];
        out.at(y, x, c) = static_cast<std::uint8_t>(std::lround(std::min(std::max(v, 0.0), 255.0)));
      }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Image <-> Tensor
// ---------------------------------------------------------------------------

// Planar (3,H,W) tensor with values in [0,1]. Gray images are replicated.
inline Tensor image_to_tensor(const Image& img) {
  Tensor t({3, img.height, img.width});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        t.at(c, y, x) = img.at(y, x, img.channels == 1 ? 0 : c) / 255.0;
  return t;
}

inline Image tensor_to_image(const Tensor& t) {
  if (t.rank() != 3 || t.dim(0) != 3)
    throw ShapeMismatchError("tensor_to_image: expected (3,H,W), got " + t.shape_str());
  Image img(t.dim(2), t.dim(1), 3);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        const double v = t.at(c, y, x) * 255.0;
        img.at(y, x, c) = static_cast<std::uint8_t>(std::lround(std::min(std::max(v, 0.0), 255.0)));
      }
  return img;
}

}  // namespace dgnet
