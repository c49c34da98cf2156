#include "ungap/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <vector>

#include "ungap/errors.hpp"

namespace ungap {
namespace {

struct FileCloser {
  std::FILE* f = nullptr;
  ~FileCloser() {
    if (f) std::fclose(f);
  }
};

unsigned char to_byte(double v) {
  double c = std::clamp(v, 0.0, 1.0);
  return static_cast<unsigned char>(std::lround(c * 255.0));
}

}  // namespace

Tensor read_png(const std::string& path) {
  FileCloser fc;
  fc.f = std::fopen(path.c_str(), "rb");
  if (!fc.f) throw IoError("cannot open png for reading: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("corrupt or unreadable png: " + path);
  }

  png_init_io(png, fc.f);
  png_read_info(png, info);

  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  png_byte color = png_get_color_type(png, info);
  png_byte depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("unsupported png channel count in " + path);
  }

  std::vector<png_byte> row(static_cast<size_t>(w) * channels);
  Tensor out(1, channels, static_cast<int>(h), static_cast<int>(w));
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (png_uint_32 x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        out.at(0, c, static_cast<int>(y), static_cast<int>(x)) =
            row[static_cast<size_t>(x) * channels + c] / 255.0;
      }
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void write_png(const std::string& path, const Tensor& image) {
  if (image.n != 1 || (image.c != 1 && image.c != 3)) {
    throw InvalidInputError("write_png expects a (1,1,H,W) or (1,3,H,W) tensor, got " +
                            image.shape_str());
  }
  FileCloser fc;
  fc.f = std::fopen(path.c_str(), "wb");
  if (!fc.f) throw IoError("cannot open png for writing: " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png write failed: " + path);
  }

  png_init_io(png, fc.f);
  int color = image.c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, image.w, image.h, 8, color, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<png_byte> row(static_cast<size_t>(image.w) * image.c);
  for (int y = 0; y < image.h; ++y) {
    for (int x = 0; x < image.w; ++x) {
      for (int c = 0; c < image.c; ++c) {
        row[static_cast<size_t>(x) * image.c + c] = to_byte(image.at(0, c, y, x));
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_f32(const std::string& path, const Tensor& grid) {
  if (grid.n != 1 || grid.c != 1) {
    throw InvalidInputError("write_f32 expects a (1,1,H,W) tensor, got " + grid.shape_str());
  }
  FileCloser fc;
  fc.f = std::fopen(path.c_str(), "wb");
  if (!fc.f) throw IoError("cannot open f32 grid for writing: " + path);
  std::vector<float> buf(grid.data.size());
  for (size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(grid.data[i]);
  if (std::fwrite(buf.data(), sizeof(float), buf.size(), fc.f) != buf.size()) {
    throw IoError("short write on f32 grid: " + path);
  }
}

Tensor read_f32(const std::string& path, int h, int w) {
  if (h <= 0 || w <= 0) throw InvalidInputError("read_f32 needs positive dimensions");
  FileCloser fc;
  fc.f = std::fopen(path.c_str(), "rb");
  if (!fc.f) throw IoError("cannot open f32 grid for reading: " + path);
  size_t count = static_cast<size_t>(h) * static_cast<size_t>(w);
  std::vector<float> buf(count);
  if (std::fread(buf.data(), sizeof(float), count, fc.f) != count) {
    throw IoError("f32 grid shorter than expected shape in " + path);
  }
  float extra;
  if (std::fread(&extra, sizeof(float), 1, fc.f) == 1) {
    throw IoError("f32 grid longer than expected shape in " + path);
  }
  Tensor out(1, 1, h, w);
  for (size_t i = 0; i < count; ++i) out.data[i] = buf[i];
  return out;
}

Tensor heatmap(const Tensor& grid) {
  if (grid.n != 1 || grid.c != 1) {
    throw InvalidInputError("heatmap expects a (1,1,H,W) tensor, got " + grid.shape_str());
  }
  // Five-anchor dark-violet to yellow ramp; linear interpolation between anchors.
  static const double anchors[5][3] = {
      {0.001, 0.000, 0.014},
      {0.341, 0.062, 0.429},
      {0.733, 0.216, 0.330},
      {0.978, 0.557, 0.035},
      {0.988, 1.000, 0.645},
  };
  double lo = grid.min();
  double hi = grid.max();
  double span = hi - lo;
  Tensor out(1, 3, grid.h, grid.w);
  for (int y = 0; y < grid.h; ++y) {
    for (int x = 0; x < grid.w; ++x) {
      double t = span > 0.0 ? (grid.at(0, 0, y, x) - lo) / span : 0.0;
      double pos = std::clamp(t, 0.0, 1.0) * 4.0;
      int i0 = std::min(3, static_cast<int>(pos));
      double f = pos - i0;
      for (int c = 0; c < 3; ++c) {
        out.at(0, c, y, x) = anchors[i0][c] * (1.0 - f) + anchors[i0 + 1][c] * f;
      }
    }
  }
  return out;
}

Tensor to_channels(const Tensor& image, int channels) {
  if (channels <= 0) throw InvalidInputError("to_channels needs a positive channel count");
  if (image.c == channels) return image;
  Tensor out(image.n, channels, image.h, image.w);
  for (int n = 0; n < image.n; ++n) {
    for (int c = 0; c < channels; ++c) {
      int src = std::min(c, image.c - 1);
      for (int y = 0; y < image.h; ++y) {
        for (int x = 0; x < image.w; ++x) {
          out.at(n, c, y, x) = image.at(n, src, y, x);
        }
      }
    }
  }
  return out;
}

Tensor to_gray(const Tensor& image) {
  if (image.c == 1) return image;
  Tensor out(image.n, 1, image.h, image.w);
  for (int n = 0; n < image.n; ++n) {
    for (int y = 0; y < image.h; ++y) {
      for (int x = 0; x < image.w; ++x) {
        double acc = 0.0;
        for (int c = 0; c < image.c; ++c) acc += image.at(n, c, y, x);
        out.at(n, 0, y, x) = acc / image.c;
      }
    }
  }
  return out;
}

}  // namespace ungap
