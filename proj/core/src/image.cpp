#include "vsr/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace vsr {

void validate_frame(const Frame& f) {
  if (f.c != 3) throw std::invalid_argument("frame: channel count must be 3");
  if (f.h < 1 || f.w < 1) throw std::invalid_argument("frame: dims must be >= 1");
  for (double v : f.v)
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument("frame: values must lie in [0, 1]");
}

void VideoClip::validate() const {
  if (frames.empty()) throw std::invalid_argument("clip: length must be >= 1");
  for (const auto& f : frames) {
    validate_frame(f);
    if (f.h != frames[0].h || f.w != frames[0].w)
      throw std::invalid_argument("clip '" + scene_id + "': heterogeneous frame dims");
  }
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Frame load_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw DataError("cannot open PNG file: " + path);

  png_byte header[8];
  if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8))
    throw DataError("not a PNG file: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("libpng init failed reading: " + path);
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("libpng init failed reading: " + path);
  }

  std::vector<png_byte> raw;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("corrupt PNG file: " + path);
  }

  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const std::size_t rowbytes = png_get_rowbytes(png, info);
  raw.resize(rowbytes * h);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = raw.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Frame out(static_cast<int>(h), static_cast<int>(w), 3);
  for (png_uint_32 y = 0; y < h; ++y) {
    const png_byte* rp = raw.data() + y * rowbytes;
    double* op = out.px(static_cast<int>(y), 0);
    for (std::size_t i = 0; i < static_cast<std::size_t>(w) * 3; ++i)
      op[i] = rp[i] / 255.0;
  }
  return out;
}

void save_png(const std::string& path, const Frame& frame) {
  if (frame.c != 3 || frame.h < 1 || frame.w < 1)
    throw std::invalid_argument("save_png: frame must be (h, w, 3) with h, w >= 1");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw DataError("cannot create PNG file: " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("libpng init failed writing: " + path);
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("libpng init failed writing: " + path);
  }

  std::vector<png_byte> raw(static_cast<std::size_t>(frame.h) * frame.w * 3);
  std::vector<png_bytep> rows(frame.h);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("PNG write failed: " + path);
  }

  for (int y = 0; y < frame.h; ++y) {
    png_byte* rp = raw.data() + static_cast<std::size_t>(y) * frame.w * 3;
    const double* ip = frame.px(y, 0);
    for (int i = 0; i < frame.w * 3; ++i) {
      const double v = std::clamp(ip[i], 0.0, 1.0);
      rp[i] = static_cast<png_byte>(std::lround(v * 255.0));
    }
    rows[y] = rp;
  }

  png_init_io(png, fp.get());
  png_set_IHDR(png, info, frame.w, frame.h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace vsr
