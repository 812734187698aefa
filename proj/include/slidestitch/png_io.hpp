/*
 * Copyright 2026 The slidestitch Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <map>
#include <memory>
#include <regex>
#include <string>
#include <vector>

#include "slidestitch/core.hpp"

namespace slidestitch {

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] inline void png_error_handler(png_structp, png_const_charp msg) { throw ParseError(msg); }
inline void png_warning_handler(png_structp, png_const_charp) {}

}  // namespace detail

// Reads any 8/16-bit PNG. Colour images are reduced to Rec.601 luma, alpha
// is ignored.
inline GrayImage read_png(const std::filesystem::path& path) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw ParseError(path.string() + ": cannot open");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::png_error_handler,
                                           detail::png_warning_handler);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ParseError(path.string() + ": libpng initialisation failed");
  }
  try {
    png_init_io(png, fp.get());
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (depth == 16) png_set_strip_16(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const int channels = png_get_channels(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    std::vector<png_byte> buf(stride * h);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y) rows[y] = buf.data() + stride * y;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);

    Raster<float> out(w, h);
    for (int y = 0; y < h; ++y) {
      const png_byte* r = rows[y];
      for (int x = 0; x < w; ++x) {
        if (channels >= 3) {
          const png_byte* p = r + x * channels;
          out.at(x, y) = std::clamp(luminance(p[0] / 255.f, p[1] / 255.f, p[2] / 255.f), 0.f, 1.f);
        } else {
          out.at(x, y) = r[x * channels] / 255.f;
        }
      }
    }
    return GrayImage::adopt(std::move(out));
  } catch (const ParseError& e) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline std::uint8_t quantize8(float v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.f, 1.f) * 255.f)); }

// 8-bit grayscale, values rounded to the nearest level.
inline void write_png(const std::filesystem::path& path, const GrayImage& img) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw ParseError(path.string() + ": cannot open for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::png_error_handler,
                                            detail::png_warning_handler);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw ParseError(path.string() + ": libpng initialisation failed");
  }
  try {
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width(), img.height(), 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(img.width());
    for (int y = 0; y < img.height(); ++y) {
      const float* src = img.row(y);
      for (int x = 0; x < img.width(); ++x) row[x] = quantize8(src[x]);
      png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
  } catch (const ParseError& e) {
    png_destroy_write_struct(&png, &info);
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline std::string frame_filename(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06zu.png", index);
  return buf;
}

inline void write_frames(const std::filesystem::path& dir, std::span<const GrayImage> frames) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < frames.size(); ++i) write_png(dir / frame_filename(i), frames[i]);
}

// Loads frame_000000.png, frame_000001.png, ... from `dir`. Numbering must
// start at zero and have no gaps.
inline std::vector<GrayImage> read_frames(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ParseError(dir.string() + ": not a directory");
  static const std::regex pattern(R"(frame_(\d{6})\.png)");
  std::map<std::size_t, std::filesystem::path> found;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) found[std::stoul(m[1].str())] = entry.path();
  }
  if (found.empty()) throw ParseError(dir.string() + ": no frame_NNNNNN.png files");
  std::size_t expected = 0;
  for (const auto& [index, p] : found) {
    if (index != expected) {
      throw ParseError(dir.string() + ": frame " + std::to_string(expected) + " is missing (" + frame_filename(expected) +
                       ")");
    }
    ++expected;
  }
  std::vector<GrayImage> frames;
  frames.reserve(found.size());
  for (const auto& [index, p] : found) frames.push_back(read_png(p));
  for (const auto& f : frames) {
    if (f.width() != frames.front().width() || f.height() != frames.front().height()) {
      throw ParseError(dir.string() + ": frames have differing sizes");
    }
  }
  return frames;
}

}  // namespace slidestitch
