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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>

#include "slidestitch/core.hpp"

namespace slidestitch {

enum class Blend { Overwrite, Average };

// Stitched raster. Canvas pixel (cx, cy) shows global position
// (cx - offset_x, cy - offset_y). `coverage` counts contributing frames.
struct Canvas {
  GrayImage image;
  Raster<std::uint16_t> coverage;
  int offset_x = 0;
  int offset_y = 0;
};

// Places each frame at its coordinate rounded half away from zero. The canvas
// is the bounding box of all placed frames plus `margin` on each side.
inline Canvas composite(std::span<const GrayImage* const> frames, const CoordinateSet& coords,
                        Blend blend = Blend::Overwrite, int margin = 0) {
  if (frames.empty()) throw ValidationError("composite needs at least one frame");
  if (frames.size() != coords.size()) throw ValidationError("one coordinate per frame required");
  if (margin < 0) throw ValidationError("margin must be non-negative");
  std::vector<std::pair<long, long>> at(frames.size());
  long min_x = std::numeric_limits<long>::max(), min_y = min_x;
  long max_x = std::numeric_limits<long>::min(), max_y = max_x;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    at[i] = {std::lround(coords[i].x), std::lround(coords[i].y)};
    min_x = std::min(min_x, at[i].first);
    min_y = std::min(min_y, at[i].second);
    max_x = std::max(max_x, at[i].first + frames[i]->width());
    max_y = std::max(max_y, at[i].second + frames[i]->height());
  }
  const int w = static_cast<int>(max_x - min_x) + 2 * margin;
  const int h = static_cast<int>(max_y - min_y) + 2 * margin;
  Raster<float> sum(w, h, 0.0f);
  Raster<std::uint16_t> count(w, h, 0);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const int ox = static_cast<int>(at[i].first - min_x) + margin;
    const int oy = static_cast<int>(at[i].second - min_y) + margin;
    const GrayImage& f = *frames[i];
    for (int y = 0; y < f.height(); ++y) {
      const float* src = f.row(y);
      float* dst = sum.row(oy + y) + ox;
      std::uint16_t* c = count.row(oy + y) + ox;
      for (int x = 0; x < f.width(); ++x) {
        dst[x] = blend == Blend::Overwrite ? src[x] : dst[x] + src[x];
        if (c[x] < std::numeric_limits<std::uint16_t>::max()) ++c[x];
      }
    }
  }
  if (blend == Blend::Average) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (count.at(x, y) > 0) sum.at(x, y) = std::clamp(sum.at(x, y) / count.at(x, y), 0.0f, 1.0f);
      }
    }
  }
  return {GrayImage::adopt(std::move(sum)), std::move(count), static_cast<int>(margin - min_x),
          static_cast<int>(margin - min_y)};
}

inline Canvas composite(std::span<const GrayImage> frames, const CoordinateSet& coords,
                        Blend blend = Blend::Overwrite, int margin = 0) {
  std::vector<const GrayImage*> ptrs;
  for (const auto& f : frames) ptrs.push_back(&f);
  return composite(ptrs, coords, blend, margin);
}

}  // namespace slidestitch
