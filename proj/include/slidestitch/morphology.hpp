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
#include <cstdint>
#include <vector>

#include "slidestitch/core.hpp"

namespace slidestitch {

using BinaryMask = Raster<std::uint8_t>;

// Dilation by a (2r+1) x (2r+1) square, done as a row pass then a column pass.
inline BinaryMask dilate_mask(const BinaryMask& mask, int radius) {
  if (radius < 0) throw ValidationError("dilation radius must be non-negative");
  if (radius == 0) return mask;
  const int w = mask.width(), h = mask.height();
  BinaryMask rows(w, h, 0), out(w, h, 0);
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* src = mask.row(y);
    std::uint8_t* dst = rows.row(y);
    for (int x = 0; x < w; ++x) {
      if (!src[x]) continue;
      std::fill(dst + std::max(0, x - radius), dst + std::min(w, x + radius + 1), std::uint8_t{1});
    }
  }
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* src = rows.row(y);
    for (int x = 0; x < w; ++x) {
      if (!src[x]) continue;
      for (int yy = std::max(0, y - radius); yy < std::min(h, y + radius + 1); ++yy) out.at(x, yy) = 1;
    }
  }
  return out;
}

struct Component {
  int min_x = 0, min_y = 0, max_x = 0, max_y = 0;  // inclusive bounding box
  std::size_t pixels = 0;

  int width() const { return max_x - min_x + 1; }
  int height() const { return max_y - min_y + 1; }
};

struct ComponentLabels {
  Raster<int> labels;  // -1 for background, else index into components
  std::vector<Component> components;
};

// 8-connected components of the set pixels, labelled in raster-scan order of
// their first pixel.
inline ComponentLabels connected_components(const BinaryMask& mask) {
  const int w = mask.width(), h = mask.height();
  ComponentLabels out{Raster<int>(w, h, -1), {}};
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.at(x, y) || out.labels.at(x, y) >= 0) continue;
      const int id = static_cast<int>(out.components.size());
      Component comp{x, y, x, y, 0};
      out.labels.at(x, y) = id;
      stack.push_back({x, y});
      while (!stack.empty()) {
        const auto [cx, cy] = stack.back();
        stack.pop_back();
        ++comp.pixels;
        comp.min_x = std::min(comp.min_x, cx);
        comp.max_x = std::max(comp.max_x, cx);
        comp.min_y = std::min(comp.min_y, cy);
        comp.max_y = std::max(comp.max_y, cy);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = cx + dx, ny = cy + dy;
            if (!mask.contains(nx, ny) || !mask.at(nx, ny) || out.labels.at(nx, ny) >= 0) continue;
            out.labels.at(nx, ny) = id;
            stack.push_back({nx, ny});
          }
        }
      }
      out.components.push_back(comp);
    }
  }
  return out;
}

}  // namespace slidestitch
