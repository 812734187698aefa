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

#include <string>
#include <vector>

#include "slidestitch/core.hpp"
#include "slidestitch/image_ops.hpp"

namespace slidestitch {

// Level 0 is the input; level k+1 is level k blurred (5-tap binomial) and
// decimated by two, with dimensions ceil(previous / 2).
struct Pyramid {
  std::vector<GrayImage> levels;

  std::size_t size() const { return levels.size(); }
  const GrayImage& operator[](std::size_t i) const { return levels[i]; }
};

inline Pyramid build_pyramid(const GrayImage& img, int levels) {
  if (levels < 1) throw ValidationError("pyramid needs at least one level");
  int w = img.width(), h = img.height();
  for (int l = 1; l < levels; ++l) {
    w = (w + 1) / 2;
    h = (h + 1) / 2;
  }
  if (w < 8 || h < 8) {
    throw ValidationError("pyramid with " + std::to_string(levels) + " levels would shrink a " +
                          std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                          " image below 8x8");
  }
  Pyramid p;
  p.levels.reserve(levels);
  p.levels.push_back(img);
  for (int l = 1; l < levels; ++l) p.levels.push_back(GrayImage::adopt(half_scale(p.levels.back().raster())));
  return p;
}

}  // namespace slidestitch
