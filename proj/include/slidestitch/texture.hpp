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
#include <numbers>
#include <vector>

#include "slidestitch/core.hpp"

namespace slidestitch {

// Procedural stand-in for a stained tissue section: multi-octave value noise
// for tissue-scale structure and fine grain, plus dark elliptical Gaussian
// blobs for nuclei. Deterministic in `seed`.
struct TextureParams {
  int base_cell = 192;       // lattice spacing of the coarsest noise octave
  int octaves = 6;
  double persistence = 0.7;  // amplitude ratio between successive octaves
  double nuclei_per_kpx = 3.0;  // blobs per 1000 pixels
  double nucleus_sigma_min = 1.5;
  double nucleus_sigma_max = 4.0;
  double nucleus_aspect_max = 2.5;  // major / minor axis
  double nucleus_depth_min = 0.10;
  double nucleus_depth_max = 0.35;
};

namespace detail {

inline double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

// One octave of bilinear-smoothstep value noise in [-1, 1].
inline void add_value_noise(Raster<float>& out, int cell, double amplitude, Rng& rng) {
  const int gw = out.width() / cell + 2, gh = out.height() / cell + 2;
  Raster<float> lattice(gw, gh);
  for (auto& v : lattice.values()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  for (int y = 0; y < out.height(); ++y) {
    const int cy = y / cell;
    const double ty = smooth(static_cast<double>(y % cell) / cell);
    for (int x = 0; x < out.width(); ++x) {
      const int cx = x / cell;
      const double tx = smooth(static_cast<double>(x % cell) / cell);
      const double top = (1 - tx) * lattice.at(cx, cy) + tx * lattice.at(cx + 1, cy);
      const double bot = (1 - tx) * lattice.at(cx, cy + 1) + tx * lattice.at(cx + 1, cy + 1);
      out.at(x, y) += static_cast<float>(amplitude * ((1 - ty) * top + ty * bot));
    }
  }
}

}  // namespace detail

inline GrayImage make_tissue_texture(int width, int height, std::uint64_t seed, const TextureParams& p = {}) {
  if (width <= 0 || height <= 0) throw ValidationError("texture dimensions must be positive");
  Rng rng(seed);
  Raster<float> noise(width, height, 0.0f);
  double amplitude = 0.5;
  for (int o = 0, cell = p.base_cell; o < p.octaves && cell >= 2; ++o, cell /= 2, amplitude *= p.persistence) {
    detail::add_value_noise(noise, cell, amplitude, rng);
  }
  Raster<float> img(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) img.at(x, y) = static_cast<float>(0.62 + 0.28 * noise.at(x, y));
  }
  const auto blobs = static_cast<std::size_t>(p.nuclei_per_kpx * width * static_cast<double>(height) / 1000.0);
  for (std::size_t b = 0; b < blobs; ++b) {
    const double cx = rng.uniform(0.0, width), cy = rng.uniform(0.0, height);
    const double sigma = rng.uniform(p.nucleus_sigma_min, p.nucleus_sigma_max);
    const double aspect = rng.uniform(1.0, p.nucleus_aspect_max);
    const double theta = rng.uniform(0.0, std::numbers::pi);
    const double depth = rng.uniform(p.nucleus_depth_min, p.nucleus_depth_max);
    const int r = static_cast<int>(std::ceil(3.0 * sigma * std::sqrt(aspect)));
    const double inv_major = 1.0 / (2.0 * sigma * sigma * aspect), inv_minor = aspect / (2.0 * sigma * sigma);
    const double c = std::cos(theta), s = std::sin(theta);
    for (int y = std::max(0, static_cast<int>(cy) - r); y <= std::min(height - 1, static_cast<int>(cy) + r); ++y) {
      for (int x = std::max(0, static_cast<int>(cx) - r); x <= std::min(width - 1, static_cast<int>(cx) + r); ++x) {
        const double u = c * (x - cx) + s * (y - cy), v = -s * (x - cx) + c * (y - cy);
        img.at(x, y) -= static_cast<float>(depth * std::exp(-u * u * inv_major - v * v * inv_minor));
      }
    }
  }
  for (auto& v : img.values()) v = std::clamp(v, 0.02f, 0.98f);
  return GrayImage::adopt(std::move(img));
}

}  // namespace slidestitch
