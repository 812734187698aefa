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
#include <vector>

#include "slidestitch/core.hpp"
#include "slidestitch/image_ops.hpp"

namespace slidestitch {

struct Corner {
  double x = 0.0;
  double y = 0.0;
  double score = 0.0;  // min eigenvalue of the windowed structure tensor
};

struct ShiTomasiParams {
  int max_corners = 200;
  double quality = 0.01;     // fraction of the strongest response
  double min_distance = 10;  // pixels, between accepted corners
  int score_window = 7;      // odd side of the structure-tensor window
};

// Smaller eigenvalue of [[a, b], [b, c]].
inline double min_eigenvalue(double a, double b, double c) {
  return 0.5 * (a + c - std::sqrt((a - c) * (a - c) + 4.0 * b * b));
}

namespace detail {

// Box sum of side `window` centered on each pixel, replicated borders.
inline Raster<double> box_sum_clamped(const Raster<double>& src, int window) {
  const int w = src.width(), h = src.height(), r = window / 2;
  Raster<double> tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y) {
    const double* s = src.row(y);
    double* d = tmp.row(y);
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int t = -r; t <= r; ++t) acc += s[clamp_index(x + t, w)];
      d[x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    double* d = out.row(y);
    for (int t = -r; t <= r; ++t) {
      const double* s = tmp.row(clamp_index(y + t, h));
      for (int x = 0; x < w; ++x) d[x] += s[x];
    }
  }
  return out;
}

}  // namespace detail

// Per-pixel min-eigenvalue response over a window x window neighbourhood of
// Sobel gradient products.
inline Raster<double> min_eigen_map(const GrayImage& img, int window = 7) {
  if (window < 1 || window % 2 == 0) throw ValidationError("score window must be odd and positive");
  const Gradients g = sobel(img.raster());
  const int w = img.width(), h = img.height();
  Raster<double> xx(w, h), xy(w, h), yy(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = g.gx.at(x, y), gy = g.gy.at(x, y);
      xx.at(x, y) = gx * gx;
      xy.at(x, y) = gx * gy;
      yy.at(x, y) = gy * gy;
    }
  }
  const auto a = detail::box_sum_clamped(xx, window);
  const auto b = detail::box_sum_clamped(xy, window);
  const auto c = detail::box_sum_clamped(yy, window);
  Raster<double> score(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) score.at(x, y) = std::max(0.0, min_eigenvalue(a.at(x, y), b.at(x, y), c.at(x, y)));
  }
  return score;
}

// Good-features-to-track selection: local maxima of the min-eigenvalue map
// above quality * max, strongest first, greedily spaced by min_distance.
// Positions are refined to sub-pixel precision with a parabola through the
// score map.
inline std::vector<Corner> shi_tomasi(const GrayImage& img, const ShiTomasiParams& params = {}) {
  if (img.width() < 8 || img.height() < 8) throw ValidationError("shi_tomasi needs an image of at least 8x8");
  if (!(params.quality > 0.0 && params.quality <= 1.0)) throw ValidationError("quality must lie in (0, 1]");
  if (params.max_corners <= 0) return {};

  const Raster<double> score = min_eigen_map(img, params.score_window);
  const int w = score.width(), h = score.height();
  double best = 0.0;
  for (double v : score.values()) best = std::max(best, v);
  if (best <= 1e-12) return {};
  const double threshold = params.quality * best;

  std::vector<Corner> candidates;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = score.at(x, y);
      if (v < threshold) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if ((dx || dy) && score.contains(x + dx, y + dy) && score.at(x + dx, y + dy) > v) {
            is_max = false;
            break;
          }
        }
      }
      if (!is_max) continue;
      double ox = 0.0, oy = 0.0;
      if (x > 0 && x < w - 1) {
        const double l = score.at(x - 1, y), r = score.at(x + 1, y), den = l - 2.0 * v + r;
        if (den < 0.0) ox = std::clamp(0.5 * (l - r) / den, -0.5, 0.5);
      }
      if (y > 0 && y < h - 1) {
        const double u = score.at(x, y - 1), d = score.at(x, y + 1), den = u - 2.0 * v + d;
        if (den < 0.0) oy = std::clamp(0.5 * (u - d) / den, -0.5, 0.5);
      }
      const double cx = std::clamp(x + ox, 0.0, std::nextafter(static_cast<double>(w), 0.0));
      const double cy = std::clamp(y + oy, 0.0, std::nextafter(static_cast<double>(h), 0.0));
      candidates.push_back({cx, cy, v});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Corner& a, const Corner& b) { return a.score > b.score; });

  // Accepted corners bucketed on a grid of cell size min_distance.
  const double cell = std::max(1.0, params.min_distance);
  const int gw = static_cast<int>(std::ceil(w / cell)) + 1, gh = static_cast<int>(std::ceil(h / cell)) + 1;
  std::vector<std::vector<int>> grid(static_cast<std::size_t>(gw) * gh);
  const double min_d2 = params.min_distance * params.min_distance;

  std::vector<Corner> accepted;
  for (const Corner& c : candidates) {
    const int gx = static_cast<int>(c.x / cell), gy = static_cast<int>(c.y / cell);
    bool ok = true;
    for (int yy = std::max(0, gy - 1); yy <= std::min(gh - 1, gy + 1) && ok; ++yy) {
      for (int xx = std::max(0, gx - 1); xx <= std::min(gw - 1, gx + 1) && ok; ++xx) {
        for (int idx : grid[static_cast<std::size_t>(yy) * gw + xx]) {
          const double ddx = accepted[idx].x - c.x, ddy = accepted[idx].y - c.y;
          if (ddx * ddx + ddy * ddy < min_d2) {
            ok = false;
            break;
          }
        }
      }
    }
    if (!ok) continue;
    grid[static_cast<std::size_t>(gy) * gw + gx].push_back(static_cast<int>(accepted.size()));
    accepted.push_back(c);
    if (static_cast<int>(accepted.size()) == params.max_corners) break;
  }
  return accepted;
}

}  // namespace slidestitch
