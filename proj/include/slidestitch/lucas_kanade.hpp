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

#include <cmath>
#include <span>
#include <vector>

#include "slidestitch/core.hpp"
#include "slidestitch/corners.hpp"
#include "slidestitch/image_ops.hpp"
#include "slidestitch/pyramid.hpp"

namespace slidestitch {

struct LkParams {
  int window = 21;  // odd
  int levels = 3;
  int max_iters = 30;
  double eps = 0.01;  // px, update norm that counts as converged
};

// Result for one tracked point. `translation` uses the frame-placement
// convention shared by the whole pipeline: a feature at p in `prev` was found
// at p - translation in `next`, i.e. it is the displacement of next's origin
// relative to prev's origin.
struct PointTrack {
  Translation2D translation;
  bool converged = false;
};

// Pyramidal (coarse-to-fine) iterative Lucas-Kanade. Runs on the common
// levels of both pyramids.
inline std::vector<PointTrack> lk_track(const Pyramid& prev, const Pyramid& next, std::span<const Corner> points,
                                        int window, int max_iters, double eps) {
  if (window < 3 || window % 2 == 0) throw ValidationError("LK window must be odd and at least 3");
  if (prev.size() == 0 || next.size() == 0) throw ValidationError("empty pyramid");
  if (prev[0].width() != next[0].width() || prev[0].height() != next[0].height()) {
    throw ValidationError("LK pyramids come from differently sized frames");
  }
  std::vector<PointTrack> out(points.size());
  if (points.empty()) return out;

  const int levels = static_cast<int>(std::min(prev.size(), next.size()));
  std::vector<Gradients> grads;
  grads.reserve(levels);
  for (int l = 0; l < levels; ++l) grads.push_back(sobel(prev[l].raster()));

  const int half = window / 2;
  const std::size_t area = static_cast<std::size_t>(window) * window;
  std::vector<double> patch(area), ix(area), iy(area), moved(area);
  const double width0 = prev[0].width(), height0 = prev[0].height();

  for (std::size_t k = 0; k < points.size(); ++k) {
    double gx = 0.0, gy = 0.0;  // flow guess at the current level
    bool ok = true;
    bool converged_finest = false;
    for (int l = levels - 1; l >= 0 && ok; --l) {
      const double scale = std::ldexp(1.0, -l);
      const double px = points[k].x * scale, py = points[k].y * scale;
      const Raster<float>& pimg = prev[l].raster();
      const Raster<float>& nimg = next[l].raster();

      sample_window(pimg, px, py, half, patch);
      sample_window(grads[l].gx, px, py, half, ix);
      sample_window(grads[l].gy, px, py, half, iy);
      double a = 0.0, b = 0.0, c = 0.0;
      for (std::size_t i = 0; i < area; ++i) {
        a += ix[i] * ix[i];
        b += ix[i] * iy[i];
        c += iy[i] * iy[i];
      }
      const double det = a * c - b * b;
      if (min_eigenvalue(a, b, c) / static_cast<double>(area) < 1e-7 || det <= 0.0) {
        ok = false;
        break;
      }

      double vx = 0.0, vy = 0.0;
      bool converged = false;
      for (int it = 0; it < max_iters; ++it) {
        double bx = 0.0, by = 0.0;
        sample_window(nimg, px + gx + vx, py + gy + vy, half, moved);
        for (std::size_t i = 0; i < area; ++i) {
          const double diff = patch[i] - moved[i];
          bx += diff * ix[i];
          by += diff * iy[i];
        }
        const double ex = (c * bx - b * by) / det;
        const double ey = (a * by - b * bx) / det;
        vx += ex;
        vy += ey;
        if (!std::isfinite(vx) || !std::isfinite(vy)) {
          ok = false;
          break;
        }
        if (std::hypot(ex, ey) < eps) {
          converged = true;
          break;
        }
      }
      if (!ok) break;
      if (l > 0) {
        gx = 2.0 * (gx + vx);
        gy = 2.0 * (gy + vy);
      } else {
        gx += vx;
        gy += vy;
        converged_finest = converged;
      }
    }
    const double fx = points[k].x + gx, fy = points[k].y + gy;
    const bool inside = fx >= 0.0 && fy >= 0.0 && fx <= width0 - 1.0 && fy <= height0 - 1.0;
    out[k].translation = {-gx, -gy};
    out[k].converged = ok && converged_finest && inside;
  }
  return out;
}

inline std::vector<PointTrack> lk_track(const Pyramid& prev, const Pyramid& next, std::span<const Corner> points,
                                        const LkParams& params = {}) {
  return lk_track(prev, next, points, params.window, params.max_iters, params.eps);
}

}  // namespace slidestitch
