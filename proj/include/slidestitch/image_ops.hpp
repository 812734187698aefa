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
#include <array>
#include <cmath>
#include <span>

#include "slidestitch/core.hpp"

namespace slidestitch {

inline int clamp_index(int i, int n) { return std::clamp(i, 0, n - 1); }

// Bilinear sample with replicated borders.
template <typename T>
double sample_bilinear(const Raster<T>& img, double x, double y) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const double ax = x - fx;
  const double ay = y - fy;
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const int w = img.width();
  const int h = img.height();
  const int xa = clamp_index(x0, w), xb = clamp_index(x0 + 1, w);
  const int ya = clamp_index(y0, h), yb = clamp_index(y0 + 1, h);
  const double top = (1.0 - ax) * img.at(xa, ya) + ax * img.at(xb, ya);
  const double bottom = (1.0 - ax) * img.at(xa, yb) + ax * img.at(xb, yb);
  return (1.0 - ay) * top + ay * bottom;
}

inline double sample_bilinear(const GrayImage& img, double x, double y) {
  return sample_bilinear(img.raster(), x, y);
}

// Samples the (2 half + 1)^2 window centred on (x, y) in row-major order.
// All samples share one fractional offset, so interior windows reuse a
// single set of bilinear weights.
template <typename T>
void sample_window(const Raster<T>& img, double x, double y, int half, std::span<double> out) {
  const int side = 2 * half + 1;
  const double fx = std::floor(x), fy = std::floor(y);
  const int x0 = static_cast<int>(fx) - half, y0 = static_cast<int>(fy) - half;
  if (x0 < 0 || y0 < 0 || x0 + side >= img.width() || y0 + side >= img.height()) {
    std::size_t i = 0;
    for (int wy = -half; wy <= half; ++wy) {
      for (int wx = -half; wx <= half; ++wx) out[i++] = sample_bilinear(img, x + wx, y + wy);
    }
    return;
  }
  const double ax = x - fx, ay = y - fy;
  const double w00 = (1.0 - ax) * (1.0 - ay), w10 = ax * (1.0 - ay), w01 = (1.0 - ax) * ay, w11 = ax * ay;
  std::size_t i = 0;
  for (int r = 0; r < side; ++r) {
    const T* r0 = img.row(y0 + r) + x0;
    const T* r1 = img.row(y0 + r + 1) + x0;
    for (int c = 0; c < side; ++c) out[i++] = w00 * r0[c] + w10 * r0[c + 1] + w01 * r1[c] + w11 * r1[c + 1];
  }
}

// width x height crop whose upper-left corner is at (x, y) in `src`. Integer
// positions copy pixels verbatim; fractional ones resample bilinearly.
inline GrayImage crop(const GrayImage& src, double x, double y, int width, int height) {
  if (x < 0.0 || y < 0.0 || x + width > src.width() || y + height > src.height()) {
    throw ValidationError("crop rectangle leaves the source image");
  }
  Raster<float> out(width, height);
  const double fx = std::floor(x), fy = std::floor(y);
  const int ix = static_cast<int>(fx), iy = static_cast<int>(fy);
  const double ax = x - fx, ay = y - fy;
  if (ax == 0.0 && ay == 0.0) {
    for (int r = 0; r < height; ++r) std::copy_n(src.row(iy + r) + ix, width, out.row(r));
    return GrayImage::adopt(std::move(out));
  }
  const int w = src.width(), h = src.height();
  for (int r = 0; r < height; ++r) {
    const float* r0 = src.row(clamp_index(iy + r, h));
    const float* r1 = src.row(clamp_index(iy + r + 1, h));
    float* dst = out.row(r);
    for (int c = 0; c < width; ++c) {
      const int c0 = clamp_index(ix + c, w), c1 = clamp_index(ix + c + 1, w);
      const double top = (1.0 - ax) * r0[c0] + ax * r0[c1];
      const double bottom = (1.0 - ax) * r1[c0] + ax * r1[c1];
      dst[c] = static_cast<float>(std::clamp((1.0 - ay) * top + ay * bottom, 0.0, 1.0));
    }
  }
  return GrayImage::adopt(std::move(out));
}

// Separable 5-tap binomial blur (1 4 6 4 1)/16 with replicated borders.
inline Raster<float> gaussian5(const Raster<float>& img) {
  constexpr std::array<float, 5> k{1.f / 16, 4.f / 16, 6.f / 16, 4.f / 16, 1.f / 16};
  const int w = img.width(), h = img.height();
  Raster<float> tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y) {
    const float* src = img.row(y);
    float* dst = tmp.row(y);
    for (int x = 0; x < w; ++x) {
      float acc = 0.f;
      for (int t = -2; t <= 2; ++t) acc += k[t + 2] * src[clamp_index(x + t, w)];
      dst[x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    float* dst = out.row(y);
    std::array<const float*, 5> rows{};
    for (int t = -2; t <= 2; ++t) rows[t + 2] = tmp.row(clamp_index(y + t, h));
    for (int x = 0; x < w; ++x) {
      float acc = 0.f;
      for (int t = 0; t < 5; ++t) acc += k[t] * rows[t][x];
      dst[x] = acc;
    }
  }
  return out;
}

// Blur then keep every second pixel; output is ceil(w/2) x ceil(h/2).
inline Raster<float> half_scale(const Raster<float>& img) {
  const Raster<float> blurred = gaussian5(img);
  const int w = (img.width() + 1) / 2, h = (img.height() + 1) / 2;
  Raster<float> out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out.at(x, y) = blurred.at(2 * x, 2 * y);
  }
  return out;
}

struct Gradients {
  Raster<float> gx;
  Raster<float> gy;
};

// 3x3 Sobel derivatives (normalized by 1/8 so a unit ramp has slope 1),
// replicated borders.
inline Gradients sobel(const Raster<float>& img) {
  const int w = img.width(), h = img.height();
  Gradients g{Raster<float>(w, h), Raster<float>(w, h)};
  for (int y = 0; y < h; ++y) {
    const float* up = img.row(clamp_index(y - 1, h));
    const float* mid = img.row(y);
    const float* dn = img.row(clamp_index(y + 1, h));
    float* gx = g.gx.row(y);
    float* gy = g.gy.row(y);
    for (int x = 0; x < w; ++x) {
      const int l = clamp_index(x - 1, w), r = clamp_index(x + 1, w);
      gx[x] = ((up[r] + 2.f * mid[r] + dn[r]) - (up[l] + 2.f * mid[l] + dn[l])) * 0.125f;
      gy[x] = ((dn[l] + 2.f * dn[x] + dn[r]) - (up[l] + 2.f * up[x] + up[r])) * 0.125f;
    }
  }
  return g;
}

// Summed-area table with one row/column of zero padding:
// table(x, y) = sum of src over [0,x) x [0,y).
template <typename T>
Raster<double> integral_image(const Raster<T>& src) {
  const int w = src.width(), h = src.height();
  Raster<double> table(w + 1, h + 1, 0.0);
  for (int y = 0; y < h; ++y) {
    double run = 0.0;
    const T* s = src.row(y);
    const double* above = table.row(y);
    double* dst = table.row(y + 1);
    for (int x = 0; x < w; ++x) {
      run += static_cast<double>(s[x]);
      dst[x + 1] = above[x + 1] + run;
    }
  }
  return table;
}

// Sum of the source over the box [x, x+w) x [y, y+h) from an integral image.
inline double box_sum(const Raster<double>& table, int x, int y, int w, int h) {
  return table.at(x + w, y + h) - table.at(x, y + h) - table.at(x + w, y) + table.at(x, y);
}

}  // namespace slidestitch
