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
#include <optional>
#include <span>
#include <vector>

#include "slidestitch/core.hpp"
#include "slidestitch/corners.hpp"
#include "slidestitch/image_ops.hpp"
#include "slidestitch/morphology.hpp"
#include "slidestitch/pyramid.hpp"

namespace slidestitch {

// A patch cut from a source frame, with its upper-left corner in that frame.
// Keeps the zero-mean copy of the patch that every correlation needs.
class Template {
 public:
  Template(GrayImage patch, int origin_x, int origin_y) : patch_(std::move(patch)), x_(origin_x), y_(origin_y) {
    if (patch_.empty()) throw ValidationError("empty template");
    double mean = 0.0;
    for (float v : patch_.values()) mean += v;
    mean /= static_cast<double>(patch_.size());
    centered_.resize(patch_.size());
    double ss = 0.0;
    for (std::size_t i = 0; i < patch_.size(); ++i) {
      centered_[i] = static_cast<float>(patch_.values()[i] - mean);
      ss += static_cast<double>(centered_[i]) * centered_[i];
    }
    if (ss <= 1e-12) throw ValidationError("template has zero variance");
    norm_ = std::sqrt(ss);
  }

  // Cuts the template out of `frame`; rejects rectangles leaving the frame.
  static Template cut(const GrayImage& frame, int x, int y, int width, int height) {
    if (x < 0 || y < 0 || width <= 0 || height <= 0 || x + width > frame.width() || y + height > frame.height()) {
      throw ValidationError("template rectangle leaves its source frame");
    }
    return Template(crop(frame, x, y, width, height), x, y);
  }

  const GrayImage& patch() const { return patch_; }
  int x() const { return x_; }
  int y() const { return y_; }
  int width() const { return patch_.width(); }
  int height() const { return patch_.height(); }
  std::span<const float> centered() const { return centered_; }
  double norm() const { return norm_; }

 private:
  GrayImage patch_;
  int x_ = 0;
  int y_ = 0;
  std::vector<float> centered_;
  double norm_ = 0.0;
};

struct MatchResult {
  Translation2D translation;  // source frame origin -> target frame origin
  double correlation = 0.0;   // ZNCC at the best placement
  double x = 0.0;             // best placement of the template in the target
  double y = 0.0;
};

namespace detail {

inline float dot(const float* a, const float* b, int n) {
  float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    for (int k = 0; k < 8; ++k) acc[k] += a[i + k] * b[i + k];
  }
  float s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace detail

// Matching target with the running sums (integral images of I and I^2) that
// make the per-placement window mean and variance O(1). Does not own the
// image; the image must outlive it.
class NccTarget {
 public:
  explicit NccTarget(const GrayImage& image) : image_(&image) {
    const Raster<float>& r = image.raster();
    Raster<double> sq(r.width(), r.height());
    for (int y = 0; y < r.height(); ++y) {
      for (int x = 0; x < r.width(); ++x) sq.at(x, y) = static_cast<double>(r.at(x, y)) * r.at(x, y);
    }
    sum_ = integral_image(r);
    sqsum_ = integral_image(sq);
  }

  const GrayImage& image() const { return *image_; }
  int width() const { return image_->width(); }
  int height() const { return image_->height(); }

  // ZNCC of the template placed with its upper-left corner at (x, y).
  // Placements over a flat target window score 0.
  double score(const Template& t, int x, int y) const {
    const int tw = t.width(), th = t.height();
    const double n = static_cast<double>(tw) * th;
    const double s = box_sum(sum_, x, y, tw, th);
    const double s2 = box_sum(sqsum_, x, y, tw, th);
    const double var = s2 - s * s / n;
    if (var <= 1e-9) return 0.0;
    double cross = 0.0;
    const float* tc = t.centered().data();
    for (int r = 0; r < th; ++r) cross += detail::dot(tc + static_cast<std::size_t>(r) * tw, image_->row(y + r) + x, tw);
    return std::clamp(cross / (t.norm() * std::sqrt(var)), -1.0, 1.0);
  }

 private:
  const GrayImage* image_;
  Raster<double> sum_;
  Raster<double> sqsum_;
};

struct MatchOptions {
  bool subpixel = false;  // parabolic refinement of the correlation peak
};

namespace detail {

struct Placement {
  int x = 0, y = 0;
  double score = -2.0;
};

// Integer placements with upper-left inside [x0, x1] x [y0, y1] clipped to
// where the template fits in the target.
struct Window {
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;
  bool empty() const { return x1 < x0 || y1 < y0; }
};

inline Window clip_window(double cx, double cy, double radius, int tw, int th, int w, int h) {
  Window win;
  win.x0 = std::max(0, static_cast<int>(std::ceil(cx - radius - 1e-9)));
  win.y0 = std::max(0, static_cast<int>(std::ceil(cy - radius - 1e-9)));
  win.x1 = std::min(w - tw, static_cast<int>(std::floor(cx + radius + 1e-9)));
  win.y1 = std::min(h - th, static_cast<int>(std::floor(cy + radius + 1e-9)));
  return win;
}

// Exhaustive scan; ties go to the smallest (y, x).
inline Placement best_in_window(const Template& t, const NccTarget& target, const Window& win) {
  Placement best;
  for (int y = win.y0; y <= win.y1; ++y) {
    for (int x = win.x0; x <= win.x1; ++x) {
      const double s = target.score(t, x, y);
      if (s > best.score) best = {x, y, s};
    }
  }
  return best;
}

inline double parabola_offset(double left, double mid, double right) {
  const double den = left - 2.0 * mid + right;
  if (den >= 0.0) return 0.0;
  return std::clamp(0.5 * (left - right) / den, -0.5, 0.5);
}

inline MatchResult finish(const Template& t, const NccTarget& target, const Placement& best, bool subpixel) {
  double px = best.x, py = best.y;
  if (subpixel) {
    const int w = target.width() - t.width(), h = target.height() - t.height();
    if (best.x > 0 && best.x < w) {
      px += parabola_offset(target.score(t, best.x - 1, best.y), best.score, target.score(t, best.x + 1, best.y));
    }
    if (best.y > 0 && best.y < h) {
      py += parabola_offset(target.score(t, best.x, best.y - 1), best.score, target.score(t, best.x, best.y + 1));
    }
  }
  return {{t.x() - px, t.y() - py}, best.score, px, py};
}

}  // namespace detail

// Exhaustive ZNCC search. `search_center` is the predicted source->target
// frame translation; the template is expected at (origin - search_center) in
// the target and every integer placement within search_radius (per axis) of
// that point that keeps the template inside the target is scored. Returns
// nullopt when no such placement exists.
inline std::optional<MatchResult> match_template(const Template& t, const NccTarget& target,
                                                 const Translation2D& search_center, double search_radius,
                                                 const MatchOptions& opts = {}) {
  if (t.width() > target.width() || t.height() > target.height()) {
    throw ValidationError("template larger than target");
  }
  const auto win = detail::clip_window(t.x() - search_center.dx, t.y() - search_center.dy, search_radius, t.width(),
                                       t.height(), target.width(), target.height());
  if (win.empty()) return std::nullopt;
  return detail::finish(t, target, detail::best_in_window(t, target, win), opts.subpixel);
}

inline std::optional<MatchResult> match_template(const Template& t, const GrayImage& target,
                                                 const Translation2D& search_center, double search_radius,
                                                 const MatchOptions& opts = {}) {
  return match_template(t, NccTarget(target), search_center, search_radius, opts);
}

// Everything needed to match templates into one frame at several scales.
struct MatchPyramid {
  Pyramid images;
  std::vector<NccTarget> targets;

  explicit MatchPyramid(const GrayImage& frame, int levels) {
    int usable = 1;
    for (int w = frame.width(), h = frame.height(); usable < levels;) {
      w = (w + 1) / 2;
      h = (h + 1) / 2;
      if (w < 8 || h < 8) break;
      ++usable;
    }
    images = build_pyramid(frame, usable);
    targets.reserve(images.size());
    for (const auto& level : images.levels) targets.emplace_back(level);
  }
  MatchPyramid(const MatchPyramid&) = delete;
  MatchPyramid& operator=(const MatchPyramid&) = delete;
};

struct CoarseToFineOptions {
  int levels = 2;          // coarsest level used for the wide search
  int peaks = 4;           // coarse maxima re-examined at full resolution
  int min_coarse_side = 8; // never shrink a template below this
  bool subpixel = true;
};

// Wide-window search: exhaustive ZNCC at a coarse level, then exhaustive
// full-resolution searches of +-(2^level + 1) px around the strongest coarse
// local maxima. The template's coarse version is cut from the source frame's
// own pyramid. Falls back to a single exhaustive search when the window is
// small or the template too small to shrink.
inline std::optional<MatchResult> match_template_coarse_to_fine(const Template& t, const MatchPyramid& source,
                                                                const MatchPyramid& target,
                                                                const Translation2D& search_center,
                                                                double search_radius,
                                                                const CoarseToFineOptions& opts = {}) {
  const NccTarget& full = target.targets.front();
  if (t.width() > full.width() || t.height() > full.height()) throw ValidationError("template larger than target");
  const double cx = t.x() - search_center.dx, cy = t.y() - search_center.dy;
  const auto full_win = detail::clip_window(cx, cy, search_radius, t.width(), t.height(), full.width(), full.height());
  if (full_win.empty()) return std::nullopt;

  int level = std::min<int>({opts.levels, static_cast<int>(source.images.size()) - 1,
                             static_cast<int>(target.images.size()) - 1});
  while (level > 0 && ((t.width() >> level) < opts.min_coarse_side || (t.height() >> level) < opts.min_coarse_side ||
                       search_radius < (2 << level))) {
    --level;
  }
  if (level == 0) return detail::finish(t, full, detail::best_in_window(t, full, full_win), opts.subpixel);

  const double scale = std::ldexp(1.0, -level);
  const int cw = t.width() >> level, ch = t.height() >> level;
  const GrayImage& src_level = source.images[level];
  const int ox = std::min(static_cast<int>(std::lround(t.x() * scale)), src_level.width() - cw);
  const int oy = std::min(static_cast<int>(std::lround(t.y() * scale)), src_level.height() - ch);
  std::optional<Template> coarse;
  try {
    coarse.emplace(crop(src_level, ox, oy, cw, ch), ox, oy);
  } catch (const ValidationError&) {
    return detail::finish(t, full, detail::best_in_window(t, full, full_win), opts.subpixel);
  }

  const NccTarget& ctarget = target.targets[level];
  const auto cwin = detail::clip_window(cx * scale, cy * scale, search_radius * scale + 1.0, cw, ch,
                                        ctarget.width(), ctarget.height());
  if (cwin.empty()) return detail::finish(t, full, detail::best_in_window(t, full, full_win), opts.subpixel);

  const int gw = cwin.x1 - cwin.x0 + 1, gh = cwin.y1 - cwin.y0 + 1;
  Raster<double> scores(gw, gh);
  for (int y = 0; y < gh; ++y) {
    for (int x = 0; x < gw; ++x) scores.at(x, y) = ctarget.score(*coarse, cwin.x0 + x, cwin.y0 + y);
  }
  std::vector<detail::Placement> maxima;
  for (int y = 0; y < gh; ++y) {
    for (int x = 0; x < gw; ++x) {
      const double v = scores.at(x, y);
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if ((dx || dy) && scores.contains(x + dx, y + dy) && scores.at(x + dx, y + dy) > v) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) maxima.push_back({cwin.x0 + x, cwin.y0 + y, v});
    }
  }
  std::stable_sort(maxima.begin(), maxima.end(),
                   [](const detail::Placement& a, const detail::Placement& b) { return a.score > b.score; });
  if (static_cast<int>(maxima.size()) > opts.peaks) maxima.resize(opts.peaks);

  detail::Placement best;
  const int refine = (1 << level) + 1;
  for (const auto& m : maxima) {
    detail::Window win{std::max(full_win.x0, (m.x << level) - refine), std::min(full_win.x1, (m.x << level) + refine),
                       std::max(full_win.y0, (m.y << level) - refine), std::min(full_win.y1, (m.y << level) + refine)};
    if (win.empty()) continue;
    const auto p = detail::best_in_window(t, full, win);
    if (p.score > best.score || (p.score == best.score && (p.y < best.y || (p.y == best.y && p.x < best.x)))) {
      best = p;
    }
  }
  if (best.score < -1.5) return std::nullopt;
  return detail::finish(t, full, best, opts.subpixel);
}

struct TemplateParams {
  int dilation_radius = 19;
  int max_templates = 16;
  int min_size = 16;
  int max_size = 128;
};

// Marks every corner pixel, dilates the mask, and turns each connected
// component whose bounding box sides lie in [min_size, max_size] into a
// template. Templates are ranked by the summed score of the corners they
// contain; flat patches are skipped.
inline std::vector<Template> extract_templates(const GrayImage& frame, std::span<const Corner> corners,
                                               const TemplateParams& params = {}) {
  if (corners.empty()) return {};
  const int w = frame.width(), h = frame.height();
  BinaryMask mask(w, h, 0);
  std::vector<std::pair<int, int>> pixels;
  pixels.reserve(corners.size());
  for (const Corner& c : corners) {
    if (!(c.x >= 0.0 && c.y >= 0.0 && c.x < w && c.y < h)) throw ValidationError("corner outside frame");
    const int x = clamp_index(static_cast<int>(std::lround(c.x)), w);
    const int y = clamp_index(static_cast<int>(std::lround(c.y)), h);
    mask.at(x, y) = 1;
    pixels.push_back({x, y});
  }
  const ComponentLabels cc = connected_components(dilate_mask(mask, params.dilation_radius));
  std::vector<double> support(cc.components.size(), 0.0);
  for (std::size_t i = 0; i < corners.size(); ++i) {
    support[cc.labels.at(pixels[i].first, pixels[i].second)] += corners[i].score;
  }
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < cc.components.size(); ++i) {
    const Component& comp = cc.components[i];
    if (comp.width() >= params.min_size && comp.width() <= params.max_size && comp.height() >= params.min_size &&
        comp.height() <= params.max_size) {
      order.push_back(i);
    }
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return support[a] > support[b]; });

  std::vector<Template> out;
  for (std::size_t i : order) {
    if (static_cast<int>(out.size()) >= params.max_templates) break;
    const Component& comp = cc.components[i];
    try {
      out.push_back(Template::cut(frame, comp.min_x, comp.min_y, comp.width(), comp.height()));
    } catch (const ValidationError&) {
      // flat patch
    }
  }
  return out;
}

}  // namespace slidestitch
