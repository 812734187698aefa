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

// Simulated microscope video scan of a large source image.
//
// The scan starts with the patch at the source's upper-left corner and moves
// in a serpentine: a pass to the right, a run of downward steps, a pass to
// the left, and so on. Every step has a magnitude drawn around a per-scan
// mean and a direction rotated away from its nominal heading (right, left or
// down) by a Gaussian angle. Four quantities are drawn once per scan: the
// mean step magnitude, the noise factor (step std = mean / noise factor),
// the angular std and the overlap between successive rows.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "slidestitch/core.hpp"
#include "slidestitch/image_ops.hpp"
#include "slidestitch/parallel.hpp"

namespace slidestitch {

struct Range {
  double low = 0.0;
  double high = 0.0;
};

struct SimConfig {
  int patch = 512;
  Range mag_range{512.0 / 35.0, 512.0 / 25.0};  // 14.62 .. 20.48 px
  Range noise_factor_range{5.0, 25.0};
  Range angle_std_range_deg{1.0, 15.0};
  Range row_overlap_range{0.2, 0.4};
  std::uint64_t seed = 0;

  void validate() const {
    auto check = [](const Range& r, const char* name) {
      if (std::isnan(r.low) || std::isnan(r.high) || r.low > r.high) {
        throw ValidationError(std::string(name) + " range must satisfy low <= high");
      }
    };
    check(mag_range, "mag");
    check(noise_factor_range, "noise_factor");
    check(angle_std_range_deg, "angle_std_deg");
    check(row_overlap_range, "row_overlap");
    if (patch < 64) throw ValidationError("patch must be at least 64 px");
    if (!(mag_range.high < patch)) throw ValidationError("mean step must stay below the patch size");
    if (mag_range.low < 0.0 || noise_factor_range.low <= 0.0 || angle_std_range_deg.low < 0.0) {
      throw ValidationError("magnitude, noise factor and angle std must be non-negative");
    }
    if (row_overlap_range.low < 0.0 || row_overlap_range.high >= 1.0) {
      throw ValidationError("row overlap must lie in [0, 1)");
    }
  }
};

// The four per-scan draws.
struct ScanRealization {
  double mean_mag = 0.0;
  double noise_factor = 0.0;
  double angle_std_deg = 0.0;
  double row_overlap = 0.0;

  double step_std() const { return mean_mag / noise_factor; }
};

enum class StepKind { Right, Left, Down };

struct ScanPlan {
  ScanRealization realization;
  std::vector<Translation2D> steps;
  std::vector<StepKind> kinds;  // nominal heading of each step
  int rows = 0;                 // horizontal passes started
};

// Unit vector of the nominal heading.
inline Translation2D heading(StepKind kind) {
  switch (kind) {
    case StepKind::Right: return {1.0, 0.0};
    case StepKind::Left: return {-1.0, 0.0};
    case StepKind::Down: return {0.0, 1.0};
  }
  return {};
}

// Signed angle (degrees) between a step and its nominal heading.
inline double angle_deviation_deg(const Translation2D& step, StepKind kind) {
  const Translation2D u = heading(kind);
  const double along = step.dx * u.dx + step.dy * u.dy;
  const double across = u.dx * step.dy - u.dy * step.dx;
  return std::atan2(across, along) * 180.0 / std::numbers::pi;
}

namespace detail {

inline double draw(Rng& rng, const Range& r) { return r.low == r.high ? r.low : rng.uniform(r.low, r.high); }

inline Translation2D rotated_step(StepKind kind, double magnitude, double deviation_deg) {
  const Translation2D u = heading(kind);
  const double a = deviation_deg * std::numbers::pi / 180.0;
  const double c = std::cos(a), s = std::sin(a);
  return {magnitude * (u.dx * c - u.dy * s), magnitude * (u.dx * s + u.dy * c)};
}

}  // namespace detail

// Plans the serpentine scan over a source of the given size.
//
// A step that would push the patch out through a side parallel to its
// heading (top/bottom during a pass, left/right during a row change) is
// mirrored about the heading, which keeps its magnitude and |angle|. A pass
// ends at the first step that still leaves the source; the scan ends when a
// row-change step would leave it.
inline ScanPlan plan_scan(int source_w, int source_h, const SimConfig& cfg) {
  cfg.validate();
  if (source_w < 2 * cfg.patch || source_h < 2 * cfg.patch) {
    throw ValidationError("source must be at least twice the patch size in each axis");
  }
  Rng rng(cfg.seed);
  ScanPlan plan;
  ScanRealization& real = plan.realization;
  real.mean_mag = detail::draw(rng, cfg.mag_range);
  real.noise_factor = detail::draw(rng, cfg.noise_factor_range);
  real.angle_std_deg = detail::draw(rng, cfg.angle_std_range_deg);
  real.row_overlap = detail::draw(rng, cfg.row_overlap_range);

  const double max_x = source_w - cfg.patch, max_y = source_h - cfg.patch;
  const double mag_std = real.mean_mag / real.noise_factor;
  auto inside = [&](const Point2& p) { return p.x >= 0.0 && p.y >= 0.0 && p.x <= max_x && p.y <= max_y; };
  // Returns false when neither the drawn step nor its mirror keeps the patch inside.
  auto try_step = [&](Point2& pos, StepKind kind) {
    const double mag = real.mean_mag + rng.normal(0.0, 1.0) * mag_std;
    const double dev = rng.normal(0.0, 1.0) * real.angle_std_deg;
    for (double d : {dev, -dev}) {
      const Translation2D s = detail::rotated_step(kind, mag, d);
      if (inside(pos + s)) {
        pos = pos + s;
        plan.steps.push_back(s);
        plan.kinds.push_back(kind);
        return true;
      }
    }
    return false;
  };

  constexpr std::size_t kMaxSteps = 50'000'000;
  Point2 pos{0.0, 0.0};
  StepKind dir = StepKind::Right;
  while (plan.steps.size() < kMaxSteps) {
    ++plan.rows;
    while (plan.steps.size() < kMaxSteps && try_step(pos, dir)) {
    }
    const double target = cfg.patch * (1.0 - real.row_overlap);
    const double start_y = pos.y;
    while (pos.y - start_y < target) {
      if (!try_step(pos, StepKind::Down)) return plan;
    }
    dir = dir == StepKind::Right ? StepKind::Left : StepKind::Right;
  }
  return plan;
}

// Crops one patch per planned position; frame 0 sits at the source's
// upper-left corner. Fractional positions are resampled bilinearly.
inline FrameSequence render_scan(const GrayImage& source, std::span<const Translation2D> steps, const SimConfig& cfg,
                                 std::string source_id = {}) {
  FrameSequence seq;
  seq.truth_steps.assign(steps.begin(), steps.end());
  seq.truth_coords = compose_coords(steps);
  seq.source_id = std::move(source_id);
  seq.seed = cfg.seed;
  seq.frames.resize(seq.truth_coords.size());
  parallel_for(seq.frames.size(), [&](std::size_t i) {
    const Point2 p = seq.truth_coords[i];
    seq.frames[i] = crop(source, p.x, p.y, cfg.patch, cfg.patch);
  });
  return seq;
}

}  // namespace slidestitch
