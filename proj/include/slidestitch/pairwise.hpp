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

// Stage one: one translation per consecutive pair of retained frames, and
// the approximate stitch obtained by chaining them.

#include <algorithm>
#include <span>
#include <variant>
#include <vector>

#include "slidestitch/core.hpp"
#include "slidestitch/corners.hpp"
#include "slidestitch/csv_io.hpp"
#include "slidestitch/log.hpp"
#include "slidestitch/lucas_kanade.hpp"
#include "slidestitch/parallel.hpp"
#include "slidestitch/pyramid.hpp"

namespace slidestitch {

struct LkPairParams {
  ShiTomasiParams corners;
  LkParams lk;
  double inlier_radius = 1.5;  // px from the median that counts as agreeing
  std::size_t min_points = 4;  // converged tracks needed for an estimate
};

// Componentwise median; the mean of the two middle values for even counts.
inline Translation2D median_translation(std::span<const Translation2D> flows) {
  if (flows.empty()) throw ValidationError("median of an empty set");
  auto median = [](std::vector<double> v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    const double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + mid));
  };
  std::vector<double> xs, ys;
  xs.reserve(flows.size());
  ys.reserve(flows.size());
  for (const auto& f : flows) {
    xs.push_back(f.dx);
    ys.push_back(f.dy);
  }
  return {median(std::move(xs)), median(std::move(ys))};
}

// Single-translation estimate from tracked Shi-Tomasi corners: median of the
// converged tracks, confidence = share of those tracks within inlier_radius
// of the median. Returns (0,0) with confidence 0 when too few tracks converge.
inline PairEstimate estimate_pair_lk(const Pyramid& prev, const Pyramid& next, const LkPairParams& params = {}) {
  if (prev[0].width() != next[0].width() || prev[0].height() != next[0].height()) {
    throw ValidationError("frame pair has mismatched dimensions");
  }
  const auto corners = shi_tomasi(prev[0], params.corners);
  const auto tracks = lk_track(prev, next, corners, params.lk);
  std::vector<Translation2D> good;
  for (const auto& t : tracks) {
    if (t.converged) good.push_back(t.translation);
  }
  if (good.size() < params.min_points) return {};
  const Translation2D med = median_translation(good);
  const auto inliers = std::count_if(good.begin(), good.end(),
                                     [&](const Translation2D& t) { return (t - med).norm() <= params.inlier_radius; });
  return {med, static_cast<double>(inliers) / static_cast<double>(good.size())};
}

inline PairEstimate estimate_pair_lk(const GrayImage& prev, const GrayImage& next, const LkPairParams& params = {}) {
  if (prev.width() != next.width() || prev.height() != next.height()) {
    throw ValidationError("frame pair has mismatched dimensions");
  }
  return estimate_pair_lk(build_pyramid(prev, params.lk.levels), build_pyramid(next, params.lk.levels), params);
}

// Lucas-Kanade. With `chain` set, the translation between two retained
// frames is the sum of the estimates over every consecutive frame pair
// between them; otherwise the retained frames are registered directly.
struct LkEstimator {
  LkPairParams params;
  bool chain = false;
};

// Predictions produced elsewhere, one per retained pair, in order.
struct ExternalFlowEstimator {
  std::vector<PairEstimate> flows;
};

using PairwiseEstimator = std::variant<LkEstimator, ExternalFlowEstimator>;

struct ApproxStitch {
  CoordinateSet coords;  // == compose_coords(steps)
  std::vector<Translation2D> steps;
  std::vector<double> confidence;
  std::vector<std::size_t> retained;  // original frame index of each node
};

inline std::vector<std::size_t> retained_indices(std::size_t frame_count, std::size_t stride) {
  if (stride < 1) throw ValidationError("stride must be at least 1");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < frame_count; i += stride) out.push_back(i);
  return out;
}

namespace detail {

inline PairEstimate chained_lk(std::span<const GrayImage> frames, std::size_t from, std::size_t to,
                               const LkPairParams& params) {
  PairEstimate total{{0.0, 0.0}, 1.0};
  Pyramid prev = build_pyramid(frames[from], params.lk.levels);
  for (std::size_t i = from; i < to; ++i) {
    Pyramid next = build_pyramid(frames[i + 1], params.lk.levels);
    PairEstimate e;
    try {
      e = estimate_pair_lk(prev, next, params);
    } catch (const std::exception& ex) {
      log().warn("LK failed on frames {}-{}: {}", i, i + 1, ex.what());
    }
    total.translation += e.translation;
    total.confidence = std::min(total.confidence, e.confidence);
    prev = std::move(next);
  }
  return total;
}

}  // namespace detail

inline ApproxStitch run_stage_one(std::span<const GrayImage> frames, const PairwiseEstimator& estimator,
                                  std::size_t stride) {
  ApproxStitch out;
  out.retained = retained_indices(frames.size(), stride);
  if (out.retained.size() < 2) throw ValidationError("stage one needs at least two retained frames");
  const std::size_t pairs = out.retained.size() - 1;
  std::vector<PairEstimate> est(pairs);

  if (const auto* ext = std::get_if<ExternalFlowEstimator>(&estimator)) {
    if (ext->flows.size() != pairs) {
      throw ValidationError("external flows cover " + std::to_string(ext->flows.size()) + " pairs, expected " +
                            std::to_string(pairs));
    }
    est = ext->flows;
  } else {
    const auto& lk = std::get<LkEstimator>(estimator);
    parallel_for(pairs, [&](std::size_t k) {
      const std::size_t a = out.retained[k], b = out.retained[k + 1];
      if (lk.chain) {
        est[k] = detail::chained_lk(frames, a, b, lk.params);
        return;
      }
      try {
        est[k] = estimate_pair_lk(frames[a], frames[b], lk.params);
      } catch (const std::exception& ex) {
        log().warn("LK failed on frames {}-{}: {}", a, b, ex.what());
        est[k] = {};
      }
    });
  }
  for (const auto& e : est) {
    const bool finite = e.translation.finite();
    out.steps.push_back(finite ? e.translation : Translation2D{});
    out.confidence.push_back(finite ? std::clamp(e.confidence, 0.0, 1.0) : 0.0);
  }
  out.coords = compose_coords(out.steps);
  return out;
}

}  // namespace slidestitch
