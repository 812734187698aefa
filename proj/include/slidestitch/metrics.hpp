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

// Endpoint error (EPE) and re-centred endpoint error (Re-EPE).
//
// EPE is the mean Euclidean distance between matching elements. Re-EPE
// re-centres both coordinate sets on each node i in turn and averages the
// resulting EPEs:
//
//   re_epe(P, T) = 1/N sum_i epe(P - P[i], T - T[i])
//
// so a global offset shared by all of P (or all of T) has no effect.

#include <cmath>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slidestitch/core.hpp"
#include "slidestitch/csv_io.hpp"

namespace slidestitch {

namespace detail {

// Pairwise (tree) summation; fixes the reduction order.
inline double tree_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return tree_sum(v.first(half)) + tree_sum(v.subspan(half));
}

inline void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) throw ValidationError("length mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
  if (a == 0) throw ValidationError("metrics need at least one element");
}

}  // namespace detail

inline double epe(std::span<const Translation2D> pred, std::span<const Translation2D> truth) {
  detail::check_lengths(pred.size(), truth.size());
  std::vector<double> d(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) d[i] = (pred[i] - truth[i]).norm();
  return detail::tree_sum(d) / static_cast<double>(d.size());
}

inline double epe(const CoordinateSet& pred, const CoordinateSet& truth) {
  detail::check_lengths(pred.size(), truth.size());
  std::vector<double> d(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) d[i] = (pred[i] - truth[i]).norm();
  return detail::tree_sum(d) / static_cast<double>(d.size());
}

// Direct O(N^2) evaluation. With e_j = P[j] - T[j], the re-centred error of
// j about i is e_j - e_i.
inline double re_epe(const CoordinateSet& pred, const CoordinateSet& truth) {
  detail::check_lengths(pred.size(), truth.size());
  const std::size_t n = pred.size();
  std::vector<Translation2D> e(n);
  for (std::size_t j = 0; j < n; ++j) e[j] = pred[j] - truth[j];
  std::vector<double> per_center(n), row(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) row[j] = (e[j] - e[i]).norm();
    per_center[i] = detail::tree_sum(row) / static_cast<double>(n);
  }
  return detail::tree_sum(per_center) / static_cast<double>(n);
}

// One row of the comparison table.
struct MetricReport {
  std::string method;
  std::optional<double> epe_pairwise;  // absent for global methods
  double re_epe = 0.0;
  std::size_t n_frames = 0;
  std::size_t comparisons_made = 0;
  double wall_time = 0.0;  // seconds
};

inline MetricReport evaluate(std::string method, const CoordinateSet& pred_coords, const CoordinateSet& truth,
                             std::optional<std::span<const Translation2D>> pred_steps,
                             std::optional<std::span<const Translation2D>> truth_steps, std::size_t comparisons,
                             double wall_time) {
  MetricReport r;
  r.method = std::move(method);
  r.re_epe = re_epe(pred_coords, truth);
  r.n_frames = pred_coords.size();
  r.comparisons_made = comparisons;
  r.wall_time = wall_time;
  if (pred_steps && truth_steps) r.epe_pairwise = epe(*pred_steps, *truth_steps);
  return r;
}

inline constexpr const char* kReportHeader = "method,n_frames,epe,re_epe,comparisons,wall_time_s";

inline std::string report_csv_row(const MetricReport& r) {
  char wall[32];
  std::snprintf(wall, sizeof(wall), "%.2f", r.wall_time);
  return r.method + "," + std::to_string(r.n_frames) + "," + (r.epe_pairwise ? format_number(*r.epe_pairwise) : "") +
         "," + format_number(r.re_epe) + "," + std::to_string(r.comparisons_made) + "," + wall;
}

}  // namespace slidestitch
