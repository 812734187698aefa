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

// The five stitching methods compared by the benchmark:
//   lk                pairwise Lucas-Kanade only
//   external          pairwise predictions read from a flow file only
//   pure-graph        global alignment over all frame pairs, no prior
//   gloflow-lk        LK approximate stitch, then neighbourhood-graph alignment
//   gloflow-external  external approximate stitch, then the same alignment

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slidestitch/core.hpp"
#include "slidestitch/graph.hpp"
#include "slidestitch/metrics.hpp"
#include "slidestitch/pairwise.hpp"

namespace slidestitch {

enum class Method { Lk, External, PureGraph, GloflowLk, GloflowExternal };

inline constexpr std::array<Method, 5> kAllMethods{Method::Lk, Method::External, Method::PureGraph, Method::GloflowLk,
                                                   Method::GloflowExternal};

inline const char* method_name(Method m) {
  switch (m) {
    case Method::Lk: return "lk";
    case Method::External: return "external";
    case Method::PureGraph: return "pure-graph";
    case Method::GloflowLk: return "gloflow-lk";
    case Method::GloflowExternal: return "gloflow-external";
  }
  return "?";
}

inline Method parse_method(std::string_view name) {
  for (Method m : kAllMethods) {
    if (name == method_name(m)) return m;
  }
  throw ValidationError("unknown method '" + std::string(name) + "'");
}

inline bool is_global(Method m) { return m == Method::PureGraph || m == Method::GloflowLk || m == Method::GloflowExternal; }
inline bool needs_flows(Method m) { return m == Method::External || m == Method::GloflowExternal; }

struct PipelineOptions {
  std::size_t stride = 20;
  LkEstimator lk;
  GraphConfig graph;
};

struct MethodResult {
  Method method = Method::Lk;
  CoordinateSet coords;                             // one per retained frame
  std::optional<std::vector<Translation2D>> steps;  // stage-one methods only
  std::vector<std::size_t> retained;
  std::optional<StageTwoResult> stage_two;
  std::size_t comparisons = 0;
  double wall_time = 0.0;
};

// Runs one method over the full frame sequence. `flows` must be given for the
// external methods and hold one row per retained pair.
inline MethodResult run_method(Method method, std::span<const GrayImage> frames, const PipelineOptions& opts,
                               const std::vector<PairEstimate>* flows = nullptr) {
  const auto start = std::chrono::steady_clock::now();
  MethodResult r;
  r.method = method;
  r.retained = retained_indices(frames.size(), opts.stride);
  std::vector<const GrayImage*> nodes;
  for (std::size_t i : r.retained) nodes.push_back(&frames[i]);

  if (method == Method::PureGraph) {
    r.stage_two = run_pure_graph(nodes, opts.graph);
    r.coords = r.stage_two->coords;
    r.comparisons = r.stage_two->graph.comparisons_made;
  } else {
    PairwiseEstimator est;
    if (needs_flows(method)) {
      if (!flows) throw ValidationError(std::string(method_name(method)) + " needs a flow file");
      est = ExternalFlowEstimator{*flows};
    } else {
      est = opts.lk;
    }
    const ApproxStitch approx = run_stage_one(frames, est, opts.stride);
    if (is_global(method)) {
      r.stage_two = run_stage_two(nodes, approx.coords, opts.graph);
      r.coords = r.stage_two->coords;
      r.comparisons = r.stage_two->graph.comparisons_made;
    } else {
      r.coords = approx.coords;
      r.steps = approx.steps;
      r.comparisons = approx.steps.size();
    }
  }
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

// Accepts a flow file with one row per retained pair, or one row per
// consecutive frame pair; the latter is summed over each stride group (with
// the group's smallest confidence).
inline std::vector<PairEstimate> flows_for_stride(std::vector<PairEstimate> flows, std::size_t frame_count,
                                                  std::size_t stride) {
  const auto retained = retained_indices(frame_count, stride);
  if (retained.size() < 2) throw ValidationError("need at least two retained frames");
  const std::size_t pairs = retained.size() - 1;
  if (flows.size() == pairs) return flows;
  if (flows.size() != frame_count - 1) {
    throw ValidationError("flow file has " + std::to_string(flows.size()) + " rows; expected " +
                          std::to_string(pairs) + " (retained pairs) or " + std::to_string(frame_count - 1) +
                          " (consecutive pairs)");
  }
  std::vector<PairEstimate> out(pairs, PairEstimate{{0.0, 0.0}, 1.0});
  for (std::size_t k = 0; k < pairs; ++k) {
    for (std::size_t i = retained[k]; i < retained[k + 1]; ++i) {
      out[k].translation += flows[i].translation;
      out[k].confidence = std::min(out[k].confidence, flows[i].confidence);
    }
  }
  return out;
}

// Ground truth restricted to the retained frames, re-based at the first one.
inline CoordinateSet retained_truth(const CoordinateSet& truth, std::span<const std::size_t> retained) {
  std::vector<Point2> pts;
  for (std::size_t i : retained) pts.push_back({truth[i].x - truth[retained.front()].x, truth[i].y - truth[retained.front()].y});
  return CoordinateSet(std::move(pts));
}

inline MetricReport evaluate_method(const MethodResult& r, const CoordinateSet& truth_coords) {
  const CoordinateSet truth = retained_truth(truth_coords, r.retained);
  std::optional<std::span<const Translation2D>> ps, ts;
  std::vector<Translation2D> truth_steps;
  if (r.steps) {
    truth_steps = difference_coords(truth);
    ps = std::span<const Translation2D>(*r.steps);
    ts = std::span<const Translation2D>(truth_steps);
  }
  return evaluate(method_name(r.method), r.coords, truth, ps, ts, r.comparisons, r.wall_time);
}

// Largest stride up to `preferred` whose nominal pair overlap along the scan
// direction, 1 - stride * mean_step / patch, is at least `min_overlap`.
inline std::size_t overlap_limited_stride(double mean_step, int patch, std::size_t preferred = 20,
                                          double min_overlap = 0.3) {
  if (!(mean_step > 0.0)) return preferred;
  const double limit = std::floor((1.0 - min_overlap) * patch / mean_step);
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1.0, limit)), 1, preferred);
}

}  // namespace slidestitch
