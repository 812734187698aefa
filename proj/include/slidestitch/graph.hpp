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

// Stage two: global alignment over a neighbourhood graph.
//
//   approximate coordinates
//     -> neighbourhood graph (frames whose upper-left corners are close)
//     -> multigraph of template-matching translations, weighted by ZNCC
//     -> directed graph (similar translations merged, weak edges removed)
//     -> undirected graph (forward/backward measurements must cancel)
//     -> weighted least-squares coordinates

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "slidestitch/core.hpp"
#include "slidestitch/corners.hpp"
#include "slidestitch/csv_io.hpp"
#include "slidestitch/laplacian_solver.hpp"
#include "slidestitch/log.hpp"
#include "slidestitch/parallel.hpp"
#include "slidestitch/template_match.hpp"

namespace slidestitch {

struct GraphConfig {
  double radius_factor = 2.0;           // neighbourhood radius in frame widths
  // px around the prior offset; unset means one frame size, so any offset
  // within a frame of the prior is reachable.
  std::optional<double> search_radius;
  double translation_merge_tol = 3.0;   // px, L-infinity
  double cluster_core_tol = 1.0;        // px; members this close to the seed set the translation
  double min_weight = 0.65;             // ZNCC
  int min_cluster_members = 2;          // templates that must agree on a pair
  double consistency_tol = 4.0;         // px, |t_uv + t_vu|
  double solo_margin = 0.15;            // extra weight asked of one-way edges
  int min_edges_per_node = 1;
  double solver_tolerance = 1e-8;
  ShiTomasiParams template_corners{64, 0.01, 30.0, 7};
  TemplateParams templates;
  CoarseToFineOptions matching;

  void validate() const {
    if (search_radius && !(*search_radius > 0)) throw ValidationError("search_radius must be positive");
    if (!(radius_factor > 0 && translation_merge_tol > 0 && cluster_core_tol > 0 && consistency_tol > 0 &&
          solo_margin >= 0 && solver_tolerance > 0)) {
      throw ValidationError("graph parameters must be positive");
    }
    if (!(min_weight > 0.0 && min_weight <= 1.0)) throw ValidationError("min_weight must lie in (0, 1]");
    if (min_edges_per_node < 0) throw ValidationError("min_edges_per_node must be non-negative");
    if (min_cluster_members < 1) throw ValidationError("min_cluster_members must be at least 1");
  }
};

// Symmetric, irreflexive adjacency lists (sorted).
struct NeighborhoodGraph {
  std::vector<std::vector<std::size_t>> adjacency;

  std::size_t size() const { return adjacency.size(); }
  bool adjacent(std::size_t u, std::size_t v) const {
    const auto& a = adjacency[u];
    return std::binary_search(a.begin(), a.end(), v);
  }
  std::size_t directed_pairs() const {
    std::size_t n = 0;
    for (const auto& a : adjacency) n += a.size();
    return n;
  }
};

// u ~ v iff |approx[u] - approx[v]| <= radius_factor * frame_width, found
// through a uniform grid with cells one radius wide.
inline NeighborhoodGraph build_neighborhood(const CoordinateSet& approx, double frame_width, const GraphConfig& cfg) {
  const double radius = cfg.radius_factor * frame_width;
  const std::size_t n = approx.size();
  NeighborhoodGraph g;
  g.adjacency.resize(n);
  if (n == 0 || !(radius > 0)) return g;

  auto cell_of = [&](const Point2& p) {
    return std::pair<long long, long long>{static_cast<long long>(std::floor(p.x / radius)),
                                           static_cast<long long>(std::floor(p.y / radius))};
  };
  std::map<std::pair<long long, long long>, std::vector<std::size_t>> grid;
  for (std::size_t i = 0; i < n; ++i) grid[cell_of(approx[i])].push_back(i);
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < n; ++i) {
    const auto [cx, cy] = cell_of(approx[i]);
    for (long long dy = -1; dy <= 1; ++dy) {
      for (long long dx = -1; dx <= 1; ++dx) {
        const auto it = grid.find({cx + dx, cy + dy});
        if (it == grid.end()) continue;
        for (std::size_t j : it->second) {
          if (j == i) continue;
          const Translation2D d = approx[j] - approx[i];
          if (d.dx * d.dx + d.dy * d.dy <= r2) g.adjacency[i].push_back(j);
        }
      }
    }
    std::sort(g.adjacency[i].begin(), g.adjacency[i].end());
  }
  return g;
}

inline NeighborhoodGraph complete_graph(std::size_t n) {
  NeighborhoodGraph g;
  g.adjacency.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) g.adjacency[i].push_back(j);
    }
  }
  return g;
}

enum class GraphStage { Multigraph, DirectedPruned, UndirectedConsistent };

inline const char* stage_name(GraphStage s) {
  switch (s) {
    case GraphStage::Multigraph: return "multigraph";
    case GraphStage::DirectedPruned: return "directed";
    case GraphStage::UndirectedConsistent: return "undirected";
  }
  return "unknown";
}

// translation = dst origin - src origin; weight = ZNCC.
struct CandidateEdge {
  std::size_t src = 0;
  std::size_t dst = 0;
  Translation2D translation;
  double weight = 0.0;
};

struct AlignmentGraph {
  GraphStage stage = GraphStage::Multigraph;
  std::vector<CandidateEdge> edges;
  std::size_t comparisons_made = 0;  // directed frame pairs matched
};

// Per-frame matching state: multi-scale running sums and the frame's own
// templates. Built once and shared by every pair that touches the frame.
class FrameBank {
 public:
  FrameBank(std::span<const GrayImage* const> frames, const GraphConfig& cfg) : frames_(frames.begin(), frames.end()) {
    pyramids_.resize(frames_.size());
    templates_.resize(frames_.size());
    parallel_for(frames_.size(), [&](std::size_t i) {
      pyramids_[i] = std::make_unique<MatchPyramid>(*frames_[i], cfg.matching.levels + 1);
      const auto corners = shi_tomasi(*frames_[i], cfg.template_corners);
      templates_[i] = extract_templates(*frames_[i], corners, cfg.templates);
    });
    for (std::size_t i = 0; i < frames_.size(); ++i) {
      if (templates_[i].empty()) log().info("frame {} yields no templates", i);
    }
  }

  std::size_t size() const { return frames_.size(); }
  const GrayImage& frame(std::size_t i) const { return *frames_[i]; }
  const MatchPyramid& pyramid(std::size_t i) const { return *pyramids_[i]; }
  std::span<const Template> templates(std::size_t i) const { return templates_[i]; }

 private:
  std::vector<const GrayImage*> frames_;
  std::vector<std::unique_ptr<MatchPyramid>> pyramids_;
  std::vector<std::vector<Template>> templates_;
};

namespace detail {

inline std::vector<const GrayImage*> frame_pointers(std::span<const GrayImage> frames) {
  std::vector<const GrayImage*> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(&f);
  return out;
}

// Matches every template of u into v for each directed pair of `graph`.
// With a prior, the search is centred on prior[v] - prior[u]; without one it
// is centred on zero offset.
inline AlignmentGraph match_pairs(const FrameBank& bank, const NeighborhoodGraph& graph, const GraphConfig& cfg,
                                  const CoordinateSet* prior, double search_radius) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(graph.directed_pairs());
  for (std::size_t u = 0; u < graph.size(); ++u) {
    for (std::size_t v : graph.adjacency[u]) pairs.emplace_back(u, v);
  }
  std::vector<std::vector<CandidateEdge>> found(pairs.size());
  std::atomic<std::size_t> comparisons{0};
  parallel_for(pairs.size(), [&](std::size_t k) {
    const auto [u, v] = pairs[k];
    comparisons.fetch_add(1, std::memory_order_relaxed);
    const Translation2D center = prior ? (*prior)[v] - (*prior)[u] : Translation2D{};
    for (const Template& t : bank.templates(u)) {
      const auto m =
          match_template_coarse_to_fine(t, bank.pyramid(u), bank.pyramid(v), center, search_radius, cfg.matching);
      if (m) found[k].push_back({u, v, m->translation, m->correlation});
    }
  });
  AlignmentGraph g;
  g.stage = GraphStage::Multigraph;
  g.comparisons_made = comparisons.load();
  for (auto& f : found) g.edges.insert(g.edges.end(), f.begin(), f.end());
  return g;
}

}  // namespace detail

inline AlignmentGraph propose_candidates(const FrameBank& bank, const NeighborhoodGraph& graph,
                                         const GraphConfig& cfg, const CoordinateSet& prior) {
  if (graph.size() != bank.size() || prior.size() != bank.size()) {
    throw ValidationError("graph, prior and frames disagree on the node count");
  }
  const double full = bank.size() ? std::max(bank.frame(0).width(), bank.frame(0).height()) : 0;
  return detail::match_pairs(bank, graph, cfg, &prior, cfg.search_radius.value_or(full));
}

inline AlignmentGraph propose_candidates(std::span<const GrayImage> frames, const NeighborhoodGraph& graph,
                                         const GraphConfig& cfg, const CoordinateSet& prior) {
  const auto ptrs = detail::frame_pointers(frames);
  return propose_candidates(FrameBank(ptrs, cfg), graph, cfg, prior);
}

// Per ordered pair: candidates below min_weight are discarded and the rest go
// through greedy L-infinity clustering seeded by the strongest remaining one.
// A cluster is represented by its maximum weight and the weighted mean of the
// members within cluster_core_tol of its seed; the cluster with the largest
// summed weight wins. Clusters with fewer than min_cluster_members templates
// are ignored: a lone template can score high on unrelated tissue, but
// independent templates rarely agree on the same wrong offset.
inline AlignmentGraph prune_multigraph(const AlignmentGraph& mg, const GraphConfig& cfg) {
  if (mg.stage != GraphStage::Multigraph) throw ValidationError("prune_multigraph expects a multigraph");
  std::map<std::pair<std::size_t, std::size_t>, std::vector<CandidateEdge>> groups;
  for (const auto& e : mg.edges) {
    if (e.weight >= cfg.min_weight) groups[{e.src, e.dst}].push_back(e);
  }

  AlignmentGraph out;
  out.stage = GraphStage::DirectedPruned;
  out.comparisons_made = mg.comparisons_made;
  for (auto& [key, cands] : groups) {
    std::stable_sort(cands.begin(), cands.end(),
                     [](const CandidateEdge& a, const CandidateEdge& b) { return a.weight > b.weight; });
    std::vector<bool> used(cands.size(), false);
    bool have_best = false;
    CandidateEdge best;
    double best_support = 0.0;
    for (std::size_t s = 0; s < cands.size(); ++s) {
      if (used[s]) continue;
      const Translation2D seed = cands[s].translation;
      double wsum = 0.0, support = 0.0, wmax = cands[s].weight;
      Translation2D acc{};
      std::size_t members = 0;
      for (std::size_t j = s; j < cands.size(); ++j) {
        if (used[j]) continue;
        const Translation2D d = cands[j].translation - seed;
        const double dist = std::max(std::abs(d.dx), std::abs(d.dy));
        if (dist > cfg.translation_merge_tol) continue;
        used[j] = true;
        const double w = std::max(cands[j].weight, 0.0);
        support += w;
        ++members;
        if (dist <= cfg.cluster_core_tol) {
          acc += w * cands[j].translation;
          wsum += w;
        }
      }
      if (members < static_cast<std::size_t>(cfg.min_cluster_members)) continue;
      const Translation2D rep = wsum > 0.0 ? (1.0 / wsum) * acc : seed;
      if (!have_best || support > best_support || (support == best_support && wmax > best.weight)) {
        best = {key.first, key.second, rep, wmax};
        best_support = support;
        have_best = true;
      }
    }
    if (have_best) out.edges.push_back(best);
  }
  return out;
}

// Pairs measured both ways survive when the two translations cancel to within
// consistency_tol and are stored as their antisymmetric mean with the weaker
// weight. One-way edges need min_weight + solo_margin. A node left with fewer
// than min_edges_per_node edges takes back its strongest discarded one-way
// edges (never an inconsistent pair). Output edges have src < dst.
inline AlignmentGraph enforce_consistency(const AlignmentGraph& dg, const GraphConfig& cfg) {
  if (dg.stage != GraphStage::DirectedPruned) throw ValidationError("enforce_consistency expects a pruned graph");
  std::map<std::pair<std::size_t, std::size_t>, const CandidateEdge*> directed;
  for (const auto& e : dg.edges) {
    if (e.src == e.dst) continue;
    directed[{e.src, e.dst}] = &e;
  }
  AlignmentGraph out;
  out.stage = GraphStage::UndirectedConsistent;
  out.comparisons_made = dg.comparisons_made;
  std::vector<CandidateEdge> solo_rejects;
  for (const auto& [key, e] : directed) {
    const auto [a, b] = key;
    const std::size_t u = std::min(a, b), v = std::max(a, b);
    const auto fwd = directed.find({u, v});
    const auto bwd = directed.find({v, u});
    const bool has_f = fwd != directed.end(), has_b = bwd != directed.end();
    if (has_f && has_b) {
      if (a != u) continue;  // handle each unordered pair once
      const Translation2D tuv = fwd->second->translation, tvu = bwd->second->translation;
      if ((tuv + tvu).norm() <= cfg.consistency_tol) {
        out.edges.push_back({u, v, 0.5 * (tuv - tvu), std::min(fwd->second->weight, bwd->second->weight)});
      }
      continue;
    }
    const CandidateEdge oriented{u, v, a == u ? e->translation : -e->translation, e->weight};
    if (e->weight >= cfg.min_weight + cfg.solo_margin) {
      out.edges.push_back(oriented);
    } else if (e->weight >= cfg.min_weight) {
      solo_rejects.push_back(oriented);
    }
  }

  if (cfg.min_edges_per_node > 0 && !solo_rejects.empty()) {
    std::unordered_map<std::size_t, int> degree;
    for (const auto& e : out.edges) {
      ++degree[e.src];
      ++degree[e.dst];
    }
    std::stable_sort(solo_rejects.begin(), solo_rejects.end(),
                     [](const CandidateEdge& x, const CandidateEdge& y) { return x.weight > y.weight; });
    for (const auto& e : solo_rejects) {
      if (degree[e.src] < cfg.min_edges_per_node || degree[e.dst] < cfg.min_edges_per_node) {
        out.edges.push_back(e);
        ++degree[e.src];
        ++degree[e.dst];
      }
    }
  }
  std::sort(out.edges.begin(), out.edges.end(), [](const CandidateEdge& x, const CandidateEdge& y) {
    return std::pair(x.src, x.dst) < std::pair(y.src, y.dst);
  });
  return out;
}

// Connected components of the edge set over n nodes; each component lists its
// nodes in increasing order, components ordered by their lowest node.
inline std::vector<std::vector<std::size_t>> graph_components(std::size_t n, std::span<const CandidateEdge> edges) {
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& e : edges) {
    const std::size_t a = find(e.src), b = find(e.dst);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::map<std::size_t, std::vector<std::size_t>> by_root;
  for (std::size_t i = 0; i < n; ++i) by_root[find(i)].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [root, nodes] : by_root) out.push_back(std::move(nodes));
  return out;
}

// Weighted least squares for one connected component,
//   min sum_e w_e |p_dst - p_src - t_e|^2 with p_anchor = 0,
// solved separately for x and y by conjugate gradient (with iterative
// refinement) on the grounded Laplacian. `nodes` is sorted; returns positions
// relative to the anchor in the order of `nodes`.
inline std::vector<Point2> solve_component(std::span<const std::size_t> nodes, std::span<const CandidateEdge> edges,
                                           std::size_t anchor, double tolerance = 1e-8) {
  const std::size_t m = nodes.size();
  auto local = [&](std::size_t global) {
    return static_cast<std::size_t>(std::lower_bound(nodes.begin(), nodes.end(), global) - nodes.begin());
  };
  const std::size_t anchor_local = local(anchor);
  if (anchor_local >= m || nodes[anchor_local] != anchor) throw ValidationError("anchor outside component");
  std::vector<Point2> out(m);
  if (m == 1) return out;

  std::vector<WeightedEdge> wedges;
  std::vector<double> bx(m, 0.0), by(m, 0.0);
  for (const auto& e : edges) {
    const std::size_t u = local(e.src), v = local(e.dst);
    if (u >= m || v >= m || nodes[u] != e.src || nodes[v] != e.dst || u == v) continue;
    const double w = std::max(e.weight, 1e-6);
    wedges.push_back({u, v, w});
    bx[v] += w * e.translation.dx;
    bx[u] -= w * e.translation.dx;
    by[v] += w * e.translation.dy;
    by[u] -= w * e.translation.dy;
  }
  const CsrMatrix lap = grounded_laplacian(m, wedges, anchor_local);
  auto reduce = [&](const std::vector<double>& full) {
    std::vector<double> r;
    r.reserve(m - 1);
    for (std::size_t i = 0; i < m; ++i) {
      if (i != anchor_local) r.push_back(full[i]);
    }
    return r;
  };
  const auto rbx = reduce(bx), rby = reduce(by);
  std::vector<double> sx(m - 1, 0.0), sy(m - 1, 0.0);
  const auto cx = solve_refined(lap, rbx, sx, tolerance);
  const auto cy = solve_refined(lap, rby, sy, tolerance);
  if (!cx.converged || !cy.converged) {
    log().warn("CG stopped at relative residual {:.3g}/{:.3g}", cx.relative_residual, cy.relative_residual);
  }
  for (std::size_t i = 0, k = 0; i < m; ++i) {
    if (i == anchor_local) continue;
    out[i] = {sx[k], sy[k]};
    ++k;
  }
  return out;
}

// Global coordinates from the consistent graph. Each connected component is
// solved by least squares anchored at its lowest node; the anchors are placed
// at their fallback coordinates, then everything is shifted so that node 0
// sits at the origin. Without edges the fallback is returned unchanged.
inline CoordinateSet solve_coordinates(const AlignmentGraph& ug, std::size_t n_frames, const CoordinateSet& fallback,
                                       double tolerance = 1e-8) {
  if (ug.stage != GraphStage::UndirectedConsistent) throw ValidationError("solve_coordinates expects a consistent graph");
  if (fallback.size() != n_frames) throw ValidationError("fallback coordinates do not match the frame count");
  for (const auto& e : ug.edges) {
    if (e.src >= n_frames || e.dst >= n_frames) throw ValidationError("edge references a missing frame");
  }
  if (ug.edges.empty()) {
    log().warn("alignment graph has no edges; keeping the approximate coordinates");
    return fallback;
  }
  std::vector<Point2> pts(n_frames);
  for (const auto& comp : graph_components(n_frames, ug.edges)) {
    const std::size_t anchor = comp.front();
    const auto rel = solve_component(comp, ug.edges, anchor, tolerance);
    for (std::size_t i = 0; i < comp.size(); ++i) pts[comp[i]] = fallback[anchor] + (rel[i] - Point2{});
  }
  const Point2 origin = pts[0];
  for (auto& p : pts) p = {p.x - origin.x, p.y - origin.y};
  return CoordinateSet(std::move(pts));
}

struct StageTwoResult {
  CoordinateSet coords;
  AlignmentGraph graph;  // final (undirected, consistent) graph
  std::size_t neighborhood_pairs = 0;
  std::size_t multigraph_edges = 0;
  std::size_t directed_edges = 0;
  std::vector<CandidateEdge> multigraph;  // kept for diagnostic dumps
  std::vector<CandidateEdge> directed;
};

namespace detail {

inline StageTwoResult finish_stage_two(const AlignmentGraph& mg, std::size_t n, const CoordinateSet& fallback,
                                       const GraphConfig& cfg) {
  StageTwoResult r;
  r.multigraph_edges = mg.edges.size();
  r.multigraph = mg.edges;
  const AlignmentGraph dg = prune_multigraph(mg, cfg);
  r.directed_edges = dg.edges.size();
  r.directed = dg.edges;
  r.graph = enforce_consistency(dg, cfg);
  r.coords = solve_coordinates(r.graph, n, fallback, cfg.solver_tolerance);
  return r;
}

}  // namespace detail

// Stage two over `frames` (one per node) given approximate coordinates.
inline StageTwoResult run_stage_two(std::span<const GrayImage* const> frames, const CoordinateSet& approx,
                                    const GraphConfig& cfg) {
  cfg.validate();
  if (frames.size() < 2) throw ValidationError("stage two needs at least two frames");
  if (approx.size() != frames.size()) throw ValidationError("approximate stitch does not match the frames");
  const FrameBank bank(frames, cfg);
  const NeighborhoodGraph nbh = build_neighborhood(approx, frames.front()->width(), cfg);
  auto r = detail::finish_stage_two(propose_candidates(bank, nbh, cfg, approx), frames.size(), approx, cfg);
  r.neighborhood_pairs = nbh.directed_pairs();
  return r;
}

inline StageTwoResult run_stage_two(std::span<const GrayImage> frames, const CoordinateSet& approx,
                                    const GraphConfig& cfg) {
  const auto ptrs = detail::frame_pointers(frames);
  return run_stage_two(ptrs, approx, cfg);
}

// Baseline without a prior: every ordered pair is matched, each search
// covering the whole target frame. Isolated components fall back to the
// origin since no approximate stitch exists.
inline StageTwoResult run_pure_graph(std::span<const GrayImage* const> frames, const GraphConfig& cfg) {
  cfg.validate();
  if (frames.size() < 2) throw ValidationError("pure graph alignment needs at least two frames");
  const FrameBank bank(frames, cfg);
  const NeighborhoodGraph all = complete_graph(frames.size());
  const double full = std::max(frames.front()->width(), frames.front()->height());
  const CoordinateSet zeros(std::vector<Point2>(frames.size()));
  auto r = detail::finish_stage_two(detail::match_pairs(bank, all, cfg, nullptr, full), frames.size(), zeros, cfg);
  r.neighborhood_pairs = all.directed_pairs();
  return r;
}

inline StageTwoResult run_pure_graph(std::span<const GrayImage> frames, const GraphConfig& cfg) {
  const auto ptrs = detail::frame_pointers(frames);
  return run_pure_graph(ptrs, cfg);
}

// Edge dump: src,dst,dx,dy,weight,stage.
inline void write_edges_csv(const std::filesystem::path& path, const StageTwoResult& r) {
  auto out = detail::open_for_write(path);
  out << "src,dst,dx,dy,weight,stage\n";
  auto dump = [&](std::span<const CandidateEdge> edges, GraphStage s) {
    for (const auto& e : edges) {
      out << e.src << ',' << e.dst << ',' << format_number(e.translation.dx) << ','
          << format_number(e.translation.dy) << ',' << format_number(e.weight) << ',' << stage_name(s) << '\n';
    }
  };
  dump(r.multigraph, GraphStage::Multigraph);
  dump(r.directed, GraphStage::DirectedPruned);
  dump(r.graph.edges, GraphStage::UndirectedConsistent);
  if (!out) throw ParseError(path.string() + ": write failed");
}

}  // namespace slidestitch
