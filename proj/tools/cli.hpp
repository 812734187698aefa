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

// Command implementations behind the `slidestitch` executable. Each cmd_*
// function takes already-parsed arguments so it can be driven from tests.
//
// Dataset directory (written by simulate):
//   frames/frame_NNNNNN.png  truth_steps.csv  truth_coords.csv  manifest.json
// Run directory (written by stitch):
//   coords.csv  [steps.csv]  [edges.csv]  [canvas.png]  run.json

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "slidestitch.hpp"

namespace slidestitch::cli {

namespace fs = std::filesystem;
using nlohmann::json;

// Everything a --config file may override.
struct RunConfig {
  SimConfig sim;
  LkEstimator lk;
  GraphConfig graph;
  std::optional<std::size_t> stride;
};

namespace detail {

// Copies obj[key] into `field` when present. Unknown keys are rejected by
// the caller through `seen`.
template <typename T>
void take(const json& obj, const char* key, T& field, std::vector<std::string>& seen) {
  seen.emplace_back(key);
  if (auto it = obj.find(key); it != obj.end()) field = it->get<T>();
}

inline void take_range(const json& obj, const char* key, Range& r, std::vector<std::string>& seen) {
  seen.emplace_back(key);
  auto it = obj.find(key);
  if (it == obj.end()) return;
  if (!it->is_array() || it->size() != 2) throw ValidationError(std::string(key) + " must be [low, high]");
  r = {(*it)[0].get<double>(), (*it)[1].get<double>()};
}

inline void reject_unknown(const json& obj, const std::vector<std::string>& seen, const std::string& where) {
  if (!obj.is_object()) throw ValidationError(where + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    if (std::find(seen.begin(), seen.end(), key) == seen.end()) {
      throw ValidationError("unknown config key '" + where + "." + key + "'");
    }
  }
}

template <typename F>
void section(const json& parent, const char* key, const std::string& where, F&& body) {
  auto it = parent.find(key);
  if (it == parent.end()) return;
  std::vector<std::string> seen;
  body(*it, seen);
  reject_unknown(*it, seen, where + "." + key);
}

inline void read_corners(const json& j, ShiTomasiParams& p, std::vector<std::string>& seen) {
  take(j, "max_corners", p.max_corners, seen);
  take(j, "quality", p.quality, seen);
  take(j, "min_distance", p.min_distance, seen);
  take(j, "score_window", p.score_window, seen);
}

inline json corners_json(const ShiTomasiParams& p) {
  return {{"max_corners", p.max_corners},
          {"quality", p.quality},
          {"min_distance", p.min_distance},
          {"score_window", p.score_window}};
}

}  // namespace detail

inline void apply_config(const json& root, RunConfig& cfg) {
  using detail::section;
  using detail::take;
  std::vector<std::string> top{"sim", "lk", "graph"};
  if (root.contains("stride")) cfg.stride = root.at("stride").get<std::size_t>();
  top.emplace_back("stride");
  detail::reject_unknown(root, top, "config");

  section(root, "sim", "config", [&](const json& j, auto& seen) {
    take(j, "patch", cfg.sim.patch, seen);
    detail::take_range(j, "mag_range", cfg.sim.mag_range, seen);
    detail::take_range(j, "noise_factor_range", cfg.sim.noise_factor_range, seen);
    detail::take_range(j, "angle_std_range_deg", cfg.sim.angle_std_range_deg, seen);
    detail::take_range(j, "row_overlap_range", cfg.sim.row_overlap_range, seen);
    take(j, "seed", cfg.sim.seed, seen);
  });
  section(root, "lk", "config", [&](const json& j, auto& seen) {
    auto& p = cfg.lk.params;
    take(j, "chain", cfg.lk.chain, seen);
    take(j, "window", p.lk.window, seen);
    take(j, "levels", p.lk.levels, seen);
    take(j, "max_iters", p.lk.max_iters, seen);
    take(j, "eps", p.lk.eps, seen);
    take(j, "inlier_radius", p.inlier_radius, seen);
    take(j, "min_points", p.min_points, seen);
    section(j, "corners", "config.lk", [&](const json& c, auto& s) { detail::read_corners(c, p.corners, s); });
    seen.emplace_back("corners");
  });
  section(root, "graph", "config", [&](const json& j, auto& seen) {
    auto& g = cfg.graph;
    take(j, "radius_factor", g.radius_factor, seen);
    seen.emplace_back("search_radius");
    if (auto it = j.find("search_radius"); it != j.end()) {
      g.search_radius = it->is_null() ? std::nullopt : std::optional<double>(it->get<double>());
    }
    take(j, "translation_merge_tol", g.translation_merge_tol, seen);
    take(j, "cluster_core_tol", g.cluster_core_tol, seen);
    take(j, "min_weight", g.min_weight, seen);
    take(j, "min_cluster_members", g.min_cluster_members, seen);
    take(j, "consistency_tol", g.consistency_tol, seen);
    take(j, "solo_margin", g.solo_margin, seen);
    take(j, "min_edges_per_node", g.min_edges_per_node, seen);
    take(j, "solver_tolerance", g.solver_tolerance, seen);
    section(j, "template_corners", "config.graph",
            [&](const json& c, auto& s) { detail::read_corners(c, g.template_corners, s); });
    seen.emplace_back("template_corners");
    section(j, "templates", "config.graph", [&](const json& t, auto& s) {
      take(t, "dilation_radius", g.templates.dilation_radius, s);
      take(t, "max_templates", g.templates.max_templates, s);
      take(t, "min_size", g.templates.min_size, s);
      take(t, "max_size", g.templates.max_size, s);
    });
    seen.emplace_back("templates");
    section(j, "matching", "config.graph", [&](const json& m, auto& s) {
      take(m, "levels", g.matching.levels, s);
      take(m, "peaks", g.matching.peaks, s);
      take(m, "min_coarse_side", g.matching.min_coarse_side, s);
      take(m, "subpixel", g.matching.subpixel, s);
    });
    seen.emplace_back("matching");
  });
  cfg.sim.validate();
  cfg.graph.validate();
}

inline json config_json(const RunConfig& cfg) {
  auto range = [](const Range& r) { return json::array({r.low, r.high}); };
  const auto& p = cfg.lk.params;
  const auto& g = cfg.graph;
  json j = {
      {"sim",
       {{"patch", cfg.sim.patch},
        {"mag_range", range(cfg.sim.mag_range)},
        {"noise_factor_range", range(cfg.sim.noise_factor_range)},
        {"angle_std_range_deg", range(cfg.sim.angle_std_range_deg)},
        {"row_overlap_range", range(cfg.sim.row_overlap_range)},
        {"seed", cfg.sim.seed}}},
      {"lk",
       {{"chain", cfg.lk.chain},
        {"window", p.lk.window},
        {"levels", p.lk.levels},
        {"max_iters", p.lk.max_iters},
        {"eps", p.lk.eps},
        {"inlier_radius", p.inlier_radius},
        {"min_points", p.min_points},
        {"corners", detail::corners_json(p.corners)}}},
      {"graph",
       {{"radius_factor", g.radius_factor},
        {"search_radius", g.search_radius ? json(*g.search_radius) : json(nullptr)},
        {"translation_merge_tol", g.translation_merge_tol},
        {"cluster_core_tol", g.cluster_core_tol},
        {"min_weight", g.min_weight},
        {"min_cluster_members", g.min_cluster_members},
        {"consistency_tol", g.consistency_tol},
        {"solo_margin", g.solo_margin},
        {"min_edges_per_node", g.min_edges_per_node},
        {"solver_tolerance", g.solver_tolerance},
        {"template_corners", detail::corners_json(g.template_corners)},
        {"templates",
         {{"dilation_radius", g.templates.dilation_radius},
          {"max_templates", g.templates.max_templates},
          {"min_size", g.templates.min_size},
          {"max_size", g.templates.max_size}}},
        {"matching",
         {{"levels", g.matching.levels},
          {"peaks", g.matching.peaks},
          {"min_coarse_side", g.matching.min_coarse_side},
          {"subpixel", g.matching.subpixel}}}}},
  };
  if (cfg.stride) j["stride"] = *cfg.stride;
  return j;
}

inline json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw ParseError(path.string() + ": write failed");
}

inline RunConfig load_config(const std::optional<fs::path>& path) {
  RunConfig cfg;
  if (path) {
    try {
      apply_config(read_json(*path), cfg);
    } catch (const json::exception& e) {
      throw ValidationError(path->string() + ": " + e.what());
    }
  }
  return cfg;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  fs::path out;
  std::optional<fs::path> source;  // PNG; a procedural texture otherwise
  int texture_size = 2000;
  std::optional<std::uint64_t> seed;
  std::optional<int> patch;
};

inline int cmd_simulate(const SimulateArgs& a, RunConfig cfg) {
  if (a.seed) cfg.sim.seed = *a.seed;
  if (a.patch) cfg.sim.patch = *a.patch;
  cfg.sim.validate();
  GrayImage source;
  std::string source_id;
  if (a.source) {
    source = read_png(*a.source);
    source_id = a.source->filename().string();
  } else {
    if (a.texture_size <= 0) throw ValidationError("texture size must be positive");
    source = make_tissue_texture(a.texture_size, a.texture_size, cfg.sim.seed);
    source_id = "texture-" + std::to_string(a.texture_size) + "-seed" + std::to_string(cfg.sim.seed);
  }
  const ScanPlan plan = plan_scan(source.width(), source.height(), cfg.sim);
  log().info("simulate: {} frames over {} rows", plan.steps.size() + 1, plan.rows);
  const FrameSequence seq = render_scan(source, plan.steps, cfg.sim, source_id);

  fs::create_directories(a.out);
  write_frames(a.out / "frames", seq.frames);
  write_steps_csv(a.out / "truth_steps.csv", seq.truth_steps);
  write_coords_csv(a.out / "truth_coords.csv", seq.truth_coords);
  const auto& r = plan.realization;
  write_json(a.out / "manifest.json",
             {{"seed", cfg.sim.seed},
              {"prng", Rng::kAlgorithm},
              {"patch", cfg.sim.patch},
              {"source_id", source_id},
              {"source_width", source.width()},
              {"source_height", source.height()},
              {"frames", seq.frames.size()},
              {"rows", plan.rows},
              {"draws",
               {{"mean_mag", r.mean_mag},
                {"noise_factor", r.noise_factor},
                {"angle_std_deg", r.angle_std_deg},
                {"row_overlap", r.row_overlap}}}});
  return 0;
}

// ------------------------------------------------------------------ stitch

inline fs::path frames_dir(const fs::path& dataset) {
  return fs::is_directory(dataset / "frames") ? dataset / "frames" : dataset;
}

inline std::vector<PairEstimate> read_flows_for(const fs::path& path, std::size_t frames, std::size_t stride) {
  return flows_for_stride(load_external_flows(path), frames, stride);
}

struct StitchArgs {
  fs::path in;
  fs::path out;
  Method method = Method::GloflowLk;
  std::optional<std::size_t> stride;
  std::optional<fs::path> flows;
  bool canvas = false;
  Blend blend = Blend::Overwrite;
};

inline std::size_t effective_stride(const std::optional<std::size_t>& flag, const RunConfig& cfg) {
  const std::size_t s = flag ? *flag : cfg.stride.value_or(PipelineOptions{}.stride);
  if (s < 1) throw ValidationError("stride must be at least 1");
  return s;
}

inline PipelineOptions pipeline_options(const RunConfig& cfg, std::size_t stride) {
  PipelineOptions opts;
  opts.stride = stride;
  opts.lk = cfg.lk;
  opts.graph = cfg.graph;
  return opts;
}

inline void write_run(const fs::path& dir, const MethodResult& r, const fs::path& dataset, std::size_t stride,
                      const std::vector<const GrayImage*>* canvas_frames, Blend blend) {
  fs::create_directories(dir);
  write_coords_csv(dir / "coords.csv", r.coords);
  if (r.steps) write_steps_csv(dir / "steps.csv", *r.steps);
  if (r.stage_two) write_edges_csv(dir / "edges.csv", *r.stage_two);
  if (canvas_frames) write_png(dir / "canvas.png", composite(*canvas_frames, r.coords, blend).image);
  write_json(dir / "run.json", {{"method", method_name(r.method)},
                                {"dataset", fs::absolute(dataset).string()},
                                {"stride", stride},
                                {"retained", r.retained},
                                {"comparisons", r.comparisons},
                                {"wall_time_s", r.wall_time}});
}

inline int cmd_stitch(const StitchArgs& a, const RunConfig& cfg) {
  const auto frames = read_frames(frames_dir(a.in));
  const std::size_t stride = effective_stride(a.stride, cfg);
  std::optional<std::vector<PairEstimate>> flows;
  if (needs_flows(a.method)) {
    if (!a.flows) throw ValidationError(std::string(method_name(a.method)) + " needs --flows");
    flows = read_flows_for(*a.flows, frames.size(), stride);
  }
  log().info("stitch: {} on {} frames, stride {}", method_name(a.method), frames.size(), stride);
  const MethodResult r = run_method(a.method, frames, pipeline_options(cfg, stride), flows ? &*flows : nullptr);
  std::vector<const GrayImage*> nodes;
  for (std::size_t i : r.retained) nodes.push_back(&frames[i]);
  write_run(a.out, r, a.in, stride, a.canvas ? &nodes : nullptr, a.blend);
  return 0;
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
  fs::path run;
  std::optional<fs::path> truth;  // dataset directory; run.json's otherwise
  std::optional<fs::path> report; // CSV to append to
};

inline void append_report(const fs::path& path, const std::vector<MetricReport>& rows) {
  const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app);
  if (fresh) out << kReportHeader << '\n';
  for (const auto& r : rows) out << report_csv_row(r) << '\n';
  if (!out) throw ParseError(path.string() + ": write failed");
}

inline MetricReport evaluate_run(const fs::path& run_dir, const std::optional<fs::path>& truth_dir) {
  const json run = read_json(run_dir / "run.json");
  const fs::path dataset = truth_dir ? *truth_dir : fs::path(run.at("dataset").get<std::string>());
  const auto retained = run.at("retained").get<std::vector<std::size_t>>();
  const CoordinateSet truth_all = read_coords_csv(dataset / "truth_coords.csv");
  for (std::size_t i : retained) {
    if (i >= truth_all.size()) throw ValidationError("run references frame " + std::to_string(i) + " beyond truth");
  }
  const CoordinateSet truth = retained_truth(truth_all, retained);
  const CoordinateSet pred = read_coords_csv(run_dir / "coords.csv");
  std::optional<std::vector<Translation2D>> steps;
  if (fs::exists(run_dir / "steps.csv")) steps = read_steps_csv(run_dir / "steps.csv");
  const auto truth_steps = difference_coords(truth);
  std::optional<std::span<const Translation2D>> ps, ts;
  if (steps) {
    ps = std::span<const Translation2D>(*steps);
    ts = std::span<const Translation2D>(truth_steps);
  }
  return evaluate(run.at("method").get<std::string>(), pred, truth, ps, ts, run.at("comparisons").get<std::size_t>(),
                  run.at("wall_time_s").get<double>());
}

inline int cmd_eval(const EvalArgs& a) {
  const MetricReport r = evaluate_run(a.run, a.truth);
  if (a.report) append_report(*a.report, {r});
  std::printf("%s\n%s\n", kReportHeader, report_csv_row(r).c_str());
  return 0;
}

// ------------------------------------------------------------------- bench

struct BenchArgs {
  fs::path in;
  fs::path out;
  std::optional<std::size_t> stride;
  std::optional<fs::path> flows;  // defaults to the dataset's truth_steps.csv
};

inline std::string markdown_table(const std::vector<MetricReport>& rows) {
  std::string md = "| Method | Frames | EPE | Re-EPE | Comparisons | Time (s) |\n|---|---|---|---|---|---|\n";
  char buf[256];
  for (const auto& r : rows) {
    const std::string epe = r.epe_pairwise ? (std::snprintf(buf, sizeof(buf), "%.4f", *r.epe_pairwise), buf) : "N/A";
    std::snprintf(buf, sizeof(buf), "| %s | %zu | %s | %.4f | %zu | %.2f |\n", r.method.c_str(), r.n_frames,
                  epe.c_str(), r.re_epe, r.comparisons_made, r.wall_time);
    md += buf;
  }
  return md;
}

inline int cmd_bench(const BenchArgs& a, const RunConfig& cfg) {
  const auto frames = read_frames(frames_dir(a.in));
  const std::size_t stride = effective_stride(a.stride, cfg);
  const fs::path flow_path = a.flows ? *a.flows : a.in / "truth_steps.csv";
  if (!a.flows) log().info("bench: external methods read {}", flow_path.string());
  const auto flows = read_flows_for(flow_path, frames.size(), stride);
  const CoordinateSet truth = read_coords_csv(a.in / "truth_coords.csv");
  if (truth.size() != frames.size()) throw ValidationError("truth_coords.csv does not match the frame count");
  const PipelineOptions opts = pipeline_options(cfg, stride);

  std::vector<MetricReport> rows;
  for (Method m : kAllMethods) {
    log().info("bench: running {}", method_name(m));
    const MethodResult r = run_method(m, frames, opts, &flows);
    write_run(a.out / method_name(m), r, a.in, stride, nullptr, Blend::Overwrite);
    rows.push_back(evaluate_method(r, truth));
  }
  fs::create_directories(a.out);
  fs::remove(a.out / "report.csv");
  append_report(a.out / "report.csv", rows);
  const std::string md = markdown_table(rows);
  std::ofstream(a.out / "report.md") << md;
  std::printf("%s", md.c_str());
  return 0;
}

// ------------------------------------------------------------- entry point

inline int run(int argc, const char* const* argv) {
  CLI::App app{"Whole-slide video stitching: simulate, stitch, evaluate, benchmark"};
  app.require_subcommand(1);
  std::optional<std::string> config_path;
  int threads = 0;
  app.add_option("--config", config_path, "JSON file overriding simulator/LK/graph parameters")
      ->check(CLI::ExistingFile);
  app.add_option("--threads", threads, "worker thread cap (0 = hardware concurrency)")->check(CLI::NonNegativeNumber);

  SimulateArgs sim;
  std::string sim_out;
  std::optional<std::string> sim_source;
  auto* simulate = app.add_subcommand("simulate", "simulate a serpentine scan and write a dataset");
  simulate->add_option("--out", sim_out, "dataset directory")->required();
  simulate->add_option("--source", sim_source, "source PNG (default: procedural tissue texture)")
      ->check(CLI::ExistingFile);
  simulate->add_option("--texture-size", sim.texture_size, "side of the procedural source");
  simulate->add_option("--seed", sim.seed, "scan seed");
  simulate->add_option("--patch", sim.patch, "frame side in pixels");

  StitchArgs st;
  std::string st_in, st_out, st_method = "gloflow-lk", st_blend = "overwrite";
  std::optional<std::string> st_flows;
  auto* stitch = app.add_subcommand("stitch", "stitch a dataset with one method");
  stitch->add_option("--in", st_in, "dataset directory")->required()->check(CLI::ExistingDirectory);
  stitch->add_option("--out", st_out, "run directory")->required();
  stitch->add_option("--method", st_method, "lk | external | pure-graph | gloflow-lk | gloflow-external");
  stitch->add_option("--stride", st.stride, "keep every k-th frame")->check(CLI::PositiveNumber);
  stitch->add_option("--flows", st_flows, "external flow CSV (index,dx,dy[,confidence])")->check(CLI::ExistingFile);
  stitch->add_flag("--canvas", st.canvas, "also write canvas.png");
  stitch->add_option("--blend", st_blend, "overwrite | average")->check(CLI::IsMember({"overwrite", "average"}));

  EvalArgs ev;
  std::string ev_run;
  std::optional<std::string> ev_truth, ev_report;
  auto* eval = app.add_subcommand("eval", "score a run against ground truth");
  eval->add_option("--run", ev_run, "run directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--truth", ev_truth, "dataset directory (default: the one recorded in run.json)")
      ->check(CLI::ExistingDirectory);
  eval->add_option("--report", ev_report, "CSV file to append the row to");

  BenchArgs be;
  std::string be_in, be_out;
  std::optional<std::string> be_flows;
  auto* bench = app.add_subcommand("bench", "run all five methods and tabulate them");
  bench->add_option("--in", be_in, "dataset directory")->required()->check(CLI::ExistingDirectory);
  bench->add_option("--out", be_out, "output directory")->required();
  bench->add_option("--stride", be.stride, "keep every k-th frame")->check(CLI::PositiveNumber);
  bench->add_option("--flows", be_flows, "external flow CSV (default: <in>/truth_steps.csv)")
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (threads > 0) set_max_threads(static_cast<unsigned>(threads));
    const RunConfig cfg = load_config(config_path ? std::optional<fs::path>(*config_path) : std::nullopt);
    if (*simulate) {
      sim.out = sim_out;
      if (sim_source) sim.source = *sim_source;
      return cmd_simulate(sim, cfg);
    }
    if (*stitch) {
      st.in = st_in;
      st.out = st_out;
      st.method = parse_method(st_method);
      if (st_flows) st.flows = *st_flows;
      st.blend = st_blend == "average" ? Blend::Average : Blend::Overwrite;
      return cmd_stitch(st, cfg);
    }
    if (*eval) {
      ev.run = ev_run;
      if (ev_truth) ev.truth = *ev_truth;
      if (ev_report) ev.report = *ev_report;
      return cmd_eval(ev);
    }
    be.in = be_in;
    be.out = be_out;
    if (be_flows) be.flows = *be_flows;
    return cmd_bench(be, cfg);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace slidestitch::cli
