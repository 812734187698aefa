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

// Plain CSV files exchanged between pipeline stages:
//   coordinates   index,x,y
//   steps         index,dx,dy
//   flows         index,dx,dy[,confidence]
// Numbers are written in shortest round-trip form, so write-then-read is the
// identity on finite doubles.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slidestitch/core.hpp"

namespace slidestitch {

inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view f = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
    out.push_back(f);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

struct CsvRow {
  std::size_t line = 0;
  std::vector<double> values;
};

inline std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

// Reads a numeric CSV with an optional header row starting with "index".
// Each row must have between min_fields and max_fields numbers, and the
// first field must equal the row's ordinal.
inline std::vector<CsvRow> read_numeric_csv(const std::filesystem::path& path, std::size_t min_fields,
                                            std::size_t max_fields) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open file");
  std::vector<CsvRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view(line);
    while (!view.empty() && (view.back() == '\r' || view.back() == ' ')) view.remove_suffix(1);
    if (view.empty()) continue;
    if (lineno == 1 && view.starts_with("index")) continue;
    const auto fields = split_fields(view);
    if (fields.size() < min_fields || fields.size() > max_fields) {
      throw ParseError(where(path, lineno) + ": expected " + std::to_string(min_fields) +
                       (min_fields == max_fields ? "" : "-" + std::to_string(max_fields)) + " fields, found " +
                       std::to_string(fields.size()));
    }
    CsvRow row{lineno, {}};
    for (std::string_view f : fields) {
      double v = 0.0;
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || res.ec != std::errc() || res.ptr != f.data() + f.size() || !std::isfinite(v)) {
        throw ParseError(where(path, lineno) + ": malformed number '" + std::string(f) + "'");
      }
      row.values.push_back(v);
    }
    if (row.values[0] != static_cast<double>(rows.size())) {
      throw ParseError(where(path, lineno) + ": index " + std::string(fields[0]) + " out of sequence, expected " +
                       std::to_string(rows.size()));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ParseError(path.string() + ": cannot open for writing");
  return out;
}

}  // namespace detail

inline void write_coords_csv(const std::filesystem::path& path, const CoordinateSet& coords) {
  auto out = detail::open_for_write(path);
  out << "index,x,y\n";
  for (std::size_t i = 0; i < coords.size(); ++i) {
    out << i << ',' << format_number(coords[i].x) << ',' << format_number(coords[i].y) << '\n';
  }
  if (!out) throw ParseError(path.string() + ": write failed");
}

inline CoordinateSet read_coords_csv(const std::filesystem::path& path) {
  std::vector<Point2> pts;
  for (const auto& row : detail::read_numeric_csv(path, 3, 3)) pts.push_back({row.values[1], row.values[2]});
  return CoordinateSet(std::move(pts));
}

inline void write_steps_csv(const std::filesystem::path& path, std::span<const Translation2D> steps) {
  auto out = detail::open_for_write(path);
  out << "index,dx,dy\n";
  for (std::size_t i = 0; i < steps.size(); ++i) {
    out << i << ',' << format_number(steps[i].dx) << ',' << format_number(steps[i].dy) << '\n';
  }
  if (!out) throw ParseError(path.string() + ": write failed");
}

inline std::vector<Translation2D> read_steps_csv(const std::filesystem::path& path) {
  std::vector<Translation2D> steps;
  for (const auto& row : detail::read_numeric_csv(path, 3, 3)) steps.push_back({row.values[1], row.values[2]});
  return steps;
}

// One stage-one prediction with its confidence in [0, 1].
struct PairEstimate {
  Translation2D translation;
  double confidence = 0.0;
};

inline void write_flows_csv(const std::filesystem::path& path, std::span<const PairEstimate> flows) {
  auto out = detail::open_for_write(path);
  out << "index,dx,dy,confidence\n";
  for (std::size_t i = 0; i < flows.size(); ++i) {
    out << i << ',' << format_number(flows[i].translation.dx) << ',' << format_number(flows[i].translation.dy) << ','
        << format_number(flows[i].confidence) << '\n';
  }
  if (!out) throw ParseError(path.string() + ": write failed");
}

// Reads an externally produced flow file. When `expected_rows` is given the
// row count must match it exactly.
inline std::vector<PairEstimate> load_external_flows(const std::filesystem::path& path,
                                                     std::optional<std::size_t> expected_rows = std::nullopt) {
  std::vector<PairEstimate> flows;
  for (const auto& row : detail::read_numeric_csv(path, 3, 4)) {
    const double conf = row.values.size() == 4 ? row.values[3] : 1.0;
    if (conf < 0.0 || conf > 1.0) {
      throw ParseError(detail::where(path, row.line) + ": confidence must lie in [0, 1]");
    }
    flows.push_back({{row.values[1], row.values[2]}, conf});
  }
  if (expected_rows && flows.size() != *expected_rows) {
    throw ParseError(path.string() + ": expected " + std::to_string(*expected_rows) + " flow rows, found " +
                     std::to_string(flows.size()));
  }
  return flows;
}

}  // namespace slidestitch
