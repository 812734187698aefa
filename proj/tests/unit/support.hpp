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

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "slidestitch.hpp"

namespace slidestitch::testing {

// Fresh, empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("slidestitch-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline GrayImage uniform_image(int w, int h, float v) { return GrayImage(w, h, v); }

// Uniform noise in [lo, hi]; handy as a stand-in for arbitrary content.
inline GrayImage noise_image(int w, int h, std::uint64_t seed, float lo = 0.0f, float hi = 1.0f) {
  Rng rng(seed);
  std::vector<float> px(static_cast<std::size_t>(w) * h);
  for (auto& v : px) v = static_cast<float>(rng.uniform(lo, hi));
  return GrayImage(w, h, std::move(px));
}

inline GrayImage tissue(int w, int h, std::uint64_t seed) { return make_tissue_texture(w, h, seed); }

inline std::vector<Point2> random_points(Rng& rng, std::size_t n, double span) {
  std::vector<Point2> pts(n);
  for (auto& p : pts) p = {rng.uniform(-span, span), rng.uniform(-span, span)};
  return pts;
}

// A low-noise simulation setting: steady speed, nearly straight passes.
inline SimConfig low_noise_config(std::uint64_t seed) {
  SimConfig cfg;
  cfg.seed = seed;
  cfg.noise_factor_range = {20.0, 25.0};
  cfg.angle_std_range_deg = {1.0, 3.0};
  return cfg;
}

// Graph defaults are tuned for 512 px frames; smaller frames get a corner
// budget scaled by area so dilated corners still form template-sized blobs.
inline GraphConfig graph_config_for(int patch) {
  GraphConfig cfg;
  cfg.template_corners.max_corners = std::max(8, 64 * patch * patch / (512 * 512));
  return cfg;
}

}  // namespace slidestitch::testing
