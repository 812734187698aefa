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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace slidestitch {

// Raised when an argument violates an operation's precondition.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised for malformed input files. The message carries path and line.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Frame-to-frame displacement in pixels; x grows rightward, y downward.
// Always expresses "destination origin minus source origin" in global space.
struct Translation2D {
  double dx = 0.0;
  double dy = 0.0;

  Translation2D& operator+=(const Translation2D& o) {
    dx += o.dx;
    dy += o.dy;
    return *this;
  }
  Translation2D& operator-=(const Translation2D& o) {
    dx -= o.dx;
    dy -= o.dy;
    return *this;
  }
  friend Translation2D operator+(Translation2D a, const Translation2D& b) { return a += b; }
  friend Translation2D operator-(Translation2D a, const Translation2D& b) { return a -= b; }
  friend Translation2D operator-(const Translation2D& a) { return {-a.dx, -a.dy}; }
  friend Translation2D operator*(double s, const Translation2D& a) { return {s * a.dx, s * a.dy}; }
  friend bool operator==(const Translation2D&, const Translation2D&) = default;

  double norm() const { return std::hypot(dx, dy); }
  bool finite() const { return std::isfinite(dx) && std::isfinite(dy); }
};

// Upper-left corner of a frame in global (stitch) space.
struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(const Point2& p, const Translation2D& t) { return {p.x + t.dx, p.y + t.dy}; }
  friend Translation2D operator-(const Point2& a, const Point2& b) { return {a.x - b.x, a.y - b.y}; }
  friend bool operator==(const Point2&, const Point2&) = default;
  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

// Per-frame global coordinates, one entry per frame, all finite.
class CoordinateSet {
 public:
  CoordinateSet() = default;
  explicit CoordinateSet(std::vector<Point2> coords) : coords_(std::move(coords)) {
    for (std::size_t i = 0; i < coords_.size(); ++i) {
      if (!coords_[i].finite()) {
        throw ValidationError("coordinate " + std::to_string(i) + " is not finite");
      }
    }
  }

  std::size_t size() const { return coords_.size(); }
  bool empty() const { return coords_.empty(); }
  const Point2& operator[](std::size_t i) const { return coords_[i]; }
  std::span<const Point2> points() const { return coords_; }
  auto begin() const { return coords_.begin(); }
  auto end() const { return coords_.end(); }

  // Copy with every coordinate shifted so that frame `index` sits at the origin.
  CoordinateSet recentered(std::size_t index) const {
    std::vector<Point2> out(coords_.size());
    const Point2 c = coords_.at(index);
    for (std::size_t i = 0; i < coords_.size(); ++i) out[i] = {coords_[i].x - c.x, coords_[i].y - c.y};
    return CoordinateSet(std::move(out));
  }

  friend bool operator==(const CoordinateSet&, const CoordinateSet&) = default;

 private:
  std::vector<Point2> coords_;
};

// Row-major raster of arbitrary pixel type. Used for intermediate maps
// (gradients, scores, masks); luminance frames use GrayImage.
template <typename T>
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(checked_area(width, height), fill) {}
  Raster(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != checked_area(width, height)) {
      throw ValidationError("raster buffer holds " + std::to_string(data_.size()) + " values, expected " +
                            std::to_string(checked_area(width, height)));
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  T& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  const T& at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  T* row(int y) { return data_.data() + static_cast<std::size_t>(y) * width_; }
  const T* row(int y) const { return data_.data() + static_cast<std::size_t>(y) * width_; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  static std::size_t checked_area(int width, int height) {
    if (width < 0 || height < 0) throw ValidationError("raster dimensions must be non-negative");
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

// Luminance frame with values in [0,1].
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, float fill = 0.0f) : pixels_(width, height, fill) {
    check_value(fill, 0);
  }
  GrayImage(int width, int height, std::vector<float> data) : pixels_(width, height, std::move(data)) {
    const auto v = pixels_.values();
    for (std::size_t i = 0; i < v.size(); ++i) check_value(v[i], i);
  }

  // Wraps a raster whose values are already known to lie in [0,1]
  // (blurs, crops and bilinear resamples of valid images).
  static GrayImage adopt(Raster<float> pixels) {
    GrayImage img;
    img.pixels_ = std::move(pixels);
    return img;
  }

  int width() const { return pixels_.width(); }
  int height() const { return pixels_.height(); }
  std::size_t size() const { return pixels_.size(); }
  bool empty() const { return pixels_.empty(); }
  float at(int x, int y) const { return pixels_.at(x, y); }
  const float* row(int y) const { return pixels_.row(y); }
  std::span<const float> values() const { return pixels_.values(); }
  const Raster<float>& raster() const { return pixels_; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  static void check_value(float v, std::size_t i) {
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
      throw ValidationError("pixel " + std::to_string(i) + " outside [0,1]");
    }
  }

  Raster<float> pixels_;
};

// Rec.601 luma.
inline float luminance(float r, float g, float b) { return 0.299f * r + 0.587f * g + 0.114f * b; }

// Simulated scan: frames plus exact ground truth. truth_coords[0] is the origin
// and truth_coords[i+1] == truth_coords[i] + truth_steps[i].
struct FrameSequence {
  std::vector<GrayImage> frames;
  std::vector<Translation2D> truth_steps;
  CoordinateSet truth_coords;
  std::string source_id;
  std::uint64_t seed = 0;
};

// Prefix sum of step translations starting at the origin.
inline CoordinateSet compose_coords(std::span<const Translation2D> steps) {
  std::vector<Point2> coords;
  coords.reserve(steps.size() + 1);
  coords.push_back({0.0, 0.0});
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (!steps[i].finite()) throw ValidationError("step " + std::to_string(i) + " is not finite");
    coords.push_back(coords.back() + steps[i]);
  }
  return CoordinateSet(std::move(coords));
}

// First differences of a coordinate set; inverse of compose_coords.
inline std::vector<Translation2D> difference_coords(const CoordinateSet& coords) {
  std::vector<Translation2D> steps;
  for (std::size_t i = 1; i < coords.size(); ++i) steps.push_back(coords[i] - coords[i - 1]);
  return steps;
}

// Seeded generator with a platform-stable stream. The engine's output sequence
// is fixed by the C++ standard; the real-valued transforms below are written
// out explicitly because std::*_distribution is implementation-defined.
class Rng {
 public:
  static constexpr const char* kAlgorithm = "mt19937_64/uniform53/box-muller";

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0,1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double normal(double mean, double stddev) {
    if (has_spare_) {
      has_spare_ = false;
      return mean + stddev * spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return mean + stddev * r * std::cos(theta);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace slidestitch
