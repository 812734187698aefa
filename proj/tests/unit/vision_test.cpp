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


#include <algorithm>
#include <cmath>

#include "support.hpp"

namespace slidestitch {
namespace {

using testing::noise_image;
using testing::tissue;

// ---------------------------------------------------------------- oracles

// Per-pixel structure tensor straight from the definition: Sobel taps and
// window sums evaluated with explicit clamped indexing, all in double.
double oracle_min_eig(const GrayImage& img, int x, int y, int window) {
  const int w = img.width(), h = img.height(), r = window / 2;
  auto px = [&](int xx, int yy) { return static_cast<double>(img.at(std::clamp(xx, 0, w - 1), std::clamp(yy, 0, h - 1))); };
  double a = 0, b = 0, c = 0;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      const int u = std::clamp(x + dx, 0, w - 1), v = std::clamp(y + dy, 0, h - 1);
      const double gx = ((px(u + 1, v - 1) + 2 * px(u + 1, v) + px(u + 1, v + 1)) -
                         (px(u - 1, v - 1) + 2 * px(u - 1, v) + px(u - 1, v + 1))) / 8.0;
      const double gy = ((px(u - 1, v + 1) + 2 * px(u, v + 1) + px(u + 1, v + 1)) -
                         (px(u - 1, v - 1) + 2 * px(u, v - 1) + px(u + 1, v - 1))) / 8.0;
      a += gx * gx;
      b += gx * gy;
      c += gy * gy;
    }
  }
  // Eigenvalues of [[a b][b c]] via the characteristic polynomial.
  const double tr = a + c, det = a * c - b * b;
  return std::max(0.0, tr / 2 - std::sqrt(std::max(0.0, tr * tr / 4 - det)));
}

// ZNCC of a template at one placement, two-pass and in double.
double oracle_zncc(const GrayImage& tpl, const GrayImage& target, int x, int y) {
  const int w = tpl.width(), h = tpl.height();
  double mt = 0, mi = 0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      mt += tpl.at(c, r);
      mi += target.at(x + c, y + r);
    }
  }
  mt /= w * h;
  mi /= w * h;
  double num = 0, st = 0, si = 0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double a = tpl.at(c, r) - mt, b = target.at(x + c, y + r) - mi;
      num += a * b;
      st += a * a;
      si += b * b;
    }
  }
  return si <= 1e-12 ? 0.0 : num / std::sqrt(st * si);
}

GrayImage square_image() {
  std::vector<float> px(64 * 64, 0.0f);
  for (int y = 24; y < 40; ++y) {
    for (int x = 24; x < 40; ++x) px[y * 64 + x] = 1.0f;
  }
  return GrayImage(64, 64, std::move(px));
}

// Dyadic levels keep every sum exact, so periodic placements tie bit for bit.
GrayImage checkerboard(int size, int cell) {
  std::vector<float> px(static_cast<std::size_t>(size) * size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) px[y * size + x] = ((x / cell + y / cell) % 2) ? 0.875f : 0.125f;
  }
  return GrayImage(size, size, std::move(px));
}

// -------------------------------------------------------------- corners

TEST(MinEigen, MatchesBruteForceOracle) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const GrayImage img = seed == 3 ? square_image() : noise_image(48, 40, seed);
    for (int window : {3, 7}) {
      const auto map = min_eigen_map(img, window);
      for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
          const double want = oracle_min_eig(img, x, y, window);
          ASSERT_NEAR(map.at(x, y), want, 1e-5 * std::max(1.0, want)) << x << "," << y;
        }
      }
    }
  }
}

TEST(MinEigen, ClosedForm) {
  EXPECT_DOUBLE_EQ(min_eigenvalue(2, 0, 5), 2.0);
  EXPECT_NEAR(min_eigenvalue(2, 1, 2), 1.0, 1e-12);
  EXPECT_NEAR(min_eigenvalue(1, 1, 1), 0.0, 1e-12);
}

TEST(ShiTomasi, UniformImageHasNoCorners) {
  EXPECT_TRUE(shi_tomasi(GrayImage(64, 64, 0.5f)).empty());
}

TEST(ShiTomasi, RejectsTinyImagesAndBadQuality) {
  EXPECT_THROW(shi_tomasi(GrayImage(7, 64, 0.5f)), ValidationError);
  ShiTomasiParams p;
  p.quality = 0.0;
  EXPECT_THROW(shi_tomasi(GrayImage(64, 64, 0.5f), p), ValidationError);
  p.quality = 1.5;
  EXPECT_THROW(shi_tomasi(GrayImage(64, 64, 0.5f), p), ValidationError);
}

// Strongest 3x3 local maxima of the brute-force map, best first.
std::vector<Corner> oracle_peaks(const GrayImage& img, int window) {
  std::vector<Corner> peaks;
  for (int y = 1; y < img.height() - 1; ++y) {
    for (int x = 1; x < img.width() - 1; ++x) {
      const double v = oracle_min_eig(img, x, y, window);
      bool is_max = v > 1e-9;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if ((dx || dy) && oracle_min_eig(img, x + dx, y + dy, window) > v) is_max = false;
        }
      }
      if (is_max) peaks.push_back({double(x), double(y), v});
    }
  }
  std::stable_sort(peaks.begin(), peaks.end(), [](auto& a, auto& b) { return a.score > b.score; });
  return peaks;
}

int hits_near(std::span<const Corner> corners, double cx, double cy, double tol) {
  return static_cast<int>(std::count_if(corners.begin(), corners.end(), [&](const Corner& c) {
    return std::abs(c.x - cx) <= tol && std::abs(c.y - cy) <= tol;
  }));
}

// The square covers pixels 24..39; its corner pixels are 24 and 39 on each axis.
TEST(ShiTomasi, SquareYieldsItsFourCorners) {
  const GrayImage img = square_image();
  ShiTomasiParams p;
  p.score_window = 3;
  const auto corners = shi_tomasi(img, p);
  const auto peaks = oracle_peaks(img, p.score_window);
  ASSERT_EQ(corners.size(), 4u);
  ASSERT_GE(peaks.size(), 4u);
  for (const double cx : {24.0, 39.0}) {
    for (const double cy : {24.0, 39.0}) {
      EXPECT_EQ(hits_near(corners, cx, cy, 1.5), 1) << cx << "," << cy;
      EXPECT_EQ(hits_near(std::span(peaks).first(4), cx, cy, 1.5), 1) << cx << "," << cy;
    }
  }
}

// With the default 7x7 score window the response peaks where the window
// holds the most edge pixels without straddling the corner, two pixels
// inside the square; detector and oracle agree on that.
TEST(ShiTomasi, SquareCornersMatchOracleAtDefaultWindow) {
  const GrayImage img = square_image();
  const auto corners = shi_tomasi(img);
  const auto peaks = oracle_peaks(img, 7);
  ASSERT_EQ(corners.size(), 4u);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(hits_near(corners, peaks[k].x, peaks[k].y, 0.5), 1);
  }
  for (const double cx : {24.0, 39.0}) {
    for (const double cy : {24.0, 39.0}) EXPECT_EQ(hits_near(corners, cx, cy, 2.5), 1);
  }
}

TEST(ShiTomasi, CheckerboardCountAndSpacing) {
  const GrayImage img = checkerboard(64, 8);
  ShiTomasiParams p;
  p.max_corners = 10;
  const auto corners = shi_tomasi(img, p);
  ASSERT_EQ(corners.size(), 10u);
  double best = 0;
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) best = std::max(best, oracle_min_eig(img, x, y, p.score_window));
  }
  for (std::size_t i = 0; i < corners.size(); ++i) {
    EXPECT_GE(corners[i].score, p.quality * best * (1 - 1e-6));
    if (i) {
      EXPECT_LE(corners[i].score, corners[i - 1].score);
    }
    for (std::size_t j = 0; j < i; ++j) {
      EXPECT_GE(std::hypot(corners[i].x - corners[j].x, corners[i].y - corners[j].y), p.min_distance);
    }
  }
}

// Sorted, spaced, above threshold, inside the image, for random content.
TEST(ShiTomasi, PostconditionsOnRandomImages) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const GrayImage img = tissue(96, 80, seed);
    ShiTomasiParams p;
    p.max_corners = 40;
    p.min_distance = 6;
    const auto corners = shi_tomasi(img, p);
    const auto map = min_eigen_map(img, p.score_window);
    double best = 0;
    for (double v : map.values()) best = std::max(best, v);
    for (std::size_t i = 0; i < corners.size(); ++i) {
      const auto& c = corners[i];
      ASSERT_GE(c.x, 0);
      ASSERT_LT(c.x, img.width());
      ASSERT_GE(c.y, 0);
      ASSERT_LT(c.y, img.height());
      ASSERT_GE(c.score, p.quality * best);
      if (i) ASSERT_LE(c.score, corners[i - 1].score);
      for (std::size_t j = 0; j < i; ++j) {
        ASSERT_GE(std::hypot(c.x - corners[j].x, c.y - corners[j].y), p.min_distance);
      }
    }
  }
}

// -------------------------------------------------------------- pyramid

TEST(Pyramid, HalvingDimensions) {
  const auto p = build_pyramid(GrayImage(512, 512, 0.3f), 3);
  ASSERT_EQ(p.size(), 3u);
  EXPECT_EQ(p[0].width(), 512);
  EXPECT_EQ(p[1].width(), 256);
  EXPECT_EQ(p[2].width(), 128);
  EXPECT_EQ(p[2].height(), 128);
  const auto odd = build_pyramid(GrayImage(37, 21, 0.3f), 2);
  EXPECT_EQ(odd[1].width(), 19);
  EXPECT_EQ(odd[1].height(), 11);
}

TEST(Pyramid, ConstantStaysConstant) {
  const auto p = build_pyramid(GrayImage(100, 60, 0.37f), 3);
  for (const auto& level : p.levels) {
    for (float v : level.values()) ASSERT_NEAR(v, 0.37f, 1e-6);
  }
}

TEST(Pyramid, SingleLevelIsInput) {
  const GrayImage img = noise_image(32, 32, 8);
  const auto p = build_pyramid(img, 1);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0], img);
}

TEST(Pyramid, TooManyLevelsRejected) {
  EXPECT_THROW(build_pyramid(GrayImage(32, 32, 0.1f), 4), ValidationError);
  EXPECT_THROW(build_pyramid(GrayImage(32, 32, 0.1f), 0), ValidationError);
  EXPECT_NO_THROW(build_pyramid(GrayImage(32, 32, 0.1f), 3));
}

// ------------------------------------------------------------------- LK

struct CropPair {
  GrayImage prev, next;
};

// Two crops of one source at (x0, y0) and (x0, y0) + shift.
CropPair crop_pair(const GrayImage& src, double x0, double y0, Translation2D shift, int size) {
  return {crop(src, x0, y0, size, size), crop(src, x0 + shift.dx, y0 + shift.dy, size, size)};
}

TEST(LucasKanade, IdentityMotion) {
  const GrayImage img = tissue(200, 200, 4);
  const auto pyr = build_pyramid(img, 3);
  const auto corners = shi_tomasi(img);
  ASSERT_FALSE(corners.empty());
  const LkParams params;
  for (const auto& t : lk_track(pyr, pyr, corners)) {
    EXPECT_TRUE(t.converged);
    EXPECT_LE(t.translation.norm(), params.eps);
  }
}

TEST(LucasKanade, EmptyPointListGivesEmptyResult) {
  const auto pyr = build_pyramid(tissue(64, 64, 1), 2);
  EXPECT_TRUE(lk_track(pyr, pyr, {}).empty());
}

TEST(LucasKanade, RecoversIntegerShiftOfSevenPixels) {
  const GrayImage src = tissue(600, 600, 21);
  const auto pair = crop_pair(src, 0, 0, {7, 0}, 512);
  const auto a = build_pyramid(pair.prev, 3), b = build_pyramid(pair.next, 3);
  const auto est = estimate_pair_lk(a, b);
  EXPECT_NEAR(est.translation.dx, 7.0, 0.25);
  EXPECT_NEAR(est.translation.dy, 0.0, 0.25);
  // Individual tracks may lock onto look-alike structure; most must not.
  const auto corners = shi_tomasi(pair.prev);
  std::size_t good = 0;
  for (const auto& t : lk_track(a, b, corners)) {
    good += t.converged && (t.translation - Translation2D{7, 0}).norm() <= 0.25;
  }
  EXPECT_GE(good, corners.size() * 8 / 10);
}

TEST(LucasKanade, SubpixelShiftMedianWithinHalfPixel) {
  const GrayImage src = tissue(600, 600, 22);
  const Translation2D shift{12.5, -3.25};
  const auto pair = crop_pair(src, 40, 40, shift, 512);
  const auto est = estimate_pair_lk(pair.prev, pair.next);
  EXPECT_NEAR(est.translation.dx, shift.dx, 0.5);
  EXPECT_NEAR(est.translation.dy, shift.dy, 0.5);
}

// Integer shifts up to the window size, 100 random seeds.
TEST(LucasKanade, IntegerShiftsUpToWindowSize) {
  const LkParams params;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Rng rng(seed);
    const GrayImage src = tissue(320, 320, 1000 + seed);
    const int dx = static_cast<int>(std::lround(rng.uniform(-params.window, params.window)));
    const int dy = static_cast<int>(std::lround(rng.uniform(-params.window, params.window)));
    const auto pair = crop_pair(src, 30, 30, {double(dx), double(dy)}, 256);
    const auto est = estimate_pair_lk(pair.prev, pair.next);
    EXPECT_NEAR(est.translation.dx, dx, 0.25) << "seed " << seed;
    EXPECT_NEAR(est.translation.dy, dy, 0.25) << "seed " << seed;
  }
}

TEST(LucasKanade, RejectsEvenWindowAndMismatchedFrames) {
  const auto a = build_pyramid(tissue(64, 64, 1), 2), b = build_pyramid(tissue(64, 48, 1), 2);
  const std::vector<Corner> pts{{30, 30, 1}};
  EXPECT_THROW(lk_track(a, a, pts, 20, 30, 0.01), ValidationError);
  EXPECT_THROW(lk_track(a, b, pts), ValidationError);
}

// ----------------------------------------------------------- morphology

BinaryMask random_mask(int w, int h, Rng& rng, double density) {
  BinaryMask m(w, h, 0);
  for (auto& v : m.values()) v = rng.uniform01() < density;
  return m;
}

TEST(Dilate, SinglePixelBecomesSquare) {
  BinaryMask m(21, 21, 0);
  m.at(10, 10) = 1;
  const auto d = dilate_mask(m, 2);
  for (int y = 0; y < 21; ++y) {
    for (int x = 0; x < 21; ++x) {
      EXPECT_EQ(d.at(x, y), (std::abs(x - 10) <= 2 && std::abs(y - 10) <= 2) ? 1 : 0);
    }
  }
}

TEST(Dilate, RadiusZeroIsIdentity) {
  Rng rng(1);
  const auto m = random_mask(30, 20, rng, 0.1);
  EXPECT_EQ(dilate_mask(m, 0), m);
  EXPECT_THROW(dilate_mask(m, -1), ValidationError);
}

TEST(Dilate, MergesPixelsWithinReach) {
  BinaryMask m(30, 30, 0);
  m.at(10, 10) = 1;
  m.at(13, 10) = 1;
  EXPECT_EQ(connected_components(dilate_mask(m, 2)).components.size(), 1u);
  EXPECT_EQ(connected_components(m).components.size(), 2u);
}

// Oracle: a set pixel within Chebyshev distance r of any input pixel.
TEST(Dilate, MatchesDefinitionAndAlgebra) {
  Rng rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const auto m = random_mask(25, 19, rng, 0.03);
    const int r1 = static_cast<int>(rng.uniform(0, 4)), r2 = static_cast<int>(rng.uniform(0, 4));
    const auto d1 = dilate_mask(m, r1);
    for (int y = 0; y < 19; ++y) {
      for (int x = 0; x < 25; ++x) {
        bool want = false;
        for (int yy = std::max(0, y - r1); yy <= std::min(18, y + r1) && !want; ++yy) {
          for (int xx = std::max(0, x - r1); xx <= std::min(24, x + r1); ++xx) want |= m.at(xx, yy) != 0;
        }
        ASSERT_EQ(d1.at(x, y) != 0, want);
        if (m.at(x, y)) ASSERT_TRUE(d1.at(x, y));  // extensive
      }
    }
    const auto d_bigger = dilate_mask(m, r1 + 1);
    for (std::size_t i = 0; i < d1.size(); ++i) ASSERT_LE(d1.values()[i], d_bigger.values()[i]);  // monotone
    EXPECT_EQ(dilate_mask(dilate_mask(m, r1), r2), dilate_mask(m, r1 + r2));
  }
}

TEST(Components, EightConnectivityAndBoxes) {
  BinaryMask m(10, 10, 0);
  m.at(1, 1) = 1;
  m.at(2, 2) = 1;  // diagonal neighbour joins
  m.at(7, 7) = 1;
  const auto cc = connected_components(m);
  ASSERT_EQ(cc.components.size(), 2u);
  EXPECT_EQ(cc.components[0].width(), 2);
  EXPECT_EQ(cc.components[0].pixels, 2u);
  EXPECT_EQ(cc.components[1].min_x, 7);
  EXPECT_EQ(cc.labels.at(5, 5), -1);
}

// ------------------------------------------------------------ templates

TemplateParams spec_template_params() { return {15, 8, 16, 128}; }

TEST(ExtractTemplates, SingleCornerGivesCenteredPatch) {
  const GrayImage frame = tissue(256, 256, 3);
  const std::vector<Corner> corners{{100, 100, 1}};
  const auto t = extract_templates(frame, corners, spec_template_params());
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0].x(), 85);
  EXPECT_EQ(t[0].y(), 85);
  EXPECT_EQ(t[0].width(), 31);
  EXPECT_EQ(t[0].height(), 31);
  EXPECT_EQ(t[0].patch(), crop(frame, 85, 85, 31, 31));
}

TEST(ExtractTemplates, DistantCornersStaySeparate) {
  const GrayImage frame = tissue(256, 256, 3);
  const std::vector<Corner> corners{{60, 100, 2}, {160, 100, 1}};
  const auto t = extract_templates(frame, corners, spec_template_params());
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[0].x(), 45);  // stronger corner first
  EXPECT_EQ(t[1].x(), 145);
}

TEST(ExtractTemplates, NearbyCornersMerge) {
  const GrayImage frame = tissue(256, 256, 3);
  const std::vector<Corner> corners{{100, 100, 1}, {110, 100, 1}};
  const auto t = extract_templates(frame, corners, spec_template_params());
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0].x(), 85);
  EXPECT_EQ(t[0].width(), 41);
  EXPECT_EQ(t[0].height(), 31);
}

TEST(ExtractTemplates, ClippedSizeFilterCapAndFlatPatches) {
  const GrayImage frame = tissue(256, 256, 3);
  auto p = spec_template_params();
  // Near the border the box is clipped to x in [0, 17].
  EXPECT_EQ(extract_templates(frame, std::vector<Corner>{{2, 100, 1}}, p).front().width(), 18);
  p.min_size = 32;
  EXPECT_TRUE(extract_templates(frame, std::vector<Corner>{{100, 100, 1}}, p).empty());
  p = spec_template_params();
  p.max_templates = 3;
  std::vector<Corner> many;
  for (int i = 0; i < 6; ++i) many.push_back({20.0 + 40 * i, 128, double(i)});
  const auto capped = extract_templates(frame, many, p);
  ASSERT_EQ(capped.size(), 3u);
  EXPECT_EQ(capped[0].x(), 20 + 40 * 5 - 15);  // highest score first
  EXPECT_TRUE(extract_templates(GrayImage(64, 64, 0.5f), std::vector<Corner>{{30, 30, 1}}, p).empty());
  EXPECT_TRUE(extract_templates(frame, {}, p).empty());
}

TEST(Template, RejectsFlatPatch) {
  EXPECT_THROW(Template(GrayImage(8, 8, 0.2f), 0, 0), ValidationError);
  EXPECT_THROW(Template::cut(tissue(32, 32, 1), 30, 0, 8, 8), ValidationError);
}

// ------------------------------------------------------------- matching

TEST(MatchTemplate, SelfMatchRecoversOffsetExactly) {
  const GrayImage target = tissue(200, 160, 5);
  const Template t = Template::cut(target, 70, 40, 31, 31);
  // A template from a frame whose origin sits at (-13, 9) relative to target
  // appears at (70, 40) in target.
  const Template shifted(t.patch(), 70 - 13, 40 + 9);
  const auto m = match_template(shifted, target, {-13, 9}, 20);
  ASSERT_TRUE(m);
  EXPECT_EQ(m->translation, (Translation2D{-13, 9}));
  EXPECT_NEAR(m->correlation, 1.0, 1e-6);
  const auto far = match_template(shifted, target, {-5, 0}, 20);  // still covers it
  ASSERT_TRUE(far);
  EXPECT_EQ(far->translation, (Translation2D{-13, 9}));
}

TEST(MatchTemplate, BrightnessOffsetInvariant) {
  const GrayImage tex = tissue(120, 120, 6);
  std::vector<float> scaled(tex.values().begin(), tex.values().end());
  for (auto& v : scaled) v *= 0.75f;
  const GrayImage base(120, 120, scaled);
  std::vector<float> px = scaled;
  for (auto& v : px) v += 0.2f;
  const GrayImage brighter(base.width(), base.height(), std::move(px));
  const Template t = Template::cut(base, 40, 50, 25, 25);
  const auto m = match_template(t, brighter, {0, 0}, 30);
  ASSERT_TRUE(m);
  EXPECT_EQ(m->translation, (Translation2D{0, 0}));
  EXPECT_NEAR(m->correlation, 1.0, 1e-6);
}

TEST(MatchTemplate, ScoreIsInvariantToAffineIntensity) {
  Rng rng(7);
  const GrayImage target = noise_image(60, 60, 8, 0.2f, 0.6f);
  const Template t = Template::cut(noise_image(60, 60, 9), 5, 5, 17, 13);
  const NccTarget base(target);
  for (int trial = 0; trial < 50; ++trial) {
    const float gain = static_cast<float>(rng.uniform(0.2, 1.6)), offset = static_cast<float>(rng.uniform(-0.03, 0.03));
    std::vector<float> px(target.values().begin(), target.values().end());
    for (auto& v : px) v = gain * v + offset;
    const GrayImage changed = GrayImage::adopt(Raster<float>(60, 60, std::move(px)));
    const NccTarget other(changed);
    const int x = static_cast<int>(rng.uniform(0, 43)), y = static_cast<int>(rng.uniform(0, 47));
    EXPECT_NEAR(base.score(t, x, y), other.score(t, x, y), 1e-6);
  }
}

TEST(MatchTemplate, ScoreMatchesTwoPassOracle) {
  Rng rng(10);
  const GrayImage target = tissue(80, 70, 11);
  const Template t = Template::cut(tissue(80, 70, 12), 10, 10, 21, 15);
  const NccTarget nt(target);
  for (int trial = 0; trial < 100; ++trial) {
    const int x = static_cast<int>(rng.uniform(0, 60)), y = static_cast<int>(rng.uniform(0, 56));
    EXPECT_NEAR(nt.score(t, x, y), oracle_zncc(t.patch(), target, x, y), 1e-5);
  }
}

TEST(MatchTemplate, ExhaustiveArgmaxMatchesOracle) {
  const GrayImage target = tissue(90, 90, 13);
  const Template t = Template::cut(tissue(90, 90, 14), 30, 30, 19, 19);
  const auto m = match_template(t, target, {0, 0}, 25);
  ASSERT_TRUE(m);
  double best = -2;
  int bx = 0, by = 0;
  for (int y = 5; y <= 55; ++y) {
    for (int x = 5; x <= 55; ++x) {
      const double s = oracle_zncc(t.patch(), target, x, y);
      if (s > best + 1e-9) best = s, bx = x, by = y;
    }
  }
  EXPECT_EQ(m->x, bx);
  EXPECT_EQ(m->y, by);
  EXPECT_NEAR(m->correlation, best, 1e-5);
}

// A periodic target scores 1.0 at every period; the smallest (y, x) wins.
TEST(MatchTemplate, TiesGoToSmallestPlacement) {
  const GrayImage target = checkerboard(96, 8);
  const Template t = Template::cut(target, 32, 32, 16, 16);
  const auto m = match_template(t, target, {0, 0}, 20);
  ASSERT_TRUE(m);
  EXPECT_EQ(m->y, 16);
  EXPECT_EQ(m->x, 16);
}

TEST(MatchTemplate, NoPlacementInsideTargetGivesNoMatch) {
  const GrayImage target = tissue(64, 64, 1);
  const Template t = Template::cut(target, 10, 10, 16, 16);
  EXPECT_FALSE(match_template(t, target, {500, 0}, 10));
  EXPECT_THROW(match_template(Template::cut(tissue(128, 128, 2), 0, 0, 100, 100), target, {0, 0}, 5),
               ValidationError);
}

TEST(MatchTemplate, SubpixelRefinementMovesTowardTruth) {
  const GrayImage src = tissue(300, 300, 15);
  const GrayImage a = crop(src, 50, 50, 200, 200), b = crop(src, 50.4, 49.7, 200, 200);
  const Template t = Template::cut(a, 80, 80, 41, 41);
  const auto coarse = match_template(t, b, {0, 0}, 5);
  const auto fine = match_template(t, b, {0, 0}, 5, {.subpixel = true});
  ASSERT_TRUE(coarse && fine);
  const Translation2D truth{0.4, -0.3};
  EXPECT_LT((fine->translation - truth).norm(), (coarse->translation - truth).norm());
  EXPECT_LT((fine->translation - truth).norm(), 0.2);
}

// Simulated neighbours: every template of frame A lands within 1 px of the
// simulator's ground truth in frame B.
TEST(MatchTemplate, SimulatedNeighbourWithinOnePixel) {
  const GrayImage src = tissue(1200, 1200, 16);
  SimConfig cfg;
  cfg.seed = 3;
  const auto plan = plan_scan(src.width(), src.height(), cfg);
  const auto seq = render_scan(src, std::span(plan.steps).first(10), cfg);
  const Translation2D truth = seq.truth_coords[10] - seq.truth_coords[0];
  const auto corners = shi_tomasi(seq.frames[0], {32, 0.01, 30, 7});
  int checked = 0;
  for (const auto& t : extract_templates(seq.frames[0], corners)) {
    const double tx = t.x() - truth.dx, ty = t.y() - truth.dy;
    if (tx < 0 || ty < 0 || tx + t.width() > 512 || ty + t.height() > 512) continue;  // not in the overlap
    const auto m = match_template(t, seq.frames[10], truth, 40);
    ASSERT_TRUE(m);
    EXPECT_NEAR(m->translation.dx, truth.dx, 1.0);
    EXPECT_NEAR(m->translation.dy, truth.dy, 1.0);
    ++checked;
  }
  EXPECT_GE(checked, 3);
}

// For every template whose content is present in the target, the pyramid
// search finds the exhaustive full-resolution optimum. (Templates with no true
// counterpart can land on different look-alikes; graph pruning handles those.)
TEST(CoarseToFine, AgreesWithExhaustiveSearchOnStrongMatches) {
  const GrayImage src = tissue(900, 900, 17);
  Rng rng(18);
  int present = 0;
  for (int trial = 0; trial < 6; ++trial) {
    const Translation2D truth{rng.uniform(-200, 200), rng.uniform(-200, 200)};
    const GrayImage a = crop(src, 250, 250, 256, 256), b = crop(src, 250 + truth.dx, 250 + truth.dy, 256, 256);
    const MatchPyramid pa(a, 3), pb(b, 3);
    for (const auto& t : extract_templates(a, shi_tomasi(a, {16, 0.01, 30, 7}))) {
      const auto full = match_template(t, b, {0, 0}, 256, {.subpixel = true});
      const auto wide = match_template_coarse_to_fine(t, pa, pb, {0, 0}, 256);
      ASSERT_TRUE(full && wide);
      EXPECT_GE(full->correlation, wide->correlation - 1e-9);  // exhaustive is the upper bound
      const double tx = t.x() - truth.dx, ty = t.y() - truth.dy;
      if (tx < 1 || ty < 1 || tx + t.width() > 255 || ty + t.height() > 255) continue;
      ++present;
      EXPECT_LT((full->translation - truth).norm(), 0.5);
      EXPECT_LT((wide->translation - full->translation).norm(), 1e-9);
    }
  }
  EXPECT_GE(present, 12);
}

}  // namespace
}  // namespace slidestitch
