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


#include <fstream>

#include "support.hpp"

namespace slidestitch {
namespace {

using testing::TempDir;
using testing::tissue;

void write_text(const std::filesystem::path& p, const std::string& s) { std::ofstream(p) << s; }

// ---------------------------------------------------------- estimate_pair_lk

TEST(EstimatePairLk, IdenticalFrames) {
  const GrayImage f = tissue(256, 256, 1);
  const auto e = estimate_pair_lk(f, f);
  EXPECT_LE(e.translation.norm(), LkParams{}.eps);
  EXPECT_GE(e.confidence, 0.9);
}

TEST(EstimatePairLk, IntegerShiftPair) {
  const GrayImage src = tissue(400, 400, 2);
  const auto e = estimate_pair_lk(crop(src, 50, 50, 300, 300), crop(src, 65, 52, 300, 300));
  EXPECT_NEAR(e.translation.dx, 15.0, 0.5);
  EXPECT_NEAR(e.translation.dy, 2.0, 0.5);
  EXPECT_GT(e.confidence, 0.5);
}

TEST(EstimatePairLk, TexturelessFallsBack) {
  const GrayImage f(128, 128, 0.4f);
  const auto e = estimate_pair_lk(f, f);
  EXPECT_EQ(e.translation, (Translation2D{0, 0}));
  EXPECT_EQ(e.confidence, 0.0);
}

TEST(EstimatePairLk, DimensionMismatch) {
  EXPECT_THROW(estimate_pair_lk(GrayImage(64, 64, 0.1f), GrayImage(64, 65, 0.1f)), ValidationError);
}

// ------------------------------------------------------------------ median

TEST(MedianTranslation, Examples) {
  const std::vector<Translation2D> odd{{1, 9}, {3, 7}, {2, 8}};
  EXPECT_EQ(median_translation(odd), (Translation2D{2, 8}));
  const std::vector<Translation2D> even{{1, 0}, {4, 10}, {2, 2}, {3, 6}};
  EXPECT_EQ(median_translation(even), (Translation2D{2.5, 4}));
  EXPECT_THROW(median_translation({}), ValidationError);
}

// Up to 49% arbitrary outliers cannot move the median off a shared inlier
// value; with spread-out inliers it stays inside their range.
TEST(MedianTranslation, RobustToMinorityOutliers) {
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t total = 2 + static_cast<std::size_t>(rng.uniform(0, 200));
    const std::size_t outliers = static_cast<std::size_t>(rng.uniform(0, 0.49 * total + 0.999));
    ASSERT_LE(outliers * 100, total * 49 + 100);
    const std::size_t n_out = std::min(outliers, (total * 49) / 100);
    const Translation2D t{rng.uniform(-30, 30), rng.uniform(-30, 30)};
    std::vector<Translation2D> same(total - n_out, t), spread;
    for (std::size_t i = 0; i < total - n_out; ++i) spread.push_back(t + Translation2D{rng.uniform(-1, 1), rng.uniform(-1, 1)});
    for (std::size_t i = 0; i < n_out; ++i) {
      const Translation2D o{rng.uniform(-1e4, 1e4), rng.uniform(-1e4, 1e4)};
      same.push_back(o);
      spread.push_back(o);
    }
    std::shuffle(same.begin(), same.end(), std::mt19937_64(trial));
    EXPECT_EQ(median_translation(same), t);
    const Translation2D m = median_translation(spread);
    EXPECT_LE(std::abs(m.dx - t.dx), 1.0);
    EXPECT_LE(std::abs(m.dy - t.dy), 1.0);
  }
}

// ---------------------------------------------------------- external flows

TEST(LoadExternalFlows, PassthroughWithDefaultConfidence) {
  TempDir dir;
  write_text(dir / "f.csv", "index,dx,dy\n0,10.0,0.5\n1,-3,2.25\n");
  const auto f = load_external_flows(dir / "f.csv");
  ASSERT_EQ(f.size(), 2u);
  EXPECT_EQ(f[0].translation, (Translation2D{10.0, 0.5}));
  EXPECT_EQ(f[1].translation, (Translation2D{-3, 2.25}));
  EXPECT_EQ(f[0].confidence, 1.0);
}

TEST(LoadExternalFlows, HeaderlessWithConfidenceColumn) {
  TempDir dir;
  write_text(dir / "f.csv", "0,1,2,0.25\r\n1,3,4,1\n\n");
  const auto f = load_external_flows(dir / "f.csv", 2);
  ASSERT_EQ(f.size(), 2u);
  EXPECT_EQ(f[0].confidence, 0.25);
}

TEST(LoadExternalFlows, RowCountMismatchNamesBothCounts) {
  TempDir dir;
  write_text(dir / "f.csv", "index,dx,dy\n0,1,1\n1,1,1\n");
  try {
    load_external_flows(dir / "f.csv", 3);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("expected 3"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("found 2"), std::string::npos) << e.what();
  }
}

TEST(LoadExternalFlows, MalformedRowsReportPathAndLine) {
  TempDir dir;
  const std::vector<std::pair<std::string, std::string>> cases{
      {"index,dx,dy\n0,1,1\n1,abc,1\n", ":3:"},
      {"index,dx,dy\n0,1\n", ":2:"},
      {"index,dx,dy\n0,1,1\n2,1,1\n", ":3:"},
      {"0,1,1,1.5\n", ":1:"},
      {"0,1,1,0.5,9\n", ":1:"},
      {"0,nan,1\n", ":1:"},
  };
  for (const auto& [text, where] : cases) {
    write_text(dir / "bad.csv", text);
    try {
      load_external_flows(dir / "bad.csv");
      ADD_FAILURE() << "accepted: " << text;
    } catch (const ParseError& e) {
      const std::string msg = e.what();
      EXPECT_NE(msg.find((dir / "bad.csv").string() + where), std::string::npos) << msg;
    }
  }
  EXPECT_THROW(load_external_flows(dir / "missing.csv"), ParseError);
}

// ------------------------------------------------------------ stage one

std::vector<GrayImage> blank_frames(std::size_t n) { return std::vector<GrayImage>(n, GrayImage(16, 16, 0.0f)); }

TEST(RetainedIndices, StrideArithmetic) {
  EXPECT_EQ(retained_indices(401, 20).size(), 21u);
  EXPECT_EQ(retained_indices(401, 20).back(), 400u);
  EXPECT_EQ(retained_indices(400, 20).back(), 380u);
  EXPECT_EQ(retained_indices(5, 1), (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  EXPECT_THROW(retained_indices(5, 0), ValidationError);
}

TEST(RunStageOne, PerfectFlowsReproduceTruth) {
  SimConfig cfg;
  cfg.seed = 4;
  const auto plan = plan_scan(2000, 2000, cfg);
  const auto truth = compose_coords(plan.steps);
  std::vector<PairEstimate> flows;
  for (const auto& s : plan.steps) flows.push_back({s, 1.0});
  const auto frames = blank_frames(truth.size());
  const auto approx = run_stage_one(frames, ExternalFlowEstimator{flows}, 1);
  EXPECT_EQ(approx.coords, truth);
  EXPECT_EQ(approx.steps, plan.steps);
  EXPECT_EQ(epe(approx.steps, plan.steps), 0.0);
  EXPECT_EQ(re_epe(approx.coords, truth), 0.0);
}

TEST(RunStageOne, TruthStepsFileFedAsFlows) {
  SimConfig cfg;
  cfg.seed = 8;
  const auto plan = plan_scan(1600, 1600, cfg);
  TempDir dir;
  write_steps_csv(dir / "truth_steps.csv", plan.steps);
  const auto flows = load_external_flows(dir / "truth_steps.csv", plan.steps.size());
  const auto approx = run_stage_one(blank_frames(plan.steps.size() + 1), ExternalFlowEstimator{flows}, 1);
  EXPECT_EQ(approx.coords, compose_coords(plan.steps));
}

TEST(RunStageOne, IdentityEstimatorGivesZeroCoords) {
  const std::vector<PairEstimate> zero(4, PairEstimate{});
  const auto approx = run_stage_one(blank_frames(5), ExternalFlowEstimator{zero}, 1);
  for (const auto& p : approx.coords.points()) EXPECT_EQ(p, (Point2{0, 0}));
  EXPECT_EQ(approx.retained.size(), 5u);
}

TEST(RunStageOne, WrongFlowCountAndTooFewFrames) {
  EXPECT_THROW(run_stage_one(blank_frames(5), ExternalFlowEstimator{std::vector<PairEstimate>(3)}, 1), ValidationError);
  EXPECT_THROW(run_stage_one(blank_frames(1), ExternalFlowEstimator{{}}, 1), ValidationError);
  EXPECT_THROW(run_stage_one(blank_frames(20), ExternalFlowEstimator{{}}, 20), ValidationError);
}

TEST(RunStageOne, StrideKeepsEveryNthFrame) {
  const std::vector<PairEstimate> flows(2, PairEstimate{{1, 2}, 0.5});
  const auto approx = run_stage_one(blank_frames(7), ExternalFlowEstimator{flows}, 3);
  EXPECT_EQ(approx.retained, (std::vector<std::size_t>{0, 3, 6}));
  EXPECT_EQ(approx.coords[2], (Point2{2, 4}));
}

TEST(RunStageOne, ConfidenceIsClampedAndNonFiniteStepsZeroed) {
  const std::vector<PairEstimate> flows{{{1, 1}, 3.0}, {{std::nan(""), 0}, 1.0}};
  const auto approx = run_stage_one(blank_frames(3), ExternalFlowEstimator{flows}, 1);
  EXPECT_EQ(approx.confidence, (std::vector<double>{1.0, 0.0}));
  EXPECT_EQ(approx.steps[1], (Translation2D{0, 0}));
}

// LK on real simulated data at the default stride: estimates may fail, but
// every step is finite and the stitch is produced.
TEST(RunStageOne, LkSmokeOverTenSeeds) {
  const GrayImage src = tissue(1100, 1100, 30);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SimConfig cfg;
    cfg.seed = seed;
    cfg.patch = 256;
    const auto plan = plan_scan(src.width(), src.height(), cfg);
    const auto steps = std::span(plan.steps).first(std::min<std::size_t>(plan.steps.size(), 60));
    const auto seq = render_scan(src, steps, cfg);
    const auto approx = run_stage_one(seq.frames, LkEstimator{}, 20);
    ASSERT_EQ(approx.coords.size(), approx.retained.size());
    const auto truth = retained_truth(seq.truth_coords, approx.retained);
    EXPECT_TRUE(std::isfinite(epe(approx.steps, difference_coords(truth))));
    for (double c : approx.confidence) EXPECT_TRUE(c >= 0.0 && c <= 1.0);
  }
}

// Chained LK sums the consecutive-pair estimates; on a slow low-noise scan
// each of those is easy, so the chain lands near truth.
TEST(RunStageOne, ChainedLkFollowsConsecutivePairs) {
  const GrayImage src = tissue(700, 700, 31);
  auto cfg = testing::low_noise_config(3);
  cfg.patch = 256;
  const auto plan = plan_scan(src.width(), src.height(), cfg);
  const auto seq = render_scan(src, std::span(plan.steps).first(10), cfg);
  LkEstimator lk;
  lk.chain = true;
  const auto approx = run_stage_one(seq.frames, lk, 5);
  const auto truth = retained_truth(seq.truth_coords, approx.retained);
  EXPECT_LT(epe(approx.steps, difference_coords(truth)), 1.0);
}

// ---------------------------------------------------------- flows_for_stride

TEST(FlowsForStride, PassesRetainedPairRowsThrough) {
  const std::vector<PairEstimate> flows{{{1, 2}, 0.5}, {{3, 4}, 1.0}};
  const auto out = flows_for_stride(flows, 41, 20);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[1].translation, (Translation2D{3, 4}));
}

TEST(FlowsForStride, SumsConsecutivePairRows) {
  std::vector<PairEstimate> flows;
  for (int i = 0; i < 6; ++i) flows.push_back({{double(i), 1.0}, i == 4 ? 0.25 : 1.0});
  const auto out = flows_for_stride(flows, 7, 3);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].translation, (Translation2D{0 + 1 + 2, 3}));
  EXPECT_EQ(out[1].translation, (Translation2D{3 + 4 + 5, 3}));
  EXPECT_EQ(out[0].confidence, 1.0);
  EXPECT_EQ(out[1].confidence, 0.25);
  // Trailing frames past the last retained one are ignored.
  const auto tail = flows_for_stride(std::vector<PairEstimate>(7, PairEstimate{{1, 0}, 1}), 8, 3);
  ASSERT_EQ(tail.size(), 2u);
  EXPECT_EQ(tail[1].translation, (Translation2D{3, 0}));
}

TEST(FlowsForStride, OtherCountsRejected) {
  try {
    flows_for_stride(std::vector<PairEstimate>(5), 41, 20);
    FAIL();
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("5 rows"), std::string::npos);
    EXPECT_NE(msg.find("expected 2"), std::string::npos);
    EXPECT_NE(msg.find("40"), std::string::npos);
  }
  EXPECT_THROW(flows_for_stride({}, 10, 20), ValidationError);
}

}  // namespace
}  // namespace slidestitch
