// Copyright 2026 The CooperRisk Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cooperrisk/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

namespace cooperrisk {
namespace {

ObjectState gt_box(double s, double l, double heading = 0.0) {
  ObjectState o;
  o.id = static_cast<int>(s * 10);
  o.s = s;
  o.l = l;
  o.heading = heading;
  o.length = 4.5;
  o.width = 2.0;
  return o;
}

DetectionBox det_box(double s, double l, double confidence,
                     double heading = 0.0) {
  DetectionBox d;
  d.id = 0;
  d.s = s;
  d.l = l;
  d.heading = heading;
  d.length = 4.5;
  d.width = 2.0;
  d.confidence = confidence;
  return d;
}

// One object, `modes` modes, `steps` steps; mean of mode m at step k is
// base[k] shifted laterally by offsets[m].
TrajectoryDistribution offset_modes(const std::vector<double>& offsets,
                                    int steps) {
  TrajectoryDistribution d;
  d.modes = static_cast<int>(offsets.size());
  d.objects = 1;
  d.steps = steps;
  d.dt = 0.5;
  const size_t total = static_cast<size_t>(d.modes) * steps;
  d.mean_x.resize(total);
  d.mean_y.resize(total);
  d.sigma_x.assign(total, 1.0);
  d.sigma_y.assign(total, 1.0);
  d.corr.assign(total, 0.0);
  d.heading.assign(total, 0.0);
  d.speed.assign(total, 2.0);
  d.weights.assign(static_cast<size_t>(d.modes), 1.0 / d.modes);
  d.object_ids = {5};
  d.object_cls = {ObjectClass::kVehicle};
  d.object_length = {4.5};
  d.object_width = {2.0};
  d.object_mass = {1500.0};
  for (int m = 0; m < d.modes; ++m) {
    for (int k = 0; k < steps; ++k) {
      d.mean_x[d.idx(m, 0, k)] = 2.0 * (k + 1);
      d.mean_y[d.idx(m, 0, k)] = offsets[static_cast<size_t>(m)];
    }
  }
  return d;
}

std::vector<Vector2d> straight_gt(int steps) {
  std::vector<Vector2d> gt;
  for (int k = 0; k < steps; ++k) gt.push_back({2.0 * (k + 1), 0.0});
  return gt;
}

TEST(MatchDetections, PerfectDetectionsAllTruePositive) {
  const std::vector<ObjectState> gt = {gt_box(0, 0), gt_box(20, 5)};
  const std::vector<DetectionBox> dets = {det_box(0, 0, 0.9),
                                          det_box(20, 5, 0.8)};
  const MatchResult r = match_detections(dets, gt);
  ASSERT_EQ(r.true_positives.size(), 2u);
  EXPECT_TRUE(r.false_positive_detections.empty());
  EXPECT_TRUE(r.false_negative_gt.empty());
  EXPECT_EQ(r.n_gt(), 2);
  for (const MatchPair& p : r.true_positives) EXPECT_DOUBLE_EQ(p.iou, 1.0);
}

TEST(MatchDetections, HigherConfidenceClaimsTheObject) {
  const std::vector<ObjectState> gt = {gt_box(0, 0)};
  const std::vector<DetectionBox> dets = {det_box(0.5, 0, 0.6),
                                          det_box(0.1, 0, 0.9)};
  const MatchResult r = match_detections(dets, gt);
  ASSERT_EQ(r.true_positives.size(), 1u);
  EXPECT_EQ(r.true_positives[0].detection, 1);
  ASSERT_EQ(r.false_positive_detections.size(), 1u);
  EXPECT_EQ(r.false_positive_detections[0], 0);
}

TEST(MatchDetections, EqualConfidenceBreaksTiesByIndex) {
  const std::vector<ObjectState> gt = {gt_box(0, 0)};
  const std::vector<DetectionBox> dets = {det_box(0.2, 0, 0.7),
                                          det_box(0.2, 0, 0.7)};
  const MatchResult r = match_detections(dets, gt);
  ASSERT_EQ(r.true_positives.size(), 1u);
  EXPECT_EQ(r.true_positives[0].detection, 0);
  EXPECT_EQ(r.false_positive_detections[0], 1);
}

TEST(MatchDetections, ThresholdGatesTheOverlap) {
  // 4.5 x 2 boxes offset 2 m along the length: IoU = 5/13 < 0.5.
  const std::vector<ObjectState> gt = {gt_box(0, 0)};
  const std::vector<DetectionBox> dets = {det_box(2.0, 0, 0.9)};
  const MatchResult strict = match_detections(dets, gt, 0.5);
  EXPECT_TRUE(strict.true_positives.empty());
  EXPECT_EQ(strict.false_negative_gt.size(), 1u);
  const MatchResult loose = match_detections(dets, gt, 0.3);
  ASSERT_EQ(loose.true_positives.size(), 1u);
  EXPECT_NEAR(loose.true_positives[0].iou, 5.0 / 13.0, 1e-12);
}

TEST(MatchDetections, RejectsBadThreshold) {
  EXPECT_THROW(match_detections({}, {}, 0.0), std::invalid_argument);
  EXPECT_THROW(match_detections({}, {}, 1.5), std::invalid_argument);
}

TEST(AveragePrecision, PerfectDetectionsScoreOne) {
  const std::vector<ObjectState> gt = {gt_box(0, 0), gt_box(20, 5)};
  const std::vector<DetectionBox> dets = {det_box(0, 0, 0.9),
                                          det_box(20, 5, 0.4)};
  EXPECT_DOUBLE_EQ(average_precision(dets, gt).value(), 1.0);
}

TEST(AveragePrecision, AllSpuriousScoreZero) {
  const std::vector<ObjectState> gt = {gt_box(0, 0)};
  const std::vector<DetectionBox> dets = {det_box(50, 20, 0.9),
                                          det_box(70, -20, 0.8)};
  EXPECT_DOUBLE_EQ(average_precision(dets, gt).value(), 0.0);
}

TEST(AveragePrecision, SpuriousBelowCorrectDoesNotHurt) {
  const std::vector<ObjectState> gt = {gt_box(0, 0)};
  const std::vector<DetectionBox> dets = {det_box(0, 0, 0.9),
                                          det_box(50, 20, 0.8)};
  EXPECT_DOUBLE_EQ(average_precision(dets, gt).value(), 1.0);
}

TEST(AveragePrecision, SpuriousAboveCorrectHalvesTheScore) {
  const std::vector<ObjectState> gt = {gt_box(0, 0)};
  const std::vector<DetectionBox> dets = {det_box(0, 0, 0.8),
                                          det_box(50, 20, 0.9)};
  EXPECT_DOUBLE_EQ(average_precision(dets, gt).value(), 0.5);
}

TEST(AveragePrecision, EnvelopeHandCase) {
  // Confidence order: TP, FP, TP over 2 gt. Points (r, p):
  // (0.5, 1), (0.5, 0.5), (1, 2/3); envelope gives 0.5 * 1 + 0.5 * 2/3.
  const std::vector<ObjectState> gt = {gt_box(0, 0), gt_box(20, 5)};
  const std::vector<DetectionBox> dets = {det_box(0, 0, 0.9),
                                          det_box(60, -10, 0.8),
                                          det_box(20, 5, 0.7)};
  EXPECT_NEAR(average_precision(dets, gt).value(), 5.0 / 6.0, 1e-12);
}

TEST(AveragePrecision, AbsentWithoutGroundTruth) {
  const std::vector<DetectionBox> dets = {det_box(0, 0, 0.9)};
  EXPECT_FALSE(average_precision(dets, {}).has_value());
}

TEST(AveragePrecision, ZeroWithoutDetections) {
  const std::vector<ObjectState> gt = {gt_box(0, 0)};
  EXPECT_DOUBLE_EQ(average_precision({}, gt).value(), 0.0);
}

TEST(MinAdeFde, ExactModeScoresZero) {
  const TrajectoryDistribution d = offset_modes({0.0}, 4);
  const AdeFde r = min_ade_fde(d, {straight_gt(4)});
  EXPECT_EQ(r.objects_counted, 1);
  EXPECT_DOUBLE_EQ(r.min_ade, 0.0);
  EXPECT_DOUBLE_EQ(r.min_fde, 0.0);
}

TEST(MinAdeFde, ConstantLateralOffsetScoresTheOffset) {
  const TrajectoryDistribution d = offset_modes({1.0}, 4);
  const AdeFde r = min_ade_fde(d, {straight_gt(4)});
  EXPECT_DOUBLE_EQ(r.min_ade, 1.0);
  EXPECT_DOUBLE_EQ(r.min_fde, 1.0);
}

TEST(MinAdeFde, TakesTheMinimumOverModes) {
  const TrajectoryDistribution d = offset_modes({2.0, 0.5}, 4);
  const AdeFde r = min_ade_fde(d, {straight_gt(4)});
  EXPECT_DOUBLE_EQ(r.min_ade, 0.5);
  EXPECT_DOUBLE_EQ(r.min_fde, 0.5);
}

TEST(MinAdeFde, AdeAndFdeMinimaAreIndependent) {
  // Mode 0: on track until a 2 m final miss. Mode 1: 3 m off early, 0.5 m
  // at the end. Best ADE comes from mode 0, best FDE from mode 1.
  TrajectoryDistribution d = offset_modes({0.0, 3.0}, 2);
  d.mean_y[d.idx(0, 0, 1)] = 2.0;
  d.mean_y[d.idx(1, 0, 1)] = 0.5;
  const AdeFde r = min_ade_fde(d, {straight_gt(2)});
  EXPECT_DOUBLE_EQ(r.min_ade, 1.0);   // mode 0: (0 + 2) / 2
  EXPECT_DOUBLE_EQ(r.min_fde, 0.5);   // mode 1 endpoint
}

TEST(MinAdeFde, EmptyGtExcludesTheObject) {
  TrajectoryDistribution d = offset_modes({1.0}, 4);
  const AdeFde none = min_ade_fde(d, {std::vector<Vector2d>{}});
  EXPECT_EQ(none.objects_counted, 0);
  EXPECT_DOUBLE_EQ(none.min_ade, 0.0);
  EXPECT_DOUBLE_EQ(none.min_fde, 0.0);
}

TEST(MinAdeFde, RejectsMismatchedShapes) {
  const TrajectoryDistribution d = offset_modes({1.0}, 4);
  EXPECT_THROW(min_ade_fde(d, {}), std::invalid_argument);
  EXPECT_THROW(min_ade_fde(d, {straight_gt(3)}), std::invalid_argument);
}

MatchResult synthetic_matches(int n_tp, int n_fp, int n_fn) {
  MatchResult m;
  for (int i = 0; i < n_tp; ++i) m.true_positives.push_back({i, i, 1.0});
  for (int i = 0; i < n_fp; ++i)
    m.false_positive_detections.push_back(n_tp + i);
  for (int i = 0; i < n_fn; ++i) m.false_negative_gt.push_back(n_tp + i);
  m.tp_min_fde.assign(static_cast<size_t>(n_tp), 0.0);
  return m;
}

TEST(Epa, DirectSubstitution) {
  // 10 gt, 8 TP all under tau, 2 FP: (8 - 0.5 * 2) / 10.
  const MatchResult m = synthetic_matches(8, 2, 2);
  EXPECT_DOUBLE_EQ(epa(m).value(), 0.7);
}

TEST(Epa, PerfectDetectionAndPredictionScoresOne) {
  const MatchResult m = synthetic_matches(10, 0, 0);
  EXPECT_DOUBLE_EQ(epa(m).value(), 1.0);
}

TEST(Epa, FdeThresholdFiltersTruePositives) {
  MatchResult m = synthetic_matches(8, 2, 2);
  m.tp_min_fde[0] = 2.0;  // not under tau: the comparison is strict
  m.tp_min_fde[1] = 3.5;
  m.tp_min_fde[2] = 2.7;
  EXPECT_DOUBLE_EQ(epa(m).value(), 0.4);
}

TEST(Epa, CanGoNegative) {
  const MatchResult m = synthetic_matches(0, 3, 5);
  EXPECT_DOUBLE_EQ(epa(m).value(), -0.3);
}

TEST(Epa, MonotoneInTau) {
  MatchResult m = synthetic_matches(3, 0, 0);
  m.tp_min_fde = {0.5, 1.5, 2.5};
  EXPECT_DOUBLE_EQ(epa(m, 3.0).value(), 1.0);
  EXPECT_DOUBLE_EQ(epa(m, 2.0).value(), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(epa(m, 1.0).value(), 1.0 / 3.0);
}

TEST(Epa, EachFalsePositiveCostsAlphaOverGt) {
  const MatchResult base = synthetic_matches(4, 0, 0);
  const MatchResult plus_fp = synthetic_matches(4, 1, 0);
  EXPECT_DOUBLE_EQ(epa(base).value() - epa(plus_fp).value(), 0.5 / 4.0);
}

TEST(Epa, AbsentWithoutGroundTruth) {
  const MatchResult m = synthetic_matches(0, 2, 0);
  EXPECT_FALSE(epa(m).has_value());
}

TEST(Epa, RejectsBadParameters) {
  const MatchResult m = synthetic_matches(1, 0, 0);
  EXPECT_THROW(epa(m, 0.0), std::invalid_argument);
  EXPECT_THROW(epa(m, 2.0, -0.1), std::invalid_argument);
  MatchResult bad = m;
  bad.tp_min_fde.clear();
  EXPECT_THROW(epa(bad), std::invalid_argument);
}

TEST(AnyCollision, ParkedFarApartNeverCollides) {
  std::vector<OrientedBox> ego;
  std::vector<std::vector<OrientedBox>> others;
  for (int t = 0; t <= 10; ++t) {
    ego.push_back({{t * 1.0, 0.0}, 0.0, 4.5, 2.0});
    others.push_back({OrientedBox{{5.0, 50.0}, 0.0, 4.5, 2.0}});
  }
  EXPECT_FALSE(any_collision(ego, others));
}

TEST(AnyCollision, DrivingIntoStoppedVehicleCollides) {
  std::vector<OrientedBox> ego;
  std::vector<std::vector<OrientedBox>> others;
  for (int t = 0; t <= 10; ++t) {
    ego.push_back({{t * 2.0, 0.0}, 0.0, 4.5, 2.0});
    others.push_back({OrientedBox{{10.0, 0.0}, 0.0, 4.5, 2.0}});
  }
  EXPECT_TRUE(any_collision(ego, others));
}

TEST(CollisionRate, AveragesScenarioFlags) {
  EXPECT_DOUBLE_EQ(collision_rate({}), 0.0);
  EXPECT_DOUBLE_EQ(collision_rate({true, false, false, false}), 0.25);
  EXPECT_DOUBLE_EQ(collision_rate({true, true}), 1.0);
}

}  // namespace
}  // namespace cooperrisk
