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

#include "cooperrisk/riskmap.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace cooperrisk {
namespace {

ObjectState participant(double s, double l, double heading, double speed,
                        double mass = 1500.0) {
  ObjectState o;
  o.id = 1;
  o.cls = ObjectClass::kVehicle;
  o.s = s;
  o.l = l;
  o.heading = heading;
  o.speed = speed;
  o.mass = mass;
  return o;
}

EgoHypothesis ego_at(double s, double l, double heading, double speed) {
  EgoHypothesis e;
  e.s = s;
  e.l = l;
  e.heading = heading;
  e.speed = speed;
  e.mass = 1500.0;
  return e;
}

// Two-mode, one-object, one-step mixture used by the map tests.
TrajectoryDistribution two_mode_dist(double w0, double w1) {
  TrajectoryDistribution d;
  d.modes = 2;
  d.objects = 1;
  d.steps = 1;
  d.dt = 0.5;
  const size_t total = 2;
  d.mean_x = {1.0, 3.0};
  d.mean_y = {1.0, 1.0};
  d.sigma_x = {0.6, 0.8};
  d.sigma_y = {0.6, 0.8};
  d.corr = {0.0, 0.0};
  d.heading = {0.0, M_PI / 2.0};
  d.speed = {3.0, 2.0};
  d.weights = {w0, w1};
  d.object_ids = {7};
  d.object_cls = {ObjectClass::kVehicle};
  d.object_length = {4.5};
  d.object_width = {2.0};
  d.object_mass = {1500.0};
  EXPECT_EQ(d.mean_x.size(), total);
  return d;
}

GridSpec small_grid() {
  GridSpec g;
  g.origin_x = 0.0;
  g.origin_y = 0.0;
  g.resolution = 0.5;
  g.width = 8;
  g.height = 4;
  return g;
}

TEST(SeverityDeltaV, SameDirectionSameSpeedIsZero) {
  EXPECT_DOUBLE_EQ(severity_delta_v(1500.0, 10.0, 1500.0, 10.0, 0.0), 0.0);
}

TEST(SeverityDeltaV, HeadOnSumsSpeeds) {
  // Equal masses: 0.5 * (10 + 10).
  EXPECT_NEAR(severity_delta_v(1500.0, 10.0, 1500.0, 10.0, M_PI), 10.0,
              1e-12);
}

TEST(SeverityDeltaV, PerpendicularUsesVectorDifference) {
  // 0.5 * sqrt(100 + 100).
  EXPECT_NEAR(severity_delta_v(1500.0, 10.0, 1500.0, 10.0, M_PI / 2.0),
              0.5 * std::sqrt(200.0), 1e-12);
}

TEST(SeverityDeltaV, MassRatioScalesSubjectChange) {
  // A 70 kg source at 5 m/s hitting a stationary 1430 kg subject changes
  // the subject's velocity by 70/1500 * 5.
  EXPECT_NEAR(severity_delta_v(70.0, 5.0, 1430.0, 0.0, 0.0),
              70.0 / 1500.0 * 5.0, 1e-12);
  // The heavier the source at fixed total, the larger the change.
  EXPECT_GT(severity_delta_v(3000.0, 5.0, 1500.0, 0.0, 0.0),
            severity_delta_v(1500.0, 5.0, 1500.0, 0.0, 0.0));
}

TEST(SeverityDeltaV, RejectsNonPositiveMass) {
  EXPECT_THROW(severity_delta_v(0.0, 1.0, 1.0, 1.0, 0.0),
               std::invalid_argument);
  EXPECT_THROW(severity_delta_v(1.0, 1.0, -1.0, 1.0, 0.0),
               std::invalid_argument);
}

TEST(ExposureOffsets, EqualHeadingsReduceToPlainDifferences) {
  // With both headings zero each pseudo rotation is the identity, so the
  // offsets are the raw coordinate differences.
  const ObjectState other = participant(1.0, 1.5, 0.0, 1.0);
  const Vector2d off = exposure_offsets(ego_at(4.0, -0.5, 0.0, 0.0), other);
  EXPECT_NEAR(off.x(), 3.0, 1e-12);
  EXPECT_NEAR(off.y(), -2.0, 1e-12);
}

TEST(ExposureOffsets, CoincidentPositionsCancelForAnyHeadings) {
  // Both pseudo rotations act on the same point at the origin, so the
  // difference vanishes even though the headings differ.
  const ObjectState other = participant(0.0, 0.0, 0.0, 1.0);
  const Vector2d off =
      exposure_offsets(ego_at(0.0, 0.0, M_PI / 2.0, 0.0), other);
  EXPECT_NEAR(off.x(), 0.0, 1e-12);
  EXPECT_NEAR(off.y(), 0.0, 1e-12);
}

TEST(ExposureOffsets, RotatesEachPositionByItsOwnHeading) {
  // Ego (4, 2) heading pi/2 maps to (2, -4); the participant (1, 1) at
  // heading zero stays put, leaving (1, -5).
  const ObjectState other = participant(1.0, 1.0, 0.0, 1.0);
  const Vector2d off =
      exposure_offsets(ego_at(4.0, 2.0, M_PI / 2.0, 0.0), other);
  EXPECT_NEAR(off.x(), 1.0, 1e-12);
  EXPECT_NEAR(off.y(), -5.0, 1e-12);
}

TEST(RiskValue, FrozenWorkedExample) {
  // Equal 1500 kg masses, both at 5*sqrt(2) m/s, perpendicular approach:
  // delta_v = 0.5 * sqrt(50 + 50) = 5, numerator = 1 * 25 + 1 = 26,
  // reach = exp(0.2 * 5) = e. The ego at (0, 10) heading pi/2 has pseudo
  // position (10, 0) and the participant's is (0, 0), so the longitudinal
  // offset is 10: denominator = 10 / e, risk = 26 * e / 10.
  const double v = 5.0 * std::sqrt(2.0);
  RiskCoeffs c;
  const ObjectState other = participant(0.0, 0.0, 0.0, v);
  const double got = risk_value(ego_at(0.0, 10.0, M_PI / 2.0, v), other, c);
  EXPECT_NEAR(got, 26.0 * std::exp(1.0) / 10.0, 1e-12);
}

TEST(RiskValue, EpsilonFloorsTheDenominator) {
  RiskCoeffs c;
  // Coincident positions, zero relative speed: (0 + 1) / 0.5.
  const ObjectState still = participant(2.0, 3.0, 0.0, 0.0);
  EXPECT_DOUBLE_EQ(risk_value(ego_at(2.0, 3.0, 0.0, 0.0), still, c), 2.0);
  // Coincident pseudo positions at worked-example speeds: the ego at
  // (-3, 2) heading pi/2 pseudo-rotates onto the participant's (2, 3), so
  // the denominator floors and the risk is 26 / 0.5.
  const double v = 5.0 * std::sqrt(2.0);
  const ObjectState moving = participant(2.0, 3.0, 0.0, v);
  EXPECT_DOUBLE_EQ(risk_value(ego_at(-3.0, 2.0, M_PI / 2.0, v), moving, c),
                   52.0);
}

TEST(RiskValue, DecaysMonotonicallyWithDistance) {
  RiskCoeffs c;
  const ObjectState other = participant(0.0, 0.0, 0.0, 8.0);
  double prev_s = 1e300, prev_l = 1e300;
  for (int d = 1; d <= 40; ++d) {
    const double rs =
        risk_value(ego_at(0.5 * d, 0.0, M_PI, 8.0), other, c);
    const double rl =
        risk_value(ego_at(0.0, 0.5 * d, M_PI, 8.0), other, c);
    EXPECT_LE(rs, prev_s) << "longitudinal distance " << 0.5 * d;
    EXPECT_LE(rl, prev_l) << "lateral distance " << 0.5 * d;
    EXPECT_GT(rs, 0.0);
    prev_s = rs;
    prev_l = rl;
  }
}

TEST(RiskValue, HeadOnApproachOutranksSameDirection) {
  RiskCoeffs c;
  const ObjectState other = participant(0.0, 0.0, 0.0, 10.0);
  const double head_on = risk_value(ego_at(15.0, 0.0, M_PI, 10.0), other, c);
  const double parallel = risk_value(ego_at(15.0, 0.0, 0.0, 10.0), other, c);
  EXPECT_GT(head_on, parallel);
  // Parallel same-speed motion carries zero delta-v: numerator is c1.
  EXPECT_NEAR(parallel, 1.0 / 15.0, 1e-12);
}

TEST(RiskValue, LongitudinalReachStretchesWithDeltaV) {
  RiskCoeffs c;
  const double v = 5.0 * std::sqrt(2.0);  // delta_v = 5, reach = e
  const ObjectState other = participant(0.0, 0.0, 0.0, v);
  // An ego heading pi/2 at (0, 10) lands 10 m along the pseudo-longitudinal
  // axis; at (10, 0) it lands 10 m along the pseudo-lateral axis. Only the
  // longitudinal term is divided by the reach.
  const double ahead = risk_value(ego_at(0.0, 10.0, M_PI / 2.0, v), other, c);
  const double beside = risk_value(ego_at(10.0, 0.0, M_PI / 2.0, v), other, c);
  EXPECT_NEAR(ahead / beside, std::exp(1.0), 1e-12);
}

TEST(RiskValue, IsotropicWhenDeltaVIsZero) {
  RiskCoeffs c;
  const ObjectState other = participant(0.0, 0.0, 0.3, 6.0);
  // Same heading and speed: no delta-v, so the reach factor is 1 and the
  // field depends only on distance.
  const double a = risk_value(ego_at(5.0, 0.0, 0.3, 6.0), other, c);
  const double b = risk_value(ego_at(0.0, 5.0, 0.3, 6.0), other, c);
  const double diag =
      risk_value(ego_at(3.0, 4.0, 0.3, 6.0), other, c);
  EXPECT_NEAR(a, b, 1e-12);
  EXPECT_NEAR(a, diag, 1e-12);
  EXPECT_NEAR(a, 1.0 / 5.0, 1e-12);
}

TEST(RiskCoeffsValidate, RejectsBadValues) {
  RiskCoeffs c;
  c.epsilon = 0.0;
  EXPECT_THROW(validate(c), std::invalid_argument);
  c = RiskCoeffs{};
  c.c0 = -1.0;
  EXPECT_THROW(validate(c), std::invalid_argument);
  c = RiskCoeffs{};
  c.c2 = 0.0;
  c.c4 = 0.0;
  EXPECT_THROW(validate(c), std::invalid_argument);
  EXPECT_NO_THROW(validate(RiskCoeffs{}));
}

TEST(HierarchicalRisk, VanishingSigmaMatchesPointRisk) {
  RiskCoeffs c;
  GaussianComponent comp;
  comp.mean_x = 4.0;
  comp.mean_y = 1.0;
  comp.sigma_x = 1e-12;
  comp.sigma_y = 1e-12;
  comp.heading = M_PI;
  comp.speed = 7.0;
  const EgoHypothesis ego = ego_at(-2.0, 0.5, 0.0, 5.0);
  const ObjectState point = participant(4.0, 1.0, M_PI, 7.0);
  const double mc = hierarchical_risk(ego, comp, c, 64, 123);
  EXPECT_NEAR(mc, risk_value(ego, point, c), 1e-9);
}

TEST(HierarchicalRisk, DeterministicPerSeed) {
  RiskCoeffs c;
  GaussianComponent comp;
  comp.mean_x = 3.0;
  comp.sigma_x = 1.5;
  comp.sigma_y = 1.5;
  comp.speed = 6.0;
  const EgoHypothesis ego = ego_at(0.0, 0.0, 0.0, 4.0);
  const double a = hierarchical_risk(ego, comp, c, 64, 42);
  const double b = hierarchical_risk(ego, comp, c, 64, 42);
  const double other = hierarchical_risk(ego, comp, c, 64, 43);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, other);
}

TEST(HierarchicalRisk, EstimatesAgreeAcrossSeedsWithinError) {
  RiskCoeffs c;
  GaussianComponent comp;
  comp.mean_x = 6.0;
  comp.mean_y = -2.0;
  comp.sigma_x = 1.2;
  comp.sigma_y = 0.9;
  comp.corr = 0.3;
  comp.heading = 2.0;
  comp.speed = 9.0;
  const EgoHypothesis ego = ego_at(1.0, 1.0, 0.5, 8.0);
  const HierarchicalRiskStats small =
      hierarchical_risk_stats(ego, comp, c, 64, 7);
  const HierarchicalRiskStats big =
      hierarchical_risk_stats(ego, comp, c, 4096, 8);
  EXPECT_GT(small.std_error, 0.0);
  EXPECT_LT(big.std_error, small.std_error);
  EXPECT_NEAR(small.mean, big.mean,
              4.0 * (small.std_error + big.std_error));
}

TEST(HierarchicalRisk, SpreadSmoothsPeakAndPreservesFarField) {
  RiskCoeffs c;
  GaussianComponent comp;
  comp.mean_y = 1.0;
  comp.heading = M_PI;
  comp.speed = 7.0;
  // The component mean (0, 1) at heading pi pseudo-rotates to (0, -1); an
  // ego at (0, -1) heading zero shares that pseudo position, so the point
  // risk there sits on the epsilon floor, the global maximum of the field,
  // and any position spread can only lower the expectation.
  comp.mean_x = 0.0;
  comp.sigma_x = 1.5;
  comp.sigma_y = 1.5;
  const EgoHypothesis at_mean = ego_at(0.0, -1.0, 0.0, 6.0);
  const ObjectState point0 = participant(0.0, 1.0, M_PI, 7.0);
  const double peak = risk_value(at_mean, point0, c);
  const double smoothed = hierarchical_risk(at_mean, comp, c, 2048, 99);
  EXPECT_LT(smoothed, peak);
  EXPECT_GT(smoothed, 0.0);
  // Far from the mean, a small spread barely changes the value.
  comp.mean_x = 12.0;
  comp.sigma_x = 0.3;
  comp.sigma_y = 0.3;
  const EgoHypothesis far_ego = ego_at(0.0, -1.0, 0.0, 6.0);
  const ObjectState point12 = participant(12.0, 1.0, M_PI, 7.0);
  const double far_point = risk_value(far_ego, point12, c);
  const double far_mc = hierarchical_risk(far_ego, comp, c, 2048, 99);
  EXPECT_NEAR(far_mc, far_point, 0.05 * far_point);
}

TEST(HierarchicalRisk, RejectsInvalidArguments) {
  RiskCoeffs c;
  GaussianComponent comp;
  const EgoHypothesis ego;
  EXPECT_THROW(hierarchical_risk(ego, comp, c, 0, 1), std::invalid_argument);
  comp.sigma_x = 0.0;
  EXPECT_THROW(hierarchical_risk(ego, comp, c, 8, 1), std::invalid_argument);
  comp.sigma_x = 1.0;
  comp.corr = 1.0;
  EXPECT_THROW(hierarchical_risk(ego, comp, c, 8, 1), std::invalid_argument);
}

TEST(GridSpecTest, EvaluationDefaultCoversEvaluationRange) {
  const GridSpec g = GridSpec::evaluation_default();
  EXPECT_EQ(g.width, 282);
  EXPECT_EQ(g.height, 160);
  EXPECT_DOUBLE_EQ(g.resolution, 0.5);
  EXPECT_TRUE(g.contains(-70.4, -40.0));
  EXPECT_TRUE(g.contains(70.4, 40.0));
  EXPECT_FALSE(g.contains(-70.6, 0.0));
  EXPECT_DOUBLE_EQ(g.cell_x(0), -70.25);
  EXPECT_DOUBLE_EQ(g.cell_x(g.width - 1), 70.25);
  EXPECT_DOUBLE_EQ(g.cell_y(0), -39.75);
  EXPECT_DOUBLE_EQ(g.cell_y(g.height - 1), 39.75);
}

TEST(RiskMapTest, BilinearSampleMatchesHandValues) {
  GridSpec g;
  g.origin_x = 0.0;
  g.origin_y = 0.0;
  g.resolution = 1.0;
  g.width = 2;
  g.height = 2;
  RiskMap map(g, 1, 0.5);
  map.at(0, 0, 0) = 1.0;
  map.at(0, 1, 0) = 2.0;
  map.at(0, 0, 1) = 3.0;
  map.at(0, 1, 1) = 5.0;
  // Cell centers are (0.5, 0.5) .. (1.5, 1.5).
  EXPECT_DOUBLE_EQ(map.sample(0, 0.5, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(map.sample(0, 1.5, 1.5), 5.0);
  EXPECT_DOUBLE_EQ(map.sample(0, 1.0, 0.5), 1.5);
  EXPECT_DOUBLE_EQ(map.sample(0, 1.0, 1.0), 2.75);
  // Outside the center lattice the value clamps.
  EXPECT_DOUBLE_EQ(map.sample(0, -10.0, -10.0), 1.0);
  EXPECT_DOUBLE_EQ(map.sample(0, 10.0, 10.0), 5.0);
}

TEST(RiskMapTest, GradientMatchesFiniteDifferenceOfSample) {
  GridSpec g;
  g.origin_x = -2.0;
  g.origin_y = -2.0;
  g.resolution = 0.5;
  g.width = 10;
  g.height = 10;
  RiskMap map(g, 1, 0.5);
  for (int j = 0; j < g.height; ++j) {
    for (int i = 0; i < g.width; ++i) {
      const double x = g.cell_x(i), y = g.cell_y(j);
      map.at(0, i, j) = std::sin(1.3 * x) + 0.5 * y * y + 0.2 * x * y;
    }
  }
  const double h = 1e-6;
  for (double x : {-1.3, 0.1, 1.7}) {
    for (double y : {-1.1, 0.4, 1.9}) {
      const Vector2d grad = map.spatial_gradient(0, x, y);
      const double fdx =
          (map.sample(0, x + h, y) - map.sample(0, x - h, y)) / (2.0 * h);
      const double fdy =
          (map.sample(0, x, y + h) - map.sample(0, x, y - h)) / (2.0 * h);
      EXPECT_NEAR(grad.x(), fdx, 1e-6);
      EXPECT_NEAR(grad.y(), fdy, 1e-6);
    }
  }
}

TEST(BuildRiskMap, LayerZeroPeaksAtStationaryParticipant) {
  RiskMapConfig cfg;
  cfg.grid = small_grid();
  cfg.samples = 4;
  cfg.ego_speed = 0.0;
  // Object centered exactly on cell (4, 2): center (2.25, 1.25).
  const std::vector<ObjectState> objs = {
      participant(2.25, 1.25, 0.0, 0.0)};
  const RiskMap map =
      build_risk_map(two_mode_dist(0.5, 0.5), objs, cfg, 11);
  // Maximum is (0 + 1) / epsilon, reached exactly by the cells whose
  // centers fall inside the epsilon floor around the object.
  double best = -1.0;
  for (int j = 0; j < cfg.grid.height; ++j) {
    for (int i = 0; i < cfg.grid.width; ++i) {
      const double v = map.at(0, i, j);
      best = std::max(best, v);
      const double dx = cfg.grid.cell_x(i) - 2.25;
      const double dy = cfg.grid.cell_y(j) - 1.25;
      const double dist = std::hypot(dx, dy);
      if (dist <= 0.5 + 1e-9) {
        EXPECT_DOUBLE_EQ(v, 2.0) << "cell " << i << "," << j;
      } else {
        EXPECT_DOUBLE_EQ(v, 1.0 / dist) << "cell " << i << "," << j;
        EXPECT_LT(v, 2.0);
      }
    }
  }
  EXPECT_DOUBLE_EQ(best, 2.0);
  EXPECT_DOUBLE_EQ(map.at(0, 4, 2), 2.0);
  // Hand check of one far cell: corner (0, 0) sits sqrt(5) m away.
  EXPECT_DOUBLE_EQ(map.at(0, 0, 0), 1.0 / std::sqrt(5.0));
}

TEST(BuildRiskMap, LayerCountIsStepsPlusCurrent) {
  RiskMapConfig cfg;
  cfg.grid = small_grid();
  cfg.samples = 4;
  const RiskMap map = build_risk_map(two_mode_dist(0.5, 0.5), {}, cfg, 11);
  EXPECT_EQ(map.layer_count(), 2);
  EXPECT_DOUBLE_EQ(map.dt(), 0.5);
  // No current objects: layer 0 is all zero; layer 1 is not.
  double sum0 = 0.0, sum1 = 0.0;
  for (int j = 0; j < cfg.grid.height; ++j) {
    for (int i = 0; i < cfg.grid.width; ++i) {
      sum0 += map.at(0, i, j);
      sum1 += map.at(1, i, j);
    }
  }
  EXPECT_DOUBLE_EQ(sum0, 0.0);
  EXPECT_GT(sum1, 0.0);
}

TEST(BuildRiskMap, ExpectedRiskIsLinearInModeWeights) {
  RiskMapConfig cfg;
  cfg.grid = small_grid();
  cfg.samples = 16;
  cfg.ego_speed = 5.0;
  const std::uint64_t seed = 77;
  const RiskMap full = build_risk_map(two_mode_dist(0.7, 0.3), {}, cfg, seed);
  const RiskMap only_a = build_risk_map(two_mode_dist(1.0, 0.0), {}, cfg, seed);
  const RiskMap only_b = build_risk_map(two_mode_dist(0.0, 1.0), {}, cfg, seed);
  for (int j = 0; j < cfg.grid.height; ++j) {
    for (int i = 0; i < cfg.grid.width; ++i) {
      const double expect =
          0.7 * only_a.at(1, i, j) + 0.3 * only_b.at(1, i, j);
      EXPECT_NEAR(full.at(1, i, j), expect, 1e-12 + 1e-12 * expect);
    }
  }
}

TEST(BuildRiskMap, DeterministicPerSeedAndSensitiveToIt) {
  RiskMapConfig cfg;
  cfg.grid = small_grid();
  cfg.samples = 8;
  const std::vector<ObjectState> objs = {participant(1.0, 1.0, 0.0, 3.0)};
  const TrajectoryDistribution d = two_mode_dist(0.5, 0.5);
  const RiskMap a = build_risk_map(d, objs, cfg, 21);
  const RiskMap b = build_risk_map(d, objs, cfg, 21);
  const RiskMap other = build_risk_map(d, objs, cfg, 22);
  bool layer1_differs = false;
  for (int j = 0; j < cfg.grid.height; ++j) {
    for (int i = 0; i < cfg.grid.width; ++i) {
      ASSERT_EQ(a.at(0, i, j), b.at(0, i, j));
      ASSERT_EQ(a.at(1, i, j), b.at(1, i, j));
      // Layer 0 never samples, so the seed cannot change it.
      ASSERT_EQ(a.at(0, i, j), other.at(0, i, j));
      if (a.at(1, i, j) != other.at(1, i, j)) layer1_differs = true;
    }
  }
  EXPECT_TRUE(layer1_differs);
}

TEST(BuildRiskMap, RejectsInvalidConfig) {
  RiskMapConfig cfg;
  cfg.grid = small_grid();
  cfg.samples = 0;
  EXPECT_THROW(build_risk_map(two_mode_dist(0.5, 0.5), {}, cfg, 1),
               std::invalid_argument);
  cfg.samples = 4;
  cfg.coeffs.epsilon = -1.0;
  EXPECT_THROW(build_risk_map(two_mode_dist(0.5, 0.5), {}, cfg, 1),
               std::invalid_argument);
}

TEST(RiskMapIo, BinaryRoundTripPreservesGridAndValues) {
  GridSpec g;
  g.origin_x = -3.5;
  g.origin_y = 2.0;
  g.resolution = 0.25;
  g.width = 6;
  g.height = 5;
  RiskMap map(g, 3, 0.5);
  double v = 0.0;
  for (int k = 0; k < 3; ++k) {
    for (int j = 0; j < g.height; ++j) {
      for (int i = 0; i < g.width; ++i) {
        map.at(k, i, j) = std::sin(v) * 10.0 + k;
        v += 0.37;
      }
    }
  }
  const std::string path =
      (std::filesystem::temp_directory_path() / "riskmap_roundtrip.bin")
          .string();
  map.write_binary(path);
  const RiskMap back = RiskMap::read_binary(path);
  EXPECT_EQ(back.grid().width, g.width);
  EXPECT_EQ(back.grid().height, g.height);
  EXPECT_FLOAT_EQ(static_cast<float>(back.grid().resolution),
                  static_cast<float>(g.resolution));
  EXPECT_FLOAT_EQ(static_cast<float>(back.grid().origin_x),
                  static_cast<float>(g.origin_x));
  EXPECT_EQ(back.layer_count(), 3);
  for (int k = 0; k < 3; ++k) {
    for (int j = 0; j < g.height; ++j) {
      for (int i = 0; i < g.width; ++i) {
        // Values survive exactly up to the f32 quantization of the writer.
        EXPECT_EQ(back.at(k, i, j),
                  static_cast<double>(static_cast<float>(map.at(k, i, j))));
      }
    }
  }
  std::remove(path.c_str());
}

TEST(RiskMapIo, ReadRejectsBadMagicAndTruncation) {
  const std::string path =
      (std::filesystem::temp_directory_path() / "riskmap_bad.bin").string();
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE";
  }
  EXPECT_THROW(RiskMap::read_binary(path), std::runtime_error);
  {
    std::ofstream out(path, std::ios::binary);
    out << "CRSK";  // header cut short
  }
  EXPECT_THROW(RiskMap::read_binary(path), std::runtime_error);
  std::remove(path.c_str());
}

TEST(RiskMapIo, CsvExportHasGridShape) {
  GridSpec g = small_grid();
  RiskMap map(g, 2, 0.5);
  map.at(1, 3, 2) = 1.25;
  const std::string prefix =
      (std::filesystem::temp_directory_path() / "riskmap_csv").string();
  map.write_csv(prefix);
  for (int k = 0; k < 2; ++k) {
    const std::string path = prefix + "_layer" + std::to_string(k) + ".csv";
    std::ifstream in(path);
    ASSERT_TRUE(in.good()) << path;
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
      size_t commas = 0;
      for (char ch : line) commas += ch == ',';
      EXPECT_EQ(commas, static_cast<size_t>(g.width - 1));
      ++rows;
    }
    EXPECT_EQ(rows, g.height);
    std::remove(path.c_str());
  }
}

}  // namespace
}  // namespace cooperrisk
