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

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "cooperrisk/geometry.hpp"
#include "cooperrisk/prediction.hpp"
#include "cooperrisk/types.hpp"

namespace cooperrisk {

struct MatchPair {
  int detection = -1;  // index into the detection list
  int gt = -1;         // index into the ground-truth list
  double iou = 0.0;
};

// Outcome of greedy confidence-ordered detection matching. Each detection
// and each ground-truth object appears in at most one pair. tp_min_fde
// parallels true_positives; it starts at zero (no prediction filter) and
// is overwritten by callers that link predictions to the matched objects.
struct MatchResult {
  std::vector<MatchPair> true_positives;
  std::vector<int> false_positive_detections;
  std::vector<int> false_negative_gt;
  std::vector<double> tp_min_fde;

  int n_gt() const {
    return static_cast<int>(true_positives.size() +
                            false_negative_gt.size());
  }
};

namespace detail {

// Detection indices ordered by confidence (descending), index ascending
// on ties, so the ordering is deterministic.
inline std::vector<int> confidence_order(
    const std::vector<DetectionBox>& detections) {
  std::vector<int> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double ca = detections[static_cast<size_t>(a)].confidence;
    const double cb = detections[static_cast<size_t>(b)].confidence;
    if (ca != cb) return ca > cb;
    return a < b;
  });
  return order;
}

}  // namespace detail

// Greedy matching in confidence order: each detection claims the
// unclaimed ground-truth box of highest overlap at or above the
// threshold.
inline MatchResult match_detections(const std::vector<DetectionBox>& detections,
                                    const std::vector<ObjectState>& gt,
                                    double iou_threshold = 0.5) {
  if (iou_threshold <= 0.0 || iou_threshold > 1.0)
    throw std::invalid_argument("iou threshold must be in (0, 1]");
  MatchResult result;
  std::vector<bool> gt_taken(gt.size(), false);
  for (int di : detail::confidence_order(detections)) {
    const OrientedBox det_box =
        detections[static_cast<size_t>(di)].footprint();
    int best_gt = -1;
    double best_iou = 0.0;
    for (size_t gi = 0; gi < gt.size(); ++gi) {
      if (gt_taken[gi]) continue;
      const double iou = obb_iou(det_box, gt[gi].footprint());
      if (iou >= iou_threshold && iou > best_iou) {
        best_iou = iou;
        best_gt = static_cast<int>(gi);
      }
    }
    if (best_gt >= 0) {
      gt_taken[static_cast<size_t>(best_gt)] = true;
      result.true_positives.push_back({di, best_gt, best_iou});
    } else {
      result.false_positive_detections.push_back(di);
    }
  }
  for (size_t gi = 0; gi < gt.size(); ++gi) {
    if (!gt_taken[gi]) result.false_negative_gt.push_back(static_cast<int>(gi));
  }
  result.tp_min_fde.assign(result.true_positives.size(), 0.0);
  return result;
}

// Area under the precision-recall curve (precision envelope) from greedy
// confidence-ordered matching. Absent when there is no ground truth.
inline std::optional<double> average_precision(
    const std::vector<DetectionBox>& detections,
    const std::vector<ObjectState>& gt, double iou_threshold = 0.5) {
  if (gt.empty()) return std::nullopt;
  if (detections.empty()) return 0.0;
  std::vector<bool> gt_taken(gt.size(), false);
  std::vector<bool> is_tp;
  is_tp.reserve(detections.size());
  for (int di : detail::confidence_order(detections)) {
    const OrientedBox det_box =
        detections[static_cast<size_t>(di)].footprint();
    int best_gt = -1;
    double best_iou = 0.0;
    for (size_t gi = 0; gi < gt.size(); ++gi) {
      if (gt_taken[gi]) continue;
      const double iou = obb_iou(det_box, gt[gi].footprint());
      if (iou >= iou_threshold && iou > best_iou) {
        best_iou = iou;
        best_gt = static_cast<int>(gi);
      }
    }
    if (best_gt >= 0) {
      gt_taken[static_cast<size_t>(best_gt)] = true;
      is_tp.push_back(true);
    } else {
      is_tp.push_back(false);
    }
  }
  const size_t n = is_tp.size();
  std::vector<double> precision(n), recall(n);
  int tp_count = 0;
  for (size_t i = 0; i < n; ++i) {
    tp_count += is_tp[i] ? 1 : 0;
    precision[i] = static_cast<double>(tp_count) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp_count) / static_cast<double>(gt.size());
  }
  // Monotone envelope from the right, then sum precision over recall
  // increments.
  for (size_t i = n - 1; i > 0; --i)
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (size_t i = 0; i < n; ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

struct AdeFde {
  double min_ade = 0.0;
  double min_fde = 0.0;
  int objects_counted = 0;
};

// Displacement errors of the mixture means against per-object ground
// truth futures (one position per prediction step; empty vector excludes
// the object). The minima over modes are taken independently for ADE and
// FDE, then averaged over the counted objects.
inline AdeFde min_ade_fde(const TrajectoryDistribution& d,
                          const std::vector<std::vector<Vector2d>>& gt_future) {
  if (gt_future.size() != static_cast<size_t>(d.objects))
    throw std::invalid_argument("need one gt future entry per object");
  AdeFde out;
  double ade_sum = 0.0, fde_sum = 0.0;
  for (int n = 0; n < d.objects; ++n) {
    const std::vector<Vector2d>& gt = gt_future[static_cast<size_t>(n)];
    if (gt.empty()) continue;
    if (gt.size() != static_cast<size_t>(d.steps))
      throw std::invalid_argument("gt future must cover every step");
    double best_ade = std::numeric_limits<double>::infinity();
    double best_fde = std::numeric_limits<double>::infinity();
    for (int m = 0; m < d.modes; ++m) {
      double acc = 0.0;
      double fde = 0.0;
      for (int k = 0; k < d.steps; ++k) {
        const size_t i = d.idx(m, n, k);
        const double err = std::hypot(d.mean_x[i] - gt[static_cast<size_t>(k)].x(),
                                      d.mean_y[i] - gt[static_cast<size_t>(k)].y());
        acc += err;
        if (k == d.steps - 1) fde = err;
      }
      best_ade = std::min(best_ade, acc / d.steps);
      best_fde = std::min(best_fde, fde);
    }
    ade_sum += best_ade;
    fde_sum += best_fde;
    ++out.objects_counted;
  }
  if (out.objects_counted > 0) {
    out.min_ade = ade_sum / out.objects_counted;
    out.min_fde = fde_sum / out.objects_counted;
  }
  return out;
}

// Detection-and-prediction score: true positives whose attached minFDE is
// under the threshold, minus alpha per false positive, over the number of
// ground-truth objects. Absent when there is no ground truth.
inline std::optional<double> epa(const MatchResult& matches,
                                 double tau = 2.0, double alpha = 0.5) {
  if (tau <= 0.0) throw std::invalid_argument("tau must be > 0");
  if (alpha < 0.0) throw std::invalid_argument("alpha must be >= 0");
  if (matches.tp_min_fde.size() != matches.true_positives.size())
    throw std::invalid_argument("tp_min_fde must parallel true_positives");
  const int n_gt = matches.n_gt();
  if (n_gt == 0) return std::nullopt;
  int qualified = 0;
  for (double fde : matches.tp_min_fde) qualified += fde < tau ? 1 : 0;
  const double n_fp =
      static_cast<double>(matches.false_positive_detections.size());
  return (qualified - alpha * n_fp) / static_cast<double>(n_gt);
}

// True when the ego box intersects any other box at any common timestamp.
// Both sequences are indexed by the same time grid.
inline bool any_collision(const std::vector<OrientedBox>& ego_steps,
                          const std::vector<std::vector<OrientedBox>>& others) {
  const size_t steps = std::min(ego_steps.size(), others.size());
  for (size_t t = 0; t < steps; ++t) {
    for (const OrientedBox& box : others[t]) {
      if (obb_intersects(ego_steps[t], box)) return true;
    }
  }
  return false;
}

// Fraction of scenarios with a collision.
inline double collision_rate(const std::vector<bool>& scenario_collided) {
  if (scenario_collided.empty()) return 0.0;
  double hits = 0.0;
  for (bool c : scenario_collided) hits += c ? 1.0 : 0.0;
  return hits / static_cast<double>(scenario_collided.size());
}

}  // namespace cooperrisk
