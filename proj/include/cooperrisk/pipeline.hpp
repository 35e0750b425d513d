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
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cooperrisk/fusion.hpp"
#include "cooperrisk/metrics.hpp"
#include "cooperrisk/planner.hpp"
#include "cooperrisk/prediction.hpp"
#include "cooperrisk/riskmap.hpp"
#include "cooperrisk/scenario.hpp"

namespace cooperrisk {

enum class PerceptionMode { kGroundTruth, kV2x, kEgoOnly };

inline std::string to_string(PerceptionMode m) {
  switch (m) {
    case PerceptionMode::kGroundTruth:
      return "gt";
    case PerceptionMode::kV2x:
      return "v2x";
    case PerceptionMode::kEgoOnly:
      return "ego_only";
  }
  throw std::invalid_argument("unknown perception mode");
}

inline PerceptionMode perception_from_string(const std::string& s) {
  if (s == "gt") return PerceptionMode::kGroundTruth;
  if (s == "v2x") return PerceptionMode::kV2x;
  if (s == "ego_only") return PerceptionMode::kEgoOnly;
  throw std::invalid_argument("unknown perception mode: " + s);
}

enum class PredictorKind { kConstantVelocity, kMultimodal };

inline std::string to_string(PredictorKind p) {
  switch (p) {
    case PredictorKind::kConstantVelocity:
      return "cv";
    case PredictorKind::kMultimodal:
      return "multimodal";
  }
  throw std::invalid_argument("unknown predictor");
}

inline PredictorKind predictor_from_string(const std::string& s) {
  if (s == "cv") return PredictorKind::kConstantVelocity;
  if (s == "multimodal") return PredictorKind::kMultimodal;
  throw std::invalid_argument("unknown predictor: " + s);
}

struct PipelineConfig {
  PerceptionMode perception = PerceptionMode::kV2x;
  PredictorKind predictor = PredictorKind::kMultimodal;
  PredictorConfig predictor_cfg;
  double consistency_penalty = 0.2;
  RiskMapConfig riskmap;  // ego fields are filled from the scenario
  PlannerConfig planner;
  // Replaces every agent's sensor noise when set.
  std::optional<NoiseProfile> noise_override;
  int current_frame = 3;   // "now": the last history frame
  int history_frames = 4;  // frames fed to track assembly
  double fusion_iou = 0.3;
  double match_iou = 0.5;
  double epa_tau = 2.0;
  double epa_alpha = 0.5;
  // Evaluation window around the current ego pose; constant and
  // independent of the risk grid.
  double eval_range_x = 70.4;
  double eval_range_y = 40.0;
  double cr_horizon = 5.0;  // [s] collision check window
  double cr_dt = 0.5;       // [s] collision sampling period
  // Track the current speed instead of PlannerConfig::desired_speed.
  bool desired_speed_from_ego = true;
  // Descend from several canonical warm starts (coast, brake, accelerate,
  // nudge left/right) instead of the zero start alone, and keep the raw
  // start rollouts as candidates next to the descent solutions. Among the
  // candidates, plans whose swept footprint clears every predicted
  // obstacle box are preferred, then cost decides: the per-state point
  // field cannot see footprint clipping at low field values, so descent
  // alone can converge onto a predicted collision course.
  bool planner_multi_start = true;
  // Disable to stop after the metric stages: no risk map, no plan, no
  // collision check. Used by metric sweeps that never read them.
  bool run_planner = true;
};

inline void validate(const PipelineConfig& c) {
  validate(c.predictor_cfg);
  validate(c.riskmap);
  validate(c.planner);
  if (c.noise_override) validate(*c.noise_override);
  if (c.current_frame < 0)
    throw std::invalid_argument("current frame must be >= 0");
  if (c.history_frames < 1)
    throw std::invalid_argument("history must cover at least one frame");
  if (c.fusion_iou < 0.0 || c.fusion_iou > 1.0)
    throw std::invalid_argument("fusion iou must be in [0, 1]");
  if (c.match_iou <= 0.0 || c.match_iou > 1.0)
    throw std::invalid_argument("match iou must be in (0, 1]");
  if (c.epa_tau <= 0.0) throw std::invalid_argument("epa tau must be > 0");
  if (c.epa_alpha < 0.0) throw std::invalid_argument("epa alpha must be >= 0");
  if (c.eval_range_x <= 0.0 || c.eval_range_y <= 0.0)
    throw std::invalid_argument("evaluation range must be positive");
  if (c.cr_horizon <= 0.0 || c.cr_dt <= 0.0)
    throw std::invalid_argument("collision window must be positive");
  if (c.consistency_penalty <= 0.0 || c.consistency_penalty > 1.0)
    throw std::invalid_argument("consistency penalty must be in (0, 1]");
}

// Scenario-level evaluation record. Wall time is kept for operators but
// never serialized, so reports stay byte-identical across reruns.
struct Report {
  std::string scenario_template;
  std::uint64_t seed = 0;
  int density = 0;
  std::string perception;
  std::string predictor;
  // The override applied to every sensor; zeros when the scenario's own
  // per-agent profiles were used.
  NoiseProfile noise;

  std::optional<double> ap;
  std::optional<double> epa;
  std::optional<double> min_ade;
  std::optional<double> min_fde;
  double tor_raw = 0.0;
  double tor = 0.0;
  bool collision = false;
  bool baseline_collision = false;

  int n_gt = 0;
  int n_tp = 0;
  int n_fp = 0;
  int n_fn = 0;
  int n_tracks = 0;
  int prediction_objects = 0;

  double planner_final_cost = 0.0;
  bool planner_stalled = false;
  double planned_risk = 0.0;
  double baseline_risk = 0.0;
  double planned_min_speed = 0.0;

  // Relative paths of files written next to the report, keyed by kind.
  std::map<std::string, std::string> artifacts;

  double wall_ms = 0.0;  // informational only, not serialized
};

inline void to_json(nlohmann::json& j, const Report& r) {
  j = nlohmann::json{
      {"scenario", r.scenario_template},
      {"seed", r.seed},
      {"density", r.density},
      {"perception", r.perception},
      {"predictor", r.predictor},
      {"noise",
       {{"pos_sigma", r.noise.pos_sigma},
        {"heading_sigma", r.noise.heading_sigma},
        {"dropout_prob", r.noise.dropout_prob},
        {"delay_ms", r.noise.delay_ms}}},
      {"metrics",
       {{"ap", r.ap ? nlohmann::json(*r.ap) : nlohmann::json(nullptr)},
        {"epa", r.epa ? nlohmann::json(*r.epa) : nlohmann::json(nullptr)},
        {"min_ade",
         r.min_ade ? nlohmann::json(*r.min_ade) : nlohmann::json(nullptr)},
        {"min_fde",
         r.min_fde ? nlohmann::json(*r.min_fde) : nlohmann::json(nullptr)},
        {"tor", r.tor},
        {"tor_raw", r.tor_raw},
        {"collision", r.collision},
        {"baseline_collision", r.baseline_collision}}},
      {"counts",
       {{"gt", r.n_gt},
        {"tp", r.n_tp},
        {"fp", r.n_fp},
        {"fn", r.n_fn},
        {"tracks", r.n_tracks},
        {"prediction_objects", r.prediction_objects}}},
      {"planner",
       {{"final_cost", r.planner_final_cost},
        {"stalled", r.planner_stalled},
        {"planned_risk", r.planned_risk},
        {"baseline_risk", r.baseline_risk},
        {"planned_min_speed", r.planned_min_speed}}},
      {"artifacts", r.artifacts}};
}

// Full per-scenario outputs; heavyweight members stay in memory unless
// written by the artifact helpers.
struct PipelineOutputs {
  Report report;
  std::vector<std::vector<DetectionBox>> fused_frames;  // history window
  std::vector<TrackHistory> tracks;
  TrajectoryDistribution prediction;  // after consistency enforcement
  RiskMap risk_map;
  PlanResult plan;
  std::vector<PlannerState> baseline;  // zero-control rollout
};

namespace detail {

inline ObjectState to_ego_frame(const ObjectState& o, const Pose& ego) {
  ObjectState out = o;
  const Vector2d p = world_to_local({o.s, o.l}, ego);
  out.s = p.x();
  out.l = p.y();
  out.heading = heading_to_local(o.heading, ego);
  return out;
}

inline DetectionBox to_ego_frame(const DetectionBox& d, const Pose& ego) {
  DetectionBox out = d;
  const Vector2d p = world_to_local({d.s, d.l}, ego);
  out.s = p.x();
  out.l = p.y();
  out.heading = heading_to_local(d.heading, ego);
  return out;
}

inline bool in_eval_range(double x, double y, const PipelineConfig& cfg) {
  return std::abs(x) <= cfg.eval_range_x && std::abs(y) <= cfg.eval_range_y;
}

inline ObjectState detection_to_object(const DetectionBox& d) {
  ObjectState o;
  o.id = d.id;
  o.cls = d.cls;
  o.s = d.s;
  o.l = d.l;
  o.heading = d.heading;
  o.speed = d.speed;
  o.length = d.length;
  o.width = d.width;
  o.mass = default_mass(d.cls);
  return o;
}

// Perfect virtual sensor: every non-ego object as a detection with unit
// confidence, already expressed in the ego frame.
inline std::vector<std::vector<DetectionBox>> ground_truth_stream(
    const ScenarioLog& scn, int last_frame, int ego_id, const Pose& ego) {
  std::vector<std::vector<DetectionBox>> stream(
      static_cast<size_t>(last_frame) + 1);
  for (int f = 0; f <= last_frame; ++f) {
    for (const ObjectState& o : scn.frames[static_cast<size_t>(f)].objects) {
      if (o.id == ego_id) continue;
      DetectionBox d;
      d.id = o.id;
      d.cls = o.cls;
      d.s = o.s;
      d.l = o.l;
      d.heading = o.heading;
      d.speed = o.speed;
      d.length = o.length;
      d.width = o.width;
      d.confidence = 1.0;
      d.source_agent = -1;
      d.timestamp = scn.frames[static_cast<size_t>(f)].t;
      stream[static_cast<size_t>(f)].push_back(to_ego_frame(d, ego));
    }
  }
  return stream;
}

// Reruns a pipeline stage with the stage name attached to any failure.
template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("stage ") + name + ": " + e.what());
  }
}

// Ego planner states resampled to the collision grid as footprint boxes.
inline std::vector<OrientedBox> planned_boxes(
    const std::vector<PlannerState>& states, double planner_dt,
    double ego_length, double ego_width, double horizon, double sample_dt) {
  std::vector<OrientedBox> boxes;
  const int n = static_cast<int>(std::floor(horizon / sample_dt + 1e-9));
  for (int i = 0; i <= n; ++i) {
    const double t = i * sample_dt;
    double pos = t / planner_dt;
    const double max_pos = static_cast<double>(states.size()) - 1.0;
    pos = std::clamp(pos, 0.0, max_pos);
    const int k0 = std::min(static_cast<int>(pos),
                            static_cast<int>(states.size()) - 2 >= 0
                                ? static_cast<int>(states.size()) - 2
                                : 0);
    const double f = pos - k0;
    const PlannerState& a = states[static_cast<size_t>(k0)];
    const PlannerState& b =
        states[static_cast<size_t>(std::min<size_t>(k0 + 1,
                                                    states.size() - 1))];
    const double x = (1.0 - f) * a.s + f * b.s;
    const double y = (1.0 - f) * a.l + f * b.l;
    const double heading = (1.0 - f) * a.phi + f * b.phi;
    boxes.push_back({{x, y}, heading, ego_length, ego_width});
  }
  return boxes;
}

// True when the candidate plan's swept footprint intersects any tracked
// object's most likely predicted box at a collision sample time. Uses
// only the planner-side prediction, never ground truth. Objects currently
// behind the ego and moving its way are exempt: a rear approach is the
// follower's conflict to resolve, and a straight-line extrapolation of a
// yielding follower would veto every braking plan.
inline bool predicted_conflict(const std::vector<PlannerState>& states,
                               double planner_dt, double ego_length,
                               double ego_width,
                               const TrajectoryDistribution& prediction,
                               const std::vector<TrackHistory>& tracks,
                               double horizon, double sample_dt) {
  if (prediction.objects == 0 || prediction.steps == 0) return false;
  std::vector<char> exempt(static_cast<size_t>(prediction.objects), 0);
  if (tracks.size() == static_cast<size_t>(prediction.objects)) {
    for (size_t n = 0; n < tracks.size(); ++n) {
      const int last = tracks[n].last_valid();
      if (last < 0) continue;
      const ObjectState& cur = tracks[n].states[static_cast<size_t>(last)];
      if (cur.s < 0.0 && std::cos(cur.heading) > std::cos(0.25 * M_PI))
        exempt[n] = 1;
    }
  }
  const std::vector<OrientedBox> ego_boxes = planned_boxes(
      states, planner_dt, ego_length, ego_width, horizon, sample_dt);
  for (size_t i = 1; i < ego_boxes.size(); ++i) {
    const double t = static_cast<double>(i) * sample_dt;
    int k = static_cast<int>(std::llround(t / prediction.dt)) - 1;
    if (k < 0) continue;
    k = std::min(k, prediction.steps - 1);
    for (int n = 0; n < prediction.objects; ++n) {
      if (exempt[static_cast<size_t>(n)]) continue;
      int best_mode = 0;
      for (int m = 1; m < prediction.modes; ++m)
        if (prediction.weight(m, n) > prediction.weight(best_mode, n))
          best_mode = m;
      if (obb_intersects(ego_boxes[i], prediction.mode_box(best_mode, n, k)))
        return true;
    }
  }
  return false;
}

}  // namespace detail

// Runs one scenario through sensing, fusion, tracking, prediction, risk
// mapping, planning, and the metric suite. Deterministic for identical
// inputs.
inline PipelineOutputs run_pipeline(const ScenarioLog& scn,
                                    const PipelineConfig& cfg) {
  validate(cfg);
  validate(scn);
  const int cur = cfg.current_frame;
  if (cur >= static_cast<int>(scn.frames.size()))
    throw std::invalid_argument("current frame beyond the scenario log");
  {
    const double frames_per_sample = cfg.cr_dt / scn.dt;
    if (std::abs(frames_per_sample - std::llround(frames_per_sample)) > 1e-9)
      throw std::invalid_argument(
          "collision sampling period must align with the scenario frame "
          "grid");
  }
  const int ego_id = scn.ego_object_id();
  const AgentSpec& ego_agent = scn.ego_agent();
  const Pose ego_pose = scn.agent_pose(ego_agent, cur);
  const ObjectState* ego_now =
      scn.frames[static_cast<size_t>(cur)].find(ego_id);
  if (ego_now == nullptr)
    throw std::invalid_argument("ego object missing from the current frame");

  PipelineOutputs out;
  Report& rep = out.report;
  rep.scenario_template = scn.scenario_template;
  rep.seed = scn.seed;
  rep.density = scn.density;
  rep.perception = to_string(cfg.perception);
  rep.predictor = to_string(cfg.predictor);
  if (cfg.noise_override) rep.noise = *cfg.noise_override;

  // Sensing and late fusion over frames 0..cur. Detections are moved to
  // the current ego frame before fusion so every later stage shares one
  // coordinate system. The ego's own object is removed from every
  // stream: the planner must not dodge the vehicle it controls.
  const std::uint64_t sensor_seed = derive_seed(scn.seed, {0x53454e53ull});
  const std::vector<std::vector<DetectionBox>> fused = detail::stage(
      "sensing-fusion", [&] {
        std::vector<std::vector<DetectionBox>> result(
            static_cast<size_t>(cur) + 1);
        if (cfg.perception == PerceptionMode::kGroundTruth)
          return detail::ground_truth_stream(scn, cur, ego_id, ego_pose);
        std::vector<std::vector<std::vector<DetectionBox>>> streams;
        for (const AgentSpec& agent : scn.agents) {
          if (cfg.perception == PerceptionMode::kEgoOnly && !agent.ego)
            continue;
          const NoiseProfile noise = cfg.noise_override.value_or(agent.noise);
          std::vector<std::vector<DetectionBox>> stream(
              static_cast<size_t>(cur) + 1);
          for (int f = 0; f <= cur; ++f) {
            std::vector<DetectionBox> dets = sense(
                agent, scn.frames[static_cast<size_t>(f)], noise,
                sensor_seed);
            dets.erase(std::remove_if(dets.begin(), dets.end(),
                                      [&](const DetectionBox& d) {
                                        return d.id == ego_id;
                                      }),
                       dets.end());
            for (DetectionBox& d : dets)
              d = detail::to_ego_frame(d, ego_pose);
            stream[static_cast<size_t>(f)] = std::move(dets);
          }
          // Communication latency applies to received streams, not to the
          // ego's own sensor.
          if (!agent.ego)
            stream = apply_delay(stream, noise.delay_ms, scn.dt);
          streams.push_back(std::move(stream));
        }
        for (int f = 0; f <= cur; ++f) {
          std::vector<DetectionBox> all;
          for (const auto& stream : streams)
            all.insert(all.end(), stream[static_cast<size_t>(f)].begin(),
                       stream[static_cast<size_t>(f)].end());
          result[static_cast<size_t>(f)] =
              nms_fuse(std::move(all), cfg.fusion_iou);
        }
        return result;
      });

  const int first_hist = std::max(0, cur - cfg.history_frames + 1);
  out.fused_frames.assign(fused.begin() + first_hist, fused.end());
  out.tracks = detail::stage(
      "tracking", [&] { return assemble_histories(out.fused_frames, scn.dt); });
  rep.n_tracks = static_cast<int>(out.tracks.size());
  const int cur_local = static_cast<int>(out.fused_frames.size()) - 1;
  const std::vector<DetectionBox>& current_dets = out.fused_frames.back();

  // Detection metrics against the in-range ground truth.
  std::vector<ObjectState> gt_range;
  std::vector<int> gt_object_ids;
  for (const ObjectState& o : scn.frames[static_cast<size_t>(cur)].objects) {
    if (o.id == ego_id) continue;
    const ObjectState local = detail::to_ego_frame(o, ego_pose);
    if (!detail::in_eval_range(local.s, local.l, cfg)) continue;
    gt_range.push_back(local);
    gt_object_ids.push_back(o.id);
  }
  std::vector<DetectionBox> dets_range;
  std::vector<int> det_fused_index;
  for (size_t i = 0; i < current_dets.size(); ++i) {
    if (!detail::in_eval_range(current_dets[i].s, current_dets[i].l, cfg))
      continue;
    dets_range.push_back(current_dets[i]);
    det_fused_index.push_back(static_cast<int>(i));
  }
  MatchResult matches = detail::stage("detection-metrics", [&] {
    return match_detections(dets_range, gt_range, cfg.match_iou);
  });
  rep.ap = average_precision(dets_range, gt_range, cfg.match_iou);
  rep.n_gt = matches.n_gt();
  rep.n_tp = static_cast<int>(matches.true_positives.size());
  rep.n_fp = static_cast<int>(matches.false_positive_detections.size());
  rep.n_fn = static_cast<int>(matches.false_negative_gt.size());

  // Prediction over the assembled histories.
  const bool have_tracks = !out.tracks.empty();
  if (have_tracks) {
    detail::stage("prediction", [&] {
      const TrajectoryDistribution raw =
          cfg.predictor == PredictorKind::kConstantVelocity
              ? predict_cv(out.tracks, cfg.predictor_cfg)
              : predict_multimodal(out.tracks, cfg.predictor_cfg);
      rep.tor_raw = trajectory_overlap_rate(raw);
      out.prediction =
          enforce_scene_consistency(raw, cfg.consistency_penalty);
      rep.tor = trajectory_overlap_rate(out.prediction);
      rep.prediction_objects = out.prediction.objects;
    });
  }

  // Ground-truth futures for matched objects: link each true-positive
  // detection to the track it fed, then to the matched object's next
  // `steps` frames. Tracks without a current detection or with no future
  // coverage stay excluded.
  std::vector<std::vector<Vector2d>> gt_future(
      static_cast<size_t>(have_tracks ? out.prediction.objects : 0));
  if (have_tracks) detail::stage("prediction-metrics", [&] {
    const int steps = out.prediction.steps;
    for (size_t p = 0; p < matches.true_positives.size(); ++p) {
      const MatchPair& pair = matches.true_positives[p];
      const int fused_idx =
          det_fused_index[static_cast<size_t>(pair.detection)];
      int track_n = -1;
      for (size_t n = 0; n < out.tracks.size(); ++n) {
        if (out.tracks[n].source_index[static_cast<size_t>(cur_local)] ==
            fused_idx) {
          track_n = static_cast<int>(n);
          break;
        }
      }
      if (track_n < 0) continue;
      const int object_id = gt_object_ids[static_cast<size_t>(pair.gt)];
      std::vector<Vector2d> future;
      for (int k = 1; k <= steps; ++k) {
        const size_t f = static_cast<size_t>(cur + k);
        if (f >= scn.frames.size()) break;
        const ObjectState* o = scn.frames[f].find(object_id);
        if (o == nullptr) break;
        const ObjectState local = detail::to_ego_frame(*o, ego_pose);
        future.push_back({local.s, local.l});
      }
      if (static_cast<int>(future.size()) != steps) continue;
      double min_fde = std::numeric_limits<double>::infinity();
      for (int m = 0; m < out.prediction.modes; ++m) {
        const size_t i = out.prediction.idx(m, track_n, steps - 1);
        min_fde = std::min(
            min_fde, std::hypot(out.prediction.mean_x[i] - future.back().x(),
                                out.prediction.mean_y[i] - future.back().y()));
      }
      matches.tp_min_fde[p] = min_fde;
      gt_future[static_cast<size_t>(track_n)] = std::move(future);
    }
    const AdeFde ade = min_ade_fde(out.prediction, gt_future);
    if (ade.objects_counted > 0) {
      rep.min_ade = ade.min_ade;
      rep.min_fde = ade.min_fde;
    }
  });
  rep.epa = epa(matches, cfg.epa_tau, cfg.epa_alpha);

  if (!cfg.run_planner) return out;

  // Risk map over the prediction plus the currently observed objects.
  RiskMapConfig map_cfg = cfg.riskmap;
  map_cfg.ego_speed = ego_now->speed;
  map_cfg.ego_heading = 0.0;  // ego frame
  map_cfg.ego_mass = ego_now->mass;
  std::vector<ObjectState> current_objects;
  for (const DetectionBox& d : current_dets)
    current_objects.push_back(detail::detection_to_object(d));
  const std::uint64_t map_seed = derive_seed(scn.seed, {0x4d415055ull});
  out.risk_map = detail::stage("risk-map", [&] {
    if (have_tracks)
      return build_risk_map(out.prediction, current_objects, map_cfg,
                            map_seed);
    return RiskMap(map_cfg.grid, cfg.predictor_cfg.steps + 1,
                   cfg.predictor_cfg.dt);
  });

  // Plan from the ego frame origin at the current speed.
  PlannerConfig plan_cfg = cfg.planner;
  if (cfg.desired_speed_from_ego) plan_cfg.desired_speed = ego_now->speed;
  const PlannerState x0{0.0, ego_now->speed, 0.0, 0.0};
  detail::stage("planning", [&] {
    const size_t h = static_cast<size_t>(plan_cfg.horizon);
    std::vector<std::vector<Control>> starts;
    starts.emplace_back(h, Control{0.0, 0.0});
    if (cfg.planner_multi_start && have_tracks) {
      const double a = plan_cfg.accel_limit;
      const double d = 0.3 * plan_cfg.steer_limit;
      for (const Control u :
           {Control{-0.5 * a, 0.0}, Control{-a, 0.0}, Control{0.5 * a, 0.0},
            Control{a, 0.0}, Control{0.0, d}, Control{0.0, -d}})
        starts.emplace_back(h, u);
    }
    bool have_best = false;
    bool best_conflict = true;
    auto consider = [&](PlanResult&& r) {
      const bool conflict =
          have_tracks &&
          detail::predicted_conflict(r.states, plan_cfg.dt, ego_now->length,
                                     ego_now->width, out.prediction,
                                     out.tracks, cfg.cr_horizon, cfg.cr_dt);
      // Earlier candidates win ties so the zero-start solution stays
      // canonical.
      const bool better =
          !have_best || (!conflict && best_conflict) ||
          (conflict == best_conflict && r.final_cost < out.plan.final_cost);
      if (better) {
        out.plan = std::move(r);
        best_conflict = conflict;
        have_best = true;
      }
    };
    for (const std::vector<Control>& start : starts)
      consider(solve_mpc(x0, out.risk_map, plan_cfg, start));
    // Descent only sees the point-sampled field, so it can trade a clear
    // swept path away for tracking cost. The raw warm starts stay in the
    // pool as feasible fallbacks the conflict preference can pick.
    if (cfg.planner_multi_start && have_tracks) {
      for (const std::vector<Control>& start : starts) {
        PlanResult raw;
        raw.controls = start;
        raw.states = rollout(x0, start, plan_cfg);
        raw.final_cost = plan_cost(raw.states, out.risk_map, plan_cfg, x0.s);
        raw.cost_history = {raw.final_cost};
        consider(std::move(raw));
      }
    }
    out.baseline = rollout(
        x0, std::vector<Control>(static_cast<size_t>(plan_cfg.horizon)),
        plan_cfg);
  });
  rep.planner_final_cost = out.plan.final_cost;
  rep.planner_stalled = out.plan.stalled;
  {
    PlannerConfig risk_only = plan_cfg;
    risk_only.q_weight.setZero();
    rep.planned_risk = plan_cost(out.plan.states, out.risk_map, risk_only,
                                 x0.s);
    rep.baseline_risk =
        plan_cost(out.baseline, out.risk_map, risk_only, x0.s);
  }
  rep.planned_min_speed = x0.v;
  for (const PlannerState& s : out.plan.states)
    rep.planned_min_speed = std::min(rep.planned_min_speed, s.v);

  // Collision check of planned and baseline motion against ground truth
  // over the collision window, sampled on the collision grid.
  detail::stage("collision-check", [&] {
    const std::vector<OrientedBox> ego_planned = detail::planned_boxes(
        out.plan.states, plan_cfg.dt, ego_now->length, ego_now->width,
        cfg.cr_horizon, cfg.cr_dt);
    const std::vector<OrientedBox> ego_baseline = detail::planned_boxes(
        out.baseline, plan_cfg.dt, ego_now->length, ego_now->width,
        cfg.cr_horizon, cfg.cr_dt);
    std::vector<std::vector<OrientedBox>> gt_boxes(ego_planned.size());
    for (size_t i = 0; i < ego_planned.size(); ++i) {
      const double t = static_cast<double>(i) * cfg.cr_dt;
      const int f = cur + static_cast<int>(std::llround(t / scn.dt));
      if (f >= static_cast<int>(scn.frames.size())) break;
      for (const ObjectState& o :
           scn.frames[static_cast<size_t>(f)].objects) {
        if (o.id == ego_id) continue;
        const ObjectState local = detail::to_ego_frame(o, ego_pose);
        gt_boxes[i].push_back(local.footprint());
      }
    }
    rep.collision = any_collision(ego_planned, gt_boxes);
    rep.baseline_collision = any_collision(ego_baseline, gt_boxes);
  });
  return out;
}

inline std::string serialize_report(const Report& r) {
  const nlohmann::json j = r;
  return j.dump(2) + "\n";
}

inline void write_report(const Report& r, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << serialize_report(r);
  if (!out) throw std::runtime_error("write failed: " + path);
}

// Planned trajectory as CSV: one row per state; the control columns of
// the final state are empty because no control is applied from it.
inline void write_plan_csv(const PlanResult& plan, double dt,
                           const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "t,s,v,l,phi,a,delta\n";
  out << std::setprecision(17);
  for (size_t k = 0; k < plan.states.size(); ++k) {
    const PlannerState& x = plan.states[k];
    out << k * dt << ',' << x.s << ',' << x.v << ',' << x.l << ',' << x.phi;
    if (k < plan.controls.size())
      out << ',' << plan.controls[k].a << ',' << plan.controls[k].delta;
    else
      out << ",,";
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace cooperrisk
