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
#include <stdexcept>
#include <vector>

#include "cooperrisk/fusion.hpp"
#include "cooperrisk/types.hpp"

namespace cooperrisk {

// Gaussian mixture over future positions: one bivariate Gaussian per
// (mode m, object n, step k), plus per-(mode, object) weights that sum to
// one over the modes of each object. Entry k covers horizon (k+1)*dt.
struct TrajectoryDistribution {
  int modes = 0;
  int objects = 0;
  int steps = 0;
  double dt = 0.5;

  std::vector<double> mean_x, mean_y;    // [modes*objects*steps]
  std::vector<double> sigma_x, sigma_y;  // > 0
  std::vector<double> corr;              // in (-1, 1)
  std::vector<double> heading, speed;    // motion state along the mode
  std::vector<double> weights;           // [modes*objects]

  std::vector<int> object_ids;           // [objects]
  std::vector<ObjectClass> object_cls;
  std::vector<double> object_length, object_width, object_mass;

  size_t idx(int m, int n, int k) const {
    return (static_cast<size_t>(m) * static_cast<size_t>(objects) +
            static_cast<size_t>(n)) *
               static_cast<size_t>(steps) +
           static_cast<size_t>(k);
  }

  double weight(int m, int n) const {
    return weights[static_cast<size_t>(m) * static_cast<size_t>(objects) +
                   static_cast<size_t>(n)];
  }

  double& weight_ref(int m, int n) {
    return weights[static_cast<size_t>(m) * static_cast<size_t>(objects) +
                   static_cast<size_t>(n)];
  }

  // Mean-position box of one mode at one step, with the object's extents.
  OrientedBox mode_box(int m, int n, int k) const {
    const size_t i = idx(m, n, k);
    return {{mean_x[i], mean_y[i]},
            heading[i],
            object_length[static_cast<size_t>(n)],
            object_width[static_cast<size_t>(n)]};
  }
};

inline void validate(const TrajectoryDistribution& d) {
  if (d.modes < 1 || d.objects < 1 || d.steps < 1)
    throw std::invalid_argument("distribution dimensions must be positive");
  const size_t n_entries = static_cast<size_t>(d.modes) *
                           static_cast<size_t>(d.objects) *
                           static_cast<size_t>(d.steps);
  if (d.mean_x.size() != n_entries || d.mean_y.size() != n_entries ||
      d.sigma_x.size() != n_entries || d.sigma_y.size() != n_entries ||
      d.corr.size() != n_entries || d.heading.size() != n_entries ||
      d.speed.size() != n_entries)
    throw std::invalid_argument("distribution arrays have wrong size");
  if (d.weights.size() !=
      static_cast<size_t>(d.modes) * static_cast<size_t>(d.objects))
    throw std::invalid_argument("weight array has wrong size");
  if (d.object_ids.size() != static_cast<size_t>(d.objects))
    throw std::invalid_argument("object metadata has wrong size");
  for (size_t i = 0; i < n_entries; ++i) {
    if (!(d.sigma_x[i] > 0.0) || !(d.sigma_y[i] > 0.0))
      throw std::invalid_argument("sigma must be > 0");
    if (!(std::abs(d.corr[i]) < 1.0))
      throw std::invalid_argument("correlation must be in (-1, 1)");
  }
  for (int n = 0; n < d.objects; ++n) {
    double sum = 0.0;
    for (int m = 0; m < d.modes; ++m) {
      const double w = d.weight(m, n);
      if (w < 0.0) throw std::invalid_argument("weights must be >= 0");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("mode weights of an object must sum to 1");
  }
}

struct PredictorConfig {
  int modes = 5;
  int steps = 6;   // 3 s at 2 Hz
  double dt = 0.5;
  double base_sigma = 0.5;     // [m] at the first step
  double sigma_growth = 0.25;  // [m] added per step
  double softmax_temperature = 0.2;  // [m^2] for retrodiction errors
  double keep_accel = 1.5;   // acceleration intention [m/s^2]
  double brake_decel = 2.0;  // deceleration intention [m/s^2]
  double turn_rate = 0.25;   // turning intentions [rad/s]
  // Allows more modes than the base intention set by adding scaled turn
  // rates; without it, asking for more than five modes is an error.
  bool jitter_extra_modes = false;
};

inline void validate(const PredictorConfig& c) {
  if (c.modes < 1) throw std::invalid_argument("modes must be >= 1");
  if (c.steps < 1) throw std::invalid_argument("steps must be >= 1");
  if (c.dt <= 0.0) throw std::invalid_argument("dt must be > 0");
  if (c.base_sigma <= 0.0 || c.sigma_growth < 0.0)
    throw std::invalid_argument("sigma schedule must be positive");
  if (c.softmax_temperature <= 0.0)
    throw std::invalid_argument("softmax temperature must be > 0");
  if (c.brake_decel <= 0.0)
    throw std::invalid_argument("brake decel must be > 0");
}

namespace detail {

struct Intention {
  double accel = 0.0;
  double yaw_rate = 0.0;
};

// Closed-form unicycle rollout: straight motion with constant acceleration
// (speed clamped at zero) or a constant-speed arc.
inline void roll_intention(const Vector2d& p0, double theta, double v0,
                           const Intention& in, double t, Vector2d& pos,
                           double& heading_out, double& speed_out) {
  if (in.yaw_rate == 0.0) {
    double dist, v;
    if (in.accel < 0.0 && v0 + in.accel * t < 0.0) {
      const double t_stop = v0 / (-in.accel);
      dist = v0 * t_stop + 0.5 * in.accel * t_stop * t_stop;
      v = 0.0;
    } else {
      dist = v0 * t + 0.5 * in.accel * t * t;
      v = v0 + in.accel * t;
    }
    pos = p0 + dist * Vector2d{std::cos(theta), std::sin(theta)};
    heading_out = theta;
    speed_out = v;
  } else {
    const double w = in.yaw_rate;
    pos = p0 + (v0 / w) * Vector2d{std::sin(theta + w * t) - std::sin(theta),
                                   std::cos(theta) - std::cos(theta + w * t)};
    heading_out = normalize_angle(theta + w * t);
    speed_out = v0;
  }
}

inline std::vector<Intention> intention_set(const PredictorConfig& cfg) {
  std::vector<Intention> set{{0.0, 0.0},
                             {cfg.keep_accel, 0.0},
                             {-cfg.brake_decel, 0.0},
                             {0.0, cfg.turn_rate},
                             {0.0, -cfg.turn_rate}};
  if (cfg.modes <= static_cast<int>(set.size())) {
    set.resize(static_cast<size_t>(cfg.modes));
    return set;
  }
  if (!cfg.jitter_extra_modes)
    throw std::invalid_argument(
        "requested more modes than the intention set provides");
  double scale = 0.5;
  while (static_cast<int>(set.size()) < cfg.modes) {
    set.push_back({0.0, cfg.turn_rate * scale});
    if (static_cast<int>(set.size()) < cfg.modes)
      set.push_back({0.0, -cfg.turn_rate * scale});
    scale += 0.5;
  }
  set.resize(static_cast<size_t>(cfg.modes));
  return set;
}

// Velocity magnitude and direction for a rollout anchored at state `st`,
// estimated from the displacement to the previous valid state when one
// exists (forward displacement as fallback keeps turning histories fair).
inline void anchor_motion(const TrackHistory& track, int anchor, double dt,
                          Vector2d& pos, double& theta, double& v0) {
  const ObjectState& st = track.states[static_cast<size_t>(anchor)];
  pos = st.position();
  Vector2d vel = st.velocity();
  bool found = false;
  for (int i = anchor - 1; i >= 0; --i) {
    if (track.valid[static_cast<size_t>(i)]) {
      vel = (pos - track.states[static_cast<size_t>(i)].position()) /
            (static_cast<double>(anchor - i) * dt);
      found = true;
      break;
    }
  }
  if (!found) {
    for (int i = anchor + 1; i < static_cast<int>(track.valid.size()); ++i) {
      if (track.valid[static_cast<size_t>(i)]) {
        vel = (track.states[static_cast<size_t>(i)].position() - pos) /
              (static_cast<double>(i - anchor) * dt);
        break;
      }
    }
  }
  v0 = vel.norm();
  theta = v0 > 1e-6 ? std::atan2(vel.y(), vel.x()) : st.heading;
}

// Softmax over negative mean squared retrodiction error: each intention is
// rolled out from the third-last valid observation and scored against the
// last two. Histories too short to score get uniform weights.
inline std::vector<double> retrodiction_weights(
    const TrackHistory& track, const std::vector<Intention>& intentions,
    const PredictorConfig& cfg) {
  std::vector<int> vi;
  for (size_t i = 0; i < track.valid.size(); ++i)
    if (track.valid[i]) vi.push_back(static_cast<int>(i));
  const size_t m_count = intentions.size();
  if (vi.size() < 3 || m_count == 1)
    return std::vector<double>(m_count, 1.0 / static_cast<double>(m_count));

  const int anchor = vi[vi.size() - 3];
  Vector2d p0;
  double theta, v0;
  anchor_motion(track, anchor, cfg.dt, p0, theta, v0);

  std::vector<double> err(m_count, 0.0);
  for (size_t m = 0; m < m_count; ++m) {
    double total = 0.0;
    for (size_t oi = vi.size() - 2; oi < vi.size(); ++oi) {
      const int obs = vi[oi];
      const double t = static_cast<double>(obs - anchor) * cfg.dt;
      Vector2d pos;
      double h, v;
      roll_intention(p0, theta, v0, intentions[m], t, pos, h, v);
      total += (pos - track.states[static_cast<size_t>(obs)].position())
                   .squaredNorm();
    }
    err[m] = total / 2.0;
  }

  const double err_min = *std::min_element(err.begin(), err.end());
  std::vector<double> w(m_count);
  double sum = 0.0;
  for (size_t m = 0; m < m_count; ++m) {
    w[m] = std::exp((err_min - err[m]) / cfg.softmax_temperature);
    sum += w[m];
  }
  for (double& x : w) x /= sum;
  return w;
}

inline TrajectoryDistribution predict_with_intentions(
    const std::vector<TrackHistory>& histories, const PredictorConfig& cfg,
    const std::vector<Intention>& intentions, bool retrodict) {
  if (histories.empty())
    throw std::invalid_argument("prediction requires at least one track");
  validate(cfg);

  TrajectoryDistribution d;
  d.modes = static_cast<int>(intentions.size());
  d.objects = static_cast<int>(histories.size());
  d.steps = cfg.steps;
  d.dt = cfg.dt;
  const size_t n_entries = static_cast<size_t>(d.modes) *
                           static_cast<size_t>(d.objects) *
                           static_cast<size_t>(d.steps);
  d.mean_x.resize(n_entries);
  d.mean_y.resize(n_entries);
  d.sigma_x.resize(n_entries);
  d.sigma_y.resize(n_entries);
  d.corr.assign(n_entries, 0.0);
  d.heading.resize(n_entries);
  d.speed.resize(n_entries);
  d.weights.resize(static_cast<size_t>(d.modes) *
                   static_cast<size_t>(d.objects));

  for (int n = 0; n < d.objects; ++n) {
    const TrackHistory& track = histories[static_cast<size_t>(n)];
    const int last = track.last_valid();
    if (last < 0)
      throw std::invalid_argument("track without valid states");
    d.object_ids.push_back(track.id);
    d.object_cls.push_back(track.cls);
    d.object_length.push_back(track.length);
    d.object_width.push_back(track.width);
    d.object_mass.push_back(track.mass);

    Vector2d p0;
    double theta, v0;
    anchor_motion(track, last, cfg.dt, p0, theta, v0);

    const std::vector<double> w =
        retrodict
            ? retrodiction_weights(track, intentions, cfg)
            : std::vector<double>(intentions.size(),
                                  1.0 / static_cast<double>(d.modes));
    for (int m = 0; m < d.modes; ++m)
      d.weight_ref(m, n) = w[static_cast<size_t>(m)];

    for (int m = 0; m < d.modes; ++m) {
      for (int k = 0; k < d.steps; ++k) {
        const double t = static_cast<double>(k + 1) * cfg.dt;
        Vector2d pos;
        double h, v;
        roll_intention(p0, theta, v0, intentions[static_cast<size_t>(m)], t,
                       pos, h, v);
        const size_t i = d.idx(m, n, k);
        d.mean_x[i] = pos.x();
        d.mean_y[i] = pos.y();
        const double sigma =
            cfg.base_sigma + static_cast<double>(k + 1) * cfg.sigma_growth;
        d.sigma_x[i] = sigma;
        d.sigma_y[i] = sigma;
        d.heading[i] = h;
        d.speed[i] = v;
      }
    }
  }
  validate(d);
  return d;
}

}  // namespace detail

// Single-mode constant-velocity baseline. Shares the rollout path of the
// multi-modal keep intention, so on identical input the keep mode of
// predict_multimodal matches this output exactly.
inline TrajectoryDistribution predict_cv(
    const std::vector<TrackHistory>& histories, PredictorConfig cfg) {
  cfg.modes = 1;
  return detail::predict_with_intentions(histories, cfg, {{0.0, 0.0}}, false);
}

// Multi-modal prediction over the intention set {keep, accelerate,
// decelerate, turn-left, turn-right}, truncated or extended to cfg.modes,
// with weights from retrodiction against the observed history.
inline TrajectoryDistribution predict_multimodal(
    const std::vector<TrackHistory>& histories, const PredictorConfig& cfg) {
  validate(cfg);
  return detail::predict_with_intentions(histories, cfg,
                                         detail::intention_set(cfg), true);
}

// True when the mean boxes of two modes of two different objects touch at
// any common step.
inline bool mode_pair_overlaps(const TrajectoryDistribution& d, int m1,
                               int n1, int m2, int n2) {
  for (int k = 0; k < d.steps; ++k) {
    if (obb_intersects(d.mode_box(m1, n1, k), d.mode_box(m2, n2, k)))
      return true;
  }
  return false;
}

// Multiplies the weights of every pair of modes (of distinct objects)
// whose mean boxes collide at some step by `penalty`, then renormalizes
// each object's mode weights. Means and covariances are untouched.
inline TrajectoryDistribution enforce_scene_consistency(
    TrajectoryDistribution d, double penalty = 0.2) {
  if (penalty <= 0.0 || penalty > 1.0)
    throw std::invalid_argument("penalty must be in (0, 1]");
  validate(d);
  for (int n1 = 0; n1 < d.objects; ++n1) {
    for (int n2 = n1 + 1; n2 < d.objects; ++n2) {
      for (int m1 = 0; m1 < d.modes; ++m1) {
        for (int m2 = 0; m2 < d.modes; ++m2) {
          if (mode_pair_overlaps(d, m1, n1, m2, n2)) {
            d.weight_ref(m1, n1) *= penalty;
            d.weight_ref(m2, n2) *= penalty;
          }
        }
      }
    }
  }
  for (int n = 0; n < d.objects; ++n) {
    double sum = 0.0;
    for (int m = 0; m < d.modes; ++m) sum += d.weight(m, n);
    for (int m = 0; m < d.modes; ++m) d.weight_ref(m, n) /= sum;
  }
  return d;
}

// Probability mass of pairwise mode collisions, per object capped at one,
// averaged over objects. A single object scores zero.
inline double trajectory_overlap_rate(const TrajectoryDistribution& d) {
  validate(d);
  if (d.objects < 2) return 0.0;
  double total = 0.0;
  for (int n1 = 0; n1 < d.objects; ++n1) {
    double p = 0.0;
    for (int n2 = 0; n2 < d.objects; ++n2) {
      if (n2 == n1) continue;
      for (int m1 = 0; m1 < d.modes; ++m1) {
        for (int m2 = 0; m2 < d.modes; ++m2) {
          if (mode_pair_overlaps(d, m1, n1, m2, n2))
            p += d.weight(m1, n1) * d.weight(m2, n2);
        }
      }
    }
    total += std::min(1.0, p);
  }
  return total / static_cast<double>(d.objects);
}

}  // namespace cooperrisk
