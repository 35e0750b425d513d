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

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cooperrisk/random.hpp"
#include "cooperrisk/types.hpp"

namespace cooperrisk {

enum class TemplateKind { kStraight, kCrossing, kMerge, kRoundabout };

inline const char* to_string(TemplateKind k) {
  switch (k) {
    case TemplateKind::kStraight: return "straight";
    case TemplateKind::kCrossing: return "crossing";
    case TemplateKind::kMerge: return "merge";
    case TemplateKind::kRoundabout: return "roundabout";
  }
  return "straight";
}

inline TemplateKind template_from_string(const std::string& s) {
  if (s == "straight") return TemplateKind::kStraight;
  if (s == "crossing") return TemplateKind::kCrossing;
  if (s == "merge") return TemplateKind::kMerge;
  if (s == "roundabout") return TemplateKind::kRoundabout;
  throw std::invalid_argument("unknown scenario template: " + s);
}

inline int template_capacity(TemplateKind k) {
  switch (k) {
    case TemplateKind::kStraight: return 18;
    case TemplateKind::kCrossing: return 12;
    case TemplateKind::kMerge: return 10;
    case TemplateKind::kRoundabout: return 8;
  }
  return 0;
}

namespace detail {

using MotionScript = std::function<ObjectState(double)>;

inline ObjectState make_vehicle(int id) {
  ObjectState o;
  o.id = id;
  o.cls = ObjectClass::kVehicle;
  const BoxExtent e = default_extent(o.cls);
  o.length = e.length;
  o.width = e.width;
  o.height = e.height;
  o.mass = default_mass(o.cls);
  return o;
}

// Constant velocity along a fixed heading.
inline MotionScript cv_script(int id, double x0, double y0, double heading,
                              double speed) {
  return [=](double t) {
    ObjectState o = make_vehicle(id);
    o.s = x0 + speed * t * std::cos(heading);
    o.l = y0 + speed * t * std::sin(heading);
    o.heading = heading;
    o.speed = speed;
    return o;
  };
}

// Constant velocity until t_brake, then constant deceleration to a stop.
inline MotionScript brake_script(int id, double x0, double y0, double heading,
                                 double speed, double t_brake, double decel) {
  if (decel <= 0.0) throw std::invalid_argument("brake decel must be > 0");
  return [=](double t) {
    ObjectState o = make_vehicle(id);
    const double dir_x = std::cos(heading);
    const double dir_y = std::sin(heading);
    double dist, v, a;
    if (t <= t_brake) {
      dist = speed * t;
      v = speed;
      a = 0.0;
    } else {
      const double tau = t - t_brake;
      const double t_stop = speed / decel;
      if (tau < t_stop) {
        dist = speed * t_brake + speed * tau - 0.5 * decel * tau * tau;
        v = speed - decel * tau;
        a = -decel;
      } else {
        dist = speed * t_brake + 0.5 * speed * speed / decel;
        v = 0.0;
        a = 0.0;
      }
    }
    o.s = x0 + dist * dir_x;
    o.l = y0 + dist * dir_y;
    o.heading = heading;
    o.speed = v;
    o.accel = a;
    return o;
  };
}

// Counterclockwise circulation on a ring.
inline MotionScript ring_script(int id, double radius, double theta0,
                                double speed) {
  const double omega = speed / radius;
  return [=](double t) {
    ObjectState o = make_vehicle(id);
    const double theta = theta0 + omega * t;
    o.s = radius * std::cos(theta);
    o.l = radius * std::sin(theta);
    o.heading = normalize_angle(theta + M_PI / 2.0);
    o.speed = speed;
    return o;
  };
}

// Lane change from y0 to 0 with a raised-cosine lateral blend over
// blend_len meters of longitudinal travel starting at x_start.
inline MotionScript merge_script(int id, double x0, double y0, double vx,
                                 double x_start, double blend_len) {
  return [=](double t) {
    ObjectState o = make_vehicle(id);
    const double x = x0 + vx * t;
    const double xi = std::clamp((x - x_start) / blend_len, 0.0, 1.0);
    const double y = y0 * 0.5 * (1.0 + std::cos(M_PI * xi));
    double vy = 0.0;
    if (xi > 0.0 && xi < 1.0) {
      vy = -y0 * 0.5 * std::sin(M_PI * xi) * (M_PI / blend_len) * vx;
    }
    o.s = x;
    o.l = y;
    o.heading = std::atan2(vy, vx);
    o.speed = std::hypot(vx, vy);
    return o;
  };
}

struct Builder {
  std::vector<std::pair<int, MotionScript>> scripts;

  void add(int id, MotionScript script) {
    scripts.emplace_back(id, std::move(script));
  }

  void fill_frames(ScenarioLog& log, int n_frames, double dt) const {
    log.frames.resize(static_cast<size_t>(n_frames));
    for (int f = 0; f < n_frames; ++f) {
      Frame& frame = log.frames[static_cast<size_t>(f)];
      frame.t = static_cast<double>(f) * dt;
      frame.objects.reserve(scripts.size());
      for (const auto& [id, script] : scripts) {
        frame.objects.push_back(script(frame.t));
      }
    }
  }
};

inline AgentSpec make_agent(int id, int mounted, double x, double y,
                            double heading, bool ego) {
  AgentSpec a;
  a.id = id;
  a.mounted_object = mounted;
  a.x = x;
  a.y = y;
  a.heading = heading;
  a.radius = 50.0;
  a.ego = ego;
  return a;
}

}  // namespace detail

// Generates a deterministic scenario log. `density` counts background
// objects (the ego comes on top) and must stay within the template
// capacity. The construction guarantees that ground-truth boxes never
// overlap at any frame while conflict pressure for the motion plan stays
// high: crossing traffic is timed against a constant-velocity ego
// continuation and the scripted ego yields instead.
inline ScenarioLog generate_scenario(TemplateKind kind, int density,
                                     std::uint64_t seed,
                                     double duration = 8.0) {
  if (density < 1) throw std::invalid_argument("density must be >= 1");
  if (density > template_capacity(kind))
    throw std::invalid_argument("density exceeds template capacity");
  if (duration <= 0.0) throw std::invalid_argument("duration must be > 0");

  const double dt = 0.5;
  const int n_frames = static_cast<int>(std::lround(duration / dt)) + 1;
  const double t_now = 1.5;  // frame index 3: end of the observation window

  RandomStream rng(
      derive_seed(seed, {static_cast<std::uint64_t>(kind) + 1,
                         static_cast<std::uint64_t>(density)}));

  ScenarioLog log;
  log.scenario_template = to_string(kind);
  log.seed = seed;
  log.dt = dt;
  log.density = density;

  detail::Builder b;
  int cav_object = -1;  // background object carrying a connected sensor
  Pose rsu{0.0, 0.0, 0.0};

  switch (kind) {
    case TemplateKind::kCrossing: {
      log.map_extent = {-100.0, 100.0, -120.0, 120.0};
      rsu = {6.0, 6.0, 0.0};
      // Ego eastbound on y = -1.75. A constant-velocity continuation
      // reaches the first crossing lane exactly when a crosser occupies
      // it; the scripted ego brakes to a stop short of the conflict area.
      const double ego_y = -1.75;
      const double v_e = rng.uniform(6.0, 9.0);
      const double t_conflict = rng.uniform(2.05, 2.6);
      const double x_cur = -1.75 - v_e * t_conflict;
      const double x_e0 = x_cur - v_e * t_now;
      const double ego_stop_x = -8.5;
      const double d_stop = ego_stop_x - x_cur;
      const double a_e = v_e * v_e / (2.0 * d_stop);
      b.add(0, detail::brake_script(0, x_e0, ego_y, 0.0, v_e, t_now, a_e));

      // Same-lane crossers share one speed so gaps stay constant.
      double lane_a_speed = 0.0, lane_b_speed = 0.0;
      double lane_a_last = 0.0, lane_b_last = 0.0;
      double oncoming_speed = 0.0, oncoming_cursor = 0.0;
      double follower_x0 = x_e0, follower_stop = ego_stop_x,
             follower_speed = v_e;
      const char pattern[12] = {'A', 'O', 'F', 'B', 'A', 'F',
                                'B', 'O', 'A', 'B', 'F', 'A'};
      for (int i = 1; i <= density; ++i) {
        const char role = pattern[(i - 1) % 12];
        switch (role) {
          case 'A': {  // southbound crosser on x = -1.75
            if (lane_a_speed == 0.0) {
              lane_a_speed = rng.uniform(6.0, 9.0);
              lane_a_last = t_now + t_conflict + rng.uniform(-0.15, 0.15);
            } else {
              lane_a_last += rng.uniform(2.4, 2.8);
            }
            const double y0 = -1.75 + lane_a_speed * lane_a_last;
            b.add(i, detail::cv_script(i, -1.75, y0, -M_PI / 2.0,
                                       lane_a_speed));
            break;
          }
          case 'B': {  // northbound crosser on x = +1.75
            if (lane_b_speed == 0.0) {
              lane_b_speed = rng.uniform(6.0, 9.0);
              lane_b_last = lane_a_last + rng.uniform(2.4, 2.8);
            } else {
              lane_b_last += rng.uniform(2.4, 2.8);
            }
            const double y0 = -1.75 - lane_b_speed * lane_b_last;
            b.add(i, detail::cv_script(i, 1.75, y0, M_PI / 2.0,
                                       lane_b_speed));
            break;
          }
          case 'O': {  // westbound oncoming on y = +1.75, beyond ego range
            // Slow enough to stay east of the crossing lanes for the whole
            // scenario, close enough to stay inside the evaluation range.
            if (oncoming_speed == 0.0) {
              oncoming_speed = rng.uniform(4.5, 5.0);
              oncoming_cursor = rng.uniform(39.0, 44.0);
            } else {
              oncoming_cursor += rng.uniform(16.0, 20.0);
            }
            const double x0 = oncoming_cursor + oncoming_speed * t_now;
            b.add(i, detail::cv_script(i, x0, 1.75, M_PI, oncoming_speed));
            if (cav_object < 0) cav_object = i;
            break;
          }
          case 'F': {  // follower chain behind the ego, also yields
            const double v_f = follower_speed * rng.uniform(0.8, 0.9);
            const double x0 = follower_x0 - rng.uniform(14.0, 18.0);
            const double stop_x = follower_stop - rng.uniform(8.0, 10.0);
            const double x_cur_f = x0 + v_f * t_now;
            const double d = stop_x - x_cur_f;
            if (d <= 0.0)
              throw std::logic_error("follower placement infeasible");
            b.add(i, detail::brake_script(i, x0, ego_y, 0.0, v_f, t_now,
                                          v_f * v_f / (2.0 * d)));
            follower_x0 = x0;
            follower_stop = stop_x;
            follower_speed = v_f;
            break;
          }
        }
      }
      break;
    }
    case TemplateKind::kStraight: {
      log.map_extent = {-100.0, 180.0, -20.0, 20.0};
      rsu = {20.0, 10.0, 0.0};
      const double v_e = rng.uniform(6.0, 10.0);
      const double x_e0 = rng.uniform(-23.0, -17.0);
      b.add(0, detail::cv_script(0, x_e0, 0.0, 0.0, v_e));

      const double lane_speed[2] = {rng.uniform(5.0, 10.0),
                                    rng.uniform(5.0, 10.0)};
      double lane_cursor[2] = {-35.0 + rng.uniform(0.0, 6.0),
                               -35.0 + rng.uniform(0.0, 6.0)};
      double ahead_cursor = x_e0 + rng.uniform(16.0, 22.0);
      double behind_cursor = x_e0 - rng.uniform(16.0, 22.0);
      bool next_ahead = true;
      for (int i = 1; i <= density; ++i) {
        const int slot = (i - 1) % 3;
        if (slot < 2) {  // side lanes y = +-3.5
          const double y = slot == 0 ? 3.5 : -3.5;
          b.add(i, detail::cv_script(i, lane_cursor[slot], y, 0.0,
                                     lane_speed[slot]));
          lane_cursor[slot] += rng.uniform(15.0, 22.0);
          if (cav_object < 0 && i >= 2) cav_object = i;
        } else {  // ego lane, same speed as the ego so gaps are constant
          if (next_ahead) {
            b.add(i, detail::cv_script(i, ahead_cursor, 0.0, 0.0, v_e));
            ahead_cursor += rng.uniform(15.0, 22.0);
          } else {
            b.add(i, detail::cv_script(i, behind_cursor, 0.0, 0.0, v_e));
            behind_cursor -= rng.uniform(15.0, 22.0);
          }
          next_ahead = !next_ahead;
        }
      }
      break;
    }
    case TemplateKind::kMerge: {
      log.map_extent = {-100.0, 160.0, -20.0, 20.0};
      rsu = {30.0, 10.0, 0.0};
      const double v_e = rng.uniform(7.0, 9.0);
      const double x_e0 = rng.uniform(-25.0, -15.0);
      b.add(0, detail::cv_script(0, x_e0, 0.0, 0.0, v_e));

      const double lane2_speed = rng.uniform(6.0, 9.0);
      double lane2_cursor = -30.0 + rng.uniform(0.0, 5.0);
      double behind_cursor = x_e0;
      double ahead_cursor = x_e0 + rng.uniform(85.0, 95.0);
      const char pattern[3] = {'L', 'R', 'L'};
      for (int i = 1; i <= density; ++i) {
        const char role = i == 1 ? 'M' : pattern[(i - 2) % 3];
        switch (role) {
          case 'M': {  // ramp vehicle blending from y = -7 into y = 0
            const double x_m0 = x_e0 + rng.uniform(18.0, 26.0);
            const double v_m = v_e + rng.uniform(-0.5, 1.0);
            const double x_start = x_m0 + rng.uniform(2.0, 6.0);
            b.add(i, detail::merge_script(i, x_m0, -7.0, v_m, x_start, 40.0));
            if (cav_object < 0) cav_object = i;
            break;
          }
          case 'L': {  // outer main lane y = 3.5
            b.add(i, detail::cv_script(i, lane2_cursor, 3.5, 0.0,
                                       lane2_speed));
            lane2_cursor += rng.uniform(15.0, 22.0);
            break;
          }
          case 'R': {  // ego lane, ahead of the merge point or behind ego
            if (behind_cursor > x_e0 - 40.0) {
              behind_cursor -= rng.uniform(16.0, 22.0);
              b.add(i, detail::cv_script(i, behind_cursor, 0.0, 0.0, v_e));
            } else {
              b.add(i, detail::cv_script(i, ahead_cursor, 0.0, 0.0, v_e));
              ahead_cursor += rng.uniform(15.0, 22.0);
            }
            break;
          }
        }
      }
      break;
    }
    case TemplateKind::kRoundabout: {
      log.map_extent = {-70.0, 50.0, -50.0, 50.0};
      rsu = {0.0, 0.0, 0.0};
      const double radius = 12.0;
      const double v_ring = rng.uniform(5.0, 7.0);
      const double v_e = rng.uniform(5.0, 7.0);
      const double d_stop = std::max(rng.uniform(6.0, 10.0),
                                     v_e * v_e / 7.0);
      const double yield_x = -18.5;
      const double x_e0 = yield_x - d_stop - v_e * t_now;
      b.add(0, detail::brake_script(0, x_e0, 0.0, 0.0, v_e, t_now,
                                    v_e * v_e / (2.0 * d_stop)));

      const int n_ring = std::min(density, 6);
      for (int i = 1; i <= n_ring; ++i) {
        const double theta = 2.0 * M_PI * (i - 1) / n_ring +
                             rng.uniform(-0.15, 0.15);
        b.add(i, detail::ring_script(i, radius, theta, v_ring));
      }
      double follower_x0 = x_e0, follower_stop = yield_x,
             follower_speed = v_e;
      for (int i = n_ring + 1; i <= density; ++i) {
        const double v_f = follower_speed * rng.uniform(0.8, 0.9);
        const double x0 = follower_x0 - rng.uniform(12.0, 16.0);
        const double stop_x = follower_stop - rng.uniform(7.0, 9.0);
        const double d = stop_x - (x0 + v_f * t_now);
        if (d <= 0.0) throw std::logic_error("follower placement infeasible");
        b.add(i, detail::brake_script(i, x0, 0.0, 0.0, v_f, t_now,
                                      v_f * v_f / (2.0 * d)));
        follower_x0 = x0;
        follower_stop = stop_x;
        follower_speed = v_f;
      }
      break;
    }
  }

  b.fill_frames(log, n_frames, dt);

  log.agents.push_back(detail::make_agent(0, 0, 0.0, 0.0, 0.0, true));
  log.agents.push_back(
      detail::make_agent(1, -1, rsu.x, rsu.y, rsu.heading, false));
  if (cav_object > 0) {
    log.agents.push_back(
        detail::make_agent(2, cav_object, 0.0, 0.0, 0.0, false));
  }

  validate(log);
  return log;
}

}  // namespace cooperrisk
