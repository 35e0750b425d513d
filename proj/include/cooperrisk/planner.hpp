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

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "cooperrisk/riskmap.hpp"

namespace cooperrisk {

// Ego state in the planner frame: longitudinal position, speed, lateral
// position, heading.
struct PlannerState {
  double s = 0.0;
  double v = 0.0;
  double l = 0.0;
  double phi = 0.0;

  Eigen::Vector4d vec() const { return {s, v, l, phi}; }
  static PlannerState from_vec(const Eigen::Vector4d& x) {
    return {x[0], x[1], x[2], x[3]};
  }
};

// Acceleration and front wheel angle.
struct Control {
  double a = 0.0;
  double delta = 0.0;
};

enum class GradientMode {
  kAnalyticStandard,  // true gradient by reverse accumulation (default)
  kAsWritten,         // literal per-step Jacobian-transpose scaled by costs
  kFiniteDifference,  // central differences, for testing
};

inline std::string to_string(GradientMode m) {
  switch (m) {
    case GradientMode::kAnalyticStandard:
      return "analytic-standard";
    case GradientMode::kAsWritten:
      return "as-written";
    case GradientMode::kFiniteDifference:
      return "finite-difference";
  }
  throw std::invalid_argument("unknown gradient mode");
}

inline GradientMode gradient_mode_from_string(const std::string& s) {
  if (s == "analytic-standard") return GradientMode::kAnalyticStandard;
  if (s == "as-written") return GradientMode::kAsWritten;
  if (s == "finite-difference") return GradientMode::kFiniteDifference;
  throw std::invalid_argument("unknown gradient mode: " + s);
}

struct PlannerConfig {
  int horizon = 10;        // control steps K
  double dt = 0.5;         // [s]
  double wheelbase = 2.8;  // front to rear axle [m]
  // Soft tracking: hazard avoidance must be able to override progress,
  // speed keeping, and lane keeping at typical field magnitudes.
  Eigen::Matrix4d q_weight =
      Eigen::Vector4d(0.02, 0.05, 0.1, 0.5).asDiagonal();
  double desired_speed = 8.0;  // [m/s]
  int max_iterations = 200;
  double step_size = 0.2;   // halved on steps that fail to improve
  double accel_limit = 3.0;   // [m/s^2]
  double steer_limit = 0.5;   // [rad]
  GradientMode gradient_mode = GradientMode::kAnalyticStandard;
  // Planner steps beyond the last risk layer reuse it; disable to treat
  // them as risk-free instead.
  bool persist_last_layer = true;
  // States outside the risk grid cost penalty + slope * distance^2
  // instead of a map lookup.
  double boundary_penalty = 50.0;
  double boundary_slope = 1.0;
  double fd_step = 1e-5;   // central-difference step
  int max_backtracks = 20;
};

inline void validate(const PlannerConfig& c) {
  if (c.horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (c.dt <= 0.0) throw std::invalid_argument("dt must be > 0");
  if (c.wheelbase <= 0.0) throw std::invalid_argument("wheelbase must be > 0");
  if (c.max_iterations < 1)
    throw std::invalid_argument("max_iterations must be >= 1");
  if (c.step_size <= 0.0) throw std::invalid_argument("step size must be > 0");
  if (c.accel_limit <= 0.0 || c.steer_limit <= 0.0)
    throw std::invalid_argument("control limits must be > 0");
  if (c.desired_speed < 0.0)
    throw std::invalid_argument("desired speed must be >= 0");
  if (c.fd_step <= 0.0) throw std::invalid_argument("fd step must be > 0");
  if (c.max_backtracks < 0)
    throw std::invalid_argument("max_backtracks must be >= 0");
  if (!c.q_weight.allFinite())
    throw std::invalid_argument("Q must be finite");
  if ((c.q_weight - c.q_weight.transpose()).cwiseAbs().maxCoeff() > 1e-9)
    throw std::invalid_argument("Q must be symmetric");
}

// One step of the linearized bicycle model. Speed enters the lateral and
// heading updates at its pre-update value and is floored at zero.
inline PlannerState dynamics_step(const PlannerState& x, const Control& u,
                                  const PlannerConfig& cfg) {
  PlannerState n;
  n.s = x.s + cfg.dt * x.v;
  n.v = std::max(0.0, x.v + cfg.dt * u.a);
  n.l = x.l + cfg.dt * x.v * x.phi;
  n.phi = x.phi + cfg.dt * (x.v / cfg.wheelbase) * u.delta;
  return n;
}

inline std::vector<PlannerState> rollout(const PlannerState& x0,
                                         const std::vector<Control>& controls,
                                         const PlannerConfig& cfg) {
  std::vector<PlannerState> traj;
  traj.reserve(controls.size() + 1);
  traj.push_back(x0);
  for (const Control& u : controls) traj.push_back(dynamics_step(traj.back(), u, cfg));
  return traj;
}

// Target at step k: advance at the desired speed from the reference
// longitudinal position, centered laterally, heading zero.
inline PlannerState desired_state(int k, const PlannerConfig& cfg,
                                  double initial_s) {
  return {initial_s + k * cfg.dt * cfg.desired_speed, cfg.desired_speed, 0.0,
          0.0};
}

namespace detail {

// Risk contribution of one planner state: map lookup inside the grid
// (nearest layer in time, bilinear in space), boundary penalty outside.
// Fills the spatial gradient when requested.
inline double risk_term(const RiskMap& map, const PlannerConfig& cfg,
                        double t, double x, double y, double* gx,
                        double* gy) {
  const GridSpec& g = map.grid();
  if (!g.contains(x, y)) {
    const double dx =
        x < g.origin_x ? x - g.origin_x : std::max(0.0, x - g.x_max());
    const double dy =
        y < g.origin_y ? y - g.origin_y : std::max(0.0, y - g.y_max());
    if (gx) *gx = 2.0 * cfg.boundary_slope * dx;
    if (gy) *gy = 2.0 * cfg.boundary_slope * dy;
    return cfg.boundary_penalty + cfg.boundary_slope * (dx * dx + dy * dy);
  }
  int layer = static_cast<int>(std::llround(t / map.dt()));
  if (layer >= map.layer_count()) {
    if (!cfg.persist_last_layer) {
      if (gx) *gx = 0.0;
      if (gy) *gy = 0.0;
      return 0.0;
    }
    layer = map.layer_count() - 1;
  }
  layer = std::max(0, layer);
  if (gx || gy) {
    const Vector2d grad = map.spatial_gradient(layer, x, y);
    if (gx) *gx = grad.x();
    if (gy) *gy = grad.y();
  }
  return map.sample(layer, x, y);
}

}  // namespace detail

// Cost of the first `horizon` states: risk plus quadratic tracking error
// against the desired states anchored at initial_s.
inline double plan_cost(const std::vector<PlannerState>& traj,
                        const RiskMap& map, const PlannerConfig& cfg,
                        double initial_s) {
  if (traj.size() < static_cast<size_t>(cfg.horizon))
    throw std::invalid_argument("trajectory shorter than the horizon");
  double j = 0.0;
  for (int k = 0; k < cfg.horizon; ++k) {
    const PlannerState& x = traj[static_cast<size_t>(k)];
    j += detail::risk_term(map, cfg, k * cfg.dt, x.s, x.l, nullptr, nullptr);
    const Eigen::Vector4d e =
        x.vec() - desired_state(k, cfg, initial_s).vec();
    j += e.dot(cfg.q_weight * e);
  }
  return j;
}

namespace detail {

// Exact Jacobians of dynamics_step at (x, u). The speed floor zeroes the
// speed row when active.
inline void step_jacobians(const PlannerState& x, const Control& u,
                           const PlannerConfig& cfg, Eigen::Matrix4d& a_jac,
                           Eigen::Matrix<double, 4, 2>& b_jac) {
  const bool clamped = x.v + cfg.dt * u.a <= 0.0;
  a_jac.setIdentity();
  a_jac(0, 1) = cfg.dt;
  a_jac(1, 1) = clamped ? 0.0 : 1.0;
  a_jac(2, 1) = cfg.dt * x.phi;
  a_jac(2, 3) = cfg.dt * x.v;
  a_jac(3, 1) = cfg.dt * u.delta / cfg.wheelbase;
  b_jac.setZero();
  b_jac(1, 0) = clamped ? 0.0 : cfg.dt;
  b_jac(3, 1) = cfg.dt * x.v / cfg.wheelbase;
}

// Gradient of the per-step cost with respect to the state.
inline Eigen::Vector4d stage_cost_gradient(const PlannerState& x, int k,
                                           const RiskMap& map,
                                           const PlannerConfig& cfg,
                                           double initial_s) {
  double gx = 0.0, gy = 0.0;
  risk_term(map, cfg, k * cfg.dt, x.s, x.l, &gx, &gy);
  Eigen::Vector4d grad{gx, 0.0, gy, 0.0};
  const Eigen::Vector4d e = x.vec() - desired_state(k, cfg, initial_s).vec();
  grad += (cfg.q_weight + cfg.q_weight.transpose()) * e;
  return grad;
}

}  // namespace detail

// True gradient of plan_cost(rollout(x0, controls)) with respect to the
// controls, by reverse accumulation through the rollout. The last control
// never enters the cost (states K.. are not rated), so its gradient is
// zero.
inline std::vector<Control> analytic_gradient(
    const PlannerState& x0, const std::vector<Control>& controls,
    const RiskMap& map, const PlannerConfig& cfg) {
  const int k_max = cfg.horizon;
  const std::vector<PlannerState> traj = rollout(x0, controls, cfg);
  std::vector<Control> grad(controls.size(), Control{0.0, 0.0});
  Eigen::Vector4d lambda =
      detail::stage_cost_gradient(traj[static_cast<size_t>(k_max - 1)],
                                  k_max - 1, map, cfg, x0.s);
  for (int k = k_max - 2; k >= 0; --k) {
    Eigen::Matrix4d a_jac;
    Eigen::Matrix<double, 4, 2> b_jac;
    detail::step_jacobians(traj[static_cast<size_t>(k)],
                           controls[static_cast<size_t>(k)], cfg, a_jac,
                           b_jac);
    const Eigen::Vector2d gu = b_jac.transpose() * lambda;
    grad[static_cast<size_t>(k)] = {gu[0], gu[1]};
    lambda = detail::stage_cost_gradient(traj[static_cast<size_t>(k)], k, map,
                                         cfg, x0.s) +
             a_jac.transpose() * lambda;
  }
  return grad;
}

// Literal per-step update direction: each Jacobian-transpose term is
// scaled by the value of its own cost term, and only the state at the
// same step is consulted. Because the input Jacobian has nonzero rows
// only for speed and heading while the risk field depends on position
// alone, the risk term vanishes identically; the discrepancy with the
// true gradient is intentional and kept for comparison.
inline std::vector<Control> as_written_gradient(
    const PlannerState& x0, const std::vector<Control>& controls,
    const RiskMap& map, const PlannerConfig& cfg) {
  const std::vector<PlannerState> traj = rollout(x0, controls, cfg);
  std::vector<Control> grad(controls.size(), Control{0.0, 0.0});
  for (int k = 0; k < cfg.horizon; ++k) {
    const PlannerState& x = traj[static_cast<size_t>(k)];
    Eigen::Matrix4d a_jac;
    Eigen::Matrix<double, 4, 2> b_jac;
    detail::step_jacobians(x, controls[static_cast<size_t>(k)], cfg, a_jac,
                           b_jac);
    double gx = 0.0, gy = 0.0;
    const double v_h =
        detail::risk_term(map, cfg, k * cfg.dt, x.s, x.l, &gx, &gy);
    const Eigen::Vector4d risk_grad{gx, 0.0, gy, 0.0};
    const Eigen::Vector4d e =
        x.vec() - desired_state(k, cfg, x0.s).vec();
    const Eigen::Vector2d gu =
        b_jac.transpose() * risk_grad * v_h +
        b_jac.transpose() * (cfg.q_weight * e) * e.dot(cfg.q_weight * e);
    grad[static_cast<size_t>(k)] = {gu[0], gu[1]};
  }
  return grad;
}

// Central-difference gradient of the rolled-out cost, for testing.
inline std::vector<Control> fd_gradient(const PlannerState& x0,
                                        const std::vector<Control>& controls,
                                        const RiskMap& map,
                                        const PlannerConfig& cfg) {
  std::vector<Control> grad(controls.size(), Control{0.0, 0.0});
  std::vector<Control> work = controls;
  const double h = cfg.fd_step;
  auto cost_of = [&](const std::vector<Control>& u) {
    return plan_cost(rollout(x0, u, cfg), map, cfg, x0.s);
  };
  for (size_t k = 0; k < controls.size(); ++k) {
    for (int c = 0; c < 2; ++c) {
      double& entry = c == 0 ? work[k].a : work[k].delta;
      const double saved = entry;
      entry = saved + h;
      const double plus = cost_of(work);
      entry = saved - h;
      const double minus = cost_of(work);
      entry = saved;
      (c == 0 ? grad[k].a : grad[k].delta) = (plus - minus) / (2.0 * h);
    }
  }
  return grad;
}

inline std::vector<Control> mpc_gradient(const PlannerState& x0,
                                         const std::vector<Control>& controls,
                                         const RiskMap& map,
                                         const PlannerConfig& cfg) {
  switch (cfg.gradient_mode) {
    case GradientMode::kAnalyticStandard:
      return analytic_gradient(x0, controls, map, cfg);
    case GradientMode::kAsWritten:
      return as_written_gradient(x0, controls, map, cfg);
    case GradientMode::kFiniteDifference:
      return fd_gradient(x0, controls, map, cfg);
  }
  throw std::invalid_argument("unknown gradient mode");
}

struct PlanResult {
  std::vector<PlannerState> states;   // horizon + 1 entries
  std::vector<Control> controls;      // horizon entries
  std::vector<double> cost_history;   // initial cost plus one per iteration
  double final_cost = 0.0;
  // True when no cost decrease happened over the final quarter of the
  // iterations; informational, not an error.
  bool stalled = false;
};

// Projected gradient descent on the control sequence: per iteration one
// gradient, a step that is halved until the cost improves (or the
// backtrack budget runs out), controls clamped to the box limits.
inline PlanResult solve_mpc(const PlannerState& x0, const RiskMap& map,
                            const PlannerConfig& cfg,
                            std::vector<Control> controls = {}) {
  validate(cfg);
  if (controls.empty())
    controls.assign(static_cast<size_t>(cfg.horizon), Control{0.0, 0.0});
  if (controls.size() != static_cast<size_t>(cfg.horizon))
    throw std::invalid_argument("control sequence must match the horizon");
  auto project = [&](std::vector<Control>& u) {
    for (Control& c : u) {
      c.a = std::clamp(c.a, -cfg.accel_limit, cfg.accel_limit);
      c.delta = std::clamp(c.delta, -cfg.steer_limit, cfg.steer_limit);
    }
  };
  project(controls);
  std::vector<PlannerState> traj = rollout(x0, controls, cfg);
  double cost = plan_cost(traj, map, cfg, x0.s);
  PlanResult result;
  result.cost_history.reserve(static_cast<size_t>(cfg.max_iterations) + 1);
  result.cost_history.push_back(cost);
  for (int it = 0; it < cfg.max_iterations; ++it) {
    const std::vector<Control> grad = mpc_gradient(x0, controls, map, cfg);
    double eta = cfg.step_size;
    for (int attempt = 0; attempt <= cfg.max_backtracks; ++attempt) {
      std::vector<Control> trial = controls;
      for (size_t k = 0; k < trial.size(); ++k) {
        trial[k].a -= eta * grad[k].a;
        trial[k].delta -= eta * grad[k].delta;
      }
      project(trial);
      std::vector<PlannerState> trial_traj = rollout(x0, trial, cfg);
      const double trial_cost = plan_cost(trial_traj, map, cfg, x0.s);
      if (trial_cost < cost) {
        controls = std::move(trial);
        traj = std::move(trial_traj);
        cost = trial_cost;
        break;
      }
      eta *= 0.5;
    }
    result.cost_history.push_back(cost);
  }
  const int window = std::max(1, cfg.max_iterations / 4);
  const size_t last = result.cost_history.size() - 1;
  result.stalled =
      result.cost_history[last - static_cast<size_t>(window)] <=
      result.cost_history[last];
  result.states = std::move(traj);
  result.controls = std::move(controls);
  result.final_cost = cost;
  return result;
}

}  // namespace cooperrisk
