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

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cooperrisk/geometry.hpp"

namespace cooperrisk {

enum class ObjectClass { kVehicle, kPedestrian, kCyclist };

inline const char* to_string(ObjectClass c) {
  switch (c) {
    case ObjectClass::kVehicle: return "vehicle";
    case ObjectClass::kPedestrian: return "pedestrian";
    case ObjectClass::kCyclist: return "cyclist";
  }
  return "vehicle";
}

inline ObjectClass object_class_from_string(const std::string& s) {
  if (s == "vehicle") return ObjectClass::kVehicle;
  if (s == "pedestrian") return ObjectClass::kPedestrian;
  if (s == "cyclist") return ObjectClass::kCyclist;
  throw std::invalid_argument("unknown object class: " + s);
}

inline double default_mass(ObjectClass c) {
  switch (c) {
    case ObjectClass::kVehicle: return 1500.0;
    case ObjectClass::kPedestrian: return 70.0;
    case ObjectClass::kCyclist: return 90.0;
  }
  return 1500.0;
}

struct BoxExtent {
  double length;
  double width;
  double height;
};

inline BoxExtent default_extent(ObjectClass c) {
  switch (c) {
    case ObjectClass::kVehicle: return {4.5, 2.0, 1.6};
    case ObjectClass::kPedestrian: return {0.6, 0.6, 1.75};
    case ObjectClass::kCyclist: return {1.8, 0.6, 1.7};
  }
  return {4.5, 2.0, 1.6};
}

// Ground-truth state of one traffic participant at one timestamp.
// Positions use map coordinates unless a function states otherwise.
struct ObjectState {
  int id = -1;
  ObjectClass cls = ObjectClass::kVehicle;
  double s = 0.0;        // longitudinal position [m]
  double l = 0.0;        // lateral position [m]
  double heading = 0.0;  // [rad], wrapped to (-pi, pi]
  double speed = 0.0;    // [m/s], >= 0
  double accel = 0.0;    // [m/s^2]
  double length = 4.5;
  double width = 2.0;
  double height = 1.6;
  double mass = 1500.0;

  Vector2d position() const { return {s, l}; }
  Vector2d velocity() const {
    return {speed * std::cos(heading), speed * std::sin(heading)};
  }
  OrientedBox footprint() const {
    return {{s, l}, heading, length, width};
  }
};

inline void validate(const ObjectState& o) {
  if (o.speed < 0.0) throw std::invalid_argument("object speed must be >= 0");
  if (o.length <= 0.0 || o.width <= 0.0 || o.height <= 0.0)
    throw std::invalid_argument("object extent must be positive");
  if (o.mass <= 0.0) throw std::invalid_argument("object mass must be positive");
}

// One perceived box reported by an agent sensor head.
struct DetectionBox {
  int id = -1;  // ground-truth object id the detection originated from
  ObjectClass cls = ObjectClass::kVehicle;
  double s = 0.0;
  double l = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  double length = 4.5;
  double width = 2.0;
  double height = 1.6;
  double confidence = 1.0;  // in [0, 1]
  int source_agent = -1;
  double timestamp = 0.0;  // capture time [s]

  Vector2d position() const { return {s, l}; }
  OrientedBox footprint() const {
    return {{s, l}, heading, length, width};
  }
};

struct NoiseProfile {
  double pos_sigma = 0.0;      // [m], per-axis Gaussian
  double heading_sigma = 0.0;  // [rad]
  double dropout_prob = 0.0;   // in [0, 1]
  double delay_ms = 0.0;       // transmission latency, >= 0
};

inline void validate(const NoiseProfile& n) {
  if (n.pos_sigma < 0.0 || n.heading_sigma < 0.0)
    throw std::invalid_argument("noise sigmas must be >= 0");
  if (n.dropout_prob < 0.0 || n.dropout_prob > 1.0)
    throw std::invalid_argument("dropout probability must be in [0, 1]");
  if (n.delay_ms < 0.0) throw std::invalid_argument("delay must be >= 0");
}

// A sensing agent: the ego vehicle, another connected vehicle, or a
// roadside unit. Mobile agents ride on a ground-truth object.
struct AgentSpec {
  int id = -1;
  int mounted_object = -1;  // -1 for fixed infrastructure
  double x = 0.0;           // pose of fixed agents
  double y = 0.0;
  double heading = 0.0;
  double radius = 50.0;  // perception radius [m]
  NoiseProfile noise;
  bool ego = false;
};

struct Frame {
  double t = 0.0;
  std::vector<ObjectState> objects;

  const ObjectState* find(int id) const {
    for (const ObjectState& o : objects)
      if (o.id == id) return &o;
    return nullptr;
  }
};

struct MapExtent {
  double x_min = -100.0;
  double x_max = 100.0;
  double y_min = -100.0;
  double y_max = 100.0;
};

// Full simulated log: agents plus ground-truth frames on a fixed time grid.
struct ScenarioLog {
  std::string scenario_template;
  std::uint64_t seed = 0;
  double dt = 0.5;
  int density = 0;
  MapExtent map_extent;
  std::vector<AgentSpec> agents;
  std::vector<Frame> frames;

  int ego_object_id() const {
    for (const AgentSpec& a : agents)
      if (a.ego) return a.mounted_object;
    throw std::invalid_argument("scenario has no ego agent");
  }

  const AgentSpec& ego_agent() const {
    for (const AgentSpec& a : agents)
      if (a.ego) return a;
    throw std::invalid_argument("scenario has no ego agent");
  }

  // Pose of an agent at a frame: mobile agents take the pose of their
  // carrier object, fixed agents keep their installed pose.
  Pose agent_pose(const AgentSpec& agent, int frame_idx) const {
    if (agent.mounted_object < 0) return {agent.x, agent.y, agent.heading};
    const ObjectState* carrier =
        frames.at(static_cast<size_t>(frame_idx)).find(agent.mounted_object);
    if (carrier == nullptr)
      throw std::invalid_argument("agent carrier object missing from frame");
    return {carrier->s, carrier->l, carrier->heading};
  }
};

inline void validate(const ScenarioLog& log) {
  if (log.dt <= 0.0) throw std::invalid_argument("scenario dt must be > 0");
  if (log.frames.empty()) throw std::invalid_argument("scenario has no frames");
  if (log.agents.empty()) throw std::invalid_argument("scenario has no agents");
  int ego_count = 0;
  for (const AgentSpec& a : log.agents) {
    if (a.ego) ++ego_count;
    if (a.radius <= 0.0)
      throw std::invalid_argument("agent perception radius must be > 0");
    validate(a.noise);
  }
  if (ego_count != 1)
    throw std::invalid_argument("scenario must have exactly one ego agent");
  for (size_t f = 0; f < log.frames.size(); ++f) {
    const double expected = static_cast<double>(f) * log.dt;
    if (std::abs(log.frames[f].t - expected) > 1e-9)
      throw std::invalid_argument("frame timestamps must lie on the dt grid");
    for (const ObjectState& o : log.frames[f].objects) validate(o);
  }
  // Object ids must occupy a contiguous frame range (no gaps).
  struct Range { int first = -1, last = -1, count = 0; };
  std::vector<std::pair<int, Range>> ranges;
  for (size_t f = 0; f < log.frames.size(); ++f) {
    for (const ObjectState& o : log.frames[f].objects) {
      Range* r = nullptr;
      for (auto& [id, range] : ranges)
        if (id == o.id) r = &range;
      if (r == nullptr) {
        ranges.emplace_back(o.id, Range{});
        r = &ranges.back().second;
      }
      if (r->first < 0) r->first = static_cast<int>(f);
      r->last = static_cast<int>(f);
      ++r->count;
    }
  }
  for (const auto& [id, r] : ranges) {
    if (r.count != r.last - r.first + 1)
      throw std::invalid_argument("object " + std::to_string(id) +
                                  " skips frames");
  }
}

// Perceived history of one tracked object over the observation window.
// states[i] is meaningful only where valid[i] is true.
struct TrackHistory {
  int id = -1;
  ObjectClass cls = ObjectClass::kVehicle;
  double length = 4.5;
  double width = 2.0;
  double height = 1.6;
  double mass = 1500.0;
  std::vector<ObjectState> states;
  std::vector<std::uint8_t> valid;
  std::vector<int> source_index;  // per-frame index into the fused detection
                                  // list, -1 where the track was unobserved

  int last_valid() const {
    for (int i = static_cast<int>(valid.size()) - 1; i >= 0; --i)
      if (valid[static_cast<size_t>(i)]) return i;
    return -1;
  }

  int valid_count() const {
    int n = 0;
    for (std::uint8_t v : valid) n += v ? 1 : 0;
    return n;
  }
};

}  // namespace cooperrisk
