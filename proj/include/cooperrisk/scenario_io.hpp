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

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "cooperrisk/types.hpp"

namespace cooperrisk {

// Scenario files use the JSON layout documented in docs/formats.md.

inline nlohmann::json to_json(const ObjectState& o) {
  return {{"id", o.id},          {"class", to_string(o.cls)},
          {"s", o.s},            {"l", o.l},
          {"heading", o.heading}, {"speed", o.speed},
          {"accel", o.accel},    {"length", o.length},
          {"width", o.width},    {"height", o.height},
          {"mass", o.mass}};
}

inline ObjectState object_state_from_json(const nlohmann::json& j) {
  ObjectState o;
  o.id = j.at("id").get<int>();
  o.cls = object_class_from_string(j.at("class").get<std::string>());
  o.s = j.at("s").get<double>();
  o.l = j.at("l").get<double>();
  o.heading = j.at("heading").get<double>();
  o.speed = j.at("speed").get<double>();
  const BoxExtent e = default_extent(o.cls);
  o.accel = j.value("accel", 0.0);
  o.length = j.value("length", e.length);
  o.width = j.value("width", e.width);
  o.height = j.value("height", e.height);
  o.mass = j.value("mass", default_mass(o.cls));
  return o;
}

inline nlohmann::json to_json(const NoiseProfile& n) {
  return {{"pos_sigma", n.pos_sigma},
          {"heading_sigma", n.heading_sigma},
          {"dropout_prob", n.dropout_prob},
          {"delay_ms", n.delay_ms}};
}

inline NoiseProfile noise_profile_from_json(const nlohmann::json& j) {
  NoiseProfile n;
  n.pos_sigma = j.value("pos_sigma", 0.0);
  n.heading_sigma = j.value("heading_sigma", 0.0);
  n.dropout_prob = j.value("dropout_prob", 0.0);
  n.delay_ms = j.value("delay_ms", 0.0);
  return n;
}

inline nlohmann::json to_json(const AgentSpec& a) {
  return {{"id", a.id},
          {"mounted_object", a.mounted_object},
          {"x", a.x},
          {"y", a.y},
          {"heading", a.heading},
          {"radius", a.radius},
          {"noise", to_json(a.noise)},
          {"ego", a.ego}};
}

inline AgentSpec agent_from_json(const nlohmann::json& j) {
  AgentSpec a;
  a.id = j.at("id").get<int>();
  a.mounted_object = j.value("mounted_object", -1);
  a.x = j.value("x", 0.0);
  a.y = j.value("y", 0.0);
  a.heading = j.value("heading", 0.0);
  a.radius = j.at("radius").get<double>();
  if (j.contains("noise")) a.noise = noise_profile_from_json(j.at("noise"));
  a.ego = j.value("ego", false);
  return a;
}

inline nlohmann::json to_json(const ScenarioLog& log) {
  nlohmann::json meta = {{"template", log.scenario_template},
                         {"seed", log.seed},
                         {"dt", log.dt},
                         {"density", log.density},
                         {"map_extent",
                          {{"x_min", log.map_extent.x_min},
                           {"x_max", log.map_extent.x_max},
                           {"y_min", log.map_extent.y_min},
                           {"y_max", log.map_extent.y_max}}}};
  nlohmann::json agents = nlohmann::json::array();
  for (const AgentSpec& a : log.agents) agents.push_back(to_json(a));
  nlohmann::json frames = nlohmann::json::array();
  for (const Frame& f : log.frames) {
    nlohmann::json objects = nlohmann::json::array();
    for (const ObjectState& o : f.objects) objects.push_back(to_json(o));
    frames.push_back({{"t", f.t}, {"objects", std::move(objects)}});
  }
  return {{"meta", std::move(meta)},
          {"agents", std::move(agents)},
          {"frames", std::move(frames)}};
}

inline ScenarioLog scenario_from_json(const nlohmann::json& j) {
  ScenarioLog log;
  const nlohmann::json& meta = j.at("meta");
  log.scenario_template = meta.value("template", std::string("custom"));
  log.seed = meta.at("seed").get<std::uint64_t>();
  log.dt = meta.at("dt").get<double>();
  log.density = meta.value("density", 0);
  if (meta.contains("map_extent")) {
    const nlohmann::json& e = meta.at("map_extent");
    log.map_extent = {e.at("x_min").get<double>(), e.at("x_max").get<double>(),
                      e.at("y_min").get<double>(), e.at("y_max").get<double>()};
  }
  for (const nlohmann::json& a : j.at("agents"))
    log.agents.push_back(agent_from_json(a));
  for (const nlohmann::json& f : j.at("frames")) {
    Frame frame;
    frame.t = f.at("t").get<double>();
    for (const nlohmann::json& o : f.at("objects"))
      frame.objects.push_back(object_state_from_json(o));
    log.frames.push_back(std::move(frame));
  }
  validate(log);
  return log;
}

inline std::string serialize_scenario(const ScenarioLog& log) {
  return to_json(log).dump(2) + "\n";
}

inline void save_scenario(const ScenarioLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << serialize_scenario(log);
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline ScenarioLog load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("scenario parse error in " + path + ": " +
                             e.what());
  }
  try {
    return scenario_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("scenario schema error in " + path + ": " +
                                e.what());
  }
}

}  // namespace cooperrisk
