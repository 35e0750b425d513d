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
#include <numeric>
#include <stdexcept>
#include <vector>

#include "cooperrisk/random.hpp"
#include "cooperrisk/types.hpp"

namespace cooperrisk {

// Simulates one agent's detector on one ground-truth frame. Every object
// within the perception radius is reported except the agent's own carrier.
// Noise comes from a substream keyed by (seed, agent, timestamp, object):
// the same object gets the same unit draws regardless of the noise level,
// so sweeping sigma moves each detection along a fixed direction instead of
// resampling the whole scene.
inline std::vector<DetectionBox> sense(const AgentSpec& agent,
                                       const Frame& frame,
                                       const NoiseProfile& noise,
                                       std::uint64_t seed) {
  validate(noise);
  Pose pose{agent.x, agent.y, agent.heading};
  if (agent.mounted_object >= 0) {
    const ObjectState* carrier = frame.find(agent.mounted_object);
    if (carrier == nullptr)
      throw std::invalid_argument("sensing agent carrier missing from frame");
    pose = {carrier->s, carrier->l, carrier->heading};
  }

  const std::uint64_t t_tag =
      static_cast<std::uint64_t>(std::llround(frame.t * 1000.0));
  std::vector<DetectionBox> out;
  out.reserve(frame.objects.size());
  for (const ObjectState& obj : frame.objects) {
    if (obj.id == agent.mounted_object) continue;
    if ((obj.position() - pose.position()).norm() > agent.radius) continue;

    RandomStream rng(derive_seed(seed, {static_cast<std::uint64_t>(agent.id),
                                        t_tag,
                                        static_cast<std::uint64_t>(obj.id)}));
    if (rng.bernoulli(noise.dropout_prob)) continue;
    double zx, zy, zh;
    rng.normal_pair(zx, zy);
    zh = rng.normal();

    DetectionBox d;
    d.id = obj.id;
    d.cls = obj.cls;
    d.s = obj.s + noise.pos_sigma * zx;
    d.l = obj.l + noise.pos_sigma * zy;
    d.heading = normalize_angle(obj.heading + noise.heading_sigma * zh);
    d.speed = obj.speed;
    d.length = obj.length;
    d.width = obj.width;
    d.height = obj.height;
    d.confidence = 1.0 - 0.1 * rng.uniform();
    d.source_agent = agent.id;
    d.timestamp = frame.t;
    out.push_back(d);
  }
  return out;
}

// Number of whole frames a message is late, rounding latency up to the
// frame grid: anything in (0, dt] lags one frame.
inline int delay_frames(double delay_ms, double dt) {
  if (delay_ms < 0.0) throw std::invalid_argument("delay must be >= 0");
  if (delay_ms == 0.0) return 0;
  return static_cast<int>(std::ceil(delay_ms / 1000.0 / dt - 1e-9));
}

// Shifts a per-frame detection stream backwards: at frame f the receiver
// holds what the sender captured at f - back. Detections keep their
// original capture timestamps.
inline std::vector<std::vector<DetectionBox>> apply_delay(
    const std::vector<std::vector<DetectionBox>>& stream, double delay_ms,
    double dt) {
  const int back = delay_frames(delay_ms, dt);
  std::vector<std::vector<DetectionBox>> out(stream.size());
  for (size_t f = 0; f < stream.size(); ++f) {
    if (static_cast<int>(f) >= back)
      out[f] = stream[f - static_cast<size_t>(back)];
  }
  return out;
}

// Late fusion: greedy non-maximum suppression. Boxes are visited in
// descending confidence (ties broken by source agent, then object id) and
// suppress any remaining box whose IoU with a kept box exceeds the
// threshold.
inline std::vector<DetectionBox> nms_fuse(std::vector<DetectionBox> boxes,
                                          double iou_threshold = 0.3) {
  if (iou_threshold < 0.0 || iou_threshold > 1.0)
    throw std::invalid_argument("iou threshold must be in [0, 1]");
  std::sort(boxes.begin(), boxes.end(),
            [](const DetectionBox& a, const DetectionBox& b) {
              if (a.confidence != b.confidence)
                return a.confidence > b.confidence;
              if (a.source_agent != b.source_agent)
                return a.source_agent < b.source_agent;
              return a.id < b.id;
            });
  std::vector<DetectionBox> kept;
  for (const DetectionBox& candidate : boxes) {
    bool suppressed = false;
    for (const DetectionBox& k : kept) {
      if (obb_iou(candidate.footprint(), k.footprint()) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(candidate);
  }
  return kept;
}

// Associates fused detections across the observation window into tracks.
// The gate is applied to the innovation against a constant-velocity
// forecast of each track (bootstrapped from the reported speed and heading
// while the track has a single frame), so fast objects stay associated.
inline std::vector<TrackHistory> assemble_histories(
    const std::vector<std::vector<DetectionBox>>& fused_frames, double dt,
    double gate = 3.0) {
  if (dt <= 0.0) throw std::invalid_argument("dt must be > 0");
  if (gate <= 0.0) throw std::invalid_argument("gate must be > 0");
  const int n_frames = static_cast<int>(fused_frames.size());

  struct Work {
    TrackHistory history;
    int last_idx = -1;
  };
  std::vector<Work> tracks;

  auto forecast = [&](const Work& w, int frame_idx) {
    const ObjectState& last =
        w.history.states[static_cast<size_t>(w.last_idx)];
    Vector2d vel = last.velocity();
    for (int i = w.last_idx - 1; i >= 0; --i) {
      if (w.history.valid[static_cast<size_t>(i)]) {
        const ObjectState& prev = w.history.states[static_cast<size_t>(i)];
        vel = (last.position() - prev.position()) /
              (static_cast<double>(w.last_idx - i) * dt);
        break;
      }
    }
    const double gap = static_cast<double>(frame_idx - w.last_idx) * dt;
    return Vector2d(last.position() + vel * gap);
  };

  for (int f = 0; f < n_frames; ++f) {
    const std::vector<DetectionBox>& dets =
        fused_frames[static_cast<size_t>(f)];

    struct Candidate {
      double dist;
      int track;
      int det;
    };
    std::vector<Candidate> candidates;
    for (size_t t = 0; t < tracks.size(); ++t) {
      const Vector2d pred = forecast(tracks[t], f);
      for (size_t d = 0; d < dets.size(); ++d) {
        const double dist = (dets[d].position() - pred).norm();
        if (dist <= gate)
          candidates.push_back(
              {dist, static_cast<int>(t), static_cast<int>(d)});
      }
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const Candidate& a, const Candidate& b) {
                if (a.dist != b.dist) return a.dist < b.dist;
                if (a.track != b.track) return a.track < b.track;
                return a.det < b.det;
              });

    std::vector<bool> track_used(tracks.size(), false);
    std::vector<int> det_track(dets.size(), -1);
    for (const Candidate& c : candidates) {
      if (track_used[static_cast<size_t>(c.track)] ||
          det_track[static_cast<size_t>(c.det)] >= 0)
        continue;
      track_used[static_cast<size_t>(c.track)] = true;
      det_track[static_cast<size_t>(c.det)] = c.track;
    }

    auto write_state = [&](Work& w, const DetectionBox& det, int det_idx) {
      ObjectState st;
      st.id = w.history.id;
      st.cls = det.cls;
      st.s = det.s;
      st.l = det.l;
      st.heading = det.heading;
      st.speed = det.speed;
      st.length = det.length;
      st.width = det.width;
      st.height = det.height;
      st.mass = default_mass(det.cls);
      if (w.last_idx >= 0) {
        const ObjectState& prev =
            w.history.states[static_cast<size_t>(w.last_idx)];
        st.accel = (st.speed - prev.speed) /
                   (static_cast<double>(f - w.last_idx) * dt);
      }
      w.history.states[static_cast<size_t>(f)] = st;
      w.history.valid[static_cast<size_t>(f)] = 1;
      w.history.source_index[static_cast<size_t>(f)] = det_idx;
      w.history.cls = det.cls;
      w.history.length = det.length;
      w.history.width = det.width;
      w.history.height = det.height;
      w.history.mass = default_mass(det.cls);
      w.last_idx = f;
    };

    for (size_t d = 0; d < dets.size(); ++d) {
      if (det_track[d] >= 0) {
        write_state(tracks[static_cast<size_t>(det_track[d])], dets[d],
                    static_cast<int>(d));
      } else {
        Work w;
        w.history.id = static_cast<int>(tracks.size());
        w.history.states.resize(static_cast<size_t>(n_frames));
        w.history.valid.assign(static_cast<size_t>(n_frames), 0);
        w.history.source_index.assign(static_cast<size_t>(n_frames), -1);
        tracks.push_back(std::move(w));
        write_state(tracks.back(), dets[d], static_cast<int>(d));
      }
    }
  }

  std::vector<TrackHistory> out;
  out.reserve(tracks.size());
  for (Work& w : tracks) out.push_back(std::move(w.history));
  return out;
}

// Displacement-based velocity estimate from the last two valid states;
// falls back to the reported speed along the reported heading.
inline Vector2d track_velocity(const TrackHistory& track, double dt) {
  const int last = track.last_valid();
  if (last < 0) throw std::invalid_argument("track has no valid state");
  const ObjectState& s_last = track.states[static_cast<size_t>(last)];
  for (int i = last - 1; i >= 0; --i) {
    if (track.valid[static_cast<size_t>(i)]) {
      return (s_last.position() -
              track.states[static_cast<size_t>(i)].position()) /
             (static_cast<double>(last - i) * dt);
    }
  }
  return s_last.velocity();
}

}  // namespace cooperrisk
