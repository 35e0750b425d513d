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
#include <array>
#include <cmath>
#include <vector>

namespace cooperrisk {

using Eigen::Vector2d;

// Wraps an angle to (-pi, pi]. In-range values pass through unchanged.
inline double normalize_angle(double a) {
  if (a > -M_PI && a <= M_PI) return a;
  double r = std::fmod(a + M_PI, 2.0 * M_PI);
  if (r <= 0.0) r += 2.0 * M_PI;
  return r - M_PI;
}

// Rotates a point by -heading: [cos(h)x + sin(h)y, -sin(h)x + cos(h)y].
// Applied to world offsets it yields coordinates in the frame whose x axis
// points along `heading`.
inline Vector2d pseudo_rotate(const Vector2d& p, double heading) {
  const double c = std::cos(heading);
  const double s = std::sin(heading);
  return {c * p.x() + s * p.y(), -s * p.x() + c * p.y()};
}

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;

  Vector2d position() const { return {x, y}; }
};

inline Vector2d world_to_local(const Vector2d& p, const Pose& frame) {
  return pseudo_rotate(p - frame.position(), frame.heading);
}

inline Vector2d local_to_world(const Vector2d& p, const Pose& frame) {
  const double c = std::cos(frame.heading);
  const double s = std::sin(frame.heading);
  return {frame.x + c * p.x() - s * p.y(), frame.y + s * p.x() + c * p.y()};
}

inline double heading_to_local(double heading, const Pose& frame) {
  return normalize_angle(heading - frame.heading);
}

inline double heading_to_world(double heading, const Pose& frame) {
  return normalize_angle(heading + frame.heading);
}

// Axis-aligned-free rectangle: center, heading of the long axis, extents.
struct OrientedBox {
  Vector2d center{0.0, 0.0};
  double heading = 0.0;
  double length = 0.0;  // extent along heading
  double width = 0.0;   // lateral extent

  double area() const { return length * width; }

  // Corners in counterclockwise order.
  std::array<Vector2d, 4> corners() const {
    const double c = std::cos(heading);
    const double s = std::sin(heading);
    const Vector2d u{c * 0.5 * length, s * 0.5 * length};
    const Vector2d v{-s * 0.5 * width, c * 0.5 * width};
    return {center + u + v, center - u + v, center - u - v, center + u - v};
  }
};

namespace detail {

inline double cross2(const Vector2d& a, const Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

// Clips a convex polygon against the half plane left of edge a->b.
inline std::vector<Vector2d> clip_half_plane(const std::vector<Vector2d>& poly,
                                             const Vector2d& a,
                                             const Vector2d& b) {
  std::vector<Vector2d> out;
  out.reserve(poly.size() + 1);
  const size_t n = poly.size();
  for (size_t i = 0; i < n; ++i) {
    const Vector2d& p = poly[i];
    const Vector2d& q = poly[(i + 1) % n];
    const double dp = cross2(b - a, p - a);
    const double dq = cross2(b - a, q - a);
    if (dp >= 0.0) out.push_back(p);
    if ((dp > 0.0 && dq < 0.0) || (dp < 0.0 && dq > 0.0)) {
      const double t = dp / (dp - dq);
      out.push_back(p + t * (q - p));
    }
  }
  return out;
}

inline double polygon_area(const std::vector<Vector2d>& poly) {
  if (poly.size() < 3) return 0.0;
  double twice = 0.0;
  for (size_t i = 0; i < poly.size(); ++i) {
    const Vector2d& p = poly[i];
    const Vector2d& q = poly[(i + 1) % poly.size()];
    twice += cross2(p, q);
  }
  return 0.5 * std::abs(twice);
}

}  // namespace detail

// Exact intersection test via separating axes. Touching boxes count as
// intersecting; the difference is measure zero for the simulated traffic.
inline bool obb_intersects(const OrientedBox& a, const OrientedBox& b) {
  const double ca = std::cos(a.heading), sa = std::sin(a.heading);
  const double cb = std::cos(b.heading), sb = std::sin(b.heading);
  const Vector2d ua{ca, sa}, va{-sa, ca};
  const Vector2d ub{cb, sb}, vb{-sb, cb};
  const Vector2d d = b.center - a.center;
  const std::array<Vector2d, 4> axes{ua, va, ub, vb};
  for (const Vector2d& axis : axes) {
    const double ra = 0.5 * a.length * std::abs(axis.dot(ua)) +
                      0.5 * a.width * std::abs(axis.dot(va));
    const double rb = 0.5 * b.length * std::abs(axis.dot(ub)) +
                      0.5 * b.width * std::abs(axis.dot(vb));
    if (std::abs(axis.dot(d)) > ra + rb) return false;
  }
  return true;
}

// Exact polygon-clipping intersection over union in [0, 1].
inline double obb_iou(const OrientedBox& a, const OrientedBox& b) {
  const double area_a = a.area();
  const double area_b = b.area();
  if (area_a <= 0.0 || area_b <= 0.0) return 0.0;
  const auto ca = a.corners();
  const auto cb = b.corners();
  std::vector<Vector2d> poly(ca.begin(), ca.end());
  for (int i = 0; i < 4 && !poly.empty(); ++i) {
    poly = detail::clip_half_plane(poly, cb[i], cb[(i + 1) % 4]);
  }
  const double inter = detail::polygon_area(poly);
  const double uni = area_a + area_b - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace cooperrisk
