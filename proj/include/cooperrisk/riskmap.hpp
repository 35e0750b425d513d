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
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cooperrisk/prediction.hpp"
#include "cooperrisk/random.hpp"
#include "cooperrisk/types.hpp"

namespace cooperrisk {

struct RiskCoeffs {
  double c0 = 1.0;  // severity gain on delta-v squared
  double c1 = 1.0;  // severity floor
  double c2 = 1.0;  // longitudinal distance weight
  double c3 = 0.2;  // longitudinal reach growth per m/s of delta-v
  double c4 = 1.0;  // lateral distance weight
  double epsilon = 0.5;  // lower bound of the distance denominator
};

inline void validate(const RiskCoeffs& c) {
  if (c.c0 < 0.0 || c.c1 < 0.0 || c.c2 < 0.0 || c.c3 < 0.0 || c.c4 < 0.0)
    throw std::invalid_argument("risk coefficients must be >= 0");
  if (c.c2 + c.c4 <= 0.0)
    throw std::invalid_argument("at least one distance weight must be > 0");
  if (c.epsilon <= 0.0) throw std::invalid_argument("epsilon must be > 0");
}

// Candidate ego placement used when evaluating the field over a grid.
struct EgoHypothesis {
  double s = 0.0;
  double l = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  double mass = 1500.0;
};

// Velocity change the subject suffers if a participant of mass m_source
// moving at v_source hits it under approach angle alpha (angle between the
// two velocity directions).
inline double severity_delta_v(double m_source, double v_source,
                               double m_subject, double v_subject,
                               double alpha) {
  if (m_source <= 0.0 || m_subject <= 0.0)
    throw std::invalid_argument("masses must be > 0");
  const double rel_sq = v_source * v_source + v_subject * v_subject -
                        2.0 * v_source * v_subject * std::cos(alpha);
  return m_source / (m_source + m_subject) *
         std::sqrt(std::max(0.0, rel_sq));
}

// Difference of the two pseudo positions: each object's absolute position
// rotated into that object's own motion frame. The headings enter the two
// terms separately, so the offsets are translation-invariant only when the
// headings coincide; they are exactly equivariant under rotating the whole
// scene (positions and headings together).
inline Vector2d exposure_offsets(const EgoHypothesis& ego,
                                 const ObjectState& other) {
  return pseudo_rotate(Vector2d{ego.s, ego.l}, ego.heading) -
         pseudo_rotate(Vector2d{other.s, other.l}, other.heading);
}

// Risk the participant imposes on the ego hypothesis: collision severity
// scaled by an anisotropic inverse distance. The longitudinal axis is
// stretched by exp(c3 * delta_v), and the denominator never drops below
// epsilon.
inline double risk_value(const EgoHypothesis& ego, const ObjectState& other,
                         const RiskCoeffs& c) {
  const double alpha = normalize_angle(ego.heading - other.heading);
  const double dv = severity_delta_v(other.mass, other.speed, ego.mass,
                                     ego.speed, alpha);
  const Vector2d off = exposure_offsets(ego, other);
  const double stretched = off.x() / std::exp(c.c3 * dv);
  const double denom =
      std::max(c.epsilon, std::sqrt(c.c2 * stretched * stretched +
                                    c.c4 * off.y() * off.y()));
  return (c.c0 * dv * dv + c.c1) / denom;
}

// One Gaussian of the trajectory mixture, with the motion state attached.
struct GaussianComponent {
  double mean_x = 0.0;
  double mean_y = 0.0;
  double sigma_x = 1.0;
  double sigma_y = 1.0;
  double corr = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  double mass = 1500.0;

  static GaussianComponent from_mode(const TrajectoryDistribution& d, int m,
                                     int n, int k) {
    const size_t i = d.idx(m, n, k);
    return {d.mean_x[i],  d.mean_y[i], d.sigma_x[i],
            d.sigma_y[i], d.corr[i],   d.heading[i],
            d.speed[i],   d.object_mass[static_cast<size_t>(n)]};
  }
};

struct HierarchicalRiskStats {
  double mean = 0.0;
  double std_error = 0.0;
};

// Monte-Carlo expectation of risk_value over the participant position
// distribution. Deterministic for a given seed.
inline HierarchicalRiskStats hierarchical_risk_stats(
    const EgoHypothesis& ego, const GaussianComponent& comp,
    const RiskCoeffs& coeffs, int samples, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("samples must be >= 1");
  if (comp.sigma_x <= 0.0 || comp.sigma_y <= 0.0)
    throw std::invalid_argument("component sigmas must be > 0");
  if (std::abs(comp.corr) >= 1.0)
    throw std::invalid_argument("component correlation must be in (-1, 1)");
  RandomStream rng(seed);
  ObjectState other;
  other.heading = comp.heading;
  other.speed = comp.speed;
  other.mass = comp.mass;
  const double cy1 = comp.sigma_y * comp.corr;
  const double cy2 = comp.sigma_y * std::sqrt(1.0 - comp.corr * comp.corr);
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < samples; ++i) {
    double z0, z1;
    rng.normal_pair(z0, z1);
    other.s = comp.mean_x + comp.sigma_x * z0;
    other.l = comp.mean_y + cy1 * z0 + cy2 * z1;
    const double v = risk_value(ego, other, coeffs);
    sum += v;
    sum_sq += v * v;
  }
  HierarchicalRiskStats stats;
  stats.mean = sum / samples;
  if (samples > 1) {
    const double var =
        std::max(0.0, (sum_sq - sum * sum / samples) / (samples - 1));
    stats.std_error = std::sqrt(var / samples);
  }
  return stats;
}

inline double hierarchical_risk(const EgoHypothesis& ego,
                                const GaussianComponent& comp,
                                const RiskCoeffs& coeffs, int samples,
                                std::uint64_t seed) {
  return hierarchical_risk_stats(ego, comp, coeffs, samples, seed).mean;
}

struct GridSpec {
  double origin_x = -70.5;  // west edge [m]
  double origin_y = -40.0;  // south edge [m]
  double resolution = 0.5;  // [m per cell]
  int width = 282;          // cells along x
  int height = 160;         // cells along y

  // Symmetric 0.5 m grid covering the +-70.4 x +-40 evaluation range
  // (282 x 160 cells; 140.8 m is not an integer cell count, so the x span
  // rounds out to +-70.5).
  static GridSpec evaluation_default() { return GridSpec{}; }

  double cell_x(int i) const { return origin_x + (i + 0.5) * resolution; }
  double cell_y(int j) const { return origin_y + (j + 0.5) * resolution; }
  double x_max() const { return origin_x + width * resolution; }
  double y_max() const { return origin_y + height * resolution; }
  bool contains(double x, double y) const {
    return x >= origin_x && x <= x_max() && y >= origin_y && y <= y_max();
  }
};

inline void validate(const GridSpec& g) {
  if (g.width < 2 || g.height < 2)
    throw std::invalid_argument("grid must be at least 2x2");
  if (g.resolution <= 0.0)
    throw std::invalid_argument("grid resolution must be > 0");
}

struct RiskMapConfig {
  GridSpec grid = GridSpec::evaluation_default();
  RiskCoeffs coeffs;
  int samples = 64;        // Monte-Carlo draws per cell and layer
  double ego_speed = 0.0;  // frozen ego hypothesis used for every cell
  double ego_heading = 0.0;
  double ego_mass = 1500.0;
};

inline void validate(const RiskMapConfig& c) {
  validate(c.grid);
  validate(c.coeffs);
  if (c.samples < 1) throw std::invalid_argument("samples must be >= 1");
  if (c.ego_speed < 0.0) throw std::invalid_argument("ego speed must be >= 0");
  if (c.ego_mass <= 0.0) throw std::invalid_argument("ego mass must be > 0");
}

// Stack of per-timestamp risk rasters. Layer 0 rates the currently
// observed objects; layer k >= 1 rates prediction step k (horizon k*dt).
// Values are stored row-major, row j first.
class RiskMap {
 public:
  RiskMap() = default;
  RiskMap(const GridSpec& grid, int n_layers, double dt)
      : grid_(grid), dt_(dt) {
    validate(grid);
    if (n_layers < 1) throw std::invalid_argument("need at least one layer");
    layers_.assign(static_cast<size_t>(n_layers),
                   std::vector<double>(cells(), 0.0));
  }

  const GridSpec& grid() const { return grid_; }
  double dt() const { return dt_; }
  int layer_count() const { return static_cast<int>(layers_.size()); }
  size_t cells() const {
    return static_cast<size_t>(grid_.width) *
           static_cast<size_t>(grid_.height);
  }

  double& at(int layer, int i, int j) {
    return layers_[static_cast<size_t>(layer)]
                  [static_cast<size_t>(j) * grid_.width +
                   static_cast<size_t>(i)];
  }
  double at(int layer, int i, int j) const {
    return layers_[static_cast<size_t>(layer)]
                  [static_cast<size_t>(j) * grid_.width +
                   static_cast<size_t>(i)];
  }
  const std::vector<double>& layer(int k) const {
    return layers_[static_cast<size_t>(k)];
  }
  std::vector<double>& layer(int k) {
    return layers_[static_cast<size_t>(k)];
  }

  // Bilinear interpolation between cell centers, clamped at the border.
  double sample(int layer, double x, double y) const {
    double fx, fy;
    int i0, j0;
    locate(x, y, i0, j0, fx, fy);
    const double v00 = at(layer, i0, j0);
    const double v10 = at(layer, i0 + 1, j0);
    const double v01 = at(layer, i0, j0 + 1);
    const double v11 = at(layer, i0 + 1, j0 + 1);
    return (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) +
           fy * ((1.0 - fx) * v01 + fx * v11);
  }

  // Exact spatial gradient of the bilinear interpolant.
  Vector2d spatial_gradient(int layer, double x, double y) const {
    double fx, fy;
    int i0, j0;
    locate(x, y, i0, j0, fx, fy);
    const double v00 = at(layer, i0, j0);
    const double v10 = at(layer, i0 + 1, j0);
    const double v01 = at(layer, i0, j0 + 1);
    const double v11 = at(layer, i0 + 1, j0 + 1);
    const double inv = 1.0 / grid_.resolution;
    return {((1.0 - fy) * (v10 - v00) + fy * (v11 - v01)) * inv,
            ((1.0 - fx) * (v01 - v00) + fx * (v11 - v10)) * inv};
  }

  void write_binary(const std::string& path) const;
  static RiskMap read_binary(const std::string& path);
  void write_csv(const std::string& path_prefix) const;

 private:
  void locate(double x, double y, int& i0, int& j0, double& fx,
              double& fy) const {
    const double u =
        (x - grid_.origin_x) / grid_.resolution - 0.5;
    const double v =
        (y - grid_.origin_y) / grid_.resolution - 0.5;
    const double cu = std::clamp(u, 0.0, static_cast<double>(grid_.width - 1));
    const double cv =
        std::clamp(v, 0.0, static_cast<double>(grid_.height - 1));
    i0 = std::min(static_cast<int>(cu), grid_.width - 2);
    j0 = std::min(static_cast<int>(cv), grid_.height - 2);
    fx = std::clamp(cu - i0, 0.0, 1.0);
    fy = std::clamp(cv - j0, 0.0, 1.0);
  }

  GridSpec grid_;
  double dt_ = 0.5;
  std::vector<std::vector<double>> layers_;
};

namespace detail {

// Per-component constants of the risk integrand. The ego hypothesis keeps
// one heading for every cell, so the approach angle, severity, reach, and
// the component's pseudo-rotated mean and covariance factor depend only on
// the component; each cell then needs a single pseudo rotation by the ego
// heading. Rotating a Gaussian draw mean + L*z by the component heading is
// the same as drawing around the rotated mean with rotated factor columns.
struct ComponentEval {
  double pm_x, pm_y;  // pseudo-rotated mean
  double c0x, c0y;    // pseudo-rotated cholesky column for z0
  double c1x, c1y;    // pseudo-rotated cholesky column for z1
  double numerator;
  double inv_reach;
  double weight;
};

inline ComponentEval prepare_component(const GaussianComponent& comp,
                                       double weight,
                                       const RiskMapConfig& cfg) {
  ComponentEval e;
  const double ch = std::cos(comp.heading);
  const double sh = std::sin(comp.heading);
  const double cy1 = comp.sigma_y * comp.corr;
  const double cy2 = comp.sigma_y * std::sqrt(1.0 - comp.corr * comp.corr);
  e.pm_x = ch * comp.mean_x + sh * comp.mean_y;
  e.pm_y = -sh * comp.mean_x + ch * comp.mean_y;
  e.c0x = ch * comp.sigma_x + sh * cy1;
  e.c0y = -sh * comp.sigma_x + ch * cy1;
  e.c1x = sh * cy2;
  e.c1y = ch * cy2;
  const double alpha = normalize_angle(cfg.ego_heading - comp.heading);
  const double dv = severity_delta_v(comp.mass, comp.speed, cfg.ego_mass,
                                     cfg.ego_speed, alpha);
  e.numerator = cfg.coeffs.c0 * dv * dv + cfg.coeffs.c1;
  e.inv_reach = 1.0 / std::exp(cfg.coeffs.c3 * dv);
  e.weight = weight;
  return e;
}

}  // namespace detail

// Rasterizes the weighted expected risk of a trajectory distribution plus
// the currently observed objects. Layer 0 sums risk_value over
// `current_objects`; layer k >= 1 sums, over all mixture components at
// step k-1, weight * Monte-Carlo mean of risk_value under the component's
// position Gaussian. One set of `samples` unit draws per (cell, layer),
// keyed by (seed, layer, cell), is mapped through every component, which
// keeps the estimate linear in the weights and independent of component
// order.
inline RiskMap build_risk_map(const TrajectoryDistribution& dist,
                              const std::vector<ObjectState>& current_objects,
                              const RiskMapConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  validate(dist);
  RiskMap map(cfg.grid, dist.steps + 1, dist.dt);
  const RiskCoeffs& c = cfg.coeffs;
  const double eps = c.epsilon;
  const double ce = std::cos(cfg.ego_heading);
  const double se = std::sin(cfg.ego_heading);

  // Layer 0: point objects, no sampling.
  {
    std::vector<detail::ComponentEval> evals;
    evals.reserve(current_objects.size());
    for (const ObjectState& o : current_objects) {
      GaussianComponent comp{o.s, o.l, 1.0, 1.0, 0.0,
                             o.heading, o.speed, o.mass};
      evals.push_back(detail::prepare_component(comp, 1.0, cfg));
    }
    std::vector<double>& data = map.layer(0);
    for (int j = 0; j < cfg.grid.height; ++j) {
      const double y = cfg.grid.cell_y(j);
      for (int i = 0; i < cfg.grid.width; ++i) {
        const double x = cfg.grid.cell_x(i);
        const double px = ce * x + se * y;
        const double py = -se * x + ce * y;
        double acc = 0.0;
        for (const detail::ComponentEval& e : evals) {
          const double ds = (px - e.pm_x) * e.inv_reach;
          const double dl = py - e.pm_y;
          const double denom = std::max(
              eps, std::sqrt(c.c2 * ds * ds + c.c4 * dl * dl));
          acc += e.numerator / denom;
        }
        data[static_cast<size_t>(j) * cfg.grid.width +
             static_cast<size_t>(i)] = acc;
      }
    }
  }

  // Prediction layers.
  std::vector<detail::ComponentEval> evals;
  evals.reserve(static_cast<size_t>(dist.modes) *
                static_cast<size_t>(dist.objects));
  std::vector<double> zs(static_cast<size_t>(cfg.samples) * 2);
  const double inv_samples = 1.0 / static_cast<double>(cfg.samples);
  for (int k = 1; k <= dist.steps; ++k) {
    evals.clear();
    for (int n = 0; n < dist.objects; ++n) {
      for (int m = 0; m < dist.modes; ++m) {
        evals.push_back(detail::prepare_component(
            GaussianComponent::from_mode(dist, m, n, k - 1),
            dist.weight(m, n), cfg));
      }
    }
    std::vector<double>& data = map.layer(k);
    for (int j = 0; j < cfg.grid.height; ++j) {
      const double y = cfg.grid.cell_y(j);
      for (int i = 0; i < cfg.grid.width; ++i) {
        const double x = cfg.grid.cell_x(i);
        const double px = ce * x + se * y;
        const double py = -se * x + ce * y;
        const size_t cell = static_cast<size_t>(j) * cfg.grid.width +
                            static_cast<size_t>(i);
        RandomStream rng(derive_seed(
            seed, {static_cast<std::uint64_t>(k), cell}));
        for (int s = 0; s < cfg.samples; ++s)
          rng.normal_pair(zs[2 * static_cast<size_t>(s)],
                          zs[2 * static_cast<size_t>(s) + 1]);
        double acc = 0.0;
        for (const detail::ComponentEval& e : evals) {
          double comp_sum = 0.0;
          for (int s = 0; s < cfg.samples; ++s) {
            const double z0 = zs[2 * static_cast<size_t>(s)];
            const double z1 = zs[2 * static_cast<size_t>(s) + 1];
            const double ds =
                (px - (e.pm_x + e.c0x * z0 + e.c1x * z1)) * e.inv_reach;
            const double dl = py - (e.pm_y + e.c0y * z0 + e.c1y * z1);
            const double denom = std::max(
                eps, std::sqrt(c.c2 * ds * ds + c.c4 * dl * dl));
            comp_sum += e.numerator / denom;
          }
          acc += e.weight * comp_sum * inv_samples;
        }
        data[cell] = acc;
      }
    }
  }
  return map;
}

// Binary layout (little-endian): magic "CRSK", u16 version, u32 width,
// u32 height, f32 resolution, f32 origin_x, f32 origin_y, u16 layer
// count, then layer-major row-major f32 cell values.
inline void RiskMap::write_binary(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  auto put_u16 = [&](std::uint16_t v) {
    out.write(reinterpret_cast<const char*>(&v), 2);
  };
  auto put_u32 = [&](std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
  };
  auto put_f32 = [&](float v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
  };
  out.write("CRSK", 4);
  put_u16(1);
  put_u32(static_cast<std::uint32_t>(grid_.width));
  put_u32(static_cast<std::uint32_t>(grid_.height));
  put_f32(static_cast<float>(grid_.resolution));
  put_f32(static_cast<float>(grid_.origin_x));
  put_f32(static_cast<float>(grid_.origin_y));
  put_u16(static_cast<std::uint16_t>(layers_.size()));
  for (const std::vector<double>& layer : layers_) {
    for (double v : layer) put_f32(static_cast<float>(v));
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline RiskMap RiskMap::read_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open risk map: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "CRSK", 4) != 0)
    throw std::runtime_error("bad risk map magic in " + path);
  auto get_u16 = [&]() {
    std::uint16_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 2);
    return v;
  };
  auto get_u32 = [&]() {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  auto get_f32 = [&]() {
    float v = 0.0f;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  const std::uint16_t version = get_u16();
  if (version != 1)
    throw std::runtime_error("unsupported risk map version in " + path);
  GridSpec g;
  g.width = static_cast<int>(get_u32());
  g.height = static_cast<int>(get_u32());
  g.resolution = get_f32();
  g.origin_x = get_f32();
  g.origin_y = get_f32();
  const std::uint16_t n_layers = get_u16();
  RiskMap map(g, n_layers, 0.5);
  for (int k = 0; k < n_layers; ++k) {
    for (double& v : map.layer(k)) v = get_f32();
  }
  if (!in) throw std::runtime_error("truncated risk map file: " + path);
  return map;
}

// One CSV per layer named <prefix>_layer<k>.csv, row j per line from the
// south edge, columns west to east.
inline void RiskMap::write_csv(const std::string& path_prefix) const {
  for (size_t k = 0; k < layers_.size(); ++k) {
    const std::string path =
        path_prefix + "_layer" + std::to_string(k) + ".csv";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (int j = 0; j < grid_.height; ++j) {
      for (int i = 0; i < grid_.width; ++i) {
        if (i) out << ',';
        out << at(static_cast<int>(k), i, j);
      }
      out << '\n';
    }
  }
}

}  // namespace cooperrisk
