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

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cooperrisk/pipeline.hpp"
#include "cooperrisk/scenario_io.hpp"

namespace cooperrisk {
namespace {

constexpr int kExitOk = 0;
constexpr int kExitStageFailure = 1;
constexpr int kExitConfigError = 2;

// "pos=0.2,heading=0.01,dropout=0.05,delay=200" (keys optional).
NoiseProfile parse_noise(const std::string& text) {
  NoiseProfile n;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const size_t eq = item.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("noise entry needs key=value: " + item);
    const std::string key = item.substr(0, eq);
    const double value = std::stod(item.substr(eq + 1));
    if (key == "pos") {
      n.pos_sigma = value;
    } else if (key == "heading") {
      n.heading_sigma = value;
    } else if (key == "dropout") {
      n.dropout_prob = value;
    } else if (key == "delay") {
      n.delay_ms = value;
    } else {
      throw std::invalid_argument("unknown noise key: " + key);
    }
  }
  validate(n);
  return n;
}

// "x0,y0,resolution,width,height".
GridSpec parse_grid(const std::string& text) {
  std::stringstream ss(text);
  std::string item;
  std::vector<double> v;
  while (std::getline(ss, item, ',')) v.push_back(std::stod(item));
  if (v.size() != 5)
    throw std::invalid_argument("grid needs x0,y0,resolution,width,height");
  GridSpec g;
  g.origin_x = v[0];
  g.origin_y = v[1];
  g.resolution = v[2];
  g.width = static_cast<int>(v[3]);
  g.height = static_cast<int>(v[4]);
  return g;
}

// "lo:hi:step" inclusive of hi up to rounding.
std::vector<double> parse_range(const std::string& text) {
  std::stringstream ss(text);
  std::string item;
  std::vector<double> v;
  while (std::getline(ss, item, ':')) v.push_back(std::stod(item));
  if (v.size() != 3 || v[2] <= 0.0 || v[1] < v[0])
    throw std::invalid_argument("range needs lo:hi:step with step > 0");
  std::vector<double> levels;
  for (double x = v[0]; x <= v[1] + 1e-9; x += v[2]) levels.push_back(x);
  return levels;
}

ScenarioLog load_or_generate(const std::string& scenario, int density,
                             std::uint64_t seed, double duration) {
  if (std::filesystem::exists(scenario)) return load_scenario(scenario);
  return generate_scenario(template_from_string(scenario), density, seed,
                           duration);
}

void dump_fused(const std::vector<std::vector<DetectionBox>>& frames,
                const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << std::fixed << std::setprecision(6);
  for (size_t f = 0; f < frames.size(); ++f) {
    out << "frame " << f << " detections " << frames[f].size() << "\n";
    for (const DetectionBox& d : frames[f]) {
      out << "  id=" << d.id << " cls=" << to_string(d.cls) << " s=" << d.s
          << " l=" << d.l << " heading=" << d.heading << " speed=" << d.speed
          << " conf=" << d.confidence << " src=" << d.source_agent
          << " captured=" << d.timestamp << "\n";
    }
  }
}

void dump_prediction(const TrajectoryDistribution& d,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << std::fixed << std::setprecision(6);
  out << "objects " << d.objects << " modes " << d.modes << " steps "
      << d.steps << " dt " << d.dt << "\n";
  for (int n = 0; n < d.objects; ++n) {
    out << "object " << d.object_ids[static_cast<size_t>(n)] << " cls="
        << to_string(d.object_cls[static_cast<size_t>(n)]) << "\n";
    for (int m = 0; m < d.modes; ++m) {
      out << "  mode " << m << " weight=" << d.weight(m, n) << "\n";
      for (int k = 0; k < d.steps; ++k) {
        const size_t i = d.idx(m, n, k);
        out << "    k=" << k << " mean=(" << d.mean_x[i] << "," << d.mean_y[i]
            << ") sigma=(" << d.sigma_x[i] << "," << d.sigma_y[i]
            << ") corr=" << d.corr[i] << "\n";
      }
    }
  }
}

double metric_value(const Report& r, const std::string& metric, bool& valid) {
  valid = true;
  if (metric == "epa") {
    valid = r.epa.has_value();
    return valid ? *r.epa : 0.0;
  }
  if (metric == "ap") {
    valid = r.ap.has_value();
    return valid ? *r.ap : 0.0;
  }
  if (metric == "min_ade") {
    valid = r.min_ade.has_value();
    return valid ? *r.min_ade : 0.0;
  }
  if (metric == "min_fde") {
    valid = r.min_fde.has_value();
    return valid ? *r.min_fde : 0.0;
  }
  if (metric == "tor") return r.tor;
  if (metric == "cr") return r.collision ? 1.0 : 0.0;
  throw std::invalid_argument("unknown metric: " + metric);
}

struct RunOptions {
  std::string scenario = "crossing";
  std::uint64_t seed = 1;
  int density = 4;
  double duration = 8.0;
  std::string perception = "v2x";
  std::string predictor = "multimodal";
  std::string noise;
  std::string grid;
  int samples = 64;
  int planner_horizon = 10;
  int planner_iters = 200;
  std::string gradient_mode = "analytic-standard";
  std::string out_dir;
  std::string riskmap_out;
  bool dump_fused_flag = false;
  bool dump_prediction_flag = false;
};

PipelineConfig build_config(const RunOptions& opt) {
  PipelineConfig cfg;
  cfg.perception = perception_from_string(opt.perception);
  cfg.predictor = predictor_from_string(opt.predictor);
  if (!opt.noise.empty()) cfg.noise_override = parse_noise(opt.noise);
  if (!opt.grid.empty()) cfg.riskmap.grid = parse_grid(opt.grid);
  cfg.riskmap.samples = opt.samples;
  cfg.planner.horizon = opt.planner_horizon;
  cfg.planner.max_iterations = opt.planner_iters;
  cfg.planner.gradient_mode = gradient_mode_from_string(opt.gradient_mode);
  return cfg;
}

int cmd_run(const RunOptions& opt) {
  const ScenarioLog scn =
      load_or_generate(opt.scenario, opt.density, opt.seed, opt.duration);
  const PipelineConfig cfg = build_config(opt);
  PipelineOutputs out = run_pipeline(scn, cfg);

  if (!opt.out_dir.empty()) {
    const std::filesystem::path dir(opt.out_dir);
    std::filesystem::create_directories(dir);
    out.report.artifacts["plan"] = "plan.csv";
    write_plan_csv(out.plan, cfg.planner.dt, (dir / "plan.csv").string());
    out.report.artifacts["riskmap"] = "riskmap.bin";
    out.risk_map.write_binary((dir / "riskmap.bin").string());
    if (opt.dump_fused_flag) {
      out.report.artifacts["fused"] = "fused_detections.txt";
      dump_fused(out.fused_frames, (dir / "fused_detections.txt").string());
    }
    if (opt.dump_prediction_flag) {
      out.report.artifacts["prediction"] = "prediction.txt";
      dump_prediction(out.prediction, (dir / "prediction.txt").string());
    }
    out.report.artifacts["report"] = "report.json";
    write_report(out.report, (dir / "report.json").string());
  }
  if (!opt.riskmap_out.empty()) {
    const std::filesystem::path dir(opt.riskmap_out);
    std::filesystem::create_directories(dir);
    out.risk_map.write_csv((dir / "riskmap").string());
  }
  std::cout << serialize_report(out.report);
  return kExitOk;
}

struct SweepOptions {
  std::string scenario = "crossing";
  int seeds = 20;
  int density = 4;
  std::string perception = "v2x";
  std::string predictor = "multimodal";
  std::string noise_grid;
  std::string delay_grid;
  std::string metric = "epa";
  std::string out_file;
  std::string grid;
  int samples = 64;
};

int cmd_sweep(const SweepOptions& opt) {
  if (opt.noise_grid.empty() == opt.delay_grid.empty())
    throw std::invalid_argument(
        "exactly one of --noise-grid and --delay-grid is required");
  if (opt.seeds < 1) throw std::invalid_argument("--seeds must be >= 1");

  std::string axis;
  std::vector<double> levels;
  if (!opt.noise_grid.empty()) {
    const size_t eq = opt.noise_grid.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--noise-grid needs axis=lo:hi:step");
    axis = opt.noise_grid.substr(0, eq);
    if (axis != "pos" && axis != "heading" && axis != "dropout")
      throw std::invalid_argument("unknown noise axis: " + axis);
    levels = parse_range(opt.noise_grid.substr(eq + 1));
  } else {
    axis = "delay";
    levels = parse_range(opt.delay_grid);
  }

  PipelineConfig cfg;
  cfg.perception = perception_from_string(opt.perception);
  cfg.predictor = predictor_from_string(opt.predictor);
  if (!opt.grid.empty()) cfg.riskmap.grid = parse_grid(opt.grid);
  cfg.riskmap.samples = opt.samples;
  // Risk maps and planning only matter when the swept metric reads them.
  cfg.run_planner = opt.metric == "cr";

  const TemplateKind kind = template_from_string(opt.scenario);
  std::ostringstream csv;
  csv << std::setprecision(17);
  csv << axis << ",mean_" << opt.metric << ",valid_scenarios\n";
  for (const double level : levels) {
    NoiseProfile noise;
    if (axis == "pos") noise.pos_sigma = level;
    if (axis == "heading") noise.heading_sigma = level;
    if (axis == "dropout") noise.dropout_prob = level;
    if (axis == "delay") noise.delay_ms = level;
    cfg.noise_override = noise;
    double sum = 0.0;
    int valid_count = 0;
    for (int seed = 1; seed <= opt.seeds; ++seed) {
      const ScenarioLog scn = generate_scenario(
          kind, opt.density, static_cast<std::uint64_t>(seed));
      const Report rep = run_pipeline(scn, cfg).report;
      bool valid = false;
      const double value = metric_value(rep, opt.metric, valid);
      if (valid) {
        sum += value;
        ++valid_count;
      }
    }
    csv << level << ','
        << (valid_count > 0 ? sum / valid_count : 0.0) << ','
        << valid_count << '\n';
  }
  if (opt.out_file.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream out(opt.out_file, std::ios::binary);
    if (!out)
      throw std::runtime_error("cannot open for writing: " + opt.out_file);
    out << csv.str();
  }
  return kExitOk;
}

struct Aggregate {
  int count = 0;
  double ap_sum = 0.0;
  int ap_n = 0;
  double ade_sum = 0.0, fde_sum = 0.0;
  int ade_n = 0;
  double epa_sum = 0.0;
  int epa_n = 0;
  double tor_sum = 0.0;
  int collisions = 0;
};

int cmd_report(const std::string& dir) {
  if (!std::filesystem::is_directory(dir))
    throw std::invalid_argument("not a directory: " + dir);
  std::vector<std::filesystem::path> files;
  for (const auto& entry :
       std::filesystem::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::map<std::string, Aggregate> groups;
  for (const auto& path : files) {
    std::ifstream in(path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception&) {
      continue;  // not a report
    }
    if (!j.contains("metrics") || !j.contains("perception")) continue;
    const std::string key = j.at("perception").get<std::string>() + "/" +
                            j.at("predictor").get<std::string>();
    Aggregate& a = groups[key];
    ++a.count;
    const auto& m = j.at("metrics");
    if (!m.at("ap").is_null()) {
      a.ap_sum += m.at("ap").get<double>();
      ++a.ap_n;
    }
    if (!m.at("min_ade").is_null()) {
      a.ade_sum += m.at("min_ade").get<double>();
      a.fde_sum += m.at("min_fde").get<double>();
      ++a.ade_n;
    }
    if (!m.at("epa").is_null()) {
      a.epa_sum += m.at("epa").get<double>();
      ++a.epa_n;
    }
    a.tor_sum += m.at("tor").get<double>();
    if (m.at("collision").get<bool>()) ++a.collisions;
  }
  if (groups.empty()) {
    std::cout << "no reports found under " << dir << "\n";
    return kExitOk;
  }
  std::cout << std::left << std::setw(24) << "perception/predictor"
            << std::right << std::setw(6) << "n" << std::setw(9) << "AP"
            << std::setw(9) << "minADE" << std::setw(9) << "minFDE"
            << std::setw(9) << "EPA" << std::setw(9) << "TOR"
            << std::setw(9) << "CR" << "\n";
  std::cout << std::fixed << std::setprecision(4);
  for (const auto& [key, a] : groups) {
    auto cell = [](double sum, int n) {
      return n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN();
    };
    std::cout << std::left << std::setw(24) << key << std::right
              << std::setw(6) << a.count << std::setw(9)
              << cell(a.ap_sum, a.ap_n) << std::setw(9)
              << cell(a.ade_sum, a.ade_n) << std::setw(9)
              << cell(a.fde_sum, a.ade_n) << std::setw(9)
              << cell(a.epa_sum, a.epa_n) << std::setw(9)
              << a.tor_sum / a.count << std::setw(9)
              << static_cast<double>(a.collisions) / a.count << "\n";
  }
  return kExitOk;
}

int run_cli(int argc, char** argv) {
  CLI::App app{
      "cooperative-perception driving risk maps, prediction, and planning"};
  app.require_subcommand(1);

  RunOptions run_opt;
  CLI::App* run = app.add_subcommand(
      "run", "run one scenario through the full pipeline");
  run->add_option("--scenario", run_opt.scenario,
                  "scenario template name or path to a scenario JSON file");
  run->add_option("--seed", run_opt.seed, "scenario generation seed");
  run->add_option("--density", run_opt.density,
                  "background objects for generated scenarios");
  run->add_option("--duration", run_opt.duration,
                  "generated scenario length [s]");
  run->add_option("--perception", run_opt.perception,
                  "gt, v2x, or ego_only");
  run->add_option("--predictor", run_opt.predictor, "cv or multimodal");
  run->add_option("--noise", run_opt.noise,
                  "sensor noise override pos=S,heading=S,dropout=P,delay=MS");
  run->add_option("--grid", run_opt.grid,
                  "risk grid x0,y0,resolution,width,height");
  run->add_option("--samples", run_opt.samples,
                  "Monte Carlo samples per cell");
  run->add_option("--planner-horizon", run_opt.planner_horizon,
                  "control steps");
  run->add_option("--planner-iters", run_opt.planner_iters,
                  "max optimizer iterations");
  run->add_option("--gradient-mode", run_opt.gradient_mode,
                  "analytic-standard, as-written, or finite-difference");
  run->add_option("--out", run_opt.out_dir,
                  "directory for report.json, plan.csv, riskmap.bin");
  run->add_option("--riskmap-out", run_opt.riskmap_out,
                  "directory for per-layer risk map CSVs");
  run->add_flag("--dump-fused", run_opt.dump_fused_flag,
                "write fused detections per frame (needs --out)");
  run->add_flag("--dump-prediction", run_opt.dump_prediction_flag,
                "write the trajectory distribution (needs --out)");

  SweepOptions sweep_opt;
  CLI::App* sweep = app.add_subcommand(
      "sweep", "batch-run seeds over a noise axis and emit metric CSV");
  sweep->add_option("--scenario", sweep_opt.scenario,
                    "scenario template name");
  sweep->add_option("--seeds", sweep_opt.seeds,
                    "number of seeds per level (1..N)");
  sweep->add_option("--density", sweep_opt.density, "background objects");
  sweep->add_option("--perception", sweep_opt.perception,
                    "gt, v2x, or ego_only");
  sweep->add_option("--predictor", sweep_opt.predictor, "cv or multimodal");
  sweep->add_option("--noise-grid", sweep_opt.noise_grid,
                    "axis=lo:hi:step with axis pos, heading, or dropout");
  sweep->add_option("--delay-grid", sweep_opt.delay_grid,
                    "lo:hi:step in milliseconds");
  sweep->add_option("--metric", sweep_opt.metric,
                    "epa, ap, min_ade, min_fde, tor, or cr");
  sweep->add_option("--grid", sweep_opt.grid,
                    "risk grid x0,y0,resolution,width,height (cr only)");
  sweep->add_option("--samples", sweep_opt.samples,
                    "Monte Carlo samples per cell (cr only)");
  sweep->add_option("--out", sweep_opt.out_file,
                    "CSV output path (default stdout)");

  std::string report_dir;
  CLI::App* report = app.add_subcommand(
      "report", "aggregate report.json files into a summary table");
  report->add_option("dir", report_dir, "directory to scan")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  if (run->parsed()) return cmd_run(run_opt);
  if (sweep->parsed()) return cmd_sweep(sweep_opt);
  return cmd_report(report_dir);
}

}  // namespace
}  // namespace cooperrisk

int main(int argc, char** argv) {
  try {
    return cooperrisk::run_cli(argc, argv);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return cooperrisk::kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cooperrisk::kExitStageFailure;
  }
}
