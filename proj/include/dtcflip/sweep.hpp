#pragma once

#include <cstdint>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dtcflip/analysis.hpp"
#include "dtcflip/drive.hpp"
#include "dtcflip/odm.hpp"
#include "dtcflip/po.hpp"

namespace dtcflip {

inline constexpr int kSchemaVersion = 1;

/// Preparation / relaxation / measurement windows, in driving periods.
struct ScheduleConstants {
  double prep_cycles = 100.0;
  double relax_cycles = 100.0;
  double measure_cycles = 20.0;
  double before_window_start = -22.0;  // relative to the defect onset, in T_d
  double before_window_end = -2.0;
  double tail_cycles = 3.0;            // slack so the sliding window fits past the end

  void validate() const {
    if (prep_cycles <= 0 || relax_cycles <= 0 || measure_cycles <= 0)
      throw std::invalid_argument("ScheduleConstants: cycles must be positive");
  }
};

enum class ModelKind { po, odm };

/// One simulated system: model choice, physics, drive, and stepping.
struct ModelConfig {
  ModelKind kind = ModelKind::po;

  // pendulum
  double Omega = 1.0;
  double gamma = 0.1;
  double Ttilde = 0.0;

  // open Dicke model
  double omega = 1.0;
  double omega0 = 1.0;
  double kappa = 1.0;
  double lambda0 = 0.0;
  std::size_t N = 1;
  ODMMethod method = ODMMethod::mean_field;
  bool initial_noise_only = false;

  // drive
  double omega_d = 2.0;
  double A = 0.0;
  DefectSpec defect;

  double dt = 0.01;
  std::size_t sample_stride = 5;

  double driving_period() const { return 2.0 * std::numbers::pi / omega_d; }
};

struct GridAxis {
  std::string name;  // T_delta | T_r | A | Ttilde | N | omega_d | omega_prime | theta_f | theta_D
  std::vector<double> values;
};

struct SweepPlan {
  ModelConfig base;
  std::vector<GridAxis> axes;
  std::size_t n_traj = 1;
  std::uint64_t master_seed = 0;
  ScheduleConstants sched;

  void validate() const {
    if (n_traj < 1) throw std::invalid_argument("SweepPlan: n_traj >= 1");
    for (const auto& ax : axes)
      if (ax.values.empty()) throw std::invalid_argument("SweepPlan: empty axis");
    sched.validate();
  }

  std::size_t n_cells() const {
    std::size_t n = 1;
    for (const auto& ax : axes) n *= ax.values.size();
    return n;
  }
};

inline void apply_axis(ModelConfig& cfg, const std::string& name, double value) {
  if (name == "T_delta") cfg.defect.T_delta = value;
  else if (name == "T_r") cfg.defect.T_r = value;
  else if (name == "A") cfg.A = value;
  else if (name == "Ttilde") cfg.Ttilde = value;
  else if (name == "N") cfg.N = static_cast<std::size_t>(std::llround(value));
  else if (name == "omega_d") cfg.omega_d = value;
  else if (name == "omega_prime") cfg.defect.omega_prime = value;
  else if (name == "theta_f") cfg.defect.theta_f = value;
  else if (name == "theta_D") cfg.defect.theta_D = value;
  else throw std::invalid_argument("unknown sweep axis: " + name);
}

/// Deterministic per-trajectory stream id from (cell, trajectory) indices.
inline std::uint64_t trajectory_stream_id(std::size_t cell_index,
                                          std::size_t traj_index) {
  return (static_cast<std::uint64_t>(cell_index) << 32) |
         static_cast<std::uint64_t>(traj_index);
}

/// prepare -> defect at t = 0 -> relax -> measure, for a single trajectory.
inline FlipOutcome run_flip_trajectory(const ModelConfig& cfg,
                                       const ScheduleConstants& sched,
                                       NoiseStream& stream) {
  const double Td = cfg.driving_period();
  const double t_de = defect_end(cfg.defect);
  const DriveProtocol protocol = make_protocol(cfg.defect, cfg.omega_d, cfg.A);

  StepperConfig step;
  step.dt = cfg.dt;
  step.sample_stride = cfg.sample_stride;
  step.t_start = -sched.prep_cycles * Td;
  step.t_end =
      t_de + (sched.relax_cycles + sched.measure_cycles + sched.tail_cycles) * Td;

  Trajectory traj;
  if (cfg.kind == ModelKind::po) {
    POParams p;
    p.Omega = cfg.Omega;
    p.gamma = cfg.gamma;
    p.Ttilde = cfg.Ttilde;
    p.protocol = protocol;
    traj = simulate_po(p, step, stream);
  } else {
    ODMParams p;
    p.omega = cfg.omega;
    p.omega0 = cfg.omega0;
    p.kappa = cfg.kappa;
    p.lambda0 = cfg.lambda0;
    p.N = cfg.N;
    p.method = cfg.method;
    p.initial_noise_only = cfg.initial_noise_only;
    p.protocol = protocol;
    traj = simulate_odm(p, step, stream);
  }

  if (traj.diverged) {
    FlipOutcome out;
    out.diverged = true;
    return out;
  }
  const PhaseSeries ps = complex_amplitude(traj.times, traj.x, 0.5 * cfg.omega_d);
  return flip_outcome(ps, sched.before_window_start * Td, sched.before_window_end * Td,
                      t_de + sched.relax_cycles * Td,
                      t_de + (sched.relax_cycles + sched.measure_cycles) * Td);
}

/// One grid cell: per-trajectory outcomes plus the aggregates over them.
struct EnsembleResult {
  std::size_t cell_index = 0;
  std::vector<std::string> coord_names;
  std::vector<double> coords;
  std::vector<FlipOutcome> outcomes;
  SwitchingProbability ps;
  WindingHistogram pw;
  std::uint64_t master_seed = 0;

  void aggregate() {
    ps = switching_probability(outcomes);
    pw = winding_histogram(outcomes);
  }
};

inline EnsembleResult run_point(const SweepPlan& plan, std::size_t cell_index,
                                std::span<const double> coords,
                                unsigned n_workers = 1) {
  plan.validate();
  if (coords.size() != plan.axes.size())
    throw std::invalid_argument("run_point: coordinate arity mismatch");

  ModelConfig cfg = plan.base;
  EnsembleResult res;
  res.cell_index = cell_index;
  res.master_seed = plan.master_seed;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    apply_axis(cfg, plan.axes[i].name, coords[i]);
    res.coord_names.push_back(plan.axes[i].name);
    res.coords.push_back(coords[i]);
  }

  res.outcomes.resize(plan.n_traj);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      NoiseStream stream(plan.master_seed, trajectory_stream_id(cell_index, k));
      res.outcomes[k] = run_flip_trajectory(cfg, plan.sched, stream);
    }
  };

  const unsigned workers =
      std::max(1u, std::min<unsigned>(n_workers, static_cast<unsigned>(plan.n_traj)));
  if (workers == 1) {
    work(0, plan.n_traj);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (plan.n_traj + workers - 1) / workers;
    for (unsigned wk = 0; wk < workers; ++wk) {
      const std::size_t b = wk * chunk;
      const std::size_t e = std::min(plan.n_traj, b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }

  std::size_t n_valid = 0;
  for (const auto& o : res.outcomes)
    if (!o.diverged) ++n_valid;
  if (n_valid == 0) throw std::runtime_error("run_point: all trajectories diverged");
  res.aggregate();
  return res;
}

/// Cartesian iteration over the plan grid (row-major over axes).
inline std::vector<std::vector<double>> grid_points(const SweepPlan& plan) {
  std::vector<std::vector<double>> pts{{}};
  for (const auto& ax : plan.axes) {
    std::vector<std::vector<double>> next;
    for (const auto& p : pts)
      for (double v : ax.values) {
        auto q = p;
        q.push_back(v);
        next.push_back(std::move(q));
      }
    pts = std::move(next);
  }
  return pts;
}

inline std::vector<EnsembleResult> run_plan(const SweepPlan& plan,
                                            unsigned n_workers = 1) {
  const auto pts = grid_points(plan);
  std::vector<EnsembleResult> out;
  out.reserve(pts.size());
  for (std::size_t c = 0; c < pts.size(); ++c)
    out.push_back(run_point(plan, c, pts[c], n_workers));
  return out;
}

/// Noiseless single-trajectory flip map over a T_delta x A grid.
struct DiagramResult {
  std::vector<double> axis1;  // T_delta values
  std::vector<double> axis2;  // A values
  std::vector<std::vector<double>> dphi;   // [axis1][axis2]
  std::vector<std::vector<int>> flipped;   // -1 = unreliable / no DTC
};

inline DiagramResult bitflip_diagram(const SweepPlan& plan, unsigned n_workers = 1) {
  if (plan.axes.size() != 2)
    throw std::invalid_argument("bitflip_diagram: need exactly two axes");
  DiagramResult d;
  d.axis1 = plan.axes[0].values;
  d.axis2 = plan.axes[1].values;
  d.dphi.assign(d.axis1.size(), std::vector<double>(d.axis2.size(), 0.0));
  d.flipped.assign(d.axis1.size(), std::vector<int>(d.axis2.size(), 0));

  struct Cell { std::size_t i, j; };
  std::vector<Cell> cells;
  for (std::size_t i = 0; i < d.axis1.size(); ++i)
    for (std::size_t j = 0; j < d.axis2.size(); ++j) cells.push_back({i, j});

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t c = begin; c < end; ++c) {
      const auto [i, j] = cells[c];
      ModelConfig cfg = plan.base;
      apply_axis(cfg, plan.axes[0].name, d.axis1[i]);
      apply_axis(cfg, plan.axes[1].name, d.axis2[j]);
      NoiseStream stream(plan.master_seed, trajectory_stream_id(c, 0));
      const FlipOutcome o = run_flip_trajectory(cfg, plan.sched, stream);
      d.dphi[i][j] = o.dphi;
      d.flipped[i][j] = (o.diverged || o.unreliable) ? -1 : (o.flipped ? 1 : 0);
    }
  };
  const unsigned workers = std::max(1u, n_workers);
  if (workers == 1) {
    work(0, cells.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (cells.size() + workers - 1) / workers;
    for (unsigned wk = 0; wk < workers; ++wk) {
      const std::size_t b = wk * chunk;
      const std::size_t e = std::min(cells.size(), b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }
  return d;
}

/// Mean-field max-d^2 map over the same grid shape as bitflip_diagram.
inline DiagramResult decorrelator_map(const SweepPlan& plan, unsigned n_workers = 1) {
  if (plan.axes.size() != 2)
    throw std::invalid_argument("decorrelator_map: need exactly two axes");
  DiagramResult d;
  d.axis1 = plan.axes[0].values;
  d.axis2 = plan.axes[1].values;
  d.dphi.assign(d.axis1.size(), std::vector<double>(d.axis2.size(), 0.0));
  d.flipped.assign(d.axis1.size(), std::vector<int>(d.axis2.size(), 0));

  struct Cell { std::size_t i, j; };
  std::vector<Cell> cells;
  for (std::size_t i = 0; i < d.axis1.size(); ++i)
    for (std::size_t j = 0; j < d.axis2.size(); ++j) cells.push_back({i, j});

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t c = begin; c < end; ++c) {
      const auto [i, j] = cells[c];
      ModelConfig cfg = plan.base;
      apply_axis(cfg, plan.axes[0].name, d.axis1[i]);
      apply_axis(cfg, plan.axes[1].name, d.axis2[j]);
      ODMParams base;
      base.omega = cfg.omega;
      base.omega0 = cfg.omega0;
      base.kappa = cfg.kappa;
      base.lambda0 = cfg.lambda0;
      const DecorrelatorResult r = decorrelator_run(
          base, cfg.defect, cfg.omega_d, cfg.A, kDecorrelatorEpsA,
          kDecorrelatorEpsAmp, plan.sched.prep_cycles, plan.sched.relax_cycles);
      d.dphi[i][j] = r.max_d2;  // reuse the value matrix for max d^2
      d.flipped[i][j] = r.diverged ? -1 : (r.max_d2 >= 0.1 ? 1 : 0);
    }
  };
  const unsigned workers = std::max(1u, n_workers);
  if (workers == 1) {
    work(0, cells.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (cells.size() + workers - 1) / workers;
    for (unsigned wk = 0; wk < workers; ++wk) {
      const std::size_t b = wk * chunk;
      const std::size_t e = std::min(cells.size(), b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }
  return d;
}

/// One-axis sweep returning plot-ready rows.
struct CurvePoint {
  double value = 0.0;
  SwitchingProbability ps;
  WindingHistogram pw;
};

inline std::vector<CurvePoint> curve(const SweepPlan& plan, unsigned n_workers = 1) {
  if (plan.axes.size() != 1)
    throw std::invalid_argument("curve: need exactly one axis");
  std::vector<CurvePoint> out;
  for (std::size_t c = 0; c < plan.axes[0].values.size(); ++c) {
    const double v = plan.axes[0].values[c];
    EnsembleResult r = run_point(plan, c, std::span<const double>(&v, 1), n_workers);
    out.push_back({v, r.ps, r.pw});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence: CSV long format + JSON metadata sidecar.

inline std::uint64_t plan_fingerprint(const SweepPlan& plan) {
  std::ostringstream os;
  os.precision(17);
  const auto& b = plan.base;
  os << static_cast<int>(b.kind) << '|' << b.Omega << '|' << b.gamma << '|'
     << b.Ttilde << '|' << b.omega << '|' << b.omega0 << '|' << b.kappa << '|'
     << b.lambda0 << '|' << b.N << '|' << static_cast<int>(b.method) << '|'
     << b.initial_noise_only << '|' << b.omega_d << '|' << b.A << '|'
     << to_string(b.defect.kind) << '|' << b.defect.T_delta << '|' << b.defect.T_r
     << '|' << b.defect.omega_prime << '|' << b.defect.theta_D << '|'
     << b.defect.theta_f << '|' << b.dt << '|' << b.sample_stride << '|'
     << plan.n_traj << '|' << plan.master_seed;
  for (const auto& ax : plan.axes) {
    os << '|' << ax.name;
    for (double v : ax.values) os << ',' << v;
  }
  const std::string s = os.str();
  std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline void persist(const EnsembleResult& res, const std::string& path) {
  std::ofstream csv(path);
  if (!csv) throw std::runtime_error("persist: cannot open " + path);
  csv.precision(17);
  csv << "traj_index,dphi,w,flipped,diverged,unreliable\n";
  for (std::size_t k = 0; k < res.outcomes.size(); ++k) {
    const auto& o = res.outcomes[k];
    csv << k << ',' << o.dphi << ',' << o.w << ',' << (o.flipped ? 1 : 0) << ','
        << (o.diverged ? 1 : 0) << ',' << (o.unreliable ? 1 : 0) << '\n';
  }
  if (!csv) throw std::runtime_error("persist: write failed for " + path);

  nlohmann::json meta;
  meta["schema_version"] = kSchemaVersion;
  meta["cell_index"] = res.cell_index;
  meta["coord_names"] = res.coord_names;
  meta["coords"] = res.coords;
  meta["master_seed"] = res.master_seed;
  meta["n_traj"] = res.outcomes.size();
  meta["P_s"] = res.ps.P_s;
  meta["P_s_se"] = res.ps.se;
  meta["n_valid"] = res.ps.n_valid;
  meta["n_diverged"] = res.ps.n_diverged;
  std::ofstream js(path + ".json");
  if (!js) throw std::runtime_error("persist: cannot open " + path + ".json");
  js << meta.dump(2) << '\n';
}

inline EnsembleResult load(const std::string& path) {
  std::ifstream js(path + ".json");
  if (!js) throw std::runtime_error("load: missing sidecar " + path + ".json");
  nlohmann::json meta;
  js >> meta;
  if (!meta.contains("schema_version") ||
      meta["schema_version"].get<int>() != kSchemaVersion)
    throw std::runtime_error("load: schema version mismatch in " + path + ".json");

  EnsembleResult res;
  res.cell_index = meta["cell_index"].get<std::size_t>();
  res.coord_names = meta["coord_names"].get<std::vector<std::string>>();
  res.coords = meta["coords"].get<std::vector<double>>();
  res.master_seed = meta["master_seed"].get<std::uint64_t>();

  std::ifstream csv(path);
  if (!csv) throw std::runtime_error("load: cannot open " + path);
  std::string line;
  if (!std::getline(csv, line) || line != "traj_index,dphi,w,flipped,diverged,unreliable")
    throw std::runtime_error("load: bad CSV header in " + path);
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string tok;
    FlipOutcome o;
    std::getline(row, tok, ',');  // traj_index, positional
    std::getline(row, tok, ',');
    o.dphi = std::stod(tok);
    std::getline(row, tok, ',');
    o.w = std::stod(tok);
    std::getline(row, tok, ',');
    o.flipped = tok == "1";
    std::getline(row, tok, ',');
    o.diverged = tok == "1";
    std::getline(row, tok, ',');
    o.unreliable = tok == "1";
    res.outcomes.push_back(o);
  }
  if (static_cast<std::size_t>(meta["n_traj"].get<std::size_t>()) !=
      res.outcomes.size())
    throw std::runtime_error("load: truncated CSV " + path);
  res.aggregate();
  return res;
}

}  // namespace dtcflip
