// Command-line front end: binds JSON run configs and flag overrides to the
// simulation, sweep, and analysis operations, emitting plot-ready CSV files
// with JSON metadata sidecars.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dtcflip/dtcflip.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dtcflip;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& where) {
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key))
      throw ConfigError("unknown key '" + key + "' in config section '" + where + "'");
}

struct CliOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::string prefix = "run";
  unsigned workers = 1;

  // flag overrides (optional so the config file wins only when a flag is absent)
  std::optional<std::string> model, method, kind;
  std::optional<double> Omega, gamma, temp, omega, omega0, kappa, lambda0, lambda0_rel;
  std::optional<double> omega_d, A, tdelta, tr, theta_f, theta_D, omega_prime;
  std::optional<double> cycles;
  std::optional<std::size_t> N, ntraj;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> axes;     // name:start:stop:count
  std::vector<double> gammas;        // scan subcommand
};

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> v;
  if (n == 1) return {a};
  for (std::size_t i = 0; i < n; ++i)
    v.push_back(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  return v;
}

GridAxis parse_axis(const std::string& s) {
  std::vector<std::string> parts;
  std::string tok;
  std::istringstream is(s);
  while (std::getline(is, tok, ':')) parts.push_back(tok);
  if (parts.size() != 4)
    throw ConfigError("axis must be name:start:stop:count, got '" + s + "'");
  GridAxis ax;
  ax.name = parts[0];
  ax.values = linspace(std::stod(parts[1]), std::stod(parts[2]),
                       static_cast<std::size_t>(std::stoul(parts[3])));
  return ax;
}

SweepPlan build_plan(const CliOptions& opt) {
  SweepPlan plan;
  json cfg;
  if (!opt.config_path.empty()) {
    std::ifstream in(opt.config_path);
    if (!in) throw ConfigError("cannot open config file " + opt.config_path);
    try {
      in >> cfg;
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config parse error: ") + e.what());
    }
    check_keys(cfg, {"model", "drive", "protocol", "sweep", "schedule", "output"},
               "top level");
  }

  ModelConfig& m = plan.base;
  if (cfg.contains("model")) {
    const json& jm = cfg["model"];
    check_keys(jm,
               {"kind", "method", "Omega", "gamma", "Ttilde", "omega", "omega0",
                "kappa", "lambda0", "lambda0_rel", "N", "initial_noise_only", "dt",
                "sample_stride"},
               "model");
    if (jm.contains("kind"))
      m.kind = jm["kind"] == "po" ? ModelKind::po : ModelKind::odm;
    if (jm.contains("method")) m.method = odm_method_from_string(jm["method"]);
    if (jm.contains("Omega")) m.Omega = jm["Omega"];
    if (jm.contains("gamma")) m.gamma = jm["gamma"];
    if (jm.contains("Ttilde")) m.Ttilde = jm["Ttilde"];
    if (jm.contains("omega")) m.omega = jm["omega"];
    if (jm.contains("omega0")) m.omega0 = jm["omega0"];
    if (jm.contains("kappa")) m.kappa = jm["kappa"];
    if (jm.contains("lambda0")) m.lambda0 = jm["lambda0"];
    if (jm.contains("lambda0_rel"))
      m.lambda0 = jm["lambda0_rel"].get<double>() * lambda_c(m.omega, m.kappa);
    if (jm.contains("N")) m.N = jm["N"];
    if (jm.contains("initial_noise_only")) m.initial_noise_only = jm["initial_noise_only"];
    if (jm.contains("dt")) m.dt = jm["dt"];
    if (jm.contains("sample_stride")) m.sample_stride = jm["sample_stride"];
  }
  if (cfg.contains("drive")) {
    const json& jd = cfg["drive"];
    check_keys(jd, {"omega_d", "A"}, "drive");
    if (jd.contains("omega_d")) m.omega_d = jd["omega_d"];
    if (jd.contains("A")) m.A = jd["A"];
  }
  if (cfg.contains("protocol")) {
    const json& jp = cfg["protocol"];
    check_keys(jp, {"kind", "T_delta", "T_r", "omega_prime", "theta_D", "theta_f"},
               "protocol");
    if (jp.contains("kind")) m.defect.kind = defect_kind_from_string(jp["kind"]);
    if (jp.contains("T_delta")) m.defect.T_delta = jp["T_delta"];
    if (jp.contains("T_r")) m.defect.T_r = jp["T_r"];
    if (jp.contains("omega_prime")) m.defect.omega_prime = jp["omega_prime"];
    if (jp.contains("theta_D")) m.defect.theta_D = jp["theta_D"];
    if (jp.contains("theta_f")) m.defect.theta_f = jp["theta_f"];
  }
  if (cfg.contains("sweep")) {
    const json& js = cfg["sweep"];
    check_keys(js, {"axes", "n_traj", "master_seed"}, "sweep");
    if (js.contains("n_traj")) plan.n_traj = js["n_traj"];
    if (js.contains("master_seed")) plan.master_seed = js["master_seed"];
    if (js.contains("axes"))
      for (const json& ja : js["axes"]) {
        check_keys(ja, {"name", "values", "start", "stop", "count"}, "sweep.axes");
        GridAxis ax;
        ax.name = ja["name"];
        if (ja.contains("values")) ax.values = ja["values"].get<std::vector<double>>();
        else ax.values = linspace(ja["start"], ja["stop"], ja["count"]);
        plan.axes.push_back(ax);
      }
  }
  if (cfg.contains("schedule")) {
    const json& js = cfg["schedule"];
    check_keys(js,
               {"prep_cycles", "relax_cycles", "measure_cycles",
                "before_window_start", "before_window_end", "tail_cycles"},
               "schedule");
    if (js.contains("prep_cycles")) plan.sched.prep_cycles = js["prep_cycles"];
    if (js.contains("relax_cycles")) plan.sched.relax_cycles = js["relax_cycles"];
    if (js.contains("measure_cycles")) plan.sched.measure_cycles = js["measure_cycles"];
    if (js.contains("before_window_start"))
      plan.sched.before_window_start = js["before_window_start"];
    if (js.contains("before_window_end"))
      plan.sched.before_window_end = js["before_window_end"];
    if (js.contains("tail_cycles")) plan.sched.tail_cycles = js["tail_cycles"];
  }

  // flags override the file
  if (opt.model) m.kind = *opt.model == "po" ? ModelKind::po : ModelKind::odm;
  if (opt.method) m.method = odm_method_from_string(*opt.method);
  if (opt.Omega) m.Omega = *opt.Omega;
  if (opt.gamma) m.gamma = *opt.gamma;
  if (opt.temp) m.Ttilde = *opt.temp;
  if (opt.omega) m.omega = *opt.omega;
  if (opt.omega0) m.omega0 = *opt.omega0;
  if (opt.kappa) m.kappa = *opt.kappa;
  if (opt.lambda0) m.lambda0 = *opt.lambda0;
  if (opt.lambda0_rel) m.lambda0 = *opt.lambda0_rel * lambda_c(m.omega, m.kappa);
  if (opt.omega_d) m.omega_d = *opt.omega_d;
  if (opt.A) m.A = *opt.A;
  if (opt.kind) m.defect.kind = defect_kind_from_string(*opt.kind);
  if (opt.tdelta) m.defect.T_delta = *opt.tdelta * m.driving_period();
  if (opt.tr) m.defect.T_r = *opt.tr * m.driving_period();
  if (opt.theta_f) m.defect.theta_f = *opt.theta_f;
  if (opt.theta_D) m.defect.theta_D = *opt.theta_D;
  if (opt.omega_prime) m.defect.omega_prime = *opt.omega_prime;
  if (opt.N) m.N = *opt.N;
  if (opt.ntraj) plan.n_traj = *opt.ntraj;
  if (opt.seed) plan.master_seed = *opt.seed;
  for (const auto& s : opt.axes) plan.axes.push_back(parse_axis(s));
  return plan;
}

json run_constants(const SweepPlan& plan) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["integrator"] = "heun_predictor_corrector";
  j["dt"] = plan.base.dt;
  j["flip_threshold_rad"] = kFlipThreshold;
  j["prep_cycles"] = plan.sched.prep_cycles;
  j["relax_cycles"] = plan.sched.relax_cycles;
  j["measure_cycles"] = plan.sched.measure_cycles;
  j["before_window_Td"] = {plan.sched.before_window_start, plan.sched.before_window_end};
  j["epsilon_seed"] = kEpsilonSeed;
  j["decorrelator_eps_a"] = kDecorrelatorEpsA;
  j["decorrelator_eps_A"] = kDecorrelatorEpsAmp;
  j["decorrelator_N_scale"] = kDecorrelatorNscale;
  j["onset_threshold"] = kOnsetThreshold;
  j["classifier"] = {{"chi_min", kClassifyChiMin},
                     {"sx_floor", kClassifySxFloor},
                     {"photon_floor_per_particle", kClassifyPhotonFloor}};
  j["plan_fingerprint"] = plan_fingerprint(plan);
  return j;
}

void write_sidecar(const fs::path& csv_path, const SweepPlan& plan, json extra = {}) {
  json meta = run_constants(plan);
  meta["master_seed"] = plan.master_seed;
  meta["n_traj"] = plan.n_traj;
  for (auto& [k, v] : extra.items()) meta[k] = v;
  std::ofstream js(csv_path.string() + ".json");
  js << meta.dump(2) << '\n';
}

fs::path out_path(const CliOptions& opt, const std::string& stem) {
  const fs::path dir(opt.out_dir);
  if (!fs::exists(dir))
    throw ConfigError("output directory does not exist: " + opt.out_dir);
  return dir / (opt.prefix + "_" + stem + ".csv");
}

void write_matrix(const fs::path& path, const DiagramResult& d,
                  const std::string& axis1, const std::string& axis2,
                  bool write_flip_mask) {
  std::ofstream csv(path);
  csv.precision(12);
  csv << axis1 << "\\" << axis2;
  for (double v : d.axis2) csv << ',' << v;
  csv << '\n';
  for (std::size_t i = 0; i < d.axis1.size(); ++i) {
    csv << d.axis1[i];
    for (std::size_t j = 0; j < d.axis2.size(); ++j)
      csv << ',' << (write_flip_mask ? static_cast<double>(d.flipped[i][j]) : d.dphi[i][j]);
    csv << '\n';
  }
}

int cmd_simulate(const CliOptions& opt) {
  SweepPlan plan = build_plan(opt);
  const ModelConfig& m = plan.base;
  const double Td = m.driving_period();
  const double cycles = opt.cycles.value_or(300.0);
  const DriveProtocol protocol = make_protocol(m.defect, m.omega_d, m.A);

  StepperConfig cfg;
  cfg.dt = m.dt;
  cfg.sample_stride = m.sample_stride;
  cfg.t_start = -plan.sched.prep_cycles * Td;
  cfg.t_end = defect_end(m.defect) + cycles * Td;

  NoiseStream stream(plan.master_seed, 0);
  Trajectory traj;
  if (m.kind == ModelKind::po) {
    POParams p;
    p.Omega = m.Omega;
    p.gamma = m.gamma;
    p.Ttilde = m.Ttilde;
    p.protocol = protocol;
    if (p.temperature_warning())
      std::cerr << "warning: Ttilde > 2e-4, coherence is expected to be lost\n";
    traj = simulate_po(p, cfg, stream);
  } else {
    ODMParams p;
    p.omega = m.omega;
    p.omega0 = m.omega0;
    p.kappa = m.kappa;
    p.lambda0 = m.lambda0;
    p.N = m.N;
    p.method = m.method;
    p.initial_noise_only = m.initial_noise_only;
    p.protocol = protocol;
    traj = simulate_odm(p, cfg, stream);
  }
  if (traj.diverged) {
    std::cerr << "error: trajectory diverged at t = " << traj.t_diverged << '\n';
    return kExitRuntime;
  }

  const fs::path path = out_path(opt, "trajectory");
  std::ofstream csv(path);
  csv.precision(12);
  csv << (traj.photon.empty() ? "t,x\n" : "t,x,photon\n");
  for (std::size_t i = 0; i < traj.size(); ++i) {
    csv << traj.times[i] << ',' << traj.x[i];
    if (!traj.photon.empty()) csv << ',' << traj.photon[i];
    csv << '\n';
  }
  write_sidecar(path, plan, {{"model", traj.model}, {"samples", traj.size()}});
  std::cout << "trajectory: " << traj.size() << " samples -> " << path.string() << '\n';
  return kExitOk;
}

int cmd_curve(const CliOptions& opt, bool histogram) {
  SweepPlan plan = build_plan(opt);
  if (plan.axes.size() != 1) throw ConfigError("curve/histogram needs exactly one axis");
  const auto rows = curve(plan, opt.workers);
  const fs::path path = out_path(opt, histogram ? "pw" : "ps");
  std::ofstream csv(path);
  csv.precision(12);
  if (histogram) {
    csv << plan.axes[0].name << ",w_bin,mass\n";
    for (const auto& r : rows)
      for (const auto& [bin, mass] : r.pw.mass)
        csv << r.value << ',' << r.pw.bin_center(bin) << ',' << mass << '\n';
  } else {
    csv << plan.axes[0].name << ",P_s,se,n_valid,n_diverged\n";
    for (const auto& r : rows)
      csv << r.value << ',' << r.ps.P_s << ',' << r.ps.se << ',' << r.ps.n_valid << ','
          << r.ps.n_diverged << '\n';
  }
  write_sidecar(path, plan, {{"rows", rows.size()}});
  std::cout << (histogram ? "P_w" : "P_s") << " over " << rows.size() << " points";
  if (!rows.empty() && !histogram)
    std::cout << "; last P_s = " << rows.back().ps.P_s << " +- " << rows.back().ps.se;
  std::cout << " -> " << path.string() << '\n';
  return kExitOk;
}

int cmd_diagram(const CliOptions& opt) {
  SweepPlan plan = build_plan(opt);
  if (plan.axes.size() != 2) throw ConfigError("diagram needs exactly two axes");
  const auto d = bitflip_diagram(plan, opt.workers);
  const fs::path pd = out_path(opt, "dphi");
  const fs::path pf = out_path(opt, "flip");
  write_matrix(pd, d, plan.axes[0].name, plan.axes[1].name, false);
  write_matrix(pf, d, plan.axes[0].name, plan.axes[1].name, true);
  write_sidecar(pd, plan);
  std::cout << "diagram " << d.axis1.size() << "x" << d.axis2.size() << " -> "
            << pd.string() << ", " << pf.string() << '\n';
  return kExitOk;
}

int cmd_decorrelate(const CliOptions& opt) {
  SweepPlan plan = build_plan(opt);
  if (plan.axes.size() != 2) throw ConfigError("decorrelate needs exactly two axes");
  const auto d = decorrelator_map(plan, opt.workers);
  const fs::path path = out_path(opt, "maxd2");
  write_matrix(path, d, plan.axes[0].name, plan.axes[1].name, false);
  write_sidecar(path, plan);
  std::cout << "decorrelator map " << d.axis1.size() << "x" << d.axis2.size() << " -> "
            << path.string() << '\n';
  return kExitOk;
}

int cmd_scan(const CliOptions& opt) {
  SweepPlan plan = build_plan(opt);
  std::vector<double> gammas = opt.gammas;
  if (gammas.empty()) gammas = {0.005, 0.01, 0.025, 0.1};
  const auto rows = resonance_scan(plan.base.Omega, gammas, plan.base.omega_d);
  const fs::path path = out_path(opt, "onset");
  std::ofstream csv(path);
  csv.precision(12);
  csv << "gamma,A_onset,A_scaled\n";
  for (const auto& r : rows)
    csv << r.gamma << ',' << r.A_onset << ',' << r.A_scaled << '\n';
  write_sidecar(path, plan);
  std::cout << "onset scan over " << rows.size() << " damping values -> "
            << path.string() << '\n';
  return kExitOk;
}

int cmd_classify(const CliOptions& opt) {
  SweepPlan plan = build_plan(opt);
  const ModelConfig& m = plan.base;
  if (m.kind != ModelKind::odm) throw ConfigError("classify expects the odm model");
  ODMParams p;
  p.omega = m.omega;
  p.omega0 = m.omega0;
  p.kappa = m.kappa;
  p.lambda0 = m.lambda0;
  p.N = m.N;
  p.method = m.method;
  p.initial_noise_only = m.initial_noise_only;
  p.protocol = make_protocol(m.defect, m.omega_d, m.A);
  const double Td = m.driving_period();
  StepperConfig cfg;
  cfg.dt = m.dt;
  cfg.sample_stride = m.sample_stride;
  cfg.t_end = (plan.sched.prep_cycles + plan.sched.relax_cycles) * Td;
  NoiseStream stream(plan.master_seed, 0);
  const Trajectory traj = simulate_odm(p, cfg, stream);
  if (traj.diverged) {
    std::cerr << "error: trajectory diverged\n";
    return kExitRuntime;
  }
  const std::size_t n_photon = p.method == ODMMethod::mean_field ? 1 : p.N;
  const PhaseLabel label = classify_phase(traj, m.omega_d, n_photon);
  std::cout << "phase: " << to_string(label) << '\n';
  return kExitOk;
}

int cmd_validate(const CliOptions& opt) {
  SweepPlan plan = build_plan(opt);
  const ModelConfig& m = plan.base;
  std::cout << "derived quantities (no simulation run):\n";
  if (m.kind == ModelKind::po) {
    const auto [wr, Ar] = po_resonance(m.Omega, m.gamma);
    std::cout << "  omega_r = 2 Omega = " << wr << "\n  A_r = 2 gamma / Omega = " << Ar
              << '\n';
    if (m.Ttilde > kTemperatureWarnLevel)
      std::cout << "  warning: Ttilde = " << m.Ttilde
                << " > 2e-4; high temperatures destroy subharmonic coherence\n";
  } else {
    const double lc = lambda_c(m.omega, m.kappa);
    std::cout << "  lambda_c = " << lc << "  (lambda0/lambda_c = " << m.lambda0 / lc
              << ")\n";
    try {
      const auto pol = lower_polariton(m.omega, m.kappa, m.lambda0);
      if (pol.real)
        std::cout << "  omega_minus = " << pol.omega_minus << '\n';
      else
        std::cout << "  omega_minus domain error: omega_minus^2 = " << pol.omega_minus_sq
                  << " < 0 (overdamped lower polariton; choose omega_d explicitly)\n";
      if (pol.real && m.lambda0 <= lc) {
        const auto [wr, Ar] = odm_resonance(m.omega, m.kappa, m.lambda0);
        std::cout << "  omega_r = 2 omega_minus = " << wr << "\n  A_r = " << Ar << '\n';
      }
    } catch (const std::domain_error& e) {
      std::cout << "  omega_minus domain error: " << e.what()
                << " (polariton inner root negative at these parameters)\n";
    }
  }
  if (m.defect.kind == DefectKind::phase_ramp && m.defect.T_delta > 0.0)
    std::cout << "  effective omega_d' = omega_d + 2 pi / T_delta = "
              << m.omega_d + 2.0 * std::numbers::pi / m.defect.T_delta << '\n';
  std::cout << "  plan fingerprint = " << plan_fingerprint(plan) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bit-flip simulations of period-doubled and time-crystalline states"};
  app.require_subcommand(1);

  CliOptions opt;
  app.add_option("--config", opt.config_path, "JSON run configuration file");
  app.add_option("--out", opt.out_dir, "output directory");
  app.add_option("--prefix", opt.prefix, "output file prefix");
  app.add_option("--workers", opt.workers, "worker pool size (does not affect results)");
  app.add_option("--model", opt.model, "po | odm");
  app.add_option("--method", opt.method, "mean_field | twa | dtwa");
  app.add_option("--Omega", opt.Omega, "pendulum natural frequency");
  app.add_option("--gamma", opt.gamma, "pendulum dissipation");
  app.add_option("--temp", opt.temp, "dimensionless temperature Ttilde");
  app.add_option("--omega", opt.omega, "cavity frequency");
  app.add_option("--omega0", opt.omega0, "spin frequency");
  app.add_option("--kappa", opt.kappa, "cavity dissipation");
  app.add_option("--lambda0", opt.lambda0, "base coupling (absolute)");
  app.add_option("--lambda0-rel", opt.lambda0_rel, "base coupling / lambda_c");
  app.add_option("--N", opt.N, "particle number");
  app.add_option("--omega-d", opt.omega_d, "drive frequency");
  app.add_option("--A", opt.A, "drive amplitude");
  app.add_option("--drive", opt.kind, "defect kind (steady|ramp aliases accepted)");
  app.add_option("--tdelta", opt.tdelta, "defect duration in driving periods");
  app.add_option("--tr", opt.tr, "hold duration in driving periods");
  app.add_option("--theta-f", opt.theta_f, "post-defect drive phase");
  app.add_option("--theta-d", opt.theta_D, "during-defect drive phase");
  app.add_option("--omega-prime", opt.omega_prime, "quench frequency");
  app.add_option("--cycles", opt.cycles, "simulate: cycles past the defect");
  app.add_option("--ntraj", opt.ntraj, "trajectories per grid point");
  app.add_option("--seed", opt.seed, "master seed");
  app.add_option("--axis", opt.axes, "sweep axis name:start:stop:count");
  app.add_option("--gammas", opt.gammas, "scan: damping values")->delimiter(',');

  auto* simulate = app.add_subcommand("simulate", "single trajectory");
  auto* diagram = app.add_subcommand("diagram", "noiseless bit-flip diagram");
  auto* curve_cmd = app.add_subcommand("curve", "P_s along one axis");
  auto* histogram = app.add_subcommand("histogram", "P_w along one axis");
  auto* scan = app.add_subcommand("scan", "resonance onset scan");
  auto* decorrelate = app.add_subcommand("decorrelate", "max d^2 map");
  auto* classify = app.add_subcommand("classify", "label the steady state");
  auto* validate = app.add_subcommand("validate", "report derived quantities");
  for (auto* sub : {simulate, diagram, curve_cmd, histogram, scan, decorrelate,
                    classify, validate})
    sub->fallthrough();  // accept the shared options after the subcommand too

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (opt.kind && *opt.kind == "ramp") opt.kind = "phase_ramp";
  if (opt.kind && *opt.kind == "quench") opt.kind = "freq_quench";

  try {
    if (simulate->parsed()) return cmd_simulate(opt);
    if (diagram->parsed()) return cmd_diagram(opt);
    if (curve_cmd->parsed()) return cmd_curve(opt, false);
    if (histogram->parsed()) return cmd_curve(opt, true);
    if (scan->parsed()) return cmd_scan(opt);
    if (decorrelate->parsed()) return cmd_decorrelate(opt);
    if (classify->parsed()) return cmd_classify(opt);
    if (validate->parsed()) return cmd_validate(opt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::domain_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}
