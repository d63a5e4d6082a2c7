#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dtcflip/drive.hpp"
#include "dtcflip/integrator.hpp"
#include "dtcflip/rng.hpp"
#include "dtcflip/trajectory.hpp"

namespace dtcflip {

inline constexpr double kEpsilonSeed = 1e-6;

enum class ODMMethod { mean_field, twa, dtwa };

inline std::string to_string(ODMMethod m) {
  switch (m) {
    case ODMMethod::mean_field: return "mean_field";
    case ODMMethod::twa: return "twa";
    case ODMMethod::dtwa: return "dtwa";
  }
  return "?";
}

inline ODMMethod odm_method_from_string(const std::string& s) {
  if (s == "mean_field" || s == "mf") return ODMMethod::mean_field;
  if (s == "twa") return ODMMethod::twa;
  if (s == "dtwa") return ODMMethod::dtwa;
  throw std::invalid_argument("unknown ODM method: " + s);
}

/// Critical coupling of the open Dicke model.
inline double lambda_c(double omega, double kappa) {
  if (!(omega > 0.0)) throw std::invalid_argument("lambda_c: omega must be > 0");
  return 0.5 * std::sqrt(kappa * kappa + omega * omega);
}

/// Lower polariton frequency. `real == false` tags omega_minus^2 < 0
/// (overdamped mode); a negative inner-root argument throws.
struct PolaritonResult {
  double omega_minus = 0.0;
  double omega_minus_sq = 0.0;
  bool real = true;
};

inline PolaritonResult lower_polariton(double omega, double kappa, double lambda0) {
  const double lc = lambda_c(omega, kappa);
  const double inner =
      (lambda0 / lc) * (lambda0 / lc) * (omega * omega + kappa * kappa) - kappa * kappa;
  if (inner < 0.0)
    throw std::domain_error("lower_polariton: inner square root negative");
  PolaritonResult r;
  r.omega_minus_sq = omega * omega - 0.25 * kappa * kappa - omega * std::sqrt(inner);
  if (r.omega_minus_sq >= 0.0) {
    r.omega_minus = std::sqrt(r.omega_minus_sq);
  } else {
    r.real = false;
  }
  return r;
}

/// Resonance condition mapped from the parametric oscillator:
/// (omega_r = 2 omega_minus, A_r).
inline std::pair<double, double> odm_resonance(double omega, double kappa,
                                               double lambda0) {
  const PolaritonResult pol = lower_polariton(omega, kappa, lambda0);
  if (!pol.real)
    throw std::domain_error("odm_resonance: lower polariton is not real");
  const double lc = lambda_c(omega, kappa);
  const double arg = 1.0 - (lambda0 / lc) * (lambda0 / lc);
  if (arg < 0.0) throw std::domain_error("odm_resonance: lambda0 > lambda_c");
  const double Ar = omega * std::sqrt(arg) * kappa / (kappa * kappa + omega * omega);
  return {2.0 * pol.omega_minus, Ar};
}

/// Open Dicke model parameters; the drive acts on lambda(t) = lambda0 f(t).
struct ODMParams {
  double omega = 1.0;
  double omega0 = 1.0;
  double kappa = 1.0;
  double lambda0 = 0.0;
  std::size_t N = 1;
  ODMMethod method = ODMMethod::mean_field;
  DriveProtocol protocol;
  double epsilon = kEpsilonSeed;     // Z2-branch seed of the initial state
  bool initial_noise_only = false;   // keep sampled initials, zero Wiener terms

  void validate() const {
    if (!(omega > 0.0) || !(omega0 > 0.0))
      throw std::invalid_argument("ODMParams: omega, omega0 must be > 0");
    if (kappa < 0.0) throw std::invalid_argument("ODMParams: kappa must be >= 0");
    if (lambda0 < 0.0) throw std::invalid_argument("ODMParams: lambda0 must be >= 0");
    if (method != ODMMethod::mean_field && N < 1)
      throw std::invalid_argument("ODMParams: N >= 1 required for twa/dtwa");
  }
};

/// Rescaled mean-field state: alpha = a/sqrt(N), |s| = 1/2.
struct MFState {
  double alpha_R = 0.0, alpha_I = 0.0;
  double sx = 0.0, sy = 0.0, sz = -0.5;
};

/// Extensive TWA state: |S| = N/2 along trajectories.
struct TWAState {
  double a_R = 0.0, a_I = 0.0;
  double Sx = 0.0, Sy = 0.0, Sz = 0.0;
};

/// Per-spin DTWA state, component-contiguous for a dense inner loop.
struct DTWAState {
  double a_R = 0.0, a_I = 0.0;
  std::vector<double> sx, sy, sz;  // |sigma_i|^2 = 3 per spin
};

inline MFState initial_mf_state(double eps) {
  MFState s;
  s.alpha_R = eps;
  s.alpha_I = 0.0;
  s.sx = 0.5 * eps;
  s.sy = 0.0;
  s.sz = -0.5 * std::sqrt(1.0 - eps * eps);
  return s;
}

inline TWAState initial_twa_state(const ODMParams& p, NoiseStream& stream) {
  TWAState s;
  s.a_R = 0.5 * stream.normal();  // cavity vacuum: a = (zeta_R + i zeta_I)/2
  s.a_I = 0.5 * stream.normal();
  const double n = static_cast<double>(p.N);
  s.Sx = 0.5 * n * p.epsilon;
  s.Sy = 0.0;
  s.Sz = -0.5 * n * std::sqrt(1.0 - p.epsilon * p.epsilon);
  return s;
}

inline DTWAState initial_dtwa_state(const ODMParams& p, NoiseStream& stream) {
  DTWAState s;
  s.a_R = 0.5 * stream.normal();
  s.a_I = 0.5 * stream.normal();
  s.sx.resize(p.N);
  s.sy.resize(p.N);
  s.sz.assign(p.N, -1.0);
  for (std::size_t i = 0; i < p.N; ++i) {
    s.sx[i] = stream.uniform() <= 0.5 ? 1.0 : -1.0;
    s.sy[i] = stream.uniform() <= 0.5 ? 1.0 : -1.0;
  }
  return s;
}

/// Mean-field drift in cavity quadratures and collective spin components.
inline std::array<double, 5> odm_drift_mf(const std::array<double, 5>& y, double lam,
                                          const ODMParams& p) {
  const auto [aR, aI, sx, sy, sz] = y;
  return {p.omega * aI - p.kappa * aR,
          -(p.omega * aR + 2.0 * lam * sx) - p.kappa * aI,
          -p.omega0 * sy,
          p.omega0 * sx - 4.0 * lam * aR * sz,
          4.0 * lam * aR * sy};
}

/// Extensive TWA drift with 1/sqrt(N) couplings.
inline std::array<double, 5> odm_drift_twa(const std::array<double, 5>& y, double lam,
                                           const ODMParams& p) {
  const auto [aR, aI, Sx, Sy, Sz] = y;
  const double g = lam / std::sqrt(static_cast<double>(p.N));
  return {p.omega * aI - p.kappa * aR,
          -(p.omega * aR + 2.0 * g * Sx) - p.kappa * aI,
          -p.omega0 * Sy,
          p.omega0 * Sx - 4.0 * g * aR * Sz,
          4.0 * g * aR * Sy};
}

namespace detail {

template <std::size_t N>
double renorm_spin(std::array<double, N>& y, double target) {
  const double r = std::sqrt(y[2] * y[2] + y[3] * y[3] + y[4] * y[4]);
  if (r > 0.0) {
    const double sc = target / r;
    y[2] *= sc;
    y[3] *= sc;
    y[4] *= sc;
    return std::abs(r - target) / target;
  }
  return 0.0;
}

template <class Drift>
Trajectory run_collective(const ODMParams& p, const StepperConfig& cfg,
                          NoiseStream& stream, std::array<double, 5> y, Drift&& drift,
                          double photon_scale, const char* model_tag) {
  const bool noisy = p.method != ODMMethod::mean_field && !p.initial_noise_only &&
                     p.kappa > 0.0;
  const double sq = std::sqrt(0.5 * p.kappa);
  const double sqrt_dt = std::sqrt(cfg.dt);
  const double spin_norm = std::sqrt(y[2] * y[2] + y[3] * y[3] + y[4] * y[4]);
  const std::size_t n = cfg.n_steps();

  Trajectory traj;
  traj.dt = cfg.dt;
  traj.dt_sample = cfg.dt * static_cast<double>(cfg.sample_stride);
  traj.master_seed = stream.master_seed();
  traj.trajectory_index = stream.trajectory_index();
  traj.model = model_tag;
  traj.times.reserve(n / cfg.sample_stride + 1);
  traj.x.reserve(n / cfg.sample_stride + 1);
  traj.photon.reserve(n / cfg.sample_stride + 1);

  const double inv_n = 1.0 / static_cast<double>(p.N);
  auto record = [&](double t, const std::array<double, 5>& s) {
    traj.times.push_back(t);
    traj.x.push_back(p.method == ODMMethod::mean_field ? s[2] : s[2] * inv_n);
    traj.photon.push_back((s[0] * s[0] + s[1] * s[1]) * photon_scale);
  };

  const std::array<double, 5> diff{sq, sq, 0.0, 0.0, 0.0};
  double t = cfg.t_start;
  record(t, y);
  for (std::size_t i = 0; i < n; ++i) {
    if (noisy) {
      const std::array<double, 5> dW{sqrt_dt * stream.normal(),
                                     sqrt_dt * stream.normal(), 0.0, 0.0, 0.0};
      y = heun_step_stoch(drift, diff, y, t, cfg.dt, dW);
    } else {
      y = heun_step_det(drift, y, t, cfg.dt);
    }
    traj.max_spin_norm_drift =
        std::max(traj.max_spin_norm_drift, renorm_spin(y, spin_norm));
    t = cfg.t_start + static_cast<double>(i + 1) * cfg.dt;
    if (!all_finite(y)) {
      traj.diverged = true;
      traj.t_diverged = t;
      break;
    }
    if ((i + 1) % cfg.sample_stride == 0) record(t, y);
  }
  return traj;
}

inline Trajectory run_dtwa(const ODMParams& p, const StepperConfig& cfg,
                           NoiseStream& stream, DTWAState init) {
  const std::size_t N = p.N;
  // layout: [a_R, a_I, sx_0..sx_{N-1}, sy..., sz...]
  std::vector<double> y(2 + 3 * N);
  y[0] = init.a_R;
  y[1] = init.a_I;
  for (std::size_t i = 0; i < N; ++i) {
    y[2 + i] = init.sx[i];
    y[2 + N + i] = init.sy[i];
    y[2 + 2 * N + i] = init.sz[i];
  }

  const double sqrt_n = std::sqrt(static_cast<double>(N));
  auto drift = [&](std::span<const double> s, double t, std::span<double> out) {
    const double lam = p.lambda0 * p.protocol.value(t);
    const double g = lam / sqrt_n;
    const double aR = s[0], aI = s[1];
    const double* sx = s.data() + 2;
    const double* sy = s.data() + 2 + N;
    const double* sz = s.data() + 2 + 2 * N;
    double sum_sx = 0.0;
    for (std::size_t i = 0; i < N; ++i) sum_sx += sx[i];
    out[0] = p.omega * aI - p.kappa * aR;
    out[1] = -(p.omega * aR + g * sum_sx) - p.kappa * aI;
    const double r = 4.0 * g * aR;
    double* ox = out.data() + 2;
    double* oy = out.data() + 2 + N;
    double* oz = out.data() + 2 + 2 * N;
    for (std::size_t i = 0; i < N; ++i) {
      ox[i] = -p.omega0 * sy[i];
      oy[i] = p.omega0 * sx[i] - r * sz[i];
      oz[i] = r * sy[i];
    }
  };

  const bool noisy = !p.initial_noise_only && p.kappa > 0.0;
  const double sq = std::sqrt(0.5 * p.kappa);
  const double sqrt_dt = std::sqrt(cfg.dt);
  const std::array<double, 2> diff{sq, sq};
  const double target = std::sqrt(3.0);
  const std::size_t n = cfg.n_steps();

  Trajectory traj;
  traj.dt = cfg.dt;
  traj.dt_sample = cfg.dt * static_cast<double>(cfg.sample_stride);
  traj.master_seed = stream.master_seed();
  traj.trajectory_index = stream.trajectory_index();
  traj.model = "odm_dtwa";

  auto record = [&](double t) {
    double sum_sx = 0.0;
    for (std::size_t i = 0; i < N; ++i) sum_sx += y[2 + i];
    traj.times.push_back(t);
    traj.x.push_back(0.5 * sum_sx / static_cast<double>(N));  // Sx/N
    traj.photon.push_back(y[0] * y[0] + y[1] * y[1]);
  };

  HeunWorkspace ws;
  double t = cfg.t_start;
  record(t);
  for (std::size_t i = 0; i < n; ++i) {
    if (noisy) {
      const std::array<double, 2> dW{sqrt_dt * stream.normal(),
                                     sqrt_dt * stream.normal()};
      heun_step_stoch(drift, std::span<const double>(diff), std::span<double>(y), t,
                      cfg.dt, std::span<const double>(dW), ws);
    } else {
      heun_step_det(drift, std::span<double>(y), t, cfg.dt, ws);
    }
    for (std::size_t j = 0; j < N; ++j) {
      double& sx = y[2 + j];
      double& sy = y[2 + N + j];
      double& sz = y[2 + 2 * N + j];
      const double r = std::sqrt(sx * sx + sy * sy + sz * sz);
      if (r > 0.0) {
        traj.max_spin_norm_drift =
            std::max(traj.max_spin_norm_drift, std::abs(r - target) / target);
        const double sc = target / r;
        sx *= sc;
        sy *= sc;
        sz *= sc;
      }
    }
    t = cfg.t_start + static_cast<double>(i + 1) * cfg.dt;
    if (!all_finite(std::span<const double>(y))) {
      traj.diverged = true;
      traj.t_diverged = t;
      break;
    }
    if ((i + 1) % cfg.sample_stride == 0) record(t);
  }
  return traj;
}

}  // namespace detail

/// Integrate the open Dicke model at the configured fidelity level.
/// Records x = Sx/N and the photon number (|a|^2/N for mean-field via the
/// rescaled |alpha|^2; |a|^2 for the finite-N methods).
inline Trajectory simulate_odm(const ODMParams& params, const StepperConfig& config,
                               NoiseStream& stream) {
  params.validate();
  config.validate();
  switch (params.method) {
    case ODMMethod::mean_field: {
      const MFState s0 = initial_mf_state(params.epsilon);
      auto drift = [&params](const std::array<double, 5>& y, double t) {
        return odm_drift_mf(y, params.lambda0 * params.protocol.value(t), params);
      };
      return detail::run_collective(
          params, config, stream,
          {s0.alpha_R, s0.alpha_I, s0.sx, s0.sy, s0.sz}, drift, 1.0, "odm_mf");
    }
    case ODMMethod::twa: {
      const TWAState s0 = initial_twa_state(params, stream);
      auto drift = [&params](const std::array<double, 5>& y, double t) {
        return odm_drift_twa(y, params.lambda0 * params.protocol.value(t), params);
      };
      return detail::run_collective(params, config, stream,
                                    {s0.a_R, s0.a_I, s0.Sx, s0.Sy, s0.Sz}, drift, 1.0,
                                    "odm_twa");
    }
    case ODMMethod::dtwa:
      return detail::run_dtwa(params, config, stream,
                              initial_dtwa_state(params, stream));
  }
  throw std::logic_error("simulate_odm: unreachable");
}

}  // namespace dtcflip
