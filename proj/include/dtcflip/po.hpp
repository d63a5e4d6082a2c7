#pragma once

#include <array>
#include <cmath>
#include <utility>

#include "dtcflip/drive.hpp"
#include "dtcflip/integrator.hpp"
#include "dtcflip/rng.hpp"
#include "dtcflip/trajectory.hpp"

namespace dtcflip {

inline constexpr double kDefaultPendulumAngle = 1e-4;
inline constexpr double kTemperatureWarnLevel = 2e-4;

/// Thermal parametric pendulum
///   u'' + gamma u' + Omega^2 f(t) sin u = eta(t),
///   <eta(t) eta(t')> = 2 Ttilde Omega^2 gamma delta(t - t').
struct POParams {
  double Omega = 1.0;
  double gamma = 0.1;
  double Ttilde = 0.0;
  DriveProtocol protocol;

  void validate() const {
    if (!(Omega > 0.0)) throw std::invalid_argument("POParams: Omega must be > 0");
    if (gamma < 0.0) throw std::invalid_argument("POParams: gamma must be >= 0");
    if (Ttilde < 0.0) throw std::invalid_argument("POParams: Ttilde must be >= 0");
  }

  bool temperature_warning() const { return Ttilde > kTemperatureWarnLevel; }
};

struct POState {
  double u = kDefaultPendulumAngle;
  double v = 0.0;
};

/// Parametric resonance condition: (omega_r, A_r) = (2 Omega, 2 gamma / Omega).
inline std::pair<double, double> po_resonance(double Omega, double gamma) {
  if (!(Omega > 0.0)) throw std::invalid_argument("po_resonance: Omega must be > 0");
  if (gamma < 0.0) throw std::invalid_argument("po_resonance: gamma must be >= 0");
  return {2.0 * Omega, 2.0 * gamma / Omega};
}

inline std::array<double, 2> po_drift(const std::array<double, 2>& y, double t,
                                      const POParams& p) {
  const double f = p.protocol.value(t);
  return {y[1], -p.gamma * y[1] - p.Omega * p.Omega * f * std::sin(y[0])};
}

/// Per-step thermal noise amplitude on v: sigma * sqrt(dt) * N(0,1)
/// with sigma = sqrt(2 Ttilde Omega^2 gamma).
inline double po_noise_sigma(const POParams& p) {
  return std::sqrt(2.0 * p.Ttilde * p.Omega * p.Omega * p.gamma);
}

inline double pendulum_energy(const POState& s, double Omega) {
  return 0.5 * s.v * s.v + Omega * Omega * (1.0 - std::cos(s.u));
}

/// Integrate the pendulum and record x = sin(u).
inline Trajectory simulate_po(const POParams& params, const StepperConfig& config,
                              NoiseStream& stream,
                              POState init = POState{}) {
  params.validate();
  config.validate();

  const double sigma = po_noise_sigma(params);
  const bool noisy = sigma > 0.0;
  const double sqrt_dt = std::sqrt(config.dt);
  const std::size_t n = config.n_steps();

  Trajectory traj;
  traj.dt = config.dt;
  traj.dt_sample = config.dt * static_cast<double>(config.sample_stride);
  traj.master_seed = stream.master_seed();
  traj.trajectory_index = stream.trajectory_index();
  traj.model = "po";
  traj.times.reserve(n / config.sample_stride + 1);
  traj.x.reserve(n / config.sample_stride + 1);

  auto drift = [&params](const std::array<double, 2>& y, double t) {
    return po_drift(y, t, params);
  };

  std::array<double, 2> y{init.u, init.v};
  const std::array<double, 2> diff{0.0, sigma};
  double t = config.t_start;
  traj.times.push_back(t);
  traj.x.push_back(std::sin(y[0]));
  for (std::size_t i = 0; i < n; ++i) {
    if (noisy) {
      const std::array<double, 2> dW{0.0, sqrt_dt * stream.normal()};
      y = heun_step_stoch(drift, diff, y, t, config.dt, dW);
    } else {
      y = heun_step_det(drift, y, t, config.dt);
    }
    t = config.t_start + static_cast<double>(i + 1) * config.dt;
    if (!all_finite(y)) {
      traj.diverged = true;
      traj.t_diverged = t;
      break;
    }
    if ((i + 1) % config.sample_stride == 0) {
      traj.times.push_back(t);
      traj.x.push_back(std::sin(y[0]));
    }
  }
  return traj;
}

}  // namespace dtcflip
