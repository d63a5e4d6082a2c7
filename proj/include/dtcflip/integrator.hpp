#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "dtcflip/rng.hpp"

namespace dtcflip {

/// Time-stepping parameters, in natural-frequency units of the model.
struct StepperConfig {
  double dt = 0.01;
  double t_start = 0.0;
  double t_end = 0.0;
  std::size_t sample_stride = 1;

  void validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("StepperConfig: dt must be > 0");
    if (!(t_end > t_start))
      throw std::invalid_argument("StepperConfig: t_end must be > t_start");
    if (sample_stride < 1)
      throw std::invalid_argument("StepperConfig: sample_stride must be >= 1");
  }

  std::size_t n_steps() const {
    return static_cast<std::size_t>(std::llround((t_end - t_start) / dt));
  }
};

template <std::size_t N>
bool all_finite(const std::array<double, N>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

/// Deterministic Heun (explicit trapezoidal) step.
///
/// predictor = y + dt f(y, t); result = y + dt/2 [f(y,t) + f(predictor, t+dt)]
template <std::size_t N, class Drift>
std::array<double, N> heun_step_det(Drift&& drift, const std::array<double, N>& y,
                                    double t, double dt) {
  const std::array<double, N> k1 = drift(y, t);
  std::array<double, N> pred;
  for (std::size_t i = 0; i < N; ++i) pred[i] = y[i] + dt * k1[i];
  const std::array<double, N> k2 = drift(pred, t + dt);
  std::array<double, N> out;
  for (std::size_t i = 0; i < N; ++i) out[i] = y[i] + 0.5 * dt * (k1[i] + k2[i]);
  return out;
}

/// Stochastic Heun for additive noise (Ito and Stratonovich coincide).
///
/// dW entries must be sqrt(dt)-scaled standard normals; the noise term
/// sigma_i dW_i enters the predictor and the final update once.
template <std::size_t N, class Drift>
std::array<double, N> heun_step_stoch(Drift&& drift,
                                      const std::array<double, N>& diffusion_amplitude,
                                      const std::array<double, N>& y, double t,
                                      double dt, const std::array<double, N>& dW) {
  const std::array<double, N> k1 = drift(y, t);
  std::array<double, N> pred;
  for (std::size_t i = 0; i < N; ++i)
    pred[i] = y[i] + dt * k1[i] + diffusion_amplitude[i] * dW[i];
  const std::array<double, N> k2 = drift(pred, t + dt);
  std::array<double, N> out;
  for (std::size_t i = 0; i < N; ++i)
    out[i] = y[i] + 0.5 * dt * (k1[i] + k2[i]) + diffusion_amplitude[i] * dW[i];
  return out;
}

/// Scratch buffers for the dynamic-size (per-spin) variant.
struct HeunWorkspace {
  std::vector<double> k1, k2, pred;
  void resize(std::size_t n) {
    k1.resize(n);
    k2.resize(n);
    pred.resize(n);
  }
};

/// Dynamic-size deterministic Heun step, in place. `drift(y, t, out)` fills out.
template <class Drift>
void heun_step_det(Drift&& drift, std::span<double> y, double t, double dt,
                   HeunWorkspace& ws) {
  const std::size_t n = y.size();
  ws.resize(n);
  drift(std::span<const double>(y.data(), n), t, std::span<double>(ws.k1));
  for (std::size_t i = 0; i < n; ++i) ws.pred[i] = y[i] + dt * ws.k1[i];
  drift(std::span<const double>(ws.pred), t + dt, std::span<double>(ws.k2));
  for (std::size_t i = 0; i < n; ++i) y[i] += 0.5 * dt * (ws.k1[i] + ws.k2[i]);
}

/// Dynamic-size stochastic Heun step with additive noise on the first
/// `dW.size()` components (the cavity quadratures in the spin models).
template <class Drift>
void heun_step_stoch(Drift&& drift, std::span<const double> diffusion_amplitude,
                     std::span<double> y, double t, double dt,
                     std::span<const double> dW, HeunWorkspace& ws) {
  const std::size_t n = y.size();
  const std::size_t m = dW.size();
  ws.resize(n);
  drift(std::span<const double>(y.data(), n), t, std::span<double>(ws.k1));
  for (std::size_t i = 0; i < n; ++i) ws.pred[i] = y[i] + dt * ws.k1[i];
  for (std::size_t i = 0; i < m; ++i) ws.pred[i] += diffusion_amplitude[i] * dW[i];
  drift(std::span<const double>(ws.pred), t + dt, std::span<double>(ws.k2));
  for (std::size_t i = 0; i < n; ++i) y[i] += 0.5 * dt * (ws.k1[i] + ws.k2[i]);
  for (std::size_t i = 0; i < m; ++i) y[i] += diffusion_amplitude[i] * dW[i];
}

}  // namespace dtcflip
