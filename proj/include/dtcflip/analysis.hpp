#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dtcflip/drive.hpp"
#include "dtcflip/odm.hpp"
#include "dtcflip/po.hpp"
#include "dtcflip/trajectory.hpp"

namespace dtcflip {

inline constexpr double kFlipThreshold = std::numbers::pi / 2;
inline constexpr double kSteadyCircularVarianceMax = 0.5;
inline constexpr double kOnsetThreshold = 1e-4;

/// Windowed complex amplitude of an order-parameter series:
///   O_R(t) = (w_R/pi) int_t^{t+2pi/w_R} e^{i w_R tau} O(tau) dtau.
struct PhaseSeries {
  std::vector<double> times;
  std::vector<double> R;
  std::vector<double> phi;            // wrapped to [-pi, pi)
  std::vector<double> phi_unwrapped;

  std::size_t size() const { return times.size(); }
};

/// Remove 2pi jumps from a wrapped phase series.
inline std::vector<double> unwrap(std::span<const double> phi) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  std::vector<double> out(phi.begin(), phi.end());
  double offset = 0.0;
  for (std::size_t i = 1; i < out.size(); ++i) {
    const double d = phi[i] - phi[i - 1];
    if (d > std::numbers::pi) offset -= two_pi;
    else if (d < -std::numbers::pi) offset += two_pi;
    out[i] = phi[i] + offset;
  }
  return out;
}

/// Trapezoidal sliding-window evaluation via prefix sums, O(n).
inline PhaseSeries complex_amplitude(std::span<const double> times,
                                     std::span<const double> O, double omega_R) {
  if (times.size() != O.size() || times.size() < 2)
    throw std::invalid_argument("complex_amplitude: need matching series, n >= 2");
  if (!(omega_R > 0.0))
    throw std::invalid_argument("complex_amplitude: omega_R must be > 0");
  const double dt = times[1] - times[0];
  const double W = 2.0 * std::numbers::pi / omega_R;
  const double Lf = W / dt;
  const std::size_t L = static_cast<std::size_t>(Lf);
  const double frac = Lf - static_cast<double>(L);  // window tail, in samples
  if (L < 2 || L + 1 >= times.size())
    throw std::invalid_argument("complex_amplitude: series shorter than one window");

  const std::size_t nt = times.size();
  std::vector<std::complex<double>> g(nt), cum(nt);
  for (std::size_t i = 0; i < nt; ++i)
    g[i] = std::polar(1.0, omega_R * times[i]) * O[i];
  std::complex<double> acc = 0.0;
  cum[0] = 0.0;
  for (std::size_t i = 1; i < nt; ++i) {
    acc += 0.5 * dt * (g[i - 1] + g[i]);
    cum[i] = acc;
  }

  const std::size_t n = nt - L - 1;
  PhaseSeries ps;
  ps.times.resize(n);
  ps.R.resize(n);
  ps.phi.resize(n);
  const double scale = omega_R / std::numbers::pi;
  for (std::size_t i = 0; i < n; ++i) {
    // integer part of the window, plus the fractional trapezoid to t_i + W
    const std::size_t j = i + L;
    const double tq = times[j] + frac * dt;
    const double Oq = O[j] + frac * (O[j + 1] - O[j]);
    const std::complex<double> gq = std::polar(1.0, omega_R * tq) * Oq;
    const std::complex<double> OR =
        scale * (cum[j] - cum[i] + 0.5 * frac * dt * (g[j] + gq));
    ps.times[i] = times[i];
    ps.R[i] = std::abs(OR);
    ps.phi[i] = std::arg(OR);
  }
  ps.phi_unwrapped = unwrap(ps.phi);
  return ps;
}

namespace detail {

inline std::size_t nearest_index(std::span<const double> times, double t) {
  const auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 0;
  if (it == times.end()) return times.size() - 1;
  const std::size_t i = static_cast<std::size_t>(it - times.begin());
  return (t - times[i - 1] <= times[i] - t) ? i - 1 : i;
}

struct WindowStats {
  double mean_unwrapped = 0.0;
  double circular_mean = 0.0;
  double circular_variance = 0.0;
  std::size_t n = 0;
};

inline WindowStats window_stats(const PhaseSeries& ps, double t0, double t1) {
  WindowStats st;
  double sum_u = 0.0, c = 0.0, s = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (ps.times[i] < t0 || ps.times[i] > t1) continue;
    sum_u += ps.phi_unwrapped[i];
    c += std::cos(ps.phi[i]);
    s += std::sin(ps.phi[i]);
    ++st.n;
  }
  if (st.n == 0) return st;
  const double inv = 1.0 / static_cast<double>(st.n);
  st.mean_unwrapped = sum_u * inv;
  st.circular_mean = std::atan2(s * inv, c * inv);
  st.circular_variance = 1.0 - std::hypot(c * inv, s * inv);
  return st;
}

}  // namespace detail

/// w = [phi_unwrapped(t_final) - phi_unwrapped(t_ref)] / pi, unrounded.
inline double half_winding(const PhaseSeries& ps, double t_ref, double t_final) {
  if (ps.size() < 2) throw std::invalid_argument("half_winding: empty series");
  const std::size_t i0 = detail::nearest_index(ps.times, t_ref);
  const std::size_t i1 = detail::nearest_index(ps.times, t_final);
  return (ps.phi_unwrapped[i1] - ps.phi_unwrapped[i0]) / std::numbers::pi;
}

struct FlipOutcome {
  double dphi = 0.0;       // wrapped to [-pi, pi)
  bool flipped = false;    // |dphi| > pi/2
  double w = 0.0;          // unrounded half-winding number
  bool diverged = false;
  bool unreliable = false; // non-steady measurement window
};

/// Compare steady phase windows before/after the defect.
inline FlipOutcome flip_outcome(const PhaseSeries& ps, double before_t0,
                                double before_t1, double after_t0, double after_t1) {
  const auto b = detail::window_stats(ps, before_t0, before_t1);
  const auto a = detail::window_stats(ps, after_t0, after_t1);
  FlipOutcome out;
  if (b.n == 0 || a.n == 0) {
    out.unreliable = true;
    return out;
  }
  out.dphi = wrap_angle(a.circular_mean - b.circular_mean);
  out.w = (a.mean_unwrapped - b.mean_unwrapped) / std::numbers::pi;
  out.flipped = std::abs(out.dphi) > kFlipThreshold;
  out.unreliable = b.circular_variance > kSteadyCircularVarianceMax ||
                   a.circular_variance > kSteadyCircularVarianceMax;
  return out;
}

struct SwitchingProbability {
  double P_s = 0.0;
  double se = 0.0;
  std::size_t n_valid = 0;
  std::size_t n_diverged = 0;
};

inline SwitchingProbability switching_probability(std::span<const FlipOutcome> outcomes) {
  SwitchingProbability sp;
  std::size_t flips = 0;
  for (const auto& o : outcomes) {
    if (o.diverged) {
      ++sp.n_diverged;
      continue;
    }
    ++sp.n_valid;
    if (o.flipped) ++flips;
  }
  if (sp.n_valid == 0) throw std::invalid_argument("switching_probability: no valid outcomes");
  const double n = static_cast<double>(sp.n_valid);
  sp.P_s = static_cast<double>(flips) / n;
  sp.se = std::sqrt(sp.P_s * (1.0 - sp.P_s) / n);
  return sp;
}

/// P_w over bins of width 0.1 in w, plus the mass at integer bins.
struct WindingHistogram {
  double bin_width = 0.1;
  std::map<long long, double> mass;        // bin index -> probability
  std::map<long long, double> integer_mass; // integer w -> probability within 0.1
  std::size_t n_valid = 0;

  double bin_center(long long idx) const { return bin_width * static_cast<double>(idx); }

  long long most_probable_bin() const {
    long long best = 0;
    double m = -1.0;
    for (const auto& [k, v] : mass)
      if (v > m) { m = v; best = k; }
    return best;
  }
};

inline WindingHistogram winding_histogram(std::span<const FlipOutcome> outcomes,
                                          double bin_width = 0.1) {
  WindingHistogram h;
  h.bin_width = bin_width;
  for (const auto& o : outcomes) {
    if (o.diverged) continue;
    ++h.n_valid;
    h.mass[static_cast<long long>(std::llround(o.w / bin_width))] += 1.0;
  }
  if (h.n_valid == 0) return h;
  const double inv = 1.0 / static_cast<double>(h.n_valid);
  for (auto& [k, v] : h.mass) v *= inv;
  for (const auto& o : outcomes) {
    if (o.diverged) continue;
    const long long wi = std::llround(o.w);
    if (std::abs(o.w - static_cast<double>(wi)) <= bin_width)
      h.integer_mass[wi] += inv;
  }
  return h;
}

/// Crystalline fraction: periodogram weight of the subharmonic bin and its
/// two neighbors over the total power. Rectangular window whose length is an
/// integer number of 2 T_d periods, so omega_d/2 is bin-centered.
inline double crystalline_fraction(std::span<const double> O, double dt_sample,
                                   double omega_d) {
  if (!(omega_d > 0.0) || !(dt_sample > 0.0))
    throw std::invalid_argument("crystalline_fraction: need positive omega_d, dt");
  const double two_Td = 4.0 * std::numbers::pi / omega_d;
  const std::size_t P = static_cast<std::size_t>(std::llround(two_Td / dt_sample));
  if (P < 4 || O.size() < P)
    throw std::invalid_argument("crystalline_fraction: series shorter than 2 T_d");
  const std::size_t cycles = O.size() / P;
  const std::size_t L = cycles * P;
  const std::size_t m = cycles;  // subharmonic completes `cycles` periods in L samples

  double mean = 0.0;
  for (std::size_t i = 0; i < L; ++i) mean += O[i];
  mean /= static_cast<double>(L);

  double total = 0.0;
  for (std::size_t i = 0; i < L; ++i) {
    const double v = O[i] - mean;
    total += v * v;
  }
  if (total <= 0.0) return 0.0;

  // numerator: the subharmonic line and its first odd harmonic 3 omega_d/2
  // (both belong exclusively to the period-doubled response; even multiples
  // of omega_d/2 are ordinary harmonic response and stay in the denominator),
  // each with +-1 bin of leakage neighborhood
  double peak = 0.0;
  for (std::size_t c : {m, 3 * m}) {
    for (std::size_t k = (c > 1 ? c - 1 : 1); k <= c + 1 && k < L / 2; ++k) {
      std::complex<double> X = 0.0;
      const double wk = 2.0 * std::numbers::pi * static_cast<double>(k) /
                        static_cast<double>(L);
      for (std::size_t i = 0; i < L; ++i)
        X += (O[i] - mean) * std::polar(1.0, -wk * static_cast<double>(i));
      peak += 2.0 * std::norm(X);  // + the conjugate bin at L - k
    }
  }
  const double chi = peak / (static_cast<double>(L) * total);
  return std::min(chi, 1.0);
}

enum class PhaseLabel { NP, SP, DTC, irregular };

inline std::string to_string(PhaseLabel l) {
  switch (l) {
    case PhaseLabel::NP: return "NP";
    case PhaseLabel::SP: return "SP";
    case PhaseLabel::DTC: return "DTC";
    case PhaseLabel::irregular: return "irregular";
  }
  return "?";
}

inline constexpr double kClassifyChiMin = 0.5;
inline constexpr double kClassifySxFloor = 0.05;
inline constexpr double kClassifyPhotonFloor = 2e-3;  // per particle

/// Label the steady state from a trajectory tail (the last `window` fraction
/// of the series). `photon_per_particle` divides |a|^2 by N for the finite-N
/// methods; the mean-field photon channel is already per particle.
inline PhaseLabel classify_phase(const Trajectory& traj, double omega_d,
                                 std::size_t N_for_photon = 1) {
  if (traj.diverged || traj.size() < 8) return PhaseLabel::irregular;
  const std::size_t i0 = traj.size() / 2;
  const std::span<const double> tail(traj.x.data() + i0, traj.size() - i0);
  const double chi = crystalline_fraction(tail, traj.dt_sample, omega_d);
  if (chi >= kClassifyChiMin) return PhaseLabel::DTC;

  double mean_abs_x = 0.0, mean_pn = 0.0;
  for (std::size_t i = i0; i < traj.size(); ++i) {
    mean_abs_x += std::abs(traj.x[i]);
    if (!traj.photon.empty()) mean_pn += traj.photon[i];
  }
  const double inv = 1.0 / static_cast<double>(traj.size() - i0);
  mean_abs_x *= inv;
  mean_pn *= inv / static_cast<double>(std::max<std::size_t>(N_for_photon, 1));

  const bool sx_up = mean_abs_x >= kClassifySxFloor;
  const bool pn_up = mean_pn >= kClassifyPhotonFloor;
  if (sx_up && pn_up) return PhaseLabel::SP;
  if (!sx_up && !pn_up) return PhaseLabel::NP;
  return PhaseLabel::irregular;
}

/// Onset amplitude for period doubling: smallest A with
/// max|x| >= 1e-4 over t in [100 T_d, 200 T_d] (noiseless run from rest).
struct OnsetResult {
  double gamma = 0.0;
  double A_onset = 0.0;
  double A_scaled = 0.0;  // A_onset * Omega / (2 gamma)
};

inline double po_max_x_late(double Omega, double gamma, double omega_d, double A) {
  POParams p;
  p.Omega = Omega;
  p.gamma = gamma;
  p.Ttilde = 0.0;
  p.protocol = make_protocol(DefectSpec{}, omega_d, A);
  const double Td = 2.0 * std::numbers::pi / omega_d;
  StepperConfig cfg;
  cfg.t_start = 0.0;
  cfg.t_end = 200.0 * Td;
  cfg.sample_stride = 10;
  NoiseStream stream(0, 0);
  const Trajectory traj = simulate_po(p, cfg, stream);
  double mx = 0.0;
  for (std::size_t i = 0; i < traj.size(); ++i)
    if (traj.times[i] >= 100.0 * Td) mx = std::max(mx, std::abs(traj.x[i]));
  return mx;
}

inline double po_onset_amplitude(double Omega, double gamma, double omega_d,
                                 double A_lo, double A_hi, double tol = 1e-3) {
  double lo = A_lo, hi = A_hi;
  if (po_max_x_late(Omega, gamma, omega_d, lo) >= kOnsetThreshold) return lo;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (po_max_x_late(Omega, gamma, omega_d, mid) >= kOnsetThreshold) hi = mid;
    else lo = mid;
  }
  return hi;
}

inline std::vector<OnsetResult> resonance_scan(double Omega, std::span<const double> gammas,
                                               double omega_d, double A_max_factor = 4.0) {
  std::vector<OnsetResult> out;
  for (double g : gammas) {
    OnsetResult r;
    r.gamma = g;
    const double Ar = 2.0 * g / Omega;
    r.A_onset = po_onset_amplitude(Omega, g, omega_d, 0.25 * Ar, A_max_factor * Ar,
                                   0.005 * Ar);
    r.A_scaled = r.A_onset * Omega / (2.0 * g);
    out.push_back(r);
  }
  return out;
}

/// Numeric period-doubling threshold of the driven ODM (mean-field), same
/// max|sx| criterion as the PO scan. Used where the closed form leaves its domain.
inline double odm_max_sx_late(const ODMParams& base, double omega_d, double A) {
  ODMParams p = base;
  p.method = ODMMethod::mean_field;
  p.protocol = make_protocol(DefectSpec{}, omega_d, A);
  const double Td = 2.0 * std::numbers::pi / omega_d;
  StepperConfig cfg;
  cfg.t_start = 0.0;
  cfg.t_end = 200.0 * Td;
  cfg.sample_stride = 10;
  NoiseStream stream(0, 0);
  const Trajectory traj = simulate_odm(p, cfg, stream);
  double mx = 0.0;
  for (std::size_t i = 0; i < traj.size(); ++i)
    if (traj.times[i] >= 100.0 * Td) mx = std::max(mx, std::abs(traj.x[i]));
  return mx;
}

inline double odm_onset_amplitude(const ODMParams& base, double omega_d, double A_lo,
                                  double A_hi, double tol = 1e-3) {
  double lo = A_lo, hi = A_hi;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (odm_max_sx_late(base, omega_d, mid) >= kOnsetThreshold) hi = mid;
    else lo = mid;
  }
  return hi;
}

/// Spin decorrelator between an original and a perturbed mean-field copy
/// (d^2 = 1/2 - 2 s_O . s_P, so 0 for aligned and 1 for anti-aligned spins).
struct DecorrelatorResult {
  std::vector<double> times;
  std::vector<double> d2;
  double max_d2 = 0.0;
  bool diverged = false;
};

inline constexpr double kDecorrelatorEpsA = 1.0;       // extensive cavity kick
inline constexpr double kDecorrelatorEpsAmp = 1e-5;    // drive-amplitude kick
inline constexpr double kDecorrelatorNscale = 1e4;     // N used to rescale eps_a

inline DecorrelatorResult decorrelator_run(const ODMParams& base, const DefectSpec& spec,
                                           double omega_d, double A,
                                           double eps_a = kDecorrelatorEpsA,
                                           double eps_A = kDecorrelatorEpsAmp,
                                           double prep_cycles = 100.0,
                                           double follow_cycles = 100.0,
                                           std::size_t sample_stride = 20) {
  ODMParams p = base;
  p.method = ODMMethod::mean_field;
  p.protocol = make_protocol(spec, omega_d, A);
  const DriveProtocol proto_P = make_protocol(spec, omega_d, A + eps_A);
  const double Td = 2.0 * std::numbers::pi / omega_d;
  const double dt = 0.01;

  // Prepare the original from t = -prep_cycles Td to 0.
  const MFState s0 = initial_mf_state(p.epsilon);
  std::array<double, 5> yO{s0.alpha_R, s0.alpha_I, s0.sx, s0.sy, s0.sz};
  auto driftO = [&](const std::array<double, 5>& y, double t) {
    return odm_drift_mf(y, p.lambda0 * p.protocol.value(t), p);
  };
  auto driftP = [&](const std::array<double, 5>& y, double t) {
    return odm_drift_mf(y, p.lambda0 * proto_P.value(t), p);
  };
  const std::size_t n_prep =
      static_cast<std::size_t>(std::llround(prep_cycles * Td / dt));
  for (std::size_t i = 0; i < n_prep; ++i) {
    const double t = -prep_cycles * Td + static_cast<double>(i) * dt;
    yO = heun_step_det(driftO, yO, t, dt);
    detail::renorm_spin(yO, 0.5);
  }

  std::array<double, 5> yP = yO;
  yP[0] += eps_a / std::sqrt(kDecorrelatorNscale);  // rescaled alpha = a/sqrt(N)

  DecorrelatorResult res;
  const double t_end = defect_end(spec) + follow_cycles * Td;
  const std::size_t n = static_cast<std::size_t>(std::llround(t_end / dt));
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * dt;
    yO = heun_step_det(driftO, yO, t, dt);
    yP = heun_step_det(driftP, yP, t, dt);
    detail::renorm_spin(yO, 0.5);
    detail::renorm_spin(yP, 0.5);
    if (!all_finite(yO) || !all_finite(yP)) {
      res.diverged = true;
      break;
    }
    if ((i + 1) % sample_stride == 0) {
      const double d2 =
          0.5 - 2.0 * (yO[2] * yP[2] + yO[3] * yP[3] + yO[4] * yP[4]);
      res.times.push_back(t + dt);
      res.d2.push_back(d2);
      res.max_d2 = std::max(res.max_d2, d2);
    }
  }
  return res;
}

}  // namespace dtcflip
