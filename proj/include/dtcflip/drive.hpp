#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace dtcflip {

inline constexpr double kTimeInfinity = 1e300;

/// Wrap an angle into [-pi, pi).
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a + std::numbers::pi, two_pi);
  if (a < 0.0) a += two_pi;
  return a - std::numbers::pi;
}

/// One segment of the drive schedule. The drive argument on the segment is
///   omega * t + theta_const + theta_rate * t,
/// i.e. theta(t) is affine in t (stored as coefficients, never accumulated).
struct DriveSegment {
  double t_begin = -kTimeInfinity;
  double t_end = kTimeInfinity;
  double omega = 0.0;
  double theta_const = 0.0;
  double theta_rate = 0.0;

  double angle(double t) const { return omega * t + theta_const + theta_rate * t; }
  double theta(double t) const { return theta_const + theta_rate * t; }
};

/// Piecewise drive f(t) = 1 + A sin(omega_seg t + theta_seg(t)).
///
/// Segments tile the time axis; membership is half-open [t_begin, t_end).
struct DriveProtocol {
  double amplitude = 0.0;       // A
  double base_frequency = 0.0;  // omega_d
  double final_phase = 0.0;     // theta_f
  std::vector<DriveSegment> segments;

  const DriveSegment& segment_at(double t) const {
    for (const auto& s : segments)
      if (t >= s.t_begin && t < s.t_end) return s;
    return segments.back();
  }

  double value(double t) const {
    return 1.0 + amplitude * std::sin(segment_at(t).angle(t));
  }

  double phase(double t) const { return segment_at(t).theta(t); }

  /// Times at which f(t) itself jumps (phase jumps that are not multiples
  /// of 2 pi, or frequency changes that leave the argument discontinuous).
  std::vector<double> discontinuity_points(double tol = 1e-9) const {
    std::vector<double> out;
    for (std::size_t i = 0; i + 1 < segments.size(); ++i) {
      const double t = segments[i].t_end;
      if (t <= -kTimeInfinity / 2 || t >= kTimeInfinity / 2) continue;
      const double left = 1.0 + amplitude * std::sin(segments[i].angle(t));
      const double right = 1.0 + amplitude * std::sin(segments[i + 1].angle(t));
      if (std::abs(left - right) > tol) out.push_back(t);
    }
    return out;
  }
};

enum class DefectKind { steady, phase_ramp, freq_quench, switch_off, generalized };

inline std::string to_string(DefectKind k) {
  switch (k) {
    case DefectKind::steady: return "steady";
    case DefectKind::phase_ramp: return "phase_ramp";
    case DefectKind::freq_quench: return "freq_quench";
    case DefectKind::switch_off: return "switch_off";
    case DefectKind::generalized: return "generalized";
  }
  return "?";
}

inline DefectKind defect_kind_from_string(const std::string& s) {
  if (s == "steady") return DefectKind::steady;
  if (s == "phase_ramp") return DefectKind::phase_ramp;
  if (s == "freq_quench") return DefectKind::freq_quench;
  if (s == "switch_off") return DefectKind::switch_off;
  if (s == "generalized") return DefectKind::generalized;
  throw std::invalid_argument("unknown defect kind: " + s);
}

/// Specification of the transient drive modification used as a bit-flip.
///
/// phase_ramp : theta ramps 0 -> 2pi linearly over (0, T_delta).
/// freq_quench: frequency omega_prime on (0, T_r), phase 0 before and
///              theta_f after (drive may jump at T_r).
/// switch_off : zero modulation frequency on (0, T_r); the coupling is held
///              at the static value 1 + A sin(theta_D).
/// generalized: frequency omega_prime and phase theta_D on (0, T_r),
///              phase theta_f afterwards.
struct DefectSpec {
  DefectKind kind = DefectKind::steady;
  double T_delta = 0.0;      // ramp duration
  double T_r = 0.0;          // hold duration (quench / switch_off / generalized)
  double omega_prime = 0.0;  // quench frequency; derived from T_delta if <= 0
  double theta_D = 0.0;      // phase during the defect (generalized)
  double theta_f = 0.0;      // phase after the defect

  /// theta_f choice that keeps the drive continuous at t = T_r for any T_r.
  static DefectSpec continuous_quench(double T_r, double omega_prime, double omega_d,
                                      double theta_D = 0.0) {
    DefectSpec s;
    s.kind = DefectKind::generalized;
    s.T_r = T_r;
    s.omega_prime = omega_prime;
    s.theta_D = theta_D;
    s.theta_f = (omega_prime - omega_d) * T_r + theta_D;  // = 2 pi T_r / T_delta
    return s;
  }
};

/// Build the piecewise schedule for a defect applied at t = 0.
inline DriveProtocol make_protocol(const DefectSpec& spec, double omega_d, double A) {
  if (!(omega_d > 0.0)) throw std::invalid_argument("make_protocol: omega_d must be > 0");
  if (A < 0.0) throw std::invalid_argument("make_protocol: A must be >= 0");

  constexpr double two_pi = 2.0 * std::numbers::pi;
  DriveProtocol p;
  p.amplitude = A;
  p.base_frequency = omega_d;

  switch (spec.kind) {
    case DefectKind::steady:
      p.segments = {{-kTimeInfinity, kTimeInfinity, omega_d, 0.0, 0.0}};
      p.final_phase = 0.0;
      break;
    case DefectKind::phase_ramp: {
      if (!(spec.T_delta > 0.0))
        throw std::invalid_argument("phase_ramp: T_delta must be > 0");
      p.segments = {{-kTimeInfinity, 0.0, omega_d, 0.0, 0.0},
                    {0.0, spec.T_delta, omega_d, 0.0, two_pi / spec.T_delta},
                    {spec.T_delta, kTimeInfinity, omega_d, two_pi, 0.0}};
      p.final_phase = two_pi;
      break;
    }
    case DefectKind::freq_quench: {
      if (!(spec.T_r > 0.0)) throw std::invalid_argument("freq_quench: T_r must be > 0");
      double wp = spec.omega_prime;
      if (wp <= 0.0) {
        if (!(spec.T_delta > 0.0))
          throw std::invalid_argument("freq_quench: need omega_prime or T_delta");
        wp = omega_d + two_pi / spec.T_delta;
      }
      p.segments = {{-kTimeInfinity, 0.0, omega_d, 0.0, 0.0},
                    {0.0, spec.T_r, wp, 0.0, 0.0},
                    {spec.T_r, kTimeInfinity, omega_d, spec.theta_f, 0.0}};
      p.final_phase = spec.theta_f;
      break;
    }
    case DefectKind::switch_off: {
      if (!(spec.T_r > 0.0)) throw std::invalid_argument("switch_off: T_r must be > 0");
      if (spec.T_delta > 0.0)
        throw std::invalid_argument("switch_off: ramp rule not applicable");
      p.segments = {{-kTimeInfinity, 0.0, omega_d, 0.0, 0.0},
                    {0.0, spec.T_r, 0.0, spec.theta_D, 0.0},
                    {spec.T_r, kTimeInfinity, omega_d, spec.theta_f, 0.0}};
      p.final_phase = spec.theta_f;
      break;
    }
    case DefectKind::generalized: {
      if (!(spec.T_r > 0.0)) throw std::invalid_argument("generalized: T_r must be > 0");
      double wp = spec.omega_prime;
      if (wp <= 0.0) {
        if (!(spec.T_delta > 0.0))
          throw std::invalid_argument("generalized: need omega_prime or T_delta");
        wp = omega_d + two_pi / spec.T_delta;
      }
      p.segments = {{-kTimeInfinity, 0.0, omega_d, 0.0, 0.0},
                    {0.0, spec.T_r, wp, spec.theta_D, 0.0},
                    {spec.T_r, kTimeInfinity, omega_d, spec.theta_f, 0.0}};
      p.final_phase = spec.theta_f;
      break;
    }
  }
  return p;
}

/// End of the transient (defect) window; 0 for a steady drive.
inline double defect_end(const DefectSpec& spec) {
  switch (spec.kind) {
    case DefectKind::steady: return 0.0;
    case DefectKind::phase_ramp: return spec.T_delta;
    default: return spec.T_r;
  }
}

}  // namespace dtcflip
