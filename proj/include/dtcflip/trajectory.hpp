#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dtcflip {

/// Uniformly sampled time series of the model order parameter plus metadata.
///
/// `x` is the primary order parameter: sin(u) for the pendulum, Sx/N for the
/// Dicke model. `photon` is |a|^2/N (mean-field) or |a|^2 (TWA/DTWA); empty
/// for the pendulum.
struct Trajectory {
  std::vector<double> times;
  std::vector<double> x;
  std::vector<double> photon;

  bool diverged = false;
  double t_diverged = 0.0;

  // Largest relative deviation of any spin norm from its exact value,
  // measured each step before renormalization. Zero for the pendulum.
  double max_spin_norm_drift = 0.0;

  double dt = 0.0;          // integration step
  double dt_sample = 0.0;   // dt * sample_stride
  std::uint64_t master_seed = 0;
  std::uint64_t trajectory_index = 0;
  std::string model;        // "po", "odm_mf", "odm_twa", "odm_dtwa"

  std::size_t size() const { return times.size(); }
};

}  // namespace dtcflip
