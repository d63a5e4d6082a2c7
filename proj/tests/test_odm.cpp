#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "dtcflip/analysis.hpp"
#include "dtcflip/odm.hpp"

using namespace dtcflip;

namespace {
constexpr double pi = std::numbers::pi;

DriveProtocol steady(double omega_d, double A) {
  return make_protocol(DefectSpec{}, omega_d, A);
}

ODMParams base_params(double kappa, double lambda0_rel) {
  ODMParams p;
  p.kappa = kappa;
  p.lambda0 = lambda0_rel * lambda_c(1.0, kappa);
  return p;
}
}  // namespace

TEST_CASE("critical coupling") {
  CHECK(lambda_c(1.0, 0.0) == doctest::Approx(0.5));
  CHECK(lambda_c(1.0, 1.0) == doctest::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-4));
  CHECK_THROWS_AS(lambda_c(0.0, 0.1), std::invalid_argument);
}

TEST_CASE("lower polariton limits and values") {
  CHECK(lower_polariton(1.0, 0.0, 0.0).omega_minus == doctest::Approx(1.0));
  CHECK(lower_polariton(1.0, 0.0, 0.5).omega_minus == doctest::Approx(0.0).epsilon(1e-12));
  const auto r = lower_polariton(1.0, 0.1, 0.9 * lambda_c(1.0, 0.1));
  CHECK(r.real);
  CHECK(r.omega_minus == doctest::Approx(0.3138).epsilon(1e-3));

  // kappa = 1, lambda0 = 0.9 lambda_c: omega_minus^2 < 0, tagged non-real
  const auto over = lower_polariton(1.0, 1.0, 0.9 * lambda_c(1.0, 1.0));
  CHECK(!over.real);
  CHECK(over.omega_minus_sq < 0.0);

  // small lambda0 with kappa > 0: inner root negative -> domain error
  CHECK_THROWS_AS(lower_polariton(1.0, 0.5, 0.01), std::domain_error);
}

TEST_CASE("resonance constants") {
  // at lambda0 = lambda_c the polariton is non-real for kappa > 0
  // (omega_minus^2 = -kappa^2/4), so the resonance is undefined there
  CHECK_THROWS_AS(odm_resonance(1.0, 0.1, lambda_c(1.0, 0.1)), std::domain_error);
  const auto [wr, Ar] = odm_resonance(1.0, 0.1, 0.9 * lambda_c(1.0, 0.1));
  CHECK(wr == doctest::Approx(2.0 * 0.3138).epsilon(1e-3));
  CHECK(Ar == doctest::Approx(0.0432).epsilon(1e-2));
  CHECK(odm_resonance(1.0, 0.0, 0.25).second == doctest::Approx(0.0));
}

TEST_CASE("static bifurcation sits at lambda_c within 1%") {
  const double lc = lambda_c(1.0, 0.1);
  StepperConfig cfg;
  cfg.t_end = 3000.0;
  cfg.sample_stride = 50;
  NoiseStream s(0, 0);
  for (double rel : {0.99, 1.01}) {
    ODMParams p = base_params(0.1, rel);
    p.protocol = steady(2.0, 0.0);
    const auto traj = simulate_odm(p, cfg, s);
    REQUIRE(!traj.diverged);
    double late = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < traj.size(); ++i)
      if (traj.times[i] > 2500.0) {
        late += std::abs(traj.x[i]);
        ++n;
      }
    late /= static_cast<double>(n);
    if (rel < 1.0) CHECK(late < 1e-2);
    else CHECK(late > 5e-2);
  }
  (void)lc;
}

TEST_CASE("undriven superradiant fixed point matches the analytic value") {
  ODMParams p = base_params(1.0, 1.1);
  p.protocol = steady(0.8, 0.0);
  StepperConfig cfg;
  cfg.t_end = 400.0;
  cfg.sample_stride = 20;
  NoiseStream s(0, 0);
  const auto traj = simulate_odm(p, cfg, s);
  const double lc = lambda_c(1.0, 1.0);
  const double sx_exact = 0.5 * std::sqrt(1.0 - std::pow(lc / p.lambda0, 4));
  double late = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < traj.size(); ++i)
    if (traj.times[i] > 350.0) {
      late += std::abs(traj.x[i]);
      ++n;
    }
  CHECK(late / n == doctest::Approx(sx_exact).epsilon(0.01));
  CHECK(traj.photon.back() > 0.0);
}

TEST_CASE("initial states match the prescribed moments") {
  const MFState mf = initial_mf_state(1e-6);
  CHECK(mf.sz == doctest::Approx(-0.5).epsilon(1e-9));
  CHECK(mf.alpha_R == doctest::Approx(1e-6));
  CHECK(mf.sx == doctest::Approx(0.5e-6));

  ODMParams p = base_params(1.0, 0.9);
  p.method = ODMMethod::twa;
  p.N = 100;
  NoiseStream s(77, 0);
  double ma = 0.0, mi = 0.0, m2 = 0.0;
  const int n = 10000;
  for (int k = 0; k < n; ++k) {
    const TWAState st = initial_twa_state(p, s);
    ma += st.a_R;
    mi += st.a_I;
    m2 += st.a_R * st.a_R + st.a_I * st.a_I;
    CHECK(st.Sz == doctest::Approx(-50.0).epsilon(1e-9));
  }
  CHECK(std::abs(ma / n) < 0.02);
  CHECK(std::abs(mi / n) < 0.02);
  CHECK(m2 / n == doctest::Approx(0.5).epsilon(0.05));

  p.method = ODMMethod::dtwa;
  p.N = 1000;
  const DTWAState d = initial_dtwa_state(p, s);
  double sum_z = 0.0, sum_x = 0.0, sum_y = 0.0;
  for (std::size_t i = 0; i < p.N; ++i) {
    CHECK((d.sx[i] == 1.0 || d.sx[i] == -1.0));
    CHECK((d.sy[i] == 1.0 || d.sy[i] == -1.0));
    sum_z += d.sz[i];
    sum_x += d.sx[i];
    sum_y += d.sy[i];
  }
  CHECK(sum_z == doctest::Approx(-1000.0));
  CHECK(std::abs(sum_x) < 150.0);  // ~4 sigma of a +-1 sum over N = 1000
  CHECK(std::abs(sum_y) < 150.0);
}

TEST_CASE("drift vanishes at the normal-phase fixed point") {
  ODMParams p = base_params(1.0, 0.9);
  const auto d = odm_drift_mf({0.0, 0.0, 0.0, 0.0, -0.5}, 0.7, p);
  for (double v : d) CHECK(v == 0.0);
}

TEST_CASE("decoupled limit: spins frozen, cavity pure decay") {
  ODMParams p = base_params(1.0, 0.0);
  const auto d = odm_drift_mf({0.3, -0.2, 0.0, 0.0, -0.5}, 0.0, p);
  CHECK(d[2] == 0.0);
  CHECK(d[3] == 0.0);
  CHECK(d[4] == 0.0);
  CHECK(d[0] == doctest::Approx(-0.2 - 0.3));
  CHECK(d[1] == doctest::Approx(-0.3 + 0.2));
}

TEST_CASE("TWA vacuum floor: <|a|^2> relaxes to 1/2") {
  ODMParams p = base_params(1.0, 0.0);
  p.method = ODMMethod::twa;
  p.N = 1000;
  p.protocol = steady(0.8, 0.0);
  StepperConfig cfg;
  cfg.t_end = 200.0;
  cfg.sample_stride = 20;
  double sum = 0.0;
  std::size_t n = 0;
  for (std::uint64_t k = 0; k < 400; ++k) {
    NoiseStream s(555, k);
    const auto traj = simulate_odm(p, cfg, s);
    for (std::size_t i = 0; i < traj.size(); ++i)
      if (traj.times[i] > 50.0) {
        sum += traj.photon[i];
        ++n;
      }
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("rescaled cavity fluctuations in the NP scale as 1/N") {
  // <|alpha|^2> = <|a|^2>/N = 1/(2N): fit exponent over three decades
  ODMParams p = base_params(1.0, 0.5);
  p.method = ODMMethod::twa;
  p.protocol = steady(0.8, 0.0);
  StepperConfig cfg;
  cfg.t_end = 150.0;
  cfg.sample_stride = 25;
  std::vector<double> logN, logV;
  for (std::size_t N : {1000ull, 10000ull, 100000ull}) {
    p.N = N;
    double sum = 0.0;
    std::size_t n = 0;
    for (std::uint64_t k = 0; k < 150; ++k) {
      NoiseStream s(901, k);
      const auto traj = simulate_odm(p, cfg, s);
      for (std::size_t i = 0; i < traj.size(); ++i)
        if (traj.times[i] > 50.0) {
          sum += traj.photon[i] / static_cast<double>(N);
          ++n;
        }
    }
    logN.push_back(std::log(static_cast<double>(N)));
    logV.push_back(std::log(sum / n));
  }
  const double slope = (logV.back() - logV.front()) / (logN.back() - logN.front());
  CHECK(slope == doctest::Approx(-1.0).epsilon(0.1));
}

TEST_CASE("Z2 reflection maps solutions to solutions") {
  StepperConfig cfg;
  cfg.t_end = 300.0;
  cfg.sample_stride = 10;
  NoiseStream s(0, 0);
  ODMParams p = base_params(0.1, 0.9);
  const auto [wr, Ar] = odm_resonance(1.0, 0.1, p.lambda0);
  p.protocol = steady(wr, Ar + 0.1);
  const auto plus = simulate_odm(p, cfg, s);
  p.epsilon = -p.epsilon;
  const auto minus = simulate_odm(p, cfg, s);
  REQUIRE(plus.size() == minus.size());
  for (std::size_t i = 0; i < plus.size(); ++i)
    CHECK(std::abs(plus.x[i] + minus.x[i]) < 1e-10);
}

TEST_CASE("spin norms are conserved along production trajectories") {
  // mean-field, 200 driving cycles at dt = 0.01
  ODMParams p = base_params(0.1, 0.9);
  const auto [wr, Ar] = odm_resonance(1.0, 0.1, p.lambda0);
  p.protocol = steady(wr, Ar + 0.1);
  const double Td = 2.0 * pi / wr;
  const double dt = 0.01;
  const std::size_t n = static_cast<std::size_t>(std::llround(200.0 * Td / dt));

  const MFState s0 = initial_mf_state(p.epsilon);
  std::array<double, 5> y{s0.alpha_R, s0.alpha_I, s0.sx, s0.sy, s0.sz};
  auto drift = [&](const std::array<double, 5>& st, double t) {
    return odm_drift_mf(st, p.lambda0 * p.protocol.value(t), p);
  };
  double max_drift = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    y = heun_step_det(drift, y, static_cast<double>(i) * dt, dt);
    detail::renorm_spin(y, 0.5);
    const double norm = std::sqrt(y[2] * y[2] + y[3] * y[3] + y[4] * y[4]);
    max_drift = std::max(max_drift, std::abs(norm - 0.5) / 0.5);
  }
  CHECK(max_drift < 1e-5);

  // DTWA per-spin norms via the production simulator at small N
  ODMParams pd = base_params(1.0, 0.9);
  pd.method = ODMMethod::dtwa;
  pd.N = 8;
  pd.protocol = steady(0.8, 0.55);
  StepperConfig cfg;
  cfg.t_start = 0.0;
  cfg.t_end = 200.0 * 2.0 * pi / 0.8;
  cfg.sample_stride = 100;
  NoiseStream sd(13, 0);
  const auto traj = simulate_odm(pd, cfg, sd);
  CHECK(!traj.diverged);
  for (double x : traj.x) CHECK(std::abs(x) <= 0.5 * std::sqrt(3.0) + 1e-9);
}

TEST_CASE("initial-noise-only TWA reproduces the mean-field attractor") {
  ODMParams mf = base_params(0.1, 0.9);
  const auto [wr, Ar] = odm_resonance(1.0, 0.1, mf.lambda0);
  mf.protocol = steady(wr, Ar + 0.1);
  StepperConfig cfg;
  cfg.t_end = 250.0 * 2.0 * pi / wr;
  cfg.sample_stride = 5;
  NoiseStream s0(0, 0);
  const auto ref = simulate_odm(mf, cfg, s0);

  ODMParams tw = mf;
  tw.method = ODMMethod::twa;
  tw.N = 10000;
  tw.initial_noise_only = true;
  NoiseStream s1(424242, 5);
  const auto single = simulate_odm(tw, cfg, s1);

  auto steady_amp = [&](const Trajectory& t) {
    const auto ps = complex_amplitude(t.times, t.x, 0.5 * wr);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < ps.size(); ++i)
      if (ps.times[i] > 0.8 * cfg.t_end) {
        sum += ps.R[i];
        ++n;
      }
    return sum / static_cast<double>(n);
  };
  const double a_ref = steady_amp(ref);
  const double a_one = steady_amp(single);
  CHECK(a_ref > 0.01);
  CHECK(a_one == doctest::Approx(a_ref).epsilon(0.05));
}

TEST_CASE("defect drives the lambda0 > lambda_c system into the light-induced NP") {
  ODMParams p = base_params(1.0, 1.1);
  p.method = ODMMethod::twa;
  p.N = 5000;
  const double wd = 0.8;
  const double Td = 2.0 * pi / wd;
  DefectSpec spec;
  spec.kind = DefectKind::phase_ramp;
  spec.T_delta = 1.4 * Td;
  p.protocol = make_protocol(spec, wd, 0.55);
  StepperConfig cfg;
  cfg.t_start = -100.0 * Td;
  cfg.t_end = spec.T_delta + 5.0 * Td;
  cfg.sample_stride = 5;
  NoiseStream s(2718, 0);
  const auto traj = simulate_odm(p, cfg, s);
  REQUIRE(!traj.diverged);
  double min_ph = 1e300, pre_ph = 0.0;
  std::size_t n_pre = 0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (traj.times[i] > 0.0 && traj.times[i] < spec.T_delta)
      min_ph = std::min(min_ph, traj.photon[i]);
    if (traj.times[i] > -20.0 * Td && traj.times[i] < 0.0) {
      pre_ph += traj.photon[i];
      ++n_pre;
    }
  }
  CHECK(min_ph < 10.0);
  CHECK(pre_ph / n_pre > 10.0);
}

TEST_CASE("method names round-trip") {
  for (auto m : {ODMMethod::mean_field, ODMMethod::twa, ODMMethod::dtwa})
    CHECK(odm_method_from_string(to_string(m)) == m);
  CHECK(odm_method_from_string("mf") == ODMMethod::mean_field);
  CHECK_THROWS_AS(odm_method_from_string("x"), std::invalid_argument);
}
