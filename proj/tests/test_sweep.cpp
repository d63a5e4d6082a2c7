#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <numbers>

#include "dtcflip/sweep.hpp"

using namespace dtcflip;

namespace {
constexpr double pi = std::numbers::pi;

SweepPlan po_plan(double T_delta_over_Td, double Ttilde, std::size_t n_traj) {
  SweepPlan plan;
  plan.base.kind = ModelKind::po;
  plan.base.Omega = 1.0;
  plan.base.gamma = 0.1;
  plan.base.Ttilde = Ttilde;
  plan.base.omega_d = 2.0;
  plan.base.A = 0.6;  // A_r + 0.4
  plan.base.defect.kind = DefectKind::phase_ramp;
  plan.base.defect.T_delta = T_delta_over_Td * pi;
  plan.n_traj = n_traj;
  plan.master_seed = 77;
  return plan;
}
}  // namespace

TEST_CASE("noiseless PO point yields a deterministic integer outcome") {
  for (double tfac : {5.0, 25.0}) {
    auto plan = po_plan(tfac, 0.0, 1);
    const auto res = run_point(plan, 0, {});
    REQUIRE(res.outcomes.size() == 1);
    const auto& o = res.outcomes[0];
    CHECK(!o.diverged);
    CHECK(!o.unreliable);
    const bool expect_flip = tfac > 10.0;
    CHECK(o.flipped == expect_flip);
    const double target = expect_flip ? pi : 0.0;
    CHECK(std::abs(std::abs(o.dphi) - target) < 0.05);
    CHECK(std::abs(o.w - std::round(o.w)) < 0.05);
  }
}

TEST_CASE("scheduling independence: k workers reproduce the serial result") {
  auto plan = po_plan(10.0, 1e-4, 12);
  const auto serial = run_point(plan, 3, {}, 1);
  const auto parallel = run_point(plan, 3, {}, 4);
  REQUIRE(serial.outcomes.size() == parallel.outcomes.size());
  for (std::size_t i = 0; i < serial.outcomes.size(); ++i) {
    CHECK(serial.outcomes[i].dphi == parallel.outcomes[i].dphi);
    CHECK(serial.outcomes[i].w == parallel.outcomes[i].w);
    CHECK(serial.outcomes[i].flipped == parallel.outcomes[i].flipped);
  }
  CHECK(serial.ps.P_s == parallel.ps.P_s);
}

TEST_CASE("re-running with the stored master seed reproduces P_s exactly") {
  auto plan = po_plan(10.0, 1e-4, 10);
  const auto a = run_point(plan, 0, {});
  const auto b = run_point(plan, 0, {});
  CHECK(a.ps.P_s == b.ps.P_s);
  for (std::size_t i = 0; i < a.outcomes.size(); ++i)
    CHECK(a.outcomes[i].w == b.outcomes[i].w);
}

TEST_CASE("grid points iterate row-major over axes") {
  SweepPlan plan = po_plan(10.0, 0.0, 1);
  plan.axes = {{"T_delta", {1.0, 2.0}}, {"A", {0.5, 0.6, 0.7}}};
  const auto pts = grid_points(plan);
  REQUIRE(pts.size() == 6);
  CHECK(pts[0] == std::vector<double>{1.0, 0.5});
  CHECK(pts[1] == std::vector<double>{1.0, 0.6});
  CHECK(pts[5] == std::vector<double>{2.0, 0.7});
  CHECK(plan.n_cells() == 6);
}

TEST_CASE("apply_axis rejects unknown names") {
  ModelConfig cfg;
  CHECK_THROWS_AS(apply_axis(cfg, "bogus", 1.0), std::invalid_argument);
  apply_axis(cfg, "N", 5000.0);
  CHECK(cfg.N == 5000);
  apply_axis(cfg, "theta_f", 1.5);
  CHECK(cfg.defect.theta_f == 1.5);
}

TEST_CASE("persist/load round-trips an ensemble result") {
  auto plan = po_plan(10.0, 1e-4, 8);
  plan.axes = {{"T_delta", {10.0 * pi}}};
  const double coord = 10.0 * pi;
  auto res = run_point(plan, 0, std::span<const double>(&coord, 1));
  const std::string path = "/tmp/dtcflip_test_ensemble.csv";
  persist(res, path);
  const auto back = load(path);
  CHECK(back.ps.P_s == res.ps.P_s);
  CHECK(back.ps.se == res.ps.se);
  CHECK(back.cell_index == res.cell_index);
  CHECK(back.coords == res.coords);
  CHECK(back.coord_names == res.coord_names);
  REQUIRE(back.outcomes.size() == res.outcomes.size());
  for (std::size_t i = 0; i < res.outcomes.size(); ++i) {
    CHECK(back.outcomes[i].w == res.outcomes[i].w);
    CHECK(back.outcomes[i].dphi == res.outcomes[i].dphi);
    CHECK(back.outcomes[i].flipped == res.outcomes[i].flipped);
  }
  std::remove(path.c_str());
  std::remove((path + ".json").c_str());
}

TEST_CASE("corrupted or mismatched files are rejected") {
  const std::string path = "/tmp/dtcflip_test_corrupt.csv";
  {
    std::ofstream csv(path);
    csv << "not,a,valid,header\n";
    std::ofstream js(path + ".json");
    js << "{\"schema_version\": " << kSchemaVersion << ", \"cell_index\": 0,"
       << "\"coord_names\": [], \"coords\": [], \"master_seed\": 0, \"n_traj\": 0}\n";
  }
  CHECK_THROWS(load(path));
  {
    std::ofstream js(path + ".json");
    js << "{\"schema_version\": 999}\n";
  }
  CHECK_THROWS(load(path));
  CHECK_THROWS(load("/tmp/dtcflip_does_not_exist.csv"));
  std::remove(path.c_str());
  std::remove((path + ".json").c_str());
}

TEST_CASE("plan fingerprint reacts to any physical parameter change") {
  auto a = po_plan(10.0, 1e-4, 100);
  auto b = a;
  CHECK(plan_fingerprint(a) == plan_fingerprint(b));
  b.base.gamma = 0.11;
  CHECK(plan_fingerprint(a) != plan_fingerprint(b));
  b = a;
  b.base.defect.T_delta *= 1.0000001;
  CHECK(plan_fingerprint(a) != plan_fingerprint(b));
  b = a;
  b.master_seed += 1;
  CHECK(plan_fingerprint(a) != plan_fingerprint(b));
  b = a;
  b.axes.push_back({"A", {0.5}});
  CHECK(plan_fingerprint(a) != plan_fingerprint(b));
}

TEST_CASE("bitflip diagram marks a flip region for the noiseless PO") {
  SweepPlan plan = po_plan(0.0, 0.0, 1);
  plan.axes = {{"T_delta", {5.0 * pi, 25.0 * pi}}, {"A", {0.6}}};
  const auto d = bitflip_diagram(plan, 2);
  REQUIRE(d.dphi.size() == 2);
  CHECK(d.flipped[0][0] == 0);
  CHECK(d.flipped[1][0] == 1);
  CHECK(std::abs(std::abs(d.dphi[1][0]) - pi) < 0.05);
}

TEST_CASE("curve returns one row per axis value") {
  SweepPlan plan = po_plan(0.0, 0.0, 1);
  plan.axes = {{"T_delta", {5.0 * pi, 25.0 * pi}}};
  const auto rows = curve(plan);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].ps.P_s == 0.0);
  CHECK(rows[1].ps.P_s == 1.0);
}
