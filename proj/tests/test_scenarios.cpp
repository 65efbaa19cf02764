#include <doctest.h>

#include <cmath>
#include <numeric>

#include "ptrace/scenarios.hpp"

using namespace ptrace;

namespace {

std::int64_t plan_total(const std::vector<ReleaseStage>& plan) {
  std::int64_t n = 0;
  for (const auto& s : plan) n += s.count;
  return n;
}

}  // namespace

TEST_CASE("tc1 spec validates its arguments") {
  CHECK_THROWS_AS(make_tc1_spec(-0.1, 10, 1), std::invalid_argument);
  CHECK_THROWS_AS(make_tc1_spec(6.0, 10, 1), std::invalid_argument);
  CHECK_THROWS_AS(make_tc1_spec(1.0, 10, 1, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(make_tc1_spec(1.0, 10, 1, 1.5), std::invalid_argument);
}

TEST_CASE("tc1 geometry and boundary heads give a unit mean gradient") {
  auto spec = make_tc1_spec(0.0, 100, 1, 0.1);
  CHECK(spec.grid.nx() == 150);
  CHECK(spec.grid.ny() == 30);
  CHECK(spec.grid.nz() == 1);
  // One inlet and one outlet face per row; head difference equals Lx.
  REQUIRE(spec.bcs.constant_heads.size() == 2u * 30);
  double dh = spec.bcs.constant_heads[0].head - spec.bcs.constant_heads[1].head;
  CHECK(dh == 150.0);
  // Homogeneous case carries unit conductivity everywhere.
  for (double k : spec.conductivity.kxx) CHECK(k == 1.0);
  CHECK(plan_total(spec.release_plan) == 100);
  CHECK(spec.default_config.mode == SimMode::endpoint);
}

TEST_CASE("tc1 field is seed-deterministic and heterogeneous") {
  auto a = make_tc1_spec(1.0, 10, 42, 0.1);
  auto b = make_tc1_spec(1.0, 10, 42, 0.1);
  CHECK(a.conductivity.kxx == b.conductivity.kxx);
  auto c = make_tc1_spec(1.0, 10, 43, 0.1);
  CHECK(a.conductivity.kxx != c.conductivity.kxx);
  // Heterogeneous yet positive.
  double lo = 1e300, hi = 0.0;
  for (double k : a.conductivity.kxx) {
    lo = std::min(lo, k);
    hi = std::max(hi, k);
    CHECK(k > 0.0);
  }
  CHECK(hi / lo > 2.0);
}

TEST_CASE("tc1 homogeneous travel time follows the plug-flow prediction") {
  auto sc = build_tc1(0.0, 5, 1, 0.1);
  std::vector<FlowSnapshot> v;
  v.push_back(std::move(sc.snapshot));
  FlowStore store(std::move(v));
  SimulationConfig cfg = sc.spec.default_config;
  cfg.write_outputs = false;
  std::vector<Particle> finals;
  run_simulation(cfg, store, &finals);
  // Unit gradient, K = 1, unit porosity: v = 1 m/d over nx - 10 meters.
  double expect = (sc.spec.grid.nx() * 1.0 - 10.0) *
                  store.snapshot_at(0.0).porosity_at(0) / 1.0;
  for (const auto& p : finals) {
    CHECK(p.status == ParticleStatus::reached_boundary);
    CHECK(p.time == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("tc2 spec validates its arguments") {
  CHECK_THROWS_AS(make_tc2_spec(10, 5, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_tc2_spec(10, 5, 3), std::invalid_argument);
  CHECK_THROWS_AS(make_tc2_spec(10, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_tc2_spec(10, 5, 1, 0.0), std::invalid_argument);
}

TEST_CASE("tc2 layering, stresses and release staging") {
  auto spec = make_tc2_spec(100, 5, 1, 1.0);
  CHECK(spec.grid.nx() == 21);
  CHECK(spec.grid.ny() == 20);
  CHECK(spec.grid.nz() == 3);
  CHECK(spec.grid.dz() == std::vector<double>{200.0, 20.0, 130.0});
  CHECK(spec.bcs.recharge == 5e-3);
  CHECK(spec.bcs.wells.size() == 2);
  CHECK(spec.bcs.rivers.size() == 20);   // one river cell per row
  CHECK(!spec.bcs.drains.empty());
  // The aquitard is orders of magnitude tighter than the aquifers.
  std::size_t npl = 21u * 20u;
  CHECK(spec.conductivity.kxx[0] == 200.0);
  CHECK(spec.conductivity.kxx[npl] == 0.01);
  CHECK(spec.conductivity.kzz[2 * npl] == 10.0);

  REQUIRE(spec.release_plan.size() == 10);
  CHECK(plan_total(spec.release_plan) == 100);
  for (std::size_t s = 0; s < 10; ++s) {
    CHECK(spec.release_plan[s].time == 20.0 * s);
    CHECK(spec.release_plan[s].region.cells.size() == 4);
  }
  CHECK(spec.default_config.mode == SimMode::timeseries);
  CHECK(spec.default_config.timeseries.t_end == 60000.0);
}

TEST_CASE("tc2 refinement quadruples the cells over the same footprint") {
  auto base = make_tc2_spec(40, 5, 1, 1.0);
  auto fine = make_tc2_spec(40, 5, 2, 1.0);
  CHECK(fine.grid.nx() == 2 * base.grid.nx());
  CHECK(fine.grid.ny() == 2 * base.grid.ny());
  CHECK(fine.grid.dx() == base.grid.dx() / 2.0);
  CHECK(fine.grid.cell_count() == 4 * base.grid.cell_count());
  // Same physical release footprint, four times the cells.
  CHECK(fine.release_plan[0].region.cells.size() ==
        4 * base.release_plan[0].region.cells.size());
  // Total river conductance is refinement-invariant.
  double c_base = 0.0, c_fine = 0.0;
  for (const auto& r : base.bcs.rivers) c_base += r.conductance;
  for (const auto& r : fine.bcs.rivers) c_fine += r.conductance;
  CHECK(c_fine == doctest::Approx(c_base).epsilon(1e-12));
}

TEST_CASE("tc2 flow solution closes mass balance and activates the stresses") {
  auto sc = build_tc2(40, 5, 1, 0.2);
  const auto& snap = sc.snapshot;
  for (CellId c = 0; c < sc.spec.grid.cell_count(); ++c) {
    double mag = cell_flow_magnitude(snap, c);
    if (mag > 0.0) CHECK(std::abs(cell_mass_balance(snap, c)) / mag < 1e-8);
  }
  // The well cells show up as sinks in the solved sources.
  CellId w1 = sc.spec.bcs.wells[0].cell;
  CellId w3 = sc.spec.bcs.wells[1].cell;
  CHECK(classify_cell_snapshot(snap, w1) != SinkClass::no_sink);
  CHECK(classify_cell_snapshot(snap, w3) != SinkClass::no_sink);
  // Disabling the wells removes the sinks at their cells.
  ScenarioSpec quiet = sc.spec;
  quiet.bcs.wells.clear();
  auto snap2 = solve_scenario(quiet);
  CHECK(classify_cell_snapshot(snap2, w1) == SinkClass::no_sink);
  CHECK(classify_cell_snapshot(snap2, w3) == SinkClass::no_sink);
}

TEST_CASE("release plan redistribution keeps stages and balances counts") {
  auto spec = make_tc2_spec(100, 5, 1, 0.2);
  auto plan = redistribute_release_plan(spec.release_plan, 17);
  REQUIRE(plan.size() == spec.release_plan.size());
  CHECK(plan_total(plan) == 17);
  std::int64_t lo = 17, hi = 0;
  for (std::size_t s = 0; s < plan.size(); ++s) {
    CHECK(plan[s].time == spec.release_plan[s].time);
    CHECK(plan[s].region.cells == spec.release_plan[s].region.cells);
    lo = std::min(lo, plan[s].count);
    hi = std::max(hi, plan[s].count);
  }
  CHECK(hi - lo <= 1);
  CHECK_THROWS_AS(redistribute_release_plan({}, 5), std::invalid_argument);
}
