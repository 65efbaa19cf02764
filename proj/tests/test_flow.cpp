#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "ptrace/flow.hpp"

using namespace ptrace;

namespace {

BoundaryConditionSet x_gradient_bcs(const Grid& g, double h_in, double h_out) {
  BoundaryConditionSet bcs;
  for (int k = 0; k < g.nz(); ++k)
    for (int j = 0; j < g.ny(); ++j) {
      bcs.constant_heads.push_back({g.id(0, j, k), Face{0, 0}, h_in});
      bcs.constant_heads.push_back({g.id(g.nx() - 1, j, k), Face{0, 1}, h_out});
    }
  return bcs;
}

}  // namespace

TEST_CASE("two-cell column reproduces the exact harmonic conductance") {
  // K = 1 and 0.5 on unit cells: interblock C = 1/(0.5/1 + 0.5/0.5) = 2/3.
  Grid g = Grid::structured(2, 1, 1, 1.0, 1.0, {1.0});
  ConductivityTensor k = ConductivityTensor::isotropic({1.0, 0.5});
  auto snap = solve_steady(g, k, x_gradient_bcs(g, 1.0, 0.0));
  double dh = snap.heads[0] - snap.heads[1];
  double q = snap.face_flow(0, {0, 1});
  CHECK(q == doctest::Approx((2.0 / 3.0) * dh).epsilon(1e-14));
  // Series resistances: 0.5 + 1.5 + 1.0, so q = 1/3 for unit head drop.
  CHECK(q == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("uniform column yields an exactly linear head profile") {
  Grid g = Grid::structured(10, 2, 1, 1.0, 1.0, {1.0});
  ConductivityTensor k =
      ConductivityTensor::isotropic(std::vector<double>(20, 3.0));
  auto snap = solve_steady(g, k, x_gradient_bcs(g, 20.0, 10.0));
  for (int i = 0; i < 10; ++i)
    CHECK(snap.heads[g.id(i, 0, 0)] ==
          doctest::Approx(20.0 - (i + 0.5)).epsilon(1e-12));
  // Every interior and hull face carries the same flow.
  for (int i = 0; i <= 10; ++i)
    CHECK(snap.fx[snap.fx_index(i, 1, 0)] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("solver input validation") {
  Grid g = Grid::structured(2, 1, 1, 1.0, 1.0, {1.0});
  ConductivityTensor k = ConductivityTensor::isotropic({1.0, 1.0});
  BoundaryConditionSet bad;
  // No head-carrying condition anywhere.
  CHECK_THROWS_AS(solve_steady(g, k, bad), SolveError);
  // Constant head on an interior face.
  BoundaryConditionSet interior;
  interior.constant_heads.push_back({0, Face{0, 1}, 1.0});
  CHECK_THROWS_AS(solve_steady(g, k, interior), std::invalid_argument);
  // Non-positive conductivity.
  ConductivityTensor k0 = ConductivityTensor::isotropic({1.0, 0.0});
  CHECK_THROWS_AS(solve_steady(g, k0, x_gradient_bcs(g, 1.0, 0.0)),
                  std::invalid_argument);
}

TEST_CASE("river clamp switches to a constant inflow below the bottom") {
  // Strong extraction pulls the cell head below the river bottom; the
  // river term must then contribute C * (stage - bottom) regardless of h.
  Grid g = Grid::structured(3, 1, 1, 1.0, 1.0, {1.0});
  ConductivityTensor k = ConductivityTensor::isotropic({1.0, 1.0, 1.0});
  BoundaryConditionSet bcs = x_gradient_bcs(g, 5.0, 5.0);
  bcs.rivers.push_back({1, 10.0, 8.0, 2.0});
  bcs.wells.push_back({1, -100.0});
  auto snap = solve_steady(g, k, bcs);
  CHECK(snap.heads[1] < 8.0);
  // cell_src = well + clamped river leakage.
  CHECK(snap.cell_src[1] == doctest::Approx(-100.0 + 2.0 * (10.0 - 8.0)).epsilon(1e-12));
  CHECK(classify_cell_snapshot(snap, 1) == SinkClass::strong_sink);
}

TEST_CASE("drain clamp carries zero flow when the head sits below it") {
  Grid g = Grid::structured(3, 1, 1, 1.0, 1.0, {1.0});
  ConductivityTensor k = ConductivityTensor::isotropic({1.0, 1.0, 1.0});
  BoundaryConditionSet bcs = x_gradient_bcs(g, 5.0, 5.0);
  bcs.drains.push_back({1, 100.0, 2.0});  // far above any head
  auto snap = solve_steady(g, k, bcs);
  CHECK(snap.cell_src[1] == 0.0);
  // Active drain for comparison.
  bcs.drains[0].elevation = 4.0;
  auto snap2 = solve_steady(g, k, bcs);
  CHECK(snap2.cell_src[1] < 0.0);
  CHECK(snap2.cell_src[1] ==
        doctest::Approx(2.0 * (4.0 - snap2.heads[1])).epsilon(1e-12));
}

TEST_CASE("mass balance closes cell by cell") {
  Grid g = Grid::structured(6, 4, 2, 2.0, 1.0, {1.0, 2.0});
  std::vector<double> kv(static_cast<std::size_t>(g.cell_count()));
  for (std::size_t c = 0; c < kv.size(); ++c) kv[c] = 1.0 + 0.1 * (c % 7);
  ConductivityTensor k = ConductivityTensor::isotropic(kv);
  BoundaryConditionSet bcs = x_gradient_bcs(g, 3.0, 1.0);
  bcs.recharge = 1e-3;
  bcs.wells.push_back({g.id(2, 2, 0), -0.5});
  auto snap = solve_steady(g, k, bcs);
  for (CellId c = 0; c < g.cell_count(); ++c) {
    double mag = cell_flow_magnitude(snap, c);
    REQUIRE(mag > 0.0);
    CHECK(std::abs(cell_mass_balance(snap, c)) / mag < 1e-10);
  }
}

TEST_CASE("sink classification distinguishes weak from strong") {
  FlowSnapshot s;
  s.grid = Grid::structured(1, 1, 1, 1.0, 1.0, {1.0});
  s.heads = {0.0};
  s.fx = {1.0, 0.0};
  s.fy = {0.0, 0.0};
  s.fz = {0.0, 0.0};
  s.cell_src = {-1.0};
  s.porosity = {1.0};
  CHECK(classify_cell_snapshot(s, 0) == SinkClass::strong_sink);
  s.fx[1] = 0.5;  // outflow continues
  CHECK(classify_cell_snapshot(s, 0) == SinkClass::weak_sink);
  s.cell_src[0] = 0.0;
  CHECK(classify_cell_snapshot(s, 0) == SinkClass::no_sink);
}

TEST_CASE("snapshot save/load round-trips bit-exactly") {
  Grid g = Grid::structured(3, 2, 2, 1.5, 2.5, {1.0, 3.0});
  ConductivityTensor k =
      ConductivityTensor::isotropic(std::vector<double>(12, 2.0));
  BoundaryConditionSet bcs = x_gradient_bcs(g, 7.0, 2.0);
  auto snap = solve_steady(g, k, bcs);
  auto path = std::filesystem::temp_directory_path() / "ptrace_snap_test.dat";
  save_snapshot(snap, path.string());
  auto back = load_snapshot(path.string());
  CHECK(back.grid == snap.grid);
  CHECK(back.heads == snap.heads);
  CHECK(back.fx == snap.fx);
  CHECK(back.fy == snap.fy);
  CHECK(back.fz == snap.fz);
  CHECK(back.cell_src == snap.cell_src);
  CHECK(back.porosity == snap.porosity);
  CHECK(std::isinf(back.duration));
  std::filesystem::remove(path);
}

TEST_CASE("snapshot loader reports malformed files") {
  auto path = std::filesystem::temp_directory_path() / "ptrace_snap_bad.dat";
  {
    std::FILE* f = std::fopen(path.string().c_str(), "w");
    std::fputs("PTRACE-FLOW v999\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_WITH_AS(load_snapshot(path.string()),
                       doctest::Contains("unsupported version"), std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("flow store validates period chaining") {
  Grid g = Grid::structured(2, 1, 1, 1.0, 1.0, {1.0});
  ConductivityTensor k = ConductivityTensor::isotropic({1.0, 1.0});
  auto snap = solve_steady(g, k, x_gradient_bcs(g, 1.0, 0.0));

  FlowSnapshot a = snap, b = snap;
  a.start = 0.0;
  a.duration = 10.0;
  b.start = 10.0;
  b.duration = kUnboundedDuration;
  CHECK_NOTHROW(FlowStore({a, b}));

  FlowSnapshot gap = b;
  gap.start = 11.0;
  CHECK_THROWS_AS(FlowStore({a, gap}), std::invalid_argument);

  FlowSnapshot early_inf = a;
  early_inf.duration = kUnboundedDuration;
  CHECK_THROWS_AS(FlowStore({early_inf, b}), std::invalid_argument);

  // A boundary time selects the later period.
  FlowStore store({a, b});
  CHECK(store.snapshot_at(10.0).start == 10.0);
  CHECK(store.snapshot_at(9.999).start == 0.0);
}

TEST_CASE("face velocities divide by porosity and face area") {
  Grid g = Grid::structured(2, 1, 1, 1.0, 2.0, {3.0});
  FlowSnapshot s;
  s.grid = g;
  s.heads = {0.0, 0.0};
  s.fx = {6.0, 6.0, 6.0};
  s.fy.assign(4, 0.0);
  s.fz.assign(4, 0.0);
  s.cell_src = {0.0, 0.0};
  s.porosity = {0.5};
  std::vector<FlowSnapshot> v;
  v.push_back(std::move(s));
  FlowStore store(std::move(v));
  auto vel = store.face_velocities(0, 0.0);
  CHECK(vel[0] == doctest::Approx(6.0 / (2.0 * 3.0 * 0.5)));
  CHECK(vel[1] == vel[0]);
}
