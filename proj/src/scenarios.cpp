#include "ptrace/scenarios.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

namespace ptrace {

namespace {

constexpr double kTc1CorrLen = 10.0;     // m
constexpr double kTc1OutletHead = 10.0;  // m

}  // namespace

ScenarioSpec make_tc1_spec(double sigma2, std::int64_t n_particles,
                           std::uint64_t seed, double scale) {
  if (sigma2 < 0.0 || sigma2 > 5.0)
    throw std::invalid_argument("tc1: sigma2 must lie in [0, 5]");
  if (scale <= 0.0 || scale > 1.0)
    throw std::invalid_argument("tc1: scale must lie in (0, 1]");

  int nx = static_cast<int>(std::lround(1500.0 * scale));
  int ny = static_cast<int>(std::lround(300.0 * scale));
  if (nx * 1.0 < 10.0 * kTc1CorrLen)
    std::cerr << "tc1: warning: domain spans fewer than 10 correlation lengths"
                 " in x; field statistics will degrade\n";

  ScenarioSpec spec;
  spec.name = "tc1";
  spec.scale = scale;
  spec.grid = Grid::structured(nx, ny, 1, 1.0, 1.0, {1.0});
  const Grid& grid = spec.grid;

  std::vector<double> k(static_cast<std::size_t>(grid.cell_count()), 1.0);
  if (sigma2 > 0.0) {
    GaussianField field = generate_field(nx, ny, 1.0, 1.0, kTc1CorrLen, seed);
    ConductivityField cond = scale_to_conductivity(field, sigma2);
    k = std::move(cond.k);
  }
  spec.conductivity = ConductivityTensor::isotropic(std::move(k));

  // Boundary-face heads differing by exactly Lx give a unit mean gradient.
  double inlet_head = kTc1OutletHead + nx * grid.dx();
  for (int j = 0; j < ny; ++j) {
    spec.bcs.constant_heads.push_back({grid.id(0, j, 0), Face{0, 0}, inlet_head});
    spec.bcs.constant_heads.push_back(
        {grid.id(nx - 1, j, 0), Face{0, 1}, kTc1OutletHead});
  }

  ReleaseStage stage;
  stage.time = 0.0;
  stage.count = n_particles;
  stage.region.kind = ReleaseRegion::Kind::line;
  stage.region.a = {10.0, 0.0, 0.5};
  stage.region.b = {10.0, ny * grid.dy(), 0.5};
  spec.release_plan.push_back(stage);

  spec.default_config.mode = SimMode::endpoint;
  spec.default_config.t_stop = kUntilTermination;
  spec.default_config.release_plan = spec.release_plan;
  spec.default_config.seed = seed;
  return spec;
}

ScenarioSpec make_tc2_spec(std::int64_t n_particles, int ts_count, int refine,
                           double scale) {
  if (refine < 1 || refine > 2)
    throw std::invalid_argument("tc2: refine must be 1 or 2");
  if (scale <= 0.0 || scale > 1.0)
    throw std::invalid_argument("tc2: scale must lie in (0, 1]");
  if (ts_count < 1) throw std::invalid_argument("tc2: ts_count must be >= 1");

  int base_nx = std::max(4, static_cast<int>(std::lround(21.0 * scale)));
  int base_ny = std::max(4, static_cast<int>(std::lround(20.0 * scale)));
  int nx = base_nx * refine;
  int ny = base_ny * refine;
  double dx = 500.0 / refine;
  double dy = 500.0 / refine;

  ScenarioSpec spec;
  spec.name = "tc2";
  spec.scale = scale;
  // Layers bottom-to-top: lower aquifer, aquitard, upper aquifer.
  spec.grid = Grid::structured(nx, ny, 3, dx, dy, {200.0, 20.0, 130.0});
  const Grid& grid = spec.grid;

  std::size_t npl = static_cast<std::size_t>(nx) * ny;
  ConductivityTensor tensor;
  tensor.kxx.resize(npl * 3);
  tensor.kyy.resize(npl * 3);
  tensor.kzz.resize(npl * 3);
  const double kh[3] = {200.0, 0.01, 50.0};
  const double kv[3] = {20.0, 0.01, 10.0};
  for (int kk = 0; kk < 3; ++kk)
    for (std::size_t m = 0; m < npl; ++m) {
      tensor.kxx[m + npl * kk] = kh[kk];
      tensor.kyy[m + npl * kk] = kh[kk];
      tensor.kzz[m + npl * kk] = kv[kk];
    }
  spec.conductivity = std::move(tensor);

  BoundaryConditionSet& bcs = spec.bcs;
  bcs.recharge = 5e-3;

  auto cell_at_fraction = [&](double fx, double fy, int layer) {
    int i = std::min(nx - 1, static_cast<int>(fx * nx));
    int j = std::min(ny - 1, static_cast<int>(fy * ny));
    return grid.id(i, j, layer);
  };

  // W1 pumps the upper aquifer mid-way toward the river, W3 the lower one.
  bcs.wells.push_back({cell_at_fraction(0.70, 0.50, 2), -7.5e4});
  bcs.wells.push_back({cell_at_fraction(0.50, 0.40, 0), -1.0e5});

  // East-edge river column in the top layer. Per-cell conductance scales
  // with the cell footprint so refinement keeps the same physical problem.
  for (int j = 0; j < ny; ++j)
    bcs.rivers.push_back(
        {grid.id(nx - 1, j, 2), 320.0, 317.0, 1e5 * (dy / 500.0)});

  // Drain row in the top layer, south of the wells.
  {
    int jd = std::min(ny - 1, static_cast<int>(0.25 * ny));
    int i0 = static_cast<int>(0.35 * nx);
    int i1 = static_cast<int>(0.85 * nx);
    for (int i = i0; i < i1; ++i)
      bcs.drains.push_back({grid.id(i, jd, 2), 322.5, 1e5 * (dx / 500.0)});
  }

  // Release region: the four 500 m top-layer cells nearest the up-gradient
  // (south-west) corner, one base cell in from the hull. Refinement covers
  // the same physical footprint with 4x as many cells.
  std::vector<CellId> release_cells;
  {
    int i0 = std::max(0, std::min(base_nx - 2, 1)) * refine;
    int j0 = std::max(0, std::min(base_ny - 2, 1)) * refine;
    for (int j = j0; j < j0 + 2 * refine; ++j)
      for (int i = i0; i < i0 + 2 * refine; ++i)
        release_cells.push_back(grid.id(i, j, 2));
  }

  // 10 injection stages, one every 20 days. Zero-count stages are kept so
  // the plan can be redistributed to a different particle total later.
  constexpr int kStages = 10;
  constexpr double kStageInterval = 20.0;  // d
  for (int s = 0; s < kStages; ++s) {
    ReleaseStage stage;
    stage.time = s * kStageInterval;
    stage.count = n_particles / kStages + (s < n_particles % kStages ? 1 : 0);
    stage.region.kind = ReleaseRegion::Kind::cell_top_faces;
    stage.region.cells = release_cells;
    stage.group = s;
    spec.release_plan.push_back(stage);
  }

  spec.default_config.mode = SimMode::timeseries;
  spec.default_config.timeseries.t_end = 60000.0;
  spec.default_config.timeseries.count = ts_count;
  spec.default_config.schedule.kind = ScheduleKind::dynamic;
  spec.default_config.weak_sink_policy = WeakSinkPolicy::pass_through;
  spec.default_config.release_plan = spec.release_plan;
  return spec;
}

std::vector<ReleaseStage> redistribute_release_plan(
    const std::vector<ReleaseStage>& plan, std::int64_t n_particles) {
  if (plan.empty())
    throw std::invalid_argument("scenario: cannot redistribute an empty plan");
  std::vector<ReleaseStage> out = plan;
  auto n = static_cast<std::int64_t>(out.size());
  for (std::int64_t s = 0; s < n; ++s)
    out[static_cast<std::size_t>(s)].count =
        n_particles / n + (s < n_particles % n ? 1 : 0);
  return out;
}

FlowSnapshot solve_scenario(const ScenarioSpec& spec,
                            const SolveOptions& solve_opts) {
  FlowSnapshot snap = solve_steady(spec.grid, spec.conductivity, spec.bcs,
                                   solve_opts);
  snap.start = 0.0;
  snap.duration = kUnboundedDuration;
  return snap;
}

Scenario build_tc1(double sigma2, std::int64_t n_particles, std::uint64_t seed,
                   double scale, const SolveOptions& solve_opts) {
  Scenario sc;
  sc.spec = make_tc1_spec(sigma2, n_particles, seed, scale);
  sc.snapshot = solve_scenario(sc.spec, solve_opts);
  return sc;
}

Scenario build_tc2(std::int64_t n_particles, int ts_count, int refine,
                   double scale, const SolveOptions& solve_opts) {
  Scenario sc;
  sc.spec = make_tc2_spec(n_particles, ts_count, refine, scale);
  sc.snapshot = solve_scenario(sc.spec, solve_opts);
  return sc;
}

}  // namespace ptrace
