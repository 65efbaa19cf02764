#pragma once

#include <cstdint>
#include <string>

#include "ptrace/driver.hpp"
#include "ptrace/flow.hpp"
#include "ptrace/geostat.hpp"

namespace ptrace {

// A fully specified test problem: grid, conductivity, boundary conditions,
// release plan and default simulation settings.
struct ScenarioSpec {
  std::string name;
  Grid grid;
  ConductivityTensor conductivity;
  BoundaryConditionSet bcs;
  std::vector<ReleaseStage> release_plan;
  SimulationConfig default_config;
  double scale = 1.0;
};

struct Scenario {
  ScenarioSpec spec;
  FlowSnapshot snapshot;
};

// Heterogeneous 2D aquifer: 1500*scale x 300*scale cells of 1 m, constant
// heads on the west/east hull faces chosen for a unit mean gradient,
// log-conductivity field exp(sqrt(sigma2) * Y) with correlation length
// 10 m, particles released along the line x = 10 m.
ScenarioSpec make_tc1_spec(double sigma2, std::int64_t n_particles,
                           std::uint64_t seed, double scale = 1.0);
Scenario build_tc1(double sigma2, std::int64_t n_particles, std::uint64_t seed,
                   double scale = 1.0, const SolveOptions& solve_opts = {});

// Layered 3D aquifer: two anisotropic aquifers separated by an aquitard,
// recharge, two wells, an east-edge river and a drain row; particles
// released from four top faces in 10 stages every 20 days. The horizontal
// layout is fixed at 21x20 cells of 500 m (refine=2 halves the spacing).
ScenarioSpec make_tc2_spec(std::int64_t n_particles, int ts_count = 5,
                           int refine = 1, double scale = 1.0);
Scenario build_tc2(std::int64_t n_particles, int ts_count = 5, int refine = 1,
                   double scale = 1.0, const SolveOptions& solve_opts = {});

// Redistribute a new particle total over an existing release plan, keeping
// stage times and regions; counts differ by at most one across stages.
std::vector<ReleaseStage> redistribute_release_plan(
    const std::vector<ReleaseStage>& plan, std::int64_t n_particles);

// Solve the flow problem of a spec into an unbounded steady snapshot.
FlowSnapshot solve_scenario(const ScenarioSpec& spec,
                            const SolveOptions& solve_opts = {});

}  // namespace ptrace
