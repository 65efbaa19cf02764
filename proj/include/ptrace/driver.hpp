#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "ptrace/flow.hpp"
#include "ptrace/output.hpp"
#include "ptrace/scheduler.hpp"
#include "ptrace/tracking.hpp"

namespace ptrace {

enum class SimMode : std::uint8_t { endpoint, timeseries, pathline };

const char* to_string(SimMode mode);
SimMode sim_mode_from_string(const std::string& name);

// Where a release stage places its particles.
struct ReleaseRegion {
  enum class Kind : std::uint8_t { line, cell_top_faces };
  Kind kind = Kind::line;
  std::array<double, 3> a{}, b{};  // line endpoints
  std::vector<CellId> cells;       // top faces of these cells
};

struct ReleaseStage {
  double time = 0.0;
  std::int64_t count = 0;
  ReleaseRegion region;
  std::int32_t group = 0;
};

struct TimeseriesSpec {
  std::vector<double> times;  // explicit list; wins when non-empty
  double t_end = 0.0;         // equispaced: k * t_end / count, k = 1..count
  int count = 0;

  std::vector<double> resolve() const;
};

constexpr double kUntilTermination = std::numeric_limits<double>::infinity();

struct SimulationConfig {
  SimMode mode = SimMode::endpoint;
  double t_stop = kUntilTermination;  // explicit stop, or until-termination
  TimeseriesSpec timeseries;
  ScheduleSpec schedule;
  int workers = 1;
  WeakSinkPolicy weak_sink_policy = WeakSinkPolicy::pass_through;
  OutputProtocolKind protocol = OutputProtocolKind::critical_single;
  std::vector<ReleaseStage> release_plan;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "out";
  bool write_outputs = true;

  std::string canonical() const;  // digest input
};

struct SimulationSummary {
  double elapsed_loop_s = 0.0;  // outermost loop, incl. timeseries writing
  double flow_update_s = 0.0;
  double particle_loop_s = 0.0;
  double consolidation_s = 0.0;
  LoopStats totals;
  std::array<std::int64_t, 7> status_histogram{};  // by ParticleStatus value
  std::vector<double> output_times;
  std::int64_t n_particles = 0;
};

// Particle list in deterministic placement order; ids follow list position.
std::vector<Particle> release_particles(const std::vector<ReleaseStage>& plan,
                                        const Grid& grid);

double determine_stop_time(const SimulationConfig& config, const FlowStore& store);

// Always-on dispatch invariant: every particle-loop target satisfies
// t_max <= min(step end, T_stop). The counter lets tests confirm the
// check actually ran.
void check_dispatch_invariant(double t_max, double ts_max, double t_stop);
std::int64_t dispatch_invariant_checks();

// The nested time-step / tracking / particle loop structure. Optionally
// returns the final particle states through `final_particles`.
SimulationSummary run_simulation(const SimulationConfig& config, const FlowStore& store,
                                 std::vector<Particle>* final_particles = nullptr);

}  // namespace ptrace
