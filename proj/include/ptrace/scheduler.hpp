#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ptrace/tracking.hpp"

namespace ptrace {

enum class ScheduleKind : std::uint8_t { static_balanced, dynamic };

inline const char* to_string(ScheduleKind k) {
  return k == ScheduleKind::static_balanced ? "static" : "dynamic";
}

inline ScheduleKind schedule_from_string(const std::string& name) {
  if (name == "static") return ScheduleKind::static_balanced;
  if (name == "dynamic") return ScheduleKind::dynamic;
  throw std::invalid_argument("scheduler: unknown schedule '" + name + "'");
}

struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::dynamic;
  std::int64_t chunk = 1;  // dynamic only
};

struct LoopStats {
  std::vector<std::int64_t> per_worker_counts;
  std::int64_t particles_completed = 0;  // reached a terminal status this loop
  std::int64_t records_written = 0;
  std::int64_t weak_sink_passes = 0;
  double wall_time_s = 0.0;
};

struct IndexRange {
  std::int64_t begin = 0;
  std::int64_t end = 0;
};

// Contiguous near-equal partition of [0, n); sizes differ by at most one.
std::vector<IndexRange> static_partition(std::int64_t n_particles, int n_workers);

// Per-worker processing context: one tracking engine plus its observer.
// One instance per worker, never shared; holds the read-only store handle
// and per-worker counters that get summation-reduced into LoopStats.
class ParticleWorker {
 public:
  virtual ~ParticleWorker() = default;
  virtual void process(Particle& particle, double t_max) = 0;
  virtual std::int64_t records_written() const { return 0; }
  TrackCounters counters;
};

using WorkerFactory = std::function<std::unique_ptr<ParticleWorker>(int worker_id)>;

// The parallel particle loop. Every released particle reaches a
// terminal-or-time-limit state; the result multiset is identical to a
// serial run. With n_workers == 1 the loop body runs inline on the
// calling thread with no pool machinery.
LoopStats run_particle_loop(std::span<Particle> particles, int n_workers,
                            const ScheduleSpec& schedule,
                            const WorkerFactory& factory, double t_max);

int hardware_workers();

}  // namespace ptrace
