#include "ptrace/scheduler.hpp"

#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace ptrace {

std::vector<IndexRange> static_partition(std::int64_t n_particles, int n_workers) {
  if (n_workers < 1) throw std::invalid_argument("scheduler: n_workers must be >= 1");
  std::vector<IndexRange> ranges(n_workers);
  std::int64_t base = n_particles / n_workers;
  std::int64_t extra = n_particles % n_workers;
  std::int64_t at = 0;
  for (int w = 0; w < n_workers; ++w) {
    std::int64_t len = base + (w < extra ? 1 : 0);
    ranges[w] = {at, at + len};
    at += len;
  }
  return ranges;
}

int hardware_workers() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

LoopStats run_particle_loop(std::span<Particle> particles, int n_workers,
                            const ScheduleSpec& schedule, const WorkerFactory& factory,
                            double t_max) {
  if (n_workers < 1) throw std::invalid_argument("scheduler: n_workers must be >= 1");
  if (schedule.kind == ScheduleKind::dynamic && schedule.chunk < 1)
    throw std::invalid_argument("scheduler: dynamic chunk must be >= 1");

  LoopStats stats;
  stats.per_worker_counts.assign(n_workers, 0);
  std::int64_t n = static_cast<std::int64_t>(particles.size());

  auto t0 = std::chrono::steady_clock::now();

  std::atomic<std::int64_t> next{0};  // dynamic claim counter
  std::vector<IndexRange> ranges;
  if (schedule.kind == ScheduleKind::static_balanced)
    ranges = static_partition(n, n_workers);

  std::mutex err_mutex;
  std::exception_ptr first_error;

  auto body = [&](int worker_id) {
    try {
      auto worker = factory(worker_id);
      std::int64_t processed = 0;
      std::int64_t completed = 0;
      auto handle = [&](std::int64_t idx) {
        Particle& p = particles[static_cast<std::size_t>(idx)];
        bool was_terminal = p.status != ParticleStatus::pending &&
                            p.status != ParticleStatus::active &&
                            p.status != ParticleStatus::reached_stop_time;
        worker->process(p, t_max);
        ++processed;
        bool is_terminal = p.status != ParticleStatus::pending &&
                           p.status != ParticleStatus::active &&
                           p.status != ParticleStatus::reached_stop_time;
        if (is_terminal && !was_terminal) ++completed;
      };
      if (schedule.kind == ScheduleKind::static_balanced) {
        const IndexRange r = ranges[worker_id];
        for (std::int64_t i = r.begin; i < r.end; ++i) handle(i);
      } else {
        for (;;) {
          std::int64_t i0 = next.fetch_add(schedule.chunk, std::memory_order_relaxed);
          if (i0 >= n) break;
          std::int64_t i1 = std::min(i0 + schedule.chunk, n);
          for (std::int64_t i = i0; i < i1; ++i) handle(i);
        }
      }
      // Summation reduction of per-worker counters.
      std::lock_guard<std::mutex> lock(err_mutex);
      stats.per_worker_counts[worker_id] = processed;
      stats.particles_completed += completed;
      stats.weak_sink_passes += worker->counters.weak_sink_passes;
      stats.records_written += worker->records_written();
    } catch (...) {
      std::lock_guard<std::mutex> lock(err_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  };

  if (n_workers == 1) {
    body(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(body, w);
    for (auto& t : pool) t.join();
  }

  if (first_error) std::rethrow_exception(first_error);

  stats.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return stats;
}

}  // namespace ptrace
