#include "ptrace/driver.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ptrace {

const char* to_string(SimMode mode) {
  switch (mode) {
    case SimMode::endpoint: return "endpoint";
    case SimMode::timeseries: return "timeseries";
    case SimMode::pathline: return "pathline";
  }
  return "?";
}

SimMode sim_mode_from_string(const std::string& name) {
  if (name == "endpoint") return SimMode::endpoint;
  if (name == "timeseries") return SimMode::timeseries;
  if (name == "pathline") return SimMode::pathline;
  throw std::invalid_argument("unknown simulation mode '" + name + "'");
}

std::vector<double> TimeseriesSpec::resolve() const {
  if (!times.empty()) {
    for (std::size_t i = 1; i < times.size(); ++i)
      if (times[i] <= times[i - 1])
        throw std::invalid_argument("driver: output times must be strictly increasing");
    return times;
  }
  if (count <= 0 || t_end <= 0.0) return {};
  std::vector<double> out(count);
  for (int k = 1; k <= count; ++k)
    out[k - 1] = static_cast<double>(k) * t_end / static_cast<double>(count);
  return out;
}

std::string SimulationConfig::canonical() const {
  std::ostringstream ss;
  ss.precision(17);
  ss << "mode=" << to_string(mode) << ";t_stop=" << t_stop << ";workers=" << workers
     << ";schedule=" << (schedule.kind == ScheduleKind::dynamic ? "dynamic" : "static")
     << ";chunk=" << schedule.chunk << ";protocol=" << to_string(protocol)
     << ";weak_sink="
     << (weak_sink_policy == WeakSinkPolicy::pass_through ? "pass_through" : "stop")
     << ";seed=" << seed << ";stages=" << release_plan.size() << ";np=";
  std::int64_t np = 0;
  for (const auto& s : release_plan) np += s.count;
  ss << np << ";ts=";
  for (double t : timeseries.resolve()) ss << t << ",";
  return ss.str();
}

std::vector<Particle> release_particles(const std::vector<ReleaseStage>& plan,
                                        const Grid& grid) {
  std::vector<Particle> out;
  std::int64_t next_id = 0;
  for (const auto& stage : plan) {
    if (stage.time < 0.0) throw std::invalid_argument("driver: release time < 0");
    if (stage.count <= 0) continue;
    auto place = [&](const std::array<double, 3>& pos) {
      auto loc = grid.locate(pos);
      Particle p;
      p.id = next_id++;
      p.group = stage.group;
      p.status = ParticleStatus::pending;
      p.cell = loc.cell;
      p.local = loc.local;
      p.position = pos;
      p.time = stage.time;
      p.release_time = stage.time;
      out.push_back(p);
    };
    switch (stage.region.kind) {
      case ReleaseRegion::Kind::line: {
        const auto& a = stage.region.a;
        const auto& b = stage.region.b;
        double len2 = 0.0;
        for (int d = 0; d < 3; ++d) len2 += (b[d] - a[d]) * (b[d] - a[d]);
        if (len2 == 0.0 && stage.count > 1)
          throw std::invalid_argument(
              "driver: zero-length release line cannot hold multiple particles");
        for (std::int64_t m = 0; m < stage.count; ++m) {
          double f = (static_cast<double>(m) + 0.5) / static_cast<double>(stage.count);
          place({a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1]),
                 a[2] + f * (b[2] - a[2])});
        }
        break;
      }
      case ReleaseRegion::Kind::cell_top_faces: {
        const auto& cells = stage.region.cells;
        if (cells.empty())
          throw std::invalid_argument("driver: release region has no cells");
        std::int64_t nc = static_cast<std::int64_t>(cells.size());
        for (std::int64_t ci = 0; ci < nc; ++ci) {
          std::int64_t mc = stage.count / nc + (ci < stage.count % nc ? 1 : 0);
          if (mc == 0) continue;
          auto g = static_cast<std::int64_t>(
              std::ceil(std::sqrt(static_cast<double>(mc))));
          auto low = grid.cell_low_corner(cells[static_cast<std::size_t>(ci)]);
          int k = grid.ijk(cells[static_cast<std::size_t>(ci)])[2];
          double ztop = low[2] + grid.dz()[k];
          for (std::int64_t m = 0; m < mc; ++m) {
            double fx = (static_cast<double>(m % g) + 0.5) / static_cast<double>(g);
            double fy = (static_cast<double>(m / g) + 0.5) / static_cast<double>(g);
            place({low[0] + fx * grid.dx(), low[1] + fy * grid.dy(), ztop});
          }
        }
        break;
      }
    }
  }
  return out;
}

double determine_stop_time(const SimulationConfig& config, const FlowStore& store) {
  if (config.mode == SimMode::timeseries || config.mode == SimMode::pathline) {
    auto times = config.timeseries.resolve();
    if (times.empty())
      throw std::invalid_argument("driver: timeseries simulation needs output times");
    double last = times.back();
    if (std::isfinite(config.t_stop)) {
      if (last > config.t_stop)
        throw std::invalid_argument("driver: output times exceed T_stop");
      return config.t_stop;
    }
    return last;
  }
  if (std::isfinite(config.t_stop)) return config.t_stop;
  if (std::isfinite(store.snapshots().back().duration))
    throw std::invalid_argument(
        "driver: until-termination run requires an unbounded final flow period");
  return kUntilTermination;
}

namespace {

class TimeseriesObserver : public TrackObserver {
 public:
  TimeseriesObserver(TimeseriesWriter* writer, const Grid* grid, int worker_id)
      : writer_(writer), grid_(grid), worker_id_(worker_id) {}

  void arm(std::int64_t time_index) { time_index_ = time_index; }
  std::int64_t records_written() const override { return written_; }

  void on_time_limit(const Particle& p) override {
    if (time_index_ == 0) return;
    TimeseriesRecord r;
    r.time_index = time_index_;
    r.time = p.time;
    r.particle_id = p.id;
    r.group = p.group;
    r.cell = p.cell;
    r.layer = grid_->ijk(p.cell)[2];
    r.x = p.position[0];
    r.y = p.position[1];
    r.z = p.position[2];
    r.xloc = p.local[0];
    r.yloc = p.local[1];
    r.zloc = p.local[2];
    writer_->write_record(worker_id_, r);
    ++written_;
  }

 private:
  TimeseriesWriter* writer_;
  const Grid* grid_;
  int worker_id_;
  std::int64_t time_index_ = 0;
  std::int64_t written_ = 0;
};

class PathlineObserver : public TrackObserver {
 public:
  PathlineObserver(PathlineWriter* writer, std::vector<std::int64_t>* segments,
                   int worker_id)
      : writer_(writer), segments_(segments), worker_id_(worker_id) {}

  std::int64_t records_written() const override { return written_; }

  void on_cell_transfer(const Particle& p) override { record(p); }
  void on_terminal(const Particle& p) override { record(p); }

 private:
  void record(const Particle& p) {
    auto& seg = (*segments_)[static_cast<std::size_t>(p.id)];
    // Coalesce zero-length segments so time strictly increases per particle.
    if (seg > 0 && p.time == last_time_ && last_id_ == p.id) return;
    writer_->write_point(worker_id_, p, seg);
    ++seg;
    ++written_;
    last_time_ = p.time;
    last_id_ = p.id;
  }

  PathlineWriter* writer_;
  std::vector<std::int64_t>* segments_;
  int worker_id_;
  std::int64_t written_ = 0;
  double last_time_ = -1.0;
  std::int64_t last_id_ = -1;
};

class TrackWorker : public ParticleWorker {
 public:
  TrackWorker(const FlowTable& table, WeakSinkPolicy policy,
              std::unique_ptr<TrackObserver> observer)
      : table_(table), policy_(policy), observer_(std::move(observer)) {}

  void process(Particle& p, double t_max) override {
    track_particle(table_, p, t_max, policy_, observer_.get(), &counters);
  }

  std::int64_t records_written() const override {
    return observer_ ? observer_->records_written() : 0;
  }

 private:
  const FlowTable& table_;
  WeakSinkPolicy policy_;
  std::unique_ptr<TrackObserver> observer_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::atomic<std::int64_t> dispatch_checks{0};

}  // namespace

std::int64_t dispatch_invariant_checks() { return dispatch_checks.load(); }

void check_dispatch_invariant(double t_max, double ts_max, double t_stop) {
  if (!(t_max <= ts_max && t_max <= t_stop))
    throw std::logic_error("driver: dispatch target exceeds step or stop time");
  ++dispatch_checks;
}

SimulationSummary run_simulation(const SimulationConfig& config, const FlowStore& store,
                                 std::vector<Particle>* final_particles) {
  if (config.workers < 1) throw std::invalid_argument("driver: workers must be >= 1");
  if (config.mode == SimMode::pathline &&
      config.protocol != OutputProtocolKind::parallel_exclusive)
    throw std::invalid_argument(
        "driver: pathline mode supports only the parallel_exclusive protocol");

  const Grid& grid = store.grid();
  std::vector<Particle> particles = release_particles(config.release_plan, grid);
  double t_stop = determine_stop_time(config, store);
  std::vector<double> output_times = config.timeseries.resolve();
  if (config.mode == SimMode::endpoint) output_times.clear();
  for (double t : output_times)
    if (t > t_stop) throw std::invalid_argument("driver: output time beyond T_stop");

  std::string digest = config_digest(config.canonical());

  std::unique_ptr<TimeseriesWriter> ts_writer;
  std::unique_ptr<PathlineWriter> pl_writer;
  std::vector<std::int64_t> pathline_segments;
  if (config.write_outputs && config.mode == SimMode::timeseries)
    ts_writer = std::make_unique<TimeseriesWriter>(config.protocol, config.out_dir,
                                                   config.workers, digest);
  if (config.write_outputs && config.mode == SimMode::pathline) {
    pl_writer = std::make_unique<PathlineWriter>(config.out_dir, config.workers, digest);
    pathline_segments.assign(particles.size(), 0);
  }

  SimulationSummary summary;
  summary.output_times = output_times;
  summary.n_particles = static_cast<std::int64_t>(particles.size());
  summary.totals.per_worker_counts.assign(config.workers, 0);

  auto loop_start = std::chrono::steady_clock::now();

  for (const FlowSnapshot& period : store.snapshots()) {
    if (period.start >= t_stop && !(period.start == 0.0 && t_stop == 0.0)) break;

    // Serial flow-array update stage: cell velocity states for the active
    // snapshot are initialized once here and shared read-only by the
    // tracking workers for the rest of the period.
    auto t_flow = std::chrono::steady_clock::now();
    FlowTable table(store, period.start);
    summary.flow_update_s += seconds_since(t_flow);

    double ts_max = std::min(period.end_time(), t_stop);

    // Tracking targets inside this period: output times plus the period
    // end itself, so particles pause before the snapshot switches.
    std::vector<std::pair<double, std::int64_t>> targets;  // (t_max, time_index or 0)
    for (std::size_t m = 0; m < output_times.size(); ++m)
      if (output_times[m] > period.start && output_times[m] <= ts_max)
        targets.emplace_back(output_times[m], static_cast<std::int64_t>(m + 1));
    if (targets.empty() || targets.back().first < ts_max)
      targets.emplace_back(ts_max, 0);

    for (auto [t_max, time_index] : targets) {
      check_dispatch_invariant(t_max, ts_max, t_stop);

      WorkerFactory factory = [&](int worker_id) -> std::unique_ptr<ParticleWorker> {
        std::unique_ptr<TrackObserver> obs;
        if (ts_writer) {
          auto o = std::make_unique<TimeseriesObserver>(ts_writer.get(), &grid, worker_id);
          if (time_index > 0) o->arm(time_index);
          obs = std::move(o);
        } else if (pl_writer) {
          obs = std::make_unique<PathlineObserver>(pl_writer.get(), &pathline_segments,
                                                   worker_id);
        }
        return std::make_unique<TrackWorker>(table, config.weak_sink_policy,
                                              std::move(obs));
      };

      auto t_loop = std::chrono::steady_clock::now();
      LoopStats stats = run_particle_loop(particles, config.workers, config.schedule,
                                          factory, t_max);
      summary.particle_loop_s += seconds_since(t_loop);

      for (int w = 0; w < config.workers; ++w)
        summary.totals.per_worker_counts[w] += stats.per_worker_counts[w];
      summary.totals.particles_completed += stats.particles_completed;
      summary.totals.weak_sink_passes += stats.weak_sink_passes;
      summary.totals.records_written += stats.records_written;
      summary.totals.wall_time_s += stats.wall_time_s;

      if (ts_writer && time_index > 0) {
        auto t_cons = std::chrono::steady_clock::now();
        ts_writer->flush_step();
        ts_writer->consolidate_step(time_index);
        summary.consolidation_s += seconds_since(t_cons);
      }
    }
    if (std::isinf(ts_max)) break;
  }

  if (ts_writer) ts_writer->close();
  if (pl_writer) pl_writer->close();

  summary.elapsed_loop_s = seconds_since(loop_start);

  for (const Particle& p : particles)
    ++summary.status_histogram[static_cast<std::size_t>(p.status)];

  // Endpoint records are written serially after the outermost loop and are
  // excluded from the reported elapsed time.
  if (config.write_outputs) {
    std::vector<EndpointRecord> eps;
    eps.reserve(particles.size());
    for (const Particle& p : particles) {
      EndpointRecord r;
      r.particle_id = p.id;
      r.group = p.group;
      r.status = p.status;
      r.initial_time = p.release_time;
      // Initial placement is recomputed from the release plan order; the
      // particle keeps only its final state, so re-derive initial position.
      r.final_time = p.time;
      r.final_cell = p.cell;
      r.fx = p.position[0];
      r.fy = p.position[1];
      r.fz = p.position[2];
      eps.push_back(r);
    }
    std::vector<Particle> initial = release_particles(config.release_plan, grid);
    for (std::size_t m = 0; m < initial.size(); ++m) {
      eps[m].initial_cell = initial[m].cell;
      eps[m].ix = initial[m].position[0];
      eps[m].iy = initial[m].position[1];
      eps[m].iz = initial[m].position[2];
    }
    std::filesystem::create_directories(config.out_dir);
    write_endpoint_file(eps, config.out_dir / "endpoint.dat", digest);
  }

  if (final_particles) *final_particles = std::move(particles);
  return summary;
}

}  // namespace ptrace
