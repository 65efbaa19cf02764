#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "ptrace/flow.hpp"
#include "ptrace/grid.hpp"

namespace ptrace {

enum class ParticleStatus : std::uint8_t {
  pending,
  active,
  reached_boundary,
  reached_stop_time,
  strong_sink_stop,
  stagnant,
  done,
};

inline const char* to_string(ParticleStatus s) {
  switch (s) {
    case ParticleStatus::pending: return "pending";
    case ParticleStatus::active: return "active";
    case ParticleStatus::reached_boundary: return "reached_boundary";
    case ParticleStatus::reached_stop_time: return "reached_stop_time";
    case ParticleStatus::strong_sink_stop: return "strong_sink_stop";
    case ParticleStatus::stagnant: return "stagnant";
    case ParticleStatus::done: return "done";
  }
  return "?";
}

struct Particle {
  std::int64_t id = 0;
  std::int32_t group = 0;
  ParticleStatus status = ParticleStatus::pending;
  CellId cell = 0;
  std::array<double, 3> local{};     // in-cell coordinates, [0,1]^3
  std::array<double, 3> position{};  // global, m
  double time = 0.0;                 // cumulative tracking time, d
  double release_time = 0.0;
};

enum class WeakSinkPolicy : std::uint8_t { pass_through, stop };

// Per-cell working set for the semi-analytical displacement step: the six
// face seepage velocities, the per-axis linear gradients and the cell
// geometry, plus the sink classification.
struct CellVelocityState {
  CellId cell = 0;
  std::array<double, 3> v_low{};
  std::array<double, 3> v_high{};
  std::array<double, 3> gradient{};  // (v_high - v_low) / delta, 1/d
  std::array<double, 3> delta{};     // cell extents, m
  SinkClass sink = SinkClass::no_sink;
};

struct TrackOutcome {
  enum class Kind : std::uint8_t { exited_face, hit_time_limit, stopped };
  enum class StopReason : std::uint8_t { none, stagnant, strong_sink };
  Kind kind = Kind::stopped;
  StopReason reason = StopReason::none;
  Face face{};           // valid for exited_face
  double dt = 0.0;       // elapsed, d
};

// Relative threshold below which the per-axis velocity gradient is treated
// as zero (linear-motion branch).
inline double gradient_epsilon(double v_low, double v_high, double delta) {
  return 1e-12 * std::max(std::abs(v_low), std::abs(v_high)) / delta;
}

struct AxisExit {
  double dt;
  int side;  // 0=low, 1=high
};

// Time to reach a face of the current cell along one axis, assuming the
// velocity varies linearly between the two face values. Returns nullopt
// when the particle can never reach a face on this axis (zero velocity or
// an interior stagnation point).
inline std::optional<AxisExit> axis_exit_candidate(double v_low, double v_high,
                                                   double x_local, double delta) {
  double grad = (v_high - v_low) / delta;
  double vp = v_low + grad * (x_local * delta);
  if (std::abs(grad) <= gradient_epsilon(v_low, v_high, delta)) {
    if (vp > 0.0) return AxisExit{delta * (1.0 - x_local) / vp, 1};
    if (vp < 0.0) return AxisExit{delta * x_local / (-vp), 0};
    return std::nullopt;
  }
  if (vp > 0.0) {
    if (v_high > 0.0) return AxisExit{std::log(v_high / vp) / grad, 1};
    return std::nullopt;  // velocity reverses before the high face
  }
  if (vp < 0.0) {
    if (v_low < 0.0) return AxisExit{std::log(v_low / vp) / grad, 0};
    return std::nullopt;
  }
  return std::nullopt;  // stagnation point exactly at the particle
}

inline constexpr double kClampTolerance = 1e-9;  // local units

struct TrackingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Position along one axis after dt, in local coordinates. Clamped to
// [0,1]; clamping beyond kClampTolerance raises a consistency error.
inline double analytic_position(double v_low, double grad, double x_start_local,
                                double dt, double delta) {
  double vp = v_low + grad * (x_start_local * delta);
  double x;
  if (std::abs(grad) <= gradient_epsilon(v_low, v_low + grad * delta, delta)) {
    x = x_start_local + vp * dt / delta;
  } else {
    x = (vp * std::exp(grad * dt) - v_low) / (grad * delta);
  }
  if (x < 0.0) {
    if (x < -kClampTolerance)
      throw TrackingError("tracking: local coordinate left [0,1] by more than the clamp tolerance");
    x = 0.0;
  } else if (x > 1.0) {
    if (x > 1.0 + kClampTolerance)
      throw TrackingError("tracking: local coordinate left [0,1] by more than the clamp tolerance");
    x = 1.0;
  }
  return x;
}

// One semi-analytical displacement inside the particle's current cell.
TrackOutcome advance_in_cell(const CellVelocityState& state, Particle& particle,
                             double t_limit);

// Observer hook for the output module. Callbacks run on the worker that
// owns the particle.
class TrackObserver {
 public:
  virtual ~TrackObserver() = default;
  virtual void on_time_limit(const Particle&) {}
  virtual void on_cell_transfer(const Particle&) {}
  virtual void on_terminal(const Particle&) {}
  virtual std::int64_t records_written() const { return 0; }
};

struct TrackCounters {
  std::int64_t weak_sink_passes = 0;
};

CellVelocityState make_cell_state(const FlowStore& store, CellId cell, double time);

// Per-snapshot table of every cell's velocity state, built serially in the
// driver's flow-array update stage and shared read-only by the tracking
// workers. Valid while the snapshot active at `time` stays active; entries
// are bit-identical to make_cell_state at any time within that snapshot.
class FlowTable {
 public:
  FlowTable(const FlowStore& store, double time);

  const Grid& grid() const { return store_->grid(); }
  const FlowStore& store() const { return *store_; }
  const CellVelocityState& state(CellId cell) const {
    return states_[static_cast<std::size_t>(cell)];
  }

 private:
  const FlowStore* store_;
  std::vector<CellVelocityState> states_;
};

// Displace one particle until a terminal condition or t_max. Pure in its
// inputs: identical (store, particle, t_max, policy) give identical
// trajectories regardless of the worker running them. A particle halted
// by the time limit gets status reached_stop_time; the caller may resume
// it with a larger t_max.
void track_particle(const FlowStore& store, Particle& particle, double t_max,
                    WeakSinkPolicy policy, TrackObserver* observer = nullptr,
                    TrackCounters* counters = nullptr);

// Same displacement, reading cell states from a prepared table instead of
// recomputing them per step. Requires every time in [particle.time, t_max]
// to fall inside the table's snapshot.
void track_particle(const FlowTable& table, Particle& particle, double t_max,
                    WeakSinkPolicy policy, TrackObserver* observer = nullptr,
                    TrackCounters* counters = nullptr);

}  // namespace ptrace
