#include "ptrace/tracking.hpp"

namespace ptrace {

CellVelocityState make_cell_state(const FlowStore& store, CellId cell, double time) {
  CellVelocityState st;
  st.cell = cell;
  auto v = store.face_velocities(cell, time);
  const Grid& g = store.grid();
  int k = g.ijk(cell)[2];
  st.delta = {g.dx(), g.dy(), g.dz()[k]};
  for (int axis = 0; axis < 3; ++axis) {
    st.v_low[axis] = v[2 * axis];
    st.v_high[axis] = v[2 * axis + 1];
    st.gradient[axis] = (st.v_high[axis] - st.v_low[axis]) / st.delta[axis];
  }
  st.sink = store.classify_cell(cell, time);
  return st;
}

TrackOutcome advance_in_cell(const CellVelocityState& state, Particle& particle,
                             double t_limit) {
  if (state.cell != particle.cell)
    throw TrackingError("tracking: cell state does not match particle cell");

  TrackOutcome out;
  if (state.sink == SinkClass::strong_sink) {
    out.kind = TrackOutcome::Kind::stopped;
    out.reason = TrackOutcome::StopReason::strong_sink;
    return out;
  }

  // Earliest face exit over the three axes; ties resolve to the lowest axis.
  bool have_exit = false;
  double dt_exit = 0.0;
  Face exit_face{};
  for (int axis = 0; axis < 3; ++axis) {
    auto cand = axis_exit_candidate(state.v_low[axis], state.v_high[axis],
                                    particle.local[axis], state.delta[axis]);
    if (cand && (!have_exit || cand->dt < dt_exit)) {
      have_exit = true;
      dt_exit = cand->dt;
      exit_face = {axis, cand->side};
    }
  }
  if (!have_exit) {
    out.kind = TrackOutcome::Kind::stopped;
    out.reason = TrackOutcome::StopReason::stagnant;
    return out;
  }

  double remaining = t_limit - particle.time;
  if (remaining <= 0.0) {
    out.kind = TrackOutcome::Kind::hit_time_limit;
    out.dt = 0.0;
    particle.time = t_limit;
    return out;
  }
  if (dt_exit > remaining) {
    for (int axis = 0; axis < 3; ++axis)
      particle.local[axis] = analytic_position(state.v_low[axis], state.gradient[axis],
                                               particle.local[axis], remaining,
                                               state.delta[axis]);
    particle.time = t_limit;  // exact, so records carry the declared time
    out.kind = TrackOutcome::Kind::hit_time_limit;
    out.dt = remaining;
    return out;
  }

  for (int axis = 0; axis < 3; ++axis) {
    if (axis == exit_face.axis) {
      particle.local[axis] = exit_face.side == 1 ? 1.0 : 0.0;
    } else {
      particle.local[axis] = analytic_position(state.v_low[axis], state.gradient[axis],
                                               particle.local[axis], dt_exit,
                                               state.delta[axis]);
    }
  }
  particle.time += dt_exit;
  out.kind = TrackOutcome::Kind::exited_face;
  out.face = exit_face;
  out.dt = dt_exit;
  return out;
}

namespace {

inline void refresh_position(const Grid& g, Particle& p) {
  p.position = g.global_position(p.cell, p.local);
}

// Shared displacement loop; `state_of(cell, time)` supplies the cell state
// either freshly computed or from a prepared table.
template <class StateOf>
void track_particle_impl(const Grid& grid, StateOf&& state_of, Particle& p,
                         double t_max, WeakSinkPolicy policy,
                         TrackObserver* observer, TrackCounters* counters) {
  if (p.status == ParticleStatus::pending) {
    if (p.release_time > t_max) return;  // not yet released, skipped silently
    p.status = ParticleStatus::active;
    p.time = p.release_time;
  }
  if (p.status == ParticleStatus::reached_stop_time && p.time < t_max)
    p.status = ParticleStatus::active;
  if (p.status != ParticleStatus::active) return;

  if (p.time >= t_max) {
    p.status = ParticleStatus::reached_stop_time;
    refresh_position(grid, p);
    if (observer) observer->on_time_limit(p);
    return;
  }

  int zero_dt_run = 0;
  while (true) {
    decltype(auto) state = state_of(p.cell, p.time);
    bool weak = state.sink == SinkClass::weak_sink;
    if (weak && policy == WeakSinkPolicy::stop) {
      p.status = ParticleStatus::strong_sink_stop;
      refresh_position(grid, p);
      if (observer) observer->on_terminal(p);
      return;
    }

    TrackOutcome out = advance_in_cell(state, p, t_max);

    switch (out.kind) {
      case TrackOutcome::Kind::stopped:
        p.status = out.reason == TrackOutcome::StopReason::strong_sink
                       ? ParticleStatus::strong_sink_stop
                       : ParticleStatus::stagnant;
        refresh_position(grid, p);
        if (observer) observer->on_terminal(p);
        return;
      case TrackOutcome::Kind::hit_time_limit:
        p.status = ParticleStatus::reached_stop_time;
        refresh_position(grid, p);
        if (observer) observer->on_time_limit(p);
        return;
      case TrackOutcome::Kind::exited_face:
        break;
    }

    // A corner pass legitimately produces up to three zero-length
    // transfers (one per axis); only a longer run means a velocity-noise
    // cycle with no real displacement.
    if (out.dt == 0.0) {
      if (++zero_dt_run >= 4) {
        p.status = ParticleStatus::stagnant;
        refresh_position(grid, p);
        if (observer) observer->on_terminal(p);
        return;
      }
    } else {
      zero_dt_run = 0;
    }

    if (weak && counters) ++counters->weak_sink_passes;

    auto neighbor = grid.neighbor(p.cell, out.face);
    if (observer) {
      refresh_position(grid, p);
      observer->on_cell_transfer(p);
    }
    if (!neighbor) {
      p.status = ParticleStatus::reached_boundary;
      refresh_position(grid, p);
      if (observer) observer->on_terminal(p);
      return;
    }
    p.cell = *neighbor;
    p.local[out.face.axis] = out.face.side == 1 ? 0.0 : 1.0;
  }
}

}  // namespace

FlowTable::FlowTable(const FlowStore& store, double time) : store_(&store) {
  std::size_t n = static_cast<std::size_t>(store.grid().cell_count());
  states_.reserve(n);
  for (std::size_t cell = 0; cell < n; ++cell)
    states_.push_back(make_cell_state(store, static_cast<CellId>(cell), time));
}

void track_particle(const FlowStore& store, Particle& p, double t_max,
                    WeakSinkPolicy policy, TrackObserver* observer,
                    TrackCounters* counters) {
  track_particle_impl(
      store.grid(),
      [&](CellId cell, double time) { return make_cell_state(store, cell, time); },
      p, t_max, policy, observer, counters);
}

void track_particle(const FlowTable& table, Particle& p, double t_max,
                    WeakSinkPolicy policy, TrackObserver* observer,
                    TrackCounters* counters) {
  track_particle_impl(
      table.grid(),
      [&](CellId cell, double) -> const CellVelocityState& {
        return table.state(cell);
      },
      p, t_max, policy, observer, counters);
}

}  // namespace ptrace
