#include <doctest.h>

#include <cmath>
#include <limits>

#include "ptrace/tracking.hpp"

using namespace ptrace;

namespace {

// Single-period store with hand-set face flows; porosity 1, unit spacing
// unless stated otherwise.
FlowSnapshot blank_snapshot(const Grid& g) {
  FlowSnapshot s;
  s.grid = g;
  s.heads.assign(static_cast<std::size_t>(g.cell_count()), 0.0);
  s.fx.assign(static_cast<std::size_t>(g.nx() + 1) * g.ny() * g.nz(), 0.0);
  s.fy.assign(static_cast<std::size_t>(g.nx()) * (g.ny() + 1) * g.nz(), 0.0);
  s.fz.assign(static_cast<std::size_t>(g.nx()) * g.ny() * (g.nz() + 1), 0.0);
  s.cell_src.assign(static_cast<std::size_t>(g.cell_count()), 0.0);
  s.porosity = {1.0};
  s.start = 0.0;
  s.duration = kUnboundedDuration;
  return s;
}

FlowStore uniform_x_store(int nx, double v) {
  Grid g = Grid::structured(nx, 1, 1, 1.0, 1.0, {1.0});
  FlowSnapshot s = blank_snapshot(g);
  for (int i = 0; i <= nx; ++i) s.fx[s.fx_index(i, 0, 0)] = v;
  std::vector<FlowSnapshot> v1;
  v1.push_back(std::move(s));
  return FlowStore(std::move(v1));
}

constexpr double kForever = std::numeric_limits<double>::infinity();

}  // namespace

TEST_CASE("axis exit: uniform velocity branch") {
  auto ex = axis_exit_candidate(1.0, 1.0, 0.2, 1.0);
  REQUIRE(ex.has_value());
  CHECK(ex->side == 1);
  CHECK(ex->dt == doctest::Approx(0.8).epsilon(1e-14));

  ex = axis_exit_candidate(-0.5, -0.5, 0.2, 1.0);
  REQUIRE(ex.has_value());
  CHECK(ex->side == 0);
  CHECK(ex->dt == doctest::Approx(0.4).epsilon(1e-14));

  CHECK(!axis_exit_candidate(0.0, 0.0, 0.2, 1.0).has_value());
}

TEST_CASE("axis exit: logarithmic branch matches the frozen value") {
  // v_low 0.3, v_high 1.7, start 0.2: dt = ln(1.7 / 0.58) / 1.4.
  auto ex = axis_exit_candidate(0.3, 1.7, 0.2, 1.0);
  REQUIRE(ex.has_value());
  CHECK(ex->side == 1);
  CHECK(ex->dt == doctest::Approx(0.7681110189313162).epsilon(1e-15));
}

TEST_CASE("axis exit: flow reversal inside the cell blocks the exit") {
  // Positive at the particle but negative at the high face: converging
  // stagnation point, no exit on this axis.
  CHECK(!axis_exit_candidate(1.0, -1.0, 0.2, 1.0).has_value());
  // Exactly at the stagnation point of a diverging field.
  CHECK(!axis_exit_candidate(-1.0, 1.0, 0.5, 1.0).has_value());
  // Below the stagnation point of a diverging field: exits low.
  auto ex = axis_exit_candidate(-1.0, 1.0, 0.25, 1.0);
  REQUIRE(ex.has_value());
  CHECK(ex->side == 0);
  CHECK(ex->dt == doctest::Approx(0.34657359027997264).epsilon(1e-15));
}

TEST_CASE("analytic position matches the frozen value and clamps") {
  CHECK(analytic_position(0.3, 1.4, 0.2, 0.1, 1.0) ==
        doctest::Approx(0.2622562880979942).epsilon(1e-15));
  // Linear branch.
  CHECK(analytic_position(0.5, 0.0, 0.2, 1.0, 1.0) == doctest::Approx(0.7));
  // Tiny overshoot clamps; a gross one throws.
  CHECK(analytic_position(1.0, 0.0, 1.0 - 1e-13, 1e-13, 1.0) <= 1.0);
  CHECK_THROWS_AS(analytic_position(1.0, 0.0, 0.9, 1.0, 1.0), TrackingError);
}

TEST_CASE("advance_in_cell rejects a mismatched state") {
  auto store = uniform_x_store(3, 1.0);
  auto st = make_cell_state(store, 0, 0.0);
  Particle p;
  p.cell = 1;
  CHECK_THROWS_AS(advance_in_cell(st, p, 10.0), TrackingError);
}

TEST_CASE("advance_in_cell pins the particle time to the limit exactly") {
  auto store = uniform_x_store(3, 1.0);
  auto st = make_cell_state(store, 0, 0.0);
  Particle p;
  p.cell = 0;
  p.local = {0.0, 0.5, 0.5};
  p.time = 0.0;
  double t_limit = 0.3333333333333333;
  auto out = advance_in_cell(st, p, t_limit);
  CHECK(out.kind == TrackOutcome::Kind::hit_time_limit);
  CHECK(p.time == t_limit);  // bitwise, so records carry the declared time
  CHECK(p.local[0] == doctest::Approx(t_limit));
}

TEST_CASE("strong sink cells stop the particle before any displacement") {
  Grid g = Grid::structured(1, 1, 1, 1.0, 1.0, {1.0});
  FlowSnapshot s = blank_snapshot(g);
  s.fx[s.fx_index(0, 0, 0)] = 1.0;  // inflow only
  s.cell_src[0] = -1.0;
  std::vector<FlowSnapshot> v;
  v.push_back(std::move(s));
  FlowStore store(std::move(v));
  CHECK(store.classify_cell(0, 0.0) == SinkClass::strong_sink);

  Particle p;
  p.cell = 0;
  p.local = {0.5, 0.5, 0.5};
  p.status = ParticleStatus::active;
  p.time = 1.0;
  track_particle(store, p, kForever, WeakSinkPolicy::pass_through);
  CHECK(p.status == ParticleStatus::strong_sink_stop);
  CHECK(p.time == 1.0);
}

TEST_CASE("uniform flow reaches the boundary with the exact travel time") {
  auto store = uniform_x_store(5, 2.0);
  Particle p;
  p.cell = 0;
  p.local = {0.0, 0.5, 0.5};
  p.status = ParticleStatus::active;
  track_particle(store, p, kForever, WeakSinkPolicy::pass_through);
  CHECK(p.status == ParticleStatus::reached_boundary);
  CHECK(p.time == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(p.position[0] == 5.0);
}

TEST_CASE("a time-limited particle resumes to the same terminal state") {
  auto store = uniform_x_store(5, 1.0);
  Particle one;
  one.cell = 0;
  one.local = {0.0, 0.5, 0.5};
  one.status = ParticleStatus::active;
  track_particle(store, one, kForever, WeakSinkPolicy::pass_through);

  Particle two;
  two.cell = 0;
  two.local = {0.0, 0.5, 0.5};
  two.status = ParticleStatus::active;
  track_particle(store, two, 1.5, WeakSinkPolicy::pass_through);
  CHECK(two.status == ParticleStatus::reached_stop_time);
  CHECK(two.time == 1.5);
  track_particle(store, two, 3.7, WeakSinkPolicy::pass_through);
  CHECK(two.status == ParticleStatus::reached_stop_time);
  track_particle(store, two, kForever, WeakSinkPolicy::pass_through);

  CHECK(two.status == one.status);
  CHECK(two.time == one.time);
  CHECK(two.cell == one.cell);
}

TEST_CASE("pending particles wait for their release time") {
  auto store = uniform_x_store(5, 1.0);
  Particle p;
  p.cell = 0;
  p.local = {0.0, 0.5, 0.5};
  p.release_time = 10.0;
  p.time = 10.0;
  track_particle(store, p, 5.0, WeakSinkPolicy::pass_through);
  CHECK(p.status == ParticleStatus::pending);
  track_particle(store, p, 12.0, WeakSinkPolicy::pass_through);
  CHECK(p.status == ParticleStatus::reached_stop_time);
  CHECK(p.time == 12.0);
  CHECK(p.cell == 2);  // moved 2 m at 1 m/d, landing exactly on a face
  CHECK(p.local[0] == 0.0);
}

TEST_CASE("weak sink policy: stop terminates, pass-through counts the pass") {
  // Two cells; the first has a weak sink (outflow continues downstream).
  Grid g = Grid::structured(2, 1, 1, 1.0, 1.0, {1.0});
  FlowSnapshot s = blank_snapshot(g);
  s.fx[s.fx_index(0, 0, 0)] = 2.0;
  s.fx[s.fx_index(1, 0, 0)] = 1.0;
  s.fx[s.fx_index(2, 0, 0)] = 1.0;
  s.cell_src[0] = -1.0;
  std::vector<FlowSnapshot> v;
  v.push_back(std::move(s));
  FlowStore store(std::move(v));
  CHECK(store.classify_cell(0, 0.0) == SinkClass::weak_sink);

  Particle p;
  p.cell = 0;
  p.local = {0.1, 0.5, 0.5};
  p.status = ParticleStatus::active;
  track_particle(store, p, kForever, WeakSinkPolicy::stop);
  CHECK(p.status == ParticleStatus::strong_sink_stop);

  Particle q = p;
  q.status = ParticleStatus::active;
  q.cell = 0;
  q.local = {0.1, 0.5, 0.5};
  q.time = 0.0;
  TrackCounters counters;
  track_particle(store, q, kForever, WeakSinkPolicy::pass_through, nullptr,
                 &counters);
  CHECK(q.status == ParticleStatus::reached_boundary);
  CHECK(counters.weak_sink_passes == 1);
}

TEST_CASE("gradient epsilon scales with the face velocities") {
  CHECK(gradient_epsilon(1.0, 2.0, 1.0) == doctest::Approx(2e-12));
  CHECK(gradient_epsilon(0.0, 0.0, 1.0) == 0.0);
}
