#pragma once

#include <array>
#include <limits>
#include <string>
#include <vector>

#include "ptrace/grid.hpp"

namespace ptrace {

// Per-cell anisotropic conductivity (diagonal tensor), m/d.
struct ConductivityTensor {
  std::vector<double> kxx, kyy, kzz;

  static ConductivityTensor isotropic(std::vector<double> k) {
    ConductivityTensor t;
    t.kxx = k;
    t.kyy = k;
    t.kzz = std::move(k);
    return t;
  }
};

// Constant head prescribed on a hull face of a cell, connected through a
// half-cell conductance. Attaching the head to the boundary face (rather
// than fixing the cell center) makes a uniform-K column with heads
// differing by exactly L produce a unit gradient.
struct ConstantHead {
  CellId cell;
  Face face;
  double head;  // m
};

struct WellBC {
  CellId cell;
  double rate;  // m3/d, negative = extraction
};

struct RiverBC {
  CellId cell;
  double stage;        // m
  double bottom;       // m
  double conductance;  // m2/d
};

struct DrainBC {
  CellId cell;
  double elevation;    // m
  double conductance;  // m2/d
};

struct BoundaryConditionSet {
  std::vector<ConstantHead> constant_heads;
  std::vector<WellBC> wells;
  double recharge = 0.0;  // m/d, applied to top-layer cells
  std::vector<RiverBC> rivers;
  std::vector<DrainBC> drains;
};

constexpr double kUnboundedDuration = std::numeric_limits<double>::infinity();

// Steady flow field over one stress period. Face flow arrays cover hull
// faces too: fx has (nx+1)*ny*nz entries and is signed positive toward
// the higher cell index along its axis (analogously fy, fz).
struct FlowSnapshot {
  Grid grid;
  std::vector<double> heads;      // per cell, m
  std::vector<double> fx, fy, fz; // face volumetric flows, m3/d
  std::vector<double> cell_src;   // per-cell net internal source/sink, m3/d
  std::vector<double> porosity;   // size 1 => constant
  double start = 0.0;             // d
  double duration = kUnboundedDuration;  // d

  std::size_t fx_index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(grid.nx() + 1) * (j + static_cast<std::size_t>(grid.ny()) * k);
  }
  std::size_t fy_index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(grid.nx()) * (j + static_cast<std::size_t>(grid.ny() + 1) * k);
  }
  std::size_t fz_index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(grid.nx()) * (j + static_cast<std::size_t>(grid.ny()) * k);
  }

  // Signed flow (positive toward higher index) through a face of `cell`.
  double face_flow(CellId cell, Face f) const;
  // Outward-positive flow through a hull face.
  double boundary_face_flow(CellId cell, Face f) const;

  double porosity_at(CellId cell) const {
    return porosity.size() == 1 ? porosity[0] : porosity[static_cast<std::size_t>(cell)];
  }

  double end_time() const { return start + duration; }
};

enum class SinkClass { no_sink, weak_sink, strong_sink };

struct SolveOptions {
  double tol = 1e-12;      // CG relative residual
  int max_outer = 100;     // Picard iterations for river/drain clamps
  int max_inner = 0;       // 0 => 10 * n_cells
  double head_change_tol = 1e-8;  // m, Picard convergence
};

struct SolveError : std::runtime_error {
  std::vector<double> residual_history;
  explicit SolveError(const std::string& msg, std::vector<double> hist = {})
      : std::runtime_error(msg), residual_history(std::move(hist)) {}
};

// 7-point (5-point in 2D) harmonic-mean finite-difference steady flow.
FlowSnapshot solve_steady(const Grid& grid, const ConductivityTensor& k,
                          const BoundaryConditionSet& bcs,
                          const SolveOptions& opts = {});

// Signed residual (net inflow + sources - sinks) of one cell, m3/d.
double cell_mass_balance(const FlowSnapshot& snap, CellId cell);
// Sum of absolute flow magnitudes touching a cell, for relative residuals.
double cell_flow_magnitude(const FlowSnapshot& snap, CellId cell);

void save_snapshot(const FlowSnapshot& snap, const std::string& path);
FlowSnapshot load_snapshot(const std::string& path);

SinkClass classify_cell_snapshot(const FlowSnapshot& snap, CellId cell);

// Central read-only store of flow snapshots shared by all tracking workers.
class FlowStore {
 public:
  explicit FlowStore(std::vector<FlowSnapshot> snapshots);

  const Grid& grid() const { return snapshots_.front().grid; }
  const std::vector<FlowSnapshot>& snapshots() const { return snapshots_; }

  // Snapshot active at `time`; a time exactly on a period boundary selects
  // the later period.
  const FlowSnapshot& snapshot_at(double time) const;

  // Six face seepage velocities (m/d) of a cell at a given time, ordered
  // {x_low, x_high, y_low, y_high, z_low, z_high}, each signed along its
  // positive axis.
  std::array<double, 6> face_velocities(CellId cell, double time) const;

  SinkClass classify_cell(CellId cell, double time) const;

  double horizon_end() const { return snapshots_.back().end_time(); }

 private:
  std::vector<FlowSnapshot> snapshots_;
};

}  // namespace ptrace
