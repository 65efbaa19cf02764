#include "ptrace/flow.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ptrace {

namespace {

std::size_t face_array_size(const Grid& g, int axis) {
  switch (axis) {
    case 0: return static_cast<std::size_t>(g.nx() + 1) * g.ny() * g.nz();
    case 1: return static_cast<std::size_t>(g.nx()) * (g.ny() + 1) * g.nz();
    default: return static_cast<std::size_t>(g.nx()) * g.ny() * (g.nz() + 1);
  }
}

}  // namespace

double FlowSnapshot::face_flow(CellId cell, Face f) const {
  auto [i, j, k] = grid.ijk(cell);
  switch (f.axis) {
    case 0: return fx[fx_index(i + f.side, j, k)];
    case 1: return fy[fy_index(i, j + f.side, k)];
    default: return fz[fz_index(i, j, k + f.side)];
  }
}

double FlowSnapshot::boundary_face_flow(CellId cell, Face f) const {
  double q = face_flow(cell, f);
  return f.side == 1 ? q : -q;
}

double cell_mass_balance(const FlowSnapshot& snap, CellId cell) {
  double net = snap.cell_src[static_cast<std::size_t>(cell)];
  for (int axis = 0; axis < 3; ++axis) {
    net += snap.face_flow(cell, {axis, 0});
    net -= snap.face_flow(cell, {axis, 1});
  }
  return net;
}

double cell_flow_magnitude(const FlowSnapshot& snap, CellId cell) {
  double mag = std::abs(snap.cell_src[static_cast<std::size_t>(cell)]);
  for (int axis = 0; axis < 3; ++axis) {
    mag += std::abs(snap.face_flow(cell, {axis, 0}));
    mag += std::abs(snap.face_flow(cell, {axis, 1}));
  }
  return mag;
}

SinkClass classify_cell_snapshot(const FlowSnapshot& snap, CellId cell) {
  double src = snap.cell_src[static_cast<std::size_t>(cell)];
  if (!(src < 0.0)) return SinkClass::no_sink;
  double eps = 1e-12 * cell_flow_magnitude(snap, cell);
  bool outflow = false;
  for (int axis = 0; axis < 3 && !outflow; ++axis) {
    if (snap.face_flow(cell, {axis, 0}) < -eps) outflow = true;  // out through low face
    if (snap.face_flow(cell, {axis, 1}) > eps) outflow = true;   // out through high face
  }
  return outflow ? SinkClass::weak_sink : SinkClass::strong_sink;
}

// ---------------------------------------------------------------------------
// Steady-state solver: diagonally preconditioned conjugate gradient on the
// SPD finite-difference system, with an outer Picard loop resolving the
// river / drain clamp states.

namespace {

struct Assembly {
  std::vector<double> diag;
  std::vector<double> rhs;
  // Interior face conductances, indexed like the snapshot flow arrays
  // (hull entries stay zero; constant-head faces go into diag/rhs).
  std::vector<double> cx, cy, cz;
  bool has_reference = false;
};

double harmonic_conductance(double ka, double kb, double area, double da, double db) {
  // area / (half-cell resistances in series)
  return area / (0.5 * da / ka + 0.5 * db / kb);
}

void apply_stencil(const Grid& g, const Assembly& a, const std::vector<double>& h,
                   std::vector<double>& out) {
  int nx = g.nx(), ny = g.ny(), nz = g.nz();
  auto cid = [&](int i, int j, int k) {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(nx) * (j + static_cast<std::size_t>(ny) * k);
  };
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = a.diag[n] * h[n];
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i + 1 < nx; ++i) {
        std::size_t f = static_cast<std::size_t>(i + 1) +
                        static_cast<std::size_t>(nx + 1) * (j + static_cast<std::size_t>(ny) * k);
        double c = a.cx[f];
        if (c == 0.0) continue;
        out[cid(i, j, k)] -= c * h[cid(i + 1, j, k)];
        out[cid(i + 1, j, k)] -= c * h[cid(i, j, k)];
      }
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j + 1 < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        std::size_t f = static_cast<std::size_t>(i) +
                        static_cast<std::size_t>(nx) * ((j + 1) + static_cast<std::size_t>(ny + 1) * k);
        double c = a.cy[f];
        if (c == 0.0) continue;
        out[cid(i, j, k)] -= c * h[cid(i, j + 1, k)];
        out[cid(i, j + 1, k)] -= c * h[cid(i, j, k)];
      }
  for (int k = 0; k + 1 < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        std::size_t f = static_cast<std::size_t>(i) +
                        static_cast<std::size_t>(nx) * (j + static_cast<std::size_t>(ny) * (k + 1));
        double c = a.cz[f];
        if (c == 0.0) continue;
        out[cid(i, j, k)] -= c * h[cid(i, j, k + 1)];
        out[cid(i, j, k + 1)] -= c * h[cid(i, j, k)];
      }
}

// Returns final relative residual; heads updated in place.
double conjugate_gradient(const Grid& g, const Assembly& a, std::vector<double>& h,
                          double tol, int max_iter) {
  std::size_t n = h.size();
  std::vector<double> r(n), z(n), p(n), ap(n);
  apply_stencil(g, a, h, ap);
  double bnorm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = a.rhs[i] - ap[i];
    bnorm += a.rhs[i] * a.rhs[i];
  }
  bnorm = std::sqrt(bnorm);
  if (bnorm == 0.0) bnorm = 1.0;
  double rz = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = r[i] / a.diag[i];
    p[i] = z[i];
    rz += r[i] * z[i];
  }
  double rel = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    double rnorm = 0.0;
    for (std::size_t i = 0; i < n; ++i) rnorm += r[i] * r[i];
    rel = std::sqrt(rnorm) / bnorm;
    if (rel <= tol) return rel;
    apply_stencil(g, a, p, ap);
    double pap = 0.0;
    for (std::size_t i = 0; i < n; ++i) pap += p[i] * ap[i];
    if (pap <= 0.0) break;
    double alpha = rz / pap;
    for (std::size_t i = 0; i < n; ++i) {
      h[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    double rz_new = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      z[i] = r[i] / a.diag[i];
      rz_new += r[i] * z[i];
    }
    double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  double rnorm = 0.0;
  for (std::size_t i = 0; i < n; ++i) rnorm += r[i] * r[i];
  return std::sqrt(rnorm) / bnorm;
}

// True residual b - A h accumulated in extended precision, so iterative
// refinement can push the forward error below the double-rounding floor
// of the in-loop CG residual.
void true_residual(const Grid& g, const Assembly& a, const std::vector<double>& h,
                   std::vector<double>& r) {
  int nx = g.nx(), ny = g.ny(), nz = g.nz();
  auto cid = [&](int i, int j, int k) {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(nx) * (j + static_cast<std::size_t>(ny) * k);
  };
  std::vector<long double> acc(h.size());
  for (std::size_t c = 0; c < h.size(); ++c)
    acc[c] = static_cast<long double>(a.rhs[c]) -
             static_cast<long double>(a.diag[c]) * h[c];
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i + 1 < nx; ++i) {
        std::size_t f = static_cast<std::size_t>(i + 1) +
                        static_cast<std::size_t>(nx + 1) * (j + static_cast<std::size_t>(ny) * k);
        long double c = a.cx[f];
        if (c == 0.0L) continue;
        acc[cid(i, j, k)] += c * h[cid(i + 1, j, k)];
        acc[cid(i + 1, j, k)] += c * h[cid(i, j, k)];
      }
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j + 1 < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        std::size_t f = static_cast<std::size_t>(i) +
                        static_cast<std::size_t>(nx) * ((j + 1) + static_cast<std::size_t>(ny + 1) * k);
        long double c = a.cy[f];
        if (c == 0.0L) continue;
        acc[cid(i, j, k)] += c * h[cid(i, j + 1, k)];
        acc[cid(i, j + 1, k)] += c * h[cid(i, j, k)];
      }
  for (int k = 0; k + 1 < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        std::size_t f = static_cast<std::size_t>(i) +
                        static_cast<std::size_t>(nx) * (j + static_cast<std::size_t>(ny) * (k + 1));
        long double c = a.cz[f];
        if (c == 0.0L) continue;
        acc[cid(i, j, k)] += c * h[cid(i, j, k + 1)];
        acc[cid(i, j, k + 1)] += c * h[cid(i, j, k)];
      }
  for (std::size_t c = 0; c < h.size(); ++c) r[c] = static_cast<double>(acc[c]);
}

// CG followed by extended-precision iterative refinement. Returns the
// final true relative residual.
double refined_solve(const Grid& g, const Assembly& a, std::vector<double>& h,
                     double tol, int max_iter) {
  double bnorm = 0.0;
  for (double b : a.rhs) bnorm += b * b;
  bnorm = std::sqrt(bnorm);
  if (bnorm == 0.0) bnorm = 1.0;

  conjugate_gradient(g, a, h, tol, max_iter);

  // Refine toward the rounding floor even when `tol` is already met: the
  // caller's tolerance bounds the residual, while particle travel times
  // depend on the forward error of the head differences.
  constexpr double kFloor = 1e-15;
  std::vector<double> r(h.size()), e(h.size());
  double rel = std::numeric_limits<double>::infinity();
  for (int pass = 0; pass < 5; ++pass) {
    true_residual(g, a, h, r);
    double rnorm = 0.0;
    for (double x : r) rnorm += x * x;
    double rel_new = std::sqrt(rnorm) / bnorm;
    if (rel_new >= 0.5 * rel) return std::min(rel, rel_new);  // stagnated
    rel = rel_new;
    if (rel <= kFloor || pass == 4) break;
    Assembly corr = a;
    corr.rhs = r;
    std::fill(e.begin(), e.end(), 0.0);
    conjugate_gradient(g, corr, e, 1e-8, max_iter);
    for (std::size_t c = 0; c < h.size(); ++c) h[c] += e[c];
  }
  return rel;
}

}  // namespace

FlowSnapshot solve_steady(const Grid& grid, const ConductivityTensor& k,
                          const BoundaryConditionSet& bcs, const SolveOptions& opts) {
  std::size_t n = static_cast<std::size_t>(grid.cell_count());
  if (k.kxx.size() != n || k.kyy.size() != n || k.kzz.size() != n)
    throw std::invalid_argument("flow: conductivity array size mismatch");
  for (std::size_t c = 0; c < n; ++c)
    if (k.kxx[c] <= 0.0 || k.kyy[c] <= 0.0 || k.kzz[c] <= 0.0)
      throw std::invalid_argument("flow: conductivity must be positive");
  for (const auto& r : bcs.rivers)
    if (r.conductance < 0.0) throw std::invalid_argument("flow: river conductance < 0");
  for (const auto& d : bcs.drains)
    if (d.conductance < 0.0) throw std::invalid_argument("flow: drain conductance < 0");
  for (const auto& ch : bcs.constant_heads) {
    grid.check_cell(ch.cell);
    if (!grid.on_hull(ch.cell, ch.face))
      throw std::invalid_argument("flow: constant head must sit on a hull face");
  }

  int nx = grid.nx(), ny = grid.ny(), nz = grid.nz();
  auto cid = [&](int i, int j, int kk) { return grid.id(i, j, kk); };

  // Base conductance arrays and the fixed part of diag/rhs.
  Assembly base;
  base.diag.assign(n, 0.0);
  base.rhs.assign(n, 0.0);
  base.cx.assign(face_array_size(grid, 0), 0.0);
  base.cy.assign(face_array_size(grid, 1), 0.0);
  base.cz.assign(face_array_size(grid, 2), 0.0);

  FlowSnapshot snap;
  snap.grid = grid;

  for (int kk = 0; kk < nz; ++kk)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        std::size_t c = static_cast<std::size_t>(cid(i, j, kk));
        if (i + 1 < nx) {
          std::size_t cb = static_cast<std::size_t>(cid(i + 1, j, kk));
          double cc = harmonic_conductance(k.kxx[c], k.kxx[cb], grid.face_area(0, kk),
                                           grid.dx(), grid.dx());
          base.cx[snap.fx_index(i + 1, j, kk)] = cc;
          base.diag[c] += cc;
          base.diag[cb] += cc;
        }
        if (j + 1 < ny) {
          std::size_t cb = static_cast<std::size_t>(cid(i, j + 1, kk));
          double cc = harmonic_conductance(k.kyy[c], k.kyy[cb], grid.face_area(1, kk),
                                           grid.dy(), grid.dy());
          base.cy[snap.fy_index(i, j + 1, kk)] = cc;
          base.diag[c] += cc;
          base.diag[cb] += cc;
        }
        if (kk + 1 < nz) {
          std::size_t cb = static_cast<std::size_t>(cid(i, j, kk + 1));
          double cc = harmonic_conductance(k.kzz[c], k.kzz[cb], grid.face_area(2, 0),
                                           grid.dz()[kk], grid.dz()[kk + 1]);
          base.cz[snap.fz_index(i, j, kk + 1)] = cc;
          base.diag[c] += cc;
          base.diag[cb] += cc;
        }
      }

  // Constant heads attach through half-cell conductances.
  std::vector<double> ch_cond(bcs.constant_heads.size());
  for (std::size_t m = 0; m < bcs.constant_heads.size(); ++m) {
    const auto& ch = bcs.constant_heads[m];
    auto [i, j, kk] = grid.ijk(ch.cell);
    std::size_t c = static_cast<std::size_t>(ch.cell);
    double kax = ch.face.axis == 0 ? k.kxx[c] : ch.face.axis == 1 ? k.kyy[c] : k.kzz[c];
    double cc = kax * grid.face_area(ch.face.axis, kk) / (0.5 * grid.spacing(ch.face.axis, kk));
    ch_cond[m] = cc;
    base.diag[c] += cc;
    base.rhs[c] += cc * ch.head;
    base.has_reference = true;
  }

  for (const auto& w : bcs.wells) {
    grid.check_cell(w.cell);
    base.rhs[static_cast<std::size_t>(w.cell)] += w.rate;
  }
  if (bcs.recharge != 0.0) {
    int kk = nz - 1;
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        base.rhs[static_cast<std::size_t>(cid(i, j, kk))] +=
            bcs.recharge * grid.dx() * grid.dy();
  }

  // Initial heads: reference level from the head-carrying conditions.
  double ref = 0.0;
  std::size_t nref = 0;
  for (const auto& ch : bcs.constant_heads) { ref += ch.head; ++nref; }
  for (const auto& r : bcs.rivers) { ref += r.stage; ++nref; }
  for (const auto& d : bcs.drains) { ref += d.elevation; ++nref; }
  if (nref == 0)
    throw SolveError("flow: no head reference (no constant-head, river or drain condition)");
  ref /= static_cast<double>(nref);
  std::vector<double> h(n, ref);

  std::vector<char> river_active(bcs.rivers.size(), 1);
  std::vector<char> drain_active(bcs.drains.size(), 1);
  for (std::size_t m = 0; m < bcs.drains.size(); ++m)
    drain_active[m] = h[static_cast<std::size_t>(bcs.drains[m].cell)] > bcs.drains[m].elevation;

  int max_inner = opts.max_inner > 0 ? opts.max_inner : static_cast<int>(10 * n);
  std::vector<double> residual_history;
  std::vector<double> h_prev(n);
  bool converged = false;

  for (int outer = 0; outer < opts.max_outer; ++outer) {
    Assembly a = base;
    for (std::size_t m = 0; m < bcs.rivers.size(); ++m) {
      const auto& r = bcs.rivers[m];
      std::size_t c = static_cast<std::size_t>(r.cell);
      if (river_active[m]) {
        a.diag[c] += r.conductance;
        a.rhs[c] += r.conductance * r.stage;
        a.has_reference = true;
      } else {
        a.rhs[c] += r.conductance * (r.stage - r.bottom);
      }
    }
    for (std::size_t m = 0; m < bcs.drains.size(); ++m) {
      const auto& d = bcs.drains[m];
      std::size_t c = static_cast<std::size_t>(d.cell);
      if (drain_active[m]) {
        a.diag[c] += d.conductance;
        a.rhs[c] += d.conductance * d.elevation;
        a.has_reference = true;
      }
    }
    if (!a.has_reference)
      throw SolveError("flow: system lost its head reference during clamp iteration",
                       residual_history);

    h_prev = h;
    double rel = refined_solve(grid, a, h, opts.tol, max_inner);
    residual_history.push_back(rel);
    if (rel > opts.tol)
      throw SolveError("flow: conjugate gradient did not converge (residual " +
                           std::to_string(rel) + ")",
                       residual_history);

    bool clamp_changed = false;
    for (std::size_t m = 0; m < bcs.rivers.size(); ++m) {
      char want = h[static_cast<std::size_t>(bcs.rivers[m].cell)] > bcs.rivers[m].bottom;
      if (want != river_active[m]) { river_active[m] = want; clamp_changed = true; }
    }
    for (std::size_t m = 0; m < bcs.drains.size(); ++m) {
      char want = h[static_cast<std::size_t>(bcs.drains[m].cell)] > bcs.drains[m].elevation;
      if (want != drain_active[m]) { drain_active[m] = want; clamp_changed = true; }
    }
    double dh = 0.0;
    for (std::size_t c = 0; c < n; ++c) dh = std::max(dh, std::abs(h[c] - h_prev[c]));
    if (!clamp_changed && (outer > 0 && dh < opts.head_change_tol)) {
      converged = true;
      break;
    }
    if (!clamp_changed && outer == 0) {
      converged = true;  // linear problem, single solve suffices
      break;
    }
  }
  if (!converged)
    throw SolveError("flow: clamp iteration did not converge", residual_history);

  // Face flows and budget terms from the converged heads.
  snap.heads = h;
  snap.fx.assign(base.cx.size(), 0.0);
  snap.fy.assign(base.cy.size(), 0.0);
  snap.fz.assign(base.cz.size(), 0.0);
  snap.cell_src.assign(n, 0.0);
  snap.porosity = {1.0};

  for (int kk = 0; kk < nz; ++kk)
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i + 1 < nx; ++i) {
        std::size_t f = snap.fx_index(i + 1, j, kk);
        snap.fx[f] = base.cx[f] * (h[static_cast<std::size_t>(cid(i, j, kk))] -
                                   h[static_cast<std::size_t>(cid(i + 1, j, kk))]);
      }
    }
  for (int kk = 0; kk < nz; ++kk)
    for (int j = 0; j + 1 < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        std::size_t f = snap.fy_index(i, j + 1, kk);
        snap.fy[f] = base.cy[f] * (h[static_cast<std::size_t>(cid(i, j, kk))] -
                                   h[static_cast<std::size_t>(cid(i, j + 1, kk))]);
      }
  for (int kk = 0; kk + 1 < nz; ++kk)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        std::size_t f = snap.fz_index(i, j, kk + 1);
        snap.fz[f] = base.cz[f] * (h[static_cast<std::size_t>(cid(i, j, kk))] -
                                   h[static_cast<std::size_t>(cid(i, j, kk + 1))]);
      }

  for (std::size_t m = 0; m < bcs.constant_heads.size(); ++m) {
    const auto& ch = bcs.constant_heads[m];
    auto [i, j, kk] = grid.ijk(ch.cell);
    std::size_t c = static_cast<std::size_t>(ch.cell);
    // Signed positive toward higher index along the face axis.
    double q_out = ch_cond[m] * (h[c] - ch.head);
    double q_signed = ch.face.side == 1 ? q_out : -q_out;
    switch (ch.face.axis) {
      case 0: snap.fx[snap.fx_index(i + ch.face.side, j, kk)] += q_signed; break;
      case 1: snap.fy[snap.fy_index(i, j + ch.face.side, kk)] += q_signed; break;
      default: snap.fz[snap.fz_index(i, j, kk + ch.face.side)] += q_signed; break;
    }
  }

  for (const auto& w : bcs.wells)
    snap.cell_src[static_cast<std::size_t>(w.cell)] += w.rate;
  // Recharge enters through the top hull face (negative = downward), so
  // particles released on top faces see the matching inflow velocity.
  if (bcs.recharge != 0.0) {
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        snap.fz[snap.fz_index(i, j, nz)] -= bcs.recharge * grid.dx() * grid.dy();
  }
  for (std::size_t m = 0; m < bcs.rivers.size(); ++m) {
    const auto& r = bcs.rivers[m];
    std::size_t c = static_cast<std::size_t>(r.cell);
    snap.cell_src[c] += river_active[m] ? r.conductance * (r.stage - h[c])
                                        : r.conductance * (r.stage - r.bottom);
  }
  for (std::size_t m = 0; m < bcs.drains.size(); ++m) {
    const auto& d = bcs.drains[m];
    std::size_t c = static_cast<std::size_t>(d.cell);
    if (drain_active[m]) snap.cell_src[c] += d.conductance * (d.elevation - h[c]);
  }

  return snap;
}

// ---------------------------------------------------------------------------
// Snapshot serialization (versioned plain text, 17 significant digits).

namespace {

void write_array(std::ostream& out, const char* label, const std::vector<double>& v) {
  out << label << '\n';
  for (double x : v) out << x << '\n';
}

std::vector<double> read_array(std::istream& in, const std::string& label, std::size_t n) {
  std::string line;
  if (!std::getline(in, line) || line != label)
    throw std::runtime_error("flow snapshot: expected section " + label +
                             (line.empty() ? " (file truncated)" : ", found '" + line + "'"));
  std::vector<double> v(n);
  for (std::size_t m = 0; m < n; ++m) {
    if (!std::getline(in, line))
      throw std::runtime_error("flow snapshot: truncated while reading section " + label);
    v[m] = std::stod(line);
  }
  return v;
}

}  // namespace

void save_snapshot(const FlowSnapshot& snap, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("flow snapshot: cannot open " + path);
  out.precision(17);
  const Grid& g = snap.grid;
  out << "PTRACE-FLOW v1\n";
  out << "DIMS " << g.nx() << ' ' << g.ny() << ' ' << g.nz() << '\n';
  out << "SPACING " << g.dx() << ' ' << g.dy() << '\n';
  out << "DZ";
  for (double d : g.dz()) out << ' ' << d;
  out << '\n';
  if (snap.porosity.size() == 1)
    out << "POROSITY_CONST " << snap.porosity[0] << '\n';
  else
    out << "POROSITY_ARRAY\n";
  out << "PERIOD " << snap.start << ' ';
  if (std::isinf(snap.duration)) out << "inf";
  else out << snap.duration;
  out << '\n';
  write_array(out, "HEADS", snap.heads);
  write_array(out, "FACEFLOW_X", snap.fx);
  write_array(out, "FACEFLOW_Y", snap.fy);
  write_array(out, "FACEFLOW_Z", snap.fz);
  write_array(out, "CELL_SRCSNK", snap.cell_src);
  if (snap.porosity.size() != 1) write_array(out, "POROSITY", snap.porosity);
  if (!out) throw std::runtime_error("flow snapshot: write failed for " + path);
}

FlowSnapshot load_snapshot(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("flow snapshot: cannot open " + path);
  std::string line, tag;
  if (!std::getline(in, line)) throw std::runtime_error("flow snapshot: empty file " + path);
  if (line != "PTRACE-FLOW v1")
    throw std::runtime_error("flow snapshot: unsupported version header '" + line + "'");

  int nx = 0, ny = 0, nz = 0;
  double dx = 0, dy = 0;
  {
    if (!std::getline(in, line)) throw std::runtime_error("flow snapshot: missing DIMS");
    std::istringstream ss(line);
    ss >> tag >> nx >> ny >> nz;
    if (tag != "DIMS" || ss.fail()) throw std::runtime_error("flow snapshot: malformed DIMS line");
  }
  {
    if (!std::getline(in, line)) throw std::runtime_error("flow snapshot: missing SPACING");
    std::istringstream ss(line);
    ss >> tag >> dx >> dy;
    if (tag != "SPACING" || ss.fail())
      throw std::runtime_error("flow snapshot: malformed SPACING line");
  }
  std::vector<double> dz;
  {
    if (!std::getline(in, line)) throw std::runtime_error("flow snapshot: missing DZ");
    std::istringstream ss(line);
    ss >> tag;
    if (tag != "DZ") throw std::runtime_error("flow snapshot: malformed DZ line");
    double d;
    while (ss >> d) dz.push_back(d);
    if (static_cast<int>(dz.size()) != nz)
      throw std::runtime_error("flow snapshot: DZ count does not match nz");
  }
  FlowSnapshot snap;
  snap.grid = Grid::structured(nx, ny, nz, dx, dy, dz);

  bool porosity_array = false;
  {
    if (!std::getline(in, line)) throw std::runtime_error("flow snapshot: missing POROSITY line");
    std::istringstream ss(line);
    ss >> tag;
    if (tag == "POROSITY_CONST") {
      double p;
      ss >> p;
      if (ss.fail()) throw std::runtime_error("flow snapshot: malformed POROSITY_CONST");
      snap.porosity = {p};
    } else if (tag == "POROSITY_ARRAY") {
      porosity_array = true;
    } else {
      throw std::runtime_error("flow snapshot: malformed porosity line '" + line + "'");
    }
  }
  {
    if (!std::getline(in, line)) throw std::runtime_error("flow snapshot: missing PERIOD");
    std::istringstream ss(line);
    std::string dur;
    ss >> tag >> snap.start >> dur;
    if (tag != "PERIOD" || ss.fail())
      throw std::runtime_error("flow snapshot: malformed PERIOD line");
    snap.duration = (dur == "inf") ? kUnboundedDuration : std::stod(dur);
  }

  std::size_t n = static_cast<std::size_t>(snap.grid.cell_count());
  snap.heads = read_array(in, "HEADS", n);
  snap.fx = read_array(in, "FACEFLOW_X", face_array_size(snap.grid, 0));
  snap.fy = read_array(in, "FACEFLOW_Y", face_array_size(snap.grid, 1));
  snap.fz = read_array(in, "FACEFLOW_Z", face_array_size(snap.grid, 2));
  snap.cell_src = read_array(in, "CELL_SRCSNK", n);
  if (porosity_array) snap.porosity = read_array(in, "POROSITY", n);
  return snap;
}

// ---------------------------------------------------------------------------

FlowStore::FlowStore(std::vector<FlowSnapshot> snapshots)
    : snapshots_(std::move(snapshots)) {
  if (snapshots_.empty()) throw std::invalid_argument("flow store: no snapshots");
  double expect = 0.0;
  for (std::size_t m = 0; m < snapshots_.size(); ++m) {
    if (snapshots_[m].start != expect)
      throw std::invalid_argument("flow store: snapshot start times must chain from 0");
    if (m + 1 < snapshots_.size() && std::isinf(snapshots_[m].duration))
      throw std::invalid_argument("flow store: only the final snapshot may be unbounded");
    if (!(snapshots_[m].grid == snapshots_.front().grid))
      throw std::invalid_argument("flow store: snapshots disagree on grid");
    expect = snapshots_[m].end_time();
  }
}

const FlowSnapshot& FlowStore::snapshot_at(double time) const {
  // A time exactly at a period boundary selects the later period.
  for (std::size_t m = snapshots_.size(); m-- > 0;)
    if (time >= snapshots_[m].start) return snapshots_[m];
  return snapshots_.front();
}

std::array<double, 6> FlowStore::face_velocities(CellId cell, double time) const {
  const FlowSnapshot& snap = snapshot_at(time);
  snap.grid.check_cell(cell);
  auto [i, j, k] = snap.grid.ijk(cell);
  double theta = snap.porosity_at(cell);
  double ax = snap.grid.face_area(0, k) * theta;
  double ay = snap.grid.face_area(1, k) * theta;
  double az = snap.grid.face_area(2, k) * theta;
  return {snap.fx[snap.fx_index(i, j, k)] / ax,
          snap.fx[snap.fx_index(i + 1, j, k)] / ax,
          snap.fy[snap.fy_index(i, j, k)] / ay,
          snap.fy[snap.fy_index(i, j + 1, k)] / ay,
          snap.fz[snap.fz_index(i, j, k)] / az,
          snap.fz[snap.fz_index(i, j, k + 1)] / az};
}

SinkClass FlowStore::classify_cell(CellId cell, double time) const {
  const FlowSnapshot& snap = snapshot_at(time);
  snap.grid.check_cell(cell);
  return classify_cell_snapshot(snap, cell);
}

}  // namespace ptrace
