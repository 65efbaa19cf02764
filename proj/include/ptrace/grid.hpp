#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace ptrace {

using CellId = std::int64_t;

// Cell face, identified by axis (0=x, 1=y, 2=z) and side (0=low, 1=high).
struct Face {
  int axis = 0;
  int side = 0;

  Face opposite() const { return {axis, 1 - side}; }
  bool operator==(const Face&) const = default;
};

// Structured rectilinear grid. Horizontal spacings dx, dy are uniform;
// layer thickness dz varies per layer. z increases upward, layer k=0 is
// the bottom layer. Cell id bijection: id = i + nx*(j + ny*k).
class Grid {
 public:
  Grid() = default;

  static Grid structured(int nx, int ny, int nz, double dx, double dy,
                         std::vector<double> dz,
                         std::array<double, 3> origin = {0.0, 0.0, 0.0}) {
    if (nx < 1 || ny < 1 || nz < 1)
      throw std::invalid_argument("grid: cell counts must be >= 1");
    if (dx <= 0.0 || dy <= 0.0)
      throw std::invalid_argument("grid: spacings must be positive");
    if (static_cast<int>(dz.size()) != nz)
      throw std::invalid_argument("grid: dz list length must equal nz");
    for (double d : dz)
      if (d <= 0.0) throw std::invalid_argument("grid: dz must be positive");
    Grid g;
    g.nx_ = nx;
    g.ny_ = ny;
    g.nz_ = nz;
    g.dx_ = dx;
    g.dy_ = dy;
    g.dz_ = std::move(dz);
    g.origin_ = origin;
    g.zedges_.resize(nz + 1);
    g.zedges_[0] = origin[2];
    for (int k = 0; k < nz; ++k) g.zedges_[k + 1] = g.zedges_[k] + g.dz_[k];
    return g;
  }

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nz() const { return nz_; }
  double dx() const { return dx_; }
  double dy() const { return dy_; }
  const std::vector<double>& dz() const { return dz_; }
  const std::array<double, 3>& origin() const { return origin_; }

  CellId cell_count() const {
    return static_cast<CellId>(nx_) * ny_ * nz_;
  }

  CellId id(int i, int j, int k) const {
    return static_cast<CellId>(i) +
           static_cast<CellId>(nx_) * (static_cast<CellId>(j) +
                                       static_cast<CellId>(ny_) * k);
  }

  std::array<int, 3> ijk(CellId c) const {
    check_cell(c);
    int i = static_cast<int>(c % nx_);
    int j = static_cast<int>((c / nx_) % ny_);
    int k = static_cast<int>(c / (static_cast<CellId>(nx_) * ny_));
    return {i, j, k};
  }

  bool valid_cell(CellId c) const { return c >= 0 && c < cell_count(); }

  void check_cell(CellId c) const {
    if (!valid_cell(c)) throw std::out_of_range("grid: invalid cell id");
  }

  // Adjacent cell across a face, or nullopt when the face lies on the hull.
  std::optional<CellId> neighbor(CellId c, Face f) const {
    auto [i, j, k] = ijk(c);
    int d = f.side == 1 ? 1 : -1;
    switch (f.axis) {
      case 0:
        i += d;
        if (i < 0 || i >= nx_) return std::nullopt;
        break;
      case 1:
        j += d;
        if (j < 0 || j >= ny_) return std::nullopt;
        break;
      case 2:
        k += d;
        if (k < 0 || k >= nz_) return std::nullopt;
        break;
      default:
        throw std::invalid_argument("grid: bad face axis");
    }
    return id(i, j, k);
  }

  bool on_hull(CellId c, Face f) const { return !neighbor(c, f).has_value(); }

  double spacing(int axis, int k) const {
    switch (axis) {
      case 0: return dx_;
      case 1: return dy_;
      default: return dz_[k];
    }
  }

  // Area of a face normal to `axis` for a cell in layer k.
  double face_area(int axis, int k) const {
    switch (axis) {
      case 0: return dy_ * dz_[k];
      case 1: return dx_ * dz_[k];
      default: return dx_ * dy_;
    }
  }

  double cell_volume(int k) const { return dx_ * dy_ * dz_[k]; }

  std::array<double, 3> cell_low_corner(CellId c) const {
    auto [i, j, k] = ijk(c);
    return {origin_[0] + i * dx_, origin_[1] + j * dy_, zedges_[k]};
  }

  std::array<double, 3> global_position(CellId c,
                                        const std::array<double, 3>& local) const {
    auto [i, j, k] = ijk(c);
    return {origin_[0] + (i + local[0]) * dx_,
            origin_[1] + (j + local[1]) * dy_,
            zedges_[k] + local[2] * dz_[k]};
  }

  struct Location {
    CellId cell;
    std::array<double, 3> local;
  };

  // Points exactly on an interior face assign to the higher-index cell.
  // Points on the domain's high hull assign to the last cell with local 1.
  Location locate(const std::array<double, 3>& p) const {
    double tx = (p[0] - origin_[0]) / dx_;
    double ty = (p[1] - origin_[1]) / dy_;
    if (tx < 0.0 || tx > nx_ || ty < 0.0 || ty > ny_ ||
        p[2] < zedges_.front() || p[2] > zedges_.back())
      throw std::out_of_range("grid: point outside domain");
    int i = static_cast<int>(tx);
    int j = static_cast<int>(ty);
    double lx = tx - i, ly = ty - j;
    if (i >= nx_) { i = nx_ - 1; lx = 1.0; }
    if (j >= ny_) { j = ny_ - 1; ly = 1.0; }
    int k = nz_ - 1;
    double lz = 1.0;
    for (int kk = 0; kk < nz_; ++kk) {
      if (p[2] < zedges_[kk + 1]) {
        k = kk;
        lz = (p[2] - zedges_[kk]) / dz_[kk];
        break;
      }
    }
    return {id(i, j, k), {lx, ly, lz}};
  }

  double domain_volume() const {
    double v = 0.0;
    for (int k = 0; k < nz_; ++k) v += cell_volume(k) * nx_ * ny_;
    return v;
  }

  bool operator==(const Grid&) const = default;

 private:
  int nx_ = 1, ny_ = 1, nz_ = 1;
  double dx_ = 1.0, dy_ = 1.0;
  std::vector<double> dz_{1.0};
  std::array<double, 3> origin_{0.0, 0.0, 0.0};
  std::vector<double> zedges_{0.0, 1.0};
};

}  // namespace ptrace
