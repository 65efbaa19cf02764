#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ptrace {

// Zero-mean, unit-variance stationary Gaussian field on a 2D lattice with
// isotropic exponential covariance C(h) = exp(-h / corr_len).
struct GaussianField {
  int nx = 0, ny = 0;
  double dx = 1.0, dy = 1.0;
  double corr_len = 1.0;
  std::uint64_t seed = 0;
  std::vector<double> values;  // row-major, index i + nx*j

  double at(int i, int j) const { return values[i + static_cast<std::size_t>(nx) * j]; }
};

struct ConductivityField {
  std::vector<double> k;  // m/d, same layout as the source field
  double sigma2 = 0.0;
};

// Circulant-embedding spectral synthesis. Deterministic for a fixed
// (dimensions, corr_len, seed) tuple; the noise stream comes from a
// seeded mt19937_64 with an explicit Box-Muller transform.
GaussianField generate_field(int nx, int ny, double dx, double dy,
                             double corr_len, std::uint64_t seed);

// K = exp(sqrt(sigma2) * Y) elementwise.
ConductivityField scale_to_conductivity(const GaussianField& field, double sigma2);

struct VariogramPoint {
  double lag = 0.0;
  double semivariance = 0.0;
  std::size_t pairs = 0;   // 0 marks an empty lag bin
};

// Method-of-moments semivariance along the two lattice axes.
std::vector<VariogramPoint> empirical_variogram(const GaussianField& field,
                                                const std::vector<double>& lags);

// Plain-text dump: "nx ny dx dy" header followed by row-major values.
void save_field(const GaussianField& field, const std::string& path);

}  // namespace ptrace
