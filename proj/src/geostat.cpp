#include "ptrace/geostat.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>

namespace ptrace {

namespace {

// Uniform (0,1] and Box-Muller normals from a fixed 64-bit generator.
// std::normal_distribution is implementation-defined, so the transform
// is spelled out to keep fields reproducible per seed.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : rng_(seed) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  double uniform01() {
    // 53-bit mantissa, shifted into (0,1] so log() never sees zero.
    return (static_cast<double>(rng_() >> 11) + 1.0) * 0x1p-53;
  }

  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

GaussianField generate_field(int nx, int ny, double dx, double dy,
                             double corr_len, std::uint64_t seed) {
  if (nx < 1 || ny < 1) throw std::invalid_argument("geostat: dimensions must be >= 1");
  if (dx <= 0.0 || dy <= 0.0) throw std::invalid_argument("geostat: spacings must be positive");
  if (corr_len <= 0.0) throw std::invalid_argument("geostat: corr_len must be positive");

  // Embed on a torus padded by several correlation lengths so the
  // circulant extension of the exponential covariance stays (nearly)
  // nonnegative definite.
  std::size_t padx = static_cast<std::size_t>(std::ceil(8.0 * corr_len / dx));
  std::size_t pady = static_cast<std::size_t>(std::ceil(8.0 * corr_len / dy));
  std::size_t mx = next_pow2(std::max<std::size_t>(2 * nx, nx + padx));
  std::size_t my = next_pow2(std::max<std::size_t>(2 * ny, ny + pady));
  std::size_t m = mx * my;

  std::vector<std::complex<double>> buf(m);
  for (std::size_t q = 0; q < my; ++q) {
    double hy = static_cast<double>(std::min(q, my - q)) * dy;
    for (std::size_t p = 0; p < mx; ++p) {
      double hx = static_cast<double>(std::min(p, mx - p)) * dx;
      double h = std::hypot(hx, hy);
      buf[p + mx * q] = std::exp(-h / corr_len);
    }
  }

  fftw_plan plan = fftw_plan_dft_2d(
      static_cast<int>(my), static_cast<int>(mx),
      reinterpret_cast<fftw_complex*>(buf.data()),
      reinterpret_cast<fftw_complex*>(buf.data()), FFTW_FORWARD, FFTW_ESTIMATE);
  fftw_execute(plan);

  // Eigenvalues of the circulant; clamp tiny negatives, reject large ones.
  double max_ev = 0.0, min_ev = 0.0;
  for (auto& z : buf) {
    max_ev = std::max(max_ev, z.real());
    min_ev = std::min(min_ev, z.real());
  }
  if (min_ev < -1e-7 * max_ev) {
    fftw_destroy_plan(plan);
    throw std::runtime_error(
        "geostat: circulant embedding not nonnegative definite (min/max eigenvalue " +
        std::to_string(min_ev) + "/" + std::to_string(max_ev) +
        "); grid aspect ratio or correlation length is pathological");
  }

  NormalStream noise(seed);
  double inv_m = 1.0 / static_cast<double>(m);
  for (auto& z : buf) {
    double ev = std::max(z.real(), 0.0);
    double s = std::sqrt(ev * inv_m);
    double re = noise.next();
    double im = noise.next();
    z = {s * re, s * im};
  }

  fftw_execute(plan);  // same unnormalized forward transform
  fftw_destroy_plan(plan);

  GaussianField field;
  field.nx = nx;
  field.ny = ny;
  field.dx = dx;
  field.dy = dy;
  field.corr_len = corr_len;
  field.seed = seed;
  field.values.resize(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      field.values[i + static_cast<std::size_t>(nx) * j] = buf[i + mx * j].real();
  return field;
}

ConductivityField scale_to_conductivity(const GaussianField& field, double sigma2) {
  if (sigma2 < 0.0) throw std::invalid_argument("geostat: sigma2 must be nonnegative");
  ConductivityField out;
  out.sigma2 = sigma2;
  out.k.resize(field.values.size());
  double sigma = std::sqrt(sigma2);
  for (std::size_t n = 0; n < field.values.size(); ++n)
    out.k[n] = std::exp(sigma * field.values[n]);
  return out;
}

std::vector<VariogramPoint> empirical_variogram(const GaussianField& field,
                                                const std::vector<double>& lags) {
  std::vector<VariogramPoint> out;
  out.reserve(lags.size());
  for (double lag : lags) {
    VariogramPoint pt;
    pt.lag = lag;
    if (lag == 0.0) {
      pt.semivariance = 0.0;
      pt.pairs = static_cast<std::size_t>(field.nx) * field.ny;
      out.push_back(pt);
      continue;
    }
    long ox = std::lround(lag / field.dx);
    long oy = std::lround(lag / field.dy);
    double acc = 0.0;
    std::size_t n = 0;
    if (ox >= 1 && ox < field.nx) {
      for (int j = 0; j < field.ny; ++j)
        for (int i = 0; i + ox < field.nx; ++i) {
          double d = field.at(i + static_cast<int>(ox), j) - field.at(i, j);
          acc += d * d;
          ++n;
        }
    }
    if (oy >= 1 && oy < field.ny) {
      for (int j = 0; j + oy < field.ny; ++j)
        for (int i = 0; i < field.nx; ++i) {
          double d = field.at(i, j + static_cast<int>(oy)) - field.at(i, j);
          acc += d * d;
          ++n;
        }
    }
    pt.pairs = n;
    pt.semivariance = n > 0 ? acc / (2.0 * static_cast<double>(n)) : 0.0;
    out.push_back(pt);
  }
  return out;
}

void save_field(const GaussianField& field, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("geostat: cannot open " + path);
  out.precision(17);
  out << field.nx << ' ' << field.ny << ' ' << field.dx << ' ' << field.dy << '\n';
  for (double v : field.values) out << v << '\n';
  if (!out) throw std::runtime_error("geostat: write failed for " + path);
}

}  // namespace ptrace
