#pragma once

// Deterministic quadrature for low-dimensional posteriors given by an
// unnormalised log density.

#include <functional>
#include <vector>

#include "titepk/rng.hpp"

namespace titepk::inference {

struct QuadratureConfig {
  double range_sd = 8.0;          // half-width of the integration range, in scale units
  double rel_tol = 1e-8;          // 1-D adaptive Gauss-Kronrod tolerance
  int max_panels = 4000;          // 1-D node budget is 15 * max_panels
  int grid_nodes = 64;            // 2-D nodes per axis
  double boundary_fraction = 0.05;  // outer share of the range checked for leaking mass
  double boundary_mass = 1e-3;    // more than this at the boundary triggers widening
  int max_widen = 3;              // automatic widenings before WidenRangeError
  double widen_factor = 1.5;

  void validate() const;
};

// One-dimensional density integrated with adaptive Gauss-Kronrod (7/15).
// Partial integrals for the CDF are exact to the same rule on the sub-panel.
class Density1D {
 public:
  using LogDensity = std::function<double(double)>;

  // Integrates over [lo, hi]; throws WidenRangeError when the boundary
  // holds more than config.boundary_mass.
  static Density1D over_range(LogDensity log_density, double lo, double hi, const QuadratureConfig& config);
  // Integrates over center +/- range_sd * scale, widening automatically up to
  // config.max_widen times.
  static Density1D around(LogDensity log_density, double center, double scale, const QuadratureConfig& config);

  double lower() const { return lo_; }
  double upper() const { return hi_; }
  double log_normalizer() const;
  double pdf(double x) const;
  double cdf(double x) const;
  double quantile(double p) const;
  double mean() const;
  // E[g(X)] for a smooth g, with the same panels.
  double expect(const std::function<double(double)>& g) const;
  double boundary_mass(double fraction) const;

 private:
  struct Panel {
    double a, b, integral, error;
  };
  Density1D() = default;
  double rel_density(double x) const;
  double panel_integral(double a, double b) const;

  LogDensity log_density_;
  double lo_ = 0, hi_ = 0, log_peak_ = 0, total_ = 0;
  std::vector<Panel> panels_;       // sorted by a
  std::vector<double> cumulative_;  // mass before each panel
};

// Two-dimensional density on a sheared product grid centred at the mode.
// The outer axis is y; the inner axis x is centred at the conditional
// Laplace mean of x given y. Integrals use the trapezoid rule, which is
// spectrally accurate for smooth integrands that decay inside the range;
// conditional CDFs along x carry an Euler-Maclaurin end correction and
// cubic Hermite interpolation.
class Density2D {
 public:
  using LogDensity = std::function<double(double x, double y)>;

  static Density2D around(LogDensity log_density, double center_x, double center_y, double scale_x,
                          double scale_y, const QuadratureConfig& config);

  double log_normalizer() const { return log_normalizer_; }
  double expect(const std::function<double(double, double)>& g) const;
  // P(x + shift(y) <= t).
  double cdf_shifted(double t, const std::function<double(double)>& shift) const;
  double quantile_shifted(double p, const std::function<double(double)>& shift) const;
  double mode_x() const { return mode_x_; }
  double mode_y() const { return mode_y_; }
  double boundary_mass() const { return boundary_mass_; }
  // Draws with P(x + shift(y) <= t) matching cdf_shifted.
  std::vector<std::pair<double, double>> sample(std::size_t n, Rng& rng) const;

 private:
  Density2D() = default;
  bool build(const LogDensity& f, double range, int nodes, double boundary_fraction);
  double column_cdf(std::size_t i, double x) const;

  double mode_x_ = 0, mode_y_ = 0, slope_ = 0, sd_y_ = 1, sd_x_ = 1;
  int n_ = 0;
  double hy_ = 0, hx_ = 0, range_ = 0;
  std::vector<double> y_;        // outer nodes
  std::vector<double> x0_;       // first inner node per column
  std::vector<double> dens_;     // n_ x n_, relative density
  std::vector<double> cum_;      // n_ x n_, cumulative along x
  std::vector<double> column_mass_;
  double total_ = 0, log_peak_ = 0, log_normalizer_ = 0, boundary_mass_ = 0;
};

}  // namespace titepk::inference
