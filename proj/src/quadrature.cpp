#include "titepk/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "titepk/errors.hpp"

namespace titepk::inference {
namespace {

constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851, 0.864864423359769072789712788640926,
    0.741531185599394439863864773280788, 0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204, 0.104790010322250183839876322541518,
    0.140653259715525918745189590510238, 0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                                       0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct GkResult {
  double kronrod, gauss;
};

template <typename F>
GkResult gauss_kronrod(F&& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double k = kWgk[7] * fc;
  double g = kWg[3] * fc;
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXgk[j];
    const double s = f(c - dx) + f(c + dx);
    k += kWgk[j] * s;
    if (j % 2 == 1) g += kWg[j / 2] * s;
  }
  return {k * h, g * h};
}

double safe_exp(double log_value, double log_peak) {
  if (std::isnan(log_value)) throw InvalidInput("log density returned NaN");
  if (log_value == -std::numeric_limits<double>::infinity()) return 0.0;
  return std::exp(log_value - log_peak);
}

}  // namespace

void QuadratureConfig::validate() const {
  if (!(rel_tol > 0.0)) throw InvalidInput("quadrature tolerance must be positive");
  if (!(range_sd > 0.0)) throw InvalidInput("quadrature range must be positive");
  if (max_panels < 1 || grid_nodes < 8) throw InvalidInput("quadrature node budget too small");
  if (!(widen_factor > 1.0)) throw InvalidInput("widen factor must exceed 1");
}

// ---------------------------------------------------------------------------
// Density1D

double Density1D::rel_density(double x) const {
  return safe_exp(log_density_(x), log_peak_);
}

double Density1D::panel_integral(double a, double b) const {
  if (b <= a) return 0.0;
  return gauss_kronrod([this](double x) { return rel_density(x); }, a, b).kronrod;
}

Density1D Density1D::over_range(LogDensity log_density, double lo, double hi, const QuadratureConfig& config) {
  config.validate();
  if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) throw InvalidInput("bad integration range");
  Density1D d;
  d.log_density_ = std::move(log_density);
  d.lo_ = lo;
  d.hi_ = hi;

  // Locate the peak so the integrand is O(1) near its maximum.
  constexpr int kScan = 257;
  double best_x = lo, best = -std::numeric_limits<double>::infinity();
  const double step = (hi - lo) / (kScan - 1);
  for (int i = 0; i < kScan; ++i) {
    const double x = lo + step * i;
    const double v = d.log_density_(x);
    if (std::isnan(v)) throw InvalidInput("log density returned NaN");
    if (v > best) {
      best = v;
      best_x = x;
    }
  }
  if (!std::isfinite(best)) throw WidenRangeError("density vanishes on the whole range");
  {
    double a = std::max(lo, best_x - step), b = std::min(hi, best_x + step);
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - phi * (b - a), e = a + phi * (b - a);
    double fc = d.log_density_(c), fe = d.log_density_(e);
    for (int it = 0; it < 80 && b - a > 1e-12 * (1.0 + std::abs(best_x)); ++it) {
      if (fc > fe) {
        b = e;
        e = c;
        fe = fc;
        c = b - phi * (b - a);
        fc = d.log_density_(c);
      } else {
        a = c;
        c = e;
        fc = fe;
        e = a + phi * (b - a);
        fe = d.log_density_(e);
      }
    }
    best = std::max({best, fc, fe});
  }
  d.log_peak_ = best;

  auto make_panel = [&d](double a, double b) {
    const auto r = gauss_kronrod([&d](double x) { return d.rel_density(x); }, a, b);
    return Panel{a, b, r.kronrod, std::abs(r.kronrod - r.gauss)};
  };
  auto worse = [](const Panel& p, const Panel& q) { return p.error < q.error; };

  std::vector<Panel> heap;
  constexpr int kInitial = 16;
  for (int i = 0; i < kInitial; ++i) {
    const double a = lo + (hi - lo) * i / kInitial;
    const double b = (i + 1 == kInitial) ? hi : lo + (hi - lo) * (i + 1) / kInitial;
    heap.push_back(make_panel(a, b));
  }
  std::make_heap(heap.begin(), heap.end(), worse);
  auto totals = [&heap] {
    double s = 0, e = 0;
    for (const auto& p : heap) {
      s += p.integral;
      e += p.error;
    }
    return std::pair{s, e};
  };
  auto [total, error] = totals();
  while (error > config.rel_tol * total && static_cast<int>(heap.size()) < config.max_panels) {
    std::pop_heap(heap.begin(), heap.end(), worse);
    const Panel worst = heap.back();
    heap.pop_back();
    const double mid = 0.5 * (worst.a + worst.b);
    heap.push_back(make_panel(worst.a, mid));
    std::push_heap(heap.begin(), heap.end(), worse);
    heap.push_back(make_panel(mid, worst.b));
    std::push_heap(heap.begin(), heap.end(), worse);
    total += heap[heap.size() - 1].integral + heap[heap.size() - 2].integral - worst.integral;
    error += heap[heap.size() - 1].error + heap[heap.size() - 2].error - worst.error;
    if (heap.size() % 64 == 0) std::tie(total, error) = totals();
  }
  std::sort(heap.begin(), heap.end(), [](const Panel& p, const Panel& q) { return p.a < q.a; });
  d.panels_ = std::move(heap);
  d.cumulative_.resize(d.panels_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < d.panels_.size(); ++i) {
    d.cumulative_[i] = acc;
    acc += d.panels_[i].integral;
  }
  d.total_ = acc;
  if (!(d.total_ > 0.0)) throw WidenRangeError("density integrates to zero on the range");

  if (d.boundary_mass(config.boundary_fraction) > config.boundary_mass)
    throw WidenRangeError("posterior mass reaches the quadrature boundary");
  return d;
}

Density1D Density1D::around(LogDensity log_density, double center, double scale, const QuadratureConfig& config) {
  config.validate();
  double half = config.range_sd * scale;
  for (int attempt = 0;; ++attempt) {
    try {
      return over_range(log_density, center - half, center + half, config);
    } catch (const WidenRangeError&) {
      if (attempt >= config.max_widen) throw;
      half *= config.widen_factor;
    }
  }
}

double Density1D::log_normalizer() const { return std::log(total_) + log_peak_; }

double Density1D::pdf(double x) const {
  if (x < lo_ || x > hi_) return 0.0;
  return rel_density(x) / total_;
}

double Density1D::cdf(double x) const {
  if (x <= lo_) return 0.0;
  if (x >= hi_) return 1.0;
  auto it = std::upper_bound(panels_.begin(), panels_.end(), x, [](double v, const Panel& p) { return v < p.a; });
  const std::size_t k = static_cast<std::size_t>(std::distance(panels_.begin(), it)) - 1;
  const double mass = cumulative_[k] + panel_integral(panels_[k].a, std::min(x, panels_[k].b));
  return std::clamp(mass / total_, 0.0, 1.0);
}

double Density1D::quantile(double p) const {
  if (!(p > 0.0 && p < 1.0)) throw InvalidInput("quantile level must be in (0, 1)");
  const double target = p * total_;
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
  const std::size_t k = static_cast<std::size_t>(std::distance(cumulative_.begin(), it)) - 1;
  const Panel& panel = panels_[k];
  double a = panel.a, b = panel.b;
  double x = 0.5 * (a + b);
  for (int it2 = 0; it2 < 200; ++it2) {
    const double g = cumulative_[k] + panel_integral(panel.a, x) - target;
    if (g > 0) b = x;
    else a = x;
    const double dens = rel_density(x);
    double next = dens > 0 ? x - g / dens : 0.5 * (a + b);
    if (!(next > a && next < b)) next = 0.5 * (a + b);
    if (std::abs(next - x) <= 1e-13 * (1.0 + std::abs(x)) || b - a <= 1e-13 * (1.0 + std::abs(x))) return next;
    x = next;
  }
  return x;
}

double Density1D::expect(const std::function<double(double)>& g) const {
  double acc = 0.0;
  for (const auto& p : panels_)
    acc += gauss_kronrod([&](double x) { return g(x) * rel_density(x); }, p.a, p.b).kronrod;
  return acc / total_;
}

double Density1D::mean() const {
  return expect([](double x) { return x; });
}

double Density1D::boundary_mass(double fraction) const {
  const double w = (hi_ - lo_) * fraction;
  return cdf(lo_ + w) + (1.0 - cdf(hi_ - w));
}

// ---------------------------------------------------------------------------
// Density2D

namespace {

struct Mode2 {
  double x, y, vxx, vxy, vyy;
  bool laplace_ok;
};

Mode2 find_mode(const Density2D::LogDensity& f, double cx, double cy, double sx, double sy, double range) {
  constexpr int kCoarse = 41;
  double bx = cx, by = cy, best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < kCoarse; ++i) {
    const double y = cy + sy * range * (2.0 * i / (kCoarse - 1) - 1.0);
    for (int j = 0; j < kCoarse; ++j) {
      const double x = cx + sx * range * (2.0 * j / (kCoarse - 1) - 1.0);
      const double v = f(x, y);
      if (v > best) {
        best = v;
        bx = x;
        by = y;
      }
    }
  }
  if (!std::isfinite(best)) throw WidenRangeError("density vanishes on the whole 2-D range");

  double x = bx, y = by, fx = best;
  double hxx = 0, hxy = 0, hyy = 0;
  bool nd = false;
  for (int it = 0; it < 100; ++it) {
    const double ex = 1e-4 * sx, ey = 1e-4 * sy;
    const double fpx = f(x + ex, y), fmx = f(x - ex, y), fpy = f(x, y + ey), fmy = f(x, y - ey);
    const double gx = (fpx - fmx) / (2 * ex), gy = (fpy - fmy) / (2 * ey);
    hxx = (fpx - 2 * fx + fmx) / (ex * ex);
    hyy = (fpy - 2 * fx + fmy) / (ey * ey);
    hxy = (f(x + ex, y + ey) - f(x + ex, y - ey) - f(x - ex, y + ey) + f(x - ex, y - ey)) / (4 * ex * ey);
    const double det = hxx * hyy - hxy * hxy;
    nd = hxx < 0 && det > 0 && std::isfinite(det);
    double dx, dy;
    if (nd) {
      dx = -(hyy * gx - hxy * gy) / det;
      dy = -(-hxy * gx + hxx * gy) / det;
    } else {
      dx = 0.1 * sx * sx * gx;
      dy = 0.1 * sy * sy * gy;
    }
    double t = 1.0, fnew = f(x + dx, y + dy);
    while (!(fnew >= fx) && t > 1e-6) {
      t *= 0.5;
      fnew = f(x + t * dx, y + t * dy);
    }
    if (!(fnew >= fx)) break;
    x += t * dx;
    y += t * dy;
    const bool small = std::abs(t * dx) < 1e-10 * sx && std::abs(t * dy) < 1e-10 * sy;
    fx = fnew;
    if (small) break;
  }
  Mode2 m{x, y, sx * sx, 0.0, sy * sy, false};
  if (nd) {
    const double det = hxx * hyy - hxy * hxy;
    m.vxx = -hyy / det;
    m.vyy = -hxx / det;
    m.vxy = hxy / det;
    m.laplace_ok = m.vxx > 0 && m.vyy > 0;
    if (!m.laplace_ok) {
      m.vxx = sx * sx;
      m.vyy = sy * sy;
      m.vxy = 0.0;
    }
  }
  return m;
}

}  // namespace

Density2D Density2D::around(LogDensity log_density, double center_x, double center_y, double scale_x, double scale_y,
                            const QuadratureConfig& config) {
  config.validate();
  if (!(scale_x > 0 && scale_y > 0)) throw InvalidInput("2-D quadrature scales must be positive");
  const Mode2 m = find_mode(log_density, center_x, center_y, scale_x, scale_y, config.range_sd);
  Density2D d;
  d.mode_x_ = m.x;
  d.mode_y_ = m.y;
  d.sd_y_ = std::sqrt(m.vyy);
  d.slope_ = m.vxy / m.vyy;
  d.sd_x_ = std::sqrt(std::max(m.vxx - m.vxy * m.vxy / m.vyy, 1e-12 * m.vxx));
  double range = config.range_sd;
  int nodes = config.grid_nodes;
  for (int attempt = 0;; ++attempt) {
    if (d.build(log_density, range, nodes, config.boundary_fraction) && d.boundary_mass_ <= config.boundary_mass)
      return d;
    if (attempt >= config.max_widen) throw WidenRangeError("posterior mass reaches the 2-D grid boundary");
    range *= config.widen_factor;
    nodes = static_cast<int>(std::ceil(nodes * config.widen_factor));
  }
}

bool Density2D::build(const LogDensity& f, double range, int nodes, double boundary_fraction) {
  n_ = nodes;
  range_ = range;
  const double du = 2.0 * range / (n_ - 1);
  hy_ = du * sd_y_;
  hx_ = du * sd_x_;
  y_.assign(n_, 0.0);
  x0_.assign(n_, 0.0);
  std::vector<double> logf(static_cast<std::size_t>(n_) * n_);
  log_peak_ = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_; ++i) {
    y_[i] = mode_y_ + sd_y_ * (-range + du * i);
    x0_[i] = mode_x_ + slope_ * (y_[i] - mode_y_) - range * sd_x_;
    for (int j = 0; j < n_; ++j) {
      const double v = f(x0_[i] + hx_ * j, y_[i]);
      if (std::isnan(v)) throw InvalidInput("log density returned NaN");
      logf[static_cast<std::size_t>(i) * n_ + j] = v;
      log_peak_ = std::max(log_peak_, v);
    }
  }
  if (!std::isfinite(log_peak_)) return false;

  dens_.resize(logf.size());
  cum_.resize(logf.size());
  column_mass_.assign(n_, 0.0);
  total_ = 0.0;
  double edge = 0.0;
  const int band = std::max(1, static_cast<int>(std::ceil(boundary_fraction * (n_ - 1) / 2.0)));
  for (int i = 0; i < n_; ++i) {
    double* dens = &dens_[static_cast<std::size_t>(i) * n_];
    double* cum = &cum_[static_cast<std::size_t>(i) * n_];
    for (int j = 0; j < n_; ++j) dens[j] = safe_exp(logf[static_cast<std::size_t>(i) * n_ + j], log_peak_);
    auto deriv = [&](int j) {
      if (j == 0) return (dens[1] - dens[0]) / hx_;
      if (j == n_ - 1) return (dens[n_ - 1] - dens[n_ - 2]) / hx_;
      return (dens[j + 1] - dens[j - 1]) / (2 * hx_);
    };
    const double d0 = deriv(0);
    double acc = 0.0;
    cum[0] = 0.0;
    for (int j = 1; j < n_; ++j) {
      acc += 0.5 * hx_ * (dens[j - 1] + dens[j]);
      cum[j] = acc - hx_ * hx_ / 12.0 * (deriv(j) - d0);
    }
    column_mass_[i] = cum[n_ - 1];
    const double wy = (i == 0 || i == n_ - 1) ? 0.5 : 1.0;
    total_ += wy * hy_ * column_mass_[i];
    for (int j = 0; j < n_; ++j) {
      const bool outer = i < band || i >= n_ - band || j < band || j >= n_ - band;
      if (outer) edge += wy * hy_ * hx_ * dens[j];
    }
  }
  if (!(total_ > 0.0)) return false;
  boundary_mass_ = edge / total_;
  log_normalizer_ = std::log(total_) + log_peak_;
  return true;
}

double Density2D::column_cdf(std::size_t i, double x) const {
  const double pos = (x - x0_[i]) / hx_;
  const double* cum = &cum_[i * n_];
  if (pos <= 0.0) return 0.0;
  if (pos >= n_ - 1) return cum[n_ - 1];
  const int k = static_cast<int>(pos);
  const double t = pos - k;
  const double* dens = &dens_[i * n_];
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * cum[k] + (t3 - 2 * t2 + t) * hx_ * dens[k] + (-2 * t3 + 3 * t2) * cum[k + 1] +
         (t3 - t2) * hx_ * dens[k + 1];
}

double Density2D::expect(const std::function<double(double, double)>& g) const {
  double acc = 0.0;
  for (int i = 0; i < n_; ++i) {
    const double wy = (i == 0 || i == n_ - 1) ? 0.5 : 1.0;
    for (int j = 0; j < n_; ++j) {
      const double wx = (j == 0 || j == n_ - 1) ? 0.5 : 1.0;
      const double w = dens_[static_cast<std::size_t>(i) * n_ + j];
      if (w == 0.0) continue;
      acc += wy * wx * w * g(x0_[i] + hx_ * j, y_[i]);
    }
  }
  return acc * hx_ * hy_ / total_;
}

double Density2D::cdf_shifted(double t, const std::function<double(double)>& shift) const {
  double acc = 0.0;
  for (int i = 0; i < n_; ++i) {
    if (column_mass_[i] == 0.0) continue;
    const double wy = (i == 0 || i == n_ - 1) ? 0.5 : 1.0;
    acc += wy * column_cdf(static_cast<std::size_t>(i), t - shift(y_[i]));
  }
  return std::clamp(acc * hy_ / total_, 0.0, 1.0);
}

double Density2D::quantile_shifted(double p, const std::function<double(double)>& shift) const {
  if (!(p > 0.0 && p < 1.0)) throw InvalidInput("quantile level must be in (0, 1)");
  std::vector<double> shifts(n_);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int i = 0; i < n_; ++i) {
    shifts[i] = shift(y_[i]);
    lo = std::min(lo, x0_[i] + shifts[i]);
    hi = std::max(hi, x0_[i] + hx_ * (n_ - 1) + shifts[i]);
  }
  auto cdf = [&](double t) {
    double acc = 0.0;
    for (int i = 0; i < n_; ++i) {
      const double wy = (i == 0 || i == n_ - 1) ? 0.5 : 1.0;
      acc += wy * column_cdf(static_cast<std::size_t>(i), t - shifts[i]);
    }
    return acc * hy_ / total_;
  };
  for (int it = 0; it < 200 && hi - lo > 1e-12 * (1.0 + std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (cdf(mid) < p) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<std::pair<double, double>> Density2D::sample(std::size_t n, Rng& rng) const {
  std::vector<double> cw(n_);
  double acc = 0.0;
  for (int i = 0; i < n_; ++i) {
    const double wy = (i == 0 || i == n_ - 1) ? 0.5 : 1.0;
    acc += wy * column_mass_[i];
    cw[i] = acc;
  }
  std::vector<std::pair<double, double>> out;
  out.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double u = rng.uniform() * acc;
    const auto i = static_cast<std::size_t>(std::upper_bound(cw.begin(), cw.end(), u) - cw.begin());
    const std::size_t col = std::min<std::size_t>(i, n_ - 1);
    const double target = rng.uniform() * column_mass_[col];
    double lo = x0_[col], hi = x0_[col] + hx_ * (n_ - 1);
    for (int it = 0; it < 100 && hi - lo > 1e-12 * (1.0 + std::abs(lo)); ++it) {
      const double mid = 0.5 * (lo + hi);
      if (column_cdf(col, mid) < target) lo = mid;
      else hi = mid;
    }
    out.emplace_back(0.5 * (lo + hi), y_[col]);
  }
  return out;
}

}  // namespace titepk::inference
