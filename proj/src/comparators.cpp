#include "titepk/comparators.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>

#include "titepk/errors.hpp"

namespace titepk::comparators {
namespace {

constexpr double kDoseTol = 1e-9;

bool same_dose(double a, double b) { return std::abs(a - b) <= kDoseTol * std::max(1.0, std::abs(b)); }

// log(p) and log(1 - p) for p = exp(x), x <= 0.
inline double log1m_exp(double x) { return x > -std::numbers::ln2 ? std::log(-std::expm1(x)) : std::log1p(-std::exp(x)); }

// Binomial log-likelihood of a logistic linear predictor.
inline double logistic_ll(int n, int y, double eta) {
  // log expit(eta) = -log1p(exp(-eta))
  auto log_expit = [](double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); };
  double ll = 0.0;
  if (y > 0) ll += y * log_expit(eta);
  if (n - y > 0) ll += (n - y) * log_expit(-eta);
  return ll;
}

double sample_quantile(std::vector<double> v, double p) { return inference::empirical_quantile(std::move(v), p); }

}  // namespace

// ---------------------------------------------------------------------------

std::vector<double> Skeleton::rounded(int digits) const {
  const double f = std::pow(10.0, digits);
  std::vector<double> out;
  out.reserve(probs.size());
  for (double p : probs) out.push_back(std::round(p * f) / f);
  return out;
}

Skeleton lee_cheung_skeleton(int levels, double target, double halfwidth, int nu) {
  if (levels < 1) throw InvalidInput("skeleton needs at least one dose level");
  if (nu < 1 || nu > levels) throw InvalidInput("prior MTD position must lie in 1..K");
  if (!(target > 0.0 && target < 1.0)) throw InvalidInput("target must be in (0, 1)");
  if (!(halfwidth > 0.0)) throw InvalidInput("indifference half-width must be positive");
  if (!(target - halfwidth > 0.0 && target + halfwidth < 1.0))
    throw CalibrationError("target +/- half-width leaves (0, 1)");

  const double lo = std::log(target - halfwidth);
  const double hi = std::log(target + halfwidth);
  Skeleton s;
  s.target = target;
  s.halfwidth = halfwidth;
  s.nu = nu;
  s.probs.assign(levels, 0.0);
  s.probs[nu - 1] = target;
  for (int k = nu - 1; k > 0; --k) s.probs[k - 1] = std::exp(lo * std::log(s.probs[k]) / hi);
  for (int k = nu - 1; k < levels - 1; ++k) s.probs[k + 1] = std::exp(hi * std::log(s.probs[k]) / lo);
  for (std::size_t k = 0; k < s.probs.size(); ++k) {
    if (!(s.probs[k] > 0.0 && s.probs[k] < 1.0)) throw CalibrationError("skeleton left (0, 1)");
    if (k > 0 && !(s.probs[k] > s.probs[k - 1])) throw CalibrationError("skeleton is not strictly increasing");
  }
  return s;
}

BinaryDoseData aggregate(std::span<const model::PatientOutcome> data) {
  BinaryDoseData out;
  for (const auto& p : data) {
    auto it = std::find_if(out.begin(), out.end(), [&](const DoseCount& c) {
      return c.schedule == p.regimen.label && same_dose(c.dose, p.regimen.dose);
    });
    if (it == out.end()) {
      out.push_back(DoseCount{p.regimen.dose, p.regimen.label, 0, 0});
      it = out.end() - 1;
    }
    ++it->treated;
    if (p.dlt) ++it->dlts;
  }
  return out;
}

void validate(const BinaryDoseData& data) {
  for (const auto& c : data) {
    if (!(c.dose > 0.0) || !std::isfinite(c.dose)) throw InvalidInput("dose must be positive");
    if (c.treated < 0 || c.dlts < 0 || c.dlts > c.treated)
      throw InvalidInput("counts must satisfy 0 <= DLTs <= treated");
  }
}

// ---------------------------------------------------------------------------
// CRM

std::vector<double> CrmConfig::working_skeleton() const {
  const double power = scaling == CrmScaling::prior_mean ? std::exp(-0.5 * prior_sd * prior_sd) : 1.0;
  std::vector<double> w;
  w.reserve(skeleton.probs.size());
  for (double p : skeleton.probs) w.push_back(std::pow(p, power));
  return w;
}

std::size_t CrmConfig::index_of(double dose) const {
  for (std::size_t i = 0; i < doses.size(); ++i)
    if (same_dose(doses[i], dose)) return i;
  throw ConfigurationError("dose " + std::to_string(dose) + " is not on the CRM panel");
}

static void check(const CrmConfig& c) {
  if (c.skeleton.probs.empty()) throw ConfigurationError("empty skeleton");
  if (c.doses.size() != c.skeleton.probs.size()) throw ConfigurationError("dose panel and skeleton differ in length");
  if (!(c.prior_sd > 0.0)) throw InvalidInput("CRM prior sd must be positive");
}

namespace {

struct CrmTerm {
  double log_w;
  int dlts, tolerated;
};

std::vector<CrmTerm> crm_terms(const CrmConfig& config, const BinaryDoseData& data) {
  const auto w = config.working_skeleton();
  std::vector<CrmTerm> terms;
  for (const auto& c : data) terms.push_back({std::log(w[config.index_of(c.dose)]), c.dlts, c.treated - c.dlts});
  return terms;
}

double crm_log_density(const std::vector<CrmTerm>& terms, double mean, double sd, double alpha) {
  const double z = (alpha - mean) / sd;
  double lp = -0.5 * z * z;
  const double ea = std::exp(alpha);
  for (const auto& t : terms) {
    const double log_pi = ea * t.log_w;
    if (t.dlts > 0) lp += t.dlts * log_pi;
    if (t.tolerated > 0) lp += t.tolerated * log1m_exp(log_pi);
  }
  return lp;
}

}  // namespace

double crm_log_posterior(const CrmConfig& config, const BinaryDoseData& data, double alpha) {
  return crm_log_density(crm_terms(config, data), config.prior_mean, config.prior_sd, alpha);
}

CrmPosterior::CrmPosterior(inference::Density1D alpha, std::vector<double> working, std::vector<double> doses)
    : alpha_(std::move(alpha)), working_(std::move(working)), doses_(std::move(doses)) {}

// pi_i = w_i^exp(alpha) decreases in alpha.
double CrmPosterior::quantile(std::size_t i, double p) const {
  return std::pow(working_.at(i), std::exp(alpha_.quantile(1.0 - p)));
}

double CrmPosterior::median(std::size_t i) const { return quantile(i, 0.5); }

std::vector<double> CrmPosterior::medians() const {
  const double scale = std::exp(alpha_.quantile(0.5));
  std::vector<double> m;
  for (double w : working_) m.push_back(std::pow(w, scale));
  return m;
}

// pi_i > t  <=>  alpha < log(log t / log w_i)
double CrmPosterior::prob_above(std::size_t i, double threshold) const {
  return alpha_.cdf(std::log(std::log(threshold) / std::log(working_.at(i))));
}

double CrmPosterior::prob_below(std::size_t i, double threshold) const {
  return 1.0 - alpha_.cdf(std::log(std::log(threshold) / std::log(working_.at(i))));
}

model::PosteriorSummary CrmPosterior::summary(const std::string& label, double interval,
                                              model::IntervalBounds bounds) const {
  model::PosteriorSummary out;
  out.engine = "quadrature";
  const double probs[5] = {0.5, 0.025, 0.25, 0.75, 0.975};
  double scale[5];
  for (int k = 0; k < 5; ++k) scale[k] = std::exp(alpha_.quantile(1.0 - probs[k]));
  for (std::size_t i = 0; i < working_.size(); ++i) {
    model::DoseSummary s;
    s.label = label;
    s.dose = doses_[i];
    s.interval = interval;
    s.median = std::pow(working_[i], scale[0]);
    s.q025 = std::pow(working_[i], scale[1]);
    s.q25 = std::pow(working_[i], scale[2]);
    s.q75 = std::pow(working_[i], scale[3]);
    s.q975 = std::pow(working_[i], scale[4]);
    s.p_ud = prob_below(i, bounds.under);
    s.p_od = prob_above(i, bounds.over);
    s.p_tt = 1.0 - s.p_ud - s.p_od;
    out.doses.push_back(s);
  }
  return out;
}

CrmPosterior crm_fit(const CrmConfig& config, const BinaryDoseData& data, const inference::QuadratureConfig& quad) {
  check(config);
  validate(data);
  auto density = inference::Density1D::around(
      [terms = crm_terms(config, data), mean = config.prior_mean, sd = config.prior_sd](double a) {
        return crm_log_density(terms, mean, sd, a);
      },
      config.prior_mean, config.prior_sd, quad);
  return CrmPosterior(std::move(density), config.working_skeleton(), config.doses);
}

std::size_t crm_recommend(std::span<const double> medians, double target, std::optional<std::size_t> current) {
  if (medians.empty()) throw ConfigurationError("no doses to recommend from");
  std::size_t best = 0;
  double best_gap = std::abs(medians[0] - target);
  for (std::size_t i = 1; i < medians.size(); ++i) {
    const double gap = std::abs(medians[i] - target);
    if (gap < best_gap - 1e-12) {
      best = i;
      best_gap = gap;
    }
  }
  if (current && best > *current + 1) best = *current + 1;
  return best;
}

bool crm_safety_stop(double prob_lowest_above, double confidence) { return prob_lowest_above > confidence; }

CrmPosterior bcrm_lite_fit(const CrmConfig& completed, const BinaryDoseData& completed_data, const CrmConfig& current,
                           const BinaryDoseData& current_data, const inference::QuadratureConfig& quad) {
  const auto first = crm_fit(completed, completed_data, quad);
  CrmConfig bridged = current;
  bridged.prior_mean = first.alpha().quantile(0.5);
  return crm_fit(bridged, current_data, quad);
}

// ---------------------------------------------------------------------------
// BLRM

void BlrmPrior::validate() const {
  if (!(s1 > 0.0 && s2 > 0.0)) throw InvalidInput("BLRM prior sds must be positive");
  if (!(std::abs(rho) < 1.0)) throw InvalidInput("BLRM prior correlation must be in (-1, 1)");
  if (!(ref_dose > 0.0)) throw InvalidInput("BLRM reference dose must be positive");
  if (!std::isfinite(m1) || !std::isfinite(m2)) throw InvalidInput("BLRM prior means must be finite");
}

double BlrmPrior::log_density(double a, double b) const {
  const double z1 = (a - m1) / s1;
  const double z2 = (b - m2) / s2;
  const double q = (z1 * z1 - 2.0 * rho * z1 * z2 + z2 * z2) / (1.0 - rho * rho);
  return -0.5 * q - std::log(2.0 * std::numbers::pi * s1 * s2 * std::sqrt(1.0 - rho * rho));
}

double blrm_log_likelihood(const BinaryDoseData& data, double ref_dose, double a, double b) {
  const double slope = std::exp(b);
  double ll = 0.0;
  for (const auto& c : data) ll += logistic_ll(c.treated, c.dlts, a + slope * std::log(c.dose / ref_dose));
  return ll;
}

BlrmPosterior::BlrmPosterior(inference::Density2D grid, double ref_dose)
    : grid_(std::move(grid)), ref_dose_(ref_dose) {}

BlrmPosterior::BlrmPosterior(std::vector<std::pair<double, double>> draws, double ref_dose,
                             inference::McmcDiagnostics diag)
    : draws_(std::move(draws)), diag_(std::move(diag)), ref_dose_(ref_dose) {
  if (draws_.empty()) throw InvalidInput("no posterior draws");
}

// logit pi(d) = a + exp(b) log(d/d*), so pi(d) <= p  <=>  a + shift(b) <= logit p.
double BlrmPosterior::shift(double dose, double b) const { return std::exp(b) * std::log(dose / ref_dose_); }

double BlrmPosterior::prob_below(double dose, double threshold) const {
  const double t = model::logit(threshold);
  if (grid_) return grid_->cdf_shifted(t, [&](double b) { return shift(dose, b); });
  std::size_t k = 0;
  for (const auto& [a, b] : draws_)
    if (a + shift(dose, b) < t) ++k;
  return static_cast<double>(k) / draws_.size();
}

double BlrmPosterior::prob_above(double dose, double threshold) const {
  const double t = model::logit(threshold);
  if (grid_) return 1.0 - grid_->cdf_shifted(t, [&](double b) { return shift(dose, b); });
  std::size_t k = 0;
  for (const auto& [a, b] : draws_)
    if (a + shift(dose, b) > t) ++k;
  return static_cast<double>(k) / draws_.size();
}

double BlrmPosterior::quantile(double dose, double p) const {
  if (grid_) return model::inv_logit(grid_->quantile_shifted(p, [&](double b) { return shift(dose, b); }));
  std::vector<double> eta;
  eta.reserve(draws_.size());
  for (const auto& [a, b] : draws_) eta.push_back(a + shift(dose, b));
  return model::inv_logit(sample_quantile(std::move(eta), p));
}

std::vector<double> BlrmPosterior::sample_probability(double dose, std::size_t n, std::uint64_t seed) const {
  Rng rng(seed, {0});
  std::vector<double> out;
  out.reserve(n);
  if (grid_) {
    for (const auto& [a, b] : grid_->sample(n, rng)) out.push_back(model::inv_logit(a + shift(dose, b)));
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const auto& [a, b] = draws_[static_cast<std::size_t>(rng.uniform() * draws_.size())];
      out.push_back(model::inv_logit(a + shift(dose, b)));
    }
  }
  return out;
}

model::PosteriorSummary BlrmPosterior::summary(std::span<const double> doses, const std::string& label,
                                               double interval, model::IntervalBounds bounds) const {
  model::PosteriorSummary out;
  out.engine = grid_ ? "quadrature" : "mcmc";
  if (diag_) {
    out.max_rhat = diag_->max_rhat;
    out.flagged = diag_->fail;
  }
  for (double d : doses) {
    model::DoseSummary s;
    s.label = label;
    s.dose = d;
    s.interval = interval;
    s.median = quantile(d, 0.5);
    s.q025 = quantile(d, 0.025);
    s.q25 = quantile(d, 0.25);
    s.q75 = quantile(d, 0.75);
    s.q975 = quantile(d, 0.975);
    s.p_ud = prob_below(d, bounds.under);
    s.p_od = prob_above(d, bounds.over);
    s.p_tt = 1.0 - s.p_ud - s.p_od;
    out.doses.push_back(s);
  }
  return out;
}

BlrmPosterior blrm_fit(const BinaryDoseData& data, const BlrmPrior& prior, Engine engine,
                       const inference::QuadratureConfig& quad, const inference::MCMCConfig& mcmc) {
  prior.validate();
  validate(data);
  auto lp = [data, prior](double a, double b) {
    return prior.log_density(a, b) + blrm_log_likelihood(data, prior.ref_dose, a, b);
  };
  if (engine == Engine::quadrature)
    return BlrmPosterior(inference::Density2D::around(lp, prior.m1, prior.m2, prior.s1, prior.s2, quad),
                         prior.ref_dose);
  const double init[2] = {prior.m1, prior.m2};
  const double scale[2] = {prior.s1 * 0.5, prior.s2 * 0.5};
  auto res = inference::sample([&](std::span<const double> x) { return lp(x[0], x[1]); }, init, scale, mcmc);
  std::vector<std::pair<double, double>> draws;
  draws.reserve(res.size());
  for (int c = 0; c < res.chains(); ++c)
    for (int i = 0; i < res.iterations(); ++i) draws.emplace_back(res.at(c, i, 0), res.at(c, i, 1));
  return BlrmPosterior(std::move(draws), prior.ref_dose, res.diagnostics);
}

// ---------------------------------------------------------------------------
// BLRM-MAP

void Heterogeneity::validate() const {
  if (fixed_tau) {
    if (!((*fixed_tau)[0] >= 0.0 && (*fixed_tau)[1] >= 0.0)) throw InvalidInput("tau must be non-negative");
  } else if (!(tau_scale_a > 0.0 && tau_scale_b > 0.0)) {
    throw InvalidInput("heterogeneity scales must be positive");
  }
}

BlrmPosterior blrm_map_fit(std::span<const Stratum> historical, const Stratum& current, const BlrmPrior& prior,
                           const Heterogeneity& hyper, const inference::MCMCConfig& mcmc) {
  prior.validate();
  hyper.validate();
  bool has_history = false;
  for (const auto& h : historical) {
    validate(h.data);
    if (!(h.ref_dose > 0.0)) throw InvalidInput("reference doses must be positive");
    for (const auto& c : h.data) has_history |= c.treated > 0;
  }
  validate(current.data);
  if (!(current.ref_dose > 0.0)) throw InvalidInput("reference doses must be positive");

  if (!has_history) {
    std::cerr << "warning: no historical patients; fitting the current stratum alone\n";
    BlrmPrior p = prior;
    p.ref_dose = current.ref_dose;
    return blrm_fit(current.data, p, Engine::mcmc, {}, mcmc);
  }

  // With mu integrated out, the stratum parameters are jointly normal given
  // tau: Cov(theta_jk, theta_j'k') = Sigma_kk' + [j == j'][k == k'] tau_k^2.
  // A free tau is sampled on the real line with a N(0, scale^2) prior; the
  // density depends on tau^2 only, so |tau| is half-normal.
  // x = (a_1, b_1, ..., a_J, b_J, a_current, b_current[, tau_a, tau_b]).
  std::vector<const Stratum*> strata;
  for (const auto& h : historical) strata.push_back(&h);
  strata.push_back(&current);
  const int n_strata = static_cast<int>(strata.size());
  const int n_theta = 2 * n_strata;
  const bool free_tau = !hyper.fixed_tau.has_value();
  const int dim = n_theta + (free_tau ? 2 : 0);
  const std::array<double, 2> scales{hyper.tau_scale_a, hyper.tau_scale_b};
  const std::array<double, 2> fixed = hyper.fixed_tau.value_or(std::array<double, 2>{0.0, 0.0});
  const double sigma[2][2] = {{prior.s1 * prior.s1, prior.rho * prior.s1 * prior.s2},
                              {prior.rho * prior.s1 * prior.s2, prior.s2 * prior.s2}};
  const double means[2] = {prior.m1, prior.m2};

  std::vector<std::vector<double>> log_ratio(n_strata);
  for (int j = 0; j < n_strata; ++j)
    for (const auto& c : strata[j]->data) log_ratio[j].push_back(std::log(c.dose / strata[j]->ref_dose));

  auto tau_of = [=](std::span<const double> x, int k) { return free_tau ? x[n_theta + k] : fixed[k]; };
  auto log_density = [&](std::span<const double> x) {
    const double tau2[2] = {std::pow(tau_of(x, 0), 2), std::pow(tau_of(x, 1), 2)};
    // Gaussian log density of theta via Cholesky of the 2J x 2J covariance.
    std::vector<double> cov(static_cast<std::size_t>(n_theta) * n_theta), r(n_theta);
    for (int i = 0; i < n_theta; ++i) {
      r[i] = x[i] - means[i % 2];
      for (int k = 0; k < n_theta; ++k)
        cov[i * n_theta + k] = sigma[i % 2][k % 2] + (i == k ? tau2[i % 2] : 0.0);
    }
    double log_det = 0.0;
    for (int j = 0; j < n_theta; ++j) {
      double d = cov[j * n_theta + j];
      for (int k = 0; k < j; ++k) d -= cov[j * n_theta + k] * cov[j * n_theta + k];
      if (!(d > 0.0)) return -std::numeric_limits<double>::infinity();
      d = std::sqrt(d);
      cov[j * n_theta + j] = d;
      log_det += 2.0 * std::log(d);
      for (int i = j + 1; i < n_theta; ++i) {
        double t = cov[i * n_theta + j];
        for (int k = 0; k < j; ++k) t -= cov[i * n_theta + k] * cov[j * n_theta + k];
        cov[i * n_theta + j] = t / d;
      }
    }
    double quad = 0.0;
    for (int i = 0; i < n_theta; ++i) {
      double t = r[i];
      for (int k = 0; k < i; ++k) t -= cov[i * n_theta + k] * r[k];
      r[i] = t / cov[i * n_theta + i];
      quad += r[i] * r[i];
    }
    double lp = -0.5 * (quad + log_det);
    if (free_tau)
      for (int k = 0; k < 2; ++k) lp -= 0.5 * tau2[k] / (scales[k] * scales[k]);
    for (int j = 0; j < n_strata; ++j) {
      const double slope = std::exp(x[2 * j + 1]);
      const auto& data = strata[j]->data;
      for (std::size_t c = 0; c < data.size(); ++c)
        lp += logistic_ll(data[c].treated, data[c].dlts, x[2 * j] + slope * log_ratio[j][c]);
    }
    return lp;
  };

  std::vector<double> init(dim, 0.0), scale(dim, 1.0);
  for (int j = 0; j < n_strata; ++j) {
    init[2 * j] = prior.m1;
    init[2 * j + 1] = prior.m2;
    scale[2 * j] = 0.5 * prior.s1;
    scale[2 * j + 1] = 0.5 * prior.s2;
  }
  if (free_tau)
    for (int k = 0; k < 2; ++k) {
      init[n_theta + k] = 0.5 * scales[k];
      scale[n_theta + k] = 0.5 * scales[k];
    }
  auto res = inference::sample(log_density, init, scale, mcmc);

  // Diagnostics on identified quantities: every theta and |tau|.
  const int n_chains = res.chains(), n_iter = res.iterations();
  const int tracked_n = dim;
  std::vector<std::vector<std::vector<double>>> tracked(tracked_n, std::vector<std::vector<double>>(n_chains));
  std::vector<std::pair<double, double>> draws;
  draws.reserve(res.size());
  const int ca = n_theta - 2, cb = n_theta - 1;
  for (int c = 0; c < n_chains; ++c)
    for (int i = 0; i < n_iter; ++i) {
      draws.emplace_back(res.at(c, i, ca), res.at(c, i, cb));
      for (int d = 0; d < dim; ++d) {
        const double v = res.at(c, i, d);
        tracked[d][c].push_back(d >= n_theta ? std::abs(v) : v);
      }
    }
  inference::McmcDiagnostics diag = res.diagnostics;
  diag.rhat.clear();
  diag.max_rhat = 1.0;
  for (int d = 0; d < tracked_n; ++d) {
    const double r = inference::split_rhat(tracked[d]);
    diag.rhat.push_back(r);
    if (std::isfinite(r)) diag.max_rhat = std::max(diag.max_rhat, r);
  }
  diag.warn = diag.max_rhat >= inference::kRhatWarn;
  diag.fail = diag.max_rhat >= inference::kRhatFail;
  return BlrmPosterior(std::move(draws), current.ref_dose, std::move(diag));
}

BlrmPosterior blrm_map_fit(const Stratum& historical, const Stratum& current, const BlrmPrior& prior,
                           const Heterogeneity& hyper, const inference::MCMCConfig& mcmc) {
  return blrm_map_fit(std::span<const Stratum>(&historical, 1), current, prior, hyper, mcmc);
}

}  // namespace titepk::comparators
