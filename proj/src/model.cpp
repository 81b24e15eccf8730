#include "titepk/model.hpp"

#include <algorithm>
#include <iostream>
#include <numbers>

#include "titepk/errors.hpp"

namespace titepk::model {
namespace {

// Adds one record's contribution to the sufficient statistics.
void accumulate(ExposureStats& stats, const PatientOutcome& p, const pk::PKParams& pk, const pk::ReferenceScale& ref) {
  stats.total_auc += pk::auc_exposure(p.regimen, pk, ref, p.time);
  if (p.dlt) {
    const double e = pk::exposure(p.regimen, pk, ref, p.time);
    if (!(e > 0.0)) throw DataError("DLT recorded at a time with zero exposure");
    stats.sum_log_exposure += std::log(e);
    ++stats.dlt_count;
  }
}

double loglik_from_stats(double log_beta, const ExposureStats& s) {
  double ll = -std::exp(log_beta) * s.total_auc;
  if (s.dlt_count > 0) ll += s.dlt_count * log_beta + s.sum_log_exposure;
  return ll;
}

// Fills quantiles and interval masses for a monotone map log(beta) -> p.
template <typename Cdf, typename Quantile>
DoseSummary summarize_one(const pk::DosingRegimen& r, double log_auc, IntervalBounds bounds, Cdf&& cdf,
                          Quantile&& quantile) {
  DoseSummary s;
  s.label = r.label;
  s.dose = r.dose;
  s.interval = r.interval;
  auto prob = [&](double lb) { return inv_cloglog(lb + log_auc); };
  s.median = prob(quantile(0.5));
  s.q025 = prob(quantile(0.025));
  s.q25 = prob(quantile(0.25));
  s.q75 = prob(quantile(0.75));
  s.q975 = prob(quantile(0.975));
  s.p_ud = cdf(cloglog(bounds.under) - log_auc);
  s.p_od = 1.0 - cdf(cloglog(bounds.over) - log_auc);
  s.p_tt = 1.0 - s.p_ud - s.p_od;
  return s;
}

}  // namespace

PatientOutcome censored(const pk::DosingRegimen& regimen, std::string id) {
  return PatientOutcome{regimen, regimen.cycle_length, false, std::move(id)};
}

PatientOutcome dlt_at(const pk::DosingRegimen& regimen, double time, std::string id) {
  return PatientOutcome{regimen, time, true, std::move(id)};
}

void TitePkPrior::validate() const {
  if (!(median_p > 0.0 && median_p < 1.0)) throw InvalidInput("prior median must be in (0, 1)");
  if (!(sd > 0.0) || !std::isfinite(sd)) throw InvalidInput("prior sd must be positive");
}

double log_likelihood(double log_beta, std::span<const PatientOutcome> data, const pk::PKParams& pk,
                      const pk::ReferenceScale& ref) {
  ExposureStats s;
  for (const auto& p : data) accumulate(s, p, pk, ref);
  return loglik_from_stats(log_beta, s);
}

double dlt_probability(double log_beta, const pk::DosingRegimen& regimen, const pk::PKParams& pk,
                       const pk::ReferenceScale& ref) {
  const double auc = pk::auc_exposure(regimen, pk, ref, regimen.cycle_length);
  return -std::expm1(-std::exp(log_beta) * auc);
}

TitePkModel::TitePkModel(pk::PKParams pk, pk::DosingRegimen reference, TitePkPrior prior)
    : pk_(pk), ref_(std::move(reference), pk), prior_(prior) {
  prior_.validate();
}

std::vector<PatientOutcome> TitePkModel::ingest(std::vector<PatientOutcome> data) const {
  for (auto& p : data) {
    p.regimen.validate();
    if (!std::isfinite(p.time) || p.time < 0.0) throw InvalidInput("patient time must be finite and non-negative");
    if (p.time == 0.0) {
      if (p.dlt) throw DataError("DLT recorded at time 0, where exposure is zero");
      throw InvalidInput("censoring time must be positive");
    }
    if (p.time > p.regimen.cycle_length) {
      std::cerr << "warning: record " << (p.id.empty() ? "?" : p.id) << " at t=" << p.time
                << " h is beyond cycle 1; truncated to censoring at " << p.regimen.cycle_length << " h\n";
      p.time = p.regimen.cycle_length;
      p.dlt = false;
    }
  }
  return data;
}

ExposureStats TitePkModel::statistics(std::span<const PatientOutcome> data) const {
  ExposureStats s;
  for (const auto& p : data) accumulate(s, p, pk_, ref_);
  return s;
}

double TitePkModel::log_likelihood(double log_beta, std::span<const PatientOutcome> data) const {
  return loglik_from_stats(log_beta, statistics(data));
}

double TitePkModel::log_likelihood(double log_beta, const ExposureStats& stats) const {
  return loglik_from_stats(log_beta, stats);
}

double TitePkModel::log_likelihood_gradient(double log_beta, const ExposureStats& stats) const {
  return stats.dlt_count - std::exp(log_beta) * stats.total_auc;
}

double TitePkModel::log_prior(double log_beta) const {
  const double z = (log_beta - prior_.mean_log_beta()) / prior_.sd;
  return -0.5 * z * z - std::log(prior_.sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

double TitePkModel::cycle_exposure(const pk::DosingRegimen& regimen) const {
  return pk::auc_exposure(regimen, pk_, ref_, regimen.cycle_length);
}

double TitePkModel::dlt_probability(double log_beta, const pk::DosingRegimen& regimen) const {
  return -std::expm1(-std::exp(log_beta) * cycle_exposure(regimen));
}

inference::Density1D TitePkModel::quadrature_posterior(std::span<const PatientOutcome> data,
                                                       const inference::QuadratureConfig& config) const {
  const ExposureStats s = statistics(data);
  return inference::Density1D::around([this, s](double lb) { return log_prior(lb) + loglik_from_stats(lb, s); },
                                      prior_.mean_log_beta(), prior_.sd, config);
}

PosteriorSamples TitePkModel::fit_posterior(std::span<const PatientOutcome> data,
                                            const inference::MCMCConfig& config) const {
  const ExposureStats s = statistics(data);
  const double init[1] = {prior_.mean_log_beta()};
  const double scale[1] = {prior_.sd};
  auto result = inference::sample(
      [this, s](std::span<const double> x) { return log_prior(x[0]) + loglik_from_stats(x[0], s); }, init, scale,
      config);
  PosteriorSamples out;
  out.log_beta = result.pooled(0);
  out.chains = result.chains();
  out.iterations = result.iterations();
  out.diagnostics = result.diagnostics;
  out.flagged = result.diagnostics.fail;
  return out;
}

PosteriorSummary TitePkModel::summarize(const inference::Density1D& posterior,
                                        std::span<const pk::DosingRegimen> regimens, IntervalBounds bounds) const {
  PosteriorSummary out;
  out.engine = "quadrature";
  for (const auto& r : regimens)
    out.doses.push_back(summarize_one(
        r, std::log(cycle_exposure(r)), bounds, [&](double x) { return posterior.cdf(x); },
        [&](double p) { return posterior.quantile(p); }));
  return out;
}

PosteriorSummary TitePkModel::summarize(const PosteriorSamples& samples, std::span<const pk::DosingRegimen> regimens,
                                        IntervalBounds bounds) const {
  if (samples.log_beta.empty()) throw InvalidInput("no posterior draws to summarise");
  std::vector<double> sorted = samples.log_beta;
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  // P(lb <= x) for the OD mass and P(lb < x) for the UD mass.
  auto cdf_od = [&](double x) {
    return static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), x) - sorted.begin()) / n;
  };
  auto cdf_ud = [&](double x) {
    return static_cast<double>(std::lower_bound(sorted.begin(), sorted.end(), x) - sorted.begin()) / n;
  };
  auto quantile = [&](double p) {
    const double h = (n - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - lo) * (sorted[hi] - sorted[lo]);
  };
  PosteriorSummary out;
  out.engine = "mcmc";
  out.max_rhat = samples.diagnostics.max_rhat;
  out.flagged = samples.flagged;
  for (const auto& r : regimens) {
    const double log_auc = std::log(cycle_exposure(r));
    DoseSummary s = summarize_one(r, log_auc, bounds, cdf_od, quantile);
    s.p_ud = cdf_ud(cloglog(bounds.under) - log_auc);
    s.p_tt = 1.0 - s.p_ud - s.p_od;
    out.doses.push_back(s);
  }
  return out;
}

double TitePkModel::prob_above(const inference::Density1D& posterior, const pk::DosingRegimen& regimen,
                               double threshold) const {
  return 1.0 - posterior.cdf(cloglog(threshold) - std::log(cycle_exposure(regimen)));
}

}  // namespace titepk::model
