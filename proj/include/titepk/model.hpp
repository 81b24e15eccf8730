#pragma once

// TITE-PK: time to first DLT follows a non-homogeneous Poisson process with
// hazard h(t) = beta * E(t), where E is the normalised effect-compartment
// concentration. The single parameter log(beta) gets a normal prior whose
// mean is cloglog of the prior median DLT probability at the reference.

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "titepk/mcmc.hpp"
#include "titepk/pk.hpp"
#include "titepk/quadrature.hpp"

namespace titepk::model {

inline double cloglog(double p) { return std::log(-std::log1p(-p)); }
inline double inv_cloglog(double x) { return -std::expm1(-std::exp(x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }
inline double inv_logit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct PatientOutcome {
  pk::DosingRegimen regimen;
  double time = pk::kDefaultCycleLength;  // hours; event time if dlt, else censoring time
  bool dlt = false;
  std::string id;
};

// Builds a censored-at-cycle-end or DLT-at-time record.
PatientOutcome censored(const pk::DosingRegimen& regimen, std::string id = {});
PatientOutcome dlt_at(const pk::DosingRegimen& regimen, double time, std::string id = {});

// Classification boundaries: UD below `under`, OD above `over`.
struct IntervalBounds {
  double under = 0.20;
  double over = 0.40;
};

struct TitePkPrior {
  double median_p = 0.30;
  double sd = 1.25;

  double mean_log_beta() const { return cloglog(median_p); }
  void validate() const;
};

struct DoseSummary {
  std::string label;
  double dose = 0.0;
  double interval = 0.0;
  double median = 0.0;
  double q025 = 0.0, q25 = 0.0, q75 = 0.0, q975 = 0.0;
  double p_ud = 0.0, p_tt = 0.0, p_od = 0.0;
};

struct PosteriorSummary {
  std::vector<DoseSummary> doses;
  std::string engine;  // "quadrature" or "mcmc"
  double max_rhat = std::numeric_limits<double>::quiet_NaN();
  bool flagged = false;  // sampler failed the R-hat check
};

// Sufficient statistics of cycle-1 data for the likelihood in log(beta).
struct ExposureStats {
  int dlt_count = 0;
  double sum_log_exposure = 0.0;  // over DLT records, log E(time)
  double total_auc = 0.0;         // over all records, AUC_E(time)
};

struct PosteriorSamples {
  std::vector<double> log_beta;  // pooled across chains
  int chains = 0;
  int iterations = 0;
  inference::McmcDiagnostics diagnostics;
  bool flagged = false;
};

// Log-likelihood for explicit PK and reference, as a free function.
double log_likelihood(double log_beta, std::span<const PatientOutcome> data, const pk::PKParams& pk,
                      const pk::ReferenceScale& ref);
// 1 - exp(-beta * AUC_E(t*)) for the regimen.
double dlt_probability(double log_beta, const pk::DosingRegimen& regimen, const pk::PKParams& pk,
                       const pk::ReferenceScale& ref);

class TitePkModel {
 public:
  TitePkModel(pk::PKParams pk, pk::DosingRegimen reference, TitePkPrior prior = {});

  const pk::PKParams& pk() const { return pk_; }
  const pk::ReferenceScale& reference() const { return ref_; }
  const TitePkPrior& prior() const { return prior_; }

  // Validates records and truncates anything beyond cycle 1 to a censoring
  // at t*, with a warning on stderr.
  std::vector<PatientOutcome> ingest(std::vector<PatientOutcome> data) const;

  ExposureStats statistics(std::span<const PatientOutcome> data) const;
  double log_likelihood(double log_beta, std::span<const PatientOutcome> data) const;
  double log_likelihood(double log_beta, const ExposureStats& stats) const;
  double log_likelihood_gradient(double log_beta, const ExposureStats& stats) const;
  double log_prior(double log_beta) const;

  double cycle_exposure(const pk::DosingRegimen& regimen) const;
  double dlt_probability(double log_beta, const pk::DosingRegimen& regimen) const;

  // Posterior of log(beta) by adaptive quadrature on prior mean +/- range_sd * sd.
  inference::Density1D quadrature_posterior(std::span<const PatientOutcome> data,
                                            const inference::QuadratureConfig& config = {}) const;
  PosteriorSamples fit_posterior(std::span<const PatientOutcome> data, const inference::MCMCConfig& config) const;

  PosteriorSummary summarize(const inference::Density1D& posterior, std::span<const pk::DosingRegimen> regimens,
                             IntervalBounds bounds = {}) const;
  PosteriorSummary summarize(const PosteriorSamples& samples, std::span<const pk::DosingRegimen> regimens,
                             IntervalBounds bounds = {}) const;

  // P(p(regimen) > threshold) under the quadrature posterior.
  double prob_above(const inference::Density1D& posterior, const pk::DosingRegimen& regimen, double threshold) const;

 private:
  pk::PKParams pk_;
  pk::ReferenceScale ref_;
  TitePkPrior prior_;
};

}  // namespace titepk::model
