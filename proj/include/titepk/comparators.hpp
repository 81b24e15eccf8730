#pragma once

// Dose-response comparators: the one-parameter power CRM, the two-parameter
// Bayesian logistic regression model (BLRM) and its meta-analytic
// extension that borrows from a completed stratum (BLRM-MAP), fitted jointly
// as a hierarchical model.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "titepk/mcmc.hpp"
#include "titepk/model.hpp"
#include "titepk/quadrature.hpp"

namespace titepk::comparators {

struct Skeleton {
  std::vector<double> probs;  // full precision
  double target = 0.30;
  double halfwidth = 0.10;
  int nu = 1;  // 1-based prior MTD position

  std::vector<double> rounded(int digits = 2) const;
};

// Indifference-interval calibration for the power model: the prior MTD
// sits at the target and each neighbour is placed so that the power-model
// estimates of adjacent doses meet at target +/- halfwidth.
Skeleton lee_cheung_skeleton(int levels, double target, double halfwidth, int nu);

struct DoseCount {
  double dose = 0.0;
  std::string schedule;
  int treated = 0;
  int dlts = 0;
};
using BinaryDoseData = std::vector<DoseCount>;

// Collapses patient records into per-(schedule, dose) counts, in order of
// first appearance.
BinaryDoseData aggregate(std::span<const model::PatientOutcome> data);
void validate(const BinaryDoseData& data);

// ---------------------------------------------------------------------------
// CRM

// How the skeleton enters the power model pi_i = w_i^exp(alpha).
enum class CrmScaling {
  skeleton,    // w_i = p_i, so the prior median of pi_i is p_i
  prior_mean,  // w_i = p_i^(1/E[exp(alpha)]), the standardised doses used by the bcrm R package
};

struct CrmConfig {
  Skeleton skeleton;
  std::vector<double> doses;  // panel, aligned with skeleton.probs
  double prior_sd = 2.0;      // alpha ~ N(0, prior_sd^2)
  CrmScaling scaling = CrmScaling::prior_mean;
  // Extra mean shift of the alpha prior (B-CRM-lite only).
  double prior_mean = 0.0;

  std::vector<double> working_skeleton() const;
  std::size_t index_of(double dose) const;
};

class CrmPosterior {
 public:
  CrmPosterior(inference::Density1D alpha, std::vector<double> working, std::vector<double> doses);

  std::size_t size() const { return working_.size(); }
  double median(std::size_t i) const;
  std::vector<double> medians() const;
  double quantile(std::size_t i, double p) const;
  double prob_above(std::size_t i, double threshold) const;
  double prob_below(std::size_t i, double threshold) const;
  const inference::Density1D& alpha() const { return alpha_; }
  model::PosteriorSummary summary(const std::string& label, double interval, model::IntervalBounds bounds = {}) const;

 private:
  inference::Density1D alpha_;
  std::vector<double> working_;
  std::vector<double> doses_;
};

CrmPosterior crm_fit(const CrmConfig& config, const BinaryDoseData& data, const inference::QuadratureConfig& quad = {});
// Log posterior of alpha up to a constant.
double crm_log_posterior(const CrmConfig& config, const BinaryDoseData& data, double alpha);

// argmin |median - target|, ties to the lower dose, never more than one
// level above `current` when given.
std::size_t crm_recommend(std::span<const double> medians, double target,
                          std::optional<std::size_t> current = std::nullopt);
// True when P(pi_1 > threshold) exceeds the confidence level.
bool crm_safety_stop(double prob_lowest_above, double confidence = 0.90);

// Non-conformant bridging stand-in: fits the power model to the completed
// stratum, then refits the current stratum with the alpha prior re-centred
// at the completed stratum's posterior median.
CrmPosterior bcrm_lite_fit(const CrmConfig& completed, const BinaryDoseData& completed_data, const CrmConfig& current,
                           const BinaryDoseData& current_data, const inference::QuadratureConfig& quad = {});

// ---------------------------------------------------------------------------
// BLRM: logit pi(d) = log(alpha1) + alpha2 * log(d / d_ref)

struct BlrmPrior {
  double m1 = model::logit(0.30);
  double m2 = 0.0;
  double s1 = 2.0;
  double s2 = 1.0;
  double rho = 0.0;
  double ref_dose = 7.5;

  void validate() const;
  double log_density(double log_alpha1, double log_alpha2) const;
};

enum class Engine { quadrature, mcmc };

// Posterior over (log alpha1, log alpha2) for one stratum, backed either by
// the 2-D grid or by draws.
class BlrmPosterior {
 public:
  BlrmPosterior(inference::Density2D grid, double ref_dose);
  BlrmPosterior(std::vector<std::pair<double, double>> draws, double ref_dose, inference::McmcDiagnostics diag);

  double ref_dose() const { return ref_dose_; }
  bool from_grid() const { return grid_.has_value(); }
  double prob_above(double dose, double threshold) const;
  double prob_below(double dose, double threshold) const;
  double quantile(double dose, double p) const;
  // Draws of pi(dose); from the grid these are exact inverse-CDF draws.
  std::vector<double> sample_probability(double dose, std::size_t n, std::uint64_t seed) const;
  model::PosteriorSummary summary(std::span<const double> doses, const std::string& label, double interval,
                                  model::IntervalBounds bounds = {}) const;
  const std::optional<inference::McmcDiagnostics>& diagnostics() const { return diag_; }
  const std::vector<std::pair<double, double>>& draws() const { return draws_; }

 private:
  double shift(double dose, double log_alpha2) const;
  std::optional<inference::Density2D> grid_;
  std::vector<std::pair<double, double>> draws_;
  std::optional<inference::McmcDiagnostics> diag_;
  double ref_dose_;
};

double blrm_log_likelihood(const BinaryDoseData& data, double ref_dose, double log_alpha1, double log_alpha2);

BlrmPosterior blrm_fit(const BinaryDoseData& data, const BlrmPrior& prior, Engine engine = Engine::quadrature,
                       const inference::QuadratureConfig& quad = {}, const inference::MCMCConfig& mcmc = {});

// ---------------------------------------------------------------------------
// BLRM-MAP

// Between-stratum heterogeneity of (log alpha1, log alpha2). By default
// tau ~ half-normal(scale); `fixed_tau` pins both components instead.
struct Heterogeneity {
  double tau_scale_a = 1.0;
  double tau_scale_b = 0.5;
  std::optional<std::array<double, 2>> fixed_tau;

  void validate() const;
};

struct Stratum {
  BinaryDoseData data;
  double ref_dose = 7.5;
};

// Meta-analytic-combined fit: stratum parameters are exchangeable,
// theta_j ~ N(mu, diag(tau^2)), with mu carrying the BLRM prior (its
// ref_dose is ignored; each stratum has its own). Returns the posterior for
// the current stratum. Falls back to blrm_fit with a warning when there are
// no historical patients.
BlrmPosterior blrm_map_fit(std::span<const Stratum> historical, const Stratum& current, const BlrmPrior& prior,
                           const Heterogeneity& hyper, const inference::MCMCConfig& mcmc);
BlrmPosterior blrm_map_fit(const Stratum& historical, const Stratum& current, const BlrmPrior& prior,
                           const Heterogeneity& hyper, const inference::MCMCConfig& mcmc);

}  // namespace titepk::comparators
