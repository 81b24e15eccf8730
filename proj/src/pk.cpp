#include "titepk/pk.hpp"

#include <cmath>
#include <numbers>

#include "titepk/errors.hpp"

namespace titepk::pk {
namespace {

// Below this relative rate gap the Bateman terms switch to their limit.
constexpr double kEqualRateTol = 1e-8;

bool rates_degenerate(double k_e, double k_eff) { return std::abs(k_eff - k_e) < kEqualRateTol * k_e; }

void check_time(double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidInput("time must be finite and >= 0");
}

// Effect concentration s hours after a unit dose.
double bateman(double k_e, double k_eff, double s) {
  if (rates_degenerate(k_e, k_eff)) return k_e * s * std::exp(-k_e * s);
  // e^{-k_e s} - e^{-k_eff s} = -e^{-k_e s} expm1(-(k_eff - k_e) s)
  const double gap = k_eff - k_e;
  return -k_eff / gap * std::exp(-k_e * s) * std::expm1(-gap * s);
}

// Integral of bateman over [0, s].
double bateman_area(double k_e, double k_eff, double s) {
  if (rates_degenerate(k_e, k_eff)) return (1.0 - std::exp(-k_e * s) * (1.0 + k_e * s)) / k_e;
  const double a = -std::expm1(-k_e * s) / k_e;
  const double b = -std::expm1(-k_eff * s) / k_eff;
  return k_eff / (k_eff - k_e) * (a - b);
}

}  // namespace

PKParams PKParams::from_log_keff(double half_life, double log_keff) {
  PKParams p{half_life, std::exp(log_keff)};
  p.validate();
  return p;
}

double PKParams::k_e() const { return std::numbers::ln2 / half_life; }

void PKParams::validate() const {
  if (!(half_life > 0.0) || !std::isfinite(half_life)) throw InvalidInput("half-life must be positive");
  if (!(k_eff > 0.0) || !std::isfinite(k_eff)) throw InvalidInput("k_eff must be positive");
}

void DosingRegimen::validate() const {
  if (!(dose > 0.0) || !std::isfinite(dose)) throw InvalidInput("dose must be positive");
  if (!(cycle_length > 0.0) || !std::isfinite(cycle_length)) throw InvalidInput("cycle length must be positive");
  if (!(interval > 0.0) || interval > cycle_length) throw InvalidInput("interval must lie in (0, cycle_length]");
}

DosingRegimen DosingRegimen::with_dose(double new_dose) const {
  DosingRegimen r = *this;
  r.dose = new_dose;
  return r;
}

std::vector<double> dosing_times(const DosingRegimen& regimen, double horizon) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InvalidInput("horizon must be positive");
  if (!(regimen.interval > 0.0)) throw InvalidInput("interval must be positive");
  std::vector<double> times;
  for (std::size_t j = 0;; ++j) {
    const double tau = static_cast<double>(j) * regimen.interval;
    if (tau >= horizon) break;
    times.push_back(tau);
  }
  return times;
}

namespace {

// Calls f(s) for every dose given at tau <= t, with s = t - tau.
template <typename F>
double superpose(const DosingRegimen& regimen, double t, bool include_at_t, F&& f) {
  double total = 0.0;
  for (std::size_t j = 0;; ++j) {
    const double tau = static_cast<double>(j) * regimen.interval;
    if (tau > t || (!include_at_t && tau == t)) break;
    total += f(t - tau);
  }
  return regimen.dose * total;
}

}  // namespace

double central_concentration(const DosingRegimen& regimen, const PKParams& pk, double t) {
  check_time(t);
  const double k_e = pk.k_e();
  return superpose(regimen, t, true, [&](double s) { return std::exp(-k_e * s); });
}

double effect_concentration(const DosingRegimen& regimen, const PKParams& pk, double t) {
  check_time(t);
  const double k_e = pk.k_e();
  return superpose(regimen, t, true, [&](double s) { return bateman(k_e, pk.k_eff, s); });
}

double auc_effect(const DosingRegimen& regimen, const PKParams& pk, double t) {
  check_time(t);
  const double k_e = pk.k_e();
  // A dose at exactly t has not accumulated any area yet.
  return superpose(regimen, t, false, [&](double s) { return bateman_area(k_e, pk.k_eff, s); });
}

ReferenceScale::ReferenceScale(DosingRegimen reference, PKParams pk)
    : reference_(std::move(reference)), pk_(pk), scale_(0.0) {
  reference_.validate();
  pk_.validate();
  scale_ = auc_effect(reference_, pk_, reference_.cycle_length);
  if (!(scale_ > 0.0)) throw ConfigurationError("reference AUC must be positive");
}

void ReferenceScale::check_compatible(const PKParams& pk) const {
  if (!(pk == pk_)) throw ConfigurationError("reference scale was computed with different PK parameters");
}

double exposure(const DosingRegimen& regimen, const PKParams& pk, const ReferenceScale& ref, double t) {
  ref.check_compatible(pk);
  return effect_concentration(regimen, pk, t) / ref.scale();
}

double auc_exposure(const DosingRegimen& regimen, const PKParams& pk, const ReferenceScale& ref, double t) {
  ref.check_compatible(pk);
  return auc_effect(regimen, pk, t) / ref.scale();
}

double cycle_exposure(const DosingRegimen& regimen, const PKParams& pk, const ReferenceScale& ref) {
  return auc_exposure(regimen, pk, ref, regimen.cycle_length);
}

}  // namespace titepk::pk
