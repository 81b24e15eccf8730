#pragma once

// Pseudo-PK model: a central compartment with first-order elimination feeding
// an effect compartment, both with unit volume. Doses are instantaneous
// impulses into the central compartment. All times are in hours.

#include <string>
#include <vector>

namespace titepk::pk {

inline constexpr double kDefaultCycleLength = 504.0;  // 21 days

struct PKParams {
  double half_life = 30.0;  // T_e, hours
  double k_eff = 1.0;       // effect-compartment rate, 1/h

  static PKParams from_log_keff(double half_life, double log_keff);

  double k_e() const;
  // Throws InvalidInput unless both rates are positive and finite.
  void validate() const;

  bool operator==(const PKParams&) const = default;
};

struct DosingRegimen {
  double dose = 1.0;      // mg/m^2 per administration
  double interval = 24.0; // hours between administrations
  double cycle_length = kDefaultCycleLength;
  std::string label;

  double frequency() const { return 1.0 / interval; }
  // Throws InvalidInput on dose <= 0 or an interval outside (0, cycle_length].
  void validate() const;

  DosingRegimen with_dose(double new_dose) const;
};

// Administration times {0, interval, 2*interval, ...} strictly below horizon.
std::vector<double> dosing_times(const DosingRegimen& regimen, double horizon);

// C(t). A dose given exactly at t is included (right-continuous).
double central_concentration(const DosingRegimen& regimen, const PKParams& pk, double t);

// C_eff(t), superposition of Bateman terms over doses given at or before t.
double effect_concentration(const DosingRegimen& regimen, const PKParams& pk, double t);

// Integral of C_eff over [0, t], in closed form.
double auc_effect(const DosingRegimen& regimen, const PKParams& pk, double t);

// Normalises C_eff so the reference regimen's AUC over one cycle is 1.
class ReferenceScale {
 public:
  ReferenceScale(DosingRegimen reference, PKParams pk);

  const DosingRegimen& regimen() const { return reference_; }
  const PKParams& pk() const { return pk_; }
  double scale() const { return scale_; }

  // Throws ConfigurationError when pk differs from the parameters used here.
  void check_compatible(const PKParams& pk) const;

 private:
  DosingRegimen reference_;
  PKParams pk_;
  double scale_;
};

// E(t) = C_eff(t) / scale.
double exposure(const DosingRegimen& regimen, const PKParams& pk, const ReferenceScale& ref, double t);

// AUC_E(t) = auc_effect(t) / scale.
double auc_exposure(const DosingRegimen& regimen, const PKParams& pk, const ReferenceScale& ref, double t);

// Cycle-end exposure AUC_E(t*) for the regimen's own cycle length.
double cycle_exposure(const DosingRegimen& regimen, const PKParams& pk, const ReferenceScale& ref);

}  // namespace titepk::pk
