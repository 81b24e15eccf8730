#pragma once

// Dose-escalation state machine for one or more sequential schedules.
// Every cohort completes cycle-1 follow-up before the next decision.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "titepk/comparators.hpp"
#include "titepk/model.hpp"

namespace titepk::trial {

struct EscalationRules {
  int cohort_size = 3;
  int max_patients = 60;          // per schedule phase
  int min_patients_for_mtd = 21;  // per schedule phase
  int min_at_mtd = 6;
  double feasibility_bound = 0.25;
  double max_escalation_factor = 2.0;
  model::IntervalBounds bounds;
  double crm_target = 0.30;
  int crm_sample_size = 21;
  double crm_stop_threshold = 0.30;
  double crm_stop_confidence = 0.90;
  // Start the next schedule at its lowest dose when a phase ends without
  // an MTD, instead of stopping the whole trial.
  bool continue_without_mtd = false;

  void validate() const;
};

enum class Method { titepk, crm, blrm, blrm_map };
std::string to_string(Method m);
Method method_from_string(const std::string& s);

struct Schedule {
  std::string label;
  double interval = 24.0;
  double cycle_length = pk::kDefaultCycleLength;
  std::vector<double> doses;  // ascending panel
  // BLRM reference dose for this schedule; 0 uses the prior's ref_dose.
  double blrm_ref_dose = 0.0;

  pk::DosingRegimen regimen(double dose) const { return {dose, interval, cycle_length, label}; }
  std::size_t index_of(double dose) const;
  void validate() const;
};

struct CrmSettings {
  double target = 0.30;
  double halfwidth = 0.10;
  int nu = 0;  // 0: level (K + 1) / 2, i.e. the lower middle for even K
  double prior_sd = 2.0;
  comparators::CrmScaling scaling = comparators::CrmScaling::prior_mean;
};

struct TrialConfig {
  Method method = Method::titepk;
  std::vector<Schedule> schedules;  // enrolled in order
  EscalationRules rules;

  // TITE-PK
  pk::PKParams pk;
  pk::DosingRegimen reference{7.5, 24.0, pk::kDefaultCycleLength, "daily"};
  model::TitePkPrior titepk_prior;

  // BLRM / BLRM-MAP
  comparators::BlrmPrior blrm_prior;
  comparators::Heterogeneity heterogeneity;

  CrmSettings crm;

  inference::QuadratureConfig quadrature;
  inference::MCMCConfig mcmc;
  // The hierarchical fit mixes slowly; it gets its own, longer, run.
  inference::MCMCConfig map_mcmc{4, 10000, 10000, 1, 0.25};

  void validate() const;
  double blrm_ref_dose(std::size_t schedule) const;
  comparators::CrmConfig crm_config(std::size_t schedule) const;
};

struct Cohort {
  std::size_t phase = 0;
  double dose = 0.0;
  std::vector<model::PatientOutcome> patients;
};

enum class Action { enroll, mtd, stop_toxicity, stop_safety, stop_cap, stop_sequence, done };
std::string to_string(Action a);

// Model assessment of one schedule's panel.
struct Assessment {
  std::size_t phase = 0;
  model::PosteriorSummary summary;  // one row per panel dose
  std::optional<double> prob_lowest_above;  // CRM safety quantity
};

struct Decision {
  std::size_t phase = 0;
  int after_patients = 0;  // phase enrolment at the time of the decision
  Assessment assessment;
  std::vector<double> eligible;       // EWOC-eligible doses
  std::optional<double> recommended;  // next dose, or the MTD
  Action action = Action::enroll;
  std::string reason;
};

struct PhaseResult {
  std::optional<double> mtd;
  int patients = 0;
  Action outcome = Action::enroll;
};

struct TrialState {
  std::size_t phase = 0;
  bool finished = false;
  std::vector<Cohort> cohorts;
  std::vector<Decision> decisions;
  std::vector<PhaseResult> phases;
  std::optional<double> current_dose;  // dose of the next cohort

  int patients_in_phase(std::size_t p) const;
  int patients_at(std::size_t p, double dose) const;
  int total_patients() const;
  std::vector<model::PatientOutcome> outcomes() const;
  std::vector<model::PatientOutcome> outcomes_in_phase(std::size_t p) const;
  std::optional<double> final_mtd() const;
};

// Fits the configured model to trial data and summarises the panel of the
// given schedule.
class DoseModel {
 public:
  virtual ~DoseModel() = default;
  // `full` requests quantiles; otherwise only interval masses are needed.
  virtual Assessment assess(const TrialState& state, std::size_t phase, bool full) const = 0;
};

std::unique_ptr<DoseModel> make_model(const TrialConfig& config);

// EWOC: highest dose with p_OD < bound that does not exceed factor * current.
std::optional<double> recommend_ewoc(const model::PosteriorSummary& summary, std::optional<double> current,
                                     const EscalationRules& rules, std::vector<double>* eligible = nullptr);
// Closest median to the target, at most one level above the current dose.
std::optional<double> recommend_crm(const model::PosteriorSummary& summary, std::optional<double> current,
                                    double target);
bool declare_mtd(const TrialState& state, std::size_t phase, double dose, const EscalationRules& rules);

class Trial {
 public:
  explicit Trial(TrialConfig config);
  Trial(const Trial& other);
  Trial& operator=(const Trial& other);
  Trial(Trial&&) noexcept = default;
  Trial& operator=(Trial&&) noexcept = default;

  const TrialConfig& config() const { return config_; }
  const TrialState& state() const { return state_; }
  bool finished() const { return state_.finished; }
  // Schedule and dose for the next cohort.
  std::optional<std::pair<std::size_t, double>> pending() const;

  // Records a cohort for the active schedule and takes the next decision.
  const Decision& submit(std::vector<model::PatientOutcome> patients);
  // Evaluates a hypothetical cohort without changing state.
  Decision whatif(std::vector<model::PatientOutcome> patients) const;
  // Investigator-driven handoff: closes the active phase without an MTD and
  // opens the next schedule at its lowest dose.
  void advance_to(std::size_t phase);
  Assessment assess(bool full = true) const;

  // Summaries only for the per-cohort decisions; quantiles are skipped.
  void set_light(bool light) { light_ = light; }

 private:
  Decision decide(const TrialState& state) const;
  void apply(Decision d);
  void start_phase(std::size_t phase, std::optional<double> start);
  void check_patients(const std::vector<model::PatientOutcome>& patients) const;

  TrialConfig config_;
  std::unique_ptr<DoseModel> model_;
  TrialState state_;
  bool light_ = false;
};

}  // namespace titepk::trial
