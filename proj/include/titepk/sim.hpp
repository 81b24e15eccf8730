#pragma once

// Operating characteristics by Monte Carlo: virtual patients, replicated
// trials, aggregated metrics with standard errors, and the half-life /
// DLT-timing sensitivity sweep.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "titepk/rng.hpp"
#include "titepk/trial.hpp"

namespace titepk::sim {

enum class EventMode { exposure_inverse, fixed_day };
std::string to_string(EventMode m);
EventMode event_mode_from_string(const std::string& s);

inline constexpr double kFixedEventTime = 360.0;  // day 15

struct ScheduleTruth {
  trial::Schedule schedule;
  std::vector<double> true_p;  // aligned with schedule.doses
};

struct Scenario {
  std::string id;
  std::vector<ScheduleTruth> schedules;  // enrolled in order

  void validate() const;
  double true_p(std::size_t phase, double dose) const;
  bool has_od(double over = 0.40) const;  // final schedule has a dose above `over`
  bool has_tt(double under = 0.20, double over = 0.40) const;
};

// One patient: DLT with probability true_p; event time by `mode`.
// exposure-inverse: time solves 1 - exp(-lambda * AUC_E(t)) = u with lambda
// matching true_p at cycle end; fixed-day: time = fixed_time.
model::PatientOutcome simulate_outcome(double true_p, const pk::DosingRegimen& regimen, const pk::PKParams& pk,
                                       EventMode mode, Rng& rng, double fixed_time = kFixedEventTime);

struct SimulationSettings {
  trial::TrialConfig design;  // schedules are taken from the scenario
  EventMode mode = EventMode::exposure_inverse;
  double fixed_time = kFixedEventTime;
  // PK used to generate event times; defaults to design.pk.
  std::optional<pk::PKParams> truth_pk;
  int reps = 1000;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: hardware concurrency
};

enum class Selection { tt, od, ud, none };

struct TrialResult {
  std::optional<double> mtd;
  Selection selection = Selection::none;
  int patients = 0;
  int patients_od = 0;
  int dlts = 0;
  int final_patients = 0;  // enrolled on the last schedule
  int final_dlts = 0;
  bool failed = false;
  std::string error;
};

struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

struct Metrics {
  std::string scenario;
  std::string method;
  std::string mode;
  int reps = 0;
  int failures = 0;
  Estimate p_tt, p_od, p_ud, p_none;
  Estimate mean_patients;
  Estimate prop_patients_od;  // NaN when the scenario has no OD doses
  Estimate prop_dlt;
  Estimate mean_dlts;
  // Same, restricted to the last schedule of a sequential design.
  Estimate mean_final_patients;
  Estimate mean_final_dlts;
  bool has_tt = true;
  bool has_od = true;
};

trial::TrialConfig design_for(const Scenario& scenario, const SimulationSettings& settings);

// Runs one trial with its own random streams; the result depends only on
// (settings.seed, index).
trial::Trial run_trial(const Scenario& scenario, const SimulationSettings& settings, std::uint64_t index);
TrialResult summarize_trial(const Scenario& scenario, const trial::Trial& t);

std::vector<TrialResult> replicate_trials(const Scenario& scenario, const SimulationSettings& settings);
Metrics aggregate(const Scenario& scenario, const SimulationSettings& settings,
                  const std::vector<TrialResult>& results);
Metrics replicate(const Scenario& scenario, const SimulationSettings& settings);

// Runs fn(i) for i in [0, n) on `threads` workers (0: hardware concurrency).
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

enum class TimingShift { observed, early, late };
std::string to_string(TimingShift s);
TimingShift timing_shift_from_string(const std::string& s);
inline constexpr double kEarlyEventTime = 36.0;   // day 1.5
inline constexpr double kLateEventTime = 492.0;   // day 20.5

struct SensitivityRow {
  double half_life = 0.0;
  TimingShift shift = TimingShift::observed;
  model::DoseSummary summary;
};

// Refits TITE-PK for every half-life on the shifted dataset.
std::vector<SensitivityRow> sensitivity_sweep(const std::vector<model::PatientOutcome>& data,
                                              const std::vector<double>& half_lives, TimingShift shift,
                                              double log_keff, const pk::DosingRegimen& reference,
                                              const model::TitePkPrior& prior,
                                              const std::vector<pk::DosingRegimen>& regimens,
                                              const inference::QuadratureConfig& quad = {});

std::vector<model::PatientOutcome> shift_event_times(std::vector<model::PatientOutcome> data, TimingShift shift);

}  // namespace titepk::sim
