#pragma once

// File formats: the patient CSV, JSON trial configuration and scenario
// files, and the tabular outputs of simulations and sweeps.

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "titepk/analysis.hpp"
#include "titepk/sim.hpp"
#include "titepk/trial.hpp"

namespace titepk::io {

using nlohmann::json;

// patient_id,schedule,dose,interval,time,dlt -- header required, any column
// order. Errors are DataError with the offending line number.
std::vector<model::PatientOutcome> read_dataset(std::istream& in, double cycle_length = pk::kDefaultCycleLength,
                                                const std::string& source = "dataset");
std::vector<model::PatientOutcome> read_dataset_file(const std::string& path,
                                                     double cycle_length = pk::kDefaultCycleLength);
void write_dataset(std::ostream& out, const std::vector<model::PatientOutcome>& data);

// Trial configuration. Missing keys keep their defaults; unknown keys are
// rejected with the JSON path.
trial::TrialConfig config_from_json(const json& j);
json config_to_json(const trial::TrialConfig& c);
trial::TrialConfig read_config_file(const std::string& path);

struct ScenarioFile {
  trial::TrialConfig design;  // schedules come from each scenario
  std::vector<sim::Scenario> scenarios;
  std::uint64_t seed = 1;
  int reps = 1000;
  sim::EventMode mode = sim::EventMode::exposure_inverse;
};
ScenarioFile scenarios_from_json(const json& j);
ScenarioFile read_scenario_file(const std::string& path);
json scenario_to_json(const sim::Scenario& s);

json patient_to_json(const model::PatientOutcome& p);
model::PatientOutcome patient_from_json(const json& j, double cycle_length = pk::kDefaultCycleLength);
json summary_to_json(const model::PosteriorSummary& s);
json decision_to_json(const trial::Decision& d);
// Full transcript: cohorts, decisions, phase results.
json state_to_json(const trial::TrialState& s);
json metrics_to_json(const sim::Metrics& m);
json report_to_json(const analysis::Report& r);

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const sim::Metrics& m, std::uint64_t seed);
void write_sensitivity(std::ostream& out, const std::vector<sim::SensitivityRow>& rows);

json read_json_file(const std::string& path);

}  // namespace titepk::io
