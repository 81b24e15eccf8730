#pragma once

// One-shot analysis of a completed dataset with any of the dose models.

#include <optional>
#include <string>
#include <vector>

#include "titepk/trial.hpp"

namespace titepk::analysis {

// single: only the target schedule's patients. sequential: earlier
// schedules enter as pooled data (TITE-PK), historical strata (BLRM-MAP) or
// the bridged prior (CRM).
enum class Strata { single, sequential };
std::string to_string(Strata s);
Strata strata_from_string(const std::string& s);

struct Options {
  trial::Method method = trial::Method::titepk;
  Strata strata = Strata::single;
  std::string schedule;  // target schedule label; empty: the last one configured
  comparators::Engine engine = comparators::Engine::quadrature;  // TITE-PK and single-stratum BLRM
};

struct Report {
  trial::Method method = trial::Method::titepk;
  Strata strata = Strata::single;
  std::string schedule;
  model::PosteriorSummary summary;
  std::vector<double> eligible;  // EWOC: p_OD below the feasibility bound
  std::optional<double> recommended;
  std::optional<double> prob_lowest_above;  // CRM only
  bool safety_stop = false;
  int patients_used = 0;
  int patients_ignored = 0;
};

// Patients must sit on a configured schedule (matching label and interval)
// and, for the binary models, on its dose panel; DataError otherwise.
Report analyze(const trial::TrialConfig& config, const std::vector<model::PatientOutcome>& data,
               const Options& options);

}  // namespace titepk::analysis
