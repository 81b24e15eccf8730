#pragma once

#include <string>
#include <vector>

#include "titepk/io.hpp"
#include "titepk/model.hpp"
#include "titepk/rng.hpp"

namespace fixture {

inline std::string data_path(const std::string& name) { return std::string(TITEPK_DATA_DIR) + "/" + name; }

inline std::vector<titepk::model::PatientOutcome> everolimus(const std::string& which = "full") {
  return titepk::io::read_dataset_file(data_path("everolimus_" + which + ".csv"));
}

inline titepk::trial::TrialConfig everolimus_config() {
  return titepk::io::read_config_file(data_path("everolimus_config.json"));
}

inline titepk::pk::DosingRegimen daily(double dose) { return {dose, 24.0, 504.0, "daily"}; }
inline titepk::pk::DosingRegimen weekly(double dose) { return {dose, 168.0, 504.0, "weekly"}; }

// A small random cycle-1 dataset over a few regimens.
inline std::vector<titepk::model::PatientOutcome> random_dataset(titepk::Rng& rng, int max_patients = 24) {
  using namespace titepk;
  const pk::DosingRegimen regimens[] = {daily(2.5), daily(5.0), daily(7.5), {5.0, 48.0, 504.0, "q48h"},
                                        weekly(30.0)};
  const int n = 1 + static_cast<int>(rng.uniform() * max_patients);
  std::vector<model::PatientOutcome> out;
  for (int i = 0; i < n; ++i) {
    const auto& r = regimens[static_cast<int>(rng.uniform() * 5)];
    if (rng.bernoulli(0.3))
      out.push_back(model::dlt_at(r, 1.0 + 500.0 * rng.uniform()));
    else
      out.push_back(model::censored(r));
  }
  return out;
}

}  // namespace fixture
