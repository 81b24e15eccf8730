#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "titepk/errors.hpp"
#include "titepk/io.hpp"
#include "titepk/sim.hpp"

using namespace titepk;
using namespace titepk::sim;

namespace {

const pk::PKParams kPk = pk::PKParams::from_log_keff(30.0, 0.37);

io::ScenarioFile scenarios(const std::string& name) { return io::read_scenario_file(fixture::data_path(name)); }

}  // namespace

TEST_CASE("virtual patients") {
  const auto r = fixture::daily(5.0);
  Rng rng(1, {0});
  for (int i = 0; i < 1000; ++i) {
    const auto p = simulate_outcome(0.0, r, kPk, EventMode::exposure_inverse, rng);
    CHECK_FALSE(p.dlt);
    CHECK(p.time == 504.0);
  }
  int dlts = 0;
  const int n = 100000;
  const pk::ReferenceScale ref(r, kPk);
  const double lambda = -std::log(0.5) / pk::cycle_exposure(r, kPk, ref);
  int before_200 = 0;
  for (int i = 0; i < n; ++i) {
    const auto p = simulate_outcome(0.5, r, kPk, EventMode::exposure_inverse, rng);
    if (p.dlt) {
      ++dlts;
      CHECK(p.time > 0.0);
      CHECK(p.time <= 504.0);
      before_200 += p.time <= 200.0;
    }
  }
  CHECK(std::abs(dlts / double(n) - 0.5) < 0.005);
  // the event-time law is 1 - exp(-lambda AUC_E(t))
  const double f200 = 1.0 - std::exp(-lambda * pk::auc_exposure(r, kPk, ref, 200.0));
  CHECK(before_200 / double(n) == doctest::Approx(f200).epsilon(0.02));

  for (int i = 0; i < 200; ++i) {
    const auto p = simulate_outcome(0.7, r, kPk, EventMode::fixed_day, rng);
    if (p.dlt)
      CHECK(p.time == 360.0);
    else
      CHECK(p.time == 504.0);
  }
  CHECK_THROWS_AS(simulate_outcome(1.0, r, kPk, EventMode::exposure_inverse, rng), InvalidInput);
  CHECK_THROWS_AS(simulate_outcome(-0.1, r, kPk, EventMode::fixed_day, rng), InvalidInput);
}

TEST_CASE("metrics are proportions that add up") {
  const auto file = scenarios("scenarios_1_6.json");
  SimulationSettings set;
  set.design = file.design;
  set.reps = 40;
  set.seed = 3;
  for (trial::Method m : {trial::Method::titepk, trial::Method::crm, trial::Method::blrm}) {
    set.design.method = m;
    for (const auto& sc : file.scenarios) {
      const auto r = replicate(sc, set);
      CHECK(r.failures == 0);
      for (const auto* e : {&r.p_tt, &r.p_od, &r.p_ud, &r.p_none, &r.prop_dlt}) {
        CHECK(e->value >= 0.0);
        CHECK(e->value <= 1.0);
      }
      CHECK(r.p_tt.value + r.p_od.value + r.p_ud.value + r.p_none.value == doctest::Approx(1.0).epsilon(1e-9));
      if (!r.has_od) CHECK(std::isnan(r.prop_patients_od.value));
    }
  }
}

TEST_CASE("parallel replication equals serial") {
  const auto file = scenarios("scenarios_7_13.json");
  SimulationSettings set;
  set.design = file.design;
  set.reps = 12;
  set.seed = 11;
  set.design.map_mcmc = {4, 500, 500, 1, 0.25};
  for (trial::Method m : {trial::Method::titepk, trial::Method::blrm_map}) {
    set.design.method = m;
    set.threads = 1;
    const auto a = replicate_trials(file.scenarios[1], set);
    set.threads = 3;
    const auto b = replicate_trials(file.scenarios[1], set);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].mtd == b[i].mtd);
      CHECK(a[i].patients == b[i].patients);
      CHECK(a[i].dlts == b[i].dlts);
      CHECK(a[i].final_patients == b[i].final_patients);
    }
    const auto ma = aggregate(file.scenarios[1], set, a), mb = aggregate(file.scenarios[1], set, b);
    CHECK(ma.p_tt.value == mb.p_tt.value);
    CHECK(ma.mean_patients.value == mb.mean_patients.value);
  }
}

TEST_CASE("all-safe truth escalates to the top dose") {
  Scenario sc;
  sc.id = "safe";
  trial::Schedule s;
  s.label = "daily";
  s.doses = {2.5, 5, 7.5, 10, 12.5, 15};
  sc.schedules.push_back({s, std::vector<double>(6, 0.0)});
  SimulationSettings set;
  set.design = scenarios("scenarios_1_6.json").design;
  set.reps = 5;
  for (trial::Method m : {trial::Method::titepk, trial::Method::blrm}) {
    set.design.method = m;
    for (const auto& r : replicate_trials(sc, set)) {
      CHECK(r.dlts == 0);
      CHECK(r.mtd == 15.0);
    }
  }
}

TEST_CASE("standard errors shrink like root n") {
  const auto file = scenarios("scenarios_1_6.json");
  SimulationSettings set;
  set.design = file.design;
  set.design.method = trial::Method::crm;
  double ratio = 0.0;
  const int seeds = 5;
  for (int k = 0; k < seeds; ++k) {
    set.seed = 500 + k;
    set.reps = 60;
    const auto small = replicate(file.scenarios[0], set);
    set.reps = 120;
    const auto big = replicate(file.scenarios[0], set);
    ratio += small.p_tt.se / big.p_tt.se;
    CHECK(small.mean_dlts.se > big.mean_dlts.se);
  }
  CHECK(ratio / seeds == doctest::Approx(std::sqrt(2.0)).epsilon(0.1));
}

TEST_CASE("deterministic per trial index") {
  const auto file = scenarios("scenarios_1_6.json");
  SimulationSettings set;
  set.design = file.design;
  set.seed = 8;
  const auto a = run_trial(file.scenarios[0], set, 5);
  const auto b = run_trial(file.scenarios[0], set, 5);
  CHECK(io::state_to_json(a.state()) == io::state_to_json(b.state()));
  const auto c = run_trial(file.scenarios[0], set, 6);
  CHECK(io::state_to_json(a.state()) != io::state_to_json(c.state()));
}

TEST_CASE("sensitivity sweep") {
  const auto data = fixture::everolimus("full");
  const std::vector<pk::DosingRegimen> regs{fixture::daily(2.5), fixture::daily(5.0), fixture::daily(7.5),
                                            fixture::daily(10.0)};
  const auto ref = fixture::daily(5.0);
  const model::TitePkPrior prior;
  std::vector<double> grid;
  for (double te = 5; te <= 50; te += 5) grid.push_back(te);

  const auto early = sensitivity_sweep(data, grid, TimingShift::early, 0.37, ref, prior, regs);
  const auto late = sensitivity_sweep(data, grid, TimingShift::late, 0.37, ref, prior, regs);
  REQUIRE(early.size() == grid.size() * regs.size());
  for (std::size_t i = 0; i < early.size(); ++i) {
    CAPTURE(early[i].half_life);
    CAPTURE(early[i].summary.dose);
    CHECK(early[i].summary.p_od > late[i].summary.p_od);
  }

  // a one-value grid is the plain fit
  const auto one = sensitivity_sweep(data, {30.0}, TimingShift::observed, 0.37, ref, prior, regs);
  const model::TitePkModel m(kPk, ref, prior);
  const auto plain = m.summarize(m.quadrature_posterior(data), regs);
  for (std::size_t i = 0; i < regs.size(); ++i) {
    CHECK(one[i].summary.median == plain.doses[i].median);
    CHECK(one[i].summary.p_od == plain.doses[i].p_od);
  }

  const auto shifted = shift_event_times(data, TimingShift::early);
  for (std::size_t i = 0; i < data.size(); ++i) CHECK(shifted[i].time == (data[i].dlt ? 36.0 : data[i].time));
  CHECK_THROWS_AS(sensitivity_sweep(data, {}, TimingShift::early, 0.37, ref, prior, regs), InvalidInput);
}
