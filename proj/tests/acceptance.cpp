// Acceptance run: one PASS/FAIL line per criterion, with the numbers behind
// each verdict indented underneath. Exits 0 once everything has been
// evaluated (1 with --strict when any criterion fails); a crash is the only
// other way out.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "titepk/analysis.hpp"
#include "titepk/comparators.hpp"
#include "titepk/io.hpp"
#include "titepk/sim.hpp"

using namespace titepk;

namespace {

struct Item {
  bool ok;
  std::string text;
};

struct Criterion {
  std::string name;
  std::vector<Item> items;
  double seconds = 0.0;

  bool pass() const {
    return std::all_of(items.begin(), items.end(), [](const Item& i) { return i.ok; });
  }
  void add(bool ok, const std::string& text) { items.push_back({ok, text}); }
};

std::string f3(double x) {
  char b[32];
  std::snprintf(b, sizeof b, "%.3f", x);
  return b;
}

std::string band(double target, double tol) { return "[" + f3(target - tol) + ", " + f3(target + tol) + "]"; }

bool within(double x, double target, double tol) { return std::abs(x - target) <= tol + 1e-12; }

void report(const Criterion& c) {
  std::cout << (c.pass() ? "PASS  " : "FAIL  ") << c.name << "  (" << f3(c.seconds) << " s)\n";
  for (const auto& i : c.items) std::cout << "        " << (i.ok ? "ok    " : "miss  ") << i.text << "\n";
  std::cout << std::flush;
}

template <class F>
Criterion timed(const std::string& name, F&& body) {
  Criterion c{name, {}};
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.add(false, std::string("error: ") + e.what());
  }
  c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(c);
  return c;
}

const model::DoseSummary& row(const model::PosteriorSummary& s, double dose) {
  for (const auto& d : s.doses)
    if (std::abs(d.dose - dose) < 1e-9) return d;
  throw std::runtime_error("dose missing from summary");
}

// ---------------------------------------------------------------------------

void everolimus(Criterion& c) {
  const auto cfg = fixture::everolimus_config();
  const auto data = fixture::everolimus("full");
  auto run = [&](trial::Method m, analysis::Strata s) {
    analysis::Options o;
    o.method = m;
    o.strata = s;
    return analysis::analyze(cfg, data, o);
  };
  using trial::Method;
  using analysis::Strata;

  const double tp = row(run(Method::titepk, Strata::single).summary, 2.5).p_od;
  c.add(within(tp, 0.14, 0.03), "TITE-PK daily-only p_OD(2.5) = " + f3(tp) + "  want " + band(0.14, 0.03));
  const double ts = row(run(Method::titepk, Strata::sequential).summary, 2.5).p_od;
  c.add(ts <= 0.01, "TITE-PK sequential p_OD(2.5) = " + f3(ts) + "  want <= 0.010");
  const double bl = row(run(Method::blrm, Strata::single).summary, 2.5).p_od;
  c.add(within(bl, 0.40, 0.05), "BLRM daily-only p_OD(2.5) = " + f3(bl) + "  want " + band(0.40, 0.05));
  const auto map = run(Method::blrm_map, Strata::sequential);
  const double mp = row(map.summary, 2.5).p_od;
  c.add(within(mp, 0.18, 0.06), "BLRM-MAP sequential p_OD(2.5) = " + f3(mp) + "  want " + band(0.18, 0.06) +
                                    "  (max R-hat " + f3(map.summary.max_rhat) + ")");
  const auto crm = run(Method::crm, Strata::single);
  const double pc = crm.prob_lowest_above.value_or(std::nan(""));
  c.add(within(pc, 0.80, 0.05), "CRM daily-only P(pi_1 > 0.30) = " + f3(pc) + "  want " + band(0.80, 0.05));
}

void skeletons(Criterion& c) {
  auto show = [](const std::vector<double>& v) {
    std::string s;
    for (double x : v) s += (s.empty() ? "" : " ") + f3(x).substr(0, 4);
    return s;
  };
  const std::vector<double> six{0.02, 0.12, 0.30, 0.50, 0.68, 0.80}, four{0.12, 0.30, 0.50, 0.68};
  const auto a = comparators::lee_cheung_skeleton(6, 0.30, 0.10, 3).rounded();
  const auto b = comparators::lee_cheung_skeleton(4, 0.30, 0.10, 2).rounded();
  c.add(a == six, "K=6, nu=3: " + show(a));
  c.add(b == four, "K=4, nu=2: " + show(b));
}

// ---------------------------------------------------------------------------

struct SimTarget {
  std::string scenario;
  trial::Method method;
};

void simulation(Criterion& c, int reps, int threads, const std::string& csv) {
  const auto f16 = io::read_scenario_file(fixture::data_path("scenarios_1_6.json"));
  const auto f713 = io::read_scenario_file(fixture::data_path("scenarios_7_13.json"));
  using trial::Method;
  const std::vector<SimTarget> runs{{"1", Method::titepk},  {"1", Method::blrm},    {"1", Method::crm},
                                    {"6", Method::blrm},    {"9", Method::titepk},  {"9", Method::blrm_map},
                                    {"12", Method::titepk}, {"13", Method::titepk}};
  const sim::EventMode modes[] = {sim::EventMode::exposure_inverse, sim::EventMode::fixed_day};

  std::ofstream out;
  if (!csv.empty()) {
    out.open(csv);
    io::write_metrics_header(out);
  }
  // (scenario, method, mode) -> metrics
  std::map<std::tuple<std::string, Method, sim::EventMode>, sim::Metrics> m;
  for (const auto& r : runs) {
    const auto& file = std::stoi(r.scenario) <= 6 ? f16 : f713;
    const auto sc = std::find_if(file.scenarios.begin(), file.scenarios.end(),
                                 [&](const sim::Scenario& s) { return s.id == r.scenario; });
    if (sc == file.scenarios.end()) throw std::runtime_error("scenario " + r.scenario + " missing");
    for (auto mode : modes) {
      sim::SimulationSettings set;
      set.design = file.design;
      set.design.method = r.method;
      set.mode = mode;
      set.reps = reps;
      set.seed = file.seed;
      set.threads = threads;
      const auto t0 = std::chrono::steady_clock::now();
      const auto met = sim::replicate(*sc, set);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::cerr << "  scenario " << r.scenario << " " << trial::to_string(r.method) << " " << sim::to_string(mode)
                << ": " << f3(secs) << " s\n";
      if (out) io::write_metrics_row(out, met, file.seed);
      m[{r.scenario, r.method, mode}] = met;
    }
  }

  auto get = [&](const std::string& s, Method meth, sim::EventMode mode) -> const sim::Metrics& {
    return m.at({s, meth, mode});
  };
  auto both = [&](const std::string& s, Method meth, auto&& value) {
    return std::make_pair(value(get(s, meth, modes[0])), value(get(s, meth, modes[1])));
  };
  auto fmt_pair = [](std::pair<double, double> v) { return f3(v.first) + " / " + f3(v.second); };
  auto p_tt = [](const sim::Metrics& x) { return x.p_tt.value; };
  auto p_none = [](const sim::Metrics& x) { return x.p_none.value; };

  auto near = [&](const std::string& label, const std::string& s, Method meth, auto&& value, double target,
                  double tol) {
    const auto v = both(s, meth, value);
    const bool ok = within(v.first, target, tol) || within(v.second, target, tol);
    c.add(ok, "S" + s + " " + trial::to_string(meth) + " " + label + " = " + fmt_pair(v) + "  want " +
                  band(target, tol) + " in either mode");
  };
  near("P(TT)", "1", Method::titepk, p_tt, 0.78, 0.07);
  near("P(TT)", "1", Method::blrm, p_tt, 0.75, 0.07);
  near("P(TT)", "1", Method::crm, p_tt, 0.73, 0.07);
  near("P(none)", "6", Method::blrm, p_none, 0.92, 0.05);
  near("P(TT)", "9", Method::titepk, p_tt, 0.94, 0.05);
  near("P(TT)", "9", Method::blrm_map, p_tt, 0.77, 0.07);
  {
    bool ok = false;
    std::string txt = "S12 titepk P(none) / mean enrolled (final schedule) =";
    for (auto mode : modes) {
      const auto& x = get("12", Method::titepk, mode);
      ok = ok || (within(x.p_none.value, 0.98, 0.03) && within(x.mean_patients.value, 3.7, 1.5));
      txt += "  " + sim::to_string(mode) + ": " + f3(x.p_none.value) + " / " + f3(x.mean_patients.value) + " (" +
             f3(x.mean_final_patients.value) + ")";
    }
    c.add(ok, txt + "  want " + band(0.98, 0.03) + " / " + band(3.7, 1.5) + " in one mode");
  }
  {
    const auto v = both("13", Method::titepk, p_tt);
    c.add(v.first <= 0.30 || v.second <= 0.30, "S13 titepk P(TT) = " + fmt_pair(v) + "  want <= 0.300 in either mode");
  }
  // method ordering by P(TT) must hold in both modes
  auto ranking = [&](const std::string& s, std::vector<Method> order) {
    for (auto mode : modes) {
      bool ok = true;
      std::string txt;
      for (std::size_t i = 0; i < order.size(); ++i) {
        const double v = get(s, order[i], mode).p_tt.value;
        if (i > 0 && !(get(s, order[i - 1], mode).p_tt.value > v)) ok = false;
        txt += (i ? " > " : "") + trial::to_string(order[i]) + " " + f3(v);
      }
      c.add(ok, "S" + s + " ranking (" + sim::to_string(mode) + "): " + txt);
    }
  };
  ranking("1", {Method::titepk, Method::blrm, Method::crm});
  ranking("9", {Method::titepk, Method::blrm_map});
}

void sensitivity(Criterion& c) {
  const auto cfg = fixture::everolimus_config();
  const auto data = fixture::everolimus("full");
  const auto& daily = cfg.schedules.back();
  std::vector<pk::DosingRegimen> regs;
  for (double d : daily.doses) regs.push_back(daily.regimen(d));
  std::vector<double> grid;
  for (double te = 5; te <= 50; te += 5) grid.push_back(te);
  const double lk = std::log(cfg.pk.k_eff);

  const auto obs = sim::sensitivity_sweep(data, grid, sim::TimingShift::observed, lk, cfg.reference, cfg.titepk_prior, regs);
  double lo = 1, hi = 0;
  for (const auto& r : obs)
    if (r.summary.dose == 2.5) lo = std::min(lo, r.summary.median), hi = std::max(hi, r.summary.median);
  c.add(hi - lo < 0.05, "median p(2.5 daily) over T_e 5..50: " + f3(lo) + " .. " + f3(hi) + ", spread " +
                            f3(hi - lo) + "  want < 0.050");

  const auto early = sim::sensitivity_sweep(data, grid, sim::TimingShift::early, lk, cfg.reference, cfg.titepk_prior, regs);
  const auto late = sim::sensitivity_sweep(data, grid, sim::TimingShift::late, lk, cfg.reference, cfg.titepk_prior, regs);
  int ordered = 0;
  double min_gap = 1.0;
  for (std::size_t i = 0; i < early.size(); ++i) {
    ordered += early[i].summary.p_od > late[i].summary.p_od;
    min_gap = std::min(min_gap, early[i].summary.p_od - late[i].summary.p_od);
  }
  c.add(ordered == static_cast<int>(early.size()),
        "p_OD(early) > p_OD(late) in " + std::to_string(ordered) + "/" + std::to_string(early.size()) +
            " (T_e, dose) cells; smallest gap " + f3(min_gap));
}

// ---------------------------------------------------------------------------

void properties(Criterion& c) {
  const pk::PKParams base = pk::PKParams::from_log_keff(30.0, 0.37);
  {
    Rng rng(2024, {0});
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const pk::PKParams p = pk::PKParams::from_log_keff(2.0 + 80.0 * rng.uniform(), -3.0 + 4.0 * rng.uniform());
      const double intervals[] = {12.0, 24.0, 48.0, 72.0, 168.0};
      const pk::DosingRegimen r{0.5 + 20.0 * rng.uniform(), intervals[i % 5], 504.0, ""};
      double t = 1.0 + 500.0 * rng.uniform();
      if (std::fmod(t, r.interval) < 1e-3) t += 0.01;
      const auto o = oracle::integrate_pk(r.dose, r.interval, p.k_e(), p.k_eff, t);
      auto rel = [](double a, double b) { return std::abs(a - b) / std::abs(b); };
      worst = std::max({worst, rel(pk::central_concentration(r, p, t), o.central),
                        rel(pk::effect_concentration(r, p, t), o.effect), rel(pk::auc_effect(r, p, t), o.auc)});
    }
    c.add(worst < 1e-6, "PK closed form vs ODE oracle, 100 draws: max rel err " + std::to_string(worst) + "  want < 1e-6");
  }
  {
    const pk::DosingRegimen ref{7.5, 24.0, 504.0, "daily"};
    const pk::ReferenceScale s(ref, base);
    const double err = std::abs(pk::cycle_exposure(ref, base, s) - 1.0);
    c.add(err <= 1e-10, "AUC_E(t*|d*,f*) - 1 = " + std::to_string(err) + "  want <= 1e-10");
  }
  const model::TitePkModel m(base, fixture::daily(5.0));
  {
    Rng rng(77, {0});
    const std::vector<pk::DosingRegimen> regs{fixture::daily(2.5), fixture::daily(5.0), fixture::daily(10.0),
                                              fixture::weekly(30.0)};
    inference::MCMCConfig mc;
    mc.iterations = 50000;
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
      const auto data = fixture::random_dataset(rng);
      mc.seed = 1000 + k;
      const auto q = m.summarize(m.quadrature_posterior(data), regs);
      const auto s = m.summarize(m.fit_posterior(data, mc), regs);
      for (std::size_t i = 0; i < regs.size(); ++i)
        worst = std::max({worst, std::abs(q.doses[i].p_ud - s.doses[i].p_ud), std::abs(q.doses[i].p_tt - s.doses[i].p_tt),
                          std::abs(q.doses[i].p_od - s.doses[i].p_od)});
    }
    c.add(worst < 0.01, "MCMC vs quadrature interval masses, 20 datasets: max |diff| " + f3(worst) + "  want < 0.010");
  }
  {
    Rng rng(78, {0});
    double worst = 0.0;
    for (int k = 0; k < 50; ++k) {
      const auto st = m.statistics(fixture::random_dataset(rng));
      const double b = -3.0 + 4.0 * rng.uniform(), h = 1e-4;
      const double fd = (m.log_likelihood(b + h, st) - m.log_likelihood(b - h, st)) / (2 * h);
      const double g = m.log_likelihood_gradient(b, st);
      worst = std::max(worst, std::abs(g - fd) / std::max(1.0, std::abs(g)));
    }
    c.add(worst < 1e-6, "likelihood gradient vs central differences, 50 datasets: max rel err " + std::to_string(worst) +
                            "  want < 1e-6");
  }
  {
    const auto file = io::read_scenario_file(fixture::data_path("scenarios_1_6.json"));
    sim::SimulationSettings set;
    set.design = file.design;
    set.seed = 31;
    int decisions = 0, violations = 0;
    for (auto meth : {trial::Method::titepk, trial::Method::blrm}) {
      set.design.method = meth;
      for (const auto& sc : file.scenarios)
        for (std::uint64_t i = 0; i < 20; ++i) {
          const auto t = sim::run_trial(sc, set, i);
          for (const auto& d : t.state().decisions) {
            if (d.action != trial::Action::enroll) continue;
            ++decisions;
            if (!(row(d.assessment.summary, *d.recommended).p_od < set.design.rules.feasibility_bound)) ++violations;
          }
        }
    }
    c.add(violations == 0, "EWOC: " + std::to_string(violations) + " of " + std::to_string(decisions) +
                               " assignments had p_OD >= 0.25 (240 simulated trials)");
  }
  {
    const auto file = io::read_scenario_file(fixture::data_path("scenarios_7_13.json"));
    sim::SimulationSettings set;
    set.design = file.design;
    set.design.map_mcmc = {4, 500, 500, 1, 0.25};
    set.reps = 16;
    set.seed = 9;
    bool same = true;
    for (auto meth : {trial::Method::titepk, trial::Method::blrm_map}) {
      set.design.method = meth;
      set.threads = 1;
      const auto a = sim::replicate_trials(file.scenarios[2], set);
      const auto a2 = sim::replicate_trials(file.scenarios[2], set);
      set.threads = 4;
      const auto b = sim::replicate_trials(file.scenarios[2], set);
      for (std::size_t i = 0; i < a.size(); ++i)
        for (const auto* o : {&a2[i], &b[i]})
          same = same && a[i].mtd == o->mtd && a[i].patients == o->patients && a[i].dlts == o->dlts;
    }
    inference::MCMCConfig mc;
    mc.seed = 5;
    const double init[] = {0.0}, scale[] = {1.0};
    auto f = [](std::span<const double> x) { return -0.5 * x[0] * x[0]; };
    const auto s1 = inference::sample(f, init, scale, mc);
    mc.parallel = true;
    const auto s2 = inference::sample(f, init, scale, mc);
    same = same && s1.raw() == s2.raw();
    c.add(same, "fixed seeds: repeated, serial and 4-thread replications and chains are identical");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  int reps = 1000, threads = 0;
  bool strict = false;
  std::string csv;
  app.add_option("--reps", reps, "Simulation replicates per (scenario, method, mode)");
  app.add_option("--threads", threads, "Worker threads for the simulations (0: all cores)");
  app.add_option("--csv", csv, "Write the simulation metrics here");
  app.add_flag("--strict", strict, "Exit 1 when any criterion fails");
  CLI11_PARSE(app, argc, argv);

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<Criterion> all;
  all.push_back(timed("everolimus analysis", everolimus));
  all.push_back(timed("skeleton oracle", skeletons));
  all.push_back(timed("simulation reproduction (" + std::to_string(reps) + " reps, both event modes)",
                      [&](Criterion& c) { simulation(c, reps, threads, csv); }));
  all.push_back(timed("sensitivity to T_e and DLT timing", sensitivity));
  all.push_back(timed("property suites", properties));

  const auto failed = std::count_if(all.begin(), all.end(), [](const Criterion& c) { return !c.pass(); });
  std::cout << "\n" << all.size() - failed << "/" << all.size() << " criteria passed in "
            << f3(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()) << " s\n";
  return strict && failed ? 1 : 0;
}
