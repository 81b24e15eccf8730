#include "titepk/sim.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

#include "titepk/errors.hpp"

namespace titepk::sim {
namespace {


Estimate proportion(double k, double n) {
  if (n <= 0) return {std::nan(""), std::nan("")};
  const double p = k / n;
  return {p, std::sqrt(p * (1.0 - p) / n)};
}

Estimate mean_of(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  if (n == 0) return {std::nan(""), std::nan("")};
  double m = 0.0;
  for (double v : x) m += v;
  m /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return {m, n > 1 ? std::sqrt(ss / (n - 1) / n) : 0.0};
}

// Ratio of sums with a delta-method standard error over trials.
Estimate ratio_of(const std::vector<double>& num, const std::vector<double>& den) {
  double sn = 0.0, sd = 0.0;
  for (std::size_t i = 0; i < num.size(); ++i) {
    sn += num[i];
    sd += den[i];
  }
  if (sd <= 0.0) return {std::nan(""), std::nan("")};
  const double r = sn / sd;
  const double n = static_cast<double>(num.size());
  const double dbar = sd / n;
  double ss = 0.0;
  for (std::size_t i = 0; i < num.size(); ++i) {
    const double e = num[i] - r * den[i];
    ss += e * e;
  }
  return {r, n > 1 ? std::sqrt(ss / (n - 1) / n) / dbar : 0.0};
}

}  // namespace

std::string to_string(EventMode m) { return m == EventMode::fixed_day ? "fixed-day" : "exposure-inverse"; }

EventMode event_mode_from_string(const std::string& s) {
  if (s == "exposure-inverse" || s == "exposure_inverse") return EventMode::exposure_inverse;
  if (s == "fixed-day" || s == "fixed_day") return EventMode::fixed_day;
  throw InvalidInput("unknown event-time mode '" + s + "'");
}

void Scenario::validate() const {
  if (schedules.empty()) throw ConfigurationError("scenario " + id + " has no schedules");
  for (const auto& s : schedules) {
    s.schedule.validate();
    if (s.true_p.size() != s.schedule.doses.size())
      throw ConfigurationError("scenario " + id + ": true probabilities do not match the panel");
    for (double p : s.true_p)
      if (!(p >= 0.0 && p < 1.0)) throw InvalidInput("scenario " + id + ": true probabilities must be in [0, 1)");
  }
}

double Scenario::true_p(std::size_t phase, double dose) const {
  const auto& s = schedules.at(phase);
  return s.true_p.at(s.schedule.index_of(dose));
}

bool Scenario::has_od(double over) const {
  for (double p : schedules.back().true_p)
    if (p > over) return true;
  return false;
}

bool Scenario::has_tt(double under, double over) const {
  for (double p : schedules.back().true_p)
    if (p >= under && p <= over) return true;
  return false;
}

model::PatientOutcome simulate_outcome(double true_p, const pk::DosingRegimen& regimen, const pk::PKParams& pk,
                                       EventMode mode, Rng& rng, double fixed_time) {
  if (!(true_p >= 0.0 && true_p < 1.0)) throw InvalidInput("true DLT probability must be in [0, 1)");
  const double u = rng.uniform();
  if (!(u < true_p)) return model::censored(regimen);
  if (mode == EventMode::fixed_day) return model::dlt_at(regimen, fixed_time);

  // AUC(t) / AUC(t*) = log(1 - u) / log(1 - p)
  const double t_end = regimen.cycle_length;
  const double target = pk::auc_effect(regimen, pk, t_end) * std::log1p(-u) / std::log1p(-true_p);
  double lo = 0.0, hi = t_end;
  for (int it = 0; it < 200 && hi - lo > 1e-10 * t_end; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (pk::auc_effect(regimen, pk, mid) < target)
      lo = mid;
    else
      hi = mid;
  }
  double t = 0.5 * (lo + hi);
  if (!(t > 0.0)) t = std::nextafter(0.0, 1.0);
  return model::dlt_at(regimen, std::min(t, t_end));
}

trial::TrialConfig design_for(const Scenario& scenario, const SimulationSettings& settings) {
  trial::TrialConfig c = settings.design;
  c.schedules.clear();
  for (const auto& s : scenario.schedules) c.schedules.push_back(s.schedule);
  return c;
}

trial::Trial run_trial(const Scenario& scenario, const SimulationSettings& settings, std::uint64_t index) {
  trial::TrialConfig cfg = design_for(scenario, settings);
  cfg.mcmc.seed = stream_key(settings.seed, {index, 1});
  cfg.map_mcmc.seed = stream_key(settings.seed, {index, 2});
  trial::Trial t(std::move(cfg));
  t.set_light(true);
  Rng rng(settings.seed, {index, 0});
  const pk::PKParams truth = settings.truth_pk.value_or(settings.design.pk);
  while (auto next = t.pending()) {
    const auto [phase, dose] = *next;
    const auto& sched = scenario.schedules[phase].schedule;
    const double p = scenario.true_p(phase, dose);
    std::vector<model::PatientOutcome> cohort;
    for (int i = 0; i < t.config().rules.cohort_size; ++i)
      cohort.push_back(simulate_outcome(p, sched.regimen(dose), truth, settings.mode, rng, settings.fixed_time));
    t.submit(std::move(cohort));
  }
  return t;
}

TrialResult summarize_trial(const Scenario& scenario, const trial::Trial& t) {
  const auto& cfg = t.config();
  const auto& st = t.state();
  TrialResult r;
  r.mtd = st.final_mtd();
  // The MTD counts only when the final schedule declared it.
  if (r.mtd && st.phases.size() != scenario.schedules.size()) r.mtd.reset();
  if (r.mtd) {
    const double p = scenario.true_p(scenario.schedules.size() - 1, *r.mtd);
    if (p > cfg.rules.bounds.over)
      r.selection = Selection::od;
    else if (p < cfg.rules.bounds.under)
      r.selection = Selection::ud;
    else
      r.selection = Selection::tt;
  }
  for (const auto& c : st.cohorts) {
    const double p = scenario.true_p(c.phase, c.dose);
    const int n = static_cast<int>(c.patients.size());
    r.patients += n;
    if (p > cfg.rules.bounds.over) r.patients_od += n;
    int d = 0;
    for (const auto& x : c.patients) d += x.dlt ? 1 : 0;
    r.dlts += d;
    if (c.phase + 1 == scenario.schedules.size()) {
      r.final_patients += n;
      r.final_dlts += d;
    }
  }
  return r;
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  unsigned workers = threads > 0 ? static_cast<unsigned>(threads) : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(n, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < n; i = next++) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<TrialResult> replicate_trials(const Scenario& scenario, const SimulationSettings& settings) {
  scenario.validate();
  if (settings.reps < 1) throw InvalidInput("reps must be positive");
  design_for(scenario, settings).validate();
  std::vector<TrialResult> results(settings.reps);
  parallel_for(results.size(), settings.threads, [&](std::size_t i) {
    try {
      results[i] = summarize_trial(scenario, run_trial(scenario, settings, i));
    } catch (const std::exception& e) {
      results[i] = TrialResult{};
      results[i].failed = true;
      results[i].error = e.what();
    }
  });
  return results;
}

Metrics aggregate(const Scenario& scenario, const SimulationSettings& settings,
                  const std::vector<TrialResult>& results) {
  Metrics m;
  m.scenario = scenario.id;
  m.method = trial::to_string(settings.design.method);
  m.mode = to_string(settings.mode);
  m.has_tt = scenario.has_tt(settings.design.rules.bounds.under, settings.design.rules.bounds.over);
  m.has_od = scenario.has_od(settings.design.rules.bounds.over);
  double tt = 0, od = 0, ud = 0, none = 0;
  std::vector<double> patients, patients_od, dlts, final_patients, final_dlts;
  for (const auto& r : results) {
    if (r.failed) {
      ++m.failures;
      continue;
    }
    ++m.reps;
    switch (r.selection) {
      case Selection::tt: ++tt; break;
      case Selection::od: ++od; break;
      case Selection::ud: ++ud; break;
      case Selection::none: ++none; break;
    }
    patients.push_back(r.patients);
    patients_od.push_back(r.patients_od);
    dlts.push_back(r.dlts);
    final_patients.push_back(r.final_patients);
    final_dlts.push_back(r.final_dlts);
  }
  const double n = m.reps;
  m.p_tt = proportion(tt, n);
  m.p_od = proportion(od, n);
  m.p_ud = proportion(ud, n);
  m.p_none = proportion(none, n);
  m.mean_patients = mean_of(patients);
  m.prop_patients_od = m.has_od ? ratio_of(patients_od, patients) : Estimate{std::nan(""), std::nan("")};
  m.prop_dlt = ratio_of(dlts, patients);
  m.mean_dlts = mean_of(dlts);
  m.mean_final_patients = mean_of(final_patients);
  m.mean_final_dlts = mean_of(final_dlts);
  return m;
}

Metrics replicate(const Scenario& scenario, const SimulationSettings& settings) {
  return aggregate(scenario, settings, replicate_trials(scenario, settings));
}

std::string to_string(TimingShift s) {
  switch (s) {
    case TimingShift::observed: return "observed";
    case TimingShift::early: return "early";
    case TimingShift::late: return "late";
  }
  return "?";
}

TimingShift timing_shift_from_string(const std::string& s) {
  if (s == "observed") return TimingShift::observed;
  if (s == "early") return TimingShift::early;
  if (s == "late") return TimingShift::late;
  throw InvalidInput("unknown timing shift '" + s + "'");
}

std::vector<model::PatientOutcome> shift_event_times(std::vector<model::PatientOutcome> data, TimingShift shift) {
  if (shift == TimingShift::observed) return data;
  const double t = shift == TimingShift::early ? kEarlyEventTime : kLateEventTime;
  for (auto& p : data)
    if (p.dlt) p.time = std::min(t, p.regimen.cycle_length);
  return data;
}

std::vector<SensitivityRow> sensitivity_sweep(const std::vector<model::PatientOutcome>& data,
                                              const std::vector<double>& half_lives, TimingShift shift,
                                              double log_keff, const pk::DosingRegimen& reference,
                                              const model::TitePkPrior& prior,
                                              const std::vector<pk::DosingRegimen>& regimens,
                                              const inference::QuadratureConfig& quad) {
  if (half_lives.empty()) throw InvalidInput("empty half-life grid");
  const auto shifted = shift_event_times(data, shift);
  std::vector<SensitivityRow> rows;
  for (double te : half_lives) {
    model::TitePkModel m(pk::PKParams::from_log_keff(te, log_keff), reference, prior);
    const auto post = m.quadrature_posterior(shifted, quad);
    for (const auto& s : m.summarize(post, regimens).doses) rows.push_back({te, shift, s});
  }
  return rows;
}

}  // namespace titepk::sim
