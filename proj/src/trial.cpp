#include "titepk/trial.hpp"

#include <algorithm>
#include <cmath>

#include "titepk/errors.hpp"
#include "titepk/rng.hpp"

namespace titepk::trial {
namespace {

bool same_dose(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); }

bool is_ewoc(Method m) { return m != Method::crm; }

const model::DoseSummary& row_for(const model::PosteriorSummary& s, double dose) {
  for (const auto& r : s.doses)
    if (same_dose(r.dose, dose)) return r;
  throw ConfigurationError("dose " + std::to_string(dose) + " missing from the posterior summary");
}

model::PosteriorSummary light_rows(const Schedule& sched, auto&& p_ud, auto&& p_od) {
  model::PosteriorSummary out;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (double d : sched.doses) {
    model::DoseSummary s;
    s.label = sched.label;
    s.dose = d;
    s.interval = sched.interval;
    s.median = s.q025 = s.q25 = s.q75 = s.q975 = nan;
    s.p_ud = p_ud(d);
    s.p_od = p_od(d);
    s.p_tt = 1.0 - s.p_ud - s.p_od;
    out.doses.push_back(s);
  }
  return out;
}

comparators::BinaryDoseData phase_counts(const TrialState& state, std::size_t phase) {
  comparators::BinaryDoseData out;
  for (const auto& c : state.cohorts) {
    if (c.phase != phase) continue;
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& x) { return same_dose(x.dose, c.dose); });
    if (it == out.end()) {
      out.push_back({c.dose, {}, 0, 0});
      it = out.end() - 1;
    }
    for (const auto& p : c.patients) {
      ++it->treated;
      if (p.dlt) ++it->dlts;
    }
  }
  return out;
}

class TitePkAdapter final : public DoseModel {
 public:
  explicit TitePkAdapter(const TrialConfig& c) : config_(c), model_(c.pk, c.reference, c.titepk_prior) {}

  Assessment assess(const TrialState& state, std::size_t phase, bool full) const override {
    const auto data = state.outcomes();
    const auto post = model_.quadrature_posterior(data, config_.quadrature);
    const Schedule& sched = config_.schedules[phase];
    Assessment a;
    a.phase = phase;
    if (full) {
      std::vector<pk::DosingRegimen> regimens;
      for (double d : sched.doses) regimens.push_back(sched.regimen(d));
      a.summary = model_.summarize(post, regimens, config_.rules.bounds);
    } else {
      const auto& b = config_.rules.bounds;
      a.summary = light_rows(
          sched, [&](double d) { return 1.0 - model_.prob_above(post, sched.regimen(d), b.under); },
          [&](double d) { return model_.prob_above(post, sched.regimen(d), b.over); });
      a.summary.engine = "quadrature";
    }
    return a;
  }

 private:
  TrialConfig config_;
  model::TitePkModel model_;
};

model::PosteriorSummary blrm_summary(const comparators::BlrmPosterior& post, const Schedule& sched,
                                     const model::IntervalBounds& b, bool full) {
  if (full) return post.summary(sched.doses, sched.label, sched.interval, b);
  auto s = light_rows(
      sched, [&](double d) { return post.prob_below(d, b.under); }, [&](double d) { return post.prob_above(d, b.over); });
  s.engine = post.from_grid() ? "quadrature" : "mcmc";
  if (post.diagnostics()) {
    s.max_rhat = post.diagnostics()->max_rhat;
    s.flagged = post.diagnostics()->fail;
  }
  return s;
}

class BlrmAdapter : public DoseModel {
 public:
  explicit BlrmAdapter(const TrialConfig& c) : config_(c) {}

  Assessment assess(const TrialState& state, std::size_t phase, bool full) const override {
    comparators::BlrmPrior prior = config_.blrm_prior;
    prior.ref_dose = config_.blrm_ref_dose(phase);
    const auto post = comparators::blrm_fit(phase_counts(state, phase), prior, comparators::Engine::quadrature,
                                            config_.quadrature);
    Assessment a;
    a.phase = phase;
    a.summary = blrm_summary(post, config_.schedules[phase], config_.rules.bounds, full);
    return a;
  }

 protected:
  TrialConfig config_;
};

class BlrmMapAdapter final : public BlrmAdapter {
 public:
  using BlrmAdapter::BlrmAdapter;

  Assessment assess(const TrialState& state, std::size_t phase, bool full) const override {
    if (phase == 0) return BlrmAdapter::assess(state, phase, full);
    std::vector<comparators::Stratum> history;
    for (std::size_t p = 0; p < phase; ++p) history.push_back({phase_counts(state, p), config_.blrm_ref_dose(p)});
    inference::MCMCConfig mcmc = config_.map_mcmc;
    mcmc.seed = stream_key(config_.map_mcmc.seed, {phase, state.cohorts.size()});
    const auto post = comparators::blrm_map_fit(history, {phase_counts(state, phase), config_.blrm_ref_dose(phase)},
                                                config_.blrm_prior, config_.heterogeneity, mcmc);
    Assessment a;
    a.phase = phase;
    a.summary = blrm_summary(post, config_.schedules[phase], config_.rules.bounds, full);
    return a;
  }
};

class CrmAdapter final : public DoseModel {
 public:
  explicit CrmAdapter(const TrialConfig& c) : config_(c) {}

  Assessment assess(const TrialState& state, std::size_t phase, bool) const override {
    const auto cfg = config_.crm_config(phase);
    auto data = phase_counts(state, phase);
    // Later schedules bridge from the previous one (non-conformant B-CRM stand-in).
    const auto post = phase == 0 ? comparators::crm_fit(cfg, data, config_.quadrature)
                                 : comparators::bcrm_lite_fit(config_.crm_config(phase - 1),
                                                              phase_counts(state, phase - 1), cfg, data,
                                                              config_.quadrature);
    const Schedule& sched = config_.schedules[phase];
    Assessment a;
    a.phase = phase;
    a.summary = post.summary(sched.label, sched.interval, config_.rules.bounds);
    a.prob_lowest_above = post.prob_above(0, config_.rules.crm_stop_threshold);
    return a;
  }

 private:
  TrialConfig config_;
};

}  // namespace

// ---------------------------------------------------------------------------

void EscalationRules::validate() const {
  if (cohort_size < 1 || max_patients < 1 || min_patients_for_mtd < 1 || min_at_mtd < 1 || crm_sample_size < 1)
    throw InvalidInput("escalation rule counts must be positive");
  if (!(feasibility_bound > 0.0 && feasibility_bound < 1.0)) throw InvalidInput("feasibility bound must be in (0, 1)");
  if (!(max_escalation_factor >= 1.0)) throw InvalidInput("escalation factor must be at least 1");
  if (!(bounds.under > 0.0 && bounds.under < bounds.over && bounds.over < 1.0))
    throw InvalidInput("target interval must satisfy 0 < under < over < 1");
  if (!(crm_target > 0.0 && crm_target < 1.0)) throw InvalidInput("CRM target must be in (0, 1)");
  if (!(crm_stop_confidence > 0.0 && crm_stop_confidence < 1.0)) throw InvalidInput("CRM confidence must be in (0, 1)");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::titepk: return "titepk";
    case Method::crm: return "crm";
    case Method::blrm: return "blrm";
    case Method::blrm_map: return "blrm-map";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  if (s == "titepk" || s == "tite-pk") return Method::titepk;
  if (s == "crm") return Method::crm;
  if (s == "blrm") return Method::blrm;
  if (s == "blrm-map" || s == "blrm_map" || s == "map") return Method::blrm_map;
  throw InvalidInput("unknown model '" + s + "'");
}

std::string to_string(Action a) {
  switch (a) {
    case Action::enroll: return "enroll";
    case Action::mtd: return "mtd";
    case Action::stop_toxicity: return "stop-toxicity";
    case Action::stop_safety: return "stop-safety";
    case Action::stop_cap: return "stop-cap";
    case Action::stop_sequence: return "stop-sequence";
    case Action::done: return "done";
  }
  return "?";
}

std::size_t Schedule::index_of(double dose) const {
  for (std::size_t i = 0; i < doses.size(); ++i)
    if (same_dose(doses[i], dose)) return i;
  throw ConfigurationError("dose " + std::to_string(dose) + " is not on the " + label + " panel");
}

void Schedule::validate() const {
  if (doses.empty()) throw ConfigurationError("schedule " + label + " has an empty dose panel");
  for (std::size_t i = 0; i < doses.size(); ++i) {
    if (!(doses[i] > 0.0)) throw InvalidInput("panel doses must be positive");
    if (i > 0 && !(doses[i] > doses[i - 1])) throw InvalidInput("panel doses must be strictly increasing");
  }
  regimen(doses.front()).validate();
  if (blrm_ref_dose < 0.0) throw InvalidInput("BLRM reference dose must be non-negative");
}

void TrialConfig::validate() const {
  if (schedules.empty()) throw ConfigurationError("no schedules configured");
  for (const auto& s : schedules) s.validate();
  rules.validate();
  pk.validate();
  reference.validate();
  titepk_prior.validate();
  blrm_prior.validate();
  heterogeneity.validate();
  quadrature.validate();
  mcmc.validate();
  map_mcmc.validate();
}

double TrialConfig::blrm_ref_dose(std::size_t schedule) const {
  const auto& s = schedules.at(schedule);
  if (s.blrm_ref_dose > 0.0) return s.blrm_ref_dose;
  return blrm_prior.ref_dose;
}

comparators::CrmConfig TrialConfig::crm_config(std::size_t schedule) const {
  const auto& s = schedules.at(schedule);
  const int k = static_cast<int>(s.doses.size());
  comparators::CrmConfig c;
  c.skeleton = comparators::lee_cheung_skeleton(k, crm.target, crm.halfwidth, crm.nu > 0 ? crm.nu : (k + 1) / 2);
  c.doses = s.doses;
  c.prior_sd = crm.prior_sd;
  c.scaling = crm.scaling;
  return c;
}

int TrialState::patients_in_phase(std::size_t p) const {
  int n = 0;
  for (const auto& c : cohorts)
    if (c.phase == p) n += static_cast<int>(c.patients.size());
  return n;
}

int TrialState::patients_at(std::size_t p, double dose) const {
  int n = 0;
  for (const auto& c : cohorts)
    if (c.phase == p && same_dose(c.dose, dose)) n += static_cast<int>(c.patients.size());
  return n;
}

int TrialState::total_patients() const {
  int n = 0;
  for (const auto& c : cohorts) n += static_cast<int>(c.patients.size());
  return n;
}

std::vector<model::PatientOutcome> TrialState::outcomes() const {
  std::vector<model::PatientOutcome> out;
  for (const auto& c : cohorts) out.insert(out.end(), c.patients.begin(), c.patients.end());
  return out;
}

std::vector<model::PatientOutcome> TrialState::outcomes_in_phase(std::size_t p) const {
  std::vector<model::PatientOutcome> out;
  for (const auto& c : cohorts)
    if (c.phase == p) out.insert(out.end(), c.patients.begin(), c.patients.end());
  return out;
}

std::optional<double> TrialState::final_mtd() const {
  if (!finished || phases.empty()) return std::nullopt;
  return phases.back().mtd;
}

std::unique_ptr<DoseModel> make_model(const TrialConfig& config) {
  switch (config.method) {
    case Method::titepk: return std::make_unique<TitePkAdapter>(config);
    case Method::crm: return std::make_unique<CrmAdapter>(config);
    case Method::blrm: return std::make_unique<BlrmAdapter>(config);
    case Method::blrm_map: return std::make_unique<BlrmMapAdapter>(config);
  }
  throw ConfigurationError("unknown method");
}

std::optional<double> recommend_ewoc(const model::PosteriorSummary& summary, std::optional<double> current,
                                     const EscalationRules& rules, std::vector<double>* eligible) {
  if (summary.doses.empty()) throw ConfigurationError("empty dose panel");
  const double cap = current ? *current * rules.max_escalation_factor : std::numeric_limits<double>::infinity();
  std::optional<double> best;
  if (eligible) eligible->clear();
  for (const auto& r : summary.doses) {
    if (!(r.p_od < rules.feasibility_bound)) continue;
    if (eligible) eligible->push_back(r.dose);
    if (r.dose <= cap * (1.0 + 1e-12) && (!best || r.dose > *best)) best = r.dose;
  }
  return best;
}

std::optional<double> recommend_crm(const model::PosteriorSummary& summary, std::optional<double> current,
                                    double target) {
  if (summary.doses.empty()) throw ConfigurationError("empty dose panel");
  std::vector<double> medians;
  std::optional<std::size_t> cur;
  for (std::size_t i = 0; i < summary.doses.size(); ++i) {
    medians.push_back(summary.doses[i].median);
    if (current && same_dose(summary.doses[i].dose, *current)) cur = i;
  }
  return summary.doses[comparators::crm_recommend(medians, target, cur)].dose;
}

bool declare_mtd(const TrialState& state, std::size_t phase, double dose, const EscalationRules& rules) {
  return state.patients_at(phase, dose) >= rules.min_at_mtd &&
         state.patients_in_phase(phase) >= rules.min_patients_for_mtd;
}

// ---------------------------------------------------------------------------

Trial::Trial(TrialConfig config) : config_(std::move(config)) {
  config_.validate();
  model_ = make_model(config_);
  start_phase(0, config_.schedules[0].doses.front());
}

// Adapters hold only configuration, so a copy rebuilds its own.
Trial::Trial(const Trial& other)
    : config_(other.config_), model_(make_model(other.config_)), state_(other.state_), light_(other.light_) {}

Trial& Trial::operator=(const Trial& other) {
  if (this != &other) *this = Trial(other);
  return *this;
}

std::optional<std::pair<std::size_t, double>> Trial::pending() const {
  if (state_.finished || !state_.current_dose) return std::nullopt;
  return std::make_pair(state_.phase, *state_.current_dose);
}

Assessment Trial::assess(bool full) const { return model_->assess(state_, state_.phase, full); }

void Trial::start_phase(std::size_t phase, std::optional<double> start) {
  state_.phase = phase;
  state_.current_dose.reset();
  state_.phases.push_back({});
  const Schedule& sched = config_.schedules[phase];

  // Map the start onto this panel: highest panel dose not above it.
  double dose = sched.doses.front();
  if (start)
    for (double d : sched.doses)
      if (d <= *start * (1.0 + 1e-12)) dose = d;

  Decision d;
  d.phase = phase;
  d.assessment = model_->assess(state_, phase, !light_);
  if (!is_ewoc(config_.method)) {
    d.recommended = dose;
    d.action = Action::enroll;
    d.reason = "start";
  } else {
    const auto& s = d.assessment.summary;
    std::vector<double> eligible;
    recommend_ewoc(s, std::nullopt, config_.rules, &eligible);
    d.eligible = eligible;
    if (row_for(s, dose).p_od < config_.rules.feasibility_bound) {
      d.recommended = dose;
      d.action = Action::enroll;
      d.reason = "start";
    } else {
      // De-escalate from an ineligible start.
      std::optional<double> lower;
      for (double e : eligible)
        if (e < dose) lower = e;
      if (lower) {
        d.recommended = lower;
        d.action = Action::enroll;
        d.reason = "start dose not EWOC-eligible";
      } else {
        d.action = Action::stop_toxicity;
        d.reason = "no EWOC-eligible dose";
      }
    }
  }
  apply(std::move(d));
}

Decision Trial::decide(const TrialState& state) const {
  const std::size_t p = state.phase;
  const auto& rules = config_.rules;
  Decision d;
  d.phase = p;
  d.after_patients = state.patients_in_phase(p);
  d.assessment = model_->assess(state, p, !light_ || config_.method == Method::crm);
  const auto& s = d.assessment.summary;

  if (!is_ewoc(config_.method)) {
    if (comparators::crm_safety_stop(d.assessment.prob_lowest_above.value_or(0.0), rules.crm_stop_confidence)) {
      d.action = Action::stop_safety;
      d.reason = "lowest dose too toxic";
      return d;
    }
    if (d.after_patients >= rules.crm_sample_size) {
      d.recommended = recommend_crm(s, std::nullopt, rules.crm_target);
      d.action = Action::mtd;
      d.reason = "sample size reached";
      return d;
    }
    d.recommended = recommend_crm(s, state.current_dose, rules.crm_target);
    d.action = Action::enroll;
    return d;
  }

  d.recommended = recommend_ewoc(s, state.current_dose, rules, &d.eligible);
  if (!d.recommended) {
    d.action = Action::stop_toxicity;
    d.reason = "no EWOC-eligible dose";
  } else if (declare_mtd(state, p, *d.recommended, rules)) {
    d.action = Action::mtd;
    d.reason = "MTD conditions met";
  } else if (d.after_patients + rules.cohort_size > rules.max_patients) {
    d.action = Action::stop_cap;
    d.reason = "patient cap reached without MTD";
    d.recommended.reset();
  } else {
    d.action = Action::enroll;
  }
  return d;
}

void Trial::apply(Decision d) {
  state_.decisions.push_back(std::move(d));
  const Decision& last = state_.decisions.back();
  if (last.action == Action::enroll) {
    state_.current_dose = last.recommended;
    return;
  }
  auto& phase = state_.phases.back();
  phase.patients = state_.patients_in_phase(last.phase);
  phase.outcome = last.action;
  if (last.action == Action::mtd) phase.mtd = last.recommended;
  state_.current_dose.reset();

  const std::size_t next = last.phase + 1;
  if (next >= config_.schedules.size()) {
    state_.finished = true;
    return;
  }
  if (phase.mtd) {
    start_phase(next, phase.mtd);
  } else if (config_.rules.continue_without_mtd) {
    start_phase(next, std::nullopt);
  } else {
    state_.finished = true;
  }
}

void Trial::check_patients(const std::vector<model::PatientOutcome>& patients) const {
  if (patients.empty()) throw InvalidInput("empty cohort");
  const Schedule& sched = config_.schedules[state_.phase];
  const double dose = patients.front().regimen.dose;
  sched.index_of(dose);
  for (const auto& p : patients) {
    if (!same_dose(p.regimen.dose, dose)) throw InvalidInput("all patients in a cohort must share one dose");
    if (std::abs(p.regimen.interval - sched.interval) > 1e-9 || p.regimen.label != sched.label)
      throw InvalidInput("cohort regimen does not match the active schedule " + sched.label);
    if (!std::isfinite(p.time) || !(p.time > 0.0) || p.time > p.regimen.cycle_length)
      throw InvalidInput("patient time must lie in (0, cycle length]");
  }
}

const Decision& Trial::submit(std::vector<model::PatientOutcome> patients) {
  if (state_.finished) throw InvalidInput("trial is finished");
  check_patients(patients);
  const double dose = patients.front().regimen.dose;
  state_.cohorts.push_back({state_.phase, dose, std::move(patients)});
  apply(decide(state_));
  return state_.decisions.back();
}

void Trial::advance_to(std::size_t phase) {
  if (state_.finished) throw InvalidInput("trial is finished");
  if (phase != state_.phase + 1 || phase >= config_.schedules.size())
    throw InvalidInput("can only advance to the next configured schedule");
  auto& current = state_.phases.back();
  current.patients = state_.patients_in_phase(state_.phase);
  current.outcome = Action::done;
  start_phase(phase, std::nullopt);
}

Decision Trial::whatif(std::vector<model::PatientOutcome> patients) const {
  if (state_.finished) throw InvalidInput("trial is finished");
  check_patients(patients);
  TrialState copy = state_;
  const double dose = patients.front().regimen.dose;
  copy.cohorts.push_back({copy.phase, dose, std::move(patients)});
  return decide(copy);
}

}  // namespace titepk::trial
