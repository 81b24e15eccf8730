#include "titepk/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "titepk/errors.hpp"

namespace titepk::analysis {

std::string to_string(Strata s) { return s == Strata::sequential ? "sequential" : "single"; }

Strata strata_from_string(const std::string& s) {
  if (s == "single" || s == "daily" || s == "none") return Strata::single;
  if (s == "sequential" || s == "pooled") return Strata::sequential;
  throw InvalidInput("unknown strata '" + s + "' (single|sequential)");
}

namespace {

std::size_t target_index(const trial::TrialConfig& c, const std::string& label) {
  if (label.empty()) return c.schedules.size() - 1;
  for (std::size_t i = 0; i < c.schedules.size(); ++i)
    if (c.schedules[i].label == label) return i;
  throw ConfigurationError("schedule '" + label + "' is not configured");
}

}  // namespace

Report analyze(const trial::TrialConfig& config, const std::vector<model::PatientOutcome>& data,
               const Options& options) {
  config.validate();
  Report r;
  r.method = options.method;
  r.strata = options.strata;
  // BLRM with history is BLRM-MAP and vice versa.
  if (r.method == trial::Method::blrm && r.strata == Strata::sequential) r.method = trial::Method::blrm_map;
  if (r.method == trial::Method::blrm_map) r.strata = Strata::sequential;

  const std::size_t t = target_index(config, options.schedule);
  trial::TrialConfig cfg = config;
  cfg.method = r.method;
  if (r.strata == Strata::single)
    cfg.schedules = {config.schedules[t]};
  else
    cfg.schedules.assign(config.schedules.begin(), config.schedules.begin() + static_cast<std::ptrdiff_t>(t) + 1);
  r.schedule = cfg.schedules.back().label;
  const std::size_t phase = cfg.schedules.size() - 1;

  trial::TrialState state;
  for (const auto& p : data) {
    auto it = std::find_if(cfg.schedules.begin(), cfg.schedules.end(),
                           [&](const trial::Schedule& s) { return s.label == p.regimen.label; });
    if (it == cfg.schedules.end()) {
      const bool known = std::any_of(config.schedules.begin(), config.schedules.end(),
                                     [&](const trial::Schedule& s) { return s.label == p.regimen.label; });
      if (!known) throw DataError("patient " + p.id + ": schedule '" + p.regimen.label + "' is not configured");
      ++r.patients_ignored;
      continue;
    }
    if (std::abs(it->interval - p.regimen.interval) > 1e-9)
      throw DataError("patient " + p.id + ": interval " + std::to_string(p.regimen.interval) +
                      " does not match schedule '" + it->label + "'");
    if (r.method != trial::Method::titepk) {
      try {
        it->index_of(p.regimen.dose);
      } catch (const Error&) {
        throw DataError("patient " + p.id + ": dose " + std::to_string(p.regimen.dose) + " is not on the '" +
                        it->label + "' panel");
      }
    }
    trial::Cohort c;
    c.phase = static_cast<std::size_t>(it - cfg.schedules.begin());
    c.dose = p.regimen.dose;
    c.patients = {p};
    c.patients.back().regimen.cycle_length = it->cycle_length;
    state.cohorts.push_back(std::move(c));
    ++r.patients_used;
  }
  state.phase = phase;

  const auto& sched = cfg.schedules.back();
  if (options.engine == comparators::Engine::mcmc && r.method == trial::Method::titepk) {
    model::TitePkModel m(cfg.pk, cfg.reference, cfg.titepk_prior);
    const auto samples = m.fit_posterior(state.outcomes(), cfg.mcmc);
    std::vector<pk::DosingRegimen> regimens;
    for (double d : sched.doses) regimens.push_back(sched.regimen(d));
    r.summary = m.summarize(samples, regimens, cfg.rules.bounds);
  } else if (options.engine == comparators::Engine::mcmc && r.method == trial::Method::blrm) {
    comparators::BlrmPrior prior = cfg.blrm_prior;
    prior.ref_dose = cfg.blrm_ref_dose(phase);
    std::vector<model::PatientOutcome> pts = state.outcomes_in_phase(phase);
    const auto post = comparators::blrm_fit(comparators::aggregate(pts), prior, comparators::Engine::mcmc,
                                            cfg.quadrature, cfg.mcmc);
    r.summary = post.summary(sched.doses, sched.label, sched.interval, cfg.rules.bounds);
  } else {
    const auto a = trial::make_model(cfg)->assess(state, phase, true);
    r.summary = a.summary;
    r.prob_lowest_above = a.prob_lowest_above;
  }

  if (r.method == trial::Method::crm) {
    r.safety_stop = r.prob_lowest_above &&
                    comparators::crm_safety_stop(*r.prob_lowest_above, cfg.rules.crm_stop_confidence);
    if (!r.safety_stop) {
      r.eligible = sched.doses;
      r.recommended = trial::recommend_crm(r.summary, std::nullopt, cfg.rules.crm_target);
    }
  } else {
    r.recommended = trial::recommend_ewoc(r.summary, std::nullopt, cfg.rules, &r.eligible);
  }
  return r;
}

}  // namespace titepk::analysis
