#include "titepk/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "titepk/errors.hpp"

namespace titepk::io {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::string num(double v) {
  std::ostringstream o;
  o << v;
  return o.str();
}

double parse_number(const std::string& s, const std::string& what, const std::string& where) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || !std::isfinite(v))
    throw DataError(where + ": " + what + " '" + s + "' is not a number");
  return v;
}

// Reads an object while remembering which keys were consumed, so that typos
// in configuration files are reported instead of silently ignored.
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigurationError(path_ + ": expected an object");
  }
  ~Obj() = default;

  bool has(const std::string& k) {
    seen_.insert(k);
    return j_.contains(k) && !j_.at(k).is_null();
  }
  const json& at(const std::string& k) {
    seen_.insert(k);
    return j_.at(k);
  }
  std::string sub(const std::string& k) const { return path_ + "." + k; }

  template <class T>
  void get(const std::string& k, T& out) {
    if (!has(k)) return;
    try {
      out = j_.at(k).get<T>();
    } catch (const json::exception&) {
      throw ConfigurationError(sub(k) + ": wrong type");
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigurationError(path_ + ": unknown key '" + it.key() + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_quadrature(const json& j, const std::string& path, inference::QuadratureConfig& q) {
  Obj o(j, path);
  o.get("range_sd", q.range_sd);
  o.get("rel_tol", q.rel_tol);
  o.get("max_panels", q.max_panels);
  o.get("grid_nodes", q.grid_nodes);
  o.get("boundary_fraction", q.boundary_fraction);
  o.get("boundary_mass", q.boundary_mass);
  o.get("max_widen", q.max_widen);
  o.get("widen_factor", q.widen_factor);
  o.finish();
}

void read_mcmc(const json& j, const std::string& path, inference::MCMCConfig& m) {
  Obj o(j, path);
  o.get("chains", m.chains);
  o.get("warmup", m.warmup);
  o.get("iterations", m.iterations);
  o.get("seed", m.seed);
  o.get("target_acceptance", m.target_acceptance);
  o.get("init_spread", m.init_spread);
  o.get("parallel", m.parallel);
  o.finish();
}

json mcmc_json(const inference::MCMCConfig& m) {
  return {{"chains", m.chains},
          {"warmup", m.warmup},
          {"iterations", m.iterations},
          {"seed", m.seed},
          {"target_acceptance", m.target_acceptance},
          {"init_spread", m.init_spread},
          {"parallel", m.parallel}};
}

trial::Schedule read_schedule(const json& j, const std::string& path, std::vector<double>* true_p = nullptr) {
  Obj o(j, path);
  trial::Schedule s;
  o.get("label", s.label);
  o.get("interval", s.interval);
  o.get("cycle_length", s.cycle_length);
  o.get("doses", s.doses);
  o.get("blrm_ref_dose", s.blrm_ref_dose);
  if (true_p) o.get("true_p", *true_p);
  o.finish();
  if (s.label.empty()) throw ConfigurationError(path + ": schedule needs a label");
  return s;
}

json schedule_json(const trial::Schedule& s) {
  json j{{"label", s.label}, {"interval", s.interval}, {"cycle_length", s.cycle_length}, {"doses", s.doses}};
  if (s.blrm_ref_dose > 0.0) j["blrm_ref_dose"] = s.blrm_ref_dose;
  return j;
}

std::string scaling_name(comparators::CrmScaling s) {
  return s == comparators::CrmScaling::skeleton ? "skeleton" : "prior_mean";
}

}  // namespace

std::vector<model::PatientOutcome> read_dataset(std::istream& in, double cycle_length, const std::string& source) {
  static const std::vector<std::string> required{"patient_id", "schedule", "dose", "interval", "time", "dlt"};
  std::string line;
  int lineno = 0;
  std::map<std::string, std::size_t> col;
  std::vector<model::PatientOutcome> out;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (trim(line).empty() || trim(line)[0] == '#') continue;
    const auto fields = split_csv(line);
    const std::string where = source + ":" + std::to_string(lineno);
    if (col.empty()) {
      for (std::size_t i = 0; i < fields.size(); ++i) col[fields[i]] = i;
      for (const auto& r : required)
        if (!col.count(r)) throw DataError(where + ": header is missing column '" + r + "'");
      continue;
    }
    if (fields.size() != col.size())
      throw DataError(where + ": expected " + std::to_string(col.size()) + " fields, found " +
                      std::to_string(fields.size()));
    auto field = [&](const std::string& name) -> const std::string& { return fields[col.at(name)]; };
    model::PatientOutcome p;
    p.id = field("patient_id");
    if (p.id.empty()) throw DataError(where + ": empty patient_id");
    if (!ids.insert(p.id).second) throw DataError(where + ": duplicate patient_id '" + p.id + "'");
    p.regimen.label = field("schedule");
    p.regimen.dose = parse_number(field("dose"), "dose", where);
    p.regimen.interval = parse_number(field("interval"), "interval", where);
    p.regimen.cycle_length = cycle_length;
    p.time = parse_number(field("time"), "time", where);
    const std::string& d = field("dlt");
    if (d == "1")
      p.dlt = true;
    else if (d == "0")
      p.dlt = false;
    else
      throw DataError(where + ": dlt must be 0 or 1, found '" + d + "'");
    if (!(p.regimen.dose > 0.0)) throw DataError(where + ": dose must be positive");
    if (!(p.regimen.interval > 0.0) || p.regimen.interval > cycle_length)
      throw DataError(where + ": interval must lie in (0, cycle length]");
    if (!(p.time > 0.0) || p.time > cycle_length)
      throw DataError(where + ": time must lie in (0, " + num(cycle_length) + "]");
    out.push_back(std::move(p));
  }
  // An empty file is an empty dataset.
  return out;
}

std::vector<model::PatientOutcome> read_dataset_file(const std::string& path, double cycle_length) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return read_dataset(in, cycle_length, path);
}

void write_dataset(std::ostream& out, const std::vector<model::PatientOutcome>& data) {
  out << "patient_id,schedule,dose,interval,time,dlt\n";
  for (const auto& p : data)
    out << p.id << ',' << p.regimen.label << ',' << p.regimen.dose << ',' << p.regimen.interval << ',' << p.time
        << ',' << (p.dlt ? 1 : 0) << '\n';
}

trial::TrialConfig config_from_json(const json& j) {
  trial::TrialConfig c;
  Obj o(j, "config");
  if (o.has("method")) {
    try {
      c.method = trial::method_from_string(o.at("method").get<std::string>());
    } catch (const json::exception&) {
      throw ConfigurationError("config.method: wrong type");
    }
  }
  if (o.has("pk")) {
    Obj p(o.at("pk"), o.sub("pk"));
    double te = c.pk.half_life, log_keff = std::log(c.pk.k_eff);
    p.get("half_life", te);
    p.get("T_e", te);
    p.get("log_keff", log_keff);
    p.finish();
    c.pk = pk::PKParams::from_log_keff(te, log_keff);
  }
  if (o.has("reference")) {
    Obj r(o.at("reference"), o.sub("reference"));
    r.get("dose", c.reference.dose);
    r.get("interval", c.reference.interval);
    r.get("cycle_length", c.reference.cycle_length);
    r.get("label", c.reference.label);
    r.finish();
  }
  if (o.has("titepk_prior")) {
    Obj r(o.at("titepk_prior"), o.sub("titepk_prior"));
    r.get("median", c.titepk_prior.median_p);
    r.get("sd", c.titepk_prior.sd);
    r.finish();
  }
  if (o.has("blrm_prior")) {
    Obj r(o.at("blrm_prior"), o.sub("blrm_prior"));
    r.get("m1", c.blrm_prior.m1);
    if (r.has("median")) c.blrm_prior.m1 = model::logit(r.at("median").get<double>());
    r.get("m2", c.blrm_prior.m2);
    r.get("s1", c.blrm_prior.s1);
    r.get("s2", c.blrm_prior.s2);
    r.get("rho", c.blrm_prior.rho);
    r.get("ref_dose", c.blrm_prior.ref_dose);
    r.finish();
  }
  if (o.has("heterogeneity")) {
    Obj r(o.at("heterogeneity"), o.sub("heterogeneity"));
    r.get("tau_scale_a", c.heterogeneity.tau_scale_a);
    r.get("tau_scale_b", c.heterogeneity.tau_scale_b);
    if (r.has("fixed_tau")) {
      std::vector<double> t;
      r.get("fixed_tau", t);
      if (t.size() != 2) throw ConfigurationError(r.sub("fixed_tau") + ": expected two values");
      c.heterogeneity.fixed_tau = std::array<double, 2>{t[0], t[1]};
    }
    r.finish();
  }
  if (o.has("crm")) {
    Obj r(o.at("crm"), o.sub("crm"));
    r.get("target", c.crm.target);
    r.get("halfwidth", c.crm.halfwidth);
    r.get("nu", c.crm.nu);
    r.get("prior_sd", c.crm.prior_sd);
    if (r.has("scaling")) {
      const auto s = r.at("scaling").get<std::string>();
      if (s == "skeleton")
        c.crm.scaling = comparators::CrmScaling::skeleton;
      else if (s == "prior_mean")
        c.crm.scaling = comparators::CrmScaling::prior_mean;
      else
        throw ConfigurationError(r.sub("scaling") + ": expected 'skeleton' or 'prior_mean'");
    }
    r.finish();
  }
  if (o.has("rules")) {
    Obj r(o.at("rules"), o.sub("rules"));
    auto& x = c.rules;
    r.get("cohort_size", x.cohort_size);
    r.get("max_patients", x.max_patients);
    r.get("min_patients_for_mtd", x.min_patients_for_mtd);
    r.get("min_at_mtd", x.min_at_mtd);
    r.get("feasibility_bound", x.feasibility_bound);
    r.get("max_escalation_factor", x.max_escalation_factor);
    if (r.has("interval")) {
      std::vector<double> b;
      r.get("interval", b);
      if (b.size() != 2) throw ConfigurationError(r.sub("interval") + ": expected [under, over]");
      x.bounds = {b[0], b[1]};
    }
    r.get("crm_target", x.crm_target);
    r.get("crm_sample_size", x.crm_sample_size);
    r.get("crm_stop_threshold", x.crm_stop_threshold);
    r.get("crm_stop_confidence", x.crm_stop_confidence);
    r.get("continue_without_mtd", x.continue_without_mtd);
    r.finish();
  }
  if (o.has("quadrature")) read_quadrature(o.at("quadrature"), o.sub("quadrature"), c.quadrature);
  if (o.has("mcmc")) read_mcmc(o.at("mcmc"), o.sub("mcmc"), c.mcmc);
  if (o.has("map_mcmc")) read_mcmc(o.at("map_mcmc"), o.sub("map_mcmc"), c.map_mcmc);
  if (o.has("schedules")) {
    const auto& arr = o.at("schedules");
    if (!arr.is_array()) throw ConfigurationError("config.schedules: expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i)
      c.schedules.push_back(read_schedule(arr[i], "config.schedules[" + std::to_string(i) + "]"));
  }
  o.finish();
  return c;
}

json config_to_json(const trial::TrialConfig& c) {
  json j;
  j["method"] = trial::to_string(c.method);
  j["pk"] = {{"half_life", c.pk.half_life}, {"log_keff", std::log(c.pk.k_eff)}};
  j["reference"] = {{"dose", c.reference.dose},
                    {"interval", c.reference.interval},
                    {"cycle_length", c.reference.cycle_length},
                    {"label", c.reference.label}};
  j["titepk_prior"] = {{"median", c.titepk_prior.median_p}, {"sd", c.titepk_prior.sd}};
  const auto& b = c.blrm_prior;
  j["blrm_prior"] = {{"m1", b.m1}, {"m2", b.m2}, {"s1", b.s1}, {"s2", b.s2}, {"rho", b.rho}, {"ref_dose", b.ref_dose}};
  j["heterogeneity"] = {{"tau_scale_a", c.heterogeneity.tau_scale_a}, {"tau_scale_b", c.heterogeneity.tau_scale_b}};
  if (c.heterogeneity.fixed_tau)
    j["heterogeneity"]["fixed_tau"] = {(*c.heterogeneity.fixed_tau)[0], (*c.heterogeneity.fixed_tau)[1]};
  j["crm"] = {{"target", c.crm.target},
              {"halfwidth", c.crm.halfwidth},
              {"nu", c.crm.nu},
              {"prior_sd", c.crm.prior_sd},
              {"scaling", scaling_name(c.crm.scaling)}};
  const auto& r = c.rules;
  j["rules"] = {{"cohort_size", r.cohort_size},
                {"max_patients", r.max_patients},
                {"min_patients_for_mtd", r.min_patients_for_mtd},
                {"min_at_mtd", r.min_at_mtd},
                {"feasibility_bound", r.feasibility_bound},
                {"max_escalation_factor", r.max_escalation_factor},
                {"interval", {r.bounds.under, r.bounds.over}},
                {"crm_target", r.crm_target},
                {"crm_sample_size", r.crm_sample_size},
                {"crm_stop_threshold", r.crm_stop_threshold},
                {"crm_stop_confidence", r.crm_stop_confidence},
                {"continue_without_mtd", r.continue_without_mtd}};
  const auto& q = c.quadrature;
  j["quadrature"] = {{"range_sd", q.range_sd},
                     {"rel_tol", q.rel_tol},
                     {"max_panels", q.max_panels},
                     {"grid_nodes", q.grid_nodes},
                     {"boundary_fraction", q.boundary_fraction},
                     {"boundary_mass", q.boundary_mass},
                     {"max_widen", q.max_widen},
                     {"widen_factor", q.widen_factor}};
  j["mcmc"] = mcmc_json(c.mcmc);
  j["map_mcmc"] = mcmc_json(c.map_mcmc);
  j["schedules"] = json::array();
  for (const auto& s : c.schedules) j["schedules"].push_back(schedule_json(s));
  return j;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigurationError(path + ": " + e.what());
  }
}

trial::TrialConfig read_config_file(const std::string& path) { return config_from_json(read_json_file(path)); }

ScenarioFile scenarios_from_json(const json& j) {
  ScenarioFile f;
  Obj o(j, "scenarios_file");
  if (o.has("design")) f.design = config_from_json(o.at("design"));
  o.get("seed", f.seed);
  o.get("reps", f.reps);
  if (o.has("mode")) f.mode = sim::event_mode_from_string(o.at("mode").get<std::string>());
  if (!o.has("scenarios") || !o.at("scenarios").is_array())
    throw ConfigurationError("scenarios_file.scenarios: expected an array");
  const auto& arr = o.at("scenarios");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string path = "scenarios[" + std::to_string(i) + "]";
    Obj s(arr[i], path);
    sim::Scenario sc;
    if (s.has("id")) {
      const auto& id = s.at("id");
      sc.id = id.is_string() ? id.get<std::string>() : id.dump();
    }
    if (!s.has("schedules") || !s.at("schedules").is_array())
      throw ConfigurationError(path + ".schedules: expected an array");
    const auto& sch = s.at("schedules");
    for (std::size_t k = 0; k < sch.size(); ++k) {
      sim::ScheduleTruth t;
      t.schedule = read_schedule(sch[k], path + ".schedules[" + std::to_string(k) + "]", &t.true_p);
      sc.schedules.push_back(std::move(t));
    }
    s.finish();
    sc.validate();
    f.scenarios.push_back(std::move(sc));
  }
  o.finish();
  if (f.reps < 1) throw ConfigurationError("scenarios_file.reps must be positive");
  return f;
}

ScenarioFile read_scenario_file(const std::string& path) { return scenarios_from_json(read_json_file(path)); }

json scenario_to_json(const sim::Scenario& s) {
  json j{{"id", s.id}, {"schedules", json::array()}};
  for (const auto& t : s.schedules) {
    json x = schedule_json(t.schedule);
    x["true_p"] = t.true_p;
    j["schedules"].push_back(x);
  }
  return j;
}

json patient_to_json(const model::PatientOutcome& p) {
  return {{"id", p.id},
          {"schedule", p.regimen.label},
          {"dose", p.regimen.dose},
          {"interval", p.regimen.interval},
          {"time", p.time},
          {"dlt", p.dlt}};
}

model::PatientOutcome patient_from_json(const json& j, double cycle_length) {
  Obj o(j, "patient");
  model::PatientOutcome p;
  p.regimen.cycle_length = cycle_length;
  p.time = cycle_length;
  o.get("id", p.id);
  o.get("schedule", p.regimen.label);
  o.get("dose", p.regimen.dose);
  o.get("interval", p.regimen.interval);
  o.get("time", p.time);
  if (o.has("dlt")) {
    const auto& d = o.at("dlt");
    if (d.is_boolean())
      p.dlt = d.get<bool>();
    else if (d.is_number_integer() && (d.get<int>() == 0 || d.get<int>() == 1))
      p.dlt = d.get<int>() == 1;
    else
      throw ConfigurationError("patient.dlt: expected a boolean or 0/1");
  }
  o.finish();
  if (!o.has("dose")) throw ConfigurationError("patient.dose is required");
  return p;
}

json summary_to_json(const model::PosteriorSummary& s) {
  json rows = json::array();
  for (const auto& d : s.doses) {
    json r{{"label", d.label}, {"dose", d.dose},   {"interval", d.interval},
           {"p_ud", d.p_ud},   {"p_tt", d.p_tt},   {"p_od", d.p_od}};
    // Light summaries carry no quantiles.
    if (std::isfinite(d.median)) {
      r["median"] = d.median;
      r["q025"] = d.q025;
      r["q25"] = d.q25;
      r["q75"] = d.q75;
      r["q975"] = d.q975;
    }
    rows.push_back(r);
  }
  json j{{"engine", s.engine}, {"doses", rows}, {"flagged", s.flagged}};
  if (std::isfinite(s.max_rhat)) j["max_rhat"] = s.max_rhat;
  return j;
}

json decision_to_json(const trial::Decision& d) {
  json j{{"phase", d.phase},
         {"after_patients", d.after_patients},
         {"action", trial::to_string(d.action)},
         {"reason", d.reason},
         {"eligible", d.eligible},
         {"summary", summary_to_json(d.assessment.summary)}};
  j["recommended"] = d.recommended ? json(*d.recommended) : json(nullptr);
  if (d.assessment.prob_lowest_above) j["prob_lowest_above"] = *d.assessment.prob_lowest_above;
  return j;
}

json state_to_json(const trial::TrialState& s) {
  json cohorts = json::array();
  for (const auto& c : s.cohorts) {
    json pts = json::array();
    for (const auto& p : c.patients) pts.push_back(patient_to_json(p));
    cohorts.push_back({{"phase", c.phase}, {"dose", c.dose}, {"patients", pts}});
  }
  json decisions = json::array();
  for (const auto& d : s.decisions) decisions.push_back(decision_to_json(d));
  json phases = json::array();
  for (const auto& p : s.phases)
    phases.push_back({{"mtd", p.mtd ? json(*p.mtd) : json(nullptr)},
                      {"patients", p.patients},
                      {"outcome", trial::to_string(p.outcome)}});
  const auto mtd = s.final_mtd();
  return {{"phase", s.phase},
          {"finished", s.finished},
          {"current_dose", s.current_dose ? json(*s.current_dose) : json(nullptr)},
          {"total_patients", s.total_patients()},
          {"final_mtd", mtd ? json(*mtd) : json(nullptr)},
          {"cohorts", cohorts},
          {"decisions", decisions},
          {"phases", phases}};
}

json report_to_json(const analysis::Report& r) {
  return {{"method", trial::to_string(r.method)},
          {"strata", analysis::to_string(r.strata)},
          {"schedule", r.schedule},
          {"patients_used", r.patients_used},
          {"patients_ignored", r.patients_ignored},
          {"summary", summary_to_json(r.summary)},
          {"eligible", r.eligible},
          {"recommended", r.recommended ? json(*r.recommended) : json(nullptr)},
          {"prob_lowest_above", r.prob_lowest_above ? json(*r.prob_lowest_above) : json(nullptr)},
          {"safety_stop", r.safety_stop}};
}

json metrics_to_json(const sim::Metrics& m) {
  auto est = [](const sim::Estimate& e) {
    return std::isfinite(e.value) ? json{{"value", e.value}, {"se", e.se}} : json(nullptr);
  };
  return {{"scenario", m.scenario},
          {"method", m.method},
          {"mode", m.mode},
          {"reps", m.reps},
          {"failures", m.failures},
          {"p_tt", est(m.p_tt)},
          {"p_od", est(m.p_od)},
          {"p_ud", est(m.p_ud)},
          {"p_none", est(m.p_none)},
          {"mean_patients", est(m.mean_patients)},
          {"mean_final_patients", est(m.mean_final_patients)},
          {"prop_patients_od", est(m.prop_patients_od)},
          {"prop_dlt", est(m.prop_dlt)},
          {"mean_dlts", est(m.mean_dlts)},
          {"mean_final_dlts", est(m.mean_final_dlts)}};
}

void write_metrics_header(std::ostream& out) {
  out << "scenario,method,mode,seed,reps,failures,p_tt,p_tt_se,p_od,p_od_se,p_ud,p_ud_se,p_none,p_none_se,"
         "mean_patients,mean_patients_se,mean_final_patients,mean_final_patients_se,prop_patients_od,"
         "prop_patients_od_se,prop_dlt,prop_dlt_se,mean_dlts,mean_dlts_se,mean_final_dlts,mean_final_dlts_se\n";
}

void write_metrics_row(std::ostream& out, const sim::Metrics& m, std::uint64_t seed) {
  auto put = [&](const sim::Estimate& e) {
    if (std::isfinite(e.value))
      out << ',' << std::setprecision(6) << e.value << ',' << e.se;
    else
      out << ",n/a,n/a";
  };
  // n/a for selections the scenario cannot produce.
  sim::Estimate tt = m.has_tt ? m.p_tt : sim::Estimate{std::nan(""), std::nan("")};
  sim::Estimate od = m.has_od ? m.p_od : sim::Estimate{std::nan(""), std::nan("")};
  out << m.scenario << ',' << m.method << ',' << m.mode << ',' << seed << ',' << m.reps << ',' << m.failures;
  put(tt);
  put(od);
  put(m.p_ud);
  put(m.p_none);
  put(m.mean_patients);
  put(m.mean_final_patients);
  put(m.prop_patients_od);
  put(m.prop_dlt);
  put(m.mean_dlts);
  put(m.mean_final_dlts);
  out << '\n';
}

void write_sensitivity(std::ostream& out, const std::vector<sim::SensitivityRow>& rows) {
  out << "half_life\tshift\tschedule\tdose\tinterval\tmedian\tq025\tq25\tq75\tq975\tp_ud\tp_tt\tp_od\n";
  out << std::setprecision(6);
  for (const auto& r : rows) {
    const auto& d = r.summary;
    out << r.half_life << '\t' << sim::to_string(r.shift) << '\t' << d.label << '\t' << d.dose << '\t' << d.interval
        << '\t' << d.median << '\t' << d.q025 << '\t' << d.q25 << '\t' << d.q75 << '\t' << d.q975 << '\t' << d.p_ud
        << '\t' << d.p_tt << '\t' << d.p_od << '\n';
  }
}

}  // namespace titepk::io
