#include "titepk/service.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

#include <httplib.h>

#include "titepk/errors.hpp"
#include "titepk/io.hpp"
#include "titepk/trial.hpp"

namespace titepk::service {

namespace fs = std::filesystem;

// Request problems that map straight onto a status code.
struct HttpError : std::runtime_error {
  int status;
  HttpError(int s, const std::string& what) : std::runtime_error(what), status(s) {}
};

class Session {
 public:
  std::string id;
  json config;
  std::unique_ptr<trial::Trial> trial;
  std::uint64_t version = 0;
  // Accepted mutations by the version they quoted: raw body and reply.
  std::map<std::uint64_t, std::pair<std::string, json>> replies;
  std::mutex write_mu;

  std::shared_ptr<const json> view() const {
    std::lock_guard lock(view_mu_);
    return view_;
  }
  void publish(json v) {
    auto p = std::make_shared<const json>(std::move(v));
    std::lock_guard lock(view_mu_);
    view_ = std::move(p);
  }

 private:
  mutable std::mutex view_mu_;
  std::shared_ptr<const json> view_;
};

namespace {

std::vector<std::string> segments(const std::string& path) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : path.substr(0, path.find('?'))) {
    if (c == '/') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json pending_json(const trial::Trial& t) {
  const auto p = t.pending();
  if (!p) return nullptr;
  const auto& s = t.config().schedules[p->first];
  return {{"phase", p->first}, {"schedule", s.label}, {"interval", s.interval}, {"dose", p->second}};
}

json recommendation_json(const trial::Trial& t, std::uint64_t version) {
  const auto& st = t.state();
  const auto& last = st.decisions.back();
  json pod = json::array();
  for (const auto& d : last.assessment.summary.doses) pod.push_back({{"dose", d.dose}, {"p_od", d.p_od}});
  json j{{"version", version},
         {"phase", last.phase},
         {"schedule", t.config().schedules[last.phase].label},
         {"action", trial::to_string(last.action)},
         {"reason", last.reason},
         {"recommended", opt(last.recommended)},
         {"eligible", last.eligible},
         {"p_od", pod},
         {"finished", st.finished},
         {"pending", pending_json(t)},
         {"mtd", opt(st.final_mtd())}};
  if (last.assessment.prob_lowest_above) j["prob_lowest_above"] = *last.assessment.prob_lowest_above;
  return j;
}

// Everything GET needs, computed once per mutation.
json materialize(const Session& s) {
  const auto& t = *s.trial;
  return {{"trial",
           {{"id", s.id},
            {"version", s.version},
            {"config", s.config},
            {"pending", pending_json(t)},
            {"state", io::state_to_json(t.state())}}},
          {"posterior",
           {{"version", s.version},
            {"phase", t.state().phase},
            {"schedule", t.config().schedules[t.state().phase].label},
            {"summary", io::summary_to_json(t.assess(true).summary)}}},
          {"recommendation", recommendation_json(t, s.version)}};
}

// Builds cohort records for the trial's active schedule (or `schedule`).
std::vector<model::PatientOutcome> cohort_from_json(const trial::Trial& t, const json& body, std::size_t phase) {
  const auto& sched = t.config().schedules[phase];
  std::optional<double> dose;
  if (body.contains("dose")) {
    if (!body["dose"].is_number()) throw HttpError(422, "dose must be a number");
    dose = body["dose"].get<double>();
  } else if (auto p = t.pending(); p && p->first == phase) {
    dose = p->second;
  }
  if (!dose) throw HttpError(422, "dose is required when no dose is pending on this schedule");
  if (!body.contains("patients") || !body["patients"].is_array() || body["patients"].empty())
    throw HttpError(422, "patients must be a non-empty array");
  std::vector<model::PatientOutcome> out;
  for (const auto& pj : body["patients"]) {
    if (!pj.is_object()) throw HttpError(422, "each patient must be an object");
    model::PatientOutcome p;
    p.regimen = sched.regimen(*dose);
    p.time = sched.cycle_length;
    for (auto it = pj.begin(); it != pj.end(); ++it) {
      const auto& k = it.key();
      const auto& v = it.value();
      if (k == "id" && v.is_string()) {
        p.id = v.get<std::string>();
      } else if (k == "time" && v.is_number()) {
        p.time = v.get<double>();
      } else if (k == "dlt" && (v.is_boolean() || v.is_number_integer())) {
        if (v.is_number_integer() && v.get<int>() != 0 && v.get<int>() != 1)
          throw HttpError(422, "patient.dlt must be 0/1 or a boolean");
        p.dlt = v.is_boolean() ? v.get<bool>() : v.get<int>() == 1;
      } else {
        throw HttpError(422, "patient." + k + ": unknown key or wrong type");
      }
    }
    if (p.dlt && !pj.contains("time")) throw HttpError(422, "a DLT needs its time");
    out.push_back(std::move(p));
  }
  return out;
}

std::size_t phase_for(const trial::Trial& t, const json& body) {
  const auto& cfg = t.config();
  if (!body.contains("schedule")) return t.state().phase;
  if (!body["schedule"].is_string()) throw HttpError(422, "schedule must be a string");
  const auto label = body["schedule"].get<std::string>();
  for (std::size_t i = 0; i < cfg.schedules.size(); ++i)
    if (cfg.schedules[i].label == label) return i;
  throw HttpError(422, "schedule '" + label + "' is not configured");
}

void apply_cohort(trial::Trial& t, const json& body, std::size_t phase) {
  if (phase > t.state().phase) {
    t.advance_to(phase);
    if (t.finished())
      throw HttpError(409, "no EWOC-eligible start dose on schedule " + t.config().schedules[phase].label);
  }
  t.submit(cohort_from_json(t, body, phase));
}

void check_keys(const json& body, std::initializer_list<const char*> allowed) {
  if (!body.is_object()) throw HttpError(422, "request body must be a JSON object");
  for (auto it = body.begin(); it != body.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw HttpError(422, "unknown key '" + it.key() + "'");
  }
}

json parse_body(const std::string& raw) {
  if (raw.empty()) return json::object();
  try {
    return json::parse(raw);
  } catch (const json::parse_error& e) {
    throw HttpError(422, std::string("malformed JSON: ") + e.what());
  }
}

Reply error_reply(int status, const std::string& message) { return {status, {{"error", message}, {"status", status}}}; }

}  // namespace

TrialService::TrialService(Options options) : options_(std::move(options)) {
  if (!options_.log_dir.empty()) {
    fs::create_directories(options_.log_dir);
    replay();
  }
}

TrialService::~TrialService() {
  try {
    snapshot();
  } catch (const std::exception& e) {
    std::cerr << "snapshot failed: " << e.what() << "\n";
  }
}

std::size_t TrialService::sessions() const {
  std::shared_lock lock(mu_);
  return sessions_.size();
}

std::shared_ptr<Session> TrialService::find(const std::string& id) const {
  std::shared_lock lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw HttpError(404, "unknown trial '" + id + "'");
  return it->second;
}

void TrialService::append_log(const std::string& id, const json& event) const {
  if (options_.log_dir.empty()) return;
  std::ofstream out(fs::path(options_.log_dir) / (id + ".jsonl"), std::ios::app);
  if (!out) throw Error("cannot append to the event log of " + id);
  out << event.dump() << '\n';
  out.flush();
}

void TrialService::snapshot() const {
  if (options_.log_dir.empty()) return;
  std::shared_lock lock(mu_);
  for (const auto& [id, s] : sessions_) {
    const auto v = s->view();
    if (!v) continue;
    std::ofstream out(fs::path(options_.log_dir) / (id + ".snapshot.json"));
    out << (*v)["trial"].dump(2) << '\n';
  }
}

void TrialService::replay() {
  std::vector<fs::path> logs;
  for (const auto& e : fs::directory_iterator(options_.log_dir))
    if (e.path().extension() == ".jsonl") logs.push_back(e.path());
  std::sort(logs.begin(), logs.end());
  for (const auto& path : logs) {
    std::ifstream in(path);
    std::string line;
    std::shared_ptr<Session> s;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto ev = json::parse(line);
      const auto type = ev.at("type").get<std::string>();
      if (type == "create") {
        s = std::make_shared<Session>();
        s->id = ev.at("id").get<std::string>();
        s->config = ev.at("config");
        s->trial = std::make_unique<trial::Trial>(io::config_from_json(s->config));
      } else if (type == "cohort" && s) {
        const auto& body = ev.at("body");
        apply_cohort(*s->trial, body, phase_for(*s->trial, body));
        s->replies[s->version] = {ev.at("raw").get<std::string>(), ev.at("reply")};
        ++s->version;
      } else {
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": unexpected event");
      }
    }
    if (!s) continue;
    s->publish(materialize(*s));
    sessions_[s->id] = s;
    const auto digits = s->id.find_first_of("0123456789");
    if (digits != std::string::npos) next_id_ = std::max<std::uint64_t>(next_id_, std::stoull(s->id.substr(digits)) + 1);
  }
}

Reply TrialService::create(const json& body) {
  check_keys(body, {"config", "id"});
  if (!body.contains("config")) throw HttpError(422, "config is required");
  auto s = std::make_shared<Session>();
  s->trial = std::make_unique<trial::Trial>(io::config_from_json(body["config"]));
  s->config = io::config_to_json(s->trial->config());
  s->publish(materialize(*s));
  {
    std::unique_lock lock(mu_);
    if (body.contains("id")) {
      if (!body["id"].is_string() || body["id"].get<std::string>().empty())
        throw HttpError(422, "id must be a non-empty string");
      s->id = body["id"].get<std::string>();
      for (char c : s->id)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_')
          throw HttpError(422, "id may only contain letters, digits, '-' and '_'");
      if (sessions_.count(s->id)) throw HttpError(409, "trial '" + s->id + "' exists");
    } else {
      do {
        s->id = "trial-" + std::to_string(next_id_++);
      } while (sessions_.count(s->id));
    }
    // The id is only known now; refresh it in the view.
    s->publish(materialize(*s));
    append_log(s->id, {{"type", "create"}, {"id", s->id}, {"config", s->config}});
    sessions_[s->id] = s;
  }
  return {201, (*s->view())["trial"]};
}

Reply TrialService::submit(Session& s, const json& body, const std::string& raw) {
  check_keys(body, {"version", "schedule", "dose", "patients"});
  if (!body.contains("version") || !body["version"].is_number_unsigned())
    throw HttpError(422, "version must be a non-negative integer");
  const auto version = body["version"].get<std::uint64_t>();
  std::lock_guard lock(s.write_mu);
  if (version != s.version) {
    // A replay of an accepted request gets the original reply.
    auto it = s.replies.find(version);
    if (it != s.replies.end() && json::parse(it->second.first) == body) return {200, it->second.second};
    throw HttpError(409, "version conflict: trial is at version " + std::to_string(s.version));
  }
  if (s.trial->finished()) throw HttpError(409, "trial is finished");
  const std::size_t phase = phase_for(*s.trial, body);
  if (phase < s.trial->state().phase) throw HttpError(409, "schedule is already closed");
  if (phase > s.trial->state().phase + 1) throw HttpError(409, "schedules must be entered in order");
  // Work on a copy so a rejected cohort leaves no trace.
  trial::Trial next = *s.trial;
  apply_cohort(next, body, phase);
  json reply{{"version", s.version + 1},
             {"decision", io::decision_to_json(next.state().decisions.back())},
             {"pending", pending_json(next)}};
  append_log(s.id, {{"type", "cohort"}, {"version", s.version + 1}, {"body", body}, {"raw", raw}, {"reply", reply}});
  *s.trial = std::move(next);
  s.replies[version] = {raw, reply};
  ++s.version;
  s.publish(materialize(s));
  return {200, reply};
}

Reply TrialService::whatif(Session& s, const json& body) {
  check_keys(body, {"schedule", "dose", "patients"});
  std::lock_guard lock(s.write_mu);
  const auto& t = *s.trial;
  if (t.finished()) throw HttpError(409, "trial is finished");
  const std::size_t phase = phase_for(t, body);
  if (phase != t.state().phase) throw HttpError(422, "what-if cohorts must be on the active schedule");
  const auto d = t.whatif(cohort_from_json(t, body, phase));
  return {200, {{"version", s.version}, {"decision", io::decision_to_json(d)}}};
}

Reply TrialService::handle(const std::string& method, const std::string& path, const std::string& raw,
                           const std::string& authorization) {
  try {
    const auto seg = segments(path);
    if (method == "GET" && seg.size() == 1 && seg[0] == "healthz") return {200, {{"status", "ok"}}};
    if (!options_.token.empty() && authorization != "Bearer " + options_.token)
      throw HttpError(401, "missing or wrong bearer token");
    if (method == "GET" && !seg.empty() && seg[0] == "schema") {
      const auto all = schemas();
      if (seg.size() == 1) return {200, all};
      if (seg.size() == 2 && all.contains(seg[1])) return {200, all[seg[1]]};
      throw HttpError(404, "unknown schema");
    }
    if (seg.empty() || seg[0] != "trials") throw HttpError(404, "no such route");
    if (seg.size() == 1) {
      if (method == "POST") return create(parse_body(raw));
      if (method == "GET") {
        json ids = json::array();
        std::shared_lock lock(mu_);
        for (const auto& [id, s] : sessions_) ids.push_back(id);
        return {200, {{"trials", ids}}};
      }
      throw HttpError(405, "method not allowed");
    }
    auto s = find(seg[1]);
    if (seg.size() == 2 && method == "GET") return {200, (*s->view())["trial"]};
    if (seg.size() == 3) {
      const auto& what = seg[2];
      if (what == "posterior" && method == "GET") return {200, (*s->view())["posterior"]};
      if (what == "recommendation" && method == "GET") return {200, (*s->view())["recommendation"]};
      if (what == "cohorts" && method == "POST") return submit(*s, parse_body(raw), raw);
      if (what == "whatif" && method == "POST") return whatif(*s, parse_body(raw));
    }
    throw HttpError(404, "no such route");
  } catch (const HttpError& e) {
    return error_reply(e.status, e.what());
  } catch (const InvalidInput& e) {
    return error_reply(422, e.what());
  } catch (const ConfigurationError& e) {
    return error_reply(422, e.what());
  } catch (const DataError& e) {
    return error_reply(422, e.what());
  } catch (const CalibrationError& e) {
    return error_reply(422, e.what());
  } catch (const Error& e) {
    // Quadrature range or sampler trouble.
    return error_reply(503, e.what());
  } catch (const json::exception& e) {
    return error_reply(422, e.what());
  } catch (const std::exception& e) {
    return error_reply(500, e.what());
  }
}

json TrialService::schemas() {
  const json number{{"type", "number"}};
  const json patient{{"type", "object"},
                     {"additionalProperties", false},
                     {"properties",
                      {{"id", {{"type", "string"}}},
                       {"time", {{"type", "number"}, {"exclusiveMinimum", 0}}},
                       {"dlt", {{"type", {"boolean", "integer"}}}}}}};
  const json cohort_base{{"schedule", {{"type", "string"}}},
                         {"dose", {{"type", "number"}, {"exclusiveMinimum", 0}}},
                         {"patients", {{"type", "array"}, {"minItems", 1}, {"items", patient}}}};
  json cohort{{"type", "object"},
              {"additionalProperties", false},
              {"required", {"version", "patients"}},
              {"properties", cohort_base}};
  cohort["properties"]["version"] = {{"type", "integer"}, {"minimum", 0}};
  const json whatif{{"type", "object"},
                    {"additionalProperties", false},
                    {"required", {"patients"}},
                    {"properties", cohort_base}};
  const json schedule{{"type", "object"},
                      {"required", {"label", "doses"}},
                      {"properties",
                       {{"label", {{"type", "string"}}},
                        {"interval", number},
                        {"cycle_length", number},
                        {"doses", {{"type", "array"}, {"items", number}, {"minItems", 1}}},
                        {"blrm_ref_dose", number}}}};
  const json config{{"type", "object"},
                    {"properties",
                     {{"method", {{"enum", {"titepk", "crm", "blrm", "blrm-map"}}}},
                      {"pk", {{"type", "object"}, {"properties", {{"half_life", number}, {"log_keff", number}}}}},
                      {"reference", {{"type", "object"}}},
                      {"titepk_prior", {{"type", "object"}}},
                      {"blrm_prior", {{"type", "object"}}},
                      {"heterogeneity", {{"type", "object"}}},
                      {"crm", {{"type", "object"}}},
                      {"rules", {{"type", "object"}}},
                      {"quadrature", {{"type", "object"}}},
                      {"mcmc", {{"type", "object"}}},
                      {"map_mcmc", {{"type", "object"}}},
                      {"schedules", {{"type", "array"}, {"minItems", 1}, {"items", schedule}}}}},
                    {"required", {"schedules"}}};
  const json create{{"type", "object"},
                    {"additionalProperties", false},
                    {"required", {"config"}},
                    {"properties", {{"config", config}, {"id", {{"type", "string"}}}}}};
  const json event{{"type", "object"},
                   {"required", {"type"}},
                   {"properties",
                    {{"type", {{"enum", {"create", "cohort"}}}},
                     {"id", {{"type", "string"}}},
                     {"config", config},
                     {"version", {{"type", "integer"}}},
                     {"body", cohort},
                     {"raw", {{"type", "string"}}},
                     {"reply", {{"type", "object"}}}}}};
  return {{"create_trial", create}, {"cohort", cohort}, {"whatif", whatif},
          {"config", config},       {"patient", patient}, {"log_event", event}};
}

// ---------------------------------------------------------------------------

struct HttpServer::Impl {
  TrialService& service;
  httplib::Server server;
  explicit Impl(TrialService& s) : service(s) {}
};

HttpServer::HttpServer(TrialService& service) : impl_(std::make_unique<Impl>(service)) {
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    const auto r = impl_->service.handle(req.method, req.path, req.body, req.get_header_value("Authorization"));
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  auto& s = impl_->server;
  s.Get(R"(/.*)", route);
  s.Post(R"(/.*)", route);
  s.set_payload_max_length(1 << 20);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  if (!impl_->server.bind_to_port(host, port)) return -1;
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

}  // namespace titepk::service
