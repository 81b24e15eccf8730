// titepk: analyse a dose-escalation dataset, run simulation campaigns and
// sensitivity sweeps, print CRM skeletons, or serve the trial API.
//
// Exit codes: 0 ok, 2 bad input, 3 sampler/quadrature failure.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "titepk/analysis.hpp"
#include "titepk/errors.hpp"
#include "titepk/io.hpp"
#include "titepk/service.hpp"
#include "titepk/sim.hpp"

using namespace titepk;
using io::json;

namespace {

constexpr int kInputError = 2;
constexpr int kConvergenceError = 3;

std::string command_line(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) s += (i ? " " : "") + std::string(argv[i]);
  return s;
}

// Flags that override the configuration file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> half_life;
  std::optional<double> log_keff;
  std::optional<int> chains, warmup, iterations;

  void add(CLI::App* app) {
    app->add_option("--seed", seed, "Master seed (sampler and simulations)");
    app->add_option("--half-life", half_life, "Elimination half-life T_e in hours");
    app->add_option("--log-keff", log_keff, "log of the effect-compartment rate");
    app->add_option("--chains", chains, "MCMC chains");
    app->add_option("--warmup", warmup, "MCMC warm-up iterations per chain");
    app->add_option("--iterations", iterations, "MCMC kept iterations per chain");
  }

  void apply(trial::TrialConfig& c) const {
    if (seed) c.mcmc.seed = c.map_mcmc.seed = *seed;
    if (half_life || log_keff)
      c.pk = pk::PKParams::from_log_keff(half_life.value_or(c.pk.half_life), log_keff.value_or(std::log(c.pk.k_eff)));
    for (auto* m : {&c.mcmc, &c.map_mcmc}) {
      if (chains) m->chains = *chains;
      if (warmup) m->warmup = *warmup;
      if (iterations) m->iterations = *iterations;
    }
  }
};

std::string fmt(double v, int prec = 3) {
  if (!std::isfinite(v)) return "-";
  std::ostringstream o;
  o << std::fixed << std::setprecision(prec) << v;
  return o.str();
}

void print_report(std::ostream& out, const analysis::Report& r, const trial::TrialConfig& cfg) {
  out << "model " << trial::to_string(r.method) << "  strata " << analysis::to_string(r.strata) << "  schedule "
      << r.schedule << "  engine " << r.summary.engine << "  patients " << r.patients_used;
  if (r.patients_ignored) out << " (" << r.patients_ignored << " on other schedules ignored)";
  if (std::isfinite(r.summary.max_rhat)) out << "  max R-hat " << fmt(r.summary.max_rhat);
  out << "\n\n";
  out << std::left << std::setw(10) << "schedule" << std::right << std::setw(7) << "dose" << std::setw(8) << "median"
      << std::setw(8) << "q2.5" << std::setw(8) << "q25" << std::setw(8) << "q75" << std::setw(8) << "q97.5"
      << std::setw(8) << "p_UD" << std::setw(8) << "p_TT" << std::setw(8) << "p_OD"
      << (r.method == trial::Method::crm ? "" : "  EWOC") << "\n";
  for (const auto& d : r.summary.doses) {
    out << std::left << std::setw(10) << d.label << std::right << std::setw(7) << d.dose << std::setw(8)
        << fmt(d.median) << std::setw(8) << fmt(d.q025) << std::setw(8) << fmt(d.q25) << std::setw(8) << fmt(d.q75)
        << std::setw(8) << fmt(d.q975) << std::setw(8) << fmt(d.p_ud) << std::setw(8) << fmt(d.p_tt) << std::setw(8)
        << fmt(d.p_od);
    if (r.method != trial::Method::crm) out << (d.p_od < cfg.rules.feasibility_bound ? "  yes" : "  no");
    out << "\n";
  }
  out << "\n";
  if (r.method == trial::Method::crm) {
    out << "P(pi_1 > " << cfg.rules.crm_stop_threshold << ") = " << fmt(r.prob_lowest_above.value_or(NAN))
        << (r.safety_stop ? "  -> stop for safety\n" : "\n");
  } else {
    out << "EWOC-eligible (p_OD < " << cfg.rules.feasibility_bound << "):";
    if (r.eligible.empty()) out << " none -> stop for toxicity";
    for (double d : r.eligible) out << " " << d;
    out << "\n";
  }
  if (r.recommended) out << "recommended: " << *r.recommended << "\n";
}

service::HttpServer* g_server = nullptr;
void on_signal(int) {
  if (g_server) g_server->stop();
}

std::vector<double> parse_grid(const std::string& spec) {
  // "5:50:5" or "5,10,20"
  std::vector<double> out;
  if (spec.find(':') != std::string::npos) {
    double a = 0, b = 0, step = 0;
    char c1 = 0, c2 = 0;
    std::istringstream in(spec);
    if (!(in >> a >> c1 >> b >> c2 >> step) || c1 != ':' || c2 != ':' || !(step > 0) || b < a)
      throw InvalidInput("grid must be start:stop:step");
    for (int i = 0; a + i * step <= b + 1e-9 * step; ++i) out.push_back(a + i * step);
    return out;
  }
  std::istringstream in(spec);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw InvalidInput("bad grid value '" + tok + "'");
    }
  }
  if (out.empty()) throw InvalidInput("empty grid");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TITE-PK dose-escalation toolkit"};
  app.require_subcommand(1);
  const std::string cmdline = command_line(argc, argv);

  // analyze
  auto* an = app.add_subcommand("analyze", "Posterior report for a dataset");
  std::string an_data, an_config, an_model = "titepk", an_strata = "single", an_schedule, an_engine = "quadrature",
                                  an_json;
  Overrides an_ov;
  an->add_option("data", an_data, "Patient CSV (patient_id,schedule,dose,interval,time,dlt)")->required();
  an->add_option("-c,--config", an_config, "Trial configuration JSON")->required();
  an->add_option("-m,--model", an_model, "titepk | crm | blrm | blrm-map");
  an->add_option("--strata", an_strata, "single | sequential");
  an->add_option("--schedule", an_schedule, "Target schedule label (default: last configured)");
  an->add_option("--engine", an_engine, "quadrature | mcmc (TITE-PK and single-stratum BLRM)");
  an->add_option("--json", an_json, "Also write the report as JSON");
  an_ov.add(an);

  // simulate
  auto* si = app.add_subcommand("simulate", "Operating characteristics by simulation");
  std::string si_file, si_model, si_mode, si_out, si_transcript;
  std::vector<std::string> si_ids;
  bool si_all = false;
  std::optional<int> si_reps;
  int si_threads = 0;
  Overrides si_ov;
  si->add_option("scenarios", si_file, "Scenario JSON")->required();
  si->add_option("-m,--model", si_model, "titepk | crm | blrm | blrm-map (default: the file's design)");
  si->add_flag("--all-models", si_all, "Run every method");
  si->add_option("--reps", si_reps, "Replicates per scenario");
  si->add_option("--mode", si_mode, "exposure-inverse | fixed-day | both");
  si->add_option("--scenario", si_ids, "Only these scenario ids");
  si->add_option("-o,--out", si_out, "Results CSV (default: stdout)");
  si->add_option("--threads", si_threads, "Worker threads (0: all cores)");
  si->add_option("--transcript", si_transcript, "With --reps 1: write the trial transcript here (default stdout)");
  si_ov.add(si);

  // sensitivity
  auto* se = app.add_subcommand("sensitivity", "Half-life and DLT-timing sweep for TITE-PK");
  std::string se_data, se_config, se_grid = "5:50:5", se_shift = "all", se_out, se_schedule;
  se->add_option("data", se_data, "Patient CSV")->required();
  se->add_option("-c,--config", se_config, "Trial configuration JSON")->required();
  se->add_option("--half-lives", se_grid, "Grid of T_e values: start:stop:step or a comma list");
  se->add_option("--shift", se_shift, "observed | early | late | all");
  se->add_option("--schedule", se_schedule, "Schedule whose panel is reported (default: last)");
  se->add_option("-o,--out", se_out, "TSV output (default: stdout)");

  // serve
  auto* sv = app.add_subcommand("serve", "Run the trial HTTP API");
  std::string sv_host = "127.0.0.1", sv_log, sv_token;
  int sv_port = 8080;
  sv->add_option("--host", sv_host);
  sv->add_option("--port", sv_port);
  sv->add_option("--log-dir", sv_log, "Directory for the per-trial event logs");
  sv->add_option("--token", sv_token, "Require 'Authorization: Bearer <token>'");

  // skeleton
  auto* sk = app.add_subcommand("skeleton", "Lee-Cheung CRM skeleton");
  int sk_levels = 6, sk_nu = 0, sk_digits = 2;
  double sk_target = 0.30, sk_half = 0.10;
  sk->add_option("--levels", sk_levels);
  sk->add_option("--target", sk_target);
  sk->add_option("--halfwidth", sk_half, "Indifference interval half-width");
  sk->add_option("--nu", sk_nu, "Prior MTD level, 1-based (default: (levels + 1) / 2)");
  sk->add_option("--digits", sk_digits);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInputError;
  }

  try {
    if (*an) {
      trial::TrialConfig cfg = io::read_config_file(an_config);
      an_ov.apply(cfg);
      const auto first = cfg.schedules.empty() ? pk::kDefaultCycleLength : cfg.schedules.front().cycle_length;
      const auto data = io::read_dataset_file(an_data, first);
      analysis::Options opt;
      opt.method = trial::method_from_string(an_model);
      opt.strata = analysis::strata_from_string(an_strata);
      opt.schedule = an_schedule;
      if (an_engine == "mcmc")
        opt.engine = comparators::Engine::mcmc;
      else if (an_engine != "quadrature")
        throw InvalidInput("engine must be quadrature or mcmc");
      const auto r = analysis::analyze(cfg, data, opt);
      std::cout << "# " << cmdline << "\n# config " << an_config << "  data " << an_data << "  seed "
                << cfg.mcmc.seed << "\n";
      print_report(std::cout, r, cfg);
      if (!an_json.empty()) {
        std::ofstream out(an_json);
        out << json{{"command", cmdline},
                    {"data", an_data},
                    {"config_file", an_config},
                    {"seed", cfg.mcmc.seed},
                    {"config", io::config_to_json(cfg)},
                    {"report", io::report_to_json(r)}}
                   .dump(2)
            << "\n";
      }
      if (r.summary.flagged) {
        std::cerr << "error: sampler did not converge (max R-hat " << fmt(r.summary.max_rhat)
                  << "); increase --warmup/--iterations\n";
        return kConvergenceError;
      }
      return 0;
    }

    if (*si) {
      auto file = io::read_scenario_file(si_file);
      si_ov.apply(file.design);
      const std::uint64_t seed = si_ov.seed.value_or(file.seed);
      const int reps = si_reps.value_or(file.reps);
      std::vector<sim::EventMode> modes{file.mode};
      if (si_mode == "both")
        modes = {sim::EventMode::exposure_inverse, sim::EventMode::fixed_day};
      else if (!si_mode.empty())
        modes = {sim::event_mode_from_string(si_mode)};
      std::vector<trial::Method> methods{file.design.method};
      if (si_all)
        methods = {trial::Method::titepk, trial::Method::crm, trial::Method::blrm, trial::Method::blrm_map};
      else if (!si_model.empty())
        methods = {trial::method_from_string(si_model)};

      // One replicate is for inspection: its transcript is the output, and
      // the metrics row only goes to -o.
      const bool inspect = reps == 1;
      std::ofstream fout;
      if (!si_out.empty()) {
        fout.open(si_out);
        if (!fout) throw InvalidInput("cannot write " + si_out);
      }
      std::ostream& out = si_out.empty() ? std::cout : fout;
      const bool csv = !inspect || !si_out.empty();
      if (csv) {
        out << "# " << cmdline << "\n";
        io::write_metrics_header(out);
      }
      json transcripts = json::array();
      int failures = 0;
      for (const auto& sc : file.scenarios) {
        if (!si_ids.empty() && std::find(si_ids.begin(), si_ids.end(), sc.id) == si_ids.end()) continue;
        for (auto m : methods) {
          // With one schedule BLRM-MAP is plain BLRM.
          if (si_all && m == trial::Method::blrm_map && sc.schedules.size() < 2) continue;
          for (auto mode : modes) {
            sim::SimulationSettings s;
            s.design = file.design;
            s.design.method = m;
            s.mode = mode;
            s.reps = reps;
            s.seed = seed;
            s.threads = si_threads;
            if (inspect) {
              const auto t = sim::run_trial(sc, s, 0);
              transcripts.push_back({{"command", cmdline},
                                     {"seed", seed},
                                     {"scenario", io::scenario_to_json(sc)},
                                     {"method", trial::to_string(m)},
                                     {"mode", sim::to_string(mode)},
                                     {"config", io::config_to_json(t.config())},
                                     {"transcript", io::state_to_json(t.state())}});
            }
            std::cerr << "scenario " << sc.id << "  " << trial::to_string(m) << "  " << sim::to_string(mode) << " ..."
                      << std::flush;
            const auto results = sim::replicate_trials(sc, s);
            const auto metrics = sim::aggregate(sc, s, results);
            std::cerr << " P(TT) " << fmt(metrics.p_tt.value) << "  P(none) " << fmt(metrics.p_none.value) << "\n";
            for (const auto& r : results)
              if (r.failed) std::cerr << "  replicate failed: " << r.error << "\n";
            failures += metrics.failures;
            if (csv) io::write_metrics_row(out, metrics, seed);
          }
        }
      }
      if (inspect) {
        const json doc = transcripts.size() == 1 ? transcripts[0] : transcripts;
        if (si_transcript.empty()) {
          std::cout << doc.dump(2) << "\n";
        } else {
          std::ofstream tout(si_transcript);
          if (!tout) throw InvalidInput("cannot write " + si_transcript);
          tout << doc.dump(2) << "\n";
        }
      }
      if (failures) std::cerr << "warning: " << failures << " replicate(s) failed and were excluded\n";
      return 0;
    }

    if (*se) {
      trial::TrialConfig cfg = io::read_config_file(se_config);
      const auto data = io::read_dataset_file(se_data, cfg.schedules.front().cycle_length);
      std::size_t target = cfg.schedules.size() - 1;
      if (!se_schedule.empty()) {
        target = cfg.schedules.size();
        for (std::size_t i = 0; i < cfg.schedules.size(); ++i)
          if (cfg.schedules[i].label == se_schedule) target = i;
        if (target == cfg.schedules.size()) throw ConfigurationError("schedule '" + se_schedule + "' is not configured");
      }
      std::vector<pk::DosingRegimen> regimens;
      for (double d : cfg.schedules[target].doses) regimens.push_back(cfg.schedules[target].regimen(d));
      std::vector<sim::TimingShift> shifts{sim::TimingShift::early, sim::TimingShift::observed, sim::TimingShift::late};
      if (se_shift != "all") shifts = {sim::timing_shift_from_string(se_shift)};
      std::vector<sim::SensitivityRow> rows;
      for (auto sh : shifts) {
        auto part = sim::sensitivity_sweep(data, parse_grid(se_grid), sh, std::log(cfg.pk.k_eff), cfg.reference,
                                           cfg.titepk_prior, regimens, cfg.quadrature);
        rows.insert(rows.end(), part.begin(), part.end());
      }
      std::ofstream fout;
      if (!se_out.empty()) fout.open(se_out);
      io::write_sensitivity(se_out.empty() ? std::cout : fout, rows);
      return 0;
    }

    if (*sv) {
      service::TrialService svc({sv_log, sv_token});
      service::HttpServer server(svc);
      const int port = server.bind(sv_host, sv_port);
      if (port < 0) throw InvalidInput("cannot bind " + sv_host + ":" + std::to_string(sv_port));
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on http://" << sv_host << ":" << port << " (" << svc.sessions() << " trials loaded)\n";
      server.listen();
      g_server = nullptr;
      if (!sv_log.empty()) svc.snapshot();
      return 0;
    }

    if (*sk) {
      const int nu = sk_nu > 0 ? sk_nu : (sk_levels + 1) / 2;
      const auto s = comparators::lee_cheung_skeleton(sk_levels, sk_target, sk_half, nu);
      const auto r = s.rounded(sk_digits);
      for (std::size_t i = 0; i < r.size(); ++i) std::cout << (i ? " " : "") << fmt(r[i], sk_digits);
      std::cout << "\n";
      return 0;
    }
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConvergenceError;
  } catch (const WidenRangeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConvergenceError;
  } catch (const InitializationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConvergenceError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
