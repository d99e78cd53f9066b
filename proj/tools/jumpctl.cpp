// jumpctl: analyze / synthesize / simulate / reproduce for Markov
// jump linear driving systems with mode-dependent noisy measurements.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mjls/acc.hpp"
#include "mjls/analysis.hpp"
#include "mjls/config.hpp"
#include "mjls/model.hpp"
#include "mjls/simulate.hpp"
#include "mjls/svg.hpp"
#include "mjls/synthesis.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mjls;

namespace {

constexpr const char* kVersion = "jumpctl 1.0.0";

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitAnalysisNegative = 2;
constexpr int kExitInfeasible = 3;

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

PemAdm resolve_model(const ConfigDocument& doc) {
  if (doc.model) return *doc.model;
  if (doc.scenario) return build_acc_model(doc.scenario->acc);
  throw ConfigError("config needs a 'model' or 'scenario' section");
}

void write_manifest(const fs::path& dir, const std::string& command, const ConfigDocument& doc,
                    const std::vector<std::string>& methods = {}, int scenario_id = 0,
                    const std::string& warning = "") {
  json manifest = json::object();
  manifest["tool"] = kVersion;
  manifest["command"] = command;
  if (!methods.empty()) manifest["methods"] = methods;
  if (scenario_id > 0) manifest["scenario_id"] = scenario_id;
  if (!warning.empty()) manifest["warning"] = warning;
  manifest["config"] = json::parse(serialize_config(doc));
  write_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");
}

json certificate_json(const Certificate& cert, const std::vector<double>& x0) {
  json j = json::object();
  j["gamma1"] = cert.gamma1;
  j["gamma2"] = cert.gamma2;
  j["gamma3"] = cert.gamma3;
  j["c1"] = cert.c1;
  j["ss_bound"] = cert.ss_bound;
  j["rate"] = cert.rate;
  j["alltime_bound"] = cert.alltime_bound(x0);
  json p = json::array();
  for (const Matrix& pm : cert.p_mats) p.push_back(matrix_json(pm));
  j["P"] = p;
  return j;
}

int cmd_analyze(const std::string& config_path, const std::string& out_path) {
  ConfigDocument doc = load_config(config_path);
  PemAdm model = resolve_model(doc);
  if (!doc.gains) throw ConfigError(config_path + ": analyze needs a 'gains' section");
  ClosedLoop cl = build_closed_loop(model, *doc.gains);
  std::vector<double> x0 =
      doc.x0 ? *doc.x0 : std::vector<double>(static_cast<size_t>(model.state_dim), 0.0);

  CertificateResult res = find_certificate(cl);
  if (!res.found()) {
    std::cout << "verdict: no mean-square stability certificate found\n";
    std::cout << "solver: " << res.message << "\n";
    return kExitAnalysisNegative;
  }
  const Certificate& cert = *res.certificate;
  CertificateCheck check = verify_certificate(cl, cert);
  std::cout << "verdict: mean-square stable (certificate found)\n";
  for (size_t i = 0; i < check.mode_lambda_max.size(); ++i)
    std::cout << "  lambda_max(M(" << i << ")) = " << check.mode_lambda_max[i] << "\n";
  std::cout << "  gamma1 = " << cert.gamma1 << "\n  gamma2 = " << cert.gamma2 << "\n  gamma3 = " << cert.gamma3
            << "\n  c1 = " << cert.c1 << "\n";
  std::cout << "  ss_bound = " << cert.ss_bound << "\n  rate = " << cert.rate << "\n";
  std::cout << "  alltime_bound(x0) = " << cert.alltime_bound(x0) << "\n";

  MomentSolution mom = solve_moments(cl);
  std::cout << "  exact steady-state E[x'x] = " << mom.total_ms << "\n";

  if (!out_path.empty()) {
    json out = json::object();
    out["certificate"] = certificate_json(cert, x0);
    out["exact_steady_state_ms"] = mom.total_ms;
    write_file(out_path, out.dump(2) + "\n");
  }
  return kExitOk;
}

int cmd_synthesize(const std::string& config_path, const std::string& method, const std::string& out_path) {
  ConfigDocument doc = load_config(config_path);
  PemAdm model = resolve_model(doc);
  SynthesisOptions opts = doc.synthesis ? *doc.synthesis : SynthesisOptions{};

  SynthesisOutcome outcome;
  if (method == "pgc") {
    outcome = synth_pgc(model, opts);
  } else if (method == "ssc") {
    outcome = synth_ssc(model, opts.strictness);
  } else {
    std::cerr << "error: --method must be ssc or pgc\n";
    return kExitUsage;
  }
  if (!outcome.feasible()) {
    std::cerr << "synthesis infeasible: " << outcome.message << "\n";
    return kExitInfeasible;
  }
  const SynthesisResult& res = *outcome.result;
  std::cout << "synthesis (" << method << ") feasible\n";
  for (size_t i = 0; i < res.gains.gains.size(); ++i)
    std::cout << "  K(" << i << ") = " << to_string(res.gains.gains[i]) << "\n";
  if (method == "pgc") {
    std::cout << "  gamma4 = " << res.gamma4 << "\n";
    std::cout << "  guaranteed_bound = " << res.guaranteed_bound << "\n";
  }
  std::cout << "  re-verified ss_bound = " << res.certificate.ss_bound << ", rate = " << res.certificate.rate << "\n";

  if (!out_path.empty()) {
    json out = json::object();
    json g = json::array();
    for (const Matrix& k : res.gains.gains) g.push_back(matrix_json(k));
    out["gains"] = g;
    out["method"] = method;
    if (method == "pgc") {
      out["gamma4"] = res.gamma4;
      out["guaranteed_bound"] = res.guaranteed_bound;
    }
    std::vector<double> x0(static_cast<size_t>(model.state_dim), 0.0);
    if (doc.x0) x0 = *doc.x0;
    out["certificate"] = certificate_json(res.certificate, x0);
    write_file(out_path, out.dump(2) + "\n");
  }
  return kExitOk;
}

void emit_ensemble_artifacts(const fs::path& dir, const EnsembleStats& stats,
                             const std::vector<TrajectorySample>& retained) {
  std::vector<CsvColumn> cols;
  cols.push_back({"t", stats.times});
  const size_t dim = stats.mean_state.empty() ? 0 : stats.mean_state[0].size();
  for (size_t d = 0; d < dim; ++d) {
    CsvColumn mc{"mean_x" + std::to_string(d + 1), {}};
    CsvColumn sc{"std_x" + std::to_string(d + 1), {}};
    for (size_t k = 0; k < stats.times.size(); ++k) {
      mc.values.push_back(stats.mean_state[k][d]);
      sc.values.push_back(stats.std_state[k][d]);
    }
    cols.push_back(mc);
    cols.push_back(sc);
  }
  cols.push_back({"mean_sq", stats.mean_sq});
  cols.push_back({"stderr_mean_sq", stats.stderr_mean_sq});
  write_file((dir / "ensemble_stats.csv").string(), to_csv(cols));

  for (size_t p = 0; p < retained.size(); ++p) {
    const TrajectorySample& tr = retained[p];
    std::vector<CsvColumn> pc;
    pc.push_back({"t", tr.times});
    CsvColumn mode{"mode", {}};
    for (int m : tr.modes) mode.values.push_back(static_cast<double>(m));
    pc.push_back(mode);
    const size_t n = tr.states.empty() ? 0 : tr.states[0].size();
    for (size_t d = 0; d < n; ++d) {
      CsvColumn c{"x" + std::to_string(d + 1), {}};
      for (const auto& x : tr.states) c.values.push_back(x[d]);
      pc.push_back(c);
    }
    const size_t py = tr.measurements.empty() ? 0 : tr.measurements[0].size();
    for (size_t d = 0; d < py; ++d) {
      CsvColumn c{"y" + std::to_string(d + 1), {}};
      for (const auto& y : tr.measurements) c.values.push_back(y[d]);
      pc.push_back(c);
    }
    const size_t pu = tr.controls.empty() ? 0 : tr.controls[0].size();
    for (size_t d = 0; d < pu; ++d) {
      CsvColumn c{"u" + std::to_string(d + 1), {}};
      for (const auto& u : tr.controls) c.values.push_back(u[d]);
      pc.push_back(c);
    }
    write_file((dir / ("sample_path_" + std::to_string(p) + ".csv")).string(), to_csv(pc));
  }

  // state figure: one panel per dimension with +/- 1 std band
  SvgFigure fig;
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  for (size_t d = 0; d < dim; ++d) {
    SvgPanel panel;
    panel.title = "state x" + std::to_string(d + 1);
    panel.x_label = "t [s]";
    panel.y_label = "x" + std::to_string(d + 1);
    SvgSeries s;
    s.label = "mean +/- std";
    s.color = colors[d % 4];
    s.x = stats.times;
    for (size_t k = 0; k < stats.times.size(); ++k) {
      s.y.push_back(stats.mean_state[k][d]);
      s.band.push_back(stats.std_state[k][d]);
    }
    panel.series.push_back(s);
    fig.panels.push_back(panel);
  }
  SvgPanel msq;
  msq.title = "mean-square state";
  msq.x_label = "t [s]";
  msq.y_label = "E[x'x]";
  SvgSeries s;
  s.label = "E[x'x]";
  s.color = "#ff7f0e";
  s.x = stats.times;
  s.y = stats.mean_sq;
  s.band = stats.stderr_mean_sq;
  msq.series.push_back(s);
  fig.panels.push_back(msq);
  write_file((dir / "states.svg").string(), emit_svg(fig));

  if (!retained.empty()) {
    SvgFigure mfig;
    SvgPanel panel;
    panel.title = "perception mode (sample path)";
    panel.x_label = "t [s]";
    panel.y_label = "mode";
    SvgSeries ms;
    ms.label = "r(t)";
    ms.color = "#333333";
    ms.step = true;
    ms.x = retained[0].times;
    for (int m : retained[0].modes) ms.y.push_back(static_cast<double>(m));
    panel.series.push_back(ms);
    mfig.panels.push_back(panel);
    write_file((dir / "mode_path.svg").string(), emit_svg(mfig));
  }
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir) {
  ConfigDocument doc = load_config(config_path);
  PemAdm model = resolve_model(doc);
  if (!doc.gains) throw ConfigError(config_path + ": simulate needs a 'gains' section");
  ClosedLoop cl = build_closed_loop(model, *doc.gains);
  SimConfig sim = doc.sim ? *doc.sim : SimConfig{};
  std::vector<double> x0(static_cast<size_t>(model.state_dim), 0.0);
  if (doc.x0) {
    if (static_cast<int>(doc.x0->size()) != model.state_dim)
      throw ConfigError(config_path + "/x0: expected " + std::to_string(model.state_dim) + " entries");
    x0 = *doc.x0;
  }

  fs::path dir(out_dir);
  fs::create_directories(dir);

  std::vector<TrajectorySample> retained;
  EnsembleStats stats = run_ensemble(cl, x0, sim, &retained, 3, &model, doc.gains ? &*doc.gains : nullptr);

  emit_ensemble_artifacts(dir, stats, retained);

  std::string warning;
  if (stats.divergence_fraction > 0.5)
    warning = "divergence fraction " + std::to_string(stats.divergence_fraction) + " exceeds 0.5";
  write_manifest(dir, "simulate", doc, {}, 0, warning);

  json results = json::object();
  results["n_paths_used"] = stats.n_paths_used;
  results["divergence_fraction"] = stats.divergence_fraction;
  results["tail_mean_sq"] = stats.tail_mean_sq();
  write_file((dir / "results.json").string(), results.dump(2) + "\n");

  std::cout << "simulate: " << sim.n_paths << " paths, tail E[x'x] = " << stats.tail_mean_sq()
            << ", divergence fraction = " << stats.divergence_fraction << "\n";
  if (!warning.empty()) std::cout << "warning: " << warning << "\n";
  std::cout << "artifacts written to " << dir.string() << "\n";
  return kExitOk;
}

void emit_scenario_csv(const fs::path& dir, const ScenarioResult& res) {
  std::vector<CsvColumn> cols;
  cols.push_back({"t", res.times});
  cols.push_back({"mean_delta1", res.mean_delta1});
  cols.push_back({"std_delta1", res.std_delta1});
  cols.push_back({"mean_err_pos", res.mean_err_pos});
  cols.push_back({"std_err_pos", res.std_err_pos});
  cols.push_back({"mean_err_vel", res.mean_err_vel});
  cols.push_back({"std_err_vel", res.std_err_vel});
  cols.push_back({"mean_u", res.mean_control});
  cols.push_back({"std_u", res.std_control});
  cols.push_back({"mean_sq_err", res.mean_sq_err});
  cols.push_back({"stderr_mean_sq", res.stderr_mean_sq});
  std::string name = "scenario" + std::to_string(res.scenario_id) + "_" + res.method + "_stats.csv";
  write_file((dir / name).string(), to_csv(cols));
}

int cmd_reproduce(int scenario_id, std::vector<std::string> methods, const std::string& out_dir,
                  const std::string& config_path, int n_paths_override, uint64_t seed_override, bool has_seed) {
  ConfigDocument doc;
  if (!config_path.empty()) {
    doc = load_config(config_path);
    // a reproduce manifest may carry scenario id and methods
    json root = json::parse(read_file(config_path));
    if (scenario_id == 0 && root.contains("scenario_id")) scenario_id = root.at("scenario_id").get<int>();
    if (methods.empty() && root.contains("methods")) methods = root.at("methods").get<std::vector<std::string>>();
  }
  if (scenario_id == 0) scenario_id = 1;
  if (methods.empty()) methods = {"pgc", "ssc", "idm", "rbc"};

  ScenarioConfig cfg = make_scenario_config(scenario_id);
  if (doc.scenario) {
    cfg.acc = doc.scenario->acc;
    cfg.baseline = doc.scenario->baseline;
    cfg.design_generator = doc.scenario->design_generator;
    cfg.failure_threshold = doc.scenario->failure_threshold;
    cfg.n_retain = doc.scenario->n_retain;
  }
  if (doc.sim) cfg.sim = *doc.sim;
  if (doc.synthesis) cfg.synth = *doc.synthesis;
  if (n_paths_override > 0) cfg.sim.n_paths = n_paths_override;
  if (has_seed) cfg.sim.seed = seed_override;

  fs::path dir(out_dir);
  fs::create_directories(dir);

  // manifest first: it alone reproduces this run
  ConfigDocument mdoc;
  mdoc.scenario = ConfigDocument::Scenario{scenario_id, cfg.acc,  cfg.baseline,
                                           cfg.design_generator, cfg.failure_threshold, cfg.n_retain};
  mdoc.sim = cfg.sim;
  mdoc.synthesis = cfg.synth;
  write_manifest(dir, "reproduce", mdoc, methods, scenario_id);

  json summary = json::object();
  summary["scenario"] = scenario_id;
  json per_method = json::object();

  std::vector<ScenarioResult> results;
  for (const std::string& mname : methods) {
    ControlMethod method = parse_method(mname);
    ScenarioResult res = run_scenario(scenario_id, method, cfg);
    emit_scenario_csv(dir, res);
    json mj = json::object();
    mj["collision_fraction"] = res.collision_fraction;
    mj["failure_fraction"] = res.failure_fraction;
    mj["tail_mse"] = res.tail_mse;
    if (!res.gains.gains.empty()) {
      json g = json::array();
      for (const Matrix& k : res.gains.gains) g.push_back(matrix_json(k));
      mj["gains"] = g;
    }
    if (!res.collision_times.empty()) {
      mj["first_collision_time"] = res.collision_times.front();
      mj["median_collision_time"] = res.collision_times[res.collision_times.size() / 2];
    }
    per_method[mname] = mj;
    std::cout << "scenario " << scenario_id << " / " << mname << ": tail MSE = " << res.tail_mse
              << ", collisions = " << res.collision_fraction << ", failures = " << res.failure_fraction << "\n";
    results.push_back(std::move(res));
  }
  summary["methods"] = per_method;
  write_file((dir / ("scenario" + std::to_string(scenario_id) + "_summary.json")).string(), summary.dump(2) + "\n");

  // comparison figure: relative distance, velocity error, control input
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"};
  SvgFigure fig;
  SvgPanel p1, p2, p3;
  p1.title = "relative distance (scenario " + std::to_string(scenario_id) + ")";
  p1.x_label = "t [s]";
  p1.y_label = "delta1 [m]";
  p2.title = "velocity error";
  p2.x_label = "t [s]";
  p2.y_label = "err_vel [m/s]";
  p3.title = "control input";
  p3.x_label = "t [s]";
  p3.y_label = "u [m/s^2]";
  for (size_t i = 0; i < results.size(); ++i) {
    const ScenarioResult& r = results[i];
    SvgSeries s1{r.method, r.times, r.mean_delta1, r.std_delta1, colors[i % 5], false};
    SvgSeries s2{r.method, r.times, r.mean_err_vel, r.std_err_vel, colors[i % 5], false};
    SvgSeries s3{r.method, r.times, r.mean_control, r.std_control, colors[i % 5], false};
    p1.series.push_back(s1);
    p2.series.push_back(s2);
    p3.series.push_back(s3);
  }
  fig.panels = {p1, p2, p3};
  write_file((dir / ("scenario" + std::to_string(scenario_id) + "_comparison.svg")).string(), emit_svg(fig));

  if (!results.empty() && !results[0].retained.empty()) {
    SvgFigure mfig;
    SvgPanel panel;
    panel.title = "perception mode (sample path)";
    panel.x_label = "t [s]";
    panel.y_label = "mode";
    SvgSeries ms;
    ms.label = "r(t)";
    ms.color = "#333333";
    ms.step = true;
    ms.x = results[0].retained[0].times;
    for (int m : results[0].retained[0].modes) ms.y.push_back(static_cast<double>(m));
    panel.series.push_back(ms);
    mfig.panels.push_back(panel);
    write_file((dir / ("scenario" + std::to_string(scenario_id) + "_mode_path.svg")).string(), emit_svg(mfig));
  }

  std::cout << "artifacts written to " << dir.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Markov jump linear driving systems: stability analysis, controller synthesis, simulation"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config_path, out_path, out_dir = "out", method = "pgc", methods_csv;
  int scenario_id = 0;
  int n_paths_override = 0;
  uint64_t seed_override = 0;
  bool has_seed = false;

  CLI::App* analyze = app.add_subcommand("analyze", "certify mean-square stability of a closed loop");
  analyze->add_option("--config", config_path, "config file (model + gains [+ x0])")->required();
  analyze->add_option("--out", out_path, "write a JSON certificate report");

  CLI::App* synthesize = app.add_subcommand("synthesize", "synthesize output-feedback gains");
  synthesize->add_option("--config", config_path, "config file (model [+ synthesis])")->required();
  synthesize->add_option("--method", method, "ssc or pgc")->check(CLI::IsMember({"ssc", "pgc"}));
  synthesize->add_option("--out", out_path, "write gains + bounds as JSON");

  CLI::App* simulate = app.add_subcommand("simulate", "Monte-Carlo simulation of a closed loop");
  simulate->add_option("--config", config_path, "config file (model + gains + sim [+ x0])")->required();
  simulate->add_option("--out", out_dir, "output directory");

  CLI::App* reproduce = app.add_subcommand("reproduce", "run a built-in car-following scenario suite");
  reproduce->add_option("--scenario", scenario_id, "scenario id: 1, 2, or 3")->check(CLI::Range(1, 3));
  reproduce->add_option("--methods", methods_csv, "comma-separated subset of pgc,ssc,idm,rbc,custom");
  reproduce->add_option("--config", config_path, "optional config/manifest with overrides");
  reproduce->add_option("--out", out_dir, "output directory");
  reproduce->add_option("--paths", n_paths_override, "override the path count");
  CLI::Option* seed_opt = reproduce->add_option("--seed", seed_override, "override the RNG seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  has_seed = seed_opt->count() > 0;

  try {
    if (analyze->parsed()) return cmd_analyze(config_path, out_path);
    if (synthesize->parsed()) return cmd_synthesize(config_path, method, out_path);
    if (simulate->parsed()) return cmd_simulate(config_path, out_dir);
    if (reproduce->parsed()) {
      std::vector<std::string> methods;
      std::stringstream ss(methods_csv);
      std::string tok;
      while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) methods.push_back(tok);
      }
      return cmd_reproduce(scenario_id, methods, out_dir, config_path, n_paths_override, seed_override, has_seed);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
