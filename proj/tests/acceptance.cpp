// Acceptance suite: one PASS/FAIL line per criterion, exit 0 only when
// every criterion passes. argv[1] must be the path to the jumpctl
// binary (used by the CLI-level criteria).

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mjls/acc.hpp"
#include "mjls/analysis.hpp"
#include "mjls/config.hpp"
#include "mjls/model.hpp"
#include "mjls/simulate.hpp"
#include "mjls/synthesis.hpp"

namespace fs = std::filesystem;
using namespace mjls;
using nlohmann::json;

namespace {

bool g_all_pass = true;

void report(int criterion, bool pass, const std::string& detail) {
  g_all_pass = g_all_pass && pass;
  std::cout << (pass ? "PASS" : "FAIL") << " criterion " << criterion << ": " << detail << std::endl;
}

int run_cli(const std::string& cmd) {
  int rc = std::system((cmd + " > /dev/null 2> cli_stderr.log").c_str());
  return rc == -1 ? -1 : WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PemAdm nominal_acc() { return build_acc_model(AccConfig{}); }

// Random two/three-mode plants, n in [2,4], fully actuated and fully
// observed so that a healthy fraction is synthesizable.
PemAdm random_model(std::mt19937& rng) {
  std::uniform_int_distribution<int> ndist(2, 4);
  std::uniform_int_distribution<int> mdist(2, 3);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::uniform_real_distribution<double> rate(0.3, 3.0);
  const int n = ndist(rng);
  const int n_modes = mdist(rng);
  PemAdm model;
  model.state_dim = n;
  model.input_dim = n;
  model.output_dim = n;
  model.generator.n_modes = n_modes;
  model.generator.rates = Matrix(n_modes, n_modes);
  for (int i = 0; i < n_modes; ++i) {
    double row = 0.0;
    for (int j = 0; j < n_modes; ++j) {
      if (j == i) continue;
      model.generator.rates(i, j) = rate(rng);
      row += model.generator.rates(i, j);
    }
    model.generator.rates(i, i) = -row;
  }
  for (int k = 0; k < n_modes; ++k) {
    ModeSystem m;
    m.a = Matrix(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) m.a(r, c) = unif(rng);
    m.b = Matrix::identity(n);
    m.c = Matrix::identity(n);
    m.d = Matrix::identity(n) * 0.1;
    model.modes.push_back(m);
  }
  return model;
}

struct McTail {
  double tail = 0.0;
  double stderr_tail = 0.0;  // averaged per-time stderr over the window
};

// Monte-Carlo tail estimate of E[x'x] over t in [15, 20].
McTail mc_tail(const ClosedLoop& cl, uint64_t seed) {
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.horizon = 20.0;
  cfg.n_paths = 500;
  cfg.seed = seed;
  cfg.record_stride = 50;
  std::vector<double> x0(static_cast<size_t>(cl.state_dim()), 0.0);
  EnsembleStats stats = run_ensemble(cl, x0, cfg);
  McTail out;
  out.tail = stats.tail_mean_sq(0.75);
  size_t start = (3 * stats.times.size()) / 4;
  double acc = 0.0;
  for (size_t k = start; k < stats.times.size(); ++k) acc += stats.stderr_mean_sq[k];
  out.stderr_tail = acc / static_cast<double>(stats.times.size() - start);
  return out;
}

// Euler-Maruyama vs exactly-sampled OU with shared Gaussian increments;
// returns (bias estimate of E[x(5)^2], its standard error, EM mean square).
struct OuBias {
  double bias = 0.0;
  double stderr_bias = 0.0;
  double em_mean_sq = 0.0;
};

OuBias ou_coupled_bias(double dt, int n_paths, uint64_t seed) {
  const double horizon = 5.0;
  const int steps = static_cast<int>(horizon / dt + 0.5);
  const double decay = std::exp(-dt);
  const double exact_noise = std::sqrt((1.0 - std::exp(-2.0 * dt)) / 2.0);
  const double sqdt = std::sqrt(dt);
  double sum_d = 0.0, sum_d2 = 0.0, sum_em = 0.0;
#pragma omp parallel for schedule(static) reduction(+ : sum_d, sum_d2, sum_em)
  for (int p = 0; p < n_paths; ++p) {
    std::mt19937_64 rng(seed + static_cast<uint64_t>(p));
    std::normal_distribution<double> normal(0.0, 1.0);
    double x_em = 0.0, x_ex = 0.0;
    for (int k = 0; k < steps; ++k) {
      double xi = normal(rng);
      x_em += -x_em * dt + sqdt * xi;
      x_ex = decay * x_ex + exact_noise * xi;
    }
    double d = x_em * x_em - x_ex * x_ex;
    sum_d += d;
    sum_d2 += d * d;
    sum_em += x_em * x_em;
  }
  OuBias out;
  double n = static_cast<double>(n_paths);
  out.bias = sum_d / n;
  double var = (sum_d2 - sum_d * sum_d / n) / (n - 1.0);
  out.stderr_bias = std::sqrt(var / n);
  out.em_mean_sq = sum_em / n;
  return out;
}

const char* kSimulateConfig = R"JSON({
  "model": {
    "state_dim": 2, "input_dim": 1, "output_dim": 2,
    "modes": [
      {"A": [[0, 1], [0, 0]], "B": [[0], [1]], "C": [[0, 0], [0, 1]], "D": [[1, 0], [0, 1]]},
      {"A": [[0, 1], [0, 0]], "B": [[0], [1]], "C": [[1, 0], [0, 1]], "D": [[0.05, 0], [0, 0.5]]}
    ],
    "generator": [[-4, 4], [0.5, -0.5]]
  },
  "gains": [[[0, -2.52]], [[-2.61, -1.76]]],
  "sim": {"dt": 0.001, "horizon": 10.0, "n_paths": 200, "seed": 42, "record_stride": 10},
  "x0": [-5, -4]
})JSON";

bool compare_csvs(const fs::path& a, const fs::path& b, std::string& detail) {
  size_t n_csv = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    if (entry.path().extension() != ".csv") continue;
    ++n_csv;
    fs::path other = b / entry.path().filename();
    if (!fs::exists(other)) {
      detail = "missing " + other.string();
      return false;
    }
    if (slurp(entry.path()) != slurp(other)) {
      detail = entry.path().filename().string() + " differs between runs";
      return false;
    }
  }
  if (n_csv == 0) {
    detail = "no CSV outputs found";
    return false;
  }
  detail = std::to_string(n_csv) + " CSV files byte-identical";
  return true;
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(4);
  ss << v;
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <path-to-jumpctl>" << std::endl;
    return 2;
  }
  const std::string jumpctl = argv[1];
  const fs::path work = "acceptance_work";
  std::error_code ec;
  fs::remove_all(work, ec);
  fs::create_directories(work);

  // ---- Criterion 1: pgc gain reproduction through the CLI ----
  {
    fs::path cfg_file = work / "nominal.json";
    std::ofstream(cfg_file) << kSimulateConfig;
    fs::path out_file = work / "pgc_gains.json";
    auto t0 = std::chrono::steady_clock::now();
    int rc = run_cli(jumpctl + " synthesize --method pgc --config " + cfg_file.string() + " --out " +
                     out_file.string());
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool pass = (rc == 0) && secs < 10.0;
    std::string detail;
    if (!pass) {
      detail = "synthesize pgc exit " + std::to_string(rc) + " in " + fmt(secs) + " s";
    } else {
      json out = json::parse(slurp(out_file));
      double k00 = out["gains"][0][0][0].get<double>();
      double k01 = out["gains"][0][0][1].get<double>();
      double k10 = out["gains"][1][0][0].get<double>();
      double k11 = out["gains"][1][0][1].get<double>();
      pass = std::abs(k00) <= 0.05 && std::abs(k01 - (-2.52)) <= 0.25 * 2.52 &&
             std::abs(k10 - (-2.61)) <= 0.25 * 2.61 && std::abs(k11 - (-1.76)) <= 0.25 * 1.76;
      detail = "K(0)=[" + fmt(k00) + ", " + fmt(k01) + "], K(1)=[" + fmt(k10) + ", " + fmt(k11) +
               "] vs published [0, -2.52], [-2.61, -1.76] in " + fmt(secs) + " s";
    }
    report(1, pass, detail);
  }

  // Shared pool: nominal model + 20 random models, both synthesis modes.
  struct PgcCase {
    PemAdm model;
    SynthesisResult result;
  };
  std::vector<PgcCase> pgc_cases;

  // ---- Criterion 2: every feasible synthesis re-verifies ----
  {
    std::mt19937 rng(20260826);
    std::vector<PemAdm> models;
    models.push_back(nominal_acc());
    for (int k = 0; k < 20; ++k) models.push_back(random_model(rng));
    int feasible = 0, failures = 0;
    for (const PemAdm& model : models) {
      for (int mode = 0; mode < 2; ++mode) {
        SynthesisOutcome out =
            (mode == 0) ? synth_ssc(model) : synth_pgc(model, SynthesisOptions{});
        if (!out.feasible()) continue;
        ++feasible;
        ClosedLoop cl = build_closed_loop(model, out.result->gains);
        CertificateCheck check = verify_certificate(cl, out.result->certificate);
        bool stable = false;
        try {
          stable = solve_moments(cl).stable;
        } catch (const std::exception&) {
          stable = false;
        }
        if (!check.pass || !stable) ++failures;
        if (mode == 1) pgc_cases.push_back({model, *out.result});
      }
    }
    report(2, failures == 0 && feasible > 0,
           std::to_string(feasible) + " feasible synthesis results over 21 models, " +
               std::to_string(failures) + " re-verification failures");
  }

  // ---- Criteria 3 and 4 share the Monte-Carlo tails ----
  {
    bool pass3 = !pgc_cases.empty();
    std::string worst3;
    std::vector<ClosedLoop> loops;
    std::vector<double> truths;
    uint64_t seed = 1000;
    auto t0 = std::chrono::steady_clock::now();
    for (const PgcCase& c : pgc_cases) {
      ClosedLoop cl = build_closed_loop(c.model, c.result.gains);
      double total_ms = solve_moments(cl).total_ms;
      if (total_ms > c.result.guaranteed_bound) {
        pass3 = false;
        worst3 = "exact moment " + fmt(total_ms) + " exceeds bound " + fmt(c.result.guaranteed_bound);
      }
      McTail mc = mc_tail(cl, seed++);
      if (mc.tail > c.result.guaranteed_bound + 3.0 * mc.stderr_tail) {
        pass3 = false;
        worst3 = "MC tail " + fmt(mc.tail) + " exceeds bound " + fmt(c.result.guaranteed_bound);
      }
      loops.push_back(cl);
      truths.push_back(total_ms);
    }
    report(3, pass3,
           pass3 ? "exact and Monte-Carlo moments below the guaranteed bound for all " +
                       std::to_string(pgc_cases.size()) + " feasible pgc designs"
                 : worst3);

    // Criterion 4: oracle triangle on 10 stable loops (nominal pgc loop
    // first, then the random feasible designs).
    bool pass4 = loops.size() >= 10;
    std::string detail4 = pass4 ? "" : "only " + std::to_string(loops.size()) + " stable loops available";
    double worst_sigma = 0.0;
    seed = 2000;
    for (size_t k = 0; k < loops.size() && k < 10 && pass4; ++k) {
      McTail mc = mc_tail(loops[k], seed++);
      double sigmas = std::abs(mc.tail - truths[k]) / mc.stderr_tail;
      worst_sigma = std::max(worst_sigma, sigmas);
      if (sigmas > 3.0) {
        pass4 = false;
        detail4 = "loop " + std::to_string(k) + ": MC tail " + fmt(mc.tail) + " vs exact " +
                  fmt(truths[k]) + " (" + fmt(sigmas) + " standard errors)";
      }
      CertificateResult cert = find_certificate(loops[k]);
      if (!cert.found() || truths[k] > cert.certificate->ss_bound) {
        pass4 = false;
        detail4 = "loop " + std::to_string(k) + ": certificate chain violated";
      }
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (pass4 && secs > 60.0) {
      pass4 = false;
      detail4 = "runtime " + fmt(secs) + " s exceeds 60 s";
    }
    if (pass4)
      detail4 = "10 loops: MC vs exact within 3 standard errors (worst " + fmt(worst_sigma) +
                "), exact <= certified bound, " + fmt(secs) + " s";
    report(4, pass4, detail4);
  }

  // ---- Criterion 5: generator recovery ----
  {
    bool pass = true;
    std::string detail;
    struct Case {
      Generator gen;
      double horizon;
    };
    std::vector<Case> cases = {{Generator{2, Matrix({{-4.0, 4.0}, {0.5, -0.5}})}, 15000.0},
                               {Generator{2, Matrix({{-4.0, 4.0}, {3.0, -3.0}})}, 4000.0}};
    for (size_t c = 0; c < cases.size(); ++c) {
      CounterRng rng(77 + c, 0);
      ModePath path = sample_ctmc(cases[c].gen, 0, cases[c].horizon, rng);
      GeneratorEstimate est = estimate_generator({path}, 2);
      if (path.n_jumps() < 10000) {
        pass = false;
        detail = "only " + std::to_string(path.n_jumps()) + " jumps sampled";
        break;
      }
      for (int i = 0; i < 2 && pass; ++i)
        for (int j = 0; j < 2; ++j) {
          if (i == j) continue;
          double truth = cases[c].gen.rates(i, j);
          double rel = std::abs(est.rates(i, j) - truth) / truth;
          if (rel > 0.05) {
            pass = false;
            detail = "entry (" + std::to_string(i) + "," + std::to_string(j) + ") off by " +
                     fmt(100.0 * rel) + "%";
          }
        }
      if (pass)
        detail += (c ? "; " : "") + std::string("chain ") + std::to_string(c + 1) + ": " +
                  std::to_string(path.n_jumps()) + " jumps, all rates within 5%";
    }
    report(5, pass, detail);
  }

  // ---- Criterion 6: infinitesimal-operator identity ----
  {
    PemAdm model = nominal_acc();
    SynthesisOutcome out = synth_pgc(model, SynthesisOptions{});
    bool pass = out.feasible();
    std::string detail = "pgc synthesis infeasible";
    if (pass) {
      ClosedLoop cl = build_closed_loop(model, out.result->gains);
      SimConfig cfg;
      cfg.dt = 1e-3;
      cfg.horizon = 1.1;
      cfg.seed = 314;
      DynkinReport rep = validate_dynkin(cl, out.result->certificate.p_mats, {-5.0, -4.0}, 1.0, 100000, cfg);
      pass = rep.rel_error <= 0.05;
      detail = "d/dt E[V] = " + fmt(rep.lhs) + " vs E[LV] = " + fmt(rep.rhs) + " at t = 1 s (rel err " +
               fmt(100.0 * rep.rel_error) + "%, 100000 paths)";
    }
    report(6, pass, detail);
  }

  // ---- Criterion 7: weak-order bias scaling via a coupled exact sampler ----
  {
    OuBias coarse = ou_coupled_bias(2e-3, 100000, 11000);
    OuBias fine = ou_coupled_bias(1e-3, 100000, 12000);
    bool resolved = std::abs(coarse.bias) > 5.0 * coarse.stderr_bias &&
                    std::abs(fine.bias) > 5.0 * fine.stderr_bias &&
                    coarse.stderr_bias < 0.2 * std::abs(coarse.bias) &&
                    fine.stderr_bias < 0.2 * std::abs(fine.bias);
    double ratio = coarse.bias / fine.bias;
    bool stationary = std::abs(fine.em_mean_sq - 0.5) <= 0.05;
    bool pass = resolved && ratio >= 1.8 && stationary;
    report(7, pass,
           "bias(dt=2e-3) = " + fmt(coarse.bias) + " +- " + fmt(coarse.stderr_bias) +
               ", bias(dt=1e-3) = " + fmt(fine.bias) + " +- " + fmt(fine.stderr_bias) + ", ratio " +
               fmt(ratio) + " (need >= 1.8); stationary E[x^2] = " + fmt(fine.em_mean_sq));
  }

  // ---- Criterion 8: scenario-level comparison ----
  {
    ScenarioConfig s1 = make_scenario_config(1);
    ScenarioResult pgc1 = run_scenario(1, ControlMethod::pgc, s1);
    ScenarioResult idm1 = run_scenario(1, ControlMethod::idm, s1);
    ScenarioResult rbc1 = run_scenario(1, ControlMethod::rbc, s1);
    ScenarioConfig s3 = make_scenario_config(3);
    ScenarioResult pgc3 = run_scenario(3, ControlMethod::pgc, s3);
    ScenarioResult idm3 = run_scenario(3, ControlMethod::idm, s3);
    ScenarioResult rbc3 = run_scenario(3, ControlMethod::rbc, s3);
    bool pass = pgc1.collision_fraction == 0.0 && pgc1.tail_mse <= idm1.tail_mse &&
                pgc1.tail_mse <= rbc1.tail_mse && pgc3.collision_fraction <= 0.01 &&
                idm3.failure_fraction > 0.5 && rbc3.failure_fraction > 0.5;
    report(8, pass,
           "scenario 1 tail MSE pgc/idm/rbc = " + fmt(pgc1.tail_mse) + "/" + fmt(idm1.tail_mse) + "/" +
               fmt(rbc1.tail_mse) + ", pgc collisions " + fmt(pgc1.collision_fraction) +
               "; scenario 3 pgc collisions " + fmt(pgc3.collision_fraction) + ", idm/rbc failures " +
               fmt(idm3.failure_fraction) + "/" + fmt(rbc3.failure_fraction));
  }

  // ---- Criterion 9: byte-identical CSVs on re-run and manifest replay ----
  {
    fs::path cfg_file = work / "nominal.json";
    fs::path a = work / "run_a", b = work / "run_b", c = work / "run_c";
    int rc = run_cli(jumpctl + " simulate --config " + cfg_file.string() + " --out " + a.string());
    rc |= run_cli(jumpctl + " simulate --config " + cfg_file.string() + " --out " + b.string());
    // replay from the manifest the first run wrote
    rc |= run_cli(jumpctl + " simulate --config " + (a / "manifest.json").string() + " --out " + c.string());
    std::string d1, d2;
    bool pass = rc == 0 && compare_csvs(a, b, d1) && compare_csvs(a, c, d2);
    report(9, pass,
           rc != 0 ? "simulate exited nonzero" : ("re-run: " + d1 + "; manifest replay: " + d2));
  }

  // ---- Criterion 10: full reproduction runtime ----
  {
    auto t0 = std::chrono::steady_clock::now();
    int rc = 0;
    for (int s = 1; s <= 3; ++s) {
      fs::path out = work / ("repro" + std::to_string(s));
      rc |= run_cli(jumpctl + " reproduce --scenario " + std::to_string(s) + " --out " + out.string());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool artifacts = fs::exists(work / "repro1" / "scenario1_summary.json") &&
                     fs::exists(work / "repro3" / "scenario3_comparison.svg");
    bool pass = rc == 0 && artifacts && secs < 300.0;
    report(10, pass,
           "all three scenarios (500 paths each) reproduced in " + fmt(secs) + " s (limit 300 s)");
  }

  return g_all_pass ? 0 : 1;
}
