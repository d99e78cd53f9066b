#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "mjls/acc.hpp"
#include "mjls/analysis.hpp"
#include "mjls/simulate.hpp"

namespace {

using namespace mjls;

ClosedLoop scalar_ou(double a = -1.0, double w = 1.0) {
  ClosedLoop cl;
  cl.a_cl = {Matrix({{a}})};
  cl.w = {Matrix({{w}})};
  cl.generator.n_modes = 1;
  cl.generator.rates = Matrix({{0.0}});
  return cl;
}

Generator low_gen() { return Generator{2, Matrix({{-4.0, 4.0}, {0.5, -0.5}})}; }

ClosedLoop acc_loop() {
  PemAdm model = build_acc_model(AccConfig{});
  GainSet gains;
  gains.gains = {Matrix({{0.0, -2.52}}), Matrix({{-2.61, -1.76}})};
  return build_closed_loop(model, gains);
}

}  // namespace

TEST_CASE("sim config validation") {
  SimConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.n_steps() == 10000);
  SimConfig bad = cfg;
  bad.dt = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.n_paths = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.record_stride = -1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("ctmc sampling recovers occupation fractions and jump rates") {
  Generator gen = low_gen();
  CounterRng rng(99, 0);
  double horizon = 20000.0;
  ModePath path = sample_ctmc(gen, 0, horizon, rng);
  REQUIRE(path.n_jumps() > 100);

  double time1 = 0.0;
  for (size_t k = 0; k < path.modes.size(); ++k) {
    double end = (k + 1 < path.times.size()) ? path.times[k + 1] : horizon;
    if (path.modes[k] == 1) time1 += end - path.times[k];
  }
  // Stationary occupation of mode 1 is 8/9 for this chain.
  CHECK(time1 / horizon == doctest::Approx(8.0 / 9.0).epsilon(0.02));

  GeneratorEstimate est = estimate_generator({path}, 2);
  CHECK(est.row_estimable[0]);
  CHECK(est.row_estimable[1]);
  CHECK(est.rates(0, 1) == doctest::Approx(4.0).epsilon(0.1));
  CHECK(est.rates(1, 0) == doctest::Approx(0.5).epsilon(0.1));
  // ML estimate must sit inside its own confidence interval.
  CHECK(std::abs(est.rates(0, 1) - 4.0) < 3.0 * est.ci_halfwidth(0, 1));
}

TEST_CASE("absorbing mode holds forever") {
  Generator gen{2, Matrix({{-1.0, 1.0}, {0.0, 0.0}})};
  CounterRng rng(5, 0);
  ModePath path = sample_ctmc(gen, 1, 50.0, rng);
  CHECK(path.n_jumps() == 0);
  CHECK(path.mode_at(0.0) == 1);
  CHECK(path.mode_at(49.9) == 1);
}

TEST_CASE("mode_at does interval lookup") {
  ModePath path;
  path.times = {0.0, 1.0, 3.0};
  path.modes = {0, 1, 0};
  path.horizon = 5.0;
  CHECK(path.mode_at(0.0) == 0);
  CHECK(path.mode_at(0.999) == 0);
  CHECK(path.mode_at(1.0) == 1);
  CHECK(path.mode_at(2.5) == 1);
  CHECK(path.mode_at(3.0) == 0);
  CHECK(path.mode_at(4.9) == 0);
}

TEST_CASE("fixed initial mode is honored and stationary draw is reproducible") {
  Generator gen = low_gen();
  CounterRng rng(1, 0);
  CHECK(sample_initial_mode(gen, 1, rng) == 1);
  CHECK(sample_initial_mode(gen, 0, rng) == 0);
  CounterRng a(7, 3), b(7, 3);
  CHECK(sample_initial_mode(gen, -1, a) == sample_initial_mode(gen, -1, b));
}

TEST_CASE("noiseless path decays like the matrix exponential") {
  ClosedLoop cl = scalar_ou(-2.0, 0.0);
  SimConfig cfg;
  cfg.dt = 1e-4;
  cfg.horizon = 2.0;
  cfg.n_paths = 1;
  cfg.initial_mode = 0;
  cfg.record_stride = 1000;
  TrajectorySample traj = integrate_path(cl, {3.0}, cfg);
  REQUIRE_FALSE(traj.diverged);
  for (size_t k = 0; k < traj.times.size(); ++k) {
    double expected = 3.0 * std::exp(-2.0 * traj.times[k]);
    CHECK(traj.states[k][0] == doctest::Approx(expected).epsilon(1e-3));
  }
}

TEST_CASE("ornstein-uhlenbeck ensemble matches the analytic stationary variance") {
  ClosedLoop cl = scalar_ou();  // stationary variance 1/2
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.horizon = 20.0;
  cfg.n_paths = 800;
  cfg.seed = 11;
  cfg.record_stride = 20;
  cfg.initial_mode = 0;
  EnsembleStats stats = run_ensemble(cl, {0.0}, cfg);
  CHECK(stats.n_paths_used == 800);
  CHECK(stats.divergence_fraction == 0.0);
  double tail = stats.tail_mean_sq();
  CHECK(tail == doctest::Approx(0.5).epsilon(0.12));
  // Consistency of the reported standard error.
  CHECK(std::abs(tail - 0.5) < 6.0 * stats.stderr_mean_sq.back() + 0.05);
}

TEST_CASE("paths are deterministic in (seed, path index)") {
  ClosedLoop cl = acc_loop();
  SimConfig cfg;
  cfg.horizon = 2.0;
  cfg.seed = 1234;
  TrajectorySample a = integrate_path(cl, {-5.0, -4.0}, cfg, 17);
  TrajectorySample b = integrate_path(cl, {-5.0, -4.0}, cfg, 17);
  REQUIRE(a.times.size() == b.times.size());
  for (size_t k = 0; k < a.times.size(); ++k) {
    CHECK(a.states[k][0] == b.states[k][0]);
    CHECK(a.states[k][1] == b.states[k][1]);
    CHECK(a.modes[k] == b.modes[k]);
  }
  TrajectorySample c = integrate_path(cl, {-5.0, -4.0}, cfg, 18);
  bool differs = false;
  for (size_t k = 0; k < a.times.size() && !differs; ++k)
    differs = a.states[k][0] != c.states[k][0];
  CHECK(differs);
}

TEST_CASE("parallel ensemble is bit-identical to the serial reference") {
  ClosedLoop cl = acc_loop();
  SimConfig cfg;
  cfg.horizon = 3.0;
  cfg.n_paths = 200;
  cfg.seed = 7;
  cfg.record_stride = 10;
  EnsembleStats par = run_ensemble(cl, {-5.0, -4.0}, cfg);
  EnsembleStats ser = run_ensemble_serial(cl, {-5.0, -4.0}, cfg);
  REQUIRE(par.times.size() == ser.times.size());
  for (size_t k = 0; k < par.times.size(); ++k) {
    CHECK(par.mean_sq[k] == ser.mean_sq[k]);
    CHECK(par.stderr_mean_sq[k] == ser.stderr_mean_sq[k]);
    for (int d = 0; d < 2; ++d) {
      CHECK(par.mean_state[k][d] == ser.mean_state[k][d]);
      CHECK(par.std_state[k][d] == ser.std_state[k][d]);
    }
  }
  CHECK(par.n_paths_used == ser.n_paths_used);
}

TEST_CASE("single-path ensemble has zero spread") {
  ClosedLoop cl = scalar_ou();
  SimConfig cfg;
  cfg.horizon = 1.0;
  cfg.n_paths = 1;
  cfg.initial_mode = 0;
  cfg.record_stride = 100;
  EnsembleStats stats = run_ensemble(cl, {1.0}, cfg);
  for (size_t k = 0; k < stats.times.size(); ++k) CHECK(stats.std_state[k][0] == 0.0);
}

TEST_CASE("retained paths agree with direct integration") {
  ClosedLoop cl = acc_loop();
  SimConfig cfg;
  cfg.horizon = 1.0;
  cfg.n_paths = 16;
  cfg.seed = 3;
  cfg.record_stride = 50;
  std::vector<TrajectorySample> kept;
  run_ensemble(cl, {-5.0, -4.0}, cfg, &kept, 2);
  REQUIRE(kept.size() == 2);
  TrajectorySample direct = integrate_path(cl, {-5.0, -4.0}, cfg, 0);
  REQUIRE(kept[0].times.size() == direct.times.size());
  for (size_t k = 0; k < direct.times.size(); ++k) {
    CHECK(kept[0].states[k][0] == direct.states[k][0]);
    CHECK(kept[0].states[k][1] == direct.states[k][1]);
  }
}

TEST_CASE("unstable dynamics are flagged as divergent") {
  ClosedLoop cl = scalar_ou(5.0, 0.0);
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.horizon = 10.0;
  cfg.n_paths = 4;
  cfg.initial_mode = 0;
  EnsembleStats stats = run_ensemble(cl, {1.0}, cfg);
  CHECK(stats.divergence_fraction == 1.0);
  CHECK(stats.n_paths_used == 0);
}

TEST_CASE("generator estimates concatenate additively across paths") {
  Generator gen = low_gen();
  std::vector<ModePath> paths;
  CounterRng rng(42, 0);
  for (int k = 0; k < 20; ++k) {
    CounterRng prng(42, static_cast<uint64_t>(k));
    paths.push_back(sample_ctmc(gen, k % 2, 200.0, prng));
  }
  GeneratorEstimate est = estimate_generator(paths, 2);
  CHECK(est.rates(0, 1) == doctest::Approx(4.0).epsilon(0.1));
  CHECK(est.rates(1, 0) == doctest::Approx(0.5).epsilon(0.1));
  double total_time = est.time_in_mode[0] + est.time_in_mode[1];
  CHECK(total_time == doctest::Approx(20 * 200.0).epsilon(1e-9));
}

TEST_CASE("never-visited modes are reported unestimable") {
  ModePath path;
  path.times = {0.0};
  path.modes = {0};
  path.horizon = 10.0;
  GeneratorEstimate est = estimate_generator({path}, 2);
  CHECK(est.row_estimable[0]);
  CHECK_FALSE(est.row_estimable[1]);
  CHECK(est.total_jumps == 0);
}

TEST_CASE("infinitesimal-operator identity holds at stationarity") {
  // For the stationary OU process E[V] is constant, so the forward
  // difference must balance the generator term to within noise.
  ClosedLoop cl = scalar_ou();
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.seed = 21;
  cfg.initial_mode = 0;
  std::vector<Matrix> p = {Matrix({{1.0}})};
  DynkinReport rep = validate_dynkin(cl, p, {0.0}, 8.0, 20000, cfg);
  CHECK(rep.n_paths == 20000);
  // At stationarity both sides are ~0; check absolute closeness.
  CHECK(std::abs(rep.lhs - rep.rhs) < 0.15);
}

TEST_CASE("infinitesimal-operator identity holds on the switched loop") {
  ClosedLoop cl = acc_loop();
  CertificateResult cert = find_certificate(cl);
  REQUIRE(cert.found());
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.seed = 31;
  DynkinReport rep = validate_dynkin(cl, cert.certificate->p_mats, {-5.0, -4.0}, 0.5, 40000, cfg);
  CHECK(rep.rel_error < 0.1);
}
