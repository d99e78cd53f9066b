#include <cmath>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "mjls/acc.hpp"
#include "mjls/analysis.hpp"
#include "mjls/synthesis.hpp"

namespace {

using namespace mjls;

PemAdm acc_model() { return build_acc_model(AccConfig{}); }

void check_stabilizing(const PemAdm& model, const SynthesisResult& res) {
  ClosedLoop cl = build_closed_loop(model, res.gains);
  CertificateCheck check = verify_certificate(cl, res.certificate);
  std::string first_violation = check.violations.empty() ? "" : check.violations.front();
  INFO(first_violation);
  CHECK(check.pass);
  MomentSolution ms = solve_moments(cl);
  CHECK(ms.stable);
}

}  // namespace

TEST_CASE("stabilizing synthesis succeeds on the car-following model") {
  PemAdm model = acc_model();
  SynthesisOutcome out = synth_ssc(model);
  REQUIRE(out.feasible());
  const SynthesisResult& res = *out.result;
  REQUIRE(res.gains.gains.size() == 2);
  CHECK(res.gains.gains[0].rows() == 1);
  CHECK(res.gains.gains[0].cols() == 2);
  check_stabilizing(model, res);

  // The slack matrices must satisfy the reconstruction identities
  // K(i) = F(i) Y(i)^-1 and the commutation C(i) S(i) = Y(i) C(i).
  for (int i = 0; i < 2; ++i) {
    Matrix k = res.f_mats[i] * inverse(res.y_mats[i]);
    CHECK((k - res.gains.gains[i]).max_abs() < 1e-8);
    Matrix comm = model.modes[i].c * res.s_mats[i] - res.y_mats[i] * model.modes[i].c;
    CHECK(comm.max_abs() < 1e-6);
    CHECK(lambda_min(res.s_mats[i]) > 0.0);
  }
}

TEST_CASE("performance-guaranteed synthesis reproduces the published gains") {
  PemAdm model = acc_model();
  SynthesisOptions opts;  // defaults are the design parameters in use
  SynthesisOutcome out = synth_pgc(model, opts);
  REQUIRE(out.feasible());
  const SynthesisResult& res = *out.result;
  check_stabilizing(model, res);

  const Matrix& k0 = res.gains.gains[0];
  const Matrix& k1 = res.gains.gains[1];
  CHECK(std::abs(k0(0, 0) - 0.0) < 0.05);
  CHECK(std::abs(k0(0, 1) - (-2.52)) < 0.05);
  CHECK(std::abs(k1(0, 0) - (-2.61)) < 0.05);
  CHECK(std::abs(k1(0, 1) - (-1.76)) < 0.05);

  CHECK(res.gamma4 > 0.0);
  double expected = opts.alpha1 * std::pow(opts.gamma3_bar, 3) * res.gamma4 / opts.gamma1_bar;
  CHECK(res.guaranteed_bound == doctest::Approx(expected));

  // The guarantee must dominate the true steady-state second moment.
  ClosedLoop cl = build_closed_loop(model, res.gains);
  MomentSolution ms = solve_moments(cl);
  CHECK(res.guaranteed_bound >= ms.total_ms);

  // Eigenvalue box on S(i).
  for (const Matrix& s : res.s_mats) {
    CHECK(lambda_min(s) > 1.0 / opts.gamma3_bar - 1e-6);
    CHECK(lambda_max(s) < 1.0 / opts.gamma2_bar + 1e-6);
  }
}

TEST_CASE("gamma4 bounds the worst-mode noise-gain trace") {
  PemAdm model = acc_model();
  SynthesisOutcome out = synth_pgc(model, SynthesisOptions{});
  REQUIRE(out.feasible());
  const SynthesisResult& res = *out.result;
  for (int i = 0; i < 2; ++i) {
    Matrix bfd = model.modes[i].b * res.f_mats[i] * model.modes[i].d;
    CHECK((bfd.transpose() * bfd).trace() <= res.gamma4 + 1e-6);
  }
}

TEST_CASE("synthesis reports infeasibility on a hopeless plant") {
  // Unstable scalar mode with zero input matrix: no output feedback can
  // move the eigenvalue.
  PemAdm model;
  model.state_dim = 1;
  model.input_dim = 1;
  model.output_dim = 1;
  ModeSystem m;
  m.a = Matrix({{1.0}});
  m.b = Matrix({{0.0}});
  m.c = Matrix({{1.0}});
  m.d = Matrix({{1.0}});
  model.modes = {m};
  model.generator.n_modes = 1;
  model.generator.rates = Matrix({{0.0}});
  SynthesisOutcome ssc = synth_ssc(model);
  CHECK_FALSE(ssc.feasible());
  SynthesisOutcome pgc = synth_pgc(model, SynthesisOptions{});
  CHECK_FALSE(pgc.feasible());
}

TEST_CASE("high-misdetection chain is infeasible at the nominal design point") {
  AccConfig cfg;
  cfg.generator = Generator{2, Matrix({{-4.0, 4.0}, {3.0, -3.0}})};
  PemAdm model = build_acc_model(cfg);
  SynthesisOutcome out = synth_pgc(model, SynthesisOptions{});
  CHECK_FALSE(out.feasible());
}

TEST_CASE("design parameter validation") {
  SynthesisOptions opts;
  CHECK_NOTHROW(opts.validate());
  SynthesisOptions bad = opts;
  bad.gamma1_bar = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = opts;
  bad.gamma2_bar = 0.5;
  bad.gamma3_bar = 0.1;  // box inverted
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = opts;
  bad.strictness = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("random stable-by-design models synthesize and re-verify") {
  // Mildly unstable random plants with full-rank square C: stabilizing
  // synthesis should succeed and every success must re-verify.
  std::mt19937 rng(2026);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  int feasible_count = 0;
  for (int trial = 0; trial < 8; ++trial) {
    const int n = 2;
    PemAdm model;
    model.state_dim = n;
    model.input_dim = n;
    model.output_dim = n;
    model.generator.n_modes = 2;
    model.generator.rates = Matrix({{-1.0, 1.0}, {2.0, -2.0}});
    for (int i = 0; i < 2; ++i) {
      ModeSystem m;
      m.a = Matrix(n, n);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) m.a(r, c) = unif(rng);
      m.b = Matrix::identity(n);
      m.c = Matrix::identity(n);
      m.d = Matrix::identity(n) * 0.1;
      model.modes.push_back(m);
    }
    SynthesisOutcome out = synth_ssc(model);
    if (!out.feasible()) continue;
    ++feasible_count;
    check_stabilizing(model, *out.result);
  }
  // Full-actuation plants of this size are essentially always feasible.
  CHECK(feasible_count >= 6);
}
