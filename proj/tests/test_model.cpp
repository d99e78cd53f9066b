#include <cmath>

#include "doctest.h"
#include "mjls/model.hpp"

using namespace mjls;

namespace {

PemAdm two_mode_model() {
  PemAdm m;
  m.state_dim = 2;
  m.input_dim = 1;
  m.output_dim = 2;
  ModeSystem m0;
  m0.a = Matrix({{0.0, 1.0}, {0.0, 0.0}});
  m0.b = Matrix({{0.0}, {1.0}});
  m0.c = Matrix::diag({0.0, 1.0});
  m0.d = Matrix::diag({1.0, 1.0});
  ModeSystem m1 = m0;
  m1.c = Matrix::identity(2);
  m1.d = Matrix::diag({0.05, 0.5});
  m.modes = {m0, m1};
  m.generator = Generator{2, Matrix({{-4.0, 4.0}, {0.5, -0.5}})};
  return m;
}

}  // namespace

TEST_CASE("validate_generator accepts a proper rate matrix") {
  Generator g{2, Matrix({{-4.0, 4.0}, {0.5, -0.5}})};
  CHECK(validate_generator(g).ok());
}

TEST_CASE("validate_generator flags negative off-diagonals and bad row sums") {
  Generator neg{2, Matrix({{-1.0, -1.0}, {1.0, -1.0}})};
  CHECK_FALSE(validate_generator(neg).ok());
  Generator rowsum{2, Matrix({{-1.0, 2.0}, {1.0, -1.0}})};
  CHECK_FALSE(validate_generator(rowsum).ok());
}

TEST_CASE("generator diagonal repair fixes rounded rows") {
  Generator g{2, Matrix({{-0.9999999999, 1.0}, {0.5, -0.5}})};
  int repaired = g.repair_diagonal(1e-9);
  CHECK(repaired == 1);
  CHECK(g.rates(0, 0) == doctest::Approx(-1.0));
  CHECK(validate_generator(g).ok());
}

TEST_CASE("validate_model accepts the car-following model") {
  CHECK(validate_model(two_mode_model()).ok());
}

TEST_CASE("validate_model reports dimension violations as data") {
  PemAdm m = two_mode_model();
  m.modes[1].b = Matrix({{0.0, 1.0}, {1.0, 0.0}});  // wrong input dim
  ValidationReport rep = validate_model(m);
  CHECK_FALSE(rep.ok());
  CHECK_FALSE(rep.summary().empty());
}

TEST_CASE("build_closed_loop forms A + BKC and BKD") {
  PemAdm m = two_mode_model();
  GainSet gains;
  gains.gains = {Matrix({{0.0, -2.52}}), Matrix({{-2.61, -1.76}})};
  ClosedLoop cl = build_closed_loop(m, gains);
  REQUIRE(cl.n_modes() == 2);
  // mode 0: BKC = [0;1]*[0,-2.52]*diag(0,1) => row 1 = [0, -2.52]
  CHECK(cl.a_cl[0](0, 0) == doctest::Approx(0.0));
  CHECK(cl.a_cl[0](0, 1) == doctest::Approx(1.0));
  CHECK(cl.a_cl[0](1, 0) == doctest::Approx(0.0));
  CHECK(cl.a_cl[0](1, 1) == doctest::Approx(-2.52));
  // mode 1: position feedback present
  CHECK(cl.a_cl[1](1, 0) == doctest::Approx(-2.61));
  CHECK(cl.a_cl[1](1, 1) == doctest::Approx(-1.76));
  // W = BKD: mode 1 row 1 = [-2.61*0.05, -1.76*0.5]
  CHECK(cl.w[1](1, 0) == doctest::Approx(-0.1305));
  CHECK(cl.w[1](1, 1) == doctest::Approx(-0.88));
  CHECK(cl.w[0](0, 0) == doctest::Approx(0.0));
}

TEST_CASE("build_closed_loop rejects mismatched gain dimensions") {
  PemAdm m = two_mode_model();
  GainSet gains;
  gains.gains = {Matrix({{0.0, -2.52}}), Matrix({{-2.61}})};
  CHECK_THROWS_AS(build_closed_loop(m, gains), std::invalid_argument);
}

TEST_CASE("stationary distribution of two-state chains") {
  // pi0*q01 = pi1*q10 => pi = (q10, q01)/(q01+q10)
  Generator low{2, Matrix({{-4.0, 4.0}, {0.5, -0.5}})};
  auto pi = stationary_distribution(low);
  CHECK(pi[0] == doctest::Approx(0.5 / 4.5));
  CHECK(pi[1] == doctest::Approx(4.0 / 4.5));

  Generator high{2, Matrix({{-4.0, 4.0}, {3.0, -3.0}})};
  auto pi2 = stationary_distribution(high);
  CHECK(pi2[0] == doctest::Approx(3.0 / 7.0));
  CHECK(pi2[1] == doctest::Approx(4.0 / 7.0));
}

TEST_CASE("stationary distribution of a 3-state chain sums to one and balances") {
  Generator g{3, Matrix({{-3.0, 2.0, 1.0}, {1.0, -2.0, 1.0}, {2.0, 2.0, -4.0}})};
  auto pi = stationary_distribution(g);
  CHECK(pi[0] + pi[1] + pi[2] == doctest::Approx(1.0));
  // pi Q = 0 checked directly
  for (int j = 0; j < 3; ++j) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += pi[static_cast<size_t>(i)] * g.rates(i, j);
    CHECK(std::abs(s) < 1e-12);
  }
}

TEST_CASE("stationary distribution rejects chains without a unique solution") {
  Generator decoupled{2, Matrix({{0.0, 0.0}, {0.0, 0.0}})};
  CHECK_THROWS(stationary_distribution(decoupled));
}
