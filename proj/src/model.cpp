#include "mjls/model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mjls {

namespace {
constexpr double kRowSumTol = 1e-12;
}

int Generator::repair_diagonal(double repair_tol) {
  int repaired = 0;
  for (int i = 0; i < n_modes; ++i) {
    double off = 0.0;
    for (int j = 0; j < n_modes; ++j)
      if (j != i) off += rates(i, j);
    const double should = -off;
    const double err = std::abs(rates(i, i) - should);
    if (err > kRowSumTol && err <= repair_tol) {
      rates(i, i) = should;
      ++repaired;
    }
  }
  return repaired;
}

std::string ValidationReport::summary() const {
  if (violations.empty()) return "ok";
  std::ostringstream os;
  for (const auto& v : violations) {
    if (v.mode >= 0) os << "mode " << v.mode << ": ";
    os << v.field << ": " << v.message << "\n";
  }
  return os.str();
}

ValidationReport validate_generator(const Generator& gen) {
  ValidationReport rep;
  if (gen.n_modes <= 0) {
    rep.violations.push_back({-1, "generator.n_modes", "must be positive"});
    return rep;
  }
  if (gen.rates.rows() != gen.n_modes || gen.rates.cols() != gen.n_modes) {
    std::ostringstream os;
    os << "rates is " << gen.rates.rows() << "x" << gen.rates.cols() << ", expected " << gen.n_modes << "x" << gen.n_modes;
    rep.violations.push_back({-1, "generator.rates", os.str()});
    return rep;
  }
  for (int i = 0; i < gen.n_modes; ++i) {
    double row_sum = 0.0;
    for (int j = 0; j < gen.n_modes; ++j) {
      const double q = gen.rates(i, j);
      if (!std::isfinite(q)) {
        rep.violations.push_back({-1, "generator.rates", "non-finite entry at (" + std::to_string(i) + "," + std::to_string(j) + ")"});
        return rep;
      }
      if (j != i && q < 0.0) {
        std::ostringstream os;
        os << "off-diagonal q_" << i << j << " = " << q << " is negative";
        rep.violations.push_back({-1, "generator.rates", os.str()});
      }
      row_sum += q;
    }
    if (std::abs(row_sum) > kRowSumTol) {
      std::ostringstream os;
      os << "row " << i << " sums to " << row_sum;
      rep.violations.push_back({-1, "generator.rates", os.str()});
    }
  }
  return rep;
}

ValidationReport validate_model(const PemAdm& model) {
  ValidationReport rep = validate_generator(model.generator);
  const int n = model.state_dim, m = model.input_dim, p = model.output_dim;
  if (n <= 0) rep.violations.push_back({-1, "state_dim", "must be positive"});
  if (m <= 0) rep.violations.push_back({-1, "input_dim", "must be positive"});
  if (p <= 0) rep.violations.push_back({-1, "output_dim", "must be positive"});
  if (static_cast<int>(model.modes.size()) != model.generator.n_modes) {
    std::ostringstream os;
    os << "modes.len = " << model.modes.size() << " != n_modes = " << model.generator.n_modes;
    rep.violations.push_back({-1, "modes", os.str()});
  }
  auto check_dims = [&](int mode, const char* name, const Matrix& mat, int r, int c) {
    if (mat.rows() != r || mat.cols() != c) {
      std::ostringstream os;
      os << "is " << mat.rows() << "x" << mat.cols() << ", expected " << r << "x" << c;
      rep.violations.push_back({mode, name, os.str()});
    } else if (!mat.all_finite()) {
      rep.violations.push_back({mode, name, "non-finite entries"});
    }
  };
  for (size_t i = 0; i < model.modes.size(); ++i) {
    const int mi = static_cast<int>(i);
    check_dims(mi, "A", model.modes[i].a, n, n);
    check_dims(mi, "B", model.modes[i].b, n, m);
    check_dims(mi, "C", model.modes[i].c, p, n);
    check_dims(mi, "D", model.modes[i].d, p, p);
  }
  return rep;
}

ClosedLoop build_closed_loop(const PemAdm& model, const GainSet& gains) {
  ValidationReport rep = validate_model(model);
  if (!rep.ok()) throw std::invalid_argument("build_closed_loop: invalid model:\n" + rep.summary());
  if (gains.gains.size() != model.modes.size())
    throw std::invalid_argument("build_closed_loop: " + std::to_string(gains.gains.size()) + " gains for " +
                                std::to_string(model.modes.size()) + " modes");
  ClosedLoop cl;
  cl.generator = model.generator;
  for (size_t i = 0; i < model.modes.size(); ++i) {
    const Matrix& k = gains.gains[i];
    if (k.rows() != model.input_dim || k.cols() != model.output_dim)
      throw std::invalid_argument("build_closed_loop: gain for mode " + std::to_string(i) + " is " +
                                  std::to_string(k.rows()) + "x" + std::to_string(k.cols()) + ", expected " +
                                  std::to_string(model.input_dim) + "x" + std::to_string(model.output_dim));
    const ModeSystem& ms = model.modes[i];
    cl.a_cl.push_back(ms.a + ms.b * k * ms.c);
    cl.w.push_back(ms.b * k * ms.d);
  }
  return cl;
}

std::vector<double> stationary_distribution(const Generator& gen) {
  ValidationReport rep = validate_generator(gen);
  if (!rep.ok()) throw std::invalid_argument("stationary_distribution: invalid generator:\n" + rep.summary());
  const int n = gen.n_modes;
  // pi * Q = 0 with sum(pi) = 1; replace the last column of Q^T by the
  // normalization row.
  Matrix sys(n, n);
  std::vector<double> rhs(n, 0.0);
  for (int i = 0; i < n - 1; ++i)
    for (int j = 0; j < n; ++j) sys(i, j) = gen.rates(j, i);
  for (int j = 0; j < n; ++j) sys(n - 1, j) = 1.0;
  rhs[n - 1] = 1.0;

  std::vector<double> pi;
  try {
    pi = lu_solve(sys, rhs);
  } catch (const std::runtime_error&) {
    throw std::runtime_error("stationary_distribution: no unique stationary distribution (singular chain)");
  }
  double residual = 0.0;
  for (int j = 0; j < n; ++j) {
    double dot = 0.0;
    for (int i = 0; i < n; ++i) dot += pi[i] * gen.rates(i, j);
    residual = std::max(residual, std::abs(dot));
  }
  for (double p : pi) {
    if (!(p > -1e-10) || !std::isfinite(p))
      throw std::runtime_error("stationary_distribution: no unique stationary distribution (reducible chain)");
  }
  if (residual > 1e-10) throw std::runtime_error("stationary_distribution: residual too large, chain ill-conditioned");
  for (double& p : pi) p = std::max(p, 0.0);
  return pi;
}

}  // namespace mjls
