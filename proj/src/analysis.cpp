#include "mjls/analysis.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mjls {

namespace {

// M(i) = A_cl' P(i) + P(i) A_cl + sum_j q_ij P(j)
Matrix lyapunov_lhs(const ClosedLoop& cl, const std::vector<Matrix>& p, int i) {
  Matrix m = cl.a_cl[i].transpose() * p[i] + p[i] * cl.a_cl[i];
  for (int j = 0; j < cl.n_modes(); ++j) m += p[j] * cl.generator.rates(i, j);
  return m;
}

Certificate derive_constants(const ClosedLoop& cl, std::vector<Matrix> p) {
  Certificate cert;
  cert.p_mats = std::move(p);
  const int nm = cl.n_modes();
  double worst_m = -std::numeric_limits<double>::infinity();
  cert.gamma2 = std::numeric_limits<double>::infinity();
  cert.gamma3 = -std::numeric_limits<double>::infinity();
  cert.c1 = 0.0;
  for (int i = 0; i < nm; ++i) {
    worst_m = std::max(worst_m, lambda_max(lyapunov_lhs(cl, cert.p_mats, i)));
    SymEig pe = eig_sym(cert.p_mats[i]);
    cert.gamma2 = std::min(cert.gamma2, pe.values.front());
    cert.gamma3 = std::max(cert.gamma3, pe.values.back());
    cert.c1 = std::max(cert.c1, (cl.w[i].transpose() * cert.p_mats[i] * cl.w[i]).trace());
  }
  cert.gamma1 = -worst_m;
  cert.ss_bound = cert.gamma3 * cert.c1 / (cert.gamma1 * cert.gamma2);
  cert.rate = cert.gamma1 / cert.gamma3;
  return cert;
}

}  // namespace

double Certificate::alltime_bound(const std::vector<double>& x0) const {
  double x0sq = 0.0;
  for (double v : x0) x0sq += v * v;
  return std::max(gamma3 / gamma2 * x0sq, ss_bound);
}

CertificateResult find_certificate(const ClosedLoop& cl, double strictness) {
  CertificateResult res;
  const int n = cl.state_dim();
  const int nm = cl.n_modes();

  LmiProgram prog(strictness);
  std::vector<int> pv;
  for (int i = 0; i < nm; ++i) pv.push_back(prog.add_variable("P" + std::to_string(i), n, n, true));
  for (int i = 0; i < nm; ++i) {
    prog.add_constraint_pos([i](const std::vector<Matrix>& vars) { return vars[i]; });
    prog.add_constraint_neg([&cl, i](const std::vector<Matrix>& vars) { return lyapunov_lhs(cl, vars, i); });
  }

  SdpSolution sol = sdp_solve(prog);
  res.solver_status = sol.status;
  res.message = sol.message;
  if (sol.status == SdpStatus::numerical_failure) throw std::runtime_error("find_certificate: solver failure: " + sol.message);
  if (!sol.ok()) return res;

  Certificate cert = derive_constants(cl, sol.variables);
  CertificateCheck check = verify_certificate(cl, cert);
  if (!check.pass) {
    res.message = "solver returned a point that fails re-verification";
    return res;
  }
  res.certificate = std::move(cert);
  return res;
}

CertificateCheck verify_certificate(const ClosedLoop& cl, const Certificate& cert) {
  CertificateCheck check;
  const int nm = cl.n_modes();
  if (static_cast<int>(cert.p_mats.size()) != nm) {
    check.violations.push_back("certificate has " + std::to_string(cert.p_mats.size()) + " P matrices for " +
                               std::to_string(nm) + " modes");
    return check;
  }
  for (int i = 0; i < nm; ++i) {
    const double pmin = lambda_min(cert.p_mats[i]);
    if (!(pmin > 0.0)) check.violations.push_back("P(" + std::to_string(i) + ") not positive definite (lambda_min = " + std::to_string(pmin) + ")");
    check.mode_lambda_max.push_back(lambda_max(lyapunov_lhs(cl, cert.p_mats, i)));
    if (!(check.mode_lambda_max.back() < 0.0))
      check.violations.push_back("M(" + std::to_string(i) + ") not negative definite (lambda_max = " + std::to_string(check.mode_lambda_max.back()) + ")");
  }
  check.recomputed = derive_constants(cl, cert.p_mats);
  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)}); };
  if (!close(check.recomputed.gamma1, cert.gamma1)) check.violations.push_back("gamma1 mismatch");
  if (!close(check.recomputed.gamma2, cert.gamma2)) check.violations.push_back("gamma2 mismatch");
  if (!close(check.recomputed.gamma3, cert.gamma3)) check.violations.push_back("gamma3 mismatch");
  if (!close(check.recomputed.c1, cert.c1)) check.violations.push_back("c1 mismatch");
  check.pass = check.violations.empty();
  return check;
}

MomentSolution solve_moments(const ClosedLoop& cl) {
  const int n = cl.state_dim();
  const int nm = cl.n_modes();
  const int dim = nm * n * n;
  const std::vector<double> pi = stationary_distribution(cl.generator);

  // The operator acting on the stacked (vec M_1, ..., vec M_N):
  // column-by-column construction from its action on unit matrices.
  Matrix op(dim, dim);
  auto idx = [n](int mode, int r, int c) { return mode * n * n + r * n + c; };
  for (int jm = 0; jm < nm; ++jm) {
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        Matrix unit(n, n);
        unit(r, c) = 1.0;
        // contribution of M_{jm} = unit to dM_i/dt
        for (int im = 0; im < nm; ++im) {
          Matrix contrib(n, n);
          if (im == jm) contrib += cl.a_cl[im] * unit + unit * cl.a_cl[im].transpose();
          contrib += unit * cl.generator.rates(jm, im);
          for (int rr = 0; rr < n; ++rr)
            for (int cc = 0; cc < n; ++cc) op(idx(im, rr, cc), idx(jm, r, c)) += contrib(rr, cc);
        }
      }
    }
  }

  MomentSolution out;
  out.spectral_abscissa = spectral_abscissa(op);
  if (std::abs(out.spectral_abscissa) < 1e-9)
    throw std::runtime_error("solve_moments: moment operator is marginal (spectral abscissa " +
                             std::to_string(out.spectral_abscissa) + ")");
  out.stable = out.spectral_abscissa < 0.0;
  if (!out.stable) return out;

  std::vector<double> rhs(dim, 0.0);
  for (int im = 0; im < nm; ++im) {
    Matrix forcing = cl.w[im] * cl.w[im].transpose() * pi[im];
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) rhs[idx(im, r, c)] = -forcing(r, c);
  }
  std::vector<double> m = lu_solve(op, rhs);
  for (int im = 0; im < nm; ++im) {
    Matrix mi(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) mi(r, c) = m[idx(im, r, c)];
    mi.symmetrize();
    out.second_moments.push_back(mi);
    out.total_ms += mi.trace();
  }
  return out;
}

BoundReport bound_report(const Certificate& cert, const std::vector<double>& x0) {
  BoundReport rep;
  rep.ss_bound = cert.ss_bound;
  rep.rate = cert.rate;
  rep.alltime_bound = cert.alltime_bound(x0);
  return rep;
}

}  // namespace mjls
