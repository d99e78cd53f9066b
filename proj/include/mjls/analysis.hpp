#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mjls/model.hpp"
#include "mjls/sdp.hpp"

namespace mjls {

// Mean-square stability certificate: per-mode Lyapunov matrices P(i)
// with the derived constants of the bound chain.
//
//   M(i) = A_cl(i)' P(i) + P(i) A_cl(i) + sum_j q_ij P(j)  (must be < 0)
//   gamma1 = -max_i lambda_max(M(i))
//   gamma2 = min_i lambda_min(P(i)),  gamma3 = max_i lambda_max(P(i))
//   c1 = max_i tr(W(i)' P(i) W(i))
//   ss_bound = gamma3*c1/(gamma1*gamma2),  rate = gamma1/gamma3
struct Certificate {
  std::vector<Matrix> p_mats;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double gamma3 = 0.0;
  double c1 = 0.0;
  double ss_bound = 0.0;
  double rate = 0.0;

  // max { gamma3/gamma2 * x0'x0, ss_bound }
  double alltime_bound(const std::vector<double>& x0) const;
};

struct CertificateCheck {
  bool pass = false;
  std::vector<double> mode_lambda_max;  // lambda_max(M(i)) per mode
  Certificate recomputed;               // constants recomputed from scratch
  std::vector<std::string> violations;
};

struct CertificateResult {
  std::optional<Certificate> certificate;
  SdpStatus solver_status = SdpStatus::infeasible;
  std::string message;
  bool found() const { return certificate.has_value(); }
};

// Searches for a certificate by solving the coupled-LMI feasibility
// problem. Infeasible makes no claim about true instability (the
// condition is sufficient only).
CertificateResult find_certificate(const ClosedLoop& cl, double strictness = 1e-6);

// Recomputes every certificate quantity from scratch and checks the
// invariants at the stated tolerances.
CertificateCheck verify_certificate(const ClosedLoop& cl, const Certificate& cert);

// Exact steady-state second moments M_i = E[x x' 1{r=i}] from the
// coupled linear moment ODEs
//   dM_i/dt = A_cl(i) M_i + M_i A_cl(i)' + pi_i W(i)W(i)' + sum_j q_ji M_j
struct MomentSolution {
  std::vector<Matrix> second_moments;
  double total_ms = 0.0;  // sum_i tr(M_i) = steady-state E[x'x]
  bool stable = false;
  double spectral_abscissa = 0.0;  // of the moment operator
};

// Throws a "marginal" error when the operator spectral abscissa sits in
// (-1e-9, 1e-9).
MomentSolution solve_moments(const ClosedLoop& cl);

struct BoundReport {
  double ss_bound = 0.0;
  double rate = 0.0;
  double alltime_bound = 0.0;
};

BoundReport bound_report(const Certificate& cert, const std::vector<double>& x0);

}  // namespace mjls
