#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mjls/analysis.hpp"
#include "mjls/model.hpp"
#include "mjls/sdp.hpp"

namespace mjls {

// Design parameters for performance-guaranteed synthesis: decay requirement
// gamma1_bar, Lyapunov eigenvalue box [gamma2_bar, gamma3_bar] with
// gamma3_bar = alpha1 * gamma2_bar.
struct SynthesisOptions {
  double gamma1_bar = 0.8;
  double gamma2_bar = 0.1;
  double gamma3_bar = 1.0;
  double alpha1 = 10.0;
  double strictness = 1e-6;

  void validate() const;  // throws std::invalid_argument on violation
};

struct SynthesisResult {
  std::vector<Matrix> s_mats;  // S(i) = P(i)^-1, n x n
  std::vector<Matrix> y_mats;  // Y(i), p x p
  std::vector<Matrix> f_mats;  // F(i) = K(i) Y(i), m x p
  GainSet gains;               // K(i) = F(i) Y(i)^-1
  double gamma4 = 0.0;         // PGC epigraph optimum
  double guaranteed_bound = 0.0;  // alpha1 * gamma3_bar^3 * gamma4 / gamma1_bar
  Certificate certificate;     // from the mandatory closed-loop re-verification
};

struct SynthesisOutcome {
  std::optional<SynthesisResult> result;
  SdpStatus solver_status = SdpStatus::infeasible;
  std::string message;
  bool feasible() const { return result.has_value(); }
};

// Stochastic stabilizing controller (SSC) program:
//   [[Delta(i), Lambda_i(S)], [Lambda_i(S)', -Xi_i(S)]] < 0,
//   C(i)S(i) = Y(i)C(i),  S(i) > 0,  Y(i) > 0
// with Delta(i) = S A' + C'F'B' + A S + B F C + q_ii S.
LmiProgram build_ssc_program(const PemAdm& model, double strictness = 1e-6);

// Performance-guaranteed controller (PGC) program: SSC with Delta replaced by
// Delta + gamma1_bar*S, the eigenvalue box 1/gamma3_bar <= S <=
// 1/gamma2_bar, and the epigraph objective min gamma4 with
// tr((B F D)'(B F D)) <= gamma4 per mode via a Schur lift.
LmiProgram build_pgc_program(const PemAdm& model, const SynthesisOptions& opts);

SynthesisOutcome synth_ssc(const PemAdm& model, double strictness = 1e-6);
SynthesisOutcome synth_pgc(const PemAdm& model, const SynthesisOptions& opts);

}  // namespace mjls
