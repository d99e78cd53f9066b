#pragma once

#include <string>
#include <vector>

#include "mjls/matrix.hpp"

namespace mjls {

// Transition rate matrix of a continuous-time Markov chain.
// Off-diagonals are rates in 1/s, rows sum to zero.
struct Generator {
  int n_modes = 0;
  Matrix rates;  // n_modes x n_modes

  // Recomputes the diagonal from the off-diagonals when the row sums
  // are off by no more than `repair_tol` (config files carry rounded
  // decimals). Returns the number of repaired rows.
  int repair_diagonal(double repair_tol = 1e-9);
};

// One switching mode of the jump system: dx = A x + B u, y = C x + D w.
struct ModeSystem {
  Matrix a;  // n x n
  Matrix b;  // n x m
  Matrix c;  // p x n
  Matrix d;  // p x p  (noise dimension equals measurement dimension)
};

// The full Markov-modulated system with noisy switched measurements.
struct PemAdm {
  int state_dim = 0;   // n
  int input_dim = 0;   // m
  int output_dim = 0;  // p
  std::vector<ModeSystem> modes;
  Generator generator;
};

// Per-mode output feedback gains K(i), each m x p.
struct GainSet {
  std::vector<Matrix> gains;
};

/// Closed loop under u = K(i) y:
//   dx = A_cl(i) x dt + W(i) dw,  A_cl = A + B K C,  W = B K D.
struct ClosedLoop {
  std::vector<Matrix> a_cl;  // n x n each
  std::vector<Matrix> w;     // n x p each
  Generator generator;

  int n_modes() const { return generator.n_modes; }
  int state_dim() const { return a_cl.empty() ? 0 : a_cl[0].rows(); }
  int noise_dim() const { return w.empty() ? 0 : w[0].cols(); }
};

struct Violation {
  int mode = -1;  // -1 when not mode specific
  std::string field;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string summary() const;
};

// Checks every structural invariant of the model; violations are data,
// never exceptions.
ValidationReport validate_model(const PemAdm& model);
ValidationReport validate_generator(const Generator& gen);

// Forms A_cl(i) = A + B K C and W(i) = B K D per mode. Throws on gain
// dimension mismatch, naming the offending mode.
ClosedLoop build_closed_loop(const PemAdm& model, const GainSet& gains);

/// Stationary distribution pi of an irreducible generator: pi >= 0,
// sum(pi) = 1, pi * rates = 0. Throws when the chain has no unique
// stationary distribution.
std::vector<double> stationary_distribution(const Generator& gen);

}  // namespace mjls
