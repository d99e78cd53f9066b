#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mjls/analysis.hpp"
#include "mjls/model.hpp"
#include "mjls/rng.hpp"

namespace mjls {

struct SimConfig {
  double dt = 1e-3;       // s
  double horizon = 10.0;  // s
  int n_paths = 500;
  uint64_t seed = 1;
  int record_stride = 1;   // store every k-th step
  int initial_mode = -1;   // -1: draw from the stationary distribution

  void validate() const;  // throws std::invalid_argument
  int n_steps() const { return static_cast<int>(horizon / dt + 0.5); }
};

// Piecewise-constant mode path: modes[k] holds on [times[k], times[k+1]),
// the last mode until horizon. times[0] == 0.
struct ModePath {
  std::vector<double> times;
  std::vector<int> modes;
  double horizon = 0.0;

  int mode_at(double t) const;
  int n_jumps() const { return static_cast<int>(times.size()) - 1; }
};

// Exact CTMC sampling: exponential holding times with rate -q_ii, next
// mode j != i with probability q_ij / (-q_ii). Absorbing rows (all
// zeros) hold forever.
ModePath sample_ctmc(const Generator& gen, int r0, double horizon, CounterRng& rng);

// initial_mode >= 0 is taken verbatim; -1 draws from the stationary
// distribution (consumes exactly one uniform).
int sample_initial_mode(const Generator& gen, int initial_mode, CounterRng& rng);

struct TrajectorySample {
  std::vector<double> times;
  std::vector<std::vector<double>> states;        // [time][state dim]
  std::vector<int> modes;                         // mode at each recorded time
  std::vector<std::vector<double>> measurements;  // display-only, may be empty
  std::vector<std::vector<double>> controls;      // display-only, may be empty
  bool diverged = false;
  double divergence_time = 0.0;
};

// Euler-Maruyama on dx = A_cl(i) x dt + W(i) dw with the mode path
// sampled exactly and integration sub-stepped at jump instants.
// Deterministic given (cfg.seed, path_index). When model+gains are
// given, measurement/control traces are reconstructed for display as
// y = C x + D xi/sqrt(dt), u = K y (white noise has no pointwise value;
// this is a plotting convention only).
TrajectorySample integrate_path(const ClosedLoop& cl, const std::vector<double>& x0, const SimConfig& cfg,
                                uint64_t path_index = 0, const PemAdm* model = nullptr, const GainSet* gains = nullptr);

struct EnsembleStats {
  std::vector<double> times;
  std::vector<std::vector<double>> mean_state;  // [time][dim]
  std::vector<std::vector<double>> std_state;
  std::vector<double> mean_sq;         // E[x'x]
  std::vector<double> stderr_mean_sq;  // sample std / sqrt(paths used)
  double collision_fraction = 0.0;     // 0 unless a scenario installs a predicate
  double divergence_fraction = 0.0;
  int n_paths_used = 0;

  // time average of mean_sq over the trailing window [frac*T, T]
  double tail_mean_sq(double frac = 0.75) const;
};

// OpenMP-parallel ensemble; statistics are reduced in fixed path-block
// order, so the result is bit-identical to run_ensemble_serial for any
// thread count. Divergent paths are counted and excluded from moments.
EnsembleStats run_ensemble(const ClosedLoop& cl, const std::vector<double>& x0, const SimConfig& cfg,
                           std::vector<TrajectorySample>* retained = nullptr, int n_retain = 0,
                           const PemAdm* model = nullptr, const GainSet* gains = nullptr);

// Serial reference implementation with the identical contract.
EnsembleStats run_ensemble_serial(const ClosedLoop& cl, const std::vector<double>& x0, const SimConfig& cfg,
                                  std::vector<TrajectorySample>* retained = nullptr, int n_retain = 0,
                                  const PemAdm* model = nullptr, const GainSet* gains = nullptr);

// Monte-Carlo check of the infinitesimal-operator identity
//   d/dt E[V(x,r)] = E[x'M(i)x + tr(W(i)'P(i)W(i))]
// with V(x,i) = x'P(i)x, via a forward difference of width h = 10*dt.
struct DynkinReport {
  double lhs = 0.0;  // finite-difference d/dt E[V]
  double rhs = 0.0;  // Monte-Carlo E[LV] at t
  double rel_error = 0.0;
  double lhs_stderr = 0.0;
  double rhs_stderr = 0.0;
  int n_paths = 0;
};

DynkinReport validate_dynkin(const ClosedLoop& cl, const std::vector<Matrix>& p_mats, const std::vector<double>& x0,
                             double t_probe, int n_paths, const SimConfig& base_cfg);

// Maximum-likelihood rate estimates q_ij = (# transitions i->j) / (time
// in i) with Poisson confidence half-widths.
struct GeneratorEstimate {
  Matrix rates;
  Matrix ci_halfwidth;             // 1.96 * sqrt(n_ij) / T_i, off-diagonals
  std::vector<bool> row_estimable; // false when the mode was never visited
  std::vector<double> time_in_mode;
  long long total_jumps = 0;
};

GeneratorEstimate estimate_generator(const std::vector<ModePath>& paths, int n_modes);

}  // namespace mjls
