// Benchmark: OpenMP ensemble vs. the serial reference, verifying that
// both produce bit-identical statistics.

#include <chrono>
#include <cstdio>
#include <cstring>

#include "mjls/acc.hpp"
#include "mjls/analysis.hpp"
#include "mjls/model.hpp"
#include "mjls/simulate.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace mjls;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  int n_paths = 2000;
  for (int i = 1; i + 1 < argc; i += 2) {
    if (std::strcmp(argv[i], "--paths") == 0) n_paths = std::atoi(argv[i + 1]);
  }

  AccConfig acc;
  PemAdm model = build_acc_model(acc);
  GainSet gains;
  gains.gains = {Matrix({{0.0, -2.52}}), Matrix({{-2.61, -1.76}})};
  ClosedLoop cl = build_closed_loop(model, gains);

  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.horizon = 10.0;
  cfg.n_paths = n_paths;
  cfg.seed = 7;
  cfg.record_stride = 10;

  std::vector<double> x0 = {-5.0, -4.0};

#ifdef _OPENMP
  std::printf("OpenMP enabled, max threads = %d\n", omp_get_max_threads());
#else
  std::printf("OpenMP not enabled; both runs are serial\n");
#endif
  std::printf("paths = %d, dt = %g, horizon = %g\n", cfg.n_paths, cfg.dt, cfg.horizon);

  auto t0 = std::chrono::steady_clock::now();
  EnsembleStats serial = run_ensemble_serial(cl, x0, cfg);
  double t_serial = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  EnsembleStats parallel = run_ensemble(cl, x0, cfg);
  double t_parallel = seconds_since(t0);

  bool identical = serial.mean_sq == parallel.mean_sq && serial.mean_state == parallel.mean_state &&
                   serial.std_state == parallel.std_state && serial.n_paths_used == parallel.n_paths_used;

  std::printf("serial:   %.3f s\n", t_serial);
  std::printf("parallel: %.3f s\n", t_parallel);
  std::printf("speedup:  %.2fx\n", t_serial / t_parallel);
  std::printf("bit-identical statistics: %s\n", identical ? "yes" : "NO");
  std::printf("tail E[x'x] = %.6f\n", parallel.tail_mean_sq());
  return identical ? 0 : 1;
}
