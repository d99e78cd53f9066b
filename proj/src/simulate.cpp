#include "mjls/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mjls {

namespace {
constexpr double kDivergeNorm = 1e9;
constexpr int kChunk = 64;  // fixed reduction block size for determinism
}  // namespace

void SimConfig::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("SimConfig: dt must be positive");
  if (!(horizon > 0.0)) throw std::invalid_argument("SimConfig: horizon must be positive");
  if (horizon < dt) throw std::invalid_argument("SimConfig: horizon smaller than dt");
  if (n_paths < 1) throw std::invalid_argument("SimConfig: n_paths must be >= 1");
  if (record_stride < 1) throw std::invalid_argument("SimConfig: record_stride must be >= 1");
}

int ModePath::mode_at(double t) const {
  // last k with times[k] <= t
  auto it = std::upper_bound(times.begin(), times.end(), t);
  int k = static_cast<int>(it - times.begin()) - 1;
  if (k < 0) k = 0;
  return modes[static_cast<size_t>(k)];
}

ModePath sample_ctmc(const Generator& gen, int r0, double horizon, CounterRng& rng) {
  const int n = gen.n_modes;
  if (r0 < 0 || r0 >= n) throw std::invalid_argument("sample_ctmc: initial mode out of range");
  ModePath path;
  path.horizon = horizon;
  path.times.push_back(0.0);
  path.modes.push_back(r0);
  double t = 0.0;
  int mode = r0;
  while (t < horizon) {
    const double rate = -gen.rates(mode, mode);
    if (rate <= 0.0) break;  // absorbing
    t += rng.exponential(rate);
    if (t >= horizon) break;
    // next mode with probability q_ij / rate
    double u = rng.uniform() * rate;
    double acc = 0.0;
    int next = -1;
    for (int j = 0; j < n; ++j) {
      if (j == mode) continue;
      acc += gen.rates(mode, j);
      if (u <= acc) {
        next = j;
        break;
      }
    }
    if (next < 0) {
      // numerical slack in the row sum; pick the last positive-rate target
      for (int j = n - 1; j >= 0; --j) {
        if (j != mode && gen.rates(mode, j) > 0.0) {
          next = j;
          break;
        }
      }
      if (next < 0) break;
    }
    mode = next;
    path.times.push_back(t);
    path.modes.push_back(mode);
  }
  return path;
}

namespace {

struct StepWork {
  std::vector<double> x;
  std::vector<double> ax;
  std::vector<double> xi;
};

// One Euler-Maruyama sub-step of width h in mode i using noise xi ~ N(0,I):
// x += A_cl x h + W sqrt(h) xi.
void em_step(const ClosedLoop& cl, int mode, double h, StepWork& w, CounterRng& rng) {
  const Matrix& a = cl.a_cl[static_cast<size_t>(mode)];
  const Matrix& wm = cl.w[static_cast<size_t>(mode)];
  const int n = a.rows();
  const int p = wm.cols();
  w.xi.resize(static_cast<size_t>(p));
  for (int k = 0; k < p; ++k) w.xi[static_cast<size_t>(k)] = rng.normal();
  const double sqh = std::sqrt(h);
  w.ax.assign(static_cast<size_t>(n), 0.0);
  for (int r = 0; r < n; ++r) {
    double drift = 0.0;
    for (int c = 0; c < n; ++c) drift += a(r, c) * w.x[static_cast<size_t>(c)];
    double diff = 0.0;
    for (int c = 0; c < p; ++c) diff += wm(r, c) * w.xi[static_cast<size_t>(c)];
    w.ax[static_cast<size_t>(r)] = h * drift + sqh * diff;
  }
  for (int r = 0; r < n; ++r) w.x[static_cast<size_t>(r)] += w.ax[static_cast<size_t>(r)];
}

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

int sample_initial_mode(const Generator& gen, int initial_mode, CounterRng& rng) {
  if (initial_mode >= 0) {
    if (initial_mode >= gen.n_modes) throw std::invalid_argument("initial_mode out of range");
    return initial_mode;
  }
  std::vector<double> pi = stationary_distribution(gen);
  double u = rng.uniform();
  double acc = 0.0;
  for (int i = 0; i < gen.n_modes; ++i) {
    acc += pi[static_cast<size_t>(i)];
    if (u <= acc) return i;
  }
  return gen.n_modes - 1;
}

TrajectorySample integrate_path(const ClosedLoop& cl, const std::vector<double>& x0, const SimConfig& cfg,
                                uint64_t path_index, const PemAdm* model, const GainSet* gains) {
  cfg.validate();
  const int n = cl.state_dim();
  if (static_cast<int>(x0.size()) != n) throw std::invalid_argument("integrate_path: x0 dimension mismatch");

  CounterRng rng(cfg.seed, path_index);
  // display noise uses its own stream so recording cannot perturb dynamics
  CounterRng disp_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL, path_index);
  const int mode0 = sample_initial_mode(cl.generator, cfg.initial_mode, rng);
  ModePath mpath = sample_ctmc(cl.generator, mode0, cfg.horizon, rng);

  TrajectorySample out;
  const int n_steps = cfg.n_steps();
  const bool want_io = (model != nullptr && gains != nullptr);

  StepWork w;
  w.x = x0;

  auto record = [&](int step, int mode) {
    out.times.push_back(step * cfg.dt);
    out.states.push_back(w.x);
    out.modes.push_back(mode);
    if (want_io) {
      const ModeSystem& ms = model->modes[static_cast<size_t>(mode)];
      const int m = ms.c.rows();
      const double inv_sqdt = 1.0 / std::sqrt(cfg.dt);
      std::vector<double> y(static_cast<size_t>(m), 0.0);
      for (int r = 0; r < m; ++r) {
        double acc = 0.0;
        for (int c = 0; c < n; ++c) acc += ms.c(r, c) * w.x[static_cast<size_t>(c)];
        for (int c = 0; c < ms.d.cols(); ++c) acc += ms.d(r, c) * disp_rng.normal() * inv_sqdt;
        y[static_cast<size_t>(r)] = acc;
      }
      out.measurements.push_back(y);
      const Matrix& k = gains->gains[static_cast<size_t>(mode)];
      std::vector<double> u(static_cast<size_t>(k.rows()), 0.0);
      for (int r = 0; r < k.rows(); ++r) {
        double acc = 0.0;
        for (int c = 0; c < m; ++c) acc += k(r, c) * y[static_cast<size_t>(c)];
        u[static_cast<size_t>(r)] = acc;
      }
      out.controls.push_back(u);
    }
  };

  size_t jump_idx = 1;  // next jump time index in mpath.times
  int mode = mode0;
  record(0, mode);

  for (int step = 0; step < n_steps; ++step) {
    double t0 = step * cfg.dt;
    double t1 = t0 + cfg.dt;
    if (!out.diverged) {
      // sub-step at exact jump instants inside [t0, t1)
      double t = t0;
      while (jump_idx < mpath.times.size() && mpath.times[jump_idx] < t1) {
        double tj = mpath.times[jump_idx];
        if (tj > t) em_step(cl, mode, tj - t, w, rng);
        t = tj;
        mode = mpath.modes[jump_idx];
        ++jump_idx;
      }
      if (t1 > t) em_step(cl, mode, t1 - t, w, rng);
      if (norm2(w.x) > kDivergeNorm || !std::isfinite(norm2(w.x))) {
        out.diverged = true;
        out.divergence_time = t1;
      }
    } else {
      // hold the state; still advance mode bookkeeping for the record
      while (jump_idx < mpath.times.size() && mpath.times[jump_idx] < t1) {
        mode = mpath.modes[jump_idx];
        ++jump_idx;
      }
    }
    if ((step + 1) % cfg.record_stride == 0 || step + 1 == n_steps) record(step + 1, mode);
  }
  return out;
}

namespace {

struct Accum {
  std::vector<std::vector<double>> sum;     // [time][dim]
  std::vector<std::vector<double>> sum_sq;  // [time][dim]
  std::vector<double> sum_xsq;              // [time]  sum of x'x
  std::vector<double> sum_xsq2;             // [time]  sum of (x'x)^2
  long long diverged = 0;
  long long used = 0;

  void init(size_t n_times, size_t dim) {
    sum.assign(n_times, std::vector<double>(dim, 0.0));
    sum_sq.assign(n_times, std::vector<double>(dim, 0.0));
    sum_xsq.assign(n_times, 0.0);
    sum_xsq2.assign(n_times, 0.0);
  }

  void add_path(const TrajectorySample& tr) {
    if (tr.diverged) {
      ++diverged;
      return;
    }
    ++used;
    for (size_t k = 0; k < tr.states.size(); ++k) {
      double xsq = 0.0;
      for (size_t d = 0; d < tr.states[k].size(); ++d) {
        double v = tr.states[k][d];
        sum[k][d] += v;
        sum_sq[k][d] += v * v;
        xsq += v * v;
      }
      sum_xsq[k] += xsq;
      sum_xsq2[k] += xsq * xsq;
    }
  }

  void merge(const Accum& o) {
    diverged += o.diverged;
    used += o.used;
    for (size_t k = 0; k < sum.size(); ++k) {
      for (size_t d = 0; d < sum[k].size(); ++d) {
        sum[k][d] += o.sum[k][d];
        sum_sq[k][d] += o.sum_sq[k][d];
      }
      sum_xsq[k] += o.sum_xsq[k];
      sum_xsq2[k] += o.sum_xsq2[k];
    }
  }
};

EnsembleStats finalize(const Accum& acc, const std::vector<double>& times, int n_paths) {
  EnsembleStats st;
  st.times = times;
  st.n_paths_used = static_cast<int>(acc.used);
  st.divergence_fraction = static_cast<double>(acc.diverged) / static_cast<double>(n_paths);
  const size_t n_times = times.size();
  const size_t dim = acc.sum.empty() ? 0 : acc.sum[0].size();
  st.mean_state.assign(n_times, std::vector<double>(dim, 0.0));
  st.std_state.assign(n_times, std::vector<double>(dim, 0.0));
  st.mean_sq.assign(n_times, 0.0);
  st.stderr_mean_sq.assign(n_times, 0.0);
  const double m = static_cast<double>(std::max<long long>(acc.used, 1));
  for (size_t k = 0; k < n_times; ++k) {
    for (size_t d = 0; d < dim; ++d) {
      double mu = acc.sum[k][d] / m;
      double var = acc.sum_sq[k][d] / m - mu * mu;
      st.mean_state[k][d] = mu;
      st.std_state[k][d] = std::sqrt(std::max(var, 0.0));
    }
    double mu = acc.sum_xsq[k] / m;
    double var = acc.sum_xsq2[k] / m - mu * mu;
    st.mean_sq[k] = mu;
    st.stderr_mean_sq[k] = std::sqrt(std::max(var, 0.0) / m);
  }
  return st;
}

EnsembleStats run_ensemble_impl(const ClosedLoop& cl, const std::vector<double>& x0, const SimConfig& cfg,
                                std::vector<TrajectorySample>* retained, int n_retain, const PemAdm* model,
                                const GainSet* gains, bool parallel) {
  cfg.validate();
  // probe one path to size the time grid
  TrajectorySample probe = integrate_path(cl, x0, cfg, 0, model, gains);
  const std::vector<double> times = probe.times;
  const size_t n_times = times.size();
  const size_t dim = x0.size();

  if (retained != nullptr) {
    retained->clear();
    n_retain = std::min(n_retain, cfg.n_paths);
  }

  const int n_chunks = (cfg.n_paths + kChunk - 1) / kChunk;
  std::vector<Accum> chunk_acc(static_cast<size_t>(n_chunks));
  std::vector<TrajectorySample> keep(static_cast<size_t>(std::max(n_retain, 0)));

#pragma omp parallel for schedule(dynamic) if (parallel)
  for (int c = 0; c < n_chunks; ++c) {
    Accum& acc = chunk_acc[static_cast<size_t>(c)];
    acc.init(n_times, dim);
    const int lo = c * kChunk;
    const int hi = std::min(lo + kChunk, cfg.n_paths);
    for (int p = lo; p < hi; ++p) {
      TrajectorySample tr = (p == 0) ? probe : integrate_path(cl, x0, cfg, static_cast<uint64_t>(p), model, gains);
      acc.add_path(tr);
      if (retained != nullptr && p < n_retain) keep[static_cast<size_t>(p)] = std::move(tr);
    }
  }

  Accum total;
  total.init(n_times, dim);
  for (const Accum& a : chunk_acc) total.merge(a);  // fixed chunk order

  if (retained != nullptr) *retained = std::move(keep);
  return finalize(total, times, cfg.n_paths);
}

}  // namespace

EnsembleStats run_ensemble(const ClosedLoop& cl, const std::vector<double>& x0, const SimConfig& cfg,
                           std::vector<TrajectorySample>* retained, int n_retain, const PemAdm* model,
                           const GainSet* gains) {
  return run_ensemble_impl(cl, x0, cfg, retained, n_retain, model, gains, true);
}

EnsembleStats run_ensemble_serial(const ClosedLoop& cl, const std::vector<double>& x0, const SimConfig& cfg,
                                  std::vector<TrajectorySample>* retained, int n_retain, const PemAdm* model,
                                  const GainSet* gains) {
  return run_ensemble_impl(cl, x0, cfg, retained, n_retain, model, gains, false);
}

double EnsembleStats::tail_mean_sq(double frac) const {
  if (times.empty()) return 0.0;
  double t_start = frac * times.back();
  double acc = 0.0;
  int count = 0;
  for (size_t k = 0; k < times.size(); ++k) {
    if (times[k] >= t_start) {
      acc += mean_sq[k];
      ++count;
    }
  }
  return count > 0 ? acc / count : mean_sq.back();
}

DynkinReport validate_dynkin(const ClosedLoop& cl, const std::vector<Matrix>& p_mats, const std::vector<double>& x0,
                             double t_probe, int n_paths, const SimConfig& base_cfg) {
  SimConfig cfg = base_cfg;
  cfg.n_paths = n_paths;
  const double h = 10.0 * cfg.dt;
  cfg.horizon = t_probe + h + cfg.dt;
  cfg.validate();
  const int n = cl.state_dim();
  const int N = cl.n_modes();

  // Precompute M(i) = A_cl'P + P A_cl + sum_j q_ij P(j) and the trace term.
  std::vector<Matrix> m_mats;
  std::vector<double> trace_term(static_cast<size_t>(N), 0.0);
  for (int i = 0; i < N; ++i) {
    const Matrix& a = cl.a_cl[static_cast<size_t>(i)];
    const Matrix& p = p_mats[static_cast<size_t>(i)];
    Matrix m = a.transpose() * p + p * a;
    for (int j = 0; j < N; ++j) m = m + p_mats[static_cast<size_t>(j)] * cl.generator.rates(i, j);
    m_mats.push_back(m.symmetrize());
    const Matrix& wm = cl.w[static_cast<size_t>(i)];
    trace_term[static_cast<size_t>(i)] = (wm.transpose() * p * wm).trace();
  }

  auto quad = [&](const Matrix& q, const std::vector<double>& x) {
    double s = 0.0;
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) s += x[static_cast<size_t>(r)] * q(r, c) * x[static_cast<size_t>(c)];
    return s;
  };

  double sum_v0 = 0.0, sum_v0_sq = 0.0;
  double sum_v1 = 0.0, sum_v1_sq = 0.0;
  double sum_lv = 0.0, sum_lv_sq = 0.0;
  int used = 0;

  const int k0 = static_cast<int>(t_probe / cfg.dt + 0.5);
  const int k1 = static_cast<int>((t_probe + h) / cfg.dt + 0.5);

  for (int p = 0; p < n_paths; ++p) {
    TrajectorySample tr = integrate_path(cl, x0, cfg, static_cast<uint64_t>(p));
    if (tr.diverged || k1 >= static_cast<int>(tr.states.size())) continue;
    ++used;
    int i0 = tr.modes[static_cast<size_t>(k0)];
    int i1 = tr.modes[static_cast<size_t>(k1)];
    double v0 = quad(p_mats[static_cast<size_t>(i0)], tr.states[static_cast<size_t>(k0)]);
    double v1 = quad(p_mats[static_cast<size_t>(i1)], tr.states[static_cast<size_t>(k1)]);
    double lv = quad(m_mats[static_cast<size_t>(i0)], tr.states[static_cast<size_t>(k0)]) + trace_term[static_cast<size_t>(i0)];
    sum_v0 += v0;
    sum_v0_sq += v0 * v0;
    sum_v1 += v1;
    sum_v1_sq += v1 * v1;
    sum_lv += lv;
    sum_lv_sq += lv * lv;
  }
  if (used == 0) throw std::runtime_error("validate_dynkin: no usable paths");

  DynkinReport rep;
  rep.n_paths = used;
  const double m = static_cast<double>(used);
  double ev0 = sum_v0 / m;
  double ev1 = sum_v1 / m;
  rep.lhs = (ev1 - ev0) / h;
  rep.rhs = sum_lv / m;
  double var_v0 = std::max(sum_v0_sq / m - ev0 * ev0, 0.0);
  double var_v1 = std::max(sum_v1_sq / m - ev1 * ev1, 0.0);
  double var_lv = std::max(sum_lv_sq / m - rep.rhs * rep.rhs, 0.0);
  rep.lhs_stderr = std::sqrt((var_v0 + var_v1) / m) / h;
  rep.rhs_stderr = std::sqrt(var_lv / m);
  double scale = std::max({std::abs(rep.lhs), std::abs(rep.rhs), 1e-12});
  rep.rel_error = std::abs(rep.lhs - rep.rhs) / scale;
  return rep;
}

GeneratorEstimate estimate_generator(const std::vector<ModePath>& paths, int n_modes) {
  if (n_modes < 1) throw std::invalid_argument("estimate_generator: n_modes must be >= 1");
  GeneratorEstimate est;
  est.rates = Matrix(n_modes, n_modes);
  est.ci_halfwidth = Matrix(n_modes, n_modes);
  est.row_estimable.assign(static_cast<size_t>(n_modes), false);
  est.time_in_mode.assign(static_cast<size_t>(n_modes), 0.0);

  Matrix counts(n_modes, n_modes);
  for (const ModePath& path : paths) {
    for (size_t k = 0; k < path.modes.size(); ++k) {
      int i = path.modes[k];
      if (i < 0 || i >= n_modes) throw std::invalid_argument("estimate_generator: mode index out of range");
      double t_end = (k + 1 < path.times.size()) ? path.times[k + 1] : path.horizon;
      est.time_in_mode[static_cast<size_t>(i)] += t_end - path.times[k];
      if (k + 1 < path.modes.size()) {
        counts(i, path.modes[k + 1]) += 1.0;
        ++est.total_jumps;
      }
    }
  }

  for (int i = 0; i < n_modes; ++i) {
    double ti = est.time_in_mode[static_cast<size_t>(i)];
    if (ti <= 0.0) continue;
    est.row_estimable[static_cast<size_t>(i)] = true;
    double row_sum = 0.0;
    for (int j = 0; j < n_modes; ++j) {
      if (j == i) continue;
      double nij = counts(i, j);
      est.rates(i, j) = nij / ti;
      est.ci_halfwidth(i, j) = 1.96 * std::sqrt(std::max(nij, 1.0)) / ti;
      row_sum += est.rates(i, j);
    }
    est.rates(i, i) = -row_sum;
  }
  return est;
}

}  // namespace mjls
