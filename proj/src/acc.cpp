#include "mjls/acc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mjls {

double lead_acceleration(const LeadProfile& profile, double t) {
  switch (profile.kind) {
    case LeadProfile::Kind::constant:
      return 0.0;
    case LeadProfile::Kind::sinusoidal:
      return profile.amplitude * std::sin(profile.frequency * t);
    case LeadProfile::Kind::piecewise: {
      if (profile.piece_times.empty()) return 0.0;
      auto it = std::upper_bound(profile.piece_times.begin(), profile.piece_times.end(), t);
      int k = static_cast<int>(it - profile.piece_times.begin()) - 1;
      if (k < 0) return 0.0;
      return profile.piece_accels[static_cast<size_t>(k)];
    }
  }
  return 0.0;
}

void AccConfig::validate() const {
  for (double s : {sigma00, sigma01, sigma10, sigma11}) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw std::invalid_argument("AccConfig: noise intensities must be finite and >= 0");
  }
  if (generator.n_modes != 2) throw std::invalid_argument("AccConfig: generator must have exactly 2 modes");
  ValidationReport rep = validate_generator(generator);
  if (!rep.ok()) throw std::invalid_argument("AccConfig: invalid generator: " + rep.summary());
  if (!std::isfinite(delta_d)) throw std::invalid_argument("AccConfig: delta_d must be finite");
  if (lead_profile.kind == LeadProfile::Kind::piecewise) {
    if (lead_profile.piece_times.size() != lead_profile.piece_accels.size())
      throw std::invalid_argument("AccConfig: piecewise profile times/accels length mismatch");
    if (!std::is_sorted(lead_profile.piece_times.begin(), lead_profile.piece_times.end()))
      throw std::invalid_argument("AccConfig: piecewise profile times must be increasing");
  }
}

PemAdm build_acc_model(const AccConfig& cfg) {
  cfg.validate();
  PemAdm model;
  model.state_dim = 2;
  model.input_dim = 1;
  model.output_dim = 2;
  Matrix a({{0.0, 1.0}, {0.0, 0.0}});
  Matrix b({{0.0}, {1.0}});
  ModeSystem m0;
  m0.a = a;
  m0.b = b;
  m0.c = Matrix::diag({0.0, 1.0});  // misdetection zeroes the position channel
  m0.d = Matrix::diag({cfg.sigma00, cfg.sigma01});
  ModeSystem m1;
  m1.a = a;
  m1.b = b;
  m1.c = Matrix::identity(2);
  m1.d = Matrix::diag({cfg.sigma10, cfg.sigma11});
  model.modes = {m0, m1};
  model.generator = cfg.generator;
  return model;
}

double idm_control(const IdmObservation& obs, const BaselineParams& p) {
  if (obs.gap <= 0.0) return -p.idm_b_max;
  double s_star = p.idm_s0 + obs.ego_speed * p.idm_t +
                  obs.ego_speed * obs.approach / (2.0 * std::sqrt(p.idm_a_max * p.idm_b));
  double a = p.idm_a_max * (1.0 - std::pow(obs.ego_speed / p.idm_v0, 4.0) - std::pow(s_star / obs.gap, 2.0));
  return std::clamp(a, -p.idm_b_max, p.idm_a_max);
}

double rbc_control(double gap_error, double rel_speed, const BaselineParams& p) {
  double a;
  if (gap_error < -p.rbc_e_tol) {
    a = -p.rbc_a_r;
  } else if (gap_error > p.rbc_e_tol) {
    a = p.rbc_a_r;
  } else {
    a = -p.rbc_k_v * rel_speed;
  }
  return std::clamp(a, -p.rbc_clamp, p.rbc_clamp);
}

ControlMethod parse_method(const std::string& name) {
  if (name == "pgc") return ControlMethod::pgc;
  if (name == "ssc") return ControlMethod::ssc;
  if (name == "idm") return ControlMethod::idm;
  if (name == "rbc") return ControlMethod::rbc;
  if (name == "custom") return ControlMethod::custom;
  throw std::invalid_argument("unknown control method: " + name);
}

std::string method_name(ControlMethod m) {
  switch (m) {
    case ControlMethod::pgc: return "pgc";
    case ControlMethod::ssc: return "ssc";
    case ControlMethod::idm: return "idm";
    case ControlMethod::rbc: return "rbc";
    case ControlMethod::custom: return "custom";
  }
  return "?";
}

ScenarioConfig make_scenario_config(int scenario_id) {
  ScenarioConfig cfg;
  cfg.sim.dt = 1e-3;
  cfg.sim.horizon = 10.0;
  cfg.sim.n_paths = 500;
  cfg.sim.seed = 42;
  cfg.sim.record_stride = 10;
  switch (scenario_id) {
    case 1:
      cfg.acc.lead_profile.kind = LeadProfile::Kind::constant;
      cfg.acc.generator = Generator{2, Matrix({{-4.0, 4.0}, {0.5, -0.5}})};
      break;
    case 2:
      cfg.acc.lead_profile.kind = LeadProfile::Kind::sinusoidal;
      cfg.acc.lead_profile.amplitude = 1.0;
      cfg.acc.lead_profile.frequency = 1.0;
      cfg.acc.generator = Generator{2, Matrix({{-4.0, 4.0}, {0.5, -0.5}})};
      break;
    case 3:
      cfg.acc.lead_profile.kind = LeadProfile::Kind::sinusoidal;
      cfg.acc.lead_profile.amplitude = 1.0;
      cfg.acc.lead_profile.frequency = 1.0;
      cfg.acc.generator = Generator{2, Matrix({{-4.0, 4.0}, {3.0, -3.0}})};
      break;
    default:
      throw std::invalid_argument("unknown scenario id: " + std::to_string(scenario_id));
  }
  return cfg;
}

std::optional<double> detect_collision(const ScenarioPath& path) {
  for (size_t k = 0; k < path.delta1.size(); ++k) {
    if (path.delta1[k] > 0.0) return path.times[k];
  }
  return std::nullopt;
}

namespace {

void latch_flags(ScenarioPath& path, double err1, double err2, double delta1, double t, double fail_thresh) {
  if (!path.collided && delta1 > 0.0) {
    path.collided = true;
    path.collision_time = t;
  }
  if (!path.failed && (std::sqrt(err1 * err1 + err2 * err2) > fail_thresh || path.collided)) {
    path.failed = true;
    path.failure_time = t;
  }
}

struct LeadState {
  double pos, vel;
};

void advance_lead(LeadState& lead, const LeadProfile& profile, double t, double h) {
  double a = lead_acceleration(profile, t);
  lead.pos += lead.vel * h;
  lead.vel += a * h;
}

}  // namespace

ScenarioPath simulate_linear_path(const AccConfig& acc, const GainSet& gains, const SimConfig& sim,
                                  uint64_t path_index) {
  PemAdm model = build_acc_model(acc);
  ClosedLoop cl = build_closed_loop(model, gains);
  sim.validate();

  CounterRng rng(sim.seed, path_index);
  int mode = sample_initial_mode(cl.generator, sim.initial_mode, rng);
  ModePath mpath = sample_ctmc(cl.generator, mode, sim.horizon, rng);

  double e1 = acc.ego0_pos - acc.lead0_pos - acc.delta_d;
  double e2 = acc.ego0_vel - acc.lead0_vel;
  const int n_steps = sim.n_steps();

  ScenarioPath out;
  auto record = [&](int step) {
    out.times.push_back(step * sim.dt);
    out.err_pos.push_back(e1);
    out.err_vel.push_back(e2);
    out.delta1.push_back(e1 + acc.delta_d);
    const Matrix& k = gains.gains[static_cast<size_t>(mode)];
    const Matrix& c = model.modes[static_cast<size_t>(mode)].c;
    // noise-free control trace: u = K C x_err (the white-noise component
    // has no pointwise value; the smooth part is what the plots show)
    double u = k(0, 0) * (c(0, 0) * e1 + c(0, 1) * e2) + k(0, 1) * (c(1, 0) * e1 + c(1, 1) * e2);
    out.control.push_back(u);
    out.modes.push_back(mode);
  };
  record(0);

  size_t jump_idx = 1;
  auto em_substep = [&](double t, double h) {
    const Matrix& a = cl.a_cl[static_cast<size_t>(mode)];
    const Matrix& w = cl.w[static_cast<size_t>(mode)];
    double xi0 = rng.normal();
    double xi1 = rng.normal();
    double sqh = std::sqrt(h);
    double f2 = -lead_acceleration(acc.lead_profile, t);  // lead accel forcing on the velocity error
    double d1 = a(0, 0) * e1 + a(0, 1) * e2 + 0.0;
    double d2 = a(1, 0) * e1 + a(1, 1) * e2 + f2;
    double g1 = w(0, 0) * xi0 + w(0, 1) * xi1;
    double g2 = w(1, 0) * xi0 + w(1, 1) * xi1;
    e1 += h * d1 + sqh * g1;
    e2 += h * d2 + sqh * g2;
  };

  for (int step = 0; step < n_steps; ++step) {
    double t0 = step * sim.dt;
    double t1 = t0 + sim.dt;
    double t = t0;
    while (jump_idx < mpath.times.size() && mpath.times[jump_idx] < t1) {
      double tj = mpath.times[jump_idx];
      if (tj > t) em_substep(t, tj - t);
      t = tj;
      mode = mpath.modes[jump_idx];
      ++jump_idx;
    }
    if (t1 > t) em_substep(t, t1 - t);
    latch_flags(out, e1, e2, e1 + acc.delta_d, t1, std::numeric_limits<double>::infinity());
    if ((step + 1) % sim.record_stride == 0 || step + 1 == n_steps) record(step + 1);
  }
  return out;
}

ScenarioPath cosimulate_linear_path(const AccConfig& acc, const GainSet& gains, const SimConfig& sim,
                                    uint64_t path_index) {
  PemAdm model = build_acc_model(acc);
  sim.validate();

  CounterRng rng(sim.seed, path_index);
  int mode = sample_initial_mode(model.generator, sim.initial_mode, rng);
  ModePath mpath = sample_ctmc(model.generator, mode, sim.horizon, rng);

  double ego_pos = acc.ego0_pos, ego_vel = acc.ego0_vel;
  LeadState lead{acc.lead0_pos, acc.lead0_vel};
  const int n_steps = sim.n_steps();

  ScenarioPath out;
  auto record = [&](int step) {
    double e1 = ego_pos - lead.pos - acc.delta_d;
    double e2 = ego_vel - lead.vel;
    out.times.push_back(step * sim.dt);
    out.err_pos.push_back(e1);
    out.err_vel.push_back(e2);
    out.delta1.push_back(ego_pos - lead.pos);
    const Matrix& k = gains.gains[static_cast<size_t>(mode)];
    const Matrix& c = model.modes[static_cast<size_t>(mode)].c;
    double u = k(0, 0) * (c(0, 0) * e1 + c(0, 1) * e2) + k(0, 1) * (c(1, 0) * e1 + c(1, 1) * e2);
    out.control.push_back(u);
    out.modes.push_back(mode);
  };
  record(0);

  size_t jump_idx = 1;
  auto substep = [&](double t, double h) {
    const ModeSystem& ms = model.modes[static_cast<size_t>(mode)];
    const Matrix& k = gains.gains[static_cast<size_t>(mode)];
    double xi0 = rng.normal();
    double xi1 = rng.normal();
    double sqh = std::sqrt(h);
    double e1 = ego_pos - lead.pos - acc.delta_d;
    double e2 = ego_vel - lead.vel;
    // smooth control u = K C x_err; measurement noise enters the ego
    // acceleration as K D dw, matching the closed-loop diffusion
    double u = k(0, 0) * (ms.c(0, 0) * e1 + ms.c(0, 1) * e2) + k(0, 1) * (ms.c(1, 0) * e1 + ms.c(1, 1) * e2);
    double kd0 = k(0, 0) * ms.d(0, 0) + k(0, 1) * ms.d(1, 0);
    double kd1 = k(0, 0) * ms.d(0, 1) + k(0, 1) * ms.d(1, 1);
    ego_pos += ego_vel * h;
    ego_vel += u * h + sqh * (kd0 * xi0 + kd1 * xi1);
    advance_lead(lead, acc.lead_profile, t, h);
  };

  for (int step = 0; step < n_steps; ++step) {
    double t0 = step * sim.dt;
    double t1 = t0 + sim.dt;
    double t = t0;
    while (jump_idx < mpath.times.size() && mpath.times[jump_idx] < t1) {
      double tj = mpath.times[jump_idx];
      if (tj > t) substep(t, tj - t);
      t = tj;
      mode = mpath.modes[jump_idx];
      ++jump_idx;
    }
    if (t1 > t) substep(t, t1 - t);
    latch_flags(out, ego_pos - lead.pos - acc.delta_d, ego_vel - lead.vel, ego_pos - lead.pos, t1,
                std::numeric_limits<double>::infinity());
    if ((step + 1) % sim.record_stride == 0 || step + 1 == n_steps) record(step + 1);
  }
  return out;
}

namespace {

ScenarioPath simulate_baseline_path(const AccConfig& acc, ControlMethod method, const BaselineParams& bp,
                                    const SimConfig& sim, double fail_thresh, uint64_t path_index) {
  PemAdm model = build_acc_model(acc);
  sim.validate();

  CounterRng rng(sim.seed, path_index);
  int mode = sample_initial_mode(model.generator, sim.initial_mode, rng);
  ModePath mpath = sample_ctmc(model.generator, mode, sim.horizon, rng);

  double ego_pos = acc.ego0_pos, ego_vel = acc.ego0_vel;
  LeadState lead{acc.lead0_pos, acc.lead0_vel};
  const int n_steps = sim.n_steps();
  const int hold_steps = std::max(1, static_cast<int>(bp.control_dt / sim.dt + 0.5));

  double u = 0.0;  // zero-order-hold control
  ScenarioPath out;
  auto record = [&](int step) {
    out.times.push_back(step * sim.dt);
    out.err_pos.push_back(ego_pos - lead.pos - acc.delta_d);
    out.err_vel.push_back(ego_vel - lead.vel);
    out.delta1.push_back(ego_pos - lead.pos);
    out.control.push_back(u);
    out.modes.push_back(mode);
  };

  size_t jump_idx = 1;
  for (int step = 0; step < n_steps; ++step) {
    double t0 = step * sim.dt;
    while (jump_idx < mpath.times.size() && mpath.times[jump_idx] <= t0) {
      mode = mpath.modes[jump_idx];
      ++jump_idx;
    }
    if (step % hold_steps == 0) {
      // sample the switched noisy measurement of the error state
      const ModeSystem& ms = model.modes[static_cast<size_t>(mode)];
      double e1 = ego_pos - lead.pos - acc.delta_d;
      double e2 = ego_vel - lead.vel;
      double y1 = ms.c(0, 0) * e1 + ms.d(0, 0) * rng.normal();
      double y2 = ms.c(1, 1) * e2 + ms.d(1, 1) * rng.normal();
      if (mode == 0) {
        // misdetected: no perceived target; cruise toward the set speed
        double a = bp.cruise_gain * (bp.cruise_speed - ego_vel);
        double clamp = (method == ControlMethod::idm) ? bp.idm_a_max : bp.rbc_clamp;
        double brake = (method == ControlMethod::idm) ? bp.idm_b_max : bp.rbc_clamp;
        u = std::clamp(a, -brake, clamp);
      } else if (method == ControlMethod::idm) {
        IdmObservation obs;
        obs.gap = -(y1 + acc.delta_d);  // observed lead-minus-ego headway
        obs.ego_speed = ego_vel;        // own speed assumed exactly known
        obs.approach = y2;
        u = idm_control(obs, bp);
      } else {
        u = rbc_control(-y1, y2, bp);  // gap error = observed headway minus desired
      }
    }
    if (step == 0) record(0);
    ego_pos += ego_vel * sim.dt;
    ego_vel += u * sim.dt;
    advance_lead(lead, acc.lead_profile, t0, sim.dt);
    latch_flags(out, ego_pos - lead.pos - acc.delta_d, ego_vel - lead.vel, ego_pos - lead.pos, t0 + sim.dt,
                fail_thresh);
    if ((step + 1) % sim.record_stride == 0 || step + 1 == n_steps) record(step + 1);
  }
  return out;
}

}  // namespace

ScenarioResult run_scenario(int scenario_id, ControlMethod method, const ScenarioConfig& cfg,
                            const GainSet* custom_gains) {
  cfg.acc.validate();
  cfg.sim.validate();

  ScenarioResult res;
  res.method = method_name(method);
  res.scenario_id = scenario_id;

  const bool linear = (method == ControlMethod::pgc || method == ControlMethod::ssc || method == ControlMethod::custom);
  if (linear) {
    if (method == ControlMethod::custom) {
      if (custom_gains == nullptr) throw std::invalid_argument("run_scenario: custom method needs gains");
      res.gains = *custom_gains;
    } else {
      AccConfig design = cfg.acc;
      design.generator = cfg.design_generator;
      PemAdm model = build_acc_model(design);
      SynthesisOutcome outcome = (method == ControlMethod::pgc) ? synth_pgc(model, cfg.synth)
                                                                : synth_ssc(model, cfg.synth.strictness);
      if (!outcome.feasible())
        throw std::runtime_error("run_scenario: synthesis infeasible: " + outcome.message);
      res.gains = outcome.result->gains;
    }
  }

  auto one_path = [&](uint64_t p) {
    if (linear) return simulate_linear_path(cfg.acc, res.gains, cfg.sim, p);
    return simulate_baseline_path(cfg.acc, method, cfg.baseline, cfg.sim, cfg.failure_threshold, p);
  };

  ScenarioPath probe = one_path(0);
  const size_t n_times = probe.times.size();
  res.times = probe.times;

  struct Acc {
    std::vector<double> s_e1, q_e1, s_e2, q_e2, s_d1, q_d1, s_u, q_u, s_sq, q_sq;
    long long collided = 0, failed = 0;
    std::vector<double> collision_times;
    void init(size_t n) {
      s_e1.assign(n, 0.0); q_e1.assign(n, 0.0);
      s_e2.assign(n, 0.0); q_e2.assign(n, 0.0);
      s_d1.assign(n, 0.0); q_d1.assign(n, 0.0);
      s_u.assign(n, 0.0); q_u.assign(n, 0.0);
      s_sq.assign(n, 0.0); q_sq.assign(n, 0.0);
    }
    void add(const ScenarioPath& tr) {
      for (size_t k = 0; k < tr.times.size(); ++k) {
        double e1 = tr.err_pos[k], e2 = tr.err_vel[k], d1 = tr.delta1[k], u = tr.control[k];
        double sq = e1 * e1 + e2 * e2;
        s_e1[k] += e1; q_e1[k] += e1 * e1;
        s_e2[k] += e2; q_e2[k] += e2 * e2;
        s_d1[k] += d1; q_d1[k] += d1 * d1;
        s_u[k] += u; q_u[k] += u * u;
        s_sq[k] += sq; q_sq[k] += sq * sq;
      }
      if (tr.collided) {
        ++collided;
        collision_times.push_back(tr.collision_time);
      }
      if (tr.failed || tr.collided) ++failed;
    }
    void merge(const Acc& o) {
      for (size_t k = 0; k < s_e1.size(); ++k) {
        s_e1[k] += o.s_e1[k]; q_e1[k] += o.q_e1[k];
        s_e2[k] += o.s_e2[k]; q_e2[k] += o.q_e2[k];
        s_d1[k] += o.s_d1[k]; q_d1[k] += o.q_d1[k];
        s_u[k] += o.s_u[k]; q_u[k] += o.q_u[k];
        s_sq[k] += o.s_sq[k]; q_sq[k] += o.q_sq[k];
      }
      collided += o.collided;
      failed += o.failed;
      collision_times.insert(collision_times.end(), o.collision_times.begin(), o.collision_times.end());
    }
  };

  const int kChunk = 64;
  const int n_paths = cfg.sim.n_paths;
  const int n_chunks = (n_paths + kChunk - 1) / kChunk;
  std::vector<Acc> chunk_acc(static_cast<size_t>(n_chunks));
  const int n_retain = std::min(cfg.n_retain, n_paths);
  std::vector<ScenarioPath> keep(static_cast<size_t>(std::max(n_retain, 0)));

#pragma omp parallel for schedule(dynamic)
  for (int c = 0; c < n_chunks; ++c) {
    Acc& acc = chunk_acc[static_cast<size_t>(c)];
    acc.init(n_times);
    const int lo = c * kChunk;
    const int hi = std::min(lo + kChunk, n_paths);
    for (int p = lo; p < hi; ++p) {
      ScenarioPath tr = (p == 0) ? probe : one_path(static_cast<uint64_t>(p));
      acc.add(tr);
      if (p < n_retain) keep[static_cast<size_t>(p)] = std::move(tr);
    }
  }

  Acc total;
  total.init(n_times);
  for (const Acc& a : chunk_acc) total.merge(a);  // fixed chunk order

  const double m = static_cast<double>(n_paths);
  auto mean_std = [&](const std::vector<double>& s, const std::vector<double>& q, std::vector<double>& mean,
                      std::vector<double>& sd) {
    mean.resize(n_times);
    sd.resize(n_times);
    for (size_t k = 0; k < n_times; ++k) {
      double mu = s[k] / m;
      mean[k] = mu;
      sd[k] = std::sqrt(std::max(q[k] / m - mu * mu, 0.0));
    }
  };
  mean_std(total.s_e1, total.q_e1, res.mean_err_pos, res.std_err_pos);
  mean_std(total.s_e2, total.q_e2, res.mean_err_vel, res.std_err_vel);
  mean_std(total.s_d1, total.q_d1, res.mean_delta1, res.std_delta1);
  mean_std(total.s_u, total.q_u, res.mean_control, res.std_control);
  res.mean_sq_err.resize(n_times);
  res.stderr_mean_sq.resize(n_times);
  for (size_t k = 0; k < n_times; ++k) {
    double mu = total.s_sq[k] / m;
    res.mean_sq_err[k] = mu;
    res.stderr_mean_sq[k] = std::sqrt(std::max(total.q_sq[k] / m - mu * mu, 0.0) / m);
  }
  res.collision_fraction = static_cast<double>(total.collided) / m;
  res.failure_fraction = static_cast<double>(total.failed) / m;
  std::sort(total.collision_times.begin(), total.collision_times.end());
  res.collision_times = std::move(total.collision_times);

  double t_start = 0.75 * res.times.back();
  double acc_sq = 0.0;
  int cnt = 0;
  for (size_t k = 0; k < n_times; ++k) {
    if (res.times[k] >= t_start) {
      acc_sq += res.mean_sq_err[k];
      ++cnt;
    }
  }
  res.tail_mse = cnt > 0 ? acc_sq / cnt : 0.0;
  res.retained = std::move(keep);
  return res;
}

}  // namespace mjls
