#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mjls/model.hpp"
#include "mjls/simulate.hpp"
#include "mjls/synthesis.hpp"

namespace mjls {

// Lead-vehicle acceleration profile.
struct LeadProfile {
  enum class Kind { constant, sinusoidal, piecewise };
  Kind kind = Kind::constant;
  double amplitude = 1.0;  // sinusoidal: a(t) = amplitude * sin(frequency * t)
  double frequency = 1.0;
  std::vector<double> piece_times;   // breakpoints t_0 = 0 < t_1 < ...
  std::vector<double> piece_accels;  // accel on [t_k, t_{k+1})
};

double lead_acceleration(const LeadProfile& profile, double t);

// Two-mode car-following model: mode 0 = misdetected (position channel
// zeroed), mode 1 = normal perception.
struct AccConfig {
  double sigma00 = 1.0;  // mode-0 position noise intensity
  double sigma01 = 1.0;  // mode-0 velocity noise intensity
  double sigma10 = 0.05;
  double sigma11 = 0.5;
  Generator generator{2, Matrix({{-4.0, 4.0}, {0.5, -0.5}})};
  double delta_d = -5.0;  // desired relative distance, ego minus lead
  double ego0_pos = 0.0;
  double ego0_vel = 1.0;
  double lead0_pos = 10.0;
  double lead0_vel = 5.0;
  LeadProfile lead_profile;

  void validate() const;  // throws std::invalid_argument
};

struct AccState {
  double ego_pos = 0.0, ego_vel = 0.0;
  double lead_pos = 0.0, lead_vel = 0.0;
  double delta_d = 0.0;

  double err_pos() const { return ego_pos - lead_pos - delta_d; }
  double err_vel() const { return ego_vel - lead_vel; }
  double delta1() const { return ego_pos - lead_pos; }
  double gap() const { return lead_pos - ego_pos; }
};

PemAdm build_acc_model(const AccConfig& cfg);

// Baseline car-following controllers. Both consume the same switched
// noisy measurement as the synthesized controllers (the observed error
// state); when the perception system is in the misdetected mode, the
// position channel carries no information and both baselines fall back
// to cruising toward cruise_speed.
struct BaselineParams {
  // intelligent-driver-model parameters
  double idm_v0 = 5.0;     // desired free speed, m/s
  double idm_t = 1.5;      // time headway, s
  double idm_a_max = 1.5;  // max acceleration, m/s^2
  double idm_b = 2.0;      // comfortable braking, m/s^2
  double idm_s0 = 2.0;     // jam distance, m
  double idm_b_max = 4.0;  // emergency braking, m/s^2
  // rule-based-control parameters
  double rbc_e_tol = 5.0;   // gap-error deadband, m
  double rbc_a_r = 1.0;     // rule acceleration magnitude, m/s^2
  double rbc_k_v = 1.0;     // relative-speed damping gain
  double rbc_clamp = 3.0;   // output clamp, m/s^2
  // misdetected-mode fallback shared by both baselines
  double cruise_speed = 10.0;  // set speed when no target is perceived, m/s
  double cruise_gain = 2.0;
  double control_dt = 0.1;  // zero-order-hold control period, s
};

struct IdmObservation {
  double gap = 0.0;        // observed headway, m
  double ego_speed = 0.0;  // own speed (assumed exactly known)
  double approach = 0.0;   // observed ego minus lead speed, m/s
};

// a = a_max [1 - (v/v0)^4 - (s*/s)^2], s* = s0 + vT + v dv / (2 sqrt(a_max b)),
// clamped to [-b_max, a_max]; non-positive observed gap => -b_max.
double idm_control(const IdmObservation& obs, const BaselineParams& p);

// Deadband rules on the observed gap error e = gap - desired_gap:
// e < -e_tol (too close) => -a_r; e > e_tol (too far) => +a_r; otherwise
// -k_v * (observed relative speed); clamped to [-clamp, clamp].
double rbc_control(double gap_error, double rel_speed, const BaselineParams& p);

enum class ControlMethod { pgc, ssc, idm, rbc, custom };

ControlMethod parse_method(const std::string& name);  // throws on unknown
std::string method_name(ControlMethod m);

struct ScenarioConfig {
  AccConfig acc;
  SimConfig sim;
  BaselineParams baseline;
  SynthesisOptions synth;
  // Gains are designed against the nominal perception chain and then
  // evaluated under the scenario's chain; scenario 3 stresses gains
  // designed for the low misdetection rate.
  Generator design_generator{2, Matrix({{-4.0, 4.0}, {0.5, -0.5}})};
  double failure_threshold = 15.0;  // error-state norm defining operational failure
  int n_retain = 3;                 // sample paths kept for plotting
};

// Scenario 1: constant-speed lead, low misdetection rate.
// Scenario 2: sinusoidal lead (sin t), low misdetection rate.
// Scenario 3: sinusoidal lead, high misdetection rate ([[ -4,4],[3,-3]]).
ScenarioConfig make_scenario_config(int scenario_id);  // throws on unknown id

struct ScenarioPath {
  std::vector<double> times;
  std::vector<double> err_pos, err_vel;  // error state
  std::vector<double> delta1;            // ego minus lead position
  std::vector<double> control;
  std::vector<int> modes;
  bool collided = false;
  double collision_time = 0.0;
  bool failed = false;  // error norm exceeded failure_threshold
  double failure_time = 0.0;
};

struct ScenarioResult {
  std::string method;
  int scenario_id = 0;
  std::vector<double> times;
  std::vector<double> mean_err_pos, std_err_pos;
  std::vector<double> mean_err_vel, std_err_vel;
  std::vector<double> mean_delta1, std_delta1;
  std::vector<double> mean_control, std_control;
  std::vector<double> mean_sq_err;    // E[err' err]
  std::vector<double> stderr_mean_sq;
  double collision_fraction = 0.0;
  double failure_fraction = 0.0;  // collisions included
  std::vector<double> collision_times;
  double tail_mse = 0.0;  // time-averaged mean_sq_err over the last quarter
  std::vector<ScenarioPath> retained;
  GainSet gains;  // gains actually used (linear methods only)
};

// Simulates the coupled ego/lead system for the given method. Linear
// methods (pgc/ssc/custom) integrate the closed-loop error diffusion
// with the lead's acceleration as deterministic forcing; baselines act
// on noisy measurements sampled at the control period with zero-order
// hold. For pgc/ssc the gains are synthesized from cfg.synth; for
// custom they must be supplied.
ScenarioResult run_scenario(int scenario_id, ControlMethod method, const ScenarioConfig& cfg,
                            const GainSet* custom_gains = nullptr);

// First time ego reaches the lead's position (gap drops to zero).
std::optional<double> detect_collision(const ScenarioPath& path);

// Full two-vehicle co-simulation of a single linear-feedback path,
// using the same noise stream as the error-state integration; exists to
// validate that the two formulations coincide for a constant-speed lead.
ScenarioPath cosimulate_linear_path(const AccConfig& acc, const GainSet& gains, const SimConfig& sim,
                                    uint64_t path_index);

// Single error-state path under linear feedback with lead forcing.
ScenarioPath simulate_linear_path(const AccConfig& acc, const GainSet& gains, const SimConfig& sim,
                                  uint64_t path_index);

}  // namespace mjls
