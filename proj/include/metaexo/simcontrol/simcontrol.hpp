#pragma once

#include <cstddef>
#include <filesystem>
#include <utility>
#include <vector>

#include "metaexo/dataset/dataset.hpp"

namespace metaexo::simcontrol {

// Single-joint rigid body m(q)q'' + c(q,q')q' + g(q) = tau with inertia
// m(q) = a0 + a1 sin q. The Coriolis coefficient is c = (1/2) dm/dt / q',
// which makes dm/dt - 2c vanish identically.
struct PlantModel {
  double a0 = 0.06;     // kg m^2, must exceed |a1| so m(q) stays positive
  double a1 = 0.0;      // kg m^2
  double m_load = 1.0;  // kg, carried load
  double l_m = 0.3;     // m, load moment arm
  double m_link = 0.0;  // kg, link mass, outside the load compensation model
  double l_c = 0.15;    // m, link center-of-mass arm
  double g_acc = 9.81;  // m/s^2

  void validate() const;
  double inertia(double q) const;
  // Time derivative of m along a trajectory passing through (q, qd).
  double inertia_rate(double q, double qd) const;
  double coriolis(double q, double qd) const;
  double gravity(double q) const;
};

// Feedforward model of the load torque only; any link-mass gravity in the
// plant is left uncompensated and shows up as the diagnostic delta_g.
struct GravityCompensator {
  double m_hat = 1.0;  // kg, estimated load mass
  double l_m = 0.3;    // m
  double g_acc = 9.81;

  void validate() const;
  double g_hat(double q) const;
};

struct ControllerGains {
  double kp = 20.0;      // N m / rad
  double kd = 5.0;       // N m s / rad
  double tau_max = 9.0;  // N m, actuator saturation
  // The error rate fed to the damping term is -qd_r by default; the flag
  // switches it to qd_d - qd_r for moving references.
  bool reference_velocity_feedforward = false;

  void validate() const;
};

struct SimState {
  double q = 0.0;
  double qd = 0.0;
};

struct TraceSample {
  double t = 0.0;
  double q_r = 0.0;
  double qd_r = 0.0;
  double q_d = 0.0;
  double tau = 0.0;
  double e = 0.0;
  double v = 0.0;
};

struct SimTrace {
  double dt = 0.0;
  std::vector<TraceSample> samples;
};

struct LyapunovReport {
  double min_v = 0.0;
  // Fraction of interior samples whose central-difference dV/dt is at or
  // below the descent tolerance.
  double descent_fraction = 0.0;
  // Largest |dV/dt + kd * edot^2| over interior samples.
  double max_vdot_mismatch = 0.0;
  double max_skew_residual = 0.0;
  std::size_t sample_count = 0;
};

// tau = g_hat(q_r) + kp e + kd edot, clamped to +-tau_max. Gains are taken
// as given; validation belongs to configuration loading.
double pd_gravity_torque(const ControllerGains& gains, const GravityCompensator& comp,
                         double q_r, double qd_r, double q_d, double qd_d = 0.0);

// Plant accelerations under an applied torque: returns (qd, qdd).
std::pair<double, double> dynamics_rhs(const PlantModel& plant, double q, double qd,
                                       double tau);

// One classical Runge-Kutta step with tau held constant over the interval.
// Throws Divergence when the new speed passes the 50 rad/s guard.
SimState step_rk4(const PlantModel& plant, double tau, const SimState& state, double dt);

// Controller-in-the-loop variant: the torque is computed once from the
// current state and reference sample, then held for the whole step.
SimState step_rk4(const PlantModel& plant, const ControllerGains& gains,
                  const GravityCompensator& comp, const SimState& state, double q_d,
                  double qd_d, double dt);

dataset::Trajectory constant_reference(double q_d, double duration, double dt);

// Closed-loop rollout against a sampled reference. A non-positive dt runs at
// the reference's own rate; otherwise the reference is linearly resampled
// onto the simulation grid.
SimTrace simulate_tracking(const PlantModel& plant, const ControllerGains& gains,
                           const GravityCompensator& comp,
                           const dataset::Trajectory& reference, SimState init,
                           double dt = 0.0);

double rms_error(const SimTrace& trace);

// Measures the descent structure of a regulation trace. dV/dt comes from
// central differences of the recorded V, so its tolerance scales with dt^2.
// Throws LyapunovViolation, naming the first offending sample, when V goes
// negative or the skew residual exceeds 1e-12.
LyapunovReport check_lyapunov(const SimTrace& trace, const PlantModel& plant,
                              const ControllerGains& gains, double vdot_tol = 1e-9);

void write_trace_csv(const std::filesystem::path& path, const SimTrace& trace);
// Two-column plain-text series for external plotting.
void write_series(const std::filesystem::path& path, const std::vector<double>& x,
                  const std::vector<double>& y);

}  // namespace metaexo::simcontrol
