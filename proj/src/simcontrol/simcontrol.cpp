#include "metaexo/simcontrol/simcontrol.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>

#include "metaexo/common/error.hpp"
#include "metaexo/common/io.hpp"

namespace metaexo::simcontrol {

namespace {

constexpr double kSpeedGuard = 50.0;  // rad/s

bool finite(double v) { return std::isfinite(v); }

}  // namespace

void PlantModel::validate() const {
  if (!finite(a0) || !finite(a1) || a0 <= std::abs(a1)) {
    std::ostringstream msg;
    msg << "inertia a0 = " << a0 << " must exceed |a1| = " << std::abs(a1);
    throw NonPositiveInertiaError(msg.str());
  }
  if (!finite(m_load) || !finite(m_link) || m_load < 0.0 || m_link < 0.0)
    throw BadParamsError("plant masses must be finite and non-negative");
  if (!finite(l_m) || !finite(l_c) || l_m < 0.0 || l_c < 0.0)
    throw BadParamsError("plant moment arms must be finite and non-negative");
  if (!finite(g_acc) || g_acc <= 0.0)
    throw BadParamsError("gravitational acceleration must be positive");
}

double PlantModel::inertia(double q) const { return a0 + a1 * std::sin(q); }

double PlantModel::inertia_rate(double q, double qd) const {
  return a1 * std::cos(q) * qd;
}

double PlantModel::coriolis(double q, double qd) const {
  return 0.5 * a1 * std::cos(q) * qd;
}

double PlantModel::gravity(double q) const {
  return (m_load * l_m + m_link * l_c) * g_acc * std::sin(q);
}

void GravityCompensator::validate() const {
  if (!finite(m_hat) || m_hat < 0.0)
    throw BadParamsError("estimated load mass must be finite and non-negative");
  if (!finite(l_m) || l_m <= 0.0) throw BadParamsError("moment arm must be positive");
  if (!finite(g_acc) || g_acc <= 0.0)
    throw BadParamsError("gravitational acceleration must be positive");
}

double GravityCompensator::g_hat(double q) const {
  return m_hat * g_acc * l_m * std::sin(q);
}

void ControllerGains::validate() const {
  if (!finite(kp) || kp <= 0.0) throw BadParamsError("kp must be positive");
  if (!finite(kd) || kd <= 0.0) throw BadParamsError("kd must be positive");
  if (!finite(tau_max) || tau_max <= 0.0)
    throw BadParamsError("torque limit must be positive");
}

double pd_gravity_torque(const ControllerGains& gains, const GravityCompensator& comp,
                         double q_r, double qd_r, double q_d, double qd_d) {
  const double e = q_d - q_r;
  const double edot = gains.reference_velocity_feedforward ? qd_d - qd_r : -qd_r;
  const double tau = comp.g_hat(q_r) + gains.kp * e + gains.kd * edot;
  return std::clamp(tau, -gains.tau_max, gains.tau_max);
}

std::pair<double, double> dynamics_rhs(const PlantModel& plant, double q, double qd,
                                       double tau) {
  const double m = plant.inertia(q);
  if (!finite(m) || m <= 0.0) {
    std::ostringstream msg;
    msg << "inertia " << m << " at q = " << q << " is not positive";
    throw NonPositiveInertiaError(msg.str());
  }
  const double qdd = (tau - plant.coriolis(q, qd) * qd - plant.gravity(q)) / m;
  return {qd, qdd};
}

SimState step_rk4(const PlantModel& plant, double tau, const SimState& state, double dt) {
  if (!(dt > 0.0)) throw Error("step_rk4 requires dt > 0");
  const auto k1 = dynamics_rhs(plant, state.q, state.qd, tau);
  const auto k2 =
      dynamics_rhs(plant, state.q + 0.5 * dt * k1.first, state.qd + 0.5 * dt * k1.second, tau);
  const auto k3 =
      dynamics_rhs(plant, state.q + 0.5 * dt * k2.first, state.qd + 0.5 * dt * k2.second, tau);
  const auto k4 = dynamics_rhs(plant, state.q + dt * k3.first, state.qd + dt * k3.second, tau);

  SimState next;
  next.q = state.q + dt / 6.0 * (k1.first + 2.0 * k2.first + 2.0 * k3.first + k4.first);
  next.qd =
      state.qd + dt / 6.0 * (k1.second + 2.0 * k2.second + 2.0 * k3.second + k4.second);
  if (!finite(next.q) || !finite(next.qd) || std::abs(next.qd) > kSpeedGuard) {
    std::ostringstream msg;
    msg << "joint speed " << next.qd << " rad/s passed the " << kSpeedGuard
        << " rad/s guard at q = " << next.q;
    throw DivergenceError(msg.str());
  }
  return next;
}

SimState step_rk4(const PlantModel& plant, const ControllerGains& gains,
                  const GravityCompensator& comp, const SimState& state, double q_d,
                  double qd_d, double dt) {
  const double tau = pd_gravity_torque(gains, comp, state.q, state.qd, q_d, qd_d);
  return step_rk4(plant, tau, state, dt);
}

dataset::Trajectory constant_reference(double q_d, double duration, double dt) {
  if (!(dt > 0.0) || !(duration > 0.0))
    throw BadParamsError("constant_reference needs positive duration and dt");
  dataset::Trajectory ref;
  ref.dt = dt;
  const auto n = static_cast<std::size_t>(std::llround(duration / dt));
  if (n < 1) throw TooShortError("reference shorter than one step");
  ref.samples.assign(n + 1, dataset::Sample{q_d, 0.0});
  return ref;
}

SimTrace simulate_tracking(const PlantModel& plant, const ControllerGains& gains,
                           const GravityCompensator& comp,
                           const dataset::Trajectory& reference, SimState init, double dt) {
  plant.validate();
  gains.validate();
  comp.validate();
  reference.validate();

  const double sim_dt = dt > 0.0 ? dt : reference.dt;
  const double horizon = static_cast<double>(reference.length() - 1) * reference.dt;
  const auto n_steps = static_cast<std::size_t>(std::llround(horizon / sim_dt));
  if (n_steps < 1) throw TooShortError("reference spans less than one simulation step");

  // Exact dt match indexes the reference directly; resampling interpolation
  // would otherwise perturb q_d by rounding even on grid points.
  const bool on_grid = sim_dt == reference.dt;
  const auto lookup = [&](std::size_t k) -> dataset::Sample {
    if (on_grid) return reference.samples[std::min(k, reference.length() - 1)];
    const double pos = static_cast<double>(k) * sim_dt / reference.dt;
    const auto i0 =
        std::min(static_cast<std::size_t>(pos), reference.length() - 2);
    const double frac = pos - static_cast<double>(i0);
    const dataset::Sample& lo = reference.samples[i0];
    const dataset::Sample& hi = reference.samples[i0 + 1];
    return {lo.angle + frac * (hi.angle - lo.angle),
            lo.velocity + frac * (hi.velocity - lo.velocity)};
  };

  SimTrace trace;
  trace.dt = sim_dt;
  trace.samples.reserve(n_steps + 1);
  SimState state = init;
  for (std::size_t k = 0; k <= n_steps; ++k) {
    const dataset::Sample ref_k = lookup(k);
    const double tau =
        pd_gravity_torque(gains, comp, state.q, state.qd, ref_k.angle, ref_k.velocity);
    TraceSample row;
    row.t = static_cast<double>(k) * sim_dt;
    row.q_r = state.q;
    row.qd_r = state.qd;
    row.q_d = ref_k.angle;
    row.tau = tau;
    row.e = ref_k.angle - state.q;
    const double edot =
        gains.reference_velocity_feedforward ? ref_k.velocity - state.qd : -state.qd;
    row.v = 0.5 * plant.inertia(state.q) * edot * edot + 0.5 * gains.kp * row.e * row.e;
    trace.samples.push_back(row);
    if (k < n_steps) state = step_rk4(plant, tau, state, sim_dt);
  }
  return trace;
}

double rms_error(const SimTrace& trace) {
  if (trace.samples.empty()) throw TooShortError("rms_error needs a non-empty trace");
  double acc = 0.0;
  for (const TraceSample& s : trace.samples) acc += s.e * s.e;
  return std::sqrt(acc / static_cast<double>(trace.samples.size()));
}

LyapunovReport check_lyapunov(const SimTrace& trace, const PlantModel& plant,
                              const ControllerGains& gains, double vdot_tol) {
  if (trace.samples.size() < 3)
    throw TooShortError("Lyapunov check needs at least three samples");
  if (!(trace.dt > 0.0)) throw Error("trace dt must be positive");

  LyapunovReport report;
  report.sample_count = trace.samples.size();
  report.min_v = trace.samples.front().v;
  for (std::size_t k = 0; k < trace.samples.size(); ++k) {
    const TraceSample& s = trace.samples[k];
    report.min_v = std::min(report.min_v, s.v);
    if (s.v < -1e-12) {
      std::ostringstream msg;
      msg << "V = " << s.v << " is negative at sample " << k << " (t = " << s.t << ")";
      throw LyapunovViolationError(msg.str());
    }
    const double skew =
        std::abs(plant.inertia_rate(s.q_r, s.qd_r) - 2.0 * plant.coriolis(s.q_r, s.qd_r));
    report.max_skew_residual = std::max(report.max_skew_residual, skew);
    if (skew >= 1e-12) {
      std::ostringstream msg;
      msg << "skew residual " << skew << " at sample " << k << " (t = " << s.t << ")";
      throw LyapunovViolationError(msg.str());
    }
  }

  // The analysis assumes regulation, so the error rate is -qd_r here even
  // when the controller ran with the feedforward flag.
  std::size_t descending = 0;
  const std::size_t interior = trace.samples.size() - 2;
  for (std::size_t k = 1; k + 1 < trace.samples.size(); ++k) {
    const double vdot =
        (trace.samples[k + 1].v - trace.samples[k - 1].v) / (2.0 * trace.dt);
    if (vdot <= vdot_tol) ++descending;
    const double edot = -trace.samples[k].qd_r;
    const double mismatch = std::abs(vdot + gains.kd * edot * edot);
    report.max_vdot_mismatch = std::max(report.max_vdot_mismatch, mismatch);
  }
  report.descent_fraction =
      static_cast<double>(descending) / static_cast<double>(interior);
  return report;
}

void write_trace_csv(const std::filesystem::path& path, const SimTrace& trace) {
  std::vector<std::vector<double>> rows;
  rows.reserve(trace.samples.size());
  for (const TraceSample& s : trace.samples)
    rows.push_back({s.t, s.q_r, s.qd_r, s.q_d, s.tau, s.e, s.v});
  write_csv(path, {"t", "q_r", "qd_r", "q_d", "tau", "e", "V"}, rows);
}

void write_series(const std::filesystem::path& path, const std::vector<double>& x,
                  const std::vector<double>& y) {
  if (x.size() != y.size())
    throw ShapeMismatchError("series columns must have equal length");
  std::string out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out += format_double(x[i]);
    out += ' ';
    out += format_double(y[i]);
    out += '\n';
  }
  write_text_file(path, out);
}

}  // namespace metaexo::simcontrol
