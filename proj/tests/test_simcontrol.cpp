#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "metaexo/common/error.hpp"
#include "metaexo/common/io.hpp"
#include "metaexo/common/rng.hpp"
#include "metaexo/simcontrol/simcontrol.hpp"

using namespace metaexo;
using namespace metaexo::simcontrol;

namespace {

PlantModel loaded_arm() {
  PlantModel p;
  p.a0 = 0.06;
  p.a1 = 0.0;
  p.m_load = 1.0;
  p.l_m = 0.3;
  p.m_link = 0.0;
  return p;
}

PlantModel no_gravity_arm() {
  PlantModel p = loaded_arm();
  p.m_load = 0.0;
  return p;
}

// delta_g = 0 against loaded_arm
GravityCompensator matched_comp() {
  GravityCompensator c;
  c.m_hat = 1.0;
  c.l_m = 0.3;
  return c;
}

GravityCompensator zero_comp() {
  GravityCompensator c;
  c.m_hat = 0.0;
  return c;
}

double pendulum_energy(const PlantModel& p, const SimState& s) {
  const double w = (p.m_load * p.l_m + p.m_link * p.l_c) * p.g_acc;
  return 0.5 * p.inertia(s.q) * s.qd * s.qd + w * (1.0 - std::cos(s.q));
}

SimState integrate_free(const PlantModel& p, SimState s, double dt, std::size_t steps) {
  for (std::size_t i = 0; i < steps; ++i) s = step_rk4(p, 0.0, s, dt);
  return s;
}

std::filesystem::path fresh_dir(const std::string& tag) {
  const auto dir = std::filesystem::temp_directory_path() / ("metaexo_sim_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("plant terms and validation") {
  PlantModel p;
  p.a0 = 2.0;
  p.a1 = 0.5;
  p.m_load = 2.0;
  p.l_m = 0.3;
  p.m_link = 0.5;
  p.l_c = 0.1;
  p.validate();

  CHECK(p.inertia(0.3) == doctest::Approx(2.0 + 0.5 * std::sin(0.3)).epsilon(1e-15));
  CHECK(p.coriolis(0.3, 1.7) == doctest::Approx(0.25 * std::cos(0.3) * 1.7).epsilon(1e-15));
  const double want_g = (2.0 * 0.3 + 0.5 * 0.1) * 9.81;
  CHECK(p.gravity(M_PI / 2.0) == doctest::Approx(want_g).epsilon(1e-12));
  CHECK(p.gravity(0.0) == 0.0);

  PlantModel flat = p;
  flat.a1 = 0.0;
  CHECK(flat.coriolis(1.1, 3.0) == 0.0);

  PlantModel bad = p;
  bad.a0 = 0.4;
  CHECK_THROWS_AS(bad.validate(), NonPositiveInertiaError);
  bad.a0 = 0.5;
  bad.a1 = 0.5;
  CHECK_THROWS_AS(bad.validate(), NonPositiveInertiaError);
  PlantModel neg = p;
  neg.m_load = -1.0;
  CHECK_THROWS_AS(neg.validate(), BadParamsError);

  GravityCompensator c;
  c.m_hat = -0.1;
  CHECK_THROWS_AS(c.validate(), BadParamsError);
  ControllerGains g;
  g.kp = 0.0;
  CHECK_THROWS_AS(g.validate(), BadParamsError);
}

TEST_CASE("skew identity holds exactly for random admissible states") {
  Rng rng(404);
  for (int i = 0; i < 200; ++i) {
    PlantModel p;
    p.a1 = rng.uniform(-1.5, 1.5);
    p.a0 = std::abs(p.a1) + rng.uniform(0.01, 2.0);
    const double q = rng.uniform(-M_PI, M_PI);
    const double qd = rng.uniform(-10.0, 10.0);
    CHECK(p.inertia_rate(q, qd) - 2.0 * p.coriolis(q, qd) == 0.0);
    CHECK(p.inertia(q) > 0.0);
  }
}

TEST_CASE("pd torque law and saturation") {
  ControllerGains gains;
  gains.kp = 10.0;
  gains.kd = 0.0;
  GravityCompensator comp = zero_comp();
  CHECK(pd_gravity_torque(gains, comp, 0.0, 0.0, 0.1) == doctest::Approx(1.0).epsilon(1e-15));

  // zero error at rest leaves only the gravity feedforward
  GravityCompensator heavy;
  heavy.m_hat = 2.0;
  heavy.l_m = 0.3;
  ControllerGains pd;
  const double at_horizontal = pd_gravity_torque(pd, heavy, M_PI / 2.0, 0.0, M_PI / 2.0);
  CHECK(at_horizontal == doctest::Approx(2.0 * 9.81 * 0.3).epsilon(1e-12));
  CHECK(heavy.g_hat(M_PI / 2.0) == doctest::Approx(5.886).epsilon(1e-12));

  CHECK(pd_gravity_torque(pd, zero_comp(), 0.0, 0.0, 10.0) == pd.tau_max);
  CHECK(pd_gravity_torque(pd, zero_comp(), 0.0, 0.0, -10.0) == -pd.tau_max);

  // the feedforward flag adds kd * qd_d on top of the literal law
  ControllerGains ff = pd;
  ff.reference_velocity_feedforward = true;
  const double literal = pd_gravity_torque(pd, zero_comp(), 0.2, 0.3, 0.25, 0.4);
  const double with_ff = pd_gravity_torque(ff, zero_comp(), 0.2, 0.3, 0.25, 0.4);
  CHECK(with_ff - literal == doctest::Approx(pd.kd * 0.4).epsilon(1e-12));
}

TEST_CASE("dynamics rhs equilibria and inertia guard") {
  const PlantModel p = loaded_arm();
  const auto hanging = dynamics_rhs(p, 0.0, 0.0, 0.0);
  CHECK(hanging.first == 0.0);
  CHECK(hanging.second == 0.0);

  // torque equal to the gravity load cancels exactly at rest
  const double q = 0.7;
  const auto held = dynamics_rhs(p, q, 0.0, p.gravity(q));
  CHECK(held.second == 0.0);

  const auto pushed = dynamics_rhs(no_gravity_arm(), 0.0, 0.0, 1.0);
  CHECK(pushed.second == doctest::Approx(1.0 / 0.06).epsilon(1e-12));

  PlantModel invalid;
  invalid.a0 = 0.1;
  invalid.a1 = 0.5;
  CHECK_THROWS_AS(dynamics_rhs(invalid, -M_PI / 2.0, 0.0, 0.0), NonPositiveInertiaError);
}

TEST_CASE("rk4 conserves pendulum energy and keeps fourth order") {
  PlantModel p = loaded_arm();
  p.a1 = 0.02;  // exercises the Coriolis path; energy stays conserved

  SimState s0;
  s0.q = 1.0;
  const double e0 = pendulum_energy(p, s0);
  SimState s = s0;
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    s = step_rk4(p, 0.0, s, 1e-3);
    worst = std::max(worst, std::abs(pendulum_energy(p, s) - e0) / e0);
  }
  CHECK(worst < 1e-6);

  // dt halving on a 1 s horizon against a fine-grid reference
  const SimState ref = integrate_free(p, s0, 1e-5, 100000);
  const auto err = [&](double dt, std::size_t steps) {
    const SimState end = integrate_free(p, s0, dt, steps);
    return std::hypot(end.q - ref.q, end.qd - ref.qd);
  };
  const double e8 = err(8e-3, 125);
  const double e4 = err(4e-3, 250);
  const double e2 = err(2e-3, 500);
  CHECK(std::log2(e8 / e4) >= 3.8);
  CHECK(std::log2(e4 / e2) >= 3.8);

  // origin with no torque and no gravity is a bitwise fixed point
  const SimState origin = integrate_free(no_gravity_arm(), SimState{}, 1e-3, 100);
  CHECK(origin.q == 0.0);
  CHECK(origin.qd == 0.0);

  SimState fast;
  fast.qd = 49.5;
  CHECK_THROWS_AS(step_rk4(no_gravity_arm(), 9.0, fast, 1e-2), DivergenceError);
  CHECK_THROWS_AS(step_rk4(p, 0.0, s0, 0.0), Error);

  // the controller overload is the torque law plus the plain step
  ControllerGains gains;
  const GravityCompensator comp = matched_comp();
  SimState st;
  st.q = 0.1;
  st.qd = 0.2;
  const double tau = pd_gravity_torque(gains, comp, st.q, st.qd, 0.4, 0.0);
  const SimState a = step_rk4(loaded_arm(), tau, st, 1e-3);
  const SimState b = step_rk4(loaded_arm(), gains, comp, st, 0.4, 0.0, 1e-3);
  CHECK(a.q == b.q);
  CHECK(a.qd == b.qd);
}

TEST_CASE("tracking a reference equal to the state holds exactly") {
  const auto ref = constant_reference(0.3, 2.0, 1e-3);
  CHECK(ref.length() == 2001);
  CHECK(ref.samples.front().angle == 0.3);

  SimState init;
  init.q = 0.3;
  const SimTrace trace =
      simulate_tracking(loaded_arm(), ControllerGains{}, matched_comp(), ref, init);
  REQUIRE(trace.samples.size() == 2001);
  const double feedforward = matched_comp().g_hat(0.3);
  for (const TraceSample& row : trace.samples) {
    CHECK(row.e == 0.0);
    CHECK(row.q_r == 0.3);
    CHECK(row.tau == feedforward);
    CHECK(row.v == 0.0);
  }
  CHECK_THROWS_AS(constant_reference(0.3, -1.0, 1e-3), BadParamsError);
}

TEST_CASE("step regulation settles and bounded compensation error holds") {
  const auto ref = constant_reference(0.5, 5.0, 1e-3);
  const SimTrace exact =
      simulate_tracking(loaded_arm(), ControllerGains{}, matched_comp(), ref, SimState{});
  CHECK(std::abs(exact.samples.back().e) < 1e-3);

  // underestimated load leaves a steady error within |delta_g| / kp
  GravityCompensator weak = matched_comp();
  weak.m_hat = 0.6;
  const auto long_ref = constant_reference(0.5, 10.0, 1e-3);
  const SimTrace biased =
      simulate_tracking(loaded_arm(), ControllerGains{}, weak, long_ref, SimState{});
  const double delta_g_sup = 0.4 * 1.0 * 9.81 * 0.3;
  const double final_e = std::abs(biased.samples.back().e);
  CHECK(final_e <= delta_g_sup / ControllerGains{}.kp + 1e-9);
  CHECK(final_e > 1e-4);
}

TEST_CASE("reference resampling matches the simulation grid") {
  dataset::Trajectory ramp;
  ramp.dt = 0.01;
  for (int k = 0; k <= 50; ++k)
    ramp.samples.push_back({0.01 * static_cast<double>(k), 1.0});

  ControllerGains gains;
  gains.reference_velocity_feedforward = true;
  const SimTrace fine =
      simulate_tracking(no_gravity_arm(), gains, zero_comp(), ramp, SimState{}, 1e-3);
  CHECK(fine.dt == 1e-3);
  REQUIRE(fine.samples.size() == 501);
  CHECK(fine.samples[10].q_d == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(fine.samples[15].q_d == doctest::Approx(0.015).epsilon(1e-12));
  CHECK(fine.samples.back().q_d == doctest::Approx(0.5).epsilon(1e-12));

  // running at the reference rate reads samples through unchanged
  const SimTrace grid =
      simulate_tracking(no_gravity_arm(), gains, zero_comp(), ramp, SimState{});
  REQUIRE(grid.samples.size() == ramp.length());
  for (std::size_t k = 0; k < ramp.length(); ++k)
    CHECK(grid.samples[k].q_d == ramp.samples[k].angle);
}

TEST_CASE("lyapunov descent certificate across the gain grid") {
  for (double kp : {5.0, 20.0, 50.0}) {
    for (double kd : {1.0, 5.0, 10.0}) {
      ControllerGains gains;
      gains.kp = kp;
      gains.kd = kd;
      const auto ref = constant_reference(0.15, 12.0, 1e-3);
      const SimTrace trace =
          simulate_tracking(no_gravity_arm(), gains, zero_comp(), ref, SimState{});
      const LyapunovReport report = check_lyapunov(trace, no_gravity_arm(), gains);
      CHECK(report.descent_fraction >= 0.99);
      CHECK(report.max_skew_residual == 0.0);
      CHECK(report.min_v >= 0.0);
      CHECK(std::abs(trace.samples.back().e) < 1e-3);
    }
  }

  // varying inertia keeps the certificate intact
  PlantModel wobble = no_gravity_arm();
  wobble.a1 = 0.02;
  ControllerGains gains;
  const auto ref = constant_reference(0.15, 8.0, 1e-3);
  const SimTrace trace = simulate_tracking(wobble, gains, zero_comp(), ref, SimState{});
  const LyapunovReport report = check_lyapunov(trace, wobble, gains);
  CHECK(report.descent_fraction >= 0.99);
  CHECK(report.max_skew_residual == 0.0);
}

TEST_CASE("vdot matches the closed form on a gentle fine-grid run") {
  // The held torque perturbs the ideal loop by O(dt), so the 1e-6 match
  // needs a finer grid than the descent checks use.
  ControllerGains gains;
  gains.kp = 2.0;
  gains.kd = 1.0;
  const auto ref = constant_reference(0.05, 3.0, 1e-5);
  const SimTrace trace =
      simulate_tracking(no_gravity_arm(), gains, zero_comp(), ref, SimState{});
  CHECK(trace.samples.front().v == doctest::Approx(0.5 * 2.0 * 0.05 * 0.05).epsilon(1e-12));

  const LyapunovReport report = check_lyapunov(trace, no_gravity_arm(), gains);
  CHECK(report.max_vdot_mismatch < 1e-6);
  CHECK(report.descent_fraction >= 0.99);
  CHECK(report.min_v >= 0.0);
}

TEST_CASE("lyapunov check flags bad traces") {
  SimTrace doctored;
  doctored.dt = 1e-3;
  for (int k = 0; k < 5; ++k) {
    TraceSample s;
    s.t = 1e-3 * k;
    s.v = 0.1 - 0.06 * k;  // goes negative at sample 2
    doctored.samples.push_back(s);
  }
  try {
    check_lyapunov(doctored, no_gravity_arm(), ControllerGains{});
    FAIL("expected LyapunovViolationError");
  } catch (const LyapunovViolationError& e) {
    CHECK(std::string(e.what()).find("sample 2") != std::string::npos);
  }

  SimTrace stub;
  stub.dt = 1e-3;
  stub.samples.resize(2);
  CHECK_THROWS_AS(check_lyapunov(stub, no_gravity_arm(), ControllerGains{}), TooShortError);
}

TEST_CASE("trace export and series files are byte stable") {
  const auto dir = fresh_dir("io");
  const auto ref = constant_reference(0.2, 0.05, 1e-3);
  const SimTrace trace =
      simulate_tracking(loaded_arm(), ControllerGains{}, matched_comp(), ref, SimState{});

  write_trace_csv(dir / "a.csv", trace);
  write_trace_csv(dir / "b.csv", trace);
  const std::string a = read_text_file(dir / "a.csv");
  CHECK(a == read_text_file(dir / "b.csv"));
  CHECK(a.rfind("t,q_r,qd_r,q_d,tau,e,V\n", 0) == 0);
  const CsvTable table = read_csv(dir / "a.csv");
  REQUIRE(table.rows.size() == trace.samples.size());
  CHECK(table.rows[3][1] == trace.samples[3].q_r);
  CHECK(table.rows[3][6] == trace.samples[3].v);

  write_series(dir / "s.txt", {0.5, 1.0}, {1.25, -2.0});
  CHECK(read_text_file(dir / "s.txt") == "0.5 1.25\n1 -2\n");
  CHECK_THROWS_AS(write_series(dir / "t.txt", {0.0}, {}), ShapeMismatchError);

  SimTrace rms_probe;
  rms_probe.dt = 1e-3;
  rms_probe.samples.resize(2);
  rms_probe.samples[0].e = 3.0;
  rms_probe.samples[1].e = 4.0;
  CHECK(rms_error(rms_probe) == doctest::Approx(std::sqrt(12.5)).epsilon(1e-15));
  CHECK_THROWS_AS(rms_error(SimTrace{}), TooShortError);

  std::filesystem::remove_all(dir);
}
