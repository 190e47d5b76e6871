#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>

#include "exptrack/dynamics.hpp"
#include "exptrack/errors.hpp"
#include "exptrack/log.hpp"
#include "exptrack/lyapunov.hpp"
#include "exptrack/tracking.hpp"
#include "exptrack/trajgen.hpp"
#include "exptrack/types.hpp"

namespace exptrack {

struct SimConfig {
  RobotModel model;
  Gains gains;
  ReferenceSpec reference;
  JointState initial_state;
  LoopKind loop = LoopKind::ClosedLoop;
  double dt = 1e-3;
  double t_final = 5.0;
  std::uint64_t seed = 0;

  static constexpr double kMaxSteps = 1e7;

  // Number of integration steps; t_final must be an integer multiple of dt.
  std::size_t steps() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("sim.dt must be > 0");
    if (!(t_final >= dt) || !std::isfinite(t_final)) {
      throw ConfigError("sim.t_final must be >= sim.dt");
    }
    const double ratio = t_final / dt;
    if (ratio > kMaxSteps) throw ConfigError("sim.t_final / sim.dt exceeds 1e7 steps");
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, rounded)) {
      throw ConfigError("sim.t_final must be an integer multiple of sim.dt");
    }
    return static_cast<std::size_t>(rounded);
  }

  void validate() const {
    (void)steps();
    const Eigen::Index n = model.dof();
    if (initial_state.dof() != n) {
      throw ContractViolation("initial state has " + std::to_string(initial_state.dof()) +
                              " joints but the model has " + std::to_string(n));
    }
    gains.validate(n);
    reference.validate(n);
  }
};

// Classical fourth-order Runge-Kutta step for x' = f(t, x).
template <typename State, typename Derivative>
State rk4_step(Derivative&& f, double t, const State& x, double dt) {
  auto checked = [&](double ts, const State& xs) {
    State d = f(ts, xs);
    if (!d.allFinite()) throw DivergenceError(ts, "non-finite derivative");
    return d;
  };
  const State k1 = checked(t, x);
  const State k2 = checked(t + 0.5 * dt, State(x + (0.5 * dt) * k1));
  const State k3 = checked(t + 0.5 * dt, State(x + (0.5 * dt) * k2));
  const State k4 = checked(t + dt, State(x + dt * k3));
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

namespace detail {

constexpr double kDivergenceNorm = 1e9;

inline void guard_state(const Vector& x, double t) {
  if (!x.allFinite()) throw DivergenceError(t, "non-finite state");
  if (x.norm() > kDivergenceNorm) throw DivergenceError(t, "state norm exceeds 1e9");
}

inline LogHeader make_header(const SimConfig& cfg) {
  LogHeader h;
  h.model = to_string(cfg.model.kind());
  h.dof = cfg.model.dof();
  h.loop = cfg.loop;
  h.dt = cfg.dt;
  h.t_final = cfg.t_final;
  h.lambda = cfg.gains.lambda();
  h.reference = to_string(cfg.reference.kind);
  h.seed = cfg.seed;
  return h;
}

// Certificates for one sample. Errors use measured velocity.
inline LogSample make_sample(const SimConfig& cfg, const Matrix& p, double t, const Vector& q,
                             const Vector& qdot, const Reference& ref, Vector tau) {
  const auto& model = cfg.model;
  check_pm_symmetry(model, q, cfg.gains);
  const ErrorState e = tracking_errors(q, qdot, ref, cfg.gains.lambda());

  LogSample s;
  s.t = t;
  s.q = q;
  s.qdot = qdot;
  s.q_d = ref.q_d;
  s.q_tilde = e.q_tilde;
  s.q_tilde_dot = e.q_tilde_dot;
  s.q_r = e.q_r;
  s.tau = std::move(tau);
  s.v1 = v1(model, q, e.q_tilde);
  s.w = filtered_energy(model, q, e.q_r);
  s.q_cert = q_function(model, q, e.q_r, e.q_tilde, p);
  s.v_total = v_total(model, q, e.q_tilde, e.q_r, p);
  s.energy = total_energy(model, q, qdot);
  return s;
}

inline double sample_time(std::size_t k, double dt) { return static_cast<double>(k) * dt; }

}  // namespace detail

// Solves eta = virtual_input(q, eta, ...) by fixed-point iteration, since the
// velocity inside Mdot is eta itself. Starts from `guess`.
inline Vector solve_virtual_input(const RobotModel& model, const Vector& q, const Vector& q_err,
                                  const Vector& qd_dot, const Vector& guess, double t) {
  constexpr int kMinPasses = 2;
  constexpr int kMaxPasses = 100;
  Vector eta = guess;
  for (int pass = 0; pass < kMaxPasses; ++pass) {
    Vector next = virtual_input(model, q, eta, q_err, qd_dot);
    const double change = (next - eta).cwiseAbs().maxCoeff();
    eta = std::move(next);
    if (pass + 1 >= kMinPasses && change <= 1e-15 * (1.0 + eta.cwiseAbs().maxCoeff())) return eta;
  }
  throw DivergenceError(t, "virtual input fixed-point iteration did not converge");
}

// Kinematic subsystem: qdot = eta with the backstepped virtual input. The
// error fed to eta is q - q_d, the sign under which the error obeys
// d/dt(q - q_d) = eta - qd_dot. Logged errors still use q_d - q.
inline TrajectoryLog kinematic_loop(const SimConfig& cfg) {
  if (cfg.loop != LoopKind::Kinematic) throw ConfigError("kinematic_loop needs loop kind kinematic");
  cfg.validate();
  const std::size_t steps = cfg.steps();
  const auto& model = cfg.model;
  const Eigen::Index n = model.dof();
  const Matrix p = cfg.gains.p_matrix(n);

  Vector eta_prev = cfg.initial_state.qdot();
  auto eta_at = [&](double t, const Vector& q) {
    const Reference ref = reference_at(cfg.reference, t, n);
    Vector eta = solve_virtual_input(model, q, q - ref.q_d, ref.qd_dot, eta_prev, t);
    eta_prev = eta;
    return eta;
  };

  TrajectoryLog log;
  log.header = detail::make_header(cfg);
  log.samples.reserve(steps + 1);

  Vector q = cfg.initial_state.q();
  auto record = [&](double t) {
    const Reference ref = reference_at(cfg.reference, t, n);
    const Vector eta = eta_at(t, q);
    log.samples.push_back(detail::make_sample(cfg, p, t, q, eta, ref, Vector::Zero(n)));
  };

  record(0.0);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = detail::sample_time(k, cfg.dt);
    q = rk4_step(eta_at, t, q, cfg.dt);
    const double t_next = detail::sample_time(k + 1, cfg.dt);
    detail::guard_state(q, t_next);
    record(t_next);
  }
  return log;
}

// Full plant under the exponential tracking law, controller evaluated at
// every RK4 stage.
inline TrajectoryLog closed_loop(const SimConfig& cfg) {
  if (cfg.loop != LoopKind::ClosedLoop) throw ConfigError("closed_loop needs loop kind closed_loop");
  cfg.validate();
  const std::size_t steps = cfg.steps();
  const auto& model = cfg.model;
  const Eigen::Index n = model.dof();
  const Matrix p = cfg.gains.p_matrix(n);

  auto torque = [&](double t, const Vector& q, const Vector& qdot) {
    const Reference ref = reference_at(cfg.reference, t, n);
    return control_torque(model, JointState(q, qdot), ref, cfg.gains).tau;
  };
  auto derivative = [&](double t, const Vector& x) {
    const Vector q = x.head(n), qdot = x.tail(n);
    Vector dx(2 * n);
    dx.head(n) = qdot;
    dx.tail(n) = forward_dynamics(model, t, q, qdot, torque(t, q, qdot));
    return dx;
  };

  TrajectoryLog log;
  log.header = detail::make_header(cfg);
  log.samples.reserve(steps + 1);

  Vector x(2 * n);
  x << cfg.initial_state.q(), cfg.initial_state.qdot();
  auto record = [&](double t) {
    const Vector q = x.head(n), qdot = x.tail(n);
    const Reference ref = reference_at(cfg.reference, t, n);
    log.samples.push_back(detail::make_sample(cfg, p, t, q, qdot, ref, torque(t, q, qdot)));
  };

  record(0.0);
  for (std::size_t k = 0; k < steps; ++k) {
    x = rk4_step(derivative, detail::sample_time(k, cfg.dt), x, cfg.dt);
    const double t_next = detail::sample_time(k + 1, cfg.dt);
    detail::guard_state(x, t_next);
    record(t_next);
  }
  return log;
}

// Unforced, frictionless plant. Errors and certificates are still logged
// against the configured reference.
inline TrajectoryLog open_loop_passive(const SimConfig& cfg) {
  if (cfg.loop != LoopKind::OpenLoopPassive) {
    throw ConfigError("open_loop_passive needs loop kind open_loop_passive");
  }
  if (cfg.model.friction().kind != FrictionKind::Zero) {
    throw ConfigError("open_loop_passive requires zero friction");
  }
  cfg.validate();
  const std::size_t steps = cfg.steps();
  const auto& model = cfg.model;
  const Eigen::Index n = model.dof();
  const Matrix p = cfg.gains.p_matrix(n);
  const Vector zero = Vector::Zero(n);

  auto derivative = [&](double t, const Vector& x) {
    const Vector q = x.head(n), qdot = x.tail(n);
    Vector dx(2 * n);
    dx.head(n) = qdot;
    dx.tail(n) = forward_dynamics(model, t, q, qdot, zero);
    return dx;
  };

  TrajectoryLog log;
  log.header = detail::make_header(cfg);
  log.samples.reserve(steps + 1);

  Vector x(2 * n);
  x << cfg.initial_state.q(), cfg.initial_state.qdot();
  auto record = [&](double t) {
    const Reference ref = reference_at(cfg.reference, t, n);
    log.samples.push_back(detail::make_sample(cfg, p, t, x.head(n), x.tail(n), ref, zero));
  };

  record(0.0);
  for (std::size_t k = 0; k < steps; ++k) {
    x = rk4_step(derivative, detail::sample_time(k, cfg.dt), x, cfg.dt);
    const double t_next = detail::sample_time(k + 1, cfg.dt);
    detail::guard_state(x, t_next);
    record(t_next);
  }
  return log;
}

inline TrajectoryLog simulate(const SimConfig& cfg) {
  switch (cfg.loop) {
    case LoopKind::Kinematic: return kinematic_loop(cfg);
    case LoopKind::ClosedLoop: return closed_loop(cfg);
    case LoopKind::OpenLoopPassive: return open_loop_passive(cfg);
  }
  throw ConfigError("unknown loop kind");
}

// Largest relative deviation of a series from v(0) exp(-rate t).
inline double max_relative_decay_error(const TrajectoryLog& log, Certificate which, double rate,
                                       double t_max = std::numeric_limits<double>::infinity()) {
  if (log.samples.empty()) throw InsufficientDataError("empty log");
  const double v0 = certificate_value(log.samples.front(), which);
  if (!(v0 > 0.0)) throw InsufficientDataError("certificate is zero at t = 0");
  double worst = 0.0;
  for (const auto& s : log.samples) {
    if (s.t > t_max) break;
    const double expected = v0 * std::exp(-rate * s.t);
    worst = std::max(worst, std::abs(certificate_value(s, which) - expected) / expected);
  }
  return worst;
}

// Largest |E(t) - E(0)| / |E(0)| over the log.
inline double max_relative_energy_drift(const TrajectoryLog& log) {
  if (log.samples.empty()) throw InsufficientDataError("empty log");
  const double e0 = log.samples.front().energy;
  if (e0 == 0.0) throw InsufficientDataError("initial energy is zero; relative drift undefined");
  double worst = 0.0;
  for (const auto& s : log.samples) worst = std::max(worst, std::abs(s.energy - e0) / std::abs(e0));
  return worst;
}

}  // namespace exptrack
