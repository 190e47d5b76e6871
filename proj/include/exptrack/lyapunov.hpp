#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "exptrack/dynamics.hpp"
#include "exptrack/errors.hpp"
#include "exptrack/log.hpp"
#include "exptrack/types.hpp"

namespace exptrack {

// Position-error certificate 1/2 q~' M(q) q~.
inline double v1(const RobotModel& model, const Vector& q, const Vector& q_tilde) {
  require_size(q_tilde, model.dof(), "q_tilde");
  return 0.5 * q_tilde.dot(mass_matrix(model, q) * q_tilde);
}

// 1/2 q_r' M(q) q_r.
inline double filtered_energy(const RobotModel& model, const Vector& q, const Vector& q_r) {
  require_size(q_r, model.dof(), "q_r");
  return 0.5 * q_r.dot(mass_matrix(model, q) * q_r);
}

namespace detail {

inline void check_spd(const Matrix& p, Eigen::Index n) {
  if (p.rows() != n || p.cols() != n) throw GainValidationError("P has the wrong size");
  if (max_abs(p - p.transpose()) > 1e-12 * std::max(1.0, max_abs(p))) {
    throw GainValidationError("P must be symmetric");
  }
  Eigen::LLT<Matrix> llt(p);
  if (llt.info() != Eigen::Success) throw GainValidationError("P must be positive definite");
}

}  // namespace detail

// Q = 1/2 q_r' M q_r + 1/2 q~' P q~, the certificate of the two-matrix
// design this controller replaces. Reported for comparison only.
inline double q_function(const RobotModel& model, const Vector& q, const Vector& q_r,
                         const Vector& q_tilde, const Matrix& p) {
  const Eigen::Index n = model.dof();
  require_size(q_r, n, "q_r");
  require_size(q_tilde, n, "q_tilde");
  detail::check_spd(p, n);
  return filtered_energy(model, q, q_r) + 0.5 * q_tilde.dot(p * q_tilde);
}

// Composite certificate V = v1 + 1/2 q_r' P M q_r. The quadratic term uses
// the symmetric part of P M; P M itself must be symmetric to 1e-8.
inline double v_total(const RobotModel& model, const Vector& q, const Vector& q_tilde,
                      const Vector& q_r, const Matrix& p) {
  const Eigen::Index n = model.dof();
  require_size(q_r, n, "q_r");
  detail::check_spd(p, n);
  const Matrix pm = p * mass_matrix(model, q);
  const double asym = max_abs(pm - pm.transpose());
  if (asym > 1e-8) {
    throw CertificateValidityError("P*M(q) is not symmetric (max asymmetry " +
                                   std::to_string(asym) + ")");
  }
  const Matrix sym = 0.5 * (pm + pm.transpose());
  return v1(model, q, q_tilde) + 0.5 * q_r.dot(sym * q_r);
}

// Derivative of a uniformly sampled series: central differences inside,
// second-order one-sided differences at both ends.
inline std::vector<double> differentiate_uniform(std::span<const double> values, double dt) {
  const std::size_t n = values.size();
  if (n < 3) throw InsufficientDataError("need at least 3 samples to differentiate");
  if (!(dt > 0.0)) throw InputError("dt must be > 0");
  std::vector<double> d(n);
  d[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * dt);
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (values[i + 1] - values[i - 1]) / (2.0 * dt);
  d[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * dt);
  return d;
}

enum class Certificate { V1, QCert, VTotal, W, Energy };

inline double certificate_value(const LogSample& s, Certificate which) {
  switch (which) {
    case Certificate::V1: return s.v1;
    case Certificate::QCert: return s.q_cert;
    case Certificate::VTotal: return s.v_total;
    case Certificate::W: return s.w;
    case Certificate::Energy: return s.energy;
  }
  return 0.0;
}

inline std::vector<double> certificate_series(const TrajectoryLog& log, Certificate which) {
  return log.series([which](const LogSample& s) { return certificate_value(s, which); });
}

// Time derivative of the selected certificate along a logged run.
inline std::vector<double> vdot_along_trajectory(const TrajectoryLog& log, Certificate which) {
  if (log.size() < 3) throw InsufficientDataError("log has fewer than 3 samples");
  const double dt = log.samples[1].t - log.samples[0].t;
  for (std::size_t i = 1; i < log.size(); ++i) {
    const double step = log.samples[i].t - log.samples[i - 1].t;
    if (std::abs(step - dt) > 1e-9 * std::max(1.0, std::abs(dt))) {
      throw InputError("log samples are not uniformly spaced");
    }
  }
  const auto values = certificate_series(log, which);
  return differentiate_uniform(values, dt);
}

// Vdot / V for the composite certificate. Entries where V <= floor are NaN.
inline std::vector<double> composite_decay_ratio(const TrajectoryLog& log, double floor = 1e-12) {
  const auto vdot = vdot_along_trajectory(log, Certificate::VTotal);
  std::vector<double> out(vdot.size());
  for (std::size_t i = 0; i < vdot.size(); ++i) {
    const double v = log.samples[i].v_total;
    out[i] = v > floor ? vdot[i] / v : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

struct RateEstimate {
  double rate = 0.0;
  double r_squared = 0.0;
  double t_start = 0.0;
  double t_end = 0.0;
  std::size_t n_points = 0;
};

struct RateWindow {
  double t0 = 1.0;
  double t1 = 5.0;
};

// Least-squares fit of ln(value) against t over samples inside the window
// with value > floor; rate is the negated slope.
inline RateEstimate estimate_rate(std::span<const double> t, std::span<const double> values,
                                  RateWindow window = {}, double floor = 1e-12) {
  if (t.size() != values.size()) throw ContractViolation("estimate_rate: t and values differ in length");
  if (!(floor > 0.0)) throw InputError("estimate_rate: floor must be > 0");
  if (t.empty()) throw InsufficientDataError("estimate_rate: empty series");
  if (!(window.t0 < window.t1)) throw InputError("estimate_rate: window must satisfy t0 < t1");
  const double span_tol = 1e-9 * std::max(1.0, std::abs(t.back()));
  if (window.t0 < t.front() - span_tol || window.t1 > t.back() + span_tol) {
    throw InputError("estimate_rate: window lies outside the series span");
  }

  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] >= window.t0 - span_tol && t[i] <= window.t1 + span_tol && values[i] > floor &&
        std::isfinite(values[i])) {
      xs.push_back(t[i]);
      ys.push_back(std::log(values[i]));
    }
  }
  if (xs.size() < 10) {
    throw InsufficientDataError("estimate_rate: only " + std::to_string(xs.size()) +
                                " usable samples (need 10)");
  }

  const double count = static_cast<double>(xs.size());
  double x_mean = 0.0, y_mean = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    x_mean += xs[i];
    y_mean += ys[i];
  }
  x_mean /= count;
  y_mean /= count;

  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - x_mean, dy = ys[i] - y_mean;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw InsufficientDataError("estimate_rate: all samples share one time");
  const double slope = sxy / sxx;

  double ss_res = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (y_mean + slope * (xs[i] - x_mean));
    ss_res += r * r;
  }

  RateEstimate est;
  est.rate = -slope;
  est.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : (ss_res == 0.0 ? 1.0 : 0.0);
  est.t_start = window.t0;
  est.t_end = window.t1;
  est.n_points = xs.size();
  return est;
}

}  // namespace exptrack
