#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "exptrack/dynamics.hpp"
#include "exptrack/errors.hpp"
#include "exptrack/trajgen.hpp"
#include "exptrack/types.hpp"

namespace exptrack {

// Controller parameters: the filter gain lambda and the single SPD matrix P.
// P only enters the certificates; the torque law never reads it.
class Gains {
 public:
  // P = p I.
  static Gains scalar(double lambda, double p = 1.0) {
    if (!(p > 0.0) || !std::isfinite(p)) throw GainValidationError("p_scalar must be > 0");
    Gains g(lambda);
    g.p_scalar_ = p;
    return g;
  }

  static Gains with_matrix(double lambda, Matrix p) {
    Gains g(lambda);
    if (p.rows() != p.cols() || p.rows() < 1) throw GainValidationError("P must be square");
    if (!p.allFinite()) throw GainValidationError("P has non-finite entries");
    if (max_abs(p - p.transpose()) > 1e-12 * std::max(1.0, max_abs(p))) {
      throw GainValidationError("P must be symmetric");
    }
    Eigen::LLT<Matrix> llt(p);
    if (llt.info() != Eigen::Success) throw GainValidationError("P must be positive definite");
    g.p_matrix_ = std::move(p);
    return g;
  }

  double lambda() const noexcept { return lambda_; }
  const std::optional<double>& p_scalar() const noexcept { return p_scalar_; }
  bool is_scalar() const noexcept { return p_scalar_.has_value(); }
  Eigen::Index p_matrix_rows() const noexcept { return p_matrix_.rows(); }

  Matrix p_matrix(Eigen::Index n) const {
    if (p_scalar_) return *p_scalar_ * Matrix::Identity(n, n);
    if (p_matrix_.rows() != n) {
      throw GainValidationError("P is " + std::to_string(p_matrix_.rows()) + "x" +
                                std::to_string(p_matrix_.cols()) + " but the model has " +
                                std::to_string(n) + " degrees of freedom");
    }
    return p_matrix_;
  }

  void validate(Eigen::Index n) const { (void)p_matrix(n); }

 private:
  explicit Gains(double lambda) : lambda_(lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
      throw GainValidationError("lambda must be > 0, got " + std::to_string(lambda));
    }
  }

  double lambda_;
  std::optional<double> p_scalar_;
  Matrix p_matrix_;
};

struct ErrorState {
  Vector q_tilde;
  Vector q_tilde_dot;
  Vector q_r;
};

struct ControlOutput {
  Vector tau;
};

inline Vector position_error(const Vector& q_d, const Vector& q) {
  require_size(q, q_d.size(), "q");
  return q_d - q;
}

// q_r = q_tilde_dot + lambda q_tilde.
inline Vector filtered_error(const Vector& q_tilde, const Vector& q_tilde_dot, double lambda) {
  require_size(q_tilde_dot, q_tilde.size(), "q_tilde_dot");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw GainValidationError("lambda must be > 0, got " + std::to_string(lambda));
  }
  return q_tilde_dot + lambda * q_tilde;
}

// Errors from measured state; q_tilde_dot comes from measured velocity.
inline ErrorState tracking_errors(const Vector& q, const Vector& qdot, const Reference& ref,
                                  double lambda) {
  ErrorState e;
  e.q_tilde = position_error(ref.q_d, q);
  e.q_tilde_dot = position_error(ref.qd_dot, qdot);
  e.q_r = filtered_error(e.q_tilde, e.q_tilde_dot, lambda);
  return e;
}

// Backstepped velocity command
//   eta = qd_dot - q_tilde - 1/2 M^{-1}(q) Mdot(q, qdot) q_tilde
// with Mdot = C + C^T evaluated at (q, qdot). Solved through the Cholesky
// factor of M.
inline Vector virtual_input(const RobotModel& model, const Vector& q, const Vector& qdot,
                            const Vector& q_tilde, const Vector& qd_dot) {
  const Eigen::Index n = model.dof();
  require_size(q_tilde, n, "q_tilde");
  require_size(qd_dot, n, "qd_dot");
  const auto llt = factor_mass_matrix(mass_matrix(model, q));
  const Matrix mdot = mass_matrix_rate(model, q, qdot);
  return qd_dot - q_tilde - 0.5 * llt.solve(mdot * q_tilde);
}

// Rejects a general P unless P M(q) is symmetric to 1e-8 at q. Scalar P
// always passes.
inline void check_pm_symmetry(const RobotModel& model, const Vector& q, const Gains& gains) {
  if (gains.is_scalar()) return;
  const Matrix pm = gains.p_matrix(model.dof()) * mass_matrix(model, q);
  const double asym = max_abs(pm - pm.transpose());
  if (asym > 1e-8) {
    throw CertificateValidityError("P*M(q) is not symmetric (max asymmetry " +
                                   std::to_string(asym) + ")");
  }
}

// tau = M (qd_ddot + lambda q_tilde_dot + q_r) + C (qdot + q_r) + G
// Friction is never compensated and P is never read.
inline ControlOutput control_torque(const RobotModel& model, const JointState& state,
                                    const Reference& ref, const Gains& gains) {
  const Eigen::Index n = model.dof();
  require_size(state.q(), n, "state.q");
  require_size(ref.q_d, n, "ref.q_d");
  require_size(ref.qd_dot, n, "ref.qd_dot");
  require_size(ref.qd_ddot, n, "ref.qd_ddot");
  gains.validate(n);

  const double lambda = gains.lambda();
  const ErrorState e = tracking_errors(state.q(), state.qdot(), ref, lambda);

  const Matrix m = mass_matrix(model, state.q());
  const Matrix c = coriolis_matrix(model, state.q(), state.qdot());
  const Vector g = gravity_vector(model, state.q());

  ControlOutput out;
  out.tau = m * (ref.qd_ddot + lambda * e.q_tilde_dot + e.q_r) + c * (state.qdot() + e.q_r) + g;
  return out;
}

}  // namespace exptrack
