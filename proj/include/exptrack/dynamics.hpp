#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "exptrack/errors.hpp"
#include "exptrack/types.hpp"

namespace exptrack {

enum class ModelKind { Pendulum1Dof, TwoLinkPlanar, Custom };

inline const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Pendulum1Dof: return "pendulum";
    case ModelKind::TwoLinkPlanar: return "two_link";
    case ModelKind::Custom: return "custom";
  }
  return "unknown";
}

enum class FrictionKind { Zero, Viscous, SmoothCoulomb };

inline const char* to_string(FrictionKind kind) {
  switch (kind) {
    case FrictionKind::Zero: return "zero";
    case FrictionKind::Viscous: return "viscous";
    case FrictionKind::SmoothCoulomb: return "smooth_coulomb";
  }
  return "unknown";
}

// Plant-side friction F(t, qdot). The controller never reads it.
struct FrictionConfig {
  FrictionKind kind = FrictionKind::Zero;
  double coefficient = 0.0;  // b for viscous, f_c for smoothed Coulomb
  double epsilon = 1e-3;     // tanh smoothing width

  static FrictionConfig zero() { return {}; }
  static FrictionConfig viscous(double b) { return {FrictionKind::Viscous, b, 1e-3}; }
  static FrictionConfig smooth_coulomb(double f_c, double eps = 1e-3) {
    return {FrictionKind::SmoothCoulomb, f_c, eps};
  }

  void validate() const {
    if (!std::isfinite(coefficient) || coefficient < 0.0) {
      throw InputError("friction coefficient must be finite and >= 0");
    }
    if (kind == FrictionKind::SmoothCoulomb && !(epsilon > 0.0 && std::isfinite(epsilon))) {
      throw InputError("friction epsilon must be > 0");
    }
  }
};

namespace detail {

// Configuration-dependent terms of a mechanism. Everything velocity-dependent
// (C, Mdot) is derived from the partials of M by the free functions below.
class InertialModel {
 public:
  virtual ~InertialModel() = default;
  virtual Eigen::Index dof() const = 0;
  virtual Matrix mass_matrix(const Vector& q) const = 0;
  // Element k is dM/dq_k.
  virtual std::vector<Matrix> mass_matrix_partials(const Vector& q) const = 0;
  virtual Vector gravity(const Vector& q) const = 0;
  virtual double potential_energy(const Vector& q) const = 0;
};

// Point mass m on a massless rod of length l; q measured from the +x axis,
// gravity along -y.
class PendulumModel final : public InertialModel {
 public:
  PendulumModel(double m, double l, double g) : m_(m), l_(l), g_(g) {}

  Eigen::Index dof() const override { return 1; }
  Matrix mass_matrix(const Vector&) const override { return Matrix::Constant(1, 1, m_ * l_ * l_); }
  std::vector<Matrix> mass_matrix_partials(const Vector&) const override {
    return {Matrix::Zero(1, 1)};
  }
  Vector gravity(const Vector& q) const override {
    return Vector::Constant(1, m_ * g_ * l_ * std::cos(q[0]));
  }
  double potential_energy(const Vector& q) const override { return m_ * g_ * l_ * std::sin(q[0]); }

 private:
  double m_, l_, g_;
};

// Planar arm with point masses at the link tips. q[0] from the +x axis,
// q[1] relative to link 1.
class TwoLinkModel final : public InertialModel {
 public:
  TwoLinkModel(double m1, double m2, double l1, double l2, double g)
      : m1_(m1), m2_(m2), l1_(l1), l2_(l2), g_(g) {}

  Eigen::Index dof() const override { return 2; }

  Matrix mass_matrix(const Vector& q) const override {
    const double c2 = std::cos(q[1]);
    Matrix m(2, 2);
    m(0, 0) = m1_ * l1_ * l1_ + m2_ * (l1_ * l1_ + 2.0 * l1_ * l2_ * c2 + l2_ * l2_);
    m(0, 1) = m2_ * (l1_ * l2_ * c2 + l2_ * l2_);
    m(1, 0) = m(0, 1);
    m(1, 1) = m2_ * l2_ * l2_;
    return m;
  }

  std::vector<Matrix> mass_matrix_partials(const Vector& q) const override {
    const double s2 = std::sin(q[1]);
    Matrix d2(2, 2);
    d2(0, 0) = -2.0 * m2_ * l1_ * l2_ * s2;
    d2(0, 1) = -m2_ * l1_ * l2_ * s2;
    d2(1, 0) = d2(0, 1);
    d2(1, 1) = 0.0;
    return {Matrix::Zero(2, 2), d2};
  }

  Vector gravity(const Vector& q) const override {
    const double c1 = std::cos(q[0]);
    const double c12 = std::cos(q[0] + q[1]);
    Vector g(2);
    g[0] = (m1_ + m2_) * g_ * l1_ * c1 + m2_ * g_ * l2_ * c12;
    g[1] = m2_ * g_ * l2_ * c12;
    return g;
  }

  double potential_energy(const Vector& q) const override {
    return (m1_ + m2_) * g_ * l1_ * std::sin(q[0]) + m2_ * g_ * l2_ * std::sin(q[0] + q[1]);
  }

 private:
  double m1_, m2_, l1_, l2_, g_;
};

// User-supplied M(q) and potential energy; partials and gravity by central
// differences with step h.
class CustomModel final : public InertialModel {
 public:
  using MassFn = std::function<Matrix(const Vector&)>;
  using PotentialFn = std::function<double(const Vector&)>;

  static constexpr double kStep = 1e-6;

  CustomModel(Eigen::Index n, MassFn mass, PotentialFn potential)
      : n_(n), mass_(std::move(mass)), potential_(std::move(potential)) {}

  Eigen::Index dof() const override { return n_; }

  Matrix mass_matrix(const Vector& q) const override {
    Matrix m = mass_(q);
    if (m.rows() != n_ || m.cols() != n_) {
      throw ContractViolation("custom mass matrix has wrong shape");
    }
    return m;
  }

  std::vector<Matrix> mass_matrix_partials(const Vector& q) const override {
    std::vector<Matrix> out;
    out.reserve(static_cast<std::size_t>(n_));
    Vector qp = q, qm = q;
    for (Eigen::Index k = 0; k < n_; ++k) {
      qp[k] = q[k] + kStep;
      qm[k] = q[k] - kStep;
      out.push_back((mass_matrix(qp) - mass_matrix(qm)) / (2.0 * kStep));
      qp[k] = q[k];
      qm[k] = q[k];
    }
    return out;
  }

  Vector gravity(const Vector& q) const override {
    Vector g(n_);
    Vector qp = q, qm = q;
    for (Eigen::Index k = 0; k < n_; ++k) {
      qp[k] = q[k] + kStep;
      qm[k] = q[k] - kStep;
      g[k] = (potential_(qp) - potential_(qm)) / (2.0 * kStep);
      qp[k] = q[k];
      qm[k] = q[k];
    }
    return g;
  }

  double potential_energy(const Vector& q) const override { return potential_(q); }

 private:
  Eigen::Index n_;
  MassFn mass_;
  PotentialFn potential_;
};

inline void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw InputError(std::string(name) + " must be finite and > 0");
  }
}

}  // namespace detail

// Immutable plant description; cheap to copy and safe to share across threads.
class RobotModel {
 public:
  using Parameters = std::map<std::string, double>;

  static RobotModel pendulum(double m, double l, double g = 9.81,
                             FrictionConfig friction = FrictionConfig::zero()) {
    detail::require_positive(m, "m");
    detail::require_positive(l, "l");
    if (!std::isfinite(g)) throw InputError("g must be finite");
    return RobotModel(ModelKind::Pendulum1Dof, std::make_shared<detail::PendulumModel>(m, l, g),
                      Parameters{{"m", m}, {"l", l}, {"g", g}}, friction);
  }

  static RobotModel two_link(double m1, double m2, double l1, double l2, double g = 9.81,
                             FrictionConfig friction = FrictionConfig::zero()) {
    detail::require_positive(m1, "m1");
    detail::require_positive(m2, "m2");
    detail::require_positive(l1, "l1");
    detail::require_positive(l2, "l2");
    if (!std::isfinite(g)) throw InputError("g must be finite");
    return RobotModel(ModelKind::TwoLinkPlanar,
                      std::make_shared<detail::TwoLinkModel>(m1, m2, l1, l2, g),
                      Parameters{{"m1", m1}, {"m2", m2}, {"l1", l1}, {"l2", l2}, {"g", g}},
                      friction);
  }

  // C, G and Mdot are derived from the supplied M(q) and potential energy.
  static RobotModel custom(Eigen::Index n, detail::CustomModel::MassFn mass,
                           detail::CustomModel::PotentialFn potential,
                           FrictionConfig friction = FrictionConfig::zero(),
                           Parameters parameters = {}) {
    if (n < 1) throw ContractViolation("custom model needs n >= 1");
    if (!mass || !potential) throw InputError("custom model needs mass and potential evaluators");
    return RobotModel(ModelKind::Custom,
                      std::make_shared<detail::CustomModel>(n, std::move(mass), std::move(potential)),
                      std::move(parameters), friction);
  }

  Eigen::Index dof() const noexcept { return impl_->dof(); }
  ModelKind kind() const noexcept { return kind_; }
  const Parameters& parameters() const noexcept { return parameters_; }
  const FrictionConfig& friction() const noexcept { return friction_; }
  double coriolis_scale() const noexcept { return coriolis_scale_; }
  const detail::InertialModel& inertial() const noexcept { return *impl_; }

  RobotModel with_friction(FrictionConfig friction) const {
    friction.validate();
    RobotModel copy = *this;
    copy.friction_ = friction;
    return copy;
  }

  // Mutation hook: scales C away from its Christoffel value. Only meant for
  // exercising the skew-symmetry check.
  RobotModel with_coriolis_scale(double scale) const {
    RobotModel copy = *this;
    copy.coriolis_scale_ = scale;
    return copy;
  }

 private:
  RobotModel(ModelKind kind, std::shared_ptr<const detail::InertialModel> impl, Parameters params,
             FrictionConfig friction)
      : kind_(kind), impl_(std::move(impl)), parameters_(std::move(params)), friction_(friction) {
    friction_.validate();
  }

  ModelKind kind_;
  std::shared_ptr<const detail::InertialModel> impl_;
  Parameters parameters_;
  FrictionConfig friction_;
  double coriolis_scale_ = 1.0;
};

namespace detail {

inline void check_position(const RobotModel& model, const Vector& q) {
  require_size(q, model.dof(), "q");
  require_finite(q, "q");
}

inline void check_velocity(const RobotModel& model, const Vector& qdot) {
  require_size(qdot, model.dof(), "qdot");
  require_finite(qdot, "qdot");
}

}  // namespace detail

// Cholesky factor of M(q). Any non-positive pivot rejects the model at q.
inline Eigen::LLT<Matrix> factor_mass_matrix(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw ModelDefinitenessError("mass matrix is not positive definite");
  }
  return llt;
}

// M(q), checked for symmetry and positive definiteness.
inline Matrix mass_matrix(const RobotModel& model, const Vector& q) {
  detail::check_position(model, q);
  Matrix m = model.inertial().mass_matrix(q);
  if (!m.allFinite()) throw ModelDefinitenessError("mass matrix has non-finite entries");
  if (max_abs(m - m.transpose()) > 1e-12 * std::max(1.0, max_abs(m))) {
    throw ModelDefinitenessError("mass matrix is not symmetric");
  }
  factor_mass_matrix(m);
  return m;
}

// dM/dq_k for every k.
inline std::vector<Matrix> mass_matrix_partials(const RobotModel& model, const Vector& q) {
  detail::check_position(model, q);
  return model.inertial().mass_matrix_partials(q);
}

// Christoffel-symbol Coriolis matrix:
//   C_ij = sum_k c_ijk qdot_k,  c_ijk = 1/2 (dM_ij/dq_k + dM_ik/dq_j - dM_jk/dq_i)
// With this choice Mdot - 2C is skew-symmetric.
inline Matrix coriolis_matrix(const RobotModel& model, const Vector& q, const Vector& qdot) {
  detail::check_position(model, q);
  detail::check_velocity(model, qdot);
  const Eigen::Index n = model.dof();
  const auto dm = model.inertial().mass_matrix_partials(q);
  Matrix c = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      double acc = 0.0;
      for (Eigen::Index k = 0; k < n; ++k) {
        const double cijk = 0.5 * (dm[k](i, j) + dm[j](i, k) - dm[i](j, k));
        acc += cijk * qdot[k];
      }
      c(i, j) = acc;
    }
  }
  if (model.coriolis_scale() != 1.0) c *= model.coriolis_scale();
  return c;
}

inline Vector gravity_vector(const RobotModel& model, const Vector& q) {
  detail::check_position(model, q);
  return model.inertial().gravity(q);
}

inline Vector friction_vector(const RobotModel& model, double t, const Vector& qdot) {
  detail::check_velocity(model, qdot);
  if (!(t >= 0.0)) throw InputError("friction_vector: t must be >= 0");
  const auto& f = model.friction();
  switch (f.kind) {
    case FrictionKind::Zero:
      return Vector::Zero(model.dof());
    case FrictionKind::Viscous:
      return f.coefficient * qdot;
    case FrictionKind::SmoothCoulomb:
      return f.coefficient * (qdot / f.epsilon).array().tanh().matrix();
  }
  return Vector::Zero(model.dof());
}

// Mdot(q, qdot) = C + C^T.
inline Matrix mass_matrix_rate(const RobotModel& model, const Vector& q, const Vector& qdot) {
  const Matrix c = coriolis_matrix(model, q, qdot);
  return c + c.transpose();
}

// Mdot from the chain rule, sum_k dM/dq_k qdot_k. Independent of C, so it
// can audit a Coriolis matrix.
inline Matrix mass_matrix_directional_rate(const RobotModel& model, const Vector& q,
                                           const Vector& qdot) {
  detail::check_position(model, q);
  detail::check_velocity(model, qdot);
  const auto dm = model.inertial().mass_matrix_partials(q);
  Matrix out = Matrix::Zero(model.dof(), model.dof());
  for (Eigen::Index k = 0; k < model.dof(); ++k) out += dm[k] * qdot[k];
  return out;
}

// ||S + S^T||_max with S = Mdot - 2C, Mdot taken from the chain rule.
inline double check_skew_symmetry(const RobotModel& model, const Vector& q, const Vector& qdot) {
  const Matrix s = mass_matrix_directional_rate(model, q, qdot) - 2.0 * coriolis_matrix(model, q, qdot);
  return max_abs(s + s.transpose());
}

inline double potential_energy(const RobotModel& model, const Vector& q) {
  detail::check_position(model, q);
  return model.inertial().potential_energy(q);
}

inline double kinetic_energy(const RobotModel& model, const Vector& q, const Vector& qdot) {
  detail::check_velocity(model, qdot);
  return 0.5 * qdot.dot(mass_matrix(model, q) * qdot);
}

inline double total_energy(const RobotModel& model, const Vector& q, const Vector& qdot) {
  return kinetic_energy(model, q, qdot) + potential_energy(model, q);
}

// qddot = M^{-1} (tau - C qdot - G - F).
inline Vector forward_dynamics(const RobotModel& model, double t, const Vector& q,
                               const Vector& qdot, const Vector& tau) {
  detail::check_position(model, q);
  detail::check_velocity(model, qdot);
  require_size(tau, model.dof(), "tau");
  const Matrix m = model.inertial().mass_matrix(q);
  const auto llt = factor_mass_matrix(m);
  const Vector rhs = tau - coriolis_matrix(model, q, qdot) * qdot - gravity_vector(model, q) -
                     friction_vector(model, t, qdot);
  return llt.solve(rhs);
}

}  // namespace exptrack
