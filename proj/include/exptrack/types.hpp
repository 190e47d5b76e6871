#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <utility>

#include "exptrack/errors.hpp"

namespace exptrack {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline void require_size(const Vector& v, Eigen::Index n, const char* name) {
  if (v.size() != n) {
    throw ContractViolation(std::string(name) + ": expected length " + std::to_string(n) +
                            ", got " + std::to_string(v.size()));
  }
}

inline void require_finite(const Vector& v, const char* name) {
  if (!v.allFinite()) throw InputError(std::string(name) + ": non-finite entry");
}

// Generalized positions and velocities of an n-DOF mechanism.
class JointState {
 public:
  JointState(Vector q, Vector qdot) : q_(std::move(q)), qdot_(std::move(qdot)) {
    if (q_.size() < 1) throw ContractViolation("JointState: need at least one degree of freedom");
    require_size(qdot_, q_.size(), "JointState.qdot");
    require_finite(q_, "JointState.q");
    require_finite(qdot_, "JointState.qdot");
  }

  const Vector& q() const noexcept { return q_; }
  const Vector& qdot() const noexcept { return qdot_; }
  Eigen::Index dof() const noexcept { return q_.size(); }

 private:
  Vector q_;
  Vector qdot_;
};

// Entrywise max norm.
inline double max_abs(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  return a.cwiseAbs().maxCoeff();
}

}  // namespace exptrack
