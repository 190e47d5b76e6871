#pragma once

#include <cmath>
#include <string>

#include "exptrack/errors.hpp"
#include "exptrack/types.hpp"

namespace exptrack {

// Desired trajectory sample at time t.
struct Reference {
  double t = 0.0;
  Vector q_d;
  Vector qd_dot;
  Vector qd_ddot;
};

enum class ReferenceKind { Setpoint, Sinusoid, Poly5 };

inline const char* to_string(ReferenceKind kind) {
  switch (kind) {
    case ReferenceKind::Setpoint: return "setpoint";
    case ReferenceKind::Sinusoid: return "sinusoid";
    case ReferenceKind::Poly5: return "poly5";
  }
  return "unknown";
}

// Per-joint generator parameters. Only the fields of the selected kind are
// read.
struct ReferenceSpec {
  ReferenceKind kind = ReferenceKind::Setpoint;

  Vector setpoint;  // Setpoint

  Vector amplitude;  // Sinusoid: a sin(w t + phi) + b
  Vector frequency;
  Vector phase;
  Vector offset;

  Vector start;  // Poly5: rest-to-rest from start to end over duration
  Vector end;
  double duration = 1.0;

  static ReferenceSpec make_setpoint(Vector c) {
    ReferenceSpec s;
    s.kind = ReferenceKind::Setpoint;
    s.setpoint = std::move(c);
    return s;
  }

  static ReferenceSpec make_sinusoid(Vector a, Vector w, Vector phi, Vector b) {
    ReferenceSpec s;
    s.kind = ReferenceKind::Sinusoid;
    s.amplitude = std::move(a);
    s.frequency = std::move(w);
    s.phase = std::move(phi);
    s.offset = std::move(b);
    return s;
  }

  static ReferenceSpec make_poly5(Vector from, Vector to, double duration) {
    ReferenceSpec s;
    s.kind = ReferenceKind::Poly5;
    s.start = std::move(from);
    s.end = std::move(to);
    s.duration = duration;
    return s;
  }

  void validate(Eigen::Index n) const {
    auto check = [n](const Vector& v, const char* name) {
      if (v.size() != n) {
        throw SpecValidationError(std::string("reference.") + name + ": expected length " +
                                  std::to_string(n) + ", got " + std::to_string(v.size()));
      }
      if (!v.allFinite()) throw SpecValidationError(std::string("reference.") + name + ": non-finite");
    };
    switch (kind) {
      case ReferenceKind::Setpoint:
        check(setpoint, "setpoint");
        break;
      case ReferenceKind::Sinusoid:
        check(amplitude, "amplitude");
        check(frequency, "frequency");
        check(phase, "phase");
        check(offset, "offset");
        if ((frequency.array() < 0.0).any()) {
          throw SpecValidationError("reference.frequency must be >= 0");
        }
        break;
      case ReferenceKind::Poly5:
        check(start, "start");
        check(end, "end");
        if (!(duration > 0.0) || !std::isfinite(duration)) {
          throw SpecValidationError("reference.duration must be > 0");
        }
        break;
    }
  }
};

inline Reference reference_at(const ReferenceSpec& spec, double t, Eigen::Index n) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw SpecValidationError("reference_at: t must be >= 0");
  spec.validate(n);

  Reference r;
  r.t = t;
  switch (spec.kind) {
    case ReferenceKind::Setpoint:
      r.q_d = spec.setpoint;
      r.qd_dot = Vector::Zero(n);
      r.qd_ddot = Vector::Zero(n);
      break;

    case ReferenceKind::Sinusoid: {
      const Eigen::ArrayXd arg = spec.frequency.array() * t + spec.phase.array();
      const Eigen::ArrayXd a = spec.amplitude.array();
      const Eigen::ArrayXd w = spec.frequency.array();
      r.q_d = (a * arg.sin() + spec.offset.array()).matrix();
      r.qd_dot = (a * w * arg.cos()).matrix();
      r.qd_ddot = (-a * w * w * arg.sin()).matrix();
      break;
    }

    case ReferenceKind::Poly5: {
      const double T = spec.duration;
      const Vector delta = spec.end - spec.start;
      if (t >= T) {
        r.q_d = spec.end;
        r.qd_dot = Vector::Zero(n);
        r.qd_ddot = Vector::Zero(n);
        break;
      }
      const double s = t / T;
      const double s2 = s * s, s3 = s2 * s, s4 = s3 * s, s5 = s4 * s;
      const double pos = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
      const double vel = (30.0 * s2 - 60.0 * s3 + 30.0 * s4) / T;
      const double acc = (60.0 * s - 180.0 * s2 + 120.0 * s3) / (T * T);
      r.q_d = spec.start + pos * delta;
      r.qd_dot = vel * delta;
      r.qd_ddot = acc * delta;
      break;
    }
  }
  return r;
}

}  // namespace exptrack
