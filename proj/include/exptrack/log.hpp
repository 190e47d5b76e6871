#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "exptrack/types.hpp"

namespace exptrack {

enum class LoopKind { Kinematic, ClosedLoop, OpenLoopPassive };

inline const char* to_string(LoopKind kind) {
  switch (kind) {
    case LoopKind::Kinematic: return "kinematic";
    case LoopKind::ClosedLoop: return "closed_loop";
    case LoopKind::OpenLoopPassive: return "open_loop_passive";
  }
  return "unknown";
}

// One logged instant. Errors follow q_tilde = q_d - q throughout.
struct LogSample {
  double t = 0.0;
  Vector q, qdot, q_d, q_tilde, q_tilde_dot, q_r, tau;
  double v1 = 0.0;       // 1/2 q~' M q~
  double q_cert = 0.0;   // 1/2 q_r' M q_r + 1/2 q~' P q~
  double v_total = 0.0;  // v1 + 1/2 q_r' P M q_r
  double w = 0.0;        // 1/2 q_r' M q_r
  double energy = 0.0;   // kinetic + potential of the plant
};

// Echo of the run configuration.
struct LogHeader {
  std::string model;
  Eigen::Index dof = 0;
  LoopKind loop = LoopKind::ClosedLoop;
  double dt = 0.0;
  double t_final = 0.0;
  double lambda = 0.0;
  std::string reference;
  std::uint64_t seed = 0;
};

struct TrajectoryLog {
  LogHeader header;
  std::vector<LogSample> samples;

  std::size_t size() const noexcept { return samples.size(); }

  std::vector<double> times() const {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.t);
    return out;
  }

  template <typename Fn>
  std::vector<double> series(Fn&& fn) const {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(fn(s));
    return out;
  }
};

}  // namespace exptrack
