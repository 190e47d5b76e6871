#include <gtest/gtest.h>

#include <cmath>

#include "exptrack/simulate.hpp"

using namespace exptrack;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

ReferenceSpec arm_sinusoid() {
  return ReferenceSpec::make_sinusoid(vec({0.5, 0.3}), vec({1.0, 2.0}), vec({0.0, 0.0}), vec({0.2, 0.4}));
}

}  // namespace

TEST(Rk4, ScalarExamples) {
  const auto zero = [](double, const Vector&) { return Vector::Zero(1).eval(); };
  EXPECT_EQ(rk4_step(zero, 0.0, vec({3.0}), 0.1)[0], 3.0);

  const auto one = [](double, const Vector&) { return Vector::Ones(1).eval(); };
  EXPECT_DOUBLE_EQ(rk4_step(one, 0.0, vec({0.0}), 0.5)[0], 0.5);

  const auto decay = [](double, const Vector& x) { return (-2.0 * x).eval(); };
  const double expected = std::exp(-2.0 * 1e-3);
  EXPECT_LE(std::abs(rk4_step(decay, 0.0, vec({1.0}), 1e-3)[0] - expected) / expected, 1e-13);

  const auto nan = [](double, const Vector&) { return vec({NAN}); };
  EXPECT_THROW(rk4_step(nan, 0.0, vec({1.0}), 0.1), DivergenceError);
}

TEST(SimConfig, StepValidation) {
  SimConfig cfg{RobotModel::pendulum(1, 1), Gains::scalar(1), ReferenceSpec::make_setpoint(vec({0})),
                JointState(vec({0}), vec({0}))};
  EXPECT_EQ(cfg.steps(), 5000u);
  cfg.t_final = 0.0;
  EXPECT_THROW(cfg.steps(), ConfigError);
  cfg.t_final = 1.0005;
  EXPECT_THROW(cfg.steps(), ConfigError);
  cfg.t_final = 1.0;
  cfg.dt = -1e-3;
  EXPECT_THROW(cfg.steps(), ConfigError);
}

TEST(KinematicLoop, EquilibriumStaysPut) {
  SimConfig cfg{RobotModel::two_link(1, 1, 1, 1), Gains::scalar(1), ReferenceSpec::make_setpoint(vec({0.3, 0.5})),
                JointState(vec({0.3, 0.5}), vec({0, 0})), LoopKind::Kinematic, 1e-3, 1.0};
  const auto log = simulate(cfg);
  ASSERT_EQ(log.size(), 1001u);
  for (const auto& s : log.samples) {
    EXPECT_EQ(s.q_tilde.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(s.v1, 0.0);
  }
}

TEST(KinematicLoop, PendulumErrorIsExactExponential) {
  SimConfig cfg{RobotModel::pendulum(1, 1), Gains::scalar(1), ReferenceSpec::make_setpoint(vec({1.0})),
                JointState(vec({0.0}), vec({0.0})), LoopKind::Kinematic, 1e-3, 5.0};
  const auto log = simulate(cfg);
  for (const auto& s : log.samples) EXPECT_NEAR(s.q_tilde[0], std::exp(-s.t), 1e-9) << "t=" << s.t;
}

TEST(KinematicLoop, TwoLinkV1DecaysAtRateTwo) {
  SimConfig cfg{RobotModel::two_link(1, 1, 1, 1), Gains::scalar(1), arm_sinusoid(),
                JointState(vec({0.5, -0.2}), vec({0, 0})), LoopKind::Kinematic, 1e-3, 5.0};
  const auto log = simulate(cfg);
  EXPECT_LE(max_relative_decay_error(log, Certificate::V1, 2.0), 1e-6);
}

TEST(ClosedLoop, StartingOnTheReferenceStaysThere) {
  const auto spec = arm_sinusoid();
  const Reference r0 = reference_at(spec, 0.0, 2);
  SimConfig cfg{RobotModel::two_link(1, 1, 1, 1), Gains::scalar(2), spec, JointState(r0.q_d, r0.qd_dot),
                LoopKind::ClosedLoop, 1e-3, 5.0};
  const auto log = simulate(cfg);
  for (const auto& s : log.samples) EXPECT_LE(s.q_tilde.norm(), 1e-9) << "t=" << s.t;
}

TEST(ClosedLoop, FilteredEnergyDecaysAtRateTwo) {
  for (double lambda : {0.5, 1.0, 2.0, 5.0}) {
    SimConfig cfg{RobotModel::two_link(1, 1, 1, 1), Gains::scalar(lambda), arm_sinusoid(),
                  JointState(vec({0.1, 0.8}), vec({0.3, -0.2})), LoopKind::ClosedLoop, 1e-3, 5.0};
    const auto log = simulate(cfg);
    EXPECT_LE(max_relative_decay_error(log, Certificate::W, 2.0), 1e-6) << "lambda=" << lambda;
  }
}

TEST(ClosedLoop, DecayIsBlindToFrictionInTheControlLaw) {
  // Friction is uncompensated, so the exact decay must break under viscous friction.
  SimConfig cfg{RobotModel::pendulum(1, 1).with_friction(FrictionConfig::viscous(0.5)), Gains::scalar(1),
                ReferenceSpec::make_setpoint(vec({1.0})), JointState(vec({0.0}), vec({0.5})),
                LoopKind::ClosedLoop, 1e-3, 5.0};
  const auto log = simulate(cfg);
  EXPECT_GT(max_relative_decay_error(log, Certificate::W, 2.0), 1e-3);
}

TEST(ClosedLoop, Deterministic) {
  SimConfig cfg{RobotModel::two_link(1, 1, 1, 1), Gains::scalar(1.5), arm_sinusoid(),
                JointState(vec({0.1, 0.8}), vec({0.3, -0.2})), LoopKind::ClosedLoop, 1e-3, 2.0, 42};
  const auto a = simulate(cfg), b = simulate(cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.samples[i].q, b.samples[i].q);
    EXPECT_EQ(a.samples[i].tau, b.samples[i].tau);
  }
}

TEST(ClosedLoop, Rk4FourthOrder) {
  const auto run = [](double dt) {
    SimConfig cfg{RobotModel::pendulum(1, 1), Gains::scalar(1), ReferenceSpec::make_sinusoid(vec({0.5}), vec({2.0}),
                                                                                           vec({0.0}), vec({0.0})),
                  JointState(vec({0.4}), vec({0.0})), LoopKind::ClosedLoop, dt, 2.0};
    return simulate(cfg).samples.back().q[0];
  };
  const double dt = 0.02;
  const double ref = run(dt / 8.0);
  const double e1 = std::abs(run(dt) - ref), e2 = std::abs(run(dt / 2.0) - ref);
  const double ratio = e1 / e2;
  EXPECT_GE(ratio, 12.0);
  EXPECT_LE(ratio, 20.0);
}

TEST(ClosedLoop, LogSelfConsistency) {
  SimConfig cfg{RobotModel::two_link(1, 1, 1, 1), Gains::scalar(1.5), arm_sinusoid(),
                JointState(vec({0.1, 0.8}), vec({0.3, -0.2})), LoopKind::ClosedLoop, 1e-3, 1.0};
  const auto log = simulate(cfg);
  for (const auto& s : log.samples) {
    const Vector qr = s.q_tilde_dot + 1.5 * s.q_tilde;
    EXPECT_LE((s.q_r - qr).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((s.q_tilde - (s.q_d - s.q)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(s.v_total, s.v1 + s.w, 1e-12 * std::max(1.0, s.v_total));
  }
}

TEST(OpenLoopPassive, ConservesEnergy) {
  SimConfig cfg{RobotModel::two_link(1, 1, 1, 1), Gains::scalar(1), ReferenceSpec::make_setpoint(vec({0, 0})),
                JointState(vec({0.3, 0.2}), vec({0.0, 0.0})), LoopKind::OpenLoopPassive, 1e-3, 10.0};
  EXPECT_LE(max_relative_energy_drift(simulate(cfg)), 1e-6);

  cfg.model = cfg.model.with_friction(FrictionConfig::viscous(0.1));
  EXPECT_THROW(simulate(cfg), ConfigError);
}

TEST(ClosedLoop, HugeReferenceTripsDivergenceGuard) {
  // A 1e12 rad reference drags the state straight past the divergence guard.
  SimConfig cfg{RobotModel::pendulum(1, 1), Gains::scalar(1), ReferenceSpec::make_sinusoid(vec({1e12}), vec({1.0}),
                                                                                           vec({0.0}), vec({0.0})),
                JointState(vec({0.0}), vec({0.0})), LoopKind::ClosedLoop, 1e-2, 5.0};
  EXPECT_THROW(simulate(cfg), DivergenceError);
}

TEST(ClosedLoop, DimensionMismatchIsRejected) {
  SimConfig cfg{RobotModel::two_link(1, 1, 1, 1), Gains::scalar(1), arm_sinusoid(),
                JointState(vec({0.0}), vec({0.0})), LoopKind::ClosedLoop, 1e-3, 1.0};
  EXPECT_THROW(simulate(cfg), ContractViolation);
}
