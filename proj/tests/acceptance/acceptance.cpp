// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "exptrack/commands.hpp"
#include "oracles.hpp"

using namespace exptrack;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

struct Plant {
  std::string name;
  RobotModel model;
  std::vector<oracle::PointMass> masses;
  double g;
};

std::vector<Plant> plants() {
  return {{"pendulum", RobotModel::pendulum(1.2, 0.8, 9.81), oracle::pendulum_masses(1.2, 0.8), 9.81},
          {"two_link", RobotModel::two_link(1.5, 0.8, 1.0, 0.7, 9.81),
           oracle::two_link_masses(1.5, 0.8, 1.0, 0.7), 9.81}};
}

Vector uniform(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

// The three reference kinds for an n-joint model.
std::vector<ReferenceSpec> references(Eigen::Index n) {
  if (n == 1) {
    return {ReferenceSpec::make_setpoint(vec({1.0})),
            ReferenceSpec::make_sinusoid(vec({0.5}), vec({1.5}), vec({0.2}), vec({0.3})),
            ReferenceSpec::make_poly5(vec({0.0}), vec({1.2}), 2.0)};
  }
  return {ReferenceSpec::make_setpoint(vec({0.3, 0.5})),
          ReferenceSpec::make_sinusoid(vec({0.5, 0.3}), vec({1.0, 2.0}), vec({0.0, 0.0}), vec({0.2, 0.4})),
          ReferenceSpec::make_poly5(vec({0.0, 0.0}), vec({1.0, -0.5}), 2.0)};
}

JointState off_reference_start(Eigen::Index n) {
  return n == 1 ? JointState(vec({-0.4}), vec({0.6})) : JointState(vec({0.9, -0.3}), vec({0.4, -0.5}));
}

ReferenceSpec arm_sinusoid() { return references(2)[1]; }

// 1. Skew symmetry of Mdot - 2C.
Outcome skew_symmetry() {
  std::mt19937_64 rng(20261019);
  double worst = 0.0;
  const auto start = std::chrono::steady_clock::now();
  for (const auto& p : plants()) {
    const Eigen::Index n = p.model.dof();
    for (int i = 0; i < 1000; ++i) {
      const Vector q = uniform(rng, n, -M_PI, M_PI), qdot = uniform(rng, n, -3.0, 3.0);
      worst = std::max(worst, check_skew_symmetry(p.model, q, qdot));
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {worst <= 1e-10 && secs < 1.0,
          "max |S + S^T| = " + fmt(worst) + " over 2x1000 samples in " + fmt(secs) + " s"};
}

// 2. Kinematic subsystem: V1(t) = V1(0) exp(-2t).
Outcome kinematic_decay() {
  SimConfig cfg{RobotModel::two_link(1, 1, 1, 1), Gains::scalar(1.0), arm_sinusoid(),
                JointState(vec({0.5, -0.2}), vec({0, 0})), LoopKind::Kinematic, 1e-3, 5.0};
  const auto start = std::chrono::steady_clock::now();
  const double err = max_relative_decay_error(simulate(cfg), Certificate::V1, 2.0);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {err <= 1e-6 && secs < 5.0, "max relative error " + fmt(err) + " in " + fmt(secs) + " s"};
}

// 3. Closed loop: W(t) = W(0) exp(-2t) across models, gains and references.
Outcome filtered_energy_decay() {
  double worst = 0.0;
  int runs = 0;
  const auto start = std::chrono::steady_clock::now();
  for (const auto& p : plants()) {
    const Eigen::Index n = p.model.dof();
    for (double lambda : {0.5, 1.0, 2.0, 5.0}) {
      for (const auto& ref : references(n)) {
        SimConfig cfg{p.model, Gains::scalar(lambda, 1.0), ref, off_reference_start(n), LoopKind::ClosedLoop,
                      1e-3, 5.0};
        worst = std::max(worst, max_relative_decay_error(simulate(cfg), Certificate::W, 2.0));
        ++runs;
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {worst <= 1e-6 && secs < 60.0,
          "max relative error " + fmt(worst) + " over " + std::to_string(runs) + " runs in " + fmt(secs) + " s"};
}

// 4. Position error decays at min(lambda, 1). The start puts q_r(0) on the
// slow mode plus a 5% fast component, so the asymptotic rate shows inside
// the [1, 5] s window.
Outcome position_error_rate() {
  std::string detail;
  bool pass = true;
  const auto spec = arm_sinusoid();
  const Vector e0 = vec({0.3, -0.2});
  for (double lambda : {0.5, 2.0}) {
    const Reference r0 = reference_at(spec, 0.0, 2);
    const Vector qr0 = (std::max(lambda - 1.0, 0.0) + 0.05) * e0;
    const JointState start(r0.q_d - e0, r0.qd_dot - (qr0 - lambda * e0));
    SimConfig cfg{RobotModel::two_link(1, 1, 1, 1), Gains::scalar(lambda), spec, start, LoopKind::ClosedLoop,
                  1e-3, 5.0};
    const auto log = simulate(cfg);
    const auto t = log.times();
    const auto norm = log.series([](const LogSample& s) { return s.q_tilde.norm(); });
    const double rate = estimate_rate(t, norm, {1.0, 5.0}).rate;
    const double target = std::min(lambda, 1.0);

    // Scalar brute force per joint, driven by the logged q_r.
    std::vector<double> oracle_norm(t.size(), 0.0);
    double track = 0.0;
    for (Eigen::Index j = 0; j < 2; ++j) {
      const auto r = log.series([j](const LogSample& s) { return s.q_r[j]; });
      const auto e = oracle::integrate_cascade(lambda, log.samples.front().q_tilde[j], r, cfg.dt);
      for (std::size_t k = 0; k < t.size(); ++k) {
        oracle_norm[k] += e[k] * e[k];
        track = std::max(track, std::abs(e[k] - log.samples[k].q_tilde[j]));
      }
    }
    for (double& v : oracle_norm) v = std::sqrt(v);
    const double oracle_rate = -oracle::log_slope(t, oracle_norm, 1.0, 5.0);

    const bool ok = std::abs(rate - target) <= 0.05 * target && std::abs(oracle_rate - target) <= 0.05 * target &&
                    std::abs(rate - oracle_rate) <= 1e-4 && track <= 1e-6;
    pass = pass && ok;
    detail += "lambda=" + fmt(lambda) + ": rate " + fmt(rate) + " (oracle " + fmt(oracle_rate) + ", target " +
              fmt(target) + ", trajectory gap " + fmt(track) + ")  ";
  }
  return {pass, detail};
}

// 5. The torque never reads P; W decays at 2 for any scalar P.
Outcome p_independence() {
  const auto model = RobotModel::two_link(1, 1, 1, 1);
  const JointState state(vec({0.3, -0.4}), vec({0.5, 1.2}));
  const Reference ref = reference_at(arm_sinusoid(), 0.7, 2);
  const Vector a = control_torque(model, state, ref, Gains::with_matrix(1.0, Matrix::Identity(2, 2))).tau;
  const Vector b = control_torque(model, state, ref, Gains::with_matrix(1.0, 3.0 * Matrix::Identity(2, 2))).tau;
  bool pass = a == b;
  std::string detail = std::string("tau bit-identical under P = I, 3I: ") + (pass ? "yes" : "no") + "; W-rates";
  for (double p : {0.5, 1.0, 10.0}) {
    SimConfig cfg{model, Gains::scalar(1.0, p), arm_sinusoid(), off_reference_start(2), LoopKind::ClosedLoop, 1e-3,
                  5.0};
    const auto log = simulate(cfg);
    const double rate = estimate_rate(log.times(), certificate_series(log, Certificate::W), {1.0, 5.0}).rate;
    pass = pass && std::abs(rate - 2.0) <= 1e-4;
    detail += " p=" + fmt(p) + ":" + std::to_string(rate);
  }
  return {pass, detail};
}

// 6. C, G and Mdot against the point-mass oracles; passive energy drift.
Outcome dynamics_oracles() {
  std::mt19937_64 rng(6);
  double worst_c = 0.0, worst_g = 0.0, worst_mdot = 0.0, worst_drift = 0.0;
  for (const auto& p : plants()) {
    const Eigen::Index n = p.model.dof();
    for (int i = 0; i < 100; ++i) {
      const Vector q = uniform(rng, n, -M_PI, M_PI), qdot = uniform(rng, n, -3.0, 3.0);
      worst_c = std::max(worst_c, (coriolis_matrix(p.model, q, qdot) * qdot -
                                   oracle::coriolis_force(p.masses, q, qdot)).cwiseAbs().maxCoeff());
      worst_g = std::max(worst_g, (gravity_vector(p.model, q) - oracle::gravity(p.masses, q, p.g)).cwiseAbs().maxCoeff());
      worst_mdot = std::max(worst_mdot, max_abs(mass_matrix_rate(p.model, q, qdot) -
                                                oracle::mass_matrix_rate(p.masses, q, qdot)));
    }
    const JointState start = n == 1 ? JointState(vec({0.3}), vec({0.5})) : JointState(vec({0.3, 0.2}), vec({0.5, -0.4}));
    SimConfig cfg{p.model, Gains::scalar(1.0), references(n)[0], start, LoopKind::OpenLoopPassive, 1e-3, 10.0};
    worst_drift = std::max(worst_drift, max_relative_energy_drift(simulate(cfg)));
  }
  const bool pass = worst_c <= 1e-6 && worst_g <= 1e-6 && worst_mdot <= 1e-6 && worst_drift <= 1e-6;
  return {pass, "C " + fmt(worst_c) + ", G " + fmt(worst_g) + ", Mdot " + fmt(worst_mdot) + ", energy drift " +
                    fmt(worst_drift)};
}

// 7. RK4 convergence order on the closed-loop pendulum.
Outcome integrator_order() {
  const auto terminal = [](double dt) {
    SimConfig cfg{RobotModel::pendulum(1, 1), Gains::scalar(1.0),
                  ReferenceSpec::make_sinusoid(vec({0.5}), vec({2.0}), vec({0.0}), vec({0.0})),
                  JointState(vec({0.4}), vec({0.0})), LoopKind::ClosedLoop, dt, 2.0};
    const auto log = simulate(cfg);
    Vector x(2);
    x << log.samples.back().q, log.samples.back().qdot;
    return x;
  };
  const double dt = 0.02;
  const Vector ref = terminal(dt / 8.0);
  const double e1 = (terminal(dt) - ref).norm(), e2 = (terminal(dt / 2.0) - ref).norm();
  const double ratio = e1 / e2;
  return {ratio >= 12.0 && ratio <= 20.0, "error ratio " + fmt(ratio) + " (e_dt " + fmt(e1) + ", e_dt/2 " + fmt(e2) + ")"};
}

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(EXPTRACK_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / "exptrack_acceptance";
  fs::create_directories(dir);
  return dir;
}

// 8. The verify report carries the composite ratio as an informational series.
Outcome composite_report() {
  const std::string out = (scratch_dir() / "report.json").string();
  const int code = run_cli("verify --config " EXPTRACK_CONFIG_DIR "/two_link_sinusoid.json --out " + out);
  const auto report = nlohmann::json::parse(slurp(out), nullptr, false);
  if (report.is_discarded()) return {false, "verify exited " + std::to_string(code) + " without a JSON report"};
  for (const auto& p : report.at("properties")) {
    if (p.at("name") == "composite_vdot_over_v") return {false, "composite ratio listed as a pass/fail property"};
  }
  for (const auto& item : report.at("informational")) {
    if (item.at("name") != "composite_vdot_over_v") continue;
    const bool flagged = item.at("informational").get<bool>() && !item.contains("pass");
    const std::size_t points = item.at("ratio").size();
    return {flagged && points > 0 && code == 0,
            "verify exit " + std::to_string(code) + ", " + std::to_string(points) + " ratio samples, mean " +
                fmt(item.at("summary").value("mean", std::nan(""))) + ", no pass/fail flag"};
  }
  return {false, "no composite_vdot_over_v entry"};
}

// 9. Repeated simulate runs write byte-identical CSV.
Outcome determinism() {
  const fs::path dir = scratch_dir();
  bool pass = true;
  std::string detail;
  for (const char* name : {"pendulum_setpoint", "two_link_sinusoid", "two_link_kinematic"}) {
    const std::string cfg = std::string(EXPTRACK_CONFIG_DIR) + "/" + name + ".json";
    const std::string a = (dir / "a.csv").string(), b = (dir / "b.csv").string();
    const int ca = run_cli("simulate --config " + cfg + " --out " + a);
    const int cb = run_cli("simulate --config " + cfg + " --out " + b);
    const std::string ta = slurp(a), tb = slurp(b);
    const bool same = ca == 0 && cb == 0 && !ta.empty() && ta == tb;
    pass = pass && same;
    detail += std::string(name) + (same ? " identical (" + std::to_string(ta.size()) + " bytes)  " : " DIFFERS  ");
  }
  return {pass, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"skew_symmetry", skew_symmetry},
      {"kinematic_v1_decay", kinematic_decay},
      {"closed_loop_w_decay", filtered_energy_decay},
      {"position_error_rate", position_error_rate},
      {"p_independence", p_independence},
      {"dynamics_oracles", dynamics_oracles},
      {"integrator_order", integrator_order},
      {"composite_certificate_report", composite_report},
      {"determinism", determinism},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("raised: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << i + 1 << "] " << criteria[i].first << ": " << o.detail
              << " [" << fmt(secs) << " s]" << std::endl;
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
