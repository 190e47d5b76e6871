#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "exptrack/dynamics.hpp"
#include "exptrack/errors.hpp"
#include "exptrack/experiment.hpp"
#include "exptrack/lyapunov.hpp"
#include "exptrack/simulate.hpp"

namespace exptrack::cli {

// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kPropertyFailure = 1,
  kConfigError = 2,
  kDivergence = 3,
  kCertificateInvalid = 4,
  kInsufficientData = 5,
};

// Maps a library exception to its exit code and prints the message.
inline int report_error(std::ostream& err, const std::exception& e) {
  err << "error: " << e.what() << '\n';
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ContractViolation*>(&e) ||
      dynamic_cast<const InputError*>(&e) || dynamic_cast<const GainValidationError*>(&e) ||
      dynamic_cast<const SpecValidationError*>(&e)) {
    return kConfigError;
  }
  if (dynamic_cast<const CertificateValidityError*>(&e)) return kCertificateInvalid;
  if (dynamic_cast<const InsufficientDataError*>(&e)) return kInsufficientData;
  return kDivergence;  // divergence, definiteness failures and anything else raised mid-run
}

inline RateWindow parse_window(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError("--window must look like t0:t1");
  try {
    std::size_t u0 = 0, u1 = 0;
    const std::string a = text.substr(0, colon), b = text.substr(colon + 1);
    RateWindow w{std::stod(a, &u0), std::stod(b, &u1)};
    if (u0 != a.size() || u1 != b.size()) throw std::invalid_argument(text);
    if (!(w.t0 < w.t1)) throw ConfigError("--window needs t0 < t1");
    return w;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("--window must look like t0:t1, got '" + text + "'");
  }
}

inline std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  for (const auto& cell : split(text, ',')) {
    if (cell.empty()) throw ConfigError("--values has an empty entry");
    try {
      std::size_t used = 0;
      const double v = std::stod(cell, &used);
      if (used != cell.size() || !std::isfinite(v)) throw std::invalid_argument(cell);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("--values: cannot parse '" + cell + "'");
    }
  }
  if (out.empty()) throw ConfigError("--values is empty");
  return out;
}

namespace detail {

inline void write_text(const std::string& path, const std::string& body, std::ostream& fallback) {
  if (path.empty() || path == "-") {
    fallback << body;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << body;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// simulate

// Runs the configured loop and writes the trajectory CSV to `out_path`
// (falls back to output.path, then to `out`).
inline int cmd_simulate(const std::string& config_path, const std::string& out_path,
                        std::ostream& out, std::ostream& err) {
  try {
    const ExperimentConfig cfg = load_experiment(config_path);
    const TrajectoryLog log = simulate(cfg.sim);
    std::ostringstream csv;
    write_csv(csv, log, cfg.precision);
    detail::write_text(out_path.empty() ? cfg.output_path : out_path, csv.str(), out);
    return kOk;
  } catch (const std::exception& e) {
    return report_error(err, e);
  }
}

// ---------------------------------------------------------------------------
// verify

struct PropertyResult {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string detail;
};

struct VerifyTolerances {
  double skew = 1e-10;
  double symmetry = 1e-12;
  double finite_difference = 1e-6;
  double linearity = 1e-10;
  double energy = 1e-6;
  double decay = 1e-6;
  double self_consistency = 1e-12;
};

namespace detail {

inline nlohmann::json to_json(const PropertyResult& p) {
  return {{"name", p.name},
          {"measured", p.measured},
          {"tolerance", p.tolerance},
          {"pass", p.pass},
          {"detail", p.detail}};
}

inline PropertyResult make_result(std::string name, double measured, double tol, std::string detail) {
  return {std::move(name), measured, tol, measured <= tol, std::move(detail)};
}

struct Sampler {
  std::mt19937_64 rng;
  explicit Sampler(std::uint64_t seed) : rng(seed) {}

  Vector uniform(Eigen::Index n, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = d(rng);
    return v;
  }
};

// Runs a property, turning a thrown library error into a failed result.
inline PropertyResult guarded(const std::string& name, double tol,
                              const std::function<PropertyResult()>& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    return {name, std::numeric_limits<double>::infinity(), tol, false,
            std::string("raised: ") + e.what()};
  }
}

inline double decay_error_or_zero_run(const TrajectoryLog& log, Certificate which, double t_max,
                                      std::string& note) {
  const double v0 = certificate_value(log.samples.front(), which);
  if (v0 == 0.0) {
    double worst = 0.0;
    for (const auto& s : log.samples) worst = std::max(worst, std::abs(certificate_value(s, which)));
    note = "zero initial value; measured is max |value| along the run";
    return worst;
  }
  return max_relative_decay_error(log, which, 2.0, t_max);
}

}  // namespace detail

struct VerifyReport {
  std::vector<PropertyResult> properties;
  nlohmann::json informational = nlohmann::json::array();
  bool all_pass() const {
    return std::all_of(properties.begin(), properties.end(), [](const auto& p) { return p.pass; });
  }
  nlohmann::json to_json() const {
    nlohmann::json props = nlohmann::json::array();
    for (const auto& p : properties) props.push_back(detail::to_json(p));
    return {{"properties", props}, {"informational", informational}, {"all_pass", all_pass()}};
  }
};

// Structural and decay properties of the configured experiment. Decay
// identities are checked with friction removed from the plant.
inline VerifyReport run_verification(const ExperimentConfig& cfg, const VerifyTolerances& tol = {}) {
  const RobotModel& model = cfg.sim.model;
  const RobotModel frictionless = model.with_friction(FrictionConfig::zero());
  const Eigen::Index n = model.dof();
  VerifyReport report;
  detail::Sampler sampler(cfg.sim.seed);

  constexpr int kStructuralSamples = 1000;
  constexpr int kOracleSamples = 100;

  report.properties.push_back(detail::guarded("mass_matrix_spd", tol.symmetry, [&] {
    double worst = 0.0;
    for (int i = 0; i < kStructuralSamples; ++i) {
      const Vector q = sampler.uniform(n, -M_PI, M_PI);
      const Matrix m = model.inertial().mass_matrix(q);
      worst = std::max(worst, max_abs(m - m.transpose()));
      factor_mass_matrix(m);
    }
    return detail::make_result("mass_matrix_spd", worst, tol.symmetry,
                               "max |M - M^T| over 1000 seeded q; Cholesky succeeded at each");
  }));

  report.properties.push_back(detail::guarded("skew_symmetry", tol.skew, [&] {
    double worst = 0.0;
    for (int i = 0; i < kStructuralSamples; ++i) {
      const Vector q = sampler.uniform(n, -M_PI, M_PI);
      const Vector qdot = sampler.uniform(n, -3.0, 3.0);
      worst = std::max(worst, check_skew_symmetry(model, q, qdot));
    }
    return detail::make_result("skew_symmetry", worst, tol.skew,
                               "max |S + S^T|, S = Mdot - 2C, over 1000 seeded (q, qdot)");
  }));

  report.properties.push_back(detail::guarded("mdot_equals_c_plus_ct", tol.skew, [&] {
    double worst = 0.0;
    for (int i = 0; i < kStructuralSamples; ++i) {
      const Vector q = sampler.uniform(n, -M_PI, M_PI);
      const Vector qdot = sampler.uniform(n, -3.0, 3.0);
      worst = std::max(worst, max_abs(mass_matrix_rate(model, q, qdot) -
                                       mass_matrix_directional_rate(model, q, qdot)));
    }
    return detail::make_result("mdot_equals_c_plus_ct", worst, tol.skew,
                               "max |(C + C^T) - sum_k dM/dq_k qdot_k|");
  }));

  report.properties.push_back(detail::guarded("mdot_finite_difference", tol.finite_difference, [&] {
    constexpr double h = 1e-5;
    double worst = 0.0;
    for (int i = 0; i < kOracleSamples; ++i) {
      const Vector q = sampler.uniform(n, -M_PI, M_PI);
      const Vector qdot = sampler.uniform(n, -3.0, 3.0);
      const Matrix fd = (model.inertial().mass_matrix(q + h * qdot) -
                         model.inertial().mass_matrix(q - h * qdot)) / (2.0 * h);
      worst = std::max(worst, max_abs(mass_matrix_rate(model, q, qdot) - fd));
    }
    return detail::make_result("mdot_finite_difference", worst, tol.finite_difference,
                               "C + C^T against a directional central difference of M, h = 1e-5");
  }));

  report.properties.push_back(detail::guarded("gravity_finite_difference", tol.finite_difference, [&] {
    constexpr double h = 1e-6;
    double worst = 0.0;
    for (int i = 0; i < kOracleSamples; ++i) {
      const Vector q = sampler.uniform(n, -M_PI, M_PI);
      const Vector g = gravity_vector(model, q);
      for (Eigen::Index k = 0; k < n; ++k) {
        Vector qp = q, qm = q;
        qp[k] += h;
        qm[k] -= h;
        const double fd = (potential_energy(model, qp) - potential_energy(model, qm)) / (2.0 * h);
        worst = std::max(worst, std::abs(g[k] - fd));
      }
    }
    return detail::make_result("gravity_finite_difference", worst, tol.finite_difference,
                               "G against a central difference of the potential energy, h = 1e-6");
  }));

  report.properties.push_back(detail::guarded("coriolis_linear_in_velocity", tol.linearity, [&] {
    double worst = 0.0;
    for (int i = 0; i < kOracleSamples; ++i) {
      const Vector q = sampler.uniform(n, -M_PI, M_PI);
      const Vector qdot = sampler.uniform(n, -3.0, 3.0);
      const double alpha = sampler.uniform(1, -4.0, 4.0)[0];
      const Matrix c = coriolis_matrix(model, q, qdot);
      const Matrix ca = coriolis_matrix(model, q, alpha * qdot);
      worst = std::max(worst, max_abs(ca - alpha * c) / std::max(1.0, max_abs(ca)));
    }
    return detail::make_result("coriolis_linear_in_velocity", worst, tol.linearity,
                               "max |C(q, a qdot) - a C(q, qdot)| / max(1, |C(q, a qdot)|)");
  }));

  report.properties.push_back(detail::guarded("energy_conservation", tol.energy, [&] {
    SimConfig sim{frictionless, cfg.sim.gains, cfg.sim.reference, cfg.sim.initial_state,
                  LoopKind::OpenLoopPassive, 1e-3, 10.0, cfg.sim.seed};
    const TrajectoryLog log = open_loop_passive(sim);
    const double e0 = log.samples.front().energy;
    double scale = std::abs(e0), worst = 0.0;
    for (const auto& s : log.samples) scale = std::max(scale, s.energy - potential_energy(model, s.q));
    if (scale == 0.0) scale = 1.0;
    for (const auto& s : log.samples) worst = std::max(worst, std::abs(s.energy - e0) / scale);
    return detail::make_result("energy_conservation", worst, tol.energy,
                               "tau = 0, F = 0, 10 s at dt = 1e-3 from the configured initial state; "
                               "drift relative to max(|E0|, peak kinetic energy)");
  }));

  const double horizon = std::min(cfg.sim.t_final, 5.0);

  report.properties.push_back(detail::guarded("kinematic_v1_decay", tol.decay, [&] {
    SimConfig sim{frictionless, cfg.sim.gains, cfg.sim.reference, cfg.sim.initial_state,
                  LoopKind::Kinematic, cfg.sim.dt, cfg.sim.t_final, cfg.sim.seed};
    const TrajectoryLog log = kinematic_loop(sim);
    std::string note = "max relative error of V1(t) against V1(0) exp(-2t), t <= 5";
    const double err = detail::decay_error_or_zero_run(log, Certificate::V1, horizon, note);
    return detail::make_result("kinematic_v1_decay", err, tol.decay, note);
  }));

  TrajectoryLog closed;
  report.properties.push_back(detail::guarded("closed_loop_w_decay", tol.decay, [&] {
    SimConfig sim{frictionless, cfg.sim.gains, cfg.sim.reference, cfg.sim.initial_state,
                  LoopKind::ClosedLoop, cfg.sim.dt, cfg.sim.t_final, cfg.sim.seed};
    closed = closed_loop(sim);
    std::string note = "max relative error of W(t) against W(0) exp(-2t), W = 1/2 q_r' M q_r, t <= 5";
    const double err = detail::decay_error_or_zero_run(closed, Certificate::W, horizon, note);
    return detail::make_result("closed_loop_w_decay", err, tol.decay, note);
  }));

  report.properties.push_back(detail::guarded("log_self_consistency", tol.self_consistency, [&] {
    if (closed.samples.empty()) throw InsufficientDataError("closed-loop run did not complete");
    double worst = 0.0;
    for (const auto& s : closed.samples) {
      const Reference ref = reference_at(cfg.sim.reference, s.t, n);
      const Vector tau = control_torque(frictionless, JointState(s.q, s.qdot), ref, cfg.sim.gains).tau;
      const Vector qr = filtered_error(s.q_tilde, s.q_tilde_dot, cfg.sim.gains.lambda());
      worst = std::max(worst, (tau - s.tau).cwiseAbs().maxCoeff());
      worst = std::max(worst, (qr - s.q_r).cwiseAbs().maxCoeff());
    }
    return detail::make_result("log_self_consistency", worst, tol.self_consistency,
                               "logged tau and q_r against recomputation from the logged state");
  }));

  if (!closed.samples.empty()) {
    const auto ratio = composite_decay_ratio(closed);
    nlohmann::json t_json = nlohmann::json::array(), r_json = nlohmann::json::array();
    double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0;
    std::size_t count = 0;
    const std::size_t stride = std::max<std::size_t>(1, closed.size() / 500);
    for (std::size_t i = 0; i < ratio.size(); ++i) {
      if (std::isfinite(ratio[i])) {
        lo = std::min(lo, ratio[i]);
        hi = std::max(hi, ratio[i]);
        sum += ratio[i];
        ++count;
      }
      if (i % stride == 0 || i + 1 == ratio.size()) {
        t_json.push_back(closed.samples[i].t);
        r_json.push_back(std::isfinite(ratio[i]) ? nlohmann::json(ratio[i]) : nlohmann::json(nullptr));
      }
    }
    nlohmann::json summary = {{"finite_samples", count}};
    if (count > 0) summary.update({{"min", lo}, {"max", hi}, {"mean", sum / static_cast<double>(count)}});
    report.informational.push_back(
        {{"name", "composite_vdot_over_v"},
         {"informational", true},
         {"description",
          "measured dV/dt / V of V = V1 + 1/2 q_r' P M q_r along the closed loop; "
          "not asserted against -2"},
         {"summary", summary},
         {"t", t_json},
         {"ratio", r_json}});
  }
  return report;
}

inline int cmd_verify(const std::string& config_path, const std::string& out_path, std::ostream& out,
                      std::ostream& err) {
  try {
    const ExperimentConfig cfg = load_experiment(config_path);
    const VerifyReport report = run_verification(cfg);
    nlohmann::json body = report.to_json();
    body["config"] = config_path;
    detail::write_text(out_path, body.dump(2) + "\n", out);
    for (const auto& p : report.properties) {
      if (!p.pass) err << "FAIL " << p.name << ": measured " << p.measured << " > " << p.tolerance << '\n';
    }
    return report.all_pass() ? kOk : kPropertyFailure;
  } catch (const std::exception& e) {
    return report_error(err, e);
  }
}

// ---------------------------------------------------------------------------
// sweep

struct SweepRow {
  double value = 0.0;
  std::string status = "ok";
  double rate_qtilde = std::numeric_limits<double>::quiet_NaN();
  double r2_qtilde = std::numeric_limits<double>::quiet_NaN();
  double rate_w = std::numeric_limits<double>::quiet_NaN();
  double r2_w = std::numeric_limits<double>::quiet_NaN();
  double terminal_qtilde = std::numeric_limits<double>::quiet_NaN();
  double terminal_qr = std::numeric_limits<double>::quiet_NaN();
  std::string message;
};

inline SimConfig sweep_variant(const SimConfig& base, const std::string& param, double value) {
  SimConfig sim = base;
  sim.loop = LoopKind::ClosedLoop;
  if (param == "lambda") {
    sim.gains = base.gains.is_scalar() ? Gains::scalar(value, *base.gains.p_scalar())
                                       : Gains::with_matrix(value, base.gains.p_matrix(base.model.dof()));
  } else if (param == "p_scalar") {
    sim.gains = Gains::scalar(base.gains.lambda(), value);
  } else if (param == "dt") {
    sim.dt = value;
  } else {
    throw ConfigError("--param must be one of lambda, p_scalar, dt (got '" + param + "')");
  }
  return sim;
}

inline SweepRow run_sweep_point(const SimConfig& base, const std::string& param, double value,
                                RateWindow window) {
  SweepRow row;
  row.value = value;
  try {
    const SimConfig sim = sweep_variant(base, param, value);
    sim.validate();
    const TrajectoryLog log = closed_loop(sim);
    const auto t = log.times();
    const RateWindow w{window.t0, std::min(window.t1, t.back())};
    const auto qn = log.series([](const LogSample& s) { return s.q_tilde.norm(); });
    const auto wv = certificate_series(log, Certificate::W);
    const RateEstimate eq = estimate_rate(t, qn, w);
    const RateEstimate ew = estimate_rate(t, wv, w);
    row.rate_qtilde = eq.rate;
    row.r2_qtilde = eq.r_squared;
    row.rate_w = ew.rate;
    row.r2_w = ew.r_squared;
    row.terminal_qtilde = log.samples.back().q_tilde.norm();
    row.terminal_qr = log.samples.back().q_r.norm();
  } catch (const std::exception& e) {
    row.status = "error";
    row.message = e.what();
    std::replace(row.message.begin(), row.message.end(), ',', ';');
  }
  return row;
}

// One closed-loop run per value, executed concurrently; rows come back sorted
// by value.
inline std::vector<SweepRow> run_sweep(const SimConfig& base, const std::string& param,
                                       std::vector<double> values, RateWindow window = {}) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  (void)sweep_variant(base, param, values.front());  // rejects unknown parameter names early
  std::stable_sort(values.begin(), values.end());
  std::vector<std::future<SweepRow>> jobs;
  jobs.reserve(values.size());
  for (double v : values) {
    jobs.push_back(std::async(std::launch::async, run_sweep_point, std::cref(base), param, v, window));
  }
  std::vector<SweepRow> rows;
  rows.reserve(values.size());
  for (auto& j : jobs) rows.push_back(j.get());
  return rows;
}

inline void write_sweep_csv(std::ostream& out, const std::string& param, const std::vector<SweepRow>& rows) {
  out << "value,param,status,rate_qtilde,r2_qtilde,rate_w,r2_w,terminal_qtilde_norm,terminal_qr_norm,message\n";
  for (const auto& r : rows) {
    out << format_double(r.value) << ',' << param << ',' << r.status << ',' << format_double(r.rate_qtilde)
        << ',' << format_double(r.r2_qtilde) << ',' << format_double(r.rate_w) << ','
        << format_double(r.r2_w) << ',' << format_double(r.terminal_qtilde) << ','
        << format_double(r.terminal_qr) << ',' << r.message << '\n';
  }
}

inline int cmd_sweep(const std::string& config_path, const std::string& param,
                     const std::string& values_text, const std::string& window_text,
                     const std::string& out_path, std::ostream& out, std::ostream& err) {
  try {
    const ExperimentConfig cfg = load_experiment(config_path);
    const auto values = parse_values(values_text);
    const RateWindow window = window_text.empty() ? RateWindow{} : parse_window(window_text);
    const auto rows = run_sweep(cfg.sim, param, values, window);
    std::ostringstream csv;
    write_sweep_csv(csv, param, rows);
    detail::write_text(out_path, csv.str(), out);
    bool any_ok = false;
    for (const auto& r : rows) {
      if (r.status == "ok") any_ok = true;
      else err << "run " << param << "=" << r.value << " failed: " << r.message << '\n';
    }
    return any_ok ? kOk : kDivergence;
  } catch (const std::exception& e) {
    return report_error(err, e);
  }
}

// ---------------------------------------------------------------------------
// rate

inline int cmd_rate(const std::string& csv_path, const std::string& column,
                    const std::string& window_text, std::ostream& out, std::ostream& err) {
  try {
    std::ifstream in(csv_path);
    if (!in) throw ConfigError("cannot read CSV '" + csv_path + "'");
    const CsvTable table = read_csv(in);
    const auto t_idx = table.index_of("t");
    if (!t_idx) throw ConfigError("CSV has no 't' column");
    const auto c_idx = table.index_of(column);
    if (!c_idx) throw ConfigError("CSV has no column '" + column + "'");
    const RateWindow window = window_text.empty() ? RateWindow{} : parse_window(window_text);
    const auto t = table.column(*t_idx);
    const auto v = table.column(*c_idx);
    const RateEstimate est = estimate_rate(t, v, window);
    const nlohmann::json j = {{"column", column},
                              {"rate", est.rate},
                              {"r_squared", est.r_squared},
                              {"window", {est.t_start, est.t_end}},
                              {"n_points", est.n_points}};
    out << j.dump() << '\n';
    return kOk;
  } catch (const std::exception& e) {
    return report_error(err, e);
  }
}

}  // namespace exptrack::cli
