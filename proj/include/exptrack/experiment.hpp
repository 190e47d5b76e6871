#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "exptrack/dynamics.hpp"
#include "exptrack/errors.hpp"
#include "exptrack/log.hpp"
#include "exptrack/simulate.hpp"
#include "exptrack/tracking.hpp"
#include "exptrack/trajgen.hpp"

namespace exptrack {

// Parsed experiment file: model, gains, reference, sim and output blocks.
struct ExperimentConfig {
  SimConfig sim;
  std::string output_path;  // empty: caller decides
  int precision = 17;
};

namespace config_detail {

using nlohmann::json;

inline void reject_unknown(const json& obj, const std::string& where,
                           std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> names(allowed.begin(), allowed.end());
  for (const auto& item : obj.items()) {
    if (!names.count(item.key())) {
      throw ConfigError("unknown key '" + (where.empty() ? "" : where + ".") + item.key() + "'");
    }
  }
}

inline const json& require(const json& obj, const std::string& where, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError("missing key '" + where + "." + key + "'");
  return *it;
}

inline double number(const json& v, const std::string& field) {
  if (!v.is_number()) throw ConfigError(field + ": expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(field + ": must be finite");
  return x;
}

inline double number_or(const json& obj, const char* key, const std::string& where, double dflt) {
  auto it = obj.find(key);
  return it == obj.end() ? dflt : number(*it, where + "." + key);
}

inline std::string text(const json& v, const std::string& field) {
  if (!v.is_string()) throw ConfigError(field + ": expected a string");
  return v.get<std::string>();
}

inline Vector vector(const json& v, const std::string& field) {
  if (!v.is_array()) throw ConfigError(field + ": expected an array of numbers");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = number(v[i], field + "[" + std::to_string(i) + "]");
  }
  return out;
}

inline Matrix matrix(const json& v, const std::string& field) {
  if (!v.is_array() || v.empty()) throw ConfigError(field + ": expected an array of rows");
  const auto rows = static_cast<Eigen::Index>(v.size());
  Matrix out(rows, rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Vector row = vector(v[static_cast<std::size_t>(i)], field + "[" + std::to_string(i) + "]");
    if (row.size() != rows) throw ConfigError(field + ": must be square");
    out.row(i) = row.transpose();
  }
  return out;
}

inline double positive(double x, const std::string& field) {
  if (!(x > 0.0)) throw ConfigError(field + " must be > 0");
  return x;
}

inline FrictionConfig parse_friction(const json& f) {
  reject_unknown(f, "model.friction", {"kind", "coefficient", "epsilon"});
  const std::string kind = text(require(f, "model.friction", "kind"), "model.friction.kind");
  FrictionConfig out;
  if (kind == "zero") {
    out = FrictionConfig::zero();
  } else if (kind == "viscous") {
    out = FrictionConfig::viscous(number(require(f, "model.friction", "coefficient"),
                                         "model.friction.coefficient"));
  } else if (kind == "smooth_coulomb") {
    out = FrictionConfig::smooth_coulomb(
        number(require(f, "model.friction", "coefficient"), "model.friction.coefficient"),
        number_or(f, "epsilon", "model.friction", 1e-3));
  } else {
    throw ConfigError("model.friction.kind: unknown friction kind '" + kind + "'");
  }
  if (out.coefficient < 0.0) throw ConfigError("model.friction.coefficient must be >= 0");
  if (!(out.epsilon > 0.0)) throw ConfigError("model.friction.epsilon must be > 0");
  return out;
}

inline RobotModel parse_model(const json& m) {
  reject_unknown(m, "model", {"kind", "parameters", "friction", "coriolis_scale"});
  const std::string kind = text(require(m, "model", "kind"), "model.kind");
  const json& p = require(m, "model", "parameters");
  const FrictionConfig friction =
      m.contains("friction") ? parse_friction(m.at("friction")) : FrictionConfig::zero();

  auto param = [&p](const char* key) {
    return positive(number(require(p, "model.parameters", key), std::string("model.parameters.") + key),
                    std::string("model.parameters.") + key);
  };

  std::optional<RobotModel> model;
  if (kind == "pendulum") {
    reject_unknown(p, "model.parameters", {"m", "l", "g"});
    model = RobotModel::pendulum(param("m"), param("l"), number_or(p, "g", "model.parameters", 9.81),
                                 friction);
  } else if (kind == "two_link") {
    reject_unknown(p, "model.parameters", {"m1", "m2", "l1", "l2", "g"});
    model = RobotModel::two_link(param("m1"), param("m2"), param("l1"), param("l2"),
                                 number_or(p, "g", "model.parameters", 9.81), friction);
  } else {
    throw ConfigError("model.kind: unknown model kind '" + kind +
                      "' (file configs support pendulum and two_link)");
  }
  if (m.contains("coriolis_scale")) {
    model = model->with_coriolis_scale(number(m.at("coriolis_scale"), "model.coriolis_scale"));
  }
  return *model;
}

inline Gains parse_gains(const json& g) {
  reject_unknown(g, "gains", {"lambda", "p_scalar", "P"});
  const double lambda = number(require(g, "gains", "lambda"), "gains.lambda");
  if (!(lambda > 0.0)) throw ConfigError("gains.lambda must be > 0, got " + std::to_string(lambda));
  if (g.contains("p_scalar") && g.contains("P")) {
    throw ConfigError("gains: give either p_scalar or P, not both");
  }
  try {
    if (g.contains("P")) return Gains::with_matrix(lambda, matrix(g.at("P"), "gains.P"));
    return Gains::scalar(lambda, g.contains("p_scalar") ? number(g.at("p_scalar"), "gains.p_scalar") : 1.0);
  } catch (const GainValidationError& e) {
    throw ConfigError(std::string("gains: ") + e.what());
  }
}

inline ReferenceSpec parse_reference(const json& r, Eigen::Index n) {
  const std::string kind = text(require(r, "reference", "kind"), "reference.kind");
  ReferenceSpec spec;
  auto vec = [&r](const char* key) { return vector(require(r, "reference", key), std::string("reference.") + key); };
  if (kind == "setpoint") {
    reject_unknown(r, "reference", {"kind", "setpoint"});
    spec = ReferenceSpec::make_setpoint(vec("setpoint"));
  } else if (kind == "sinusoid") {
    reject_unknown(r, "reference", {"kind", "amplitude", "frequency", "phase", "offset"});
    spec = ReferenceSpec::make_sinusoid(vec("amplitude"), vec("frequency"), vec("phase"), vec("offset"));
  } else if (kind == "poly5") {
    reject_unknown(r, "reference", {"kind", "start", "end", "duration"});
    spec = ReferenceSpec::make_poly5(vec("start"), vec("end"),
                                     number(require(r, "reference", "duration"), "reference.duration"));
  } else {
    throw ConfigError("reference.kind: unknown reference kind '" + kind + "'");
  }
  try {
    spec.validate(n);
  } catch (const SpecValidationError& e) {
    throw ConfigError(e.what());
  }
  return spec;
}

inline LoopKind parse_loop(const std::string& s) {
  if (s == "kinematic") return LoopKind::Kinematic;
  if (s == "closed_loop") return LoopKind::ClosedLoop;
  if (s == "open_loop_passive") return LoopKind::OpenLoopPassive;
  throw ConfigError("sim.loop_kind: unknown loop kind '" + s + "'");
}

}  // namespace config_detail

namespace config_detail {

inline ExperimentConfig parse_experiment_unchecked(const nlohmann::json& root) {
  reject_unknown(root, "", {"model", "gains", "reference", "sim", "output"});
  for (const char* block : {"model", "gains", "reference", "sim"}) {
    if (!root.contains(block)) throw ConfigError(std::string("missing block '") + block + "'");
  }

  RobotModel model = parse_model(root.at("model"));
  const Eigen::Index n = model.dof();
  Gains gains = parse_gains(root.at("gains"));
  if (!gains.is_scalar() && gains.p_matrix_rows() != n) {
    throw ConfigError("gains.P must be " + std::to_string(n) + "x" + std::to_string(n));
  }
  ReferenceSpec reference = parse_reference(root.at("reference"), n);

  const json& s = root.at("sim");
  reject_unknown(s, "sim", {"dt", "t_final", "initial_state", "loop_kind", "seed"});
  const json& init = require(s, "sim", "initial_state");
  reject_unknown(init, "sim.initial_state", {"q", "qdot"});
  const Vector q0 = vector(require(init, "sim.initial_state", "q"), "sim.initial_state.q");
  const Vector qdot0 = init.contains("qdot") ? vector(init.at("qdot"), "sim.initial_state.qdot")
                                             : Vector::Zero(q0.size());
  if (q0.size() != n) throw ConfigError("sim.initial_state.q must have length " + std::to_string(n));
  if (qdot0.size() != n) {
    throw ConfigError("sim.initial_state.qdot must have length " + std::to_string(n));
  }

  std::uint64_t seed = 0;
  if (s.contains("seed")) {
    if (!s.at("seed").is_number_unsigned()) throw ConfigError("sim.seed: expected a non-negative integer");
    seed = s.at("seed").get<std::uint64_t>();
  }

  ExperimentConfig cfg{SimConfig{model, gains, reference, JointState(q0, qdot0),
                                 parse_loop(text(require(s, "sim", "loop_kind"), "sim.loop_kind")),
                                 number(require(s, "sim", "dt"), "sim.dt"),
                                 number(require(s, "sim", "t_final"), "sim.t_final"), seed},
                       "", 17};
  cfg.sim.validate();

  if (root.contains("output")) {
    const json& o = root.at("output");
    reject_unknown(o, "output", {"path", "precision"});
    if (o.contains("path")) cfg.output_path = text(o.at("path"), "output.path");
    if (o.contains("precision")) {
      if (!o.at("precision").is_number_integer()) throw ConfigError("output.precision: expected an integer");
      cfg.precision = o.at("precision").get<int>();
      if (cfg.precision < 1 || cfg.precision > 17) throw ConfigError("output.precision must be in [1, 17]");
    }
  }
  return cfg;
}

}  // namespace config_detail

// Strict parse: unknown keys, missing blocks and invalid values all raise
// ConfigError naming the offending field.
inline ExperimentConfig parse_experiment(const nlohmann::json& root) {
  try {
    return config_detail::parse_experiment_unchecked(root);
  } catch (const ConfigError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(e.what());
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  } catch (const GainValidationError& e) {
    throw ConfigError(e.what());
  } catch (const SpecValidationError& e) {
    throw ConfigError(e.what());
  }
}

inline ExperimentConfig parse_experiment_text(const std::string& text) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_experiment(root);
}

inline ExperimentConfig load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_experiment_text(buf.str());
}

// ---------------------------------------------------------------------------
// CSV

inline std::string format_double(double v, int precision = 17) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

inline std::vector<std::string> csv_header(Eigen::Index n) {
  std::vector<std::string> cols{"t"};
  for (const char* prefix : {"q_", "qdot_", "qd_", "qtilde_", "qr_", "tau_"}) {
    for (Eigen::Index i = 0; i < n; ++i) cols.push_back(prefix + std::to_string(i));
  }
  for (const char* c : {"v1", "q_cert", "v_total", "w"}) cols.emplace_back(c);
  return cols;
}

inline void write_csv(std::ostream& out, const TrajectoryLog& log, int precision = 17) {
  const Eigen::Index n = log.header.dof;
  const auto header = csv_header(n);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& s : log.samples) {
    out << format_double(s.t, precision);
    for (const Vector* v : {&s.q, &s.qdot, &s.q_d, &s.q_tilde, &s.q_r, &s.tau}) {
      for (Eigen::Index i = 0; i < n; ++i) out << ',' << format_double((*v)[i], precision);
    }
    for (double c : {s.v1, s.q_cert, s.v_total, s.w}) out << ',' << format_double(c, precision);
    out << '\n';
  }
}

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::optional<std::size_t> index_of(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == name) return i;
    }
    return std::nullopt;
  }

  std::vector<double> column(std::size_t idx) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.at(idx));
    return out;
  }
};

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw InputError("CSV is empty");
  table.columns = split(line, ',');
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != table.columns.size()) {
      throw InputError("CSV line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                       " cells, header has " + std::to_string(table.columns.size()));
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(c, &used));
        if (used != c.size()) throw std::invalid_argument(c);
      } catch (const std::exception&) {
        throw InputError("CSV line " + std::to_string(lineno) + ": cannot parse '" + c + "'");
      }
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace exptrack
