#pragma once

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "embctl/errors.hpp"
#include "embctl/linalg.hpp"

namespace embctl::sim {

// Flat key-value config with [section] headers. Values: number, number list,
// quoted string, bool.
using ConfigValue = std::variant<double, std::vector<double>, std::string, bool>;

struct ConfigDoc {
  // section -> key -> value; section order preserved for serialization
  std::vector<std::string> section_order;
  std::map<std::string, std::map<std::string, ConfigValue>> sections;
  std::map<std::string, std::vector<std::string>> key_order;

  bool has(const std::string& sec, const std::string& key) const {
    auto it = sections.find(sec);
    return it != sections.end() && it->second.count(key) > 0;
  }

  const ConfigValue& get(const std::string& sec, const std::string& key) const {
    auto it = sections.find(sec);
    if (it == sections.end() || !it->second.count(key)) {
      throw ConfigError("missing config key [" + sec + "] " + key);
    }
    return it->second.at(key);
  }

  double number(const std::string& sec, const std::string& key) const {
    const auto& v = get(sec, key);
    if (!std::holds_alternative<double>(v)) {
      throw ConfigError("[" + sec + "] " + key + ": expected a number");
    }
    return std::get<double>(v);
  }

  double number_or(const std::string& sec, const std::string& key, double dflt) const {
    return has(sec, key) ? number(sec, key) : dflt;
  }

  std::vector<double> list(const std::string& sec, const std::string& key) const {
    const auto& v = get(sec, key);
    if (!std::holds_alternative<std::vector<double>>(v)) {
      throw ConfigError("[" + sec + "] " + key + ": expected a list");
    }
    return std::get<std::vector<double>>(v);
  }

  std::string str(const std::string& sec, const std::string& key) const {
    const auto& v = get(sec, key);
    if (!std::holds_alternative<std::string>(v)) {
      throw ConfigError("[" + sec + "] " + key + ": expected a string");
    }
    return std::get<std::string>(v);
  }

  bool boolean_or(const std::string& sec, const std::string& key, bool dflt) const {
    if (!has(sec, key)) return dflt;
    const auto& v = get(sec, key);
    if (!std::holds_alternative<bool>(v)) {
      throw ConfigError("[" + sec + "] " + key + ": expected true/false");
    }
    return std::get<bool>(v);
  }

  void set(const std::string& sec, const std::string& key, ConfigValue v) {
    if (!sections.count(sec)) section_order.push_back(sec);
    if (!sections[sec].count(key)) key_order[sec].push_back(key);
    sections[sec][key] = std::move(v);
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline double parse_number(const std::string& tok, int line_no) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(line_no) + ": bad number '" + tok + "'");
  }
}

inline ConfigValue parse_value(const std::string& raw, int line_no) {
  const std::string v = trim(raw);
  if (v.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty value");
  if (v == "true") return true;
  if (v == "false") return false;
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') {
      throw ConfigError("line " + std::to_string(line_no) + ": unterminated string");
    }
    return v.substr(1, v.size() - 2);
  }
  if (v.front() == '[') {
    if (v.back() != ']') {
      throw ConfigError("line " + std::to_string(line_no) + ": unterminated list");
    }
    std::vector<double> out;
    std::string body = v.substr(1, v.size() - 2);
    std::stringstream ss(body);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      tok = trim(tok);
      if (!tok.empty()) out.push_back(parse_number(tok, line_no));
    }
    return out;
  }
  return parse_number(v, line_no);
}

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline ConfigDoc parse_config(std::istream& in) {
  ConfigDoc doc;
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("line " + std::to_string(line_no) + ": bad section header");
      }
      section = detail::trim(line.substr(1, line.size() - 2));
      if (!doc.sections.count(section)) {
        doc.section_order.push_back(section);
        doc.sections[section];
      }
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    if (key.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    }
    doc.set(section, key, detail::parse_value(line.substr(eq + 1), line_no));
  }
  return doc;
}

inline ConfigDoc parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return parse_config(in);
}

inline std::string serialize_config(const ConfigDoc& doc) {
  std::ostringstream out;
  for (const auto& sec : doc.section_order) {
    out << "[" << sec << "]\n";
    for (const auto& key : doc.key_order.count(sec) ? doc.key_order.at(sec)
                                                    : std::vector<std::string>{}) {
      out << key << " = ";
      const ConfigValue& v = doc.sections.at(sec).at(key);
      if (std::holds_alternative<double>(v)) {
        out << detail::format_number(std::get<double>(v));
      } else if (std::holds_alternative<std::vector<double>>(v)) {
        out << "[";
        const auto& l = std::get<std::vector<double>>(v);
        for (std::size_t i = 0; i < l.size(); ++i) {
          if (i) out << ", ";
          out << detail::format_number(l[i]);
        }
        out << "]";
      } else if (std::holds_alternative<std::string>(v)) {
        out << '"' << std::get<std::string>(v) << '"';
      } else {
        out << (std::get<bool>(v) ? "true" : "false");
      }
      out << "\n";
    }
    out << "\n";
  }
  return out.str();
}

enum class ObserverKind { Kalman, NonKalman, None };

/// Fully validated simulation scenario.
struct Scenario {
  Vec3 inertia_diag{3.0, 2.0, 1.0};
  Mat3 inertia_full = Mat3::Zero();  // optional full matrix; zero = use diag
  double k_e = 1.0;
  double k_P = 4.0;
  Mat3 K_D = 4.0 * Mat3::Identity();
  std::string reference_kind = "paper";        // paper | constant
  Vec3 constant_omega0 = Vec3::Zero();         // for reference_kind = constant
  Mat3 R_init = Mat3::Identity();
  Vec3 Omega_init = Vec3::Zero();
  ObserverKind observer = ObserverKind::Kalman;
  VecN z_o_init = VecN::Zero(6);
  double Q_scalar = 100.0;
  double Rt_scalar = 0.01;
  double P0_scalar = 100.0;
  Mat3 M1 = Mat3::Identity();
  Mat3 M2 = Mat3::Identity();
  double t0 = 0.0;
  double tf = 20.0;
  double h = 1e-3;
  bool abort_on_domain_exit = false;
};

namespace detail {

inline Vec3 vec3_of(const std::vector<double>& l, const std::string& what) {
  if (l.size() != 3) throw ConfigError(what + ": expected 3 entries");
  return {l[0], l[1], l[2]};
}

inline Mat3 mat3_of(const std::vector<double>& l, const std::string& what) {
  if (l.size() != 9) throw ConfigError(what + ": expected 9 entries (row-major)");
  Mat3 m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = l[3 * i + j];
  return m;
}

}  // namespace detail

inline Scenario scenario_from_config(const ConfigDoc& doc) {
  Scenario sc;
  if (doc.has("inertia", "diag")) {
    sc.inertia_diag = detail::vec3_of(doc.list("inertia", "diag"), "inertia.diag");
  }
  if (doc.has("inertia", "matrix")) {
    sc.inertia_full = detail::mat3_of(doc.list("inertia", "matrix"), "inertia.matrix");
  }
  sc.k_e = doc.number_or("controller", "k_e", sc.k_e);
  sc.k_P = doc.number_or("controller", "k_P", sc.k_P);
  if (doc.has("controller", "K_D_scalar")) {
    sc.K_D = doc.number("controller", "K_D_scalar") * Mat3::Identity();
  } else if (doc.has("controller", "K_D")) {
    sc.K_D = detail::mat3_of(doc.list("controller", "K_D"), "controller.K_D");
  }
  if (doc.has("reference", "kind")) sc.reference_kind = doc.str("reference", "kind");
  if (sc.reference_kind == "constant") {
    sc.constant_omega0 =
        detail::vec3_of(doc.list("reference", "Omega0"), "reference.Omega0");
  } else if (sc.reference_kind != "paper") {
    throw ConfigError("reference.kind must be \"paper\" or \"constant\"");
  }
  if (doc.has("initial", "R")) {
    sc.R_init = detail::mat3_of(doc.list("initial", "R"), "initial.R");
  } else if (doc.has("initial", "R_axis")) {
    const Vec3 axis = detail::vec3_of(doc.list("initial", "R_axis"), "initial.R_axis");
    const double angle = doc.number("initial", "R_angle");
    sc.R_init = rodrigues_exp(axis.normalized(), angle);
  }
  if (doc.has("initial", "Omega")) {
    sc.Omega_init = detail::vec3_of(doc.list("initial", "Omega"), "initial.Omega");
  }
  if (doc.has("observer", "kind")) {
    const std::string k = doc.str("observer", "kind");
    if (k == "kalman") sc.observer = ObserverKind::Kalman;
    else if (k == "nonkalman") sc.observer = ObserverKind::NonKalman;
    else if (k == "none") sc.observer = ObserverKind::None;
    else throw ConfigError("observer.kind must be kalman, nonkalman, or none");
  }
  if (doc.has("observer", "z0")) {
    const auto l = doc.list("observer", "z0");
    if (l.size() != 6) throw ConfigError("observer.z0: expected 6 entries");
    for (int i = 0; i < 6; ++i) sc.z_o_init[i] = l[i];
  }
  sc.Q_scalar = doc.number_or("observer", "Q_scalar", sc.Q_scalar);
  sc.Rt_scalar = doc.number_or("observer", "Rt_scalar", sc.Rt_scalar);
  sc.P0_scalar = doc.number_or("observer", "P0_scalar", sc.P0_scalar);
  if (doc.has("observer", "M1_scalar")) {
    sc.M1 = doc.number("observer", "M1_scalar") * Mat3::Identity();
  } else if (doc.has("observer", "M1")) {
    sc.M1 = detail::mat3_of(doc.list("observer", "M1"), "observer.M1");
  }
  if (doc.has("observer", "M2_scalar")) {
    sc.M2 = doc.number("observer", "M2_scalar") * Mat3::Identity();
  } else if (doc.has("observer", "M2")) {
    sc.M2 = detail::mat3_of(doc.list("observer", "M2"), "observer.M2");
  }
  sc.t0 = doc.number_or("time", "t0", sc.t0);
  sc.tf = doc.number_or("time", "tf", sc.tf);
  sc.h = doc.number_or("time", "h", sc.h);
  sc.abort_on_domain_exit =
      doc.boolean_or("time", "abort_on_domain_exit", sc.abort_on_domain_exit);
  if (sc.tf <= sc.t0) throw ConfigError("time.tf must exceed time.t0");
  if (sc.h <= 0.0) throw ConfigError("time.h must be positive");
  if (sc.k_e <= 0.0 || sc.k_P <= 0.0) throw ConfigError("k_e, k_P must be positive");
  if (sc.Rt_scalar <= 0.0) throw ConfigError("observer.Rt_scalar must be positive");
  if (sc.Q_scalar < 0.0) throw ConfigError("observer.Q_scalar must be nonnegative");
  if (sc.P0_scalar <= 0.0) throw ConfigError("observer.P0_scalar must be positive");
  return sc;
}

/// The exact published simulation scenario.
inline Scenario paper_scenario() {
  Scenario sc;
  sc.R_init = rodrigues_exp(Vec3(0, 1, 0), 0.9 * M_PI);
  sc.Omega_init = Vec3(1, 1, 1);
  sc.z_o_init << 0, 0, 0, 1, 2, 1;
  return sc;
}

}  // namespace embctl::sim
