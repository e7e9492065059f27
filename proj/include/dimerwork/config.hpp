#pragma once

// Run configuration: physical parameters, protocol switches, tolerances, and
// the flat `key = value` config-file syntax shared by the CLI and tests.

#include "dimerwork/numerics.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <sstream>
#include <string>

namespace dimerwork {

/// How the protocol bias enters the Hamiltonian diagonal: the matrix builder
/// couples a bias delta_i to n_i/2, so "full" doubles the bare protocol bias
/// to realize a delta_i * n_i coupling, while "half" passes it unchanged.
/// Config/CLI tokens: "eq1" (full, default) and "eq5" (half).
enum class DeltaConvention { full, half };

/// Where the density that seeds the frozen-potential approximations comes
/// from: a self-consistent loop ("scf") or the exact thermal density of the
/// initial interacting Hamiltonian ("exact").
enum class DensitySource { scf, exact };

/// Exchange-correlation choice for the effective single-particle scheme.
enum class XcFunctional { none, plda, par };

/// Which dynamics generates the measured statistics.
enum class Protocol { exact, ni, ks_plda, ks_par };

struct DimerConfig {
  double j = 1.0;          ///< hopping energy; the reference energy unit (> 0)
  double u = 0.0;          ///< on-site interaction, same units as j (>= 0)
  double beta = 0.4;       ///< inverse temperature, units 1/j (> 0)
  double delta0 = 0.5;     ///< bias ramp start, units of j
  double delta_tau = 5.0;  ///< bias ramp end, units of j
  double tau = 1.0;        ///< protocol duration, units 1/j (>= 0)
  int n_steps = 0;         ///< time-grid steps; 0 = automatic choice

  DeltaConvention delta_convention = DeltaConvention::full;
  DensitySource density_source = DensitySource::scf;
  bool tpf_fixed_initial_state = false;  ///< freeze the self-consistent-propagation initial state

  double scf_tol = 1e-10;
  int scf_max_iter = 10000;
  double tpf_tol = 1e-6;
  int tpf_max_iter = 200;
  double work_merge_tol = 1e-9;   ///< work-atom merge tolerance, units of j
  double relerr_guard = 1e-6;     ///< |W_exact| floor for relative errors, units of j
};

inline void validate(const DimerConfig& c) {
  if (!(c.j > 0.0)) throw InvalidInputError("config: j must be > 0");
  if (!(c.u >= 0.0)) throw InvalidInputError("config: u must be >= 0");
  if (!(c.beta > 0.0)) throw InvalidInputError("config: beta must be > 0");
  if (!(c.tau >= 0.0)) throw InvalidInputError("config: tau must be >= 0");
  if (c.n_steps < 0) throw InvalidInputError("config: n_steps must be >= 0 (0 = auto)");
  if (!(c.scf_tol > 0.0) || !(c.tpf_tol > 0.0) || !(c.work_merge_tol > 0.0) ||
      !(c.relerr_guard > 0.0))
    throw InvalidInputError("config: tolerances must be > 0");
  if (c.scf_max_iter < 1 || c.tpf_max_iter < 1)
    throw InvalidInputError("config: iteration limits must be >= 1");
  if (!std::isfinite(c.j) || !std::isfinite(c.u) || !std::isfinite(c.beta) ||
      !std::isfinite(c.delta0) || !std::isfinite(c.delta_tau) || !std::isfinite(c.tau))
    throw InvalidInputError("config: parameters must be finite");
}

/// Effective time-grid size: explicit n_steps, else 200 steps per unit of
/// dimensionless duration tau (which is stored in units of 1/j) with a floor
/// of 2000.
inline int auto_steps(const DimerConfig& c) {
  if (c.n_steps > 0) return c.n_steps;
  return std::max(2000, static_cast<int>(std::ceil(200.0 * c.tau)));
}

/// Multiplier applied to the bare protocol bias before it reaches the
/// Hamiltonian builders.
inline double delta_scale(const DimerConfig& c) {
  return c.delta_convention == DeltaConvention::full ? 2.0 : 1.0;
}

// ---------------------------------------------------------------------------
// Token <-> enum maps
// ---------------------------------------------------------------------------

inline std::string to_token(DeltaConvention v) {
  return v == DeltaConvention::full ? "eq1" : "eq5";
}
inline std::string to_token(DensitySource v) {
  return v == DensitySource::scf ? "scf" : "exact";
}
inline std::string to_token(Protocol p) {
  switch (p) {
    case Protocol::exact: return "exact";
    case Protocol::ni: return "ni";
    case Protocol::ks_plda: return "ks-plda";
    case Protocol::ks_par: return "ks-par";
  }
  return "exact";
}

inline DeltaConvention delta_convention_from_token(const std::string& s) {
  if (s == "eq1") return DeltaConvention::full;
  if (s == "eq5") return DeltaConvention::half;
  throw InvalidInputError("unknown delta_convention token: " + s);
}
inline DensitySource density_source_from_token(const std::string& s) {
  if (s == "scf") return DensitySource::scf;
  if (s == "exact") return DensitySource::exact;
  throw InvalidInputError("unknown density_source token: " + s);
}
inline Protocol protocol_from_token(const std::string& s) {
  if (s == "exact") return Protocol::exact;
  if (s == "ni") return Protocol::ni;
  if (s == "ks-plda") return Protocol::ks_plda;
  if (s == "ks-par") return Protocol::ks_par;
  throw InvalidInputError("unknown protocol token: " + s);
}

/// The functional attached to a protocol (none for exact/ni).
inline XcFunctional xc_of(Protocol p) {
  switch (p) {
    case Protocol::ks_plda: return XcFunctional::plda;
    case Protocol::ks_par: return XcFunctional::par;
    default: return XcFunctional::none;
  }
}

// ---------------------------------------------------------------------------
// Flat `key = value` config files
// ---------------------------------------------------------------------------

using ConfigMap = std::map<std::string, std::string>;

inline std::string trim(const std::string& s) {
  auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

/// Parse `key = value` lines; '#' starts a comment; blank lines ignored.
inline ConfigMap parse_config(std::istream& in) {
  ConfigMap map;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw InvalidInputError("config line " + std::to_string(line_no) +
                              ": expected `key = value`");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty() || value.empty())
      throw InvalidInputError("config line " + std::to_string(line_no) +
                              ": empty key or value");
    map[key] = value;
  }
  return map;
}

inline ConfigMap parse_config(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw InvalidInputError("config key `" + key + "`: not a number: " + value);
  }
}

inline int parse_int(const std::string& key, const std::string& value) {
  int v = 0;
  const auto* first = value.data();
  const auto* last = value.data() + value.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last)
    throw InvalidInputError("config key `" + key + "`: not an integer: " + value);
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw InvalidInputError("config key `" + key + "`: not a boolean: " + value);
}

/// Apply the DimerConfig keys found in `map` to `c`, removing them from the
/// map.  Leftover keys are the caller's problem (sweep-level keys, or errors).
inline void apply_dimer_config(ConfigMap& map, DimerConfig& c) {
  auto take = [&map](const char* key) -> const std::string* {
    auto it = map.find(key);
    if (it == map.end()) return nullptr;
    return &it->second;
  };
  if (const auto* v = take("j")) c.j = parse_double("j", *v);
  if (const auto* v = take("u")) c.u = parse_double("u", *v);
  if (const auto* v = take("beta")) c.beta = parse_double("beta", *v);
  if (const auto* v = take("delta0")) c.delta0 = parse_double("delta0", *v);
  if (const auto* v = take("delta_tau")) c.delta_tau = parse_double("delta_tau", *v);
  if (const auto* v = take("tau")) c.tau = parse_double("tau", *v);
  if (const auto* v = take("n_steps")) c.n_steps = parse_int("n_steps", *v);
  if (const auto* v = take("delta_convention")) c.delta_convention = delta_convention_from_token(*v);
  if (const auto* v = take("density_source")) c.density_source = density_source_from_token(*v);
  if (const auto* v = take("tpf_fixed_initial_state"))
    c.tpf_fixed_initial_state = parse_bool("tpf_fixed_initial_state", *v);
  if (const auto* v = take("scf_tol")) c.scf_tol = parse_double("scf_tol", *v);
  if (const auto* v = take("scf_max_iter")) c.scf_max_iter = parse_int("scf_max_iter", *v);
  if (const auto* v = take("tpf_tol")) c.tpf_tol = parse_double("tpf_tol", *v);
  if (const auto* v = take("tpf_max_iter")) c.tpf_max_iter = parse_int("tpf_max_iter", *v);
  if (const auto* v = take("work_merge_tol")) c.work_merge_tol = parse_double("work_merge_tol", *v);
  if (const auto* v = take("relerr_guard")) c.relerr_guard = parse_double("relerr_guard", *v);
  static const char* keys[] = {"j", "u", "beta", "delta0", "delta_tau", "tau", "n_steps",
                               "delta_convention", "density_source", "tpf_fixed_initial_state",
                               "scf_tol", "scf_max_iter", "tpf_tol", "tpf_max_iter",
                               "work_merge_tol", "relerr_guard"};
  for (const char* k : keys) map.erase(k);
}

}  // namespace dimerwork
