#pragma once

// Parameter sweeps over (U, tau), relative-error grids, deterministic CSV and
// JSON emission, and the canned figure-style jobs exposed by the CLI.

#include "dimerwork/config.hpp"
#include "dimerwork/numerics.hpp"
#include "dimerwork/protocol.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace dimerwork {

struct SweepSpec {
  DimerConfig base;
  Protocol protocol = Protocol::exact;
  RunFlags flags;
  double u_min = 0.0, u_max = 10.0;
  int u_count = 51;
  double tau_min = 0.0, tau_max = 5.0;
  int tau_count = 51;
  int jobs = 0;  ///< worker threads; 0 = available cores
};

/// Grid of one scalar value over (U, tau).  `values` is row-major with tau as
/// the outer (row) axis and U as the inner (column) axis, both ascending.
struct SweepTable {
  std::vector<double> u_axis, tau_axis;
  std::string value_name = "extracted_work";
  std::vector<double> values;
  std::vector<double> extracted, entropy;  ///< kept by run_sweep for re-selection
  long nan_count = 0;
  std::vector<std::string> cell_errors;
  std::map<std::string, std::string> metadata;
};

/// Apply SweepSpec keys found in `map` (removing them); complains about any
/// key left over afterwards, so call after apply_dimer_config.
inline void apply_sweep_config(ConfigMap& map, SweepSpec& s) {
  auto take = [&map](const char* key) -> const std::string* {
    auto it = map.find(key);
    return it == map.end() ? nullptr : &it->second;
  };
  if (const auto* v = take("protocol")) s.protocol = protocol_from_token(*v);
  if (const auto* v = take("fop")) s.flags.fop = parse_bool("fop", *v);
  if (const auto* v = take("tpf")) s.flags.tpf = parse_bool("tpf", *v);
  if (const auto* v = take("u_min")) s.u_min = parse_double("u_min", *v);
  if (const auto* v = take("u_max")) s.u_max = parse_double("u_max", *v);
  if (const auto* v = take("u_count")) s.u_count = parse_int("u_count", *v);
  if (const auto* v = take("tau_min")) s.tau_min = parse_double("tau_min", *v);
  if (const auto* v = take("tau_max")) s.tau_max = parse_double("tau_max", *v);
  if (const auto* v = take("tau_count")) s.tau_count = parse_int("tau_count", *v);
  if (const auto* v = take("jobs")) s.jobs = parse_int("jobs", *v);
  static const char* keys[] = {"protocol", "fop",     "tpf",       "u_min", "u_max",
                               "u_count",  "tau_min", "tau_max",   "tau_count", "jobs"};
  for (const char* k : keys) map.erase(k);
  if (!map.empty())
    throw InvalidInputError("config: unknown key `" + map.begin()->first + "`");
}

inline std::string format_value(double v) {
  if (std::isnan(v)) return "nan";
  if (v == 0.0) v = 0.0;  // normalize -0
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12f", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Sweep execution
// ---------------------------------------------------------------------------

inline SweepTable run_sweep(const SweepSpec& spec) {
  if (spec.u_count < 1 || spec.tau_count < 1)
    throw InvalidInputError("run_sweep: grid counts must be >= 1");
  if (spec.u_min > spec.u_max || spec.tau_min > spec.tau_max)
    throw InvalidInputError("run_sweep: grid minimum exceeds maximum");
  if (spec.flags.tpf && spec.protocol != Protocol::ks_plda && spec.protocol != Protocol::ks_par)
    throw InvalidInputError("run_sweep: tpf applies only to the ks protocols");
  SweepTable table;
  table.u_axis = linspace(spec.u_min, spec.u_max, spec.u_count);
  table.tau_axis = linspace(spec.tau_min, spec.tau_max, spec.tau_count);
  const std::size_t cells = table.u_axis.size() * table.tau_axis.size();
  table.extracted.assign(cells, std::numeric_limits<double>::quiet_NaN());
  table.entropy.assign(cells, std::numeric_limits<double>::quiet_NaN());

  int jobs = spec.jobs;
  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
  if (jobs <= 0) jobs = 1;
  jobs = std::min<int>(jobs, static_cast<int>(cells));

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells) return;
      const std::size_t ti = i / table.u_axis.size();
      const std::size_t ui = i % table.u_axis.size();
      DimerConfig cfg = spec.base;
      cfg.u = table.u_axis[ui];
      cfg.tau = table.tau_axis[ti];
      try {
        const SingleReport r = run_single(cfg, spec.protocol, spec.flags);
        table.extracted[i] = r.extracted;
        table.entropy[i] = r.entropy_zero;
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        table.cell_errors.push_back("u=" + std::to_string(cfg.u) +
                                    ",tau=" + std::to_string(cfg.tau) + ": " + e.what());
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(jobs));
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::sort(table.cell_errors.begin(), table.cell_errors.end());  // scheduling-independent
  table.values = table.extracted;
  table.value_name = "extracted_work";
  for (double v : table.values)
    if (std::isnan(v)) ++table.nan_count;
  if (table.nan_count == static_cast<long>(cells))
    throw Error("run_sweep: every cell failed; first error: " +
                (table.cell_errors.empty() ? std::string("unknown") : table.cell_errors.front()));

  table.metadata["protocol"] = to_token(spec.protocol);
  table.metadata["fop"] = spec.flags.fop ? "true" : "false";
  table.metadata["tpf"] = spec.flags.tpf ? "true" : "false";
  table.metadata["delta_convention"] = to_token(spec.base.delta_convention);
  table.metadata["density_source"] = to_token(spec.base.density_source);
  table.metadata["beta"] = format_value(spec.base.beta);
  table.metadata["delta0"] = format_value(spec.base.delta0);
  table.metadata["delta_tau"] = format_value(spec.base.delta_tau);
  table.metadata["n_steps"] = std::to_string(spec.base.n_steps);
  table.metadata["grid"] = std::to_string(spec.u_count) + "x" + std::to_string(spec.tau_count);
  return table;
}

enum class SweepValue { extracted, entropy };

inline void select_value(SweepTable& table, SweepValue which) {
  table.values = which == SweepValue::extracted ? table.extracted : table.entropy;
  table.value_name = which == SweepValue::extracted ? "extracted_work" : "entropy_production";
  table.nan_count = 0;
  for (double v : table.values)
    if (std::isnan(v)) ++table.nan_count;
}

/// |W_approx - W_exact| / |W_exact| per cell, NaN (counted) where the exact
/// value sits below the guard.
inline SweepTable relative_error_grid(const SweepTable& exact_table,
                                      const SweepTable& approx_table, double guard = 1e-6) {
  if (exact_table.u_axis != approx_table.u_axis ||
      exact_table.tau_axis != approx_table.tau_axis)
    throw InvalidInputError("relative_error_grid: axis mismatch");
  SweepTable out;
  out.u_axis = exact_table.u_axis;
  out.tau_axis = exact_table.tau_axis;
  out.value_name = "relative_error";
  out.values.resize(exact_table.values.size());
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const double we = exact_table.values[i];
    const double wa = approx_table.values[i];
    if (std::isnan(we) || std::isnan(wa) || std::abs(we) <= guard) {
      out.values[i] = std::numeric_limits<double>::quiet_NaN();
      ++out.nan_count;
    } else {
      out.values[i] = std::abs(wa - we) / std::abs(we);
    }
  }
  out.metadata = approx_table.metadata;
  out.metadata["reference"] = "exact";
  out.metadata["guard"] = format_value(guard);
  return out;
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// CSV: `#`-prefixed metadata block, header `u_over_j,tau_j,value`, then one
/// row per cell, tau outer ascending, U inner ascending, 12-digit values.
inline void emit_csv(const SweepTable& table, std::ostream& out, bool timestamp = true) {
  out << "# dimerwork sweep\n";
  out << "# value_name = " << table.value_name << "\n";
  for (const auto& [key, value] : table.metadata) out << "# " << key << " = " << value << "\n";
  if (table.nan_count > 0) out << "# nan_count = " << table.nan_count << "\n";
  if (timestamp) out << "# generated = " << utc_timestamp() << "\n";
  out << "u_over_j,tau_j,value\n";
  for (std::size_t ti = 0; ti < table.tau_axis.size(); ++ti)
    for (std::size_t ui = 0; ui < table.u_axis.size(); ++ui)
      out << format_value(table.u_axis[ui]) << ',' << format_value(table.tau_axis[ti]) << ','
          << format_value(table.values[ti * table.u_axis.size() + ui]) << '\n';
  if (!out) throw IoError("emit_csv: write failed");
}

inline void emit_json(const SweepTable& table, std::ostream& out, bool timestamp = true) {
  nlohmann::json j;
  j["metadata"] = table.metadata;
  j["metadata"]["value_name"] = table.value_name;
  if (timestamp) j["metadata"]["generated"] = utc_timestamp();
  j["u_over_j"] = table.u_axis;
  j["tau_j"] = table.tau_axis;
  j["values"] = table.values;  // row-major, tau outer; NaN serializes as null
  j["nan_count"] = table.nan_count;
  if (!table.cell_errors.empty()) j["cell_errors"] = table.cell_errors;
  out << j.dump(2) << "\n";
  if (!out) throw IoError("emit_json: write failed");
}

inline void emit(const SweepTable& table, const std::string& format, std::ostream& out,
                 bool timestamp = true) {
  if (format == "csv")
    emit_csv(table, out, timestamp);
  else if (format == "json")
    emit_json(table, out, timestamp);
  else
    throw InvalidInputError("emit: unknown format `" + format + "` (use csv or json)");
}

inline void emit_file(const SweepTable& table, const std::string& format,
                      const std::string& path, bool timestamp = true) {
  std::ofstream out(path);
  if (!out) throw IoError("emit_file: cannot open " + path);
  emit(table, format, out, timestamp);
  out.close();
  if (!out) throw IoError("emit_file: write failed for " + path);
}

/// Parse a CSV produced by emit_csv back into a table (metadata included).
inline SweepTable parse_table_csv(std::istream& in) {
  SweepTable table;
  std::string line;
  std::vector<double> u_col, tau_col, val_col;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos) {
        const std::string key = trim(line.substr(1, eq - 1));
        table.metadata[key] = trim(line.substr(eq + 1));
      }
      continue;
    }
    if (!header_seen) {
      if (trim(line) != "u_over_j,tau_j,value")
        throw InvalidInputError("parse_table_csv: unexpected header: " + line);
      header_seen = true;
      continue;
    }
    std::istringstream row(line);
    std::string cell;
    double vals[3];
    for (int i = 0; i < 3; ++i) {
      if (!std::getline(row, cell, ','))
        throw InvalidInputError("parse_table_csv: short row: " + line);
      vals[i] = cell == "nan" ? std::numeric_limits<double>::quiet_NaN()
                              : parse_double("csv cell", cell);
    }
    u_col.push_back(vals[0]);
    tau_col.push_back(vals[1]);
    val_col.push_back(vals[2]);
  }
  if (!header_seen) throw InvalidInputError("parse_table_csv: missing header");
  for (double u : u_col) {
    if (table.u_axis.empty() || u > table.u_axis.back())
      table.u_axis.push_back(u);
    else
      break;
  }
  const std::size_t nu = table.u_axis.size();
  if (nu == 0 || u_col.size() % nu != 0)
    throw InvalidInputError("parse_table_csv: ragged grid");
  for (std::size_t i = 0; i < tau_col.size(); i += nu) table.tau_axis.push_back(tau_col[i]);
  table.values = val_col;
  if (auto it = table.metadata.find("value_name"); it != table.metadata.end()) {
    table.value_name = it->second;
    table.metadata.erase(it);
  }
  // derived lines; recomputed or re-stamped on emission
  table.metadata.erase("nan_count");
  table.metadata.erase("generated");
  for (double v : table.values)
    if (std::isnan(v)) ++table.nan_count;
  return table;
}

// ---------------------------------------------------------------------------
// Canned figure-style jobs
// ---------------------------------------------------------------------------

/// The named map products: "2a"/"2b" are exact extracted-work and entropy
/// maps; "3a/3b/3c" relative-error maps of ni / ks-plda / ks-par; "4a/4b/4c"
/// the same with the first-order correction; "5a/5b" the self-consistent
/// propagation of ks-plda without / with the correction (tau up to 4).
struct FigureJob {
  std::string id;
  SweepSpec spec;          ///< the (possibly approximate) sweep to run
  bool error_grid = false; ///< divide against an exact sweep on the same axes
  SweepValue value = SweepValue::extracted;
};

inline FigureJob figure_job(const std::string& id, const DimerConfig& base, int jobs = 0) {
  FigureJob job;
  job.id = id;
  job.spec.base = base;
  job.spec.jobs = jobs;
  if (id == "2a" || id == "2b") {
    job.spec.protocol = Protocol::exact;
    job.value = id == "2b" ? SweepValue::entropy : SweepValue::extracted;
    return job;
  }
  job.error_grid = true;
  if (id == "3a" || id == "4a") job.spec.protocol = Protocol::ni;
  else if (id == "3b" || id == "4b" || id == "5a" || id == "5b") job.spec.protocol = Protocol::ks_plda;
  else if (id == "3c" || id == "4c") job.spec.protocol = Protocol::ks_par;
  else throw InvalidInputError("figure_job: unknown id `" + id + "`");
  job.spec.flags.fop = (id[0] == '4' || id == "5b");
  job.spec.flags.tpf = (id[0] == '5');
  if (id[0] == '5') job.spec.tau_max = 4.0;
  return job;
}

inline SweepTable run_figure(const FigureJob& job) {
  SweepTable approx = run_sweep(job.spec);
  if (!job.error_grid) {
    SweepTable out = approx;
    select_value(out, job.value);
    out.metadata["figure"] = job.id;
    return out;
  }
  SweepSpec exact_spec = job.spec;
  exact_spec.protocol = Protocol::exact;
  exact_spec.flags = RunFlags{};
  SweepTable exact_table = run_sweep(exact_spec);
  SweepTable out = relative_error_grid(exact_table, approx, job.spec.base.relerr_guard);
  out.metadata["figure"] = job.id;
  return out;
}

}  // namespace dimerwork
