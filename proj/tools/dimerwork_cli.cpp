// Batch front end for the dimerwork library.
//
//   dimerwork single      one protocol run, full work bookkeeping
//   dimerwork sweep       extracted work (or entropy) over a (U, tau) grid
//   dimerwork error-grid  relative error of an approximate protocol vs exact
//   dimerwork fig2a|fig2b canned exact maps (work / entropy production)
//   dimerwork fig3 a|b|c  canned error maps (bare / local / parabolic)
//   dimerwork fig4 a|b|c  the same with the first-order correction
//   dimerwork fig5 a|b    self-consistent local maps without / with correction
//
// Settings come from defaults, then an optional `--config` file of flat
// `key = value` lines, then command-line flags (highest precedence).
// On failure a one-line JSON error summary goes to stderr and the exit code
// identifies the error class.

#include <dimerwork/dimerwork.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

namespace {

using namespace dimerwork;

struct CliState {
  std::string config_path;
  std::string out_path;
  std::string format = "csv";
  std::string grid;
  std::string value = "extracted";
  std::string protocol, convention, source;
  bool no_timestamp = false;
  bool fop = false, tpf = false, fixed_initial = false;
  int steps = 0, jobs = 0;
  double j = 1.0, u = 0.0, beta = 0.4, tau = 1.0, delta0 = 0.5, delta_tau = 5.0;
  double u_min = 0.0, u_max = 10.0, tau_min = 0.0, tau_max = 5.0;
};

void add_model_options(CLI::App* sub, CliState& st) {
  sub->add_option("--config", st.config_path, "flat `key = value` settings file");
  sub->add_option("--out", st.out_path, "output path (default: stdout)");
  sub->add_option("--format", st.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  sub->add_flag("--no-timestamp", st.no_timestamp, "omit the generated line");
  sub->add_option("--steps", st.steps, "propagation steps (0 = duration-scaled default)");
  sub->add_option("--jobs", st.jobs, "worker threads (0 = all cores)");
  sub->add_option("--j", st.j, "hopping J > 0");
  sub->add_option("--u", st.u, "interaction U, units of J");
  sub->add_option("--beta", st.beta, "inverse temperature, units of 1/J");
  sub->add_option("--tau", st.tau, "ramp duration, units of 1/J");
  sub->add_option("--delta0", st.delta0, "initial bias amplitude, units of J");
  sub->add_option("--delta-tau", st.delta_tau, "final bias amplitude, units of J");
  sub->add_option("--delta-convention", st.convention, "bias weight convention: eq5 or eq1")
      ->check(CLI::IsMember({"eq5", "eq1"}));
  sub->add_option("--density-source", st.source,
                  "initial Kohn-Sham density: scf or exact")
      ->check(CLI::IsMember({"scf", "exact"}));
}

void add_protocol_options(CLI::App* sub, CliState& st) {
  sub->add_option("--protocol", st.protocol, "exact, ni, ks-plda, or ks-par")
      ->check(CLI::IsMember({"exact", "ni", "ks-plda", "ks-par"}));
  sub->add_flag("--fop,!--no-fop", st.fop, "first-order energy correction");
  sub->add_flag("--tpf,!--no-tpf", st.tpf, "self-consistent trajectory propagation");
  sub->add_flag("--fixed-initial-state", st.fixed_initial,
                "freeze the initial state across trajectory iterations");
}

void add_range_options(CLI::App* sub, CliState& st) {
  sub->add_option("--grid", st.grid, "grid size as UxT, e.g. 51x51");
  sub->add_option("--u-min", st.u_min, "lower U bound, units of J");
  sub->add_option("--u-max", st.u_max, "upper U bound, units of J");
  sub->add_option("--tau-min", st.tau_min, "lower tau bound, units of 1/J");
  sub->add_option("--tau-max", st.tau_max, "upper tau bound, units of 1/J");
}

bool was_passed(const CLI::App* sub, const std::string& name) {
  const CLI::Option* opt = sub->get_option_no_throw(name);
  return opt != nullptr && opt->count() > 0;
}

void parse_grid_token(const std::string& token, SweepSpec& s) {
  const auto x = token.find_first_of("xX");
  if (x == std::string::npos || x == 0 || x + 1 >= token.size())
    throw InvalidInputError("--grid expects UxT, e.g. 51x51, got `" + token + "`");
  s.u_count = parse_int("grid u count", token.substr(0, x));
  s.tau_count = parse_int("grid tau count", token.substr(x + 1));
}

/// defaults -> config file -> command line.  `file_keys` reports which keys
/// the file provided so figure presets know what to keep.
SweepSpec resolve_settings(const CLI::App* sub, const CliState& st,
                           std::set<std::string>& file_keys) {
  SweepSpec s;
  if (!st.config_path.empty()) {
    std::ifstream file(st.config_path);
    if (!file) throw IoError("cannot open config file: " + st.config_path);
    std::ostringstream buf;
    buf << file.rdbuf();
    ConfigMap map = parse_config(buf.str());
    for (const auto& [key, value] : map) file_keys.insert(key);
    apply_dimer_config(map, s.base);
    apply_sweep_config(map, s);
  }
  if (was_passed(sub, "--j")) s.base.j = st.j;
  if (was_passed(sub, "--u")) s.base.u = st.u;
  if (was_passed(sub, "--beta")) s.base.beta = st.beta;
  if (was_passed(sub, "--tau")) s.base.tau = st.tau;
  if (was_passed(sub, "--delta0")) s.base.delta0 = st.delta0;
  if (was_passed(sub, "--delta-tau")) s.base.delta_tau = st.delta_tau;
  if (was_passed(sub, "--steps")) s.base.n_steps = st.steps;
  if (was_passed(sub, "--delta-convention"))
    s.base.delta_convention = delta_convention_from_token(st.convention);
  if (was_passed(sub, "--density-source"))
    s.base.density_source = density_source_from_token(st.source);
  if (was_passed(sub, "--fixed-initial-state"))
    s.base.tpf_fixed_initial_state = st.fixed_initial;
  if (was_passed(sub, "--protocol")) s.protocol = protocol_from_token(st.protocol);
  if (was_passed(sub, "--fop") || was_passed(sub, "--no-fop")) s.flags.fop = st.fop;
  if (was_passed(sub, "--tpf") || was_passed(sub, "--no-tpf")) s.flags.tpf = st.tpf;
  if (was_passed(sub, "--jobs")) s.jobs = st.jobs;
  if (was_passed(sub, "--grid")) parse_grid_token(st.grid, s);
  if (was_passed(sub, "--u-min")) s.u_min = st.u_min;
  if (was_passed(sub, "--u-max")) s.u_max = st.u_max;
  if (was_passed(sub, "--tau-min")) s.tau_min = st.tau_min;
  if (was_passed(sub, "--tau-max")) s.tau_max = st.tau_max;
  return s;
}

// -- single-run emission -----------------------------------------------------

nlohmann::json occupations_json(const SiteOccupations& n) {
  return {{"n1", n.n1}, {"n2", n.n2}};
}

void emit_single_json(const SingleReport& r, std::ostream& out, bool timestamp) {
  nlohmann::json j;
  j["protocol"] = to_token(r.protocol);
  j["flags"] = {{"fop", r.flags.fop}, {"tpf", r.flags.tpf}};
  j["config"] = {{"j", r.config.j},
                 {"u", r.config.u},
                 {"beta", r.config.beta},
                 {"tau", r.config.tau},
                 {"delta0", r.config.delta0},
                 {"delta_tau", r.config.delta_tau},
                 {"n_steps", r.config.n_steps},
                 {"delta_convention", to_token(r.config.delta_convention)},
                 {"density_source", to_token(r.config.density_source)}};
  j["results"] = {{"mean_work", r.mean_work},
                  {"extracted_work", r.extracted},
                  {"df_zero", r.df_zero},
                  {"df_fop", r.df_fop},  // null unless the correction ran
                  {"entropy_zero", r.entropy_zero},
                  {"entropy_fop", r.entropy_fop},
                  {"jarzynski_residual", r.jarzynski_residual},
                  {"adiabaticity", r.adiabaticity},
                  {"adiabatic", r.adiabatic},
                  {"n_initial", occupations_json(r.n_initial)},
                  {"n_final", occupations_json(r.n_final)},
                  {"scf_iterations", r.scf_iterations},
                  {"tpf_iterations", r.tpf_iterations}};
  nlohmann::json atoms = nlohmann::json::array();
  for (const WorkAtom& a : r.distribution.atoms)
    atoms.push_back({{"work", a.work}, {"prob", a.prob}});
  j["distribution"] = atoms;
  if (timestamp) j["generated"] = utc_timestamp();
  out << j.dump(2) << "\n";
}

void emit_single_csv(const SingleReport& r, std::ostream& out, bool timestamp) {
  out << "# dimerwork single\n";
  out << "# protocol = " << to_token(r.protocol) << "\n";
  out << "# fop = " << (r.flags.fop ? "true" : "false") << "\n";
  out << "# tpf = " << (r.flags.tpf ? "true" : "false") << "\n";
  out << "# delta_convention = " << to_token(r.config.delta_convention) << "\n";
  out << "# density_source = " << to_token(r.config.density_source) << "\n";
  if (timestamp) out << "# generated = " << utc_timestamp() << "\n";
  out << "key,value\n";
  const auto row = [&out](const char* key, double v) {
    out << key << ',' << format_value(v) << '\n';
  };
  row("j", r.config.j);
  row("u", r.config.u);
  row("beta", r.config.beta);
  row("tau", r.config.tau);
  row("delta0", r.config.delta0);
  row("delta_tau", r.config.delta_tau);
  out << "n_steps," << r.config.n_steps << '\n';
  row("mean_work", r.mean_work);
  row("extracted_work", r.extracted);
  row("df_zero", r.df_zero);
  row("df_fop", r.df_fop);
  row("entropy_zero", r.entropy_zero);
  row("entropy_fop", r.entropy_fop);
  out << "jarzynski_residual," << r.jarzynski_residual << '\n';
  row("adiabaticity", r.adiabaticity);
  out << "adiabatic," << (r.adiabatic ? "true" : "false") << '\n';
  row("n_initial_1", r.n_initial.n1);
  row("n_initial_2", r.n_initial.n2);
  row("n_final_1", r.n_final.n1);
  row("n_final_2", r.n_final.n2);
  out << "scf_iterations," << r.scf_iterations << '\n';
  out << "tpf_iterations," << r.tpf_iterations << '\n';
  for (std::size_t i = 0; i < r.distribution.atoms.size(); ++i) {
    out << "atom_" << i << "_work," << format_value(r.distribution.atoms[i].work) << '\n';
    out << "atom_" << i << "_prob," << format_value(r.distribution.atoms[i].prob) << '\n';
  }
}

// -- output plumbing ----------------------------------------------------------

template <class Emit>
void to_destination(const std::string& out_path, Emit&& emit_fn) {
  if (out_path.empty()) {
    emit_fn(std::cout);
    if (!std::cout) throw IoError("write to stdout failed");
    return;
  }
  std::ofstream file(out_path);
  if (!file) throw IoError("cannot open output file: " + out_path);
  emit_fn(file);
  file.close();
  if (!file) throw IoError("write failed for " + out_path);
}

void emit_table(const SweepTable& table, const CliState& st) {
  to_destination(st.out_path, [&](std::ostream& out) {
    emit(table, st.format, out, !st.no_timestamp);
  });
}

// -- subcommand bodies --------------------------------------------------------

int run_single_cmd(const CLI::App* sub, const CliState& st) {
  std::set<std::string> file_keys;
  const SweepSpec s = resolve_settings(sub, st, file_keys);
  const SingleReport report = run_single(s.base, s.protocol, s.flags);
  to_destination(st.out_path, [&](std::ostream& out) {
    if (st.format == "json")
      emit_single_json(report, out, !st.no_timestamp);
    else
      emit_single_csv(report, out, !st.no_timestamp);
  });
  return 0;
}

int run_sweep_cmd(const CLI::App* sub, const CliState& st) {
  std::set<std::string> file_keys;
  const SweepSpec s = resolve_settings(sub, st, file_keys);
  SweepTable table = run_sweep(s);
  if (st.value == "entropy") select_value(table, SweepValue::entropy);
  emit_table(table, st);
  return 0;
}

int run_error_grid_cmd(const CLI::App* sub, const CliState& st) {
  std::set<std::string> file_keys;
  const SweepSpec s = resolve_settings(sub, st, file_keys);
  const SweepTable approx = run_sweep(s);
  SweepSpec exact_spec = s;
  exact_spec.protocol = Protocol::exact;
  exact_spec.flags = RunFlags{};
  const SweepTable exact_table = run_sweep(exact_spec);
  const SweepTable err = relative_error_grid(exact_table, approx, s.base.relerr_guard);
  emit_table(err, st);
  return 0;
}

int run_figure_cmd(const CLI::App* sub, const CliState& st, const std::string& id) {
  std::set<std::string> file_keys;
  const SweepSpec s = resolve_settings(sub, st, file_keys);
  FigureJob job = figure_job(id, s.base, s.jobs);
  // grid bounds and counts may be narrowed explicitly; protocol and flags of
  // a canned figure stay pinned
  const auto chosen = [&](const char* cli, const char* key) {
    return was_passed(sub, cli) || file_keys.count(key) > 0;
  };
  if (chosen("--grid", "u_count")) job.spec.u_count = s.u_count;
  if (chosen("--grid", "tau_count")) job.spec.tau_count = s.tau_count;
  if (chosen("--u-min", "u_min")) job.spec.u_min = s.u_min;
  if (chosen("--u-max", "u_max")) job.spec.u_max = s.u_max;
  if (chosen("--tau-min", "tau_min")) job.spec.tau_min = s.tau_min;
  if (chosen("--tau-max", "tau_max")) job.spec.tau_max = s.tau_max;
  const SweepTable table = run_figure(job);
  emit_table(table, st);
  return 0;
}

int dispatch(const CLI::App& app, const CliState& st) {
  for (const CLI::App* sub : app.get_subcommands()) {
    const std::string name = sub->get_name();
    if (name == "single") return run_single_cmd(sub, st);
    if (name == "sweep") return run_sweep_cmd(sub, st);
    if (name == "error-grid") return run_error_grid_cmd(sub, st);
    if (name == "fig2a") return run_figure_cmd(sub, st, "2a");
    if (name == "fig2b") return run_figure_cmd(sub, st, "2b");
    if (name == "fig3" || name == "fig4" || name == "fig5") {
      const std::string letter = sub->get_option("letter")->as<std::string>();
      return run_figure_cmd(sub, st, name.substr(3) + letter);
    }
  }
  std::cerr << "no subcommand given; see --help\n";
  return 2;
}

int error_summary(const char* type, const std::string& message, int code) {
  nlohmann::json j;
  j["error"] = {{"type", type}, {"message", message}, {"exit_code", code}};
  std::cerr << j.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"work statistics of a driven two-site Hubbard dimer"};
  app.require_subcommand(0, 1);
  CliState st;

  CLI::App* single = app.add_subcommand("single", "one protocol run");
  add_model_options(single, st);
  add_protocol_options(single, st);

  CLI::App* sweep = app.add_subcommand("sweep", "value over a (U, tau) grid");
  add_model_options(sweep, st);
  add_protocol_options(sweep, st);
  add_range_options(sweep, st);
  sweep->add_option("--value", st.value, "extracted or entropy")
      ->check(CLI::IsMember({"extracted", "entropy"}));

  CLI::App* error_grid = app.add_subcommand("error-grid", "relative error vs exact");
  add_model_options(error_grid, st);
  add_protocol_options(error_grid, st);
  add_range_options(error_grid, st);

  const auto add_figure = [&](const char* name, const char* help,
                              const std::vector<std::string>& letters) {
    CLI::App* fig = app.add_subcommand(name, help);
    add_model_options(fig, st);
    add_range_options(fig, st);
    if (!letters.empty())
      fig->add_option("letter", "panel letter")->required()->check(CLI::IsMember(letters));
    return fig;
  };
  add_figure("fig2a", "exact extracted-work map", {});
  add_figure("fig2b", "exact entropy-production map", {});
  add_figure("fig3", "zero-order relative-error maps", {"a", "b", "c"});
  add_figure("fig4", "first-order relative-error maps", {"a", "b", "c"});
  add_figure("fig5", "self-consistent relative-error maps", {"a", "b"});

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    return dispatch(app, st);
  } catch (const dimerwork::InvalidInputError& e) {
    return error_summary("InvalidInputError", e.what(), 2);
  } catch (const dimerwork::ConvergenceError& e) {
    return error_summary("ConvergenceError", e.what(), 3);
  } catch (const dimerwork::PropagationError& e) {
    return error_summary("PropagationError", e.what(), 4);
  } catch (const dimerwork::NumericalError& e) {
    return error_summary("NumericalError", e.what(), 5);
  } catch (const dimerwork::IoError& e) {
    return error_summary("IoError", e.what(), 6);
  } catch (const std::exception& e) {
    return error_summary("Error", e.what(), 1);
  }
}
