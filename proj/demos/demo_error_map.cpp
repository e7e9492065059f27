// Build a coarse relative-error map of the parabolic-functional approximation
// against the exact work over the (U, tau) plane and emit it as CSV.

#include <dimerwork/dimerwork.hpp>

#include <iostream>

using namespace dimerwork;

int main() {
  SweepSpec spec;
  spec.base.n_steps = 200;  // coarse demo grid; 0 picks the production default
  spec.protocol = Protocol::ks_par;
  spec.u_min = 1.0;
  spec.u_max = 9.0;
  spec.u_count = 5;
  spec.tau_min = 0.5;
  spec.tau_max = 4.5;
  spec.tau_count = 5;
  spec.jobs = 1;

  const SweepTable approx = run_sweep(spec);

  SweepSpec exact_spec = spec;
  exact_spec.protocol = Protocol::exact;
  const SweepTable exact_table = run_sweep(exact_spec);

  SweepTable err = relative_error_grid(exact_table, approx, spec.base.relerr_guard);
  emit_csv(err, std::cout, /*timestamp=*/false);

  double worst = 0.0, worst_u = 0.0, worst_tau = 0.0;
  for (std::size_t ti = 0; ti < err.tau_axis.size(); ++ti)
    for (std::size_t ui = 0; ui < err.u_axis.size(); ++ui) {
      const double v = err.values[ti * err.u_axis.size() + ui];
      if (std::isfinite(v) && v > worst) {
        worst = v;
        worst_u = err.u_axis[ui];
        worst_tau = err.tau_axis[ti];
      }
    }
  std::cerr << "worst relative error " << worst << " at U=" << worst_u
            << "J, tau=" << worst_tau << "/J\n";
  return 0;
}
