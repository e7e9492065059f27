#pragma once

// Protocol orchestration: assemble the requested dynamics (exact,
// non-interacting, or effective single-particle with a chosen functional),
// run the two-point-measurement pipeline, and collect a full report.

#include "dimerwork/config.hpp"
#include "dimerwork/dynamics.hpp"
#include "dimerwork/functionals.hpp"
#include "dimerwork/model.hpp"
#include "dimerwork/numerics.hpp"
#include "dimerwork/thermo.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace dimerwork {

struct RunFlags {
  bool fop = false;                ///< first-order spectrum correction
  bool tpf = false;                ///< self-consistent time propagation (ks protocols only)
  bool record_trajectory = false;  ///< keep the full occupation trajectory
};

struct SingleReport {
  Protocol protocol = Protocol::exact;
  RunFlags flags;
  DimerConfig config;

  double mean_work = 0.0;
  double extracted = 0.0;
  double df_zero = 0.0;  ///< free-energy difference from the driving spectra
  double df_fop = std::numeric_limits<double>::quiet_NaN();  ///< from corrected spectra
  double entropy_zero = 0.0;  ///< beta (<W> - df_zero)
  double entropy_fop = std::numeric_limits<double>::quiet_NaN();
  double jarzynski_residual = 0.0;
  double adiabaticity = 0.0;  ///< max_n (1 - p_{n|n}) of this run's propagator
  bool adiabatic = false;     ///< adiabaticity <= 0.01

  SiteOccupations n_initial{1.0, 1.0};
  SiteOccupations n_final{1.0, 1.0};
  int scf_iterations = 0;
  int tpf_iterations = 0;
  WorkDistribution distribution;
  std::vector<SiteOccupations> trajectory;  ///< filled when flags.record_trajectory
};

// ---------------------------------------------------------------------------
// Hamiltonian assembly per protocol
// ---------------------------------------------------------------------------

/// Protocol bias after the convention scaling, at time t (physical units).
inline std::pair<double, double> effective_deltas(const DimerConfig& cfg, double t) {
  const double s = delta_scale(cfg);
  const auto d = ramp_delta(t, cfg);
  return {s * d.first, s * d.second};
}

inline std::pair<double, double> effective_deltas_initial(const DimerConfig& cfg) {
  const double s = delta_scale(cfg);
  const auto d = ramp_delta_initial(cfg);
  return {s * d.first, s * d.second};
}

inline std::pair<double, double> effective_deltas_final(const DimerConfig& cfg) {
  const double s = delta_scale(cfg);
  const auto d = ramp_delta_final(cfg);
  return {s * d.first, s * d.second};
}

inline HermitianMatrix4 exact_h_at(const DimerConfig& cfg, double t) {
  const auto d = effective_deltas(cfg, t);
  return build_exact_h(cfg.u * cfg.j, d.first, d.second, cfg.j);
}

inline HermitianMatrix4 exact_h_initial(const DimerConfig& cfg) {
  const auto d = effective_deltas_initial(cfg);
  return build_exact_h(cfg.u * cfg.j, d.first, d.second, cfg.j);
}

inline HermitianMatrix4 exact_h_final(const DimerConfig& cfg) {
  const auto d = effective_deltas_final(cfg);
  return build_exact_h(cfg.u * cfg.j, d.first, d.second, cfg.j);
}

/// Frozen effective-potential data for the zero-order schemes.
struct KsSetup {
  SiteOccupations n0{1.0, 1.0};
  KsPotential v;
  int scf_iterations = 0;
};

/// Initial density and frozen potentials.  density_source = scf: thermal
/// self-consistency (the density is the thermal density of the effective
/// Hamiltonian it generates); density_source = exact: functionals evaluated
/// at the exact thermal density of the initial interacting Hamiltonian.
inline KsSetup ks_initial(const DimerConfig& cfg, XcFunctional xc) {
  const double u = cfg.u * cfg.j;
  const double beta = cfg.beta / cfg.j;
  const auto d0 = effective_deltas_initial(cfg);
  if (cfg.density_source == DensitySource::exact) {
    const auto h = build_exact_h(u, d0.first, d0.second, cfg.j);
    const SiteOccupations n = site_occupations(thermal_density(eig_hermitian(h), beta));
    return {n, ks_potentials(n, u, cfg.j, xc), 0};
  }
  auto map = [&](const SiteOccupations& n) {
    const SitePotential v = total(ks_potentials(n, u, cfg.j, xc));
    const auto h = build_ks_h(d0.first + v.site1, d0.second + v.site2, cfg.j);
    return site_occupations(thermal_density(eig_hermitian(h), beta));
  };
  FixedPointOptions opt;
  opt.tol = cfg.scf_tol;
  opt.max_iter = cfg.scf_max_iter;
  const FixedPointResult res = damped_fixed_point(map, {1.0, 1.0}, opt, "thermal scf");
  return {res.n, ks_potentials(res.n, u, cfg.j, xc), res.iterations};
}

inline HermitianMatrix4 ks_h_at(const DimerConfig& cfg, double t, const KsPotential& v) {
  const auto d = effective_deltas(cfg, t);
  const SitePotential vt = total(v);
  return build_ks_h(d.first + vt.site1, d.second + vt.site2, cfg.j);
}

// ---------------------------------------------------------------------------
// Single run
// ---------------------------------------------------------------------------

inline SingleReport run_single(const DimerConfig& cfg, Protocol protocol, RunFlags flags = {}) {
  validate(cfg);
  if (flags.tpf && protocol != Protocol::ks_plda && protocol != Protocol::ks_par)
    throw InvalidInputError("run_single: tpf applies only to the ks protocols");

  const double u = cfg.u * cfg.j;
  const double beta = cfg.beta / cfg.j;
  const double tau = cfg.tau / cfg.j;
  const int steps = auto_steps(cfg);
  const XcFunctional xc = xc_of(protocol);

  SingleReport report;
  report.protocol = protocol;
  report.flags = flags;
  report.config = cfg;

  // --- assemble the driving Hamiltonian -----------------------------------
  HermitianMatrix4 h_initial, h_final;
  HamiltonianProvider h_at;
  const bool tpf_active = flags.tpf && cfg.tau > 0.0;

  if (protocol == Protocol::exact) {
    h_initial = exact_h_initial(cfg);
    h_final = exact_h_final(cfg);
    h_at = [cfg](double t) { return exact_h_at(cfg, t); };
  } else if (protocol == Protocol::ni) {
    auto ni_at = [cfg](double t) {
      const auto d = effective_deltas(cfg, t);
      return build_ks_h(d.first, d.second, cfg.j);
    };
    const auto di = effective_deltas_initial(cfg);
    const auto df = effective_deltas_final(cfg);
    h_initial = build_ks_h(di.first, di.second, cfg.j);
    h_final = build_ks_h(df.first, df.second, cfg.j);
    h_at = ni_at;
  } else {
    const KsSetup setup = ks_initial(cfg, xc);
    report.scf_iterations = setup.scf_iterations;
    const KsPotential v = setup.v;
    const auto di = effective_deltas_initial(cfg);
    const auto df = effective_deltas_final(cfg);
    const SitePotential vt = total(v);
    h_initial = build_ks_h(di.first + vt.site1, di.second + vt.site2, cfg.j);
    h_final = build_ks_h(df.first + vt.site1, df.second + vt.site2, cfg.j);
    h_at = [cfg, v](double t) { return ks_h_at(cfg, t, v); };
  }

  UnitaryMatrix4 propagator = UnitaryMatrix4::identity();
  if (tpf_active) {
    TpfProblem problem;
    problem.effective_deltas = [cfg](double t) { return effective_deltas(cfg, t); };
    problem.u = u;
    problem.j = cfg.j;
    problem.beta = beta;
    problem.xc = xc;
    problem.seed =
        site_occupations(thermal_density(eig_hermitian(exact_h_initial(cfg)), beta));
    problem.fixed_initial_state = cfg.tpf_fixed_initial_state;
    problem.tau = tau;
    problem.n_steps = steps;
    problem.tol = cfg.tpf_tol;
    problem.max_iter = cfg.tpf_max_iter;
    TpfResult tpf = tpf_solve(problem);
    report.tpf_iterations = tpf.iterations;
    h_initial = tpf.h_initial;
    h_final = tpf.h_final;
    propagator = tpf.propagator;
    const TpfProblem frozen = problem;
    std::vector<SiteOccupations> density = tpf.density;
    h_at = detail::tpf_provider(frozen, std::move(density));
  } else {
    propagator = cfg.tau > 0.0 ? evolve(h_at, tau, steps) : UnitaryMatrix4::identity();
  }

  // --- two-point-measurement statistics ------------------------------------
  const Spectrum spec0_raw = eig_hermitian(h_initial);
  const Spectrum spec_tau_raw = eig_hermitian(h_final);
  const ThermalEnsemble ens0_raw = thermal_ensemble(spec0_raw, beta);
  const ThermalEnsemble ens_tau_raw = thermal_ensemble(spec_tau_raw, beta);
  report.df_zero = free_energy_difference(ens0_raw, ens_tau_raw, beta);

  Spectrum spec0 = spec0_raw, spec_tau = spec_tau_raw;
  ThermalEnsemble ens0 = ens0_raw, ens_tau = ens_tau_raw;
  if (flags.fop) {
    const HermitianMatrix4 dh0(exact_h_initial(cfg).matrix() - h_initial.matrix());
    const HermitianMatrix4 dh_tau(exact_h_final(cfg).matrix() - h_final.matrix());
    spec0 = fop_correct(spec0_raw, dh0);
    spec_tau = fop_correct(spec_tau_raw, dh_tau);
    ens0 = thermal_ensemble(spec0, beta);
    ens_tau = thermal_ensemble(spec_tau, beta);
    report.df_fop = free_energy_difference(ens0, ens_tau, beta);
  }

  const RMat4 p = transition_matrix(propagator, spec0, spec_tau);
  report.distribution =
      work_distribution(ens0.probabilities, ens0.energies, p, ens_tau.energies,
                        cfg.work_merge_tol * cfg.j);
  report.mean_work = mean_work(report.distribution);
  report.extracted = -report.mean_work;
  report.entropy_zero = entropy_production(report.mean_work, report.df_zero, beta);
  if (flags.fop)
    report.entropy_fop = entropy_production(report.mean_work, report.df_fop, beta);
  report.jarzynski_residual =
      jarzynski_check(report.distribution, beta, ens0.log_z, ens_tau.log_z);
  report.adiabaticity = (Vec4::Ones() - p.diagonal()).maxCoeff();
  report.adiabatic = report.adiabaticity <= 0.01;

  // --- state bookkeeping ----------------------------------------------------
  const DensityMatrix4 rho0 = thermal_density(spec0, beta);
  report.n_initial = site_occupations(rho0);
  Mat4 rho_tau = propagator.matrix() * rho0.matrix() * propagator.matrix().adjoint();
  report.n_final = site_occupations(DensityMatrix4(rho_tau));
  if (flags.record_trajectory) {
    if (cfg.tau > 0.0) {
      report.trajectory =
          evolve_density_matrix(h_at, rho0, tau, steps).occupations;
    } else {
      report.trajectory = {report.n_initial};
    }
  }
  return report;
}

/// max_n (1 - p_{n|n}) for the exact protocol; small values mean the drive is
/// effectively adiabatic (threshold 0.01 used for the report flag).
inline double adiabaticity_diagnostic(const DimerConfig& cfg) {
  return run_single(cfg, Protocol::exact).adiabaticity;
}

}  // namespace dimerwork
