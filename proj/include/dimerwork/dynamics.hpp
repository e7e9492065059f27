#pragma once

// Time evolution: midpoint piecewise-exponential propagators, density-matrix
// trajectories, and the self-consistent time propagation of the effective
// Hamiltonian (time-local functionals evaluated on the instantaneous density).

#include "dimerwork/config.hpp"
#include "dimerwork/functionals.hpp"
#include "dimerwork/model.hpp"
#include "dimerwork/numerics.hpp"
#include "dimerwork/thermo.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

namespace dimerwork {

using HamiltonianProvider = std::function<HermitianMatrix4(double)>;

/// U(tau, 0) = product over k of exp(-i H(t_k + dt/2) dt), applied in time
/// order; tau = 0 returns the identity (sudden quench).  Times are physical
/// (units 1/j when energies are in units of j).
inline UnitaryMatrix4 evolve(const HamiltonianProvider& h_at, double tau, int n_steps) {
  if (tau < 0.0) throw InvalidInputError("evolve: tau must be >= 0");
  if (tau == 0.0) return UnitaryMatrix4::identity();
  if (n_steps < 1) throw InvalidInputError("evolve: n_steps must be >= 1");
  const double dt = tau / n_steps;
  Mat4 u = Mat4::Identity();
  for (int k = 0; k < n_steps; ++k) {
    const double t_mid = (k + 0.5) * dt;
    u = expm_i(h_at(t_mid), dt).matrix() * u;
  }
  if (!u.allFinite()) throw PropagationError("evolve: propagator became non-finite");
  return UnitaryMatrix4(u);
}

struct DensityTrajectory {
  std::vector<SiteOccupations> occupations;  ///< n_steps + 1 grid points
  Mat4 final_state = Mat4::Zero();
  double max_trace_drift = 0.0;
};

/// Step-wise evolution of a density matrix recording the site occupations on
/// every grid point.  Trace drift beyond 1e-8 raises PropagationError.
inline DensityTrajectory evolve_density_matrix(const HamiltonianProvider& h_at,
                                               const DensityMatrix4& rho0, double tau,
                                               int n_steps) {
  if (tau < 0.0) throw InvalidInputError("evolve_density_matrix: tau must be >= 0");
  auto occupations_of = [](const Mat4& rho) -> SiteOccupations {
    const double n1 = (rho * site1_number()).trace().real();
    const double n2 = (rho * site2_number()).trace().real();
    if (std::abs(n1 + n2 - 2.0) > 1e-8)
      throw PropagationError("evolve_density_matrix: particle number drifted");
    return {n1, n2};
  };
  DensityTrajectory out;
  Mat4 rho = rho0.matrix();
  out.occupations.push_back(occupations_of(rho));
  if (tau == 0.0) {
    out.final_state = rho;
    return out;
  }
  if (n_steps < 1) throw InvalidInputError("evolve_density_matrix: n_steps must be >= 1");
  const double dt = tau / n_steps;
  out.occupations.reserve(static_cast<std::size_t>(n_steps) + 1);
  for (int k = 0; k < n_steps; ++k) {
    const double t_mid = (k + 0.5) * dt;
    const Mat4 u = expm_i(h_at(t_mid), dt).matrix();
    rho = u * rho * u.adjoint();
    const double drift = std::abs(rho.trace().real() - 1.0) + std::abs(rho.trace().imag());
    out.max_trace_drift = std::max(out.max_trace_drift, drift);
    if (!rho.allFinite() || drift > 1e-8)
      throw PropagationError("evolve_density_matrix: trace drift beyond 1e-8");
    out.occupations.push_back(occupations_of(rho));
  }
  out.final_state = rho;
  return out;
}

// ---------------------------------------------------------------------------
// Self-consistent time propagation (time-local functionals)
// ---------------------------------------------------------------------------

struct TpfProblem {
  std::function<std::pair<double, double>(double)> effective_deltas;  ///< already scaled
  double u = 0.0;    ///< physical interaction energy
  double j = 1.0;    ///< hopping energy
  double beta = 0.4; ///< physical inverse temperature
  XcFunctional xc = XcFunctional::plda;
  SiteOccupations seed{1.0, 1.0};  ///< constant seed trajectory (exact initial density)
  bool fixed_initial_state = false;
  double tau = 1.0;  ///< physical duration, must be > 0
  int n_steps = 2000;
  double tol = 1e-6;
  int max_iter = 200;
};

struct TpfResult {
  std::vector<SiteOccupations> density;  ///< converged trajectory, n_steps + 1 points
  UnitaryMatrix4 propagator = UnitaryMatrix4::identity();
  HermitianMatrix4 h_initial;
  HermitianMatrix4 h_final;
  int iterations = 0;
  std::vector<double> residual_history;
};

namespace detail {

/// Effective Hamiltonian provider for a fixed density trajectory, with linear
/// interpolation of the occupations between grid points.
inline HamiltonianProvider tpf_provider(const TpfProblem& p,
                                        std::vector<SiteOccupations> density) {
  const double dt = p.tau / p.n_steps;
  return [p, density = std::move(density), dt](double t) {
    const double x = std::clamp(t / dt, 0.0, static_cast<double>(density.size() - 1));
    const auto k = static_cast<std::size_t>(
        std::min<double>(std::floor(x), static_cast<double>(density.size() - 2)));
    const double w = x - static_cast<double>(k);
    const SiteOccupations n{(1.0 - w) * density[k].n1 + w * density[k + 1].n1,
                            (1.0 - w) * density[k].n2 + w * density[k + 1].n2};
    const SitePotential v = total(ks_potentials(n, p.u, p.j, p.xc));
    const auto d = p.effective_deltas(t);
    return build_ks_h(d.first + v.site1, d.second + v.site2, p.j);
  };
}

}  // namespace detail

/// Iterate: assemble the effective Hamiltonian from the current density
/// trajectory, thermalize the initial state against it (unless frozen),
/// propagate, and compare trajectories.  Residual metric: per-site sum of
/// |change| over interior grid points divided by (n_steps + 1).  A stalling
/// residual engages under-relaxed trajectory mixing (factor 0.7, repeated).
inline TpfResult tpf_solve(const TpfProblem& p) {
  if (!(p.tau > 0.0))
    throw InvalidInputError("tpf_solve: tau must be > 0 (tau = 0 degenerates to the "
                            "zero-order sudden quench)");
  if (p.n_steps < 2) throw InvalidInputError("tpf_solve: n_steps must be >= 2");

  std::vector<SiteOccupations> n_traj(static_cast<std::size_t>(p.n_steps) + 1, p.seed);
  std::vector<double> history;
  std::optional<DensityMatrix4> frozen_rho0;
  double mix = 1.0;
  double best = std::numeric_limits<double>::infinity();
  int bad_streak = 0;

  for (int iter = 1; iter <= p.max_iter; ++iter) {
    const HamiltonianProvider h_at = detail::tpf_provider(p, n_traj);
    DensityMatrix4 rho0 = [&]() {
      if (p.fixed_initial_state && frozen_rho0) return *frozen_rho0;
      DensityMatrix4 rho = thermal_density(eig_hermitian(h_at(0.0)), p.beta);
      if (p.fixed_initial_state) frozen_rho0 = rho;
      return rho;
    }();
    const DensityTrajectory traj = evolve_density_matrix(h_at, rho0, p.tau, p.n_steps);

    double metric1 = 0.0, metric2 = 0.0;
    for (std::size_t k = 1; k + 1 < n_traj.size(); ++k) {
      metric1 += std::abs(traj.occupations[k].n1 - n_traj[k].n1);
      metric2 += std::abs(traj.occupations[k].n2 - n_traj[k].n2);
    }
    const double metric = std::max(metric1, metric2) / static_cast<double>(n_traj.size());
    history.push_back(metric);

    if (metric <= p.tol) {
      TpfResult out;
      out.density = traj.occupations;
      const HamiltonianProvider h_conv = detail::tpf_provider(p, out.density);
      out.propagator = evolve(h_conv, p.tau, p.n_steps);
      out.h_initial = h_conv(0.0);
      out.h_final = h_conv(p.tau);
      out.iterations = iter;
      out.residual_history = std::move(history);
      return out;
    }

    if (metric >= 0.999 * best) {
      if (++bad_streak >= 10) {
        mix = std::max(0.7 * mix, 0.02);
        bad_streak = 0;
      }
    } else {
      bad_streak = 0;
    }
    best = std::min(best, metric);

    for (std::size_t k = 0; k < n_traj.size(); ++k) {
      n_traj[k].n1 += mix * (traj.occupations[k].n1 - n_traj[k].n1);
      n_traj[k].n2 += mix * (traj.occupations[k].n2 - n_traj[k].n2);
    }
  }
  throw ConvergenceError("tpf_solve: self-consistent propagation did not converge", history);
}

}  // namespace dimerwork
