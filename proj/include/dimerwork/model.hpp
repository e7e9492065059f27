#pragma once

// Two-site model at half filling in the S_z = 0 sector.  Basis order:
//   0: |ud, 0>   1: |u, d>   2: |d, u>   3: |0, ud>
// (u/d = up/down electron on site 1/site 2).  All builders return validated
// Hermitian matrices in this basis.

#include "dimerwork/config.hpp"
#include "dimerwork/numerics.hpp"

#include <cmath>
#include <utility>

namespace dimerwork {

struct SiteOccupations {
  double n1 = 1.0;
  double n2 = 1.0;
};

/// Per-site potential (site1, site2), units of j.
struct SitePotential {
  double site1 = 0.0;
  double site2 = 0.0;
};

/// n_1 = diag(2, 1, 1, 0) in this basis.
inline const Mat4& site1_number() {
  static const Mat4 op = (Mat4() << 2, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0).finished();
  return op;
}

/// n_2 = diag(0, 1, 1, 2).
inline const Mat4& site2_number() {
  static const Mat4 op = (Mat4() << 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 2).finished();
  return op;
}

/// Projector onto doubly occupied configurations: diag(1, 0, 0, 1).
inline const Mat4& doublon_projector() {
  static const Mat4 op = (Mat4() << 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1).finished();
  return op;
}

/// Linear bias ramp: delta1(t) = delta0 - (delta0 - delta_tau) * t / tau,
/// delta2 = -delta1.  Takes physical time (cfg.tau is stored in units of
/// 1/j, so the physical duration is cfg.tau / cfg.j).  For tau = 0 the t = 0
/// values are returned; the quench endpoint is `ramp_delta_final`.
inline std::pair<double, double> ramp_delta(double t, const DimerConfig& cfg) {
  const double tau_phys = cfg.tau / cfg.j;
  const double slop = 1e-12 * std::max(1.0, tau_phys);
  if (t < -slop || t > tau_phys + slop)
    throw InvalidInputError("ramp_delta: t outside [0, tau]");
  double d1 = cfg.delta0 * cfg.j;
  if (tau_phys > 0.0)
    d1 = (cfg.delta0 - (cfg.delta0 - cfg.delta_tau) * (t / tau_phys)) * cfg.j;
  return {d1, -d1};
}

/// Bias values at the start of the protocol.
inline std::pair<double, double> ramp_delta_initial(const DimerConfig& cfg) {
  return {cfg.delta0 * cfg.j, -cfg.delta0 * cfg.j};
}

/// Bias values at the end of the protocol.  Distinct from ramp_delta(tau)
/// only for tau = 0, where the protocol degenerates to a sudden quench whose
/// final measurement uses the ramp end point.
inline std::pair<double, double> ramp_delta_final(const DimerConfig& cfg) {
  return {cfg.delta_tau * cfg.j, -cfg.delta_tau * cfg.j};
}

/// Interacting Hamiltonian.  The bias couples to n_i/2, so the corner
/// diagonal entries are U + delta_i and the middle ones (delta1 + delta2)/2;
/// for the antisymmetric drive delta1 + delta2 = 0 the middles vanish.
/// Hopping: -J on (0,1) and (1,3), +J on (0,2) and (2,3).
inline HermitianMatrix4 build_exact_h(double u, double delta1, double delta2, double j) {
  const double mid = 0.5 * (delta1 + delta2);
  Mat4 h = Mat4::Zero();
  h(0, 0) = u + delta1;
  h(1, 1) = mid;
  h(2, 2) = mid;
  h(3, 3) = u + delta2;
  h(0, 1) = h(1, 0) = -j;
  h(0, 2) = h(2, 0) = j;
  h(1, 3) = h(3, 1) = -j;
  h(2, 3) = h(3, 2) = j;
  return HermitianMatrix4(h);
}

/// Effective single-particle Hamiltonian: the interacting builder with U = 0
/// and the bias replaced by the effective per-site potential.  Also serves as
/// the non-interacting Hamiltonian when handed the bare bias.
inline HermitianMatrix4 build_ks_h(double delta_ks1, double delta_ks2, double j) {
  return build_exact_h(0.0, delta_ks1, delta_ks2, j);
}

/// Perturbation restoring the interacting Hamiltonian on top of the effective
/// one: -sum_i (vh_i + vxc_i) n_i + U * doublon projector.
inline HermitianMatrix4 build_delta_h(const DimerConfig& cfg, const SitePotential& vh,
                                      const SitePotential& vxc) {
  const double v1 = vh.site1 + vxc.site1;
  const double v2 = vh.site2 + vxc.site2;
  Mat4 dh = -v1 * site1_number() - v2 * site2_number() + cfg.u * cfg.j * doublon_projector();
  return HermitianMatrix4(dh);
}

/// Site occupations of a density matrix; enforces particle conservation
/// (n1 + n2 = 2 within 1e-9).
inline SiteOccupations site_occupations(const DensityMatrix4& rho) {
  const double n1 = (rho.matrix() * site1_number()).trace().real();
  const double n2 = (rho.matrix() * site2_number()).trace().real();
  if (std::abs(n1 + n2 - 2.0) > 1e-9)
    throw NumericalError("site_occupations: n1 + n2 deviates from 2 beyond 1e-9");
  if (n1 < -1e-9 || n1 > 2.0 + 1e-9 || n2 < -1e-9 || n2 > 2.0 + 1e-9)
    throw NumericalError("site_occupations: occupation outside [0, 2]");
  return {n1, n2};
}

/// Occupations of a normalized pure state (no conservation check; used inside
/// self-consistency loops where the state is an exact eigenvector).
inline SiteOccupations occupations_of_state(const CVec4& psi) {
  const double n1 = (psi.adjoint() * site1_number() * psi).value().real();
  const double n2 = (psi.adjoint() * site2_number() * psi).value().real();
  return {n1, n2};
}

}  // namespace dimerwork
