#pragma once

// Density functionals for the two-site model: Hartree potential, a local
// density exchange-correlation form ("plda"), a parametrized correlation
// energy with its potential ("par"), and the ground-state self-consistent
// loop that ties them to the effective Hamiltonian.

#include "dimerwork/config.hpp"
#include "dimerwork/model.hpp"
#include "dimerwork/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

namespace dimerwork {

struct KsPotential {
  SitePotential hartree;
  SitePotential xc;
};

inline SitePotential total(const KsPotential& v) {
  return {v.hartree.site1 + v.xc.site1, v.hartree.site2 + v.xc.site2};
}

/// V_H,i = U * n_i / 2.
inline SitePotential hartree_potential(const SiteOccupations& n, double u) {
  return {0.5 * u * n.n1, 0.5 * u * n.n2};
}

/// E_xc = -2^(-4/3) * U * (n1^(4/3) + n2^(4/3)).
inline double plda_exc(const SiteOccupations& n, double u) {
  const double c = std::pow(2.0, -4.0 / 3.0);
  return -c * u * (std::pow(n.n1, 4.0 / 3.0) + std::pow(n.n2, 4.0 / 3.0));
}

/// V_xc,i = d E_xc / d n_i = -(4/3) * 2^(-4/3) * U * n_i^(1/3).
inline SitePotential plda_vxc(const SiteOccupations& n, double u) {
  const double c = (4.0 / 3.0) * std::pow(2.0, -4.0 / 3.0) * u;
  return {-c * std::cbrt(n.n1), -c * std::cbrt(n.n2)};
}

// ---------------------------------------------------------------------------
// Parametrized correlation energy (dimensionless core)
// ---------------------------------------------------------------------------

/// Intermediates of the parametrized correlation formula, all dimensionless.
/// delta = |n1 - n2| / 2 in [0, 1]; u = U / (2 J).
struct ParInternals {
  double delta = 0.0, u = 0.0;
  double g0 = 0.0, dg0 = 0.0, dh0 = 0.0;
  double g1 = 0.0, h1 = 0.0, f1 = 0.0;
  double ts = 0.0, ehx = 0.0;
  double ec = 0.0;  ///< correlation energy in units of 2J
};

namespace detail {

inline double par_h(double g, double delta) {
  const double denom = 2.0 * (g * g + delta * delta);
  if (denom < 1e-300) return 0.0;
  const double s = std::sqrt(std::max(0.0, 1.0 - g * g - delta * delta));
  return (g * g * (1.0 - s) + 2.0 * delta * delta) / denom;
}

inline double par_dh(double g, double delta) {
  const double g2 = g * g, d2 = delta * delta;
  const double s = std::sqrt(std::max(1e-300, 1.0 - g2 - d2));
  const double num = g * (g2 * g2 + 3.0 * g2 * d2 + 2.0 * d2 * (d2 - 1.0 - s));
  const double den = 2.0 * (g2 + d2) * (g2 + d2) * s;
  return num / den;
}

}  // namespace detail

inline ParInternals par_internals(double delta, double u) {
  ParInternals p;
  p.delta = std::clamp(delta, 0.0, 1.0);
  p.u = u;
  p.ts = -std::sqrt(std::max(0.0, 1.0 - p.delta * p.delta));
  p.ehx = 0.5 * u * (1.0 + p.delta * p.delta);
  if (u <= 0.0 || p.delta >= 1.0 - 1e-12) return p;  // no correlation

  const double d = p.delta;
  const double a21 = 0.5 * std::sqrt(0.5 * (1.0 - d) * d);
  const double a12 = 0.5 * (1.0 - d);
  const double a22 = 0.5 * a12;
  // a11 = a21 * (1 + 1/d) carries a 1/d pole; only d*a1 is ever needed:
  const double d_a1 = (1.0 + d) * a21 + u * d * a12;
  const double a2 = a21 + u * a22;
  const double q = (1.0 + d) * (1.0 + d) * (1.0 + d) * u;  // (1+d)^3 u
  const double den = 1.0 + q * a2;

  p.g0 = std::sqrt((1.0 - d) * (1.0 + d + q * d_a1) / den);
  const double brace =
      a12 * (1.5 * d - 1.0 + d * q * a2) - (d * a22 + q * a22 * d_a1);
  p.dg0 = (1.0 - d) * (1.0 + d) * (1.0 + d) * (1.0 + d) * u * u * brace /
          (2.0 * p.g0 * den * den);
  p.dh0 = detail::par_dh(p.g0, d);
  p.g1 = p.g0 + (u * p.dh0 - 1.0) * p.dg0;
  p.h1 = detail::par_h(p.g1, d);
  p.f1 = -p.g1 + u * p.h1;
  p.ec = p.f1 - p.ts - p.ehx;
  return p;
}

/// Parametrized correlation energy, physical units.
inline double par_ec(const SiteOccupations& n, double u, double j) {
  if (!(j > 0.0)) throw InvalidInputError("par_ec: j must be > 0");
  const double delta = 0.5 * std::abs(n.n1 - n.n2);
  return 2.0 * j * par_internals(delta, u / (2.0 * j)).ec;
}

/// Correlation potential by finite differences of par_ec in delta.
/// Central step h = 1e-6; one-sided toward increasing delta when delta < h
/// (and toward decreasing delta near full polarization).  Site values are
/// antisymmetric, so the pair is symmetric under site swap; equal occupations
/// give (0, 0).
inline SitePotential par_vc(const SiteOccupations& n, double u, double j) {
  if (!(j > 0.0)) throw InvalidInputError("par_vc: j must be > 0");
  const double h = 1e-6;
  const double delta = std::clamp(0.5 * std::abs(n.n1 - n.n2), 0.0, 1.0);
  const double sign = n.n1 > n.n2 ? 1.0 : (n.n1 < n.n2 ? -1.0 : 0.0);
  if (sign == 0.0) return {0.0, 0.0};
  const double ud = u / (2.0 * j);
  auto ec = [&](double d) { return 2.0 * j * par_internals(std::clamp(d, 0.0, 1.0), ud).ec; };
  double slope;
  if (delta < h)
    slope = (ec(delta + h) - ec(delta)) / h;
  else if (delta > 1.0 - 2.0 * h)
    slope = (ec(delta) - ec(delta - h)) / h;
  else
    slope = (ec(delta + h) - ec(delta - h)) / (2.0 * h);
  const double v1 = 0.5 * sign * slope;  // d(delta)/d(n1) = sign/2
  return {v1, -v1};
}

/// Hartree + chosen exchange-correlation potential at a given density.
inline KsPotential ks_potentials(const SiteOccupations& n, double u, double j, XcFunctional xc) {
  KsPotential v;
  v.hartree = hartree_potential(n, u);
  switch (xc) {
    case XcFunctional::none: v.xc = {0.0, 0.0}; break;
    case XcFunctional::plda: v.xc = plda_vxc(n, u); break;
    case XcFunctional::par: v.xc = par_vc(n, u, j); break;
  }
  return v;
}

// ---------------------------------------------------------------------------
// Damped fixed-point driver
// ---------------------------------------------------------------------------

struct FixedPointOptions {
  double tol = 1e-10;
  int max_iter = 10000;
  double alpha = 0.5;            ///< initial mixing
  double alpha_floor = 1.0 / 1024.0;
};

struct FixedPointResult {
  SiteOccupations n;
  int iterations = 0;
  std::vector<double> residuals;
};

/// Damped iteration n <- n + alpha (F(n) - n).  The mixing halves whenever
/// the residual stops contracting (period-2 oscillations appear at strong
/// coupling where the undamped map has a steep negative slope).
template <class Map>
FixedPointResult damped_fixed_point(Map&& map, SiteOccupations seed,
                                    const FixedPointOptions& opt, const char* label) {
  SiteOccupations n = seed;
  double alpha = opt.alpha;
  std::vector<double> residuals;
  residuals.reserve(64);
  int stall = 0;
  for (int iter = 1; iter <= opt.max_iter; ++iter) {
    const SiteOccupations next = map(n);
    const double r = std::max(std::abs(next.n1 - n.n1), std::abs(next.n2 - n.n2));
    residuals.push_back(r);
    if (r <= opt.tol) return {next, iter, std::move(residuals)};
    const std::size_t k = residuals.size();
    if (k >= 3 && residuals[k - 1] > 0.995 * residuals[k - 3]) {
      if (++stall >= 4) {
        alpha = std::max(0.5 * alpha, opt.alpha_floor);
        stall = 0;
      }
    } else {
      stall = 0;
    }
    n.n1 += alpha * (next.n1 - n.n1);
    n.n2 += alpha * (next.n2 - n.n2);
  }
  throw ConvergenceError(std::string(label) + ": fixed point did not converge", residuals);
}

// ---------------------------------------------------------------------------
// Ground-state self-consistency
// ---------------------------------------------------------------------------

struct ScfResult {
  SiteOccupations n;
  KsPotential v;
  int iterations = 0;
  std::vector<double> residuals;
};

/// Ground-state self-consistent density: fixed point of
///   n -> occupations of the ground state of H_eff[delta + V_H(n) + V_xc(n)].
inline ScfResult ks_scf(double delta1, double delta2, double u, double j, XcFunctional xc,
                        SiteOccupations seed = {1.0, 1.0}, double tol = 1e-10,
                        int max_iter = 10000) {
  if (!(j > 0.0)) throw InvalidInputError("ks_scf: j must be > 0");
  auto map = [&](const SiteOccupations& n) {
    const SitePotential v = total(ks_potentials(n, u, j, xc));
    const Spectrum s = eig_hermitian(build_ks_h(delta1 + v.site1, delta2 + v.site2, j));
    return occupations_of_state(s.states.col(0));
  };
  FixedPointOptions opt;
  opt.tol = tol;
  opt.max_iter = max_iter;
  FixedPointResult res = damped_fixed_point(map, seed, opt, "ks_scf");
  return {res.n, ks_potentials(res.n, u, j, xc), res.iterations, std::move(res.residuals)};
}

}  // namespace dimerwork
