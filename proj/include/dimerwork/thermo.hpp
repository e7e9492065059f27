#pragma once

// Thermal states, two-point-measurement work statistics, first-order spectrum
// corrections, and the fluctuation-theorem residual.

#include "dimerwork/numerics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <vector>

namespace dimerwork {

// ---------------------------------------------------------------------------
// Thermal ensembles
// ---------------------------------------------------------------------------

struct ThermalEnsemble {
  Vec4 probabilities;  ///< Gibbs weights, sum = 1
  Vec4 energies;       ///< the spectrum the weights belong to
  double log_z = 0.0;  ///< log partition function
};

/// Gibbs ensemble over a spectrum; overflow-safe via ground-state shift.
inline ThermalEnsemble thermal_ensemble(const Spectrum& spec, double beta) {
  if (!(beta > 0.0)) throw InvalidInputError("thermal_ensemble: beta must be > 0");
  const double e0 = spec.energies[0];
  Vec4 w;
  for (int i = 0; i < 4; ++i) w[i] = std::exp(-beta * (spec.energies[i] - e0));
  const double zs = w.sum();
  return {w / zs, spec.energies, -beta * e0 + std::log(zs)};
}

/// Thermal density matrix of the same spectrum.
inline DensityMatrix4 thermal_density(const Spectrum& spec, double beta) {
  const ThermalEnsemble ens = thermal_ensemble(spec, beta);
  CVec4 p;
  for (int i = 0; i < 4; ++i) p[i] = ens.probabilities[i];
  Mat4 rho = spec.states * p.asDiagonal() * spec.states.adjoint();
  return DensityMatrix4(rho);
}

/// Diagonal of rho in the eigenbasis of `spec`: the projective-measurement
/// outcome probabilities for an arbitrary initial state.
inline Vec4 measurement_probabilities(const Spectrum& spec, const DensityMatrix4& rho) {
  Vec4 p;
  for (int i = 0; i < 4; ++i)
    p[i] = (spec.states.col(i).adjoint() * rho.matrix() * spec.states.col(i)).value().real();
  const double sum = p.sum();
  if (std::abs(sum - 1.0) > 1e-8)
    throw NumericalError("measurement_probabilities: probabilities do not sum to 1");
  for (int i = 0; i < 4; ++i) p[i] = std::max(0.0, p[i]);
  return p;
}

// ---------------------------------------------------------------------------
// Transition matrix
// ---------------------------------------------------------------------------

/// P(m, n) = |<m_final| U |n_initial>|^2.  Validated doubly stochastic.
inline RMat4 transition_matrix(const UnitaryMatrix4& u, const Spectrum& initial,
                               const Spectrum& final_spec) {
  const Mat4 overlap = final_spec.states.adjoint() * u.matrix() * initial.states;
  const RMat4 p = overlap.cwiseAbs2();
  for (int i = 0; i < 4; ++i) {
    if (std::abs(p.row(i).sum() - 1.0) > 1e-10 || std::abs(p.col(i).sum() - 1.0) > 1e-10)
      throw NumericalError("transition_matrix: matrix is not doubly stochastic within 1e-10");
  }
  return p;
}

// ---------------------------------------------------------------------------
// Work distribution
// ---------------------------------------------------------------------------

struct WorkAtom {
  double work = 0.0;
  double prob = 0.0;
};

struct WorkDistribution {
  std::vector<WorkAtom> atoms;  ///< sorted by work, nearby values merged
};

/// Assemble P(W) from initial probabilities p0 over energies e0, transition
/// matrix p(m, n), and final energies ef.  Zero-probability transitions are
/// dropped; atoms closer than merge_tol are merged (probability-weighted work).
inline WorkDistribution work_distribution(const Vec4& p0, const Vec4& e0, const RMat4& p,
                                          const Vec4& ef, double merge_tol = 1e-9) {
  std::vector<WorkAtom> raw;
  raw.reserve(16);
  for (int n = 0; n < 4; ++n)
    for (int m = 0; m < 4; ++m) {
      const double prob = p0[n] * p(m, n);
      if (prob > 0.0) raw.push_back({ef[m] - e0[n], prob});
    }
  std::sort(raw.begin(), raw.end(),
            [](const WorkAtom& a, const WorkAtom& b) { return a.work < b.work; });
  WorkDistribution wd;
  for (const WorkAtom& a : raw) {
    if (!wd.atoms.empty() && a.work - wd.atoms.back().work <= merge_tol) {
      WorkAtom& last = wd.atoms.back();
      const double total = last.prob + a.prob;
      if (total > 0.0) last.work = (last.work * last.prob + a.work * a.prob) / total;
      last.prob = total;
    } else {
      wd.atoms.push_back(a);
    }
  }
  double sum = 0.0;
  for (const WorkAtom& a : wd.atoms) sum += a.prob;
  if (std::abs(sum - 1.0) > 1e-10)
    throw NumericalError("work_distribution: probabilities do not sum to 1 within 1e-10");
  return wd;
}

inline WorkDistribution work_distribution(const ThermalEnsemble& ens0, const RMat4& p,
                                          const Vec4& ef, double merge_tol = 1e-9) {
  return work_distribution(ens0.probabilities, ens0.energies, p, ef, merge_tol);
}

inline double mean_work(const WorkDistribution& wd) {
  double w = 0.0;
  for (const WorkAtom& a : wd.atoms) w += a.work * a.prob;
  return w;
}

/// Work extracted from the system: -<W>.
inline double extracted_work(const WorkDistribution& wd) { return -mean_work(wd); }

/// F_final - F_initial from the two log partition functions.
inline double free_energy_difference(const ThermalEnsemble& initial,
                                     const ThermalEnsemble& final_ens, double beta) {
  return -(final_ens.log_z - initial.log_z) / beta;
}

/// <Sigma> = beta (<W> - dF).
inline double entropy_production(double mean_w, double delta_f, double beta) {
  return beta * (mean_w - delta_f);
}

/// <e^{-beta W}> * Z_initial / Z_final - 1; zero when the fluctuation theorem
/// holds exactly for the supplied spectra.
inline double jarzynski_check(const WorkDistribution& wd, double beta, double log_z_initial,
                              double log_z_final) {
  double avg = 0.0;
  for (const WorkAtom& a : wd.atoms) avg += a.prob * std::exp(-beta * a.work);
  return avg * std::exp(log_z_initial - log_z_final) - 1.0;
}

// ---------------------------------------------------------------------------
// First-order spectrum correction
// ---------------------------------------------------------------------------

/// First-order correction of a spectrum under perturbation dh: plain
/// expectation values on non-degenerate levels, subspace diagonalization on
/// (near-)degenerate groups (adjacent gap <= degeneracy_tol).  States are
/// rotated accordingly and the result is re-sorted ascending.
inline Spectrum fop_correct(const Spectrum& spec, const HermitianMatrix4& dh,
                            double degeneracy_tol = 1e-9) {
  Vec4 corrected;
  Mat4 states = spec.states;
  int a = 0;
  while (a < 4) {
    int b = a + 1;
    while (b < 4 && spec.energies[b] - spec.energies[b - 1] <= degeneracy_tol) ++b;
    const int k = b - a;
    if (k == 1) {
      const Complex expect =
          (states.col(a).adjoint() * dh.matrix() * states.col(a)).value();
      corrected[a] = spec.energies[a] + expect.real();
    } else {
      Eigen::MatrixXcd block(k, k);
      for (int i = 0; i < k; ++i)
        for (int l = 0; l < k; ++l)
          block(i, l) = (states.col(a + i).adjoint() * dh.matrix() * states.col(a + l)).value();
      block = 0.5 * (block + block.adjoint().eval());
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(block);
      if (solver.info() != Eigen::Success)
        throw NumericalError("fop_correct: subspace diagonalization failed");
      Eigen::MatrixXcd sub = states.block(0, a, 4, k) * solver.eigenvectors();
      states.block(0, a, 4, k) = sub;
      for (int i = 0; i < k; ++i)
        corrected[a + i] = spec.energies[a + i] + solver.eigenvalues()[i];
    }
    a = b;
  }
  // corrections can reorder levels across groups; restore ascending order
  std::array<int, 4> idx{0, 1, 2, 3};
  std::stable_sort(idx.begin(), idx.end(),
                   [&corrected](int i, int l) { return corrected[i] < corrected[l]; });
  Spectrum out;
  for (int i = 0; i < 4; ++i) {
    out.energies[i] = corrected[idx[i]];
    out.states.col(i) = states.col(idx[i]);
  }
  return out;
}

}  // namespace dimerwork
