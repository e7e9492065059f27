#pragma once

// Small dense linear-algebra layer for the 4-dimensional half-filling sector:
// validated Hermitian/unitary/density wrappers, eigendecomposition, matrix
// exponentials of Hermitian generators, and the library error hierarchy.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dimerwork {

using Complex = std::complex<double>;
using Mat4 = Eigen::Matrix4cd;
using RMat4 = Eigen::Matrix4d;
using Vec4 = Eigen::Vector4d;
using CVec4 = Eigen::Vector4cd;

// ---------------------------------------------------------------------------
// Error hierarchy
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Caller handed in something outside the contract (bad flag, bad range).
struct InvalidInputError : Error {
  using Error::Error;
};

/// An internal numerical guarantee failed (hermiticity, stochasticity, ...).
struct NumericalError : Error {
  using Error::Error;
};

/// Time propagation produced a non-physical state (trace drift, non-finite).
struct PropagationError : Error {
  using Error::Error;
};

/// File/stream output failed.
struct IoError : Error {
  using Error::Error;
};

/// A fixed-point iteration ran out of its iteration budget.  Carries the
/// residual history so callers can inspect how the iteration behaved.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> residuals)
      : Error(what), residual_history_(std::move(residuals)) {}

  const std::vector<double>& residual_history() const { return residual_history_; }

 private:
  std::vector<double> residual_history_;
};

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

inline double max_abs(const Mat4& m) { return m.cwiseAbs().maxCoeff(); }

inline std::vector<double> linspace(double lo, double hi, int count) {
  if (count < 1) throw InvalidInputError("linspace: count must be >= 1");
  std::vector<double> grid(static_cast<std::size_t>(count));
  if (count == 1) {
    grid[0] = lo;
    return grid;
  }
  const double step = (hi - lo) / static_cast<double>(count - 1);
  for (int i = 0; i < count; ++i) grid[static_cast<std::size_t>(i)] = lo + step * i;
  grid.back() = hi;  // exact endpoint
  return grid;
}

// ---------------------------------------------------------------------------
// Validated matrix wrappers
// ---------------------------------------------------------------------------

/// 4x4 complex matrix checked (and symmetrized) to be Hermitian on entry.
class HermitianMatrix4 {
 public:
  static constexpr double tolerance = 1e-12;

  HermitianMatrix4() : m_(Mat4::Zero()) {}

  explicit HermitianMatrix4(const Mat4& m) {
    if (!m.allFinite()) throw NumericalError("HermitianMatrix4: non-finite entries");
    const double scale = std::max(1.0, max_abs(m));
    if (max_abs(m - m.adjoint()) > tolerance * scale)
      throw NumericalError("HermitianMatrix4: matrix is not Hermitian within tolerance");
    m_ = 0.5 * (m + m.adjoint());  // scrub roundoff asymmetry
  }

  const Mat4& matrix() const { return m_; }

 private:
  Mat4 m_;
};

/// 4x4 complex matrix checked to be unitary on entry.
class UnitaryMatrix4 {
 public:
  static constexpr double tolerance = 1e-10;

  explicit UnitaryMatrix4(const Mat4& u) : u_(u) {
    if (!u.allFinite()) throw NumericalError("UnitaryMatrix4: non-finite entries");
    if (max_abs(u.adjoint() * u - Mat4::Identity()) > tolerance)
      throw NumericalError("UnitaryMatrix4: matrix is not unitary within tolerance");
  }

  static UnitaryMatrix4 identity() { return UnitaryMatrix4(Mat4::Identity()); }

  const Mat4& matrix() const { return u_; }

 private:
  Mat4 u_;
};

/// 4x4 density matrix: Hermitian, unit trace within 1e-8.
class DensityMatrix4 {
 public:
  static constexpr double hermiticity_tolerance = 1e-10;
  static constexpr double trace_tolerance = 1e-8;

  explicit DensityMatrix4(const Mat4& rho) {
    if (!rho.allFinite()) throw NumericalError("DensityMatrix4: non-finite entries");
    if (max_abs(rho - rho.adjoint()) > hermiticity_tolerance)
      throw NumericalError("DensityMatrix4: matrix is not Hermitian within tolerance");
    const double trace = rho.trace().real();
    if (std::abs(trace - 1.0) > trace_tolerance)
      throw NumericalError("DensityMatrix4: trace deviates from 1 beyond tolerance");
    rho_ = 0.5 * (rho + rho.adjoint());
  }

  const Mat4& matrix() const { return rho_; }

 private:
  Mat4 rho_;
};

// ---------------------------------------------------------------------------
// Eigendecomposition
// ---------------------------------------------------------------------------

/// Eigendecomposition of a Hermitian 4x4.  `energies` ascending; column n of
/// `states` is the (orthonormal) eigenvector belonging to energies[n].
struct Spectrum {
  Vec4 energies;
  Mat4 states;
};

inline Spectrum eig_hermitian(const HermitianMatrix4& h) {
  Eigen::SelfAdjointEigenSolver<Mat4> solver(h.matrix());
  if (solver.info() != Eigen::Success)
    throw NumericalError("eig_hermitian: eigensolver did not converge");
  Spectrum spec{solver.eigenvalues(), solver.eigenvectors()};
  if (max_abs(spec.states.adjoint() * spec.states - Mat4::Identity()) > 1e-10)
    throw NumericalError("eig_hermitian: eigenvectors not orthonormal within 1e-10");
  for (int i = 0; i + 1 < 4; ++i)
    if (spec.energies[i] > spec.energies[i + 1])
      throw NumericalError("eig_hermitian: eigenvalues not sorted ascending");
  return spec;
}

/// exp(-i * H * t) through the spectral decomposition.
inline UnitaryMatrix4 expm_i(const HermitianMatrix4& h, double t) {
  const Spectrum spec = eig_hermitian(h);
  CVec4 phases;
  for (int i = 0; i < 4; ++i)
    phases[i] = std::exp(Complex(0.0, -spec.energies[i] * t));
  Mat4 u = spec.states * phases.asDiagonal() * spec.states.adjoint();
  return UnitaryMatrix4(u);
}

}  // namespace dimerwork
