#include <catch2/catch_amalgamated.hpp>

#include <dimerwork/dynamics.hpp>
#include <dimerwork/model.hpp>
#include <dimerwork/thermo.hpp>

#include "oracles.hpp"

#include <cmath>

using namespace dimerwork;
using Catch::Approx;

namespace {

/// antisymmetric linear ramp d1(t) = a + (b - a) t / tau, d2 = -d1
HamiltonianProvider ramp_provider(double a, double b, double tau, double j = 1.0) {
  return [=](double t) {
    const double d = a + (b - a) * t / tau;
    return build_ks_h(d, -d, j);
  };
}

}  // namespace

TEST_CASE("zero-duration evolution is the identity") {
  const UnitaryMatrix4 u = evolve(ramp_provider(1.0, 5.0, 1.0), 0.0, 100);
  REQUIRE(max_abs((u.matrix() - Mat4::Identity()).eval()) == Approx(0.0).margin(1e-15));
  REQUIRE_THROWS_AS(evolve(ramp_provider(1.0, 5.0, 1.0), -1.0, 100), InvalidInputError);
  REQUIRE_THROWS_AS(evolve(ramp_provider(1.0, 5.0, 1.0), 1.0, 0), InvalidInputError);
}

TEST_CASE("evolution under a constant hamiltonian is the plain exponential") {
  const HermitianMatrix4 h = build_exact_h(2.0, 1.0, -1.0, 1.0);
  const double tau = 1.7;
  const UnitaryMatrix4 u = evolve([&](double) { return h; }, tau, 37);
  const Mat4 ref = oracles::propagator(h.matrix(), tau);
  REQUIRE(max_abs((u.matrix() - ref).eval()) == Approx(0.0).margin(1e-11));
}

TEST_CASE("evolution composes over subintervals") {
  const double tau = 2.0;
  const auto h = ramp_provider(1.0, 10.0, tau);
  const UnitaryMatrix4 full = evolve(h, tau, 400);
  const UnitaryMatrix4 first = evolve(h, tau / 2, 200);
  auto shifted = [&](double t) { return h(t + tau / 2); };
  const UnitaryMatrix4 second = evolve(shifted, tau / 2, 200);
  REQUIRE(max_abs((second.matrix() * first.matrix() - full.matrix()).eval()) ==
          Approx(0.0).margin(1e-12));
}

TEST_CASE("propagator converges under step doubling") {
  // midpoint rule: second-order accurate, so halving dt shrinks the defect ~4x
  const double tau = 2.0;
  auto h = [&](double t) {
    const double d = 1.0 + 9.0 * t / tau;
    return build_exact_h(2.0, d, -d, 1.0);
  };
  const UnitaryMatrix4 coarse = evolve(h, tau, 2000);
  const UnitaryMatrix4 fine = evolve(h, tau, 4000);
  const UnitaryMatrix4 finest = evolve(h, tau, 8000);
  const double d1 = max_abs((coarse.matrix() - fine.matrix()).eval());
  const double d2 = max_abs((fine.matrix() - finest.matrix()).eval());
  REQUIRE(d1 < 1e-5);
  REQUIRE(d2 < 0.3 * d1);  // consistent with second-order convergence
  // the final-state overlap deviates only at second order of that defect
  const Spectrum s0 = eig_hermitian(h(0.0));
  const CVec4 a = coarse.matrix() * s0.states.col(0);
  const CVec4 b = fine.matrix() * s0.states.col(0);
  REQUIRE(std::abs(std::abs((a.adjoint() * b).value()) - 1.0) <= 1e-8);
}

TEST_CASE("a ground-state projector of a static hamiltonian stays put") {
  const HermitianMatrix4 h = build_exact_h(2.0, 1.0, -1.0, 1.0);
  const Spectrum s = eig_hermitian(h);
  const Mat4 proj = (s.states.col(0) * s.states.col(0).adjoint()).eval();
  const DensityTrajectory traj =
      evolve_density_matrix([&](double) { return h; }, DensityMatrix4(proj), 2.0, 150);
  for (const SiteOccupations& n : traj.occupations) {
    REQUIRE(n.n1 == Approx(traj.occupations.front().n1).margin(1e-10));
    REQUIRE(n.n2 == Approx(traj.occupations.front().n2).margin(1e-10));
  }
}

TEST_CASE("occupations match a fine-step integration") {
  // strong drive: compare the production step count against dt = 1e-4
  const double tau = 3.0;
  auto h = [&](double t) {
    const double d = 1.0 + 9.0 * t / tau;
    return build_exact_h(5.0, d, -d, 1.0);
  };
  const DensityMatrix4 rho0 = thermal_density(eig_hermitian(h(0.0)), 0.4);
  const DensityTrajectory coarse = evolve_density_matrix(h, rho0, tau, 2000);
  const DensityTrajectory fine = evolve_density_matrix(h, rho0, tau, 30000);
  REQUIRE(coarse.occupations.back().n1 == Approx(fine.occupations.back().n1).margin(1e-6));
  REQUIRE(coarse.occupations.back().n2 == Approx(fine.occupations.back().n2).margin(1e-6));
}

TEST_CASE("density trajectory conserves the stationary thermal state") {
  const HermitianMatrix4 h = build_exact_h(3.0, 1.0, -1.0, 1.0);
  const DensityMatrix4 rho0 = thermal_density(eig_hermitian(h), 0.4);
  const DensityTrajectory traj =
      evolve_density_matrix([&](double) { return h; }, rho0, 2.0, 200);
  REQUIRE(traj.occupations.size() == 201);
  const SiteOccupations n0 = traj.occupations.front();
  for (const SiteOccupations& n : traj.occupations) {
    REQUIRE(n.n1 == Approx(n0.n1).margin(1e-10));
    REQUIRE(n.n2 == Approx(n0.n2).margin(1e-10));
  }
  REQUIRE(traj.max_trace_drift < 1e-12);
}

TEST_CASE("density trajectory agrees with conjugation by the propagator") {
  const double tau = 1.5;
  const auto h = ramp_provider(1.0, 8.0, tau);
  const DensityMatrix4 rho0 = thermal_density(eig_hermitian(h(0.0)), 0.4);
  const DensityTrajectory traj = evolve_density_matrix(h, rho0, tau, 300);
  const UnitaryMatrix4 u = evolve(h, tau, 300);
  const Mat4 expect = (u.matrix() * rho0.matrix() * u.matrix().adjoint()).eval();
  REQUIRE(max_abs((traj.final_state - expect).eval()) == Approx(0.0).margin(1e-12));
  // occupations converge under step refinement
  const DensityTrajectory fine = evolve_density_matrix(h, rho0, tau, 600);
  REQUIRE(traj.occupations.back().n1 == Approx(fine.occupations.back().n1).margin(1e-6));
}

TEST_CASE("self-consistent propagation rejects degenerate setups") {
  TpfProblem p;
  p.effective_deltas = [](double t) { return std::pair<double, double>(1.0 + t, -1.0 - t); };
  p.tau = 0.0;
  REQUIRE_THROWS_AS(tpf_solve(p), InvalidInputError);
  p.tau = 1.0;
  p.n_steps = 1;
  REQUIRE_THROWS_AS(tpf_solve(p), InvalidInputError);
}

TEST_CASE("self-consistent propagation collapses to the bare dynamics without interaction") {
  // u = 0 silences every potential, so the loop settles in two sweeps
  TpfProblem p;
  const double tau = 2.0;
  p.effective_deltas = [tau](double t) {
    const double d = 1.0 + 9.0 * t / tau;
    return std::pair<double, double>(d, -d);
  };
  p.u = 0.0;
  p.j = 1.0;
  p.beta = 0.4;
  p.xc = XcFunctional::plda;
  p.tau = tau;
  p.n_steps = 400;
  const TpfResult res = tpf_solve(p);
  REQUIRE(res.iterations <= 3);
  const auto bare = ramp_provider(1.0, 10.0, tau);
  const UnitaryMatrix4 ref = evolve(bare, tau, 400);
  REQUIRE(max_abs((res.propagator.matrix() - ref.matrix()).eval()) ==
          Approx(0.0).margin(1e-10));
  REQUIRE(max_abs((res.h_initial.matrix() - bare(0.0).matrix()).eval()) ==
          Approx(0.0).margin(1e-12));
  REQUIRE(max_abs((res.h_final.matrix() - bare(tau).matrix()).eval()) ==
          Approx(0.0).margin(1e-12));
}

TEST_CASE("self-consistent propagation converges and closes on itself") {
  TpfProblem p;
  const double tau = 2.0;
  p.effective_deltas = [tau](double t) {
    const double d = 1.0 + 9.0 * t / tau;
    return std::pair<double, double>(d, -d);
  };
  p.u = 3.0;
  p.j = 1.0;
  p.beta = 0.4;
  p.xc = XcFunctional::plda;
  p.tau = tau;
  p.n_steps = 400;
  p.tol = 1e-7;
  const TpfResult res = tpf_solve(p);
  REQUIRE(res.iterations >= 2);
  REQUIRE(res.density.size() == 401);
  REQUIRE(res.residual_history.back() <= 1e-7);
  // one more propagation through the converged fields reproduces the
  // trajectory within the tolerance scale
  const HamiltonianProvider h = detail::tpf_provider(p, res.density);
  const DensityMatrix4 rho0 = thermal_density(eig_hermitian(h(0.0)), p.beta);
  const DensityTrajectory traj = evolve_density_matrix(h, rho0, p.tau, p.n_steps);
  double metric = 0.0;
  for (std::size_t k = 1; k + 1 < res.density.size(); ++k)
    metric += std::abs(traj.occupations[k].n1 - res.density[k].n1);
  metric /= static_cast<double>(res.density.size());
  REQUIRE(metric <= 1e-6);
}

TEST_CASE("self-consistent propagation honors the frozen-initial-state switch") {
  TpfProblem p;
  const double tau = 1.0;
  p.effective_deltas = [tau](double t) {
    const double d = 1.0 + 4.0 * t / tau;
    return std::pair<double, double>(d, -d);
  };
  p.u = 2.0;
  p.j = 1.0;
  p.beta = 0.4;
  p.xc = XcFunctional::plda;
  p.tau = tau;
  p.n_steps = 300;
  const TpfResult live = tpf_solve(p);
  p.fixed_initial_state = true;
  const TpfResult frozen = tpf_solve(p);
  REQUIRE(live.iterations >= 1);
  REQUIRE(frozen.iterations >= 1);
  // both settle, and at this moderate coupling on nearly the same trajectory
  REQUIRE(live.density.back().n1 == Approx(frozen.density.back().n1).margin(5e-2));
}

TEST_CASE("self-consistent propagation reports an exhausted iteration budget") {
  TpfProblem p;
  const double tau = 2.0;
  p.effective_deltas = [tau](double t) {
    const double d = 1.0 + 19.0 * t / tau;
    return std::pair<double, double>(d, -d);
  };
  p.u = 10.0;
  p.j = 1.0;
  p.beta = 0.4;
  p.xc = XcFunctional::plda;
  p.tau = tau;
  p.n_steps = 200;
  p.max_iter = 3;
  try {
    tpf_solve(p);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    REQUIRE(e.residual_history().size() == 3);
  }
}
