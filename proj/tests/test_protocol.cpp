#include <catch2/catch_amalgamated.hpp>

#include <dimerwork/protocol.hpp>

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace dimerwork;
using Catch::Approx;

namespace {

DimerConfig quick_cfg(double u, double tau, int steps = 400) {
  DimerConfig cfg;
  cfg.u = u;
  cfg.tau = tau;
  cfg.n_steps = steps;
  return cfg;
}

}  // namespace

TEST_CASE("convention scaling of the protocol bias") {
  DimerConfig cfg;
  cfg.delta_convention = DeltaConvention::half;
  auto half = effective_deltas_initial(cfg);
  REQUIRE(half.first == Approx(0.5).margin(1e-14));
  REQUIRE(half.second == Approx(-0.5).margin(1e-14));
  cfg.delta_convention = DeltaConvention::full;
  auto full = effective_deltas_initial(cfg);
  REQUIRE(full.first == Approx(1.0).margin(1e-14));
  REQUIRE(full.second == Approx(-1.0).margin(1e-14));
  // the convention reaches the dynamics: runs differ
  const SingleReport a = run_single(quick_cfg(2.0, 1.0), Protocol::exact);
  DimerConfig cfg5 = quick_cfg(2.0, 1.0);
  cfg5.delta_convention = DeltaConvention::half;
  const SingleReport b = run_single(cfg5, Protocol::exact);
  REQUIRE(std::abs(a.mean_work - b.mean_work) > 1e-3);
}

TEST_CASE("mean work equals the energy balance of the propagated state") {
  const DimerConfig cfg = quick_cfg(2.0, 1.0, 500);
  const SingleReport report = run_single(cfg, Protocol::exact);
  const double beta = cfg.beta / cfg.j;
  const HermitianMatrix4 h0 = exact_h_initial(cfg);
  const HermitianMatrix4 hf = exact_h_final(cfg);
  const DensityMatrix4 rho0 = thermal_density(eig_hermitian(h0), beta);
  const UnitaryMatrix4 u =
      evolve([&](double t) { return exact_h_at(cfg, t); }, cfg.tau / cfg.j, 500);
  const Mat4 rho_tau = (u.matrix() * rho0.matrix() * u.matrix().adjoint()).eval();
  const double direct = (rho_tau * hf.matrix()).trace().real() -
                        (rho0.matrix() * h0.matrix()).trace().real();
  REQUIRE(report.mean_work == Approx(direct).margin(1e-9));
  REQUIRE(report.extracted == Approx(-report.mean_work).margin(1e-15));
}

TEST_CASE("every scheme collapses onto the exact dynamics without interaction") {
  const DimerConfig cfg = quick_cfg(0.0, 1.0, 300);
  RunFlags flags;
  flags.record_trajectory = true;
  const SingleReport exact = run_single(cfg, Protocol::exact, flags);
  for (Protocol p : {Protocol::ni, Protocol::ks_plda, Protocol::ks_par}) {
    const SingleReport r = run_single(cfg, p, flags);
    REQUIRE(r.mean_work == Approx(exact.mean_work).margin(1e-10));
    REQUIRE(r.df_zero == Approx(exact.df_zero).margin(1e-10));
    REQUIRE(r.entropy_zero == Approx(exact.entropy_zero).margin(1e-10));
    REQUIRE(r.trajectory.size() == exact.trajectory.size());
    for (std::size_t k = 0; k < r.trajectory.size(); ++k)
      REQUIRE(r.trajectory[k].n1 == Approx(exact.trajectory[k].n1).margin(1e-9));
  }
}

TEST_CASE("the bare single-particle scheme never sees the interaction") {
  const SingleReport a = run_single(quick_cfg(0.0, 1.5, 300), Protocol::ni);
  const SingleReport b = run_single(quick_cfg(4.0, 1.5, 300), Protocol::ni);
  const SingleReport c = run_single(quick_cfg(10.0, 1.5, 300), Protocol::ni);
  REQUIRE(a.mean_work == b.mean_work);  // bitwise: identical code path
  REQUIRE(b.mean_work == c.mean_work);
  REQUIRE(a.df_zero == b.df_zero);
  REQUIRE(b.df_zero == c.df_zero);
}

TEST_CASE("the perturbation is the literal difference of the two hamiltonians") {
  // effective potentials couple to n_i/2 inside the matrix builder, so the
  // difference H - H_eff equals the perturbation builder fed half potentials
  const DimerConfig cfg = quick_cfg(3.0, 1.0);
  const KsSetup setup = ks_initial(cfg, XcFunctional::plda);
  const SitePotential vt = total(setup.v);
  const auto d0 = effective_deltas_initial(cfg);
  const HermitianMatrix4 h_eff =
      build_ks_h(d0.first + vt.site1, d0.second + vt.site2, cfg.j);
  const Mat4 direct = (exact_h_initial(cfg).matrix() - h_eff.matrix()).eval();
  const SitePotential vh_half{0.5 * setup.v.hartree.site1, 0.5 * setup.v.hartree.site2};
  const SitePotential vxc_half{0.5 * setup.v.xc.site1, 0.5 * setup.v.xc.site2};
  const Mat4 built = build_delta_h(cfg, vh_half, vxc_half).matrix();
  REQUIRE(max_abs((direct - built).eval()) == Approx(0.0).margin(1e-12));
}

TEST_CASE("for the bare scheme the perturbation is the pure interaction term") {
  const DimerConfig cfg = quick_cfg(4.0, 1.0);
  const auto d0 = effective_deltas_initial(cfg);
  const HermitianMatrix4 h_ni = build_ks_h(d0.first, d0.second, cfg.j);
  const Mat4 direct = (exact_h_initial(cfg).matrix() - h_ni.matrix()).eval();
  const Mat4 expect = (cfg.u * cfg.j * doublon_projector()).eval();
  REQUIRE(max_abs((direct - expect).eval()) == Approx(0.0).margin(1e-13));
}

TEST_CASE("first-order corrections vanish without interaction") {
  DimerConfig cfg = quick_cfg(0.0, 1.0, 300);
  RunFlags flags;
  flags.fop = true;
  const SingleReport r = run_single(cfg, Protocol::ks_plda, flags);
  REQUIRE(r.df_fop == Approx(r.df_zero).margin(1e-12));
  REQUIRE(r.entropy_fop == Approx(r.entropy_zero).margin(1e-12));
}

TEST_CASE("first-order corrections move the free energy toward the exact one") {
  const DimerConfig cfg = quick_cfg(4.0, 2.0, 400);
  const SingleReport exact = run_single(cfg, Protocol::exact);
  RunFlags flags;
  flags.fop = true;
  const SingleReport ni_f = run_single(cfg, Protocol::ni, flags);
  REQUIRE(std::isfinite(ni_f.df_fop));
  REQUIRE(std::abs(ni_f.df_fop - exact.df_zero) < std::abs(ni_f.df_zero - exact.df_zero));
  // without the flag the corrected fields stay unset
  const SingleReport ni_0 = run_single(cfg, Protocol::ni);
  REQUIRE(std::isnan(ni_0.df_fop));
  REQUIRE(std::isnan(ni_0.entropy_fop));
}

TEST_CASE("fluctuation-theorem residual vanishes within each scheme") {
  REQUIRE(run_single(quick_cfg(2.0, 1.0, 300), Protocol::exact).jarzynski_residual ==
          Approx(0.0).margin(1e-10));
  REQUIRE(run_single(quick_cfg(5.0, 0.0), Protocol::exact).jarzynski_residual ==
          Approx(0.0).margin(1e-10));
  REQUIRE(run_single(quick_cfg(4.0, 0.5, 300), Protocol::ks_plda).jarzynski_residual ==
          Approx(0.0).margin(1e-10));
}

TEST_CASE("free-energy difference matches the oracle partition functions") {
  const DimerConfig cfg = quick_cfg(3.0, 1.0, 200);
  const double beta = cfg.beta / cfg.j;
  const SingleReport r = run_single(cfg, Protocol::exact);
  auto log_z = [&](const HermitianMatrix4& h) {
    const Vec4 ev = oracles::eigenvalues(h.matrix());
    double z = 0.0;
    for (int i = 0; i < 4; ++i) z += std::exp(-beta * (ev[i] - ev[0]));
    return -beta * ev[0] + std::log(z);
  };
  const double df_ref =
      -(log_z(exact_h_final(cfg)) - log_z(exact_h_initial(cfg))) / beta;
  REQUIRE(r.df_zero == Approx(df_ref).margin(1e-10));
  REQUIRE(r.entropy_zero ==
          Approx(beta * (r.mean_work - r.df_zero)).margin(1e-12));
}

TEST_CASE("a static drive is perfectly adiabatic") {
  DimerConfig cfg = quick_cfg(3.0, 1.0, 200);
  cfg.delta_tau = cfg.delta0;  // nothing moves
  const SingleReport r = run_single(cfg, Protocol::exact);
  REQUIRE(r.adiabaticity == Approx(0.0).margin(1e-10));
  REQUIRE(r.adiabatic);
  REQUIRE(r.mean_work == Approx(0.0).margin(1e-10));
  REQUIRE(r.entropy_zero == Approx(0.0).margin(1e-10));
}

TEST_CASE("a sudden quench is far from adiabatic") {
  const SingleReport r = run_single(quick_cfg(5.0, 0.0), Protocol::exact);
  REQUIRE(r.adiabaticity > 0.5);
  REQUIRE(!r.adiabatic);
  // the sign of the mean work tracks the initial populations, but the quench
  // transfers energy and dissipates strongly either way
  REQUIRE(std::abs(r.mean_work) > 0.1);
  REQUIRE(r.entropy_zero > 0.05);
}

TEST_CASE("slower drives are closer to adiabatic in trend") {
  // small oscillations ride on the decay, so compare windows, not neighbours
  std::vector<double> a;
  for (double tau : linspace(0.5, 5.0, 20))
    a.push_back(adiabaticity_diagnostic(quick_cfg(5.0, tau, 1000)));
  REQUIRE(a.front() > 0.5);
  REQUIRE(a.back() < 0.05 * a.front());
  const double early_min = *std::min_element(a.begin(), a.begin() + 5);
  const double late_max = *std::max_element(a.end() - 5, a.end());
  REQUIRE(late_max < early_min);
}

TEST_CASE("self-consistent propagation needs an effective-potential scheme") {
  RunFlags flags;
  flags.tpf = true;
  REQUIRE_THROWS_AS(run_single(quick_cfg(2.0, 1.0), Protocol::exact, flags),
                    InvalidInputError);
  REQUIRE_THROWS_AS(run_single(quick_cfg(2.0, 1.0), Protocol::ni, flags),
                    InvalidInputError);
}

TEST_CASE("self-consistent propagation at zero duration is the frozen quench") {
  RunFlags flags;
  flags.tpf = true;
  const SingleReport with = run_single(quick_cfg(3.0, 0.0), Protocol::ks_plda, flags);
  const SingleReport without = run_single(quick_cfg(3.0, 0.0), Protocol::ks_plda);
  REQUIRE(with.mean_work == without.mean_work);
  REQUIRE(with.df_zero == without.df_zero);
  REQUIRE(with.tpf_iterations == 0);
}

TEST_CASE("tightening the propagation tolerance barely moves the work") {
  DimerConfig cfg = quick_cfg(3.0, 2.0, 400);
  RunFlags flags;
  flags.tpf = true;
  cfg.tpf_tol = 1e-6;
  const SingleReport loose = run_single(cfg, Protocol::ks_plda, flags);
  cfg.tpf_tol = 1e-8;
  const SingleReport tight = run_single(cfg, Protocol::ks_plda, flags);
  REQUIRE(loose.tpf_iterations >= 1);
  REQUIRE(tight.tpf_iterations >= loose.tpf_iterations);
  REQUIRE(std::abs(loose.mean_work - tight.mean_work) < 1e-5);
}

TEST_CASE("density source switch changes the frozen potentials at strong coupling") {
  DimerConfig cfg = quick_cfg(8.0, 0.0);
  const SingleReport scf = run_single(cfg, Protocol::ks_par);
  REQUIRE(scf.scf_iterations > 0);
  cfg.density_source = DensitySource::exact;
  const SingleReport exact_src = run_single(cfg, Protocol::ks_par);
  REQUIRE(exact_src.scf_iterations == 0);
  REQUIRE(std::abs(scf.mean_work - exact_src.mean_work) > 1e-6);
}

TEST_CASE("strong coupling still converges through the adaptive damping") {
  const SingleReport r = run_single(quick_cfg(10.0, 0.0), Protocol::ks_par);
  REQUIRE(r.scf_iterations > 0);
  REQUIRE(std::isfinite(r.mean_work));
  DimerConfig cfg5 = quick_cfg(10.0, 0.0);
  cfg5.delta_convention = DeltaConvention::half;
  const SingleReport r5 = run_single(cfg5, Protocol::ks_par);
  REQUIRE(std::isfinite(r5.mean_work));
}

TEST_CASE("recorded trajectories span the time grid") {
  DimerConfig cfg = quick_cfg(2.0, 1.0, 250);
  RunFlags flags;
  flags.record_trajectory = true;
  const SingleReport r = run_single(cfg, Protocol::exact, flags);
  REQUIRE(r.trajectory.size() == 251);
  REQUIRE(r.trajectory.front().n1 == Approx(r.n_initial.n1).margin(1e-9));
  REQUIRE(r.trajectory.back().n1 == Approx(r.n_final.n1).margin(1e-9));
  const SingleReport q = run_single(quick_cfg(2.0, 0.0), Protocol::exact, flags);
  REQUIRE(q.trajectory.size() == 1);
}

TEST_CASE("invalid configurations are rejected up front") {
  DimerConfig cfg;
  cfg.j = 0.0;
  REQUIRE_THROWS_AS(run_single(cfg, Protocol::exact), InvalidInputError);
  DimerConfig cfg2;
  cfg2.beta = -0.4;
  REQUIRE_THROWS_AS(run_single(cfg2, Protocol::exact), InvalidInputError);
  DimerConfig cfg3;
  cfg3.tau = -1.0;
  REQUIRE_THROWS_AS(run_single(cfg3, Protocol::exact), InvalidInputError);
}
