#include <catch_amalgamated.hpp>

#include <numbers>
#include <random>

#include "fbs/dynamics.hpp"
#include "oracles.hpp"

using namespace fbs;
using Catch::Matchers::ContainsSubstring;

namespace {

Drive random_drive(std::mt19937_64& rng, std::size_t n, double lo = 0.2, double hi = 2.0) {
  std::uniform_real_distribution<double> r(lo, hi), phi(-std::numbers::pi, std::numbers::pi);
  std::vector<double> rs(n), ps(n);
  for (std::size_t k = 0; k < n; ++k) {
    rs[k] = r(rng);
    ps[k] = phi(rng);
  }
  return Drive::from_polar(rs, ps);
}

Ket random_ket(std::mt19937_64& rng, const BasisPtr& basis) {
  std::normal_distribution<double> g;
  Ket psi(basis);
  for (Eigen::Index i = 0; i < psi.amplitudes().size(); ++i) psi.amplitudes()[i] = {g(rng), g(rng)};
  return psi.normalize();
}

// s = gt sqrt(eta) kept away from the pi/2 singularity of the factorization
double random_s(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.01, 3.0);
  double s = 0.0;
  do s = u(rng);
  while (std::abs(s - std::numbers::pi / 2) < 0.1);
  return s;
}

}  // namespace

TEST_CASE("exp(-iHt) matches the eigendecomposition on both code paths", "[dynamics][oracle]") {
  std::mt19937_64 rng(1);
  for (std::size_t n = 1; n <= 4; ++n) {
    const Drive d = random_drive(rng, n, 0.5, 3.0);
    const auto basis = excitation_basis(n, 2);
    const SparseOp h = build_classical_pump_hamiltonian(d, basis);
    const Ket psi = random_ket(rng, basis);
    const double gt = 1.3;
    const auto ref = oracle::evolve_eig(h.dense(), psi.amplitudes(), gt);
    ExpOptions krylov;
    krylov.dense_limit = 0;
    krylov.krylov_dim = 6;
    CHECK((evolve_exact(h, psi, gt).amplitudes() - ref).norm() < 1e-10);
    CHECK((evolve_exact(h, psi, gt, krylov).amplitudes() - ref).norm() < 1e-10);
  }
}

TEST_CASE("propagation is unitary", "[dynamics][property]") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + trial % 4;
    const Drive d = random_drive(rng, n);
    const auto basis = excitation_basis(n, 1 + trial % 3);
    const Ket psi = random_ket(rng, basis);
    const double gt = random_s(rng) / d.collective_rate();
    CHECK(std::abs(evolve_exact(build_classical_pump_hamiltonian(d, basis), psi, gt).norm() - 1.0) < 1e-10);
    CHECK(std::abs(wei_norman_evolve(d, psi, gt).norm() - 1.0) < 1e-10);
  }
}

TEST_CASE("excitation number is conserved", "[dynamics][property]") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 1 + trial % 3;
    const Drive d = random_drive(rng, n);
    const auto basis = excitation_basis(n, 3);
    SparseOp total = SparseOp::zero(basis);
    for (std::size_t m = 0; m <= n; ++m) total = total + number_op(basis, m);
    const Ket psi = random_ket(rng, basis);
    const Ket out = evolve_exact(build_classical_pump_hamiltonian(d, basis), psi, 2.0);
    CHECK(std::abs(expect(total, out) - expect(total, psi)) < 1e-10);
    // each fixed-excitation sector keeps its weight
    for (int k = 0; k <= 3; ++k) {
      const auto sector = [k](std::span<const int> o) {
        int s = 0;
        for (int v : o) s += v;
        return s == k;
      };
      CHECK(std::abs(partial_probability(out, sector) - partial_probability(psi, sector)) < 1e-10);
    }
  }
}

TEST_CASE("Wei-Norman factorization equals the matrix exponential", "[dynamics][oracle]") {
  std::mt19937_64 rng(4);
  for (std::size_t n = 1; n <= 4; ++n)
    for (int exc = 1; exc <= 3; ++exc)
      for (int trial = 0; trial < 8; ++trial) {
        const Drive d = random_drive(rng, n);
        const auto basis = excitation_basis(n, exc);
        const Ket psi = random_ket(rng, basis);
        const double gt = random_s(rng) / d.collective_rate();
        const Ket a = wei_norman_evolve(d, psi, gt);
        const oracle::Mat h = exc == 1 ? oracle::single_excitation_hamiltonian(d.amplitudes)
                                       : oracle::Mat(build_classical_pump_hamiltonian(d, basis).dense());
        const auto b = oracle::evolve_eig(h, psi.amplitudes(), gt);
        INFO("N=" << n << " exc=" << exc << " gt*sqrt(eta)=" << gt * d.collective_rate());
        REQUIRE((a.amplitudes() - b).norm() < 1e-9);
      }
}

TEST_CASE("Wei-Norman coefficients", "[dynamics]") {
  const double eta = 2.5;
  const double gt = 1e-4;
  const auto c = WeiNormanCoefficients::at(eta, gt);
  // to leading order: X = Z = -i gt, Y = gt^2 / 2
  CHECK(std::abs(c.X - cplx{0.0, -gt}) < 1e-10);
  CHECK(std::abs(c.Y - gt * gt / 2.0) < 1e-14);
  CHECK(c.X == c.Z);
  // past the singularity the logarithm goes complex
  const auto far = WeiNormanCoefficients::at(eta, 2.0 / std::sqrt(eta));
  CHECK(std::abs(far.Y.imag() + std::numbers::pi / eta) < 1e-12);
  REQUIRE_THROWS_AS(WeiNormanCoefficients::at(eta, std::numbers::pi / 2 / std::sqrt(eta)), NumericalError);
  REQUIRE_THROWS_AS(WeiNormanCoefficients::at(eta, 3 * std::numbers::pi / 2 / std::sqrt(eta) + 1e-8), NumericalError);
  REQUIRE_THROWS_AS(WeiNormanCoefficients::at(0.0, 1.0), ConfigError);
}

TEST_CASE("a perturbed coefficient is caught by the oracle", "[dynamics][oracle]") {
  std::mt19937_64 rng(12);
  const Drive d = random_drive(rng, 3);
  const auto basis = excitation_basis(3, 1);
  const Ket psi = Ket::basis_state(basis, Occupation{0, 0, 0, 1});
  WeiNormanOptions bad;
  bad.coefficient_perturbation = 1e-3;
  const double gt = 0.7 / d.collective_rate();
  const Ket ref = evolve_exact(build_classical_pump_hamiltonian(d, basis), psi, gt);
  CHECK((wei_norman_evolve(d, psi, gt, bad).amplitudes() - ref.amplitudes()).norm() > 1e-5);
}

TEST_CASE("closed-form wavefunctions agree with direct evolution", "[dynamics][oracle]") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t n = 1 + trial % 4;
    const Drive d = random_drive(rng, n);
    const double gt = 3.0 * (trial + 1) / 12.0 / d.collective_rate();
    const auto b1 = excitation_basis(n, 1);
    const SparseOp h1 = build_classical_pump_hamiltonian(d, b1);
    Occupation ph(n + 1, 0);
    ph[n] = 1;
    const Ket from_phonon = evolve_exact(h1, Ket::basis_state(b1, ph), gt);
    CHECK((closed_form_phonon_start(d, gt).amplitudes() - from_phonon.amplitudes()).norm() < 1e-10);
    CHECK((closed_form_fock_start(d, 1, gt).amplitudes() - from_phonon.amplitudes()).norm() < 1e-10);

    const std::size_t mode = static_cast<std::size_t>(trial) % n;
    Occupation pm(n + 1, 0);
    pm[mode] = 1;
    const Ket from_photon = evolve_exact(h1, Ket::basis_state(b1, pm), gt);
    CHECK((closed_form_photon_start(d, gt, mode).amplitudes() - from_photon.amplitudes()).norm() < 1e-10);

    for (int k = 2; k <= 3; ++k) {
      const auto bk = excitation_basis(n, k);
      Occupation phk(n + 1, 0);
      phk[n] = k;
      const Ket ref = evolve_exact(build_classical_pump_hamiltonian(d, bk), Ket::basis_state(bk, phk), gt);
      CHECK((closed_form_fock_start(d, k, gt, bk).amplitudes() - ref.amplitudes()).norm() < 1e-10);
    }
  }
  REQUIRE_THROWS_AS(closed_form_phonon_start(Drive::uniform(2, 0.0), 1.0), ConfigError);
  REQUIRE_THROWS_AS(closed_form_photon_start(Drive::uniform(2, 1.0), 1.0, 2), ConfigError);
}

namespace {

LindbladConfig lossy(double kappa, std::size_t n, double dt) {
  LindbladConfig cfg;
  cfg.gamma_over_g = kappa;
  for (std::size_t m = 0; m < n; ++m) cfg.collapse_modes.push_back(m);
  cfg.dt = dt;
  return cfg;
}

// No-jump branch: exp(-i H_eff t) on the one-excitation block, with the lost
// population sitting in the vacuum. H_eff is written out by hand.
CMatrix no_jump_density(const Drive& d, double kappa, double gt, const Eigen::VectorXcd& psi0) {
  const std::size_t n = d.size();
  oracle::Mat heff = oracle::single_excitation_hamiltonian(d.amplitudes);
  for (std::size_t k = 0; k < n; ++k) heff(static_cast<Eigen::Index>(n + 1 - k), static_cast<Eigen::Index>(n + 1 - k)) -= cplx{0.0, kappa / 2};
  const Eigen::VectorXcd psi = (cplx{0.0, -gt} * heff).exp() * psi0;
  CMatrix rho = psi * psi.adjoint();
  rho(0, 0) += 1.0 - psi.squaredNorm();
  return rho;
}

}  // namespace

TEST_CASE("Lindblad without loss reproduces unitary evolution", "[dynamics][lindblad]") {
  std::mt19937_64 rng(8);
  for (std::size_t n = 1; n <= 3; ++n) {
    const Drive d = random_drive(rng, n);
    const auto basis = excitation_basis(n, 2);
    const Ket psi = random_ket(rng, basis);
    const SparseOp h = build_classical_pump_hamiltonian(d, basis);
    const double gt = 2.0;
    const DensityOp rho = lindblad_evolve(h, DensityOp::pure(psi), lossy(0.0, n, 1e-3), gt);
    const Ket ref = evolve_exact(h, psi, gt);
    CHECK((rho.matrix() - DensityOp::pure(ref).matrix()).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("Lindblad matches the no-jump oracle in the one-excitation sector", "[dynamics][lindblad][oracle]") {
  std::mt19937_64 rng(10);
  for (std::size_t n = 1; n <= 4; ++n) {
    const Drive d = random_drive(rng, n);
    const double kappa = 0.8;
    const auto basis = excitation_basis(n, 1);
    const Ket psi = random_ket(rng, basis);
    const double gt = 1.9;
    const DensityOp rho =
        lindblad_evolve(build_classical_pump_hamiltonian(d, basis), DensityOp::pure(psi), lossy(kappa, n, 2e-3), gt);
    const CMatrix ref = no_jump_density(d, kappa, gt, psi.amplitudes());
    CHECK((rho.matrix() - ref).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(std::abs(rho.trace() - 1.0) < 1e-10);
    CHECK(rho.hermiticity_error() < 1e-14);
    CHECK(rho.min_eigenvalue() > -1e-9);  // zero eigenvalues smeared by the RK4 error
  }
}

TEST_CASE("amplitude damping of an idle photon is exponential", "[dynamics][lindblad]") {
  const auto basis = excitation_basis(2, 1);
  const Ket photon = Ket::basis_state(basis, Occupation{0, 1, 0});
  const double kappa = 3.0, gt = 0.5;
  const DensityOp rho =
      lindblad_evolve(SparseOp::zero(basis), DensityOp::pure(photon), lossy(kappa, 2, 1e-3), gt);
  CHECK(std::abs(partial_probability(rho, patterns::mode_equals(1, 1)) - std::exp(-kappa * gt)) < 1e-12);
}

TEST_CASE("RK4 error falls sixteenfold when the step halves", "[dynamics][lindblad][property]") {
  std::mt19937_64 rng(13);
  const Drive d = random_drive(rng, 3, 0.8, 1.5);
  const auto basis = excitation_basis(3, 1);
  const Ket psi = Ket::basis_state(basis, Occupation{0, 0, 0, 1});
  const double kappa = 1.5, gt = 2.0;
  const SparseOp h = build_classical_pump_hamiltonian(d, basis);
  const CMatrix ref = no_jump_density(d, kappa, gt, psi.amplitudes());
  const auto err = [&](double dt) {
    return (lindblad_evolve(h, DensityOp::pure(psi), lossy(kappa, 3, dt), gt).matrix() - ref).cwiseAbs().maxCoeff();
  };
  const double ratio = err(0.04) / err(0.02);
  INFO("error ratio " << ratio);
  CHECK(ratio > 12.0);
  CHECK(ratio < 20.0);
}

TEST_CASE("adaptive integration meets its tolerance", "[dynamics][lindblad]") {
  std::mt19937_64 rng(14);
  const Drive d = random_drive(rng, 2);
  const auto basis = excitation_basis(2, 1);
  const Ket psi = random_ket(rng, basis);
  LindbladConfig cfg = lossy(2.0, 2, 0.1);
  cfg.method = Integrator::adaptive;
  cfg.adaptive_tolerance = 1e-11;
  const double gt = 3.0;
  const DensityOp rho = lindblad_evolve(build_classical_pump_hamiltonian(d, basis), DensityOp::pure(psi), cfg, gt);
  CHECK((rho.matrix() - no_jump_density(d, 2.0, gt, psi.amplitudes())).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("trace drift aborts an unstable run", "[dynamics][lindblad][errors]") {
  const auto basis = excitation_basis(1, 1);
  const Ket photon = Ket::basis_state(basis, Occupation{1, 0});
  const SparseOp h = build_classical_pump_hamiltonian(Drive::uniform(1, 1.0), basis);
  REQUIRE_THROWS_AS(lindblad_evolve(h, DensityOp::pure(photon), lossy(1800.0, 1, 0.01), 1.0), NumericalError);
  REQUIRE_THROWS_AS(lindblad_evolve(h, DensityOp::pure(photon), lossy(1.0, 1, 0.0), 1.0), ConfigError);
  REQUIRE_THROWS_AS(lindblad_evolve(h, DensityOp::pure(photon), lossy(1.0, 5, 0.1), 1.0), ConfigError);
}

TEST_CASE("a coarse step that keeps the trace but breaks positivity is rejected", "[dynamics][lindblad][errors]") {
  const auto basis = excitation_basis(1, 1);
  const Ket photon = Ket::basis_state(basis, Occupation{1, 0});
  const Drive d = Drive::uniform(1, 4200.0);
  const double t_pi = 0.5 * std::numbers::pi / d.collective_rate();
  const SparseOp h = build_classical_pump_hamiltonian(d, basis);
  // one RK4 step across the whole pulse
  REQUIRE_THROWS_WITH(lindblad_evolve(h, DensityOp::pure(photon), lossy(1800.0, 1, 0.01), t_pi),
                      ContainsSubstring("positivity"));
  LindbladConfig fine = lossy(1800.0, 1, LindbladConfig::recommended_dt(1800.0, 4200.0));
  CHECK(lindblad_evolve(h, DensityOp::pure(photon), fine, t_pi).min_eigenvalue() > -1e-6);
}

TEST_CASE("recommended step", "[dynamics][lindblad]") {
  CHECK(LindbladConfig::recommended_dt(1800.0, 4200.0) == Catch::Approx(0.05 / 4200.0));
  CHECK(LindbladConfig::recommended_dt(1800.0, 10.0) == Catch::Approx(0.05 / 1800.0));
}
