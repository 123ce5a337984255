// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

#include "fbs/fbs.hpp"
#include "oracles.hpp"

using namespace fbs;

namespace {

constexpr double kPi = std::numbers::pi;

// Tolerances, fixed by the acceptance contract.
constexpr double kOracleL2 = 1e-8;
constexpr double kOracleSeconds = 10.0;
constexpr double kProbTol = 1e-9;
constexpr double kPhononTol = 1e-12;
constexpr double kLossySeconds = 5.0;
constexpr double kTauNs = 3.97;
constexpr double kTauRel = 0.01;
constexpr double kQftRel = 1e-12;
constexpr double kQftProb = 1e-10;
constexpr double kQftPhase = 1e-9;
constexpr double kHeraldInfidelity = 1e-9;
constexpr double kHeraldPhase = 1e-9;

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s [%d] %s: %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double pump_p(const State& s, std::size_t n, std::size_t m) {
  Occupation occ(n + 1, 0);
  occ[m] = 1;
  return partial_probability(s, patterns::exactly(occ));
}

double phonon_p(const State& s) {
  return partial_probability(s, [](std::span<const int> o) { return o.back() > 0; });
}

void run(int id, const std::string& name, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(id, name, false, std::string("exception: ") + e.what());
  }
}

void criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240917);
  std::uniform_real_distribution<double> amp(0.2, 2.0), phase(-kPi, kPi), s_dist(0.01, 3.0);
  std::normal_distribution<double> gauss;
  double worst = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto basis = excitation_basis(n, 1);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> r(n), phi(n);
      for (std::size_t k = 0; k < n; ++k) {
        r[k] = amp(rng);
        phi[k] = phase(rng);
      }
      const Drive d = Drive::from_polar(r, phi);
      double s = 0.0;
      do s = s_dist(rng);
      while (std::abs(s - kPi / 2) < 0.1);
      const double gt = s / d.collective_rate();
      Ket psi(basis);
      for (Eigen::Index i = 0; i < psi.amplitudes().size(); ++i) psi.amplitudes()[i] = {gauss(rng), gauss(rng)};
      psi.normalize();
      const CMatrix h = build_classical_pump_hamiltonian(d, basis).dense();
      const CVector ref = (cplx{0.0, -gt} * h).exp() * psi.amplitudes();
      worst = std::max(worst, (wei_norman_evolve(d, psi, gt).amplitudes() - ref).norm());
    }
  }
  const double secs = seconds_since(t0);
  report(1, "oracle equivalence", worst < kOracleL2 && secs < kOracleSeconds,
         fmt("max L2 error %.2e over N=1..4 x 20 trials (limit %.0e), %.3f s", worst, kOracleL2, secs));
}

void criterion_2() {
  double dev = 0.0, ph = 0.0;
  for (std::size_t n = 2; n <= 5; ++n) {
    const auto r = synthesize_w_standard(n, 4200.0 / std::sqrt(double(n)), StartKind::heralded);
    for (std::size_t m = 0; m < n; ++m) dev = std::max(dev, std::abs(pump_p(r.final_state, n, m) - 1.0 / n));
    ph = std::max(ph, phonon_p(r.final_state));
  }
  report(2, "standard W synthesis", dev < kProbTol && ph < kPhononTol,
         fmt("max |P_n - 1/N| = %.2e, max P_ph = %.2e (N=2..5)", dev, ph));
}

void criterion_3() {
  double dev = 0.0;
  for (std::size_t n = 2; n <= 6; ++n) {
    const auto r = synthesize_w_perfect(n, 2100.0, StartKind::heralded);
    for (std::size_t m = 0; m < n; ++m) {
      const double want = m == 0 ? 0.5 : 1.0 / (2.0 * (n - 1));
      dev = std::max(dev, std::abs(pump_p(r.final_state, n, m) - want));
    }
  }
  report(3, "perfect W synthesis", dev < kProbTol, fmt("max deviation from 1/2 : 1/(2(N-1)) = %.2e (N=2..6)", dev));
}

void criterion_4() {
  double dev = 0.0;
  for (std::size_t n = 2; n <= 5; ++n)
    for (auto v : {LasersOnVariant::standard_plus, LasersOnVariant::standard_minus, LasersOnVariant::perfect_plus,
                   LasersOnVariant::perfect_minus}) {
      const bool perfect = v == LasersOnVariant::perfect_plus || v == LasersOnVariant::perfect_minus;
      const auto r = synthesize_w_lasers_on(n, 2637.0, v);
      for (std::size_t m = 0; m < n; ++m) {
        const double want = perfect ? (m == 0 ? 0.5 : 1.0 / (2.0 * (n - 1))) : 1.0 / n;
        dev = std::max(dev, std::abs(pump_p(r.final_state, n, m) - want));
      }
    }
  report(4, "lasers-on protocol", dev < kProbTol,
         fmt("max pump-probability deviation %.2e over both branches, standard and perfect, N=2..5", dev));
}

void criterion_5() {
  constexpr std::size_t n = 3;
  constexpr double alpha_max = 4200.0;
  const double alpha = alpha_max / std::sqrt(double(n));
  ProtocolOptions lossy1800;
  lossy1800.engine.gamma_over_g = 1800.0;
  ProtocolOptions lossy100;
  lossy100.engine.gamma_over_g = 100.0;

  auto t0 = std::chrono::steady_clock::now();
  const double f_super = synthesize_w_standard(n, alpha, StartKind::heralded, 0, lossy1800).fidelity;
  const double s1 = seconds_since(t0);
  t0 = std::chrono::steady_clock::now();
  const double f_inj = synthesize_w_standard(n, alpha, StartKind::injected, 0, lossy1800).fidelity;
  const double s2 = seconds_since(t0);
  t0 = std::chrono::steady_clock::now();
  const double f_pi = pi_pulse_swap(0, alpha_max, 0.0, lossy100).fidelity;
  const double s3 = seconds_since(t0);

  const bool ok1 = f_super >= 0.68 && f_super <= 0.75;
  const bool ok2 = std::abs(f_inj - 0.52) <= 0.03;
  const bool ok3 = std::abs(f_pi - 0.98) <= 0.005;
  const bool fast = std::max({s1, s2, s3}) < kLossySeconds;
  report(5, "Lindblad fidelities", ok1 && ok2 && ok3 && fast,
         fmt("super pi-pulse F=%.4f in [0.68,0.75]; injected F=%.4f in 0.52+-0.03; ", f_super, f_inj) +
             fmt("pi-pulse (gamma/g=100) F=%.4f in 0.98+-0.005; slowest run %.3f s", f_pi,
                 std::max({s1, s2, s3})));
}

void criterion_6() {
  const double g = kDefaultCouplingRadPerSec;
  const Timing tau = super_pi_time(1, Drive::uniform(1, 4200.0), SuperPiKind::alpha_max, g);
  const auto q = frequency_translate(0, 1, 4200.0, 4200.0, 0.0, 0.0, InitialState::photon(0));
  const double t_qft = q.timings.at("t_qft").seconds;
  const double rel = std::abs(t_qft - 2.0 * tau.seconds) / (2.0 * tau.seconds);
  const bool ok = std::abs(tau.seconds * 1e9 - kTauNs) <= kTauRel * kTauNs && rel <= kQftRel;
  report(6, "timing", ok, fmt("tau(4200) = %.4f ns, t_qft = %.4f ns, |t_qft - 2 tau|/2tau = %.1e", tau.seconds * 1e9,
                              t_qft * 1e9, rel));
}

void criterion_7() {
  const std::vector<cplx> c{0.0, {0.3, -0.4}, {-0.2, 0.5}, {0.4, 0.2}};  // three terms, levels 1..3
  const double phi_i = 0.7, phi_j = -0.4;
  const auto r = frequency_translate(0, 2, 4200.0, 4200.0, phi_i, phi_j, InitialState::pump_superposition(0, c));

  // Oracle: dense exponentials of each pi-pulse Hamiltonian on the cutoff-3 basis.
  const BasisPtr basis = basis_ptr_of(r.final_state);
  const Ket in = InitialState::pump_superposition(0, c).build(basis);
  const auto pulse = [&](std::size_t mode, double phi) {
    const CMatrix h = build_classical_pump_hamiltonian(Drive::single(3, mode, 4200.0, phi), basis).dense();
    return CMatrix((cplx{0.0, -kPi / (2 * 4200.0)} * h).exp());
  };
  const Ket oracle_out(basis, pulse(2, phi_j) * (pulse(0, phi_i) * in.amplitudes()));
  const auto src = fock_coefficients(in, 0, 3);
  const auto out = fock_coefficients(oracle_out, 2, 3);
  const auto lib = fock_coefficients(std::get<Ket>(r.final_state), 2, 3);

  double prob_dev = 0.0, phase_dev = 0.0, lib_dev = 0.0, literal_dev = 0.0;
  const double delta = phi_i - phi_j;
  for (int k = 0; k <= 3; ++k) {
    prob_dev = std::max(prob_dev, std::abs(std::norm(out[k]) - std::norm(src[k])));
    lib_dev = std::max(lib_dev, std::abs(lib[k] - out[k]));
    if (src[k] == cplx{}) continue;
    // per-level phase (-1)^k exp(-i k (phi_i - phi_j))
    const double got = std::arg(out[k] / src[k]);
    const double want = std::arg(std::pow(-std::exp(cplx{0.0, -delta}), k));
    phase_dev = std::max(phase_dev, std::abs(std::remainder(got - want, 2 * kPi)));
    literal_dev = std::max(literal_dev, std::abs(std::remainder(got - k * delta, 2 * kPi)));
  }
  const bool ok = prob_dev < kQftProb && phase_dev < kQftPhase && lib_dev < kQftProb && r.fidelity > 1 - kQftProb;
  report(7, "QFT state preservation", ok,
         fmt("max ||C_k|^2 change| = %.2e, per-level phase (-1)^k e^{-ik(phi_i-phi_j)} error %.2e rad, ", prob_dev,
             phase_dev) +
             fmt("library vs oracle %.2e; literal e^{ik(phi_i-phi_j)} form misses by %.3f rad (documented)", lib_dev,
                 literal_dev));
}

void criterion_8() {
  const double arg_xi = 0.7;
  const auto r = herald_phonon(std::polar(0.3, arg_xi), 8);
  const double phase_err = std::abs(std::remainder(r.metrics.at("heralded_phase") - arg_xi, 2 * kPi));
  report(8, "heralding", 1.0 - r.fidelity < kHeraldInfidelity && phase_err < kHeraldPhase,
         fmt("1 - F = %.2e, |phase - arg xi| = %.2e, success probability %.6f", 1.0 - r.fidelity, phase_err,
             r.success_probability));
}

void criterion_9() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> amp(0.2, 2.0), phase(-kPi, kPi);
  std::normal_distribution<double> gauss;
  const auto random_drive = [&](std::size_t n) {
    std::vector<double> r(n), p(n);
    for (std::size_t k = 0; k < n; ++k) {
      r[k] = amp(rng);
      p[k] = phase(rng);
    }
    return Drive::from_polar(r, p);
  };
  const auto random_ket = [&](const BasisPtr& b) {
    Ket psi(b);
    for (Eigen::Index i = 0; i < psi.amplitudes().size(); ++i) psi.amplitudes()[i] = {gauss(rng), gauss(rng)};
    return psi.normalize();
  };

  // unitarity and excitation conservation
  double unitarity = 0.0, conservation = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto basis = excitation_basis(n, 2);
    const Drive d = random_drive(n);
    const SparseOp h = build_classical_pump_hamiltonian(d, basis);
    SparseOp total = SparseOp::zero(basis);
    for (std::size_t m = 0; m <= n; ++m) total = total + number_op(basis, m);
    const Ket psi = random_ket(basis);
    const Ket out = evolve_exact(h, psi, 1.9);
    unitarity = std::max(unitarity, std::abs(out.norm() - 1.0));
    conservation = std::max(conservation, std::abs(expect(total, out) - expect(total, psi)));
  }

  // trace after a lossy pi-pulse
  ProtocolOptions lossy;
  lossy.engine.gamma_over_g = 1800.0;
  const auto pi = pi_pulse_swap(0, 4200.0, 0.3, lossy);
  const double trace_err = std::abs(std::get<DensityOp>(pi.final_state).trace() - 1.0);

  // an empty pump/Stokes pair stays empty under the full pair Hamiltonian
  SystemSpec spec;
  spec.n_pairs = 2;
  const auto pair_basis = build_basis(5, {2}, 3);
  Ket loaded = Ket::basis_state(pair_basis, Occupation{1, 0, 1, 0, 1});
  loaded += Ket::basis_state(pair_basis, Occupation{2, 0, 0, 0, 1});
  loaded.normalize();
  const Ket evolved = evolve_exact(build_truncated_hamiltonian(spec, pair_basis), loaded, 2.3);
  const double leak = 1.0 - partial_probability(evolved, [](std::span<const int> o) { return o[1] == 0 && o[3] == 0; });

  // RK4 order: no-jump oracle in the one-excitation sector
  const Drive d3 = random_drive(3);
  const auto b3 = excitation_basis(3, 1);
  const Ket ph = Ket::basis_state(b3, Occupation{0, 0, 0, 1});
  const double kappa = 1.5, gt = 2.0;
  oracle::Mat heff = oracle::single_excitation_hamiltonian(d3.amplitudes);
  for (Eigen::Index k = 2; k < 5; ++k) heff(k, k) -= cplx{0.0, kappa / 2};
  const CVector nj = (cplx{0.0, -gt} * heff).exp() * ph.amplitudes();
  CMatrix ref = nj * nj.adjoint();
  ref(0, 0) += 1.0 - nj.squaredNorm();
  const auto rk4_err = [&](double dt) {
    LindbladConfig cfg;
    cfg.gamma_over_g = kappa;
    cfg.collapse_modes = {0, 1, 2};
    cfg.dt = dt;
    const auto rho = lindblad_evolve(build_classical_pump_hamiltonian(d3, b3), DensityOp::pure(ph), cfg, gt);
    return (rho.matrix() - ref).cwiseAbs().maxCoeff();
  };
  const double ratio = rk4_err(0.04) / rk4_err(0.02);

  // N = 1 reduces to the two-mode beamsplitter
  double bs = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const Drive d1 = random_drive(1);
    const auto b1 = excitation_basis(1, 3);
    const Ket psi = random_ket(b1);
    const double t = 0.3 * (trial + 1);
    const CVector want =
        build_beamsplitter_generator(b1, -kI * t * d1.amplitudes[0], 0).dense().exp() * psi.amplitudes();
    bs = std::max(bs, (wei_norman_evolve(d1, psi, t).amplitudes() - want).norm());
  }

  const bool ok = unitarity < 1e-10 && trace_err < 1e-6 && conservation < 1e-10 && leak < 1e-12 &&
                  std::abs(ratio - 16.0) <= 4.0 && bs < 1e-10;
  report(9, "property suite", ok,
         fmt("unitarity %.1e, trace %.1e, excitation %.1e, ", unitarity, trace_err, conservation) +
             fmt("empty-pair leak %.1e, RK4 ratio %.2f, N=1 beamsplitter %.1e", leak, ratio, bs));
}

}  // namespace

int main() {
  run(1, "oracle equivalence", criterion_1);
  run(2, "standard W synthesis", criterion_2);
  run(3, "perfect W synthesis", criterion_3);
  run(4, "lasers-on protocol", criterion_4);
  run(5, "Lindblad fidelities", criterion_5);
  run(6, "timing", criterion_6);
  run(7, "QFT state preservation", criterion_7);
  run(8, "heralding", criterion_8);
  run(9, "property suite", criterion_9);
  std::printf("%s: %d of 9 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
