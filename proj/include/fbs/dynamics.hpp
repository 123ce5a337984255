#pragma once

// Propagators for the pump/phonon system.
//
//  * evolve_exact       exp(-i H gt) psi by dense scaling-and-squaring (small
//                       bases) or Krylov projection (large bases). Ground truth.
//  * wei_norman_evolve  exp(X A^dag b) exp(Y Theta) exp(Z A b^dag) psi with the
//                       closed-form coefficients below.
//  * closed_form_*      direct evaluation of the analytic wavefunctions.
//  * lindblad_evolve    RK4 integration of the zero-temperature master equation
//                       with amplitude damping on the pump modes.
//
// Time is always the dimensionless gt; Hamiltonians are in units of hbar g.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "fbs/fockspace.hpp"
#include "fbs/hamiltonians.hpp"

namespace fbs {

struct ExpOptions {
  std::size_t dense_limit = 2000;  // dimensions above this use Krylov projection
  int krylov_dim = 30;
  double krylov_tolerance = 1e-13;
};

namespace detail {

inline CVector krylov_expmv(const SparseOp::Matrix& m, const CVector& v, const ExpOptions& opts) {
  const Eigen::Index n = v.size();
  const double beta0 = v.norm();
  if (beta0 == 0.0) return v;

  double norm1 = 0.0;
  {
    Eigen::VectorXd col = Eigen::VectorXd::Zero(m.cols());
    for (int r = 0; r < m.outerSize(); ++r)
      for (SparseOp::Matrix::InnerIterator it(m, r); it; ++it) col[it.col()] += std::abs(it.value());
    norm1 = col.maxCoeff();
  }
  const int dim = static_cast<int>(std::min<Eigen::Index>(opts.krylov_dim, n));
  double t = 0.0;
  double tau = norm1 > 0.0 ? std::min(1.0, 10.0 / norm1) : 1.0;
  CVector w = v;

  while (t < 1.0) {
    tau = std::min(tau, 1.0 - t);
    const double beta = w.norm();
    CMatrix basis(n, dim + 1);
    CMatrix hess = CMatrix::Zero(dim + 1, dim);
    basis.col(0) = w / beta;
    int used = dim;
    bool breakdown = false;
    for (int j = 0; j < dim; ++j) {
      CVector z = m * basis.col(j);
      for (int i = 0; i <= j; ++i) {
        hess(i, j) = basis.col(i).dot(z);
        z -= hess(i, j) * basis.col(i);
      }
      const double h = z.norm();
      hess(j + 1, j) = h;
      if (h < 1e-14 * std::max(1.0, norm1)) {
        used = j + 1;
        breakdown = true;
        break;
      }
      basis.col(j + 1) = z / h;
    }
    for (;;) {
      const CMatrix small = (tau * hess.topLeftCorner(used, used)).exp();
      const double err = breakdown ? 0.0 : beta * std::abs(hess(used, used - 1)) * tau * std::abs(small(used - 1, 0));
      if (err <= opts.krylov_tolerance * beta0 || tau < 1e-12) {
        w = beta * (basis.leftCols(used) * small.col(0));
        t += tau;
        if (err < 0.1 * opts.krylov_tolerance * beta0) tau *= 2.0;
        break;
      }
      tau *= 0.5;
    }
  }
  return w;
}

}  // namespace detail

/// exp(scale * G) v.
inline CVector expm_multiply(const SparseOp& generator, cplx scale, const CVector& v, const ExpOptions& opts = {}) {
  if (static_cast<std::size_t>(v.size()) != generator.dim()) throw BasisMismatch("expm_multiply: dimension mismatch");
  if (scale == cplx{}) return v;
  CVector out;
  if (generator.dim() <= opts.dense_limit) {
    const CMatrix m = scale * generator.dense();
    out = m.exp() * v;
  } else {
    const SparseOp::Matrix m = scale * generator.matrix();
    out = detail::krylov_expmv(m, v, opts);
  }
  if (!out.allFinite()) throw NumericalError("matrix exponential produced non-finite values");
  return out;
}

/// exp(-i H gt) psi0.
inline Ket evolve_exact(const SparseOp& h, const Ket& psi0, double gt, const ExpOptions& opts = {}) {
  require_same_basis(h.basis(), psi0.basis(), "evolve_exact");
  return Ket(psi0.basis_ptr(), expm_multiply(h, cplx{0.0, -gt}, psi0.amplitudes(), opts));
}

/// Coefficients of exp(X A^dag b) exp(Y Theta) exp(Z A b^dag) with s = gt sqrt(eta):
/// X = Z = -i tan(s)/sqrt(eta), Y = -ln(cos s)/eta (principal complex log past pi/2).
struct WeiNormanCoefficients {
  cplx X;
  cplx Y;
  cplx Z;
  double eta = 0.0;
  double gt = 0.0;

  static constexpr double kSingularityGuard = 1e-6;

  static WeiNormanCoefficients at(double eta, double gt) {
    if (!(eta > 0.0)) throw ConfigError("Wei-Norman coefficients need an active drive (eta > 0)");
    const double s = gt * std::sqrt(eta);
    const double offset = std::remainder(s - std::numbers::pi / 2, std::numbers::pi);
    if (std::abs(offset) < kSingularityGuard)
      throw NumericalError("gt*sqrt(eta) = " + format_double_short(s) +
                           " is within 1e-6 of a tan/ln-cos singularity (pi/2 + k pi)");
    const double root = std::sqrt(eta);
    WeiNormanCoefficients c;
    c.eta = eta;
    c.gt = gt;
    c.X = cplx{0.0, -std::tan(s) / root};
    c.Z = c.X;
    c.Y = -std::log(cplx{std::cos(s), 0.0}) / eta;
    return c;
  }

 private:
  static std::string format_double_short(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
  }
};

struct WeiNormanOptions {
  int max_series_terms = 400;
  double series_tolerance = 1e-17;
  /// Added to X; a test hook for negative controls of the oracle check.
  cplx coefficient_perturbation{};
};

namespace detail {

/// exp(c * op) v by Taylor series, split into `substeps` equal pieces.
inline CVector exp_series(const SparseOp& op, cplx c, const CVector& v, int substeps, const WeiNormanOptions& opts,
                          const char* name) {
  CVector out = v;
  const cplx piece = c / static_cast<double>(substeps);
  for (int s = 0; s < substeps; ++s) {
    CVector term = out;
    CVector sum = out;
    int k = 1;
    for (; k <= opts.max_series_terms; ++k) {
      term = (piece / static_cast<double>(k)) * (op.matrix() * term);
      sum += term;
      const double tn = term.norm();
      if (tn == 0.0 || tn <= opts.series_tolerance * sum.norm()) break;
    }
    if (k > opts.max_series_terms)
      throw NumericalError(std::string("exponential series for ") + name + " did not converge after " +
                           std::to_string(opts.max_series_terms) + " terms");
    out = sum;
  }
  return out;
}

}  // namespace detail

/// U_int psi0 through the factored exponentials. psi0 must live on a
/// [pump..., phonon] basis matching the drive; bases truncated by total
/// excitation number make every factor exact.
inline Ket wei_norman_evolve(const Drive& drive, const Ket& psi0, double gt, const WeiNormanOptions& opts = {}) {
  if (psi0.basis().mode_count() != drive.size() + 1)
    throw BasisMismatch("wei_norman_evolve: basis must hold " + std::to_string(drive.size()) + " pump modes + phonon");
  if (gt == 0.0) return psi0;
  auto c = WeiNormanCoefficients::at(drive.eta(), gt);
  c.X += opts.coefficient_perturbation;

  const BasisPtr& basis = psi0.basis_ptr();
  const SparseOp down = pump_to_phonon(drive, basis);
  const SparseOp up = down.adjoint();
  const SparseOp theta = theta_operator(drive, basis);

  // A b^dag and A^dag b are nilpotent on a finite basis, so their series terminate.
  CVector v = detail::exp_series(down, c.Z, psi0.amplitudes(), 1, opts, "Z A b^dag");
  const int theta_steps = std::max(1, static_cast<int>(std::ceil(std::abs(c.Y) * theta.norm1())));
  v = detail::exp_series(theta, c.Y, v, theta_steps, opts, "Y Theta");
  v = detail::exp_series(up, c.X, v, 1, opts, "X A^dag b");
  if (!v.allFinite()) throw NumericalError("Wei-Norman evolution produced non-finite amplitudes");
  return Ket(basis, std::move(v));
}

namespace detail {

inline BasisPtr default_or(const BasisPtr& basis, std::size_t n_pairs, int excitations) {
  if (basis) {
    require_modes(*basis, n_pairs + 1, "closed-form state");
    return basis;
  }
  return excitation_basis(n_pairs, excitations);
}

inline void set_amplitude(Ket& psi, const Occupation& occ, cplx value) {
  const auto idx = psi.basis().index_of(occ);
  if (!idx) throw ConfigError("closed-form state needs occupation (" + format_occupation(occ) + ") in the basis");
  psi.amplitudes()[static_cast<Eigen::Index>(*idx)] = value;
}

}  // namespace detail

/// cos(s)|vac, 1_ph> - i sin(s)|phi, 0_ph>, s = gt sqrt(eta), where
/// |phi> = sum_n alpha_n/sqrt(eta) |1_n> is the drive-weighted W-type state.
inline Ket closed_form_phonon_start(const Drive& drive, double gt, const BasisPtr& basis = nullptr) {
  if (!drive.active()) throw ConfigError("closed-form evolution needs a nonzero drive");
  const std::size_t n = drive.size();
  Ket psi(detail::default_or(basis, n, 1));
  const double root = drive.collective_rate();
  const double s = gt * root;
  Occupation occ(n + 1, 0);
  occ[n] = 1;
  detail::set_amplitude(psi, occ, std::cos(s));
  occ[n] = 0;
  for (std::size_t k = 0; k < n; ++k) {
    occ[k] = 1;
    detail::set_amplitude(psi, occ, -kI * std::sin(s) * drive.amplitudes[k] / root);
    occ[k] = 0;
  }
  return psi;
}

/// Evolution of the phonon Fock state |vac, k_ph>: the k phonons are distributed
/// multinomially over the pump modes,
///   amp(m_1..m_N; k-j) = (-i)^j sin^j cos^{k-j} eta^{-j/2} prod alpha_l^{m_l}
///                         * sqrt(k!) / (sqrt(prod m_l!) sqrt((k-j)!)),  j = sum m_l.
inline Ket closed_form_fock_start(const Drive& drive, int k, double gt, const BasisPtr& basis = nullptr) {
  if (!drive.active()) throw ConfigError("closed-form evolution needs a nonzero drive");
  if (k < 0) throw ConfigError("phonon number must be >= 0");
  const std::size_t n = drive.size();
  const BasisPtr b = detail::default_or(basis, n, std::max(k, 1));
  if (b->cutoff(n) < k) throw ConfigError("phonon number " + std::to_string(k) + " exceeds the phonon cutoff");
  Ket psi(b);
  const double root = drive.collective_rate();
  const double s = gt * root;
  const double sn = std::sin(s), cs = std::cos(s);

  Occupation occ(n + 1, 0);
  const auto log_fact = [](int m) { return std::lgamma(m + 1.0); };
  // Depth-first over (m_1, ..., m_N) with sum <= k.
  const auto visit = [&](auto&& self, std::size_t mode, int remaining) -> void {
    if (mode == n) {
      const int j = k - remaining;
      occ[n] = remaining;
      cplx amp = std::pow(-kI, j) * std::pow(sn, j) * std::pow(cs, k - j) * std::pow(root, -j);
      double log_norm = 0.5 * (log_fact(k) - log_fact(remaining));
      for (std::size_t l = 0; l < n; ++l) {
        if (occ[l] == 0) continue;
        amp *= std::pow(drive.amplitudes[l], occ[l]);
        log_norm -= 0.5 * log_fact(occ[l]);
      }
      amp *= std::exp(log_norm);
      if (amp != cplx{}) detail::set_amplitude(psi, occ, amp);
      return;
    }
    for (int m = 0; m <= remaining; ++m) {
      occ[mode] = m;
      self(self, mode + 1, remaining - m);
    }
    occ[mode] = 0;
  };
  visit(visit, 0, k);
  return psi;
}

/// Evolution of a photon injected in pump mode `mode` with all drives on:
///   (conj(alpha_m)/sqrt(eta)) [(cos s - 1)|phi,0> - i sin s |vac,1_ph>] + |1_m, 0>.
inline Ket closed_form_photon_start(const Drive& drive, double gt, std::size_t mode = 0,
                                    const BasisPtr& basis = nullptr) {
  if (!drive.active()) throw ConfigError("closed-form evolution needs a nonzero drive");
  const std::size_t n = drive.size();
  if (mode >= n) throw ConfigError("injected mode out of range");
  Ket psi(detail::default_or(basis, n, 1));
  const double root = drive.collective_rate();
  const double s = gt * root;
  const cplx weight = std::conj(drive.amplitudes[mode]) / root;

  Occupation occ(n + 1, 0);
  occ[n] = 1;
  detail::set_amplitude(psi, occ, -kI * weight * std::sin(s));
  occ[n] = 0;
  for (std::size_t l = 0; l < n; ++l) {
    occ[l] = 1;
    cplx a = weight * (std::cos(s) - 1.0) * drive.amplitudes[l] / root;
    if (l == mode) a += 1.0;
    detail::set_amplitude(psi, occ, a);
    occ[l] = 0;
  }
  return psi;
}

enum class Integrator { rk4, adaptive };

struct LindbladConfig {
  double gamma_over_g = 0.0;
  std::vector<std::size_t> collapse_modes;
  double dt = 1e-3;  // gt units; the step is shrunk so that it divides gt exactly
  Integrator method = Integrator::rk4;
  double adaptive_tolerance = 1e-10;
  double trace_drift_limit = 1e-4;
  double positivity_limit = 1e-4;  // RK4 keeps the trace even when a coarse step wrecks positivity

  /// max(gamma/g, rate) * dt = 0.05, where `rate` is the fastest coherent rate (sqrt(eta)).
  static double recommended_dt(double gamma_over_g, double rate) {
    const double fastest = std::max({gamma_over_g, rate, 1e-300});
    return 0.05 / fastest;
  }
};

namespace detail {

struct LindbladGenerator {
  SparseOp::Matrix h_eff;  // H - i (gamma/2) sum a^dag a
  SparseOp::Matrix h_eff_adj;
  std::vector<SparseOp::Matrix> jumps;
  double rate = 0.0;

  CMatrix operator()(const CMatrix& rho) const {
    CMatrix out = cplx{0.0, -1.0} * (CMatrix(h_eff * rho) - CMatrix(rho * h_eff_adj));
    for (const auto& a : jumps) {
      const CMatrix ar = a * rho;
      out += rate * CMatrix(a * ar.adjoint()).adjoint();
    }
    return out;
  }
};

inline CMatrix rk4_step(const LindbladGenerator& f, const CMatrix& rho, double h) {
  const CMatrix k1 = f(rho);
  const CMatrix k2 = f(rho + 0.5 * h * k1);
  const CMatrix k3 = f(rho + 0.5 * h * k2);
  const CMatrix k4 = f(rho + h * k3);
  return rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace detail

/// drho/dgt = -i[H, rho] + (gamma/g)/2 sum_j (2 a_j rho a_j^dag - a_j^dag a_j rho - rho a_j^dag a_j).
inline DensityOp lindblad_evolve(const SparseOp& h, const DensityOp& rho0, const LindbladConfig& cfg, double gt) {
  require_same_basis(h.basis(), rho0.basis(), "lindblad_evolve");
  if (!(cfg.dt > 0.0)) throw ConfigError("Lindblad dt must be > 0");
  if (cfg.gamma_over_g < 0.0) throw ConfigError("gamma/g must be >= 0");
  if (gt < 0.0) throw ConfigError("evolution time must be >= 0");
  const BasisPtr& basis = rho0.basis_ptr();

  detail::LindbladGenerator f;
  f.rate = cfg.gamma_over_g;
  SparseOp heff = h;
  for (std::size_t m : cfg.collapse_modes) {
    if (m >= basis->mode_count()) throw ConfigError("collapse mode " + std::to_string(m) + " not in basis");
    const SparseOp a = ladder(basis, m, LadderKind::lower);
    f.jumps.push_back(a.matrix());
    heff = heff - cplx{0.0, 0.5 * cfg.gamma_over_g} * number_op(basis, m);
  }
  f.h_eff = heff.matrix();
  f.h_eff_adj = heff.adjoint().matrix();

  CMatrix rho = rho0.matrix();
  const cplx trace0 = rho.trace();
  const auto check = [&](double at) {
    if (!rho.allFinite()) throw NumericalError("Lindblad integration diverged at gt = " + std::to_string(at));
    const double drift = std::abs(rho.trace() - trace0);
    if (drift > cfg.trace_drift_limit)
      throw NumericalError("Lindblad trace drift " + std::to_string(drift) + " at gt = " + std::to_string(at) +
                           " exceeds " + std::to_string(cfg.trace_drift_limit) + "; reduce dt");
  };

  if (gt == 0.0) return rho0;
  if (cfg.method == Integrator::rk4) {
    const auto steps = static_cast<long>(std::ceil(gt / cfg.dt - 1e-9));
    const double step = gt / static_cast<double>(std::max(1L, steps));
    for (long i = 0; i < std::max(1L, steps); ++i) {
      rho = detail::rk4_step(f, rho, step);
      rho = 0.5 * (rho + rho.adjoint()).eval();
      check(step * static_cast<double>(i + 1));
    }
  } else {
    double t = 0.0;
    double step = std::min(cfg.dt, gt);
    while (t < gt) {
      step = std::min(step, gt - t);
      const CMatrix full = detail::rk4_step(f, rho, step);
      const CMatrix half = detail::rk4_step(f, detail::rk4_step(f, rho, 0.5 * step), 0.5 * step);
      const double err = (half - full).cwiseAbs().maxCoeff() / 15.0;
      if (err <= cfg.adaptive_tolerance || step < 1e-14 * std::max(1.0, gt)) {
        t += step;
        rho = half + (half - full) / 15.0;
        rho = 0.5 * (rho + rho.adjoint()).eval();
        check(t);
      }
      const double factor = err > 0.0 ? 0.9 * std::pow(cfg.adaptive_tolerance / err, 0.2) : 5.0;
      step *= std::clamp(factor, 0.2, 5.0);
    }
  }
  DensityOp out(basis, std::move(rho));
  const double lowest = out.min_eigenvalue();
  if (lowest < -cfg.positivity_limit)
    throw NumericalError("Lindblad state lost positivity (eigenvalue " + std::to_string(lowest) + " at gt = " +
                         std::to_string(gt) + "); reduce dt");
  return out;
}

}  // namespace fbs
