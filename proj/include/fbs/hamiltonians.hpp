#pragma once

// Hamiltonians and generators of the forward-Brillouin pump/Stokes/phonon system.
//
// Every Hamiltonian is expressed in units of hbar*g, so propagators take the
// dimensionless time g*t. Mode layouts:
//   classical-pump runs:  [pump_0 .. pump_{N-1}, phonon]
//   full quantum runs:    [pump_0 .. pump_{N-1}, stokes_0 .. stokes_{N-1}, phonon]
//   optical ladder:       [opt_{-w} .. opt_{+w}, phonon]

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "fbs/fockspace.hpp"

namespace fbs {

/// Reduced Planck constant, J*s.
inline constexpr double kHbar = 1.054571817e-34;
/// 2*pi*15 kHz, the single-photon coupling used throughout.
inline constexpr double kDefaultCouplingRadPerSec = 2.0 * std::numbers::pi * 15.0e3;

struct SystemSpec {
  int n_pairs = 1;
  double g = kDefaultCouplingRadPerSec;  // rad/s
  double gamma = 0.0;                    // rad/s, amplitude decay of each pump mode
  double omega_phonon = 0.0;             // rad/s
  std::vector<double> omega_pump;        // rad/s, optional
  std::vector<double> omega_stokes;      // rad/s, optional
  double phase_matching_tolerance = 1e-9;

  double gamma_over_g() const { return gamma / g; }

  /// Throws ConfigError naming the first violated constraint.
  void validate() const {
    if (n_pairs < 1) throw ConfigError("n_pairs must be >= 1");
    if (!(g > 0.0)) throw ConfigError("g_rad_per_s must be > 0");
    if (!(gamma >= 0.0)) throw ConfigError("gamma_rad_per_s must be >= 0");
    if (omega_pump.empty() && omega_stokes.empty()) return;
    const auto n = static_cast<std::size_t>(n_pairs);
    if (omega_pump.size() != n || omega_stokes.size() != n)
      throw ConfigError("omega_pump/omega_stokes must list n_pairs frequencies");
    for (std::size_t k = 0; k < n; ++k) {
      const double mismatch = omega_pump[k] - omega_stokes[k] - omega_phonon;
      if (std::abs(mismatch) > phase_matching_tolerance * std::abs(omega_pump[k]))
        throw ConfigError("pair " + std::to_string(k) + " is not phase matched (omega_p - omega_s - Omega = " +
                          std::to_string(mismatch) + " rad/s)");
    }
  }
};

/// Classical Stokes amplitudes alpha_n = r_n exp(i phi_n).
struct Drive {
  std::vector<cplx> amplitudes;

  static Drive from_polar(std::span<const double> r, std::span<const double> phi) {
    if (r.size() != phi.size()) throw ConfigError("drive r and phi lists differ in length");
    Drive d;
    for (std::size_t n = 0; n < r.size(); ++n) {
      if (r[n] < 0.0) throw ConfigError("drive amplitude r must be >= 0");
      d.amplitudes.push_back(std::polar(r[n], phi[n]));
    }
    return d;
  }

  static Drive uniform(std::size_t n, double r) { return Drive{std::vector<cplx>(n, cplx{r, 0.0})}; }

  /// Drive only `pair` out of n_pairs.
  static Drive single(std::size_t n_pairs, std::size_t pair, double r, double phi = 0.0) {
    if (pair >= n_pairs) throw ConfigError("pair index " + std::to_string(pair) + " out of range");
    Drive d{std::vector<cplx>(n_pairs)};
    d.amplitudes[pair] = std::polar(r, phi);
    return d;
  }

  std::size_t size() const noexcept { return amplitudes.size(); }
  double r(std::size_t n) const { return std::abs(amplitudes.at(n)); }
  double phi(std::size_t n) const { return std::arg(amplitudes.at(n)); }

  double eta() const {
    double s = 0.0;
    for (const auto& a : amplitudes) s += std::norm(a);
    return s;
  }
  /// sqrt(eta): the collective Rabi rate in units of g.
  double collective_rate() const { return std::sqrt(eta()); }
  bool active() const { return eta() > 0.0; }
};

/// Conversion between maximum drive amplitude and circulating power,
/// P = hbar * omega * v_g * alpha_max^2 / L.
struct PowerBudget {
  double alpha_max = 0.0;
  double omega_optical = 0.0;  // rad/s
  double v_g = 0.0;            // m/s
  double length = 0.0;         // m
  double power = 0.0;          // W
};

inline double power_from_alpha(const PowerBudget& b) {
  if (!(b.alpha_max > 0 && b.omega_optical > 0 && b.v_g > 0 && b.length > 0))
    throw ConfigError("power_from_alpha needs positive alpha_max, omega_optical, v_g and length");
  return kHbar * b.omega_optical * b.v_g * b.alpha_max * b.alpha_max / b.length;
}

inline double alpha_from_power(const PowerBudget& b) {
  if (!(b.power > 0 && b.omega_optical > 0 && b.v_g > 0 && b.length > 0))
    throw ConfigError("alpha_from_power needs positive power, omega_optical, v_g and length");
  return std::sqrt(b.power * b.length / (kHbar * b.omega_optical * b.v_g));
}

namespace detail {

inline void require_modes(const Basis& basis, std::size_t expected, const char* what) {
  if (basis.mode_count() != expected)
    throw BasisMismatch(std::string(what) + ": expected a " + std::to_string(expected) + "-mode basis, got " +
                        std::to_string(basis.mode_count()));
}

inline SparseOp term(const BasisPtr& basis, std::initializer_list<LadderFactor> f, cplx c) {
  return monomial(basis, std::span(f.begin(), f.size()), c);
}

constexpr auto R = LadderKind::raise;
constexpr auto L = LadderKind::lower;

}  // namespace detail

/// g * sum_m (a_m a_{m-1}^dag b^dag + h.c.) over 2*window+1 consecutive optical modes.
inline SparseOp build_ladder_hamiltonian(const BasisPtr& basis, double g, int window) {
  using namespace detail;
  if (window < 0) throw ConfigError("window must be >= 0");
  const auto optical = static_cast<std::size_t>(2 * window + 1);
  require_modes(*basis, optical + 1, "ladder Hamiltonian");
  const std::size_t b = optical;
  SparseOp h = SparseOp::zero(basis);
  for (std::size_t m = 1; m < optical; ++m) {
    h = h + term(basis, {{m, L}, {m - 1, R}, {b, R}}, g);
    h = h + term(basis, {{m, R}, {m - 1, L}, {b, L}}, g);
  }
  return h;
}

/// sum_n (a_pn a_sn^dag b^dag + a_pn^dag a_sn b), plus H0/(hbar g) when include_free.
inline SparseOp build_truncated_hamiltonian(const SystemSpec& spec, const BasisPtr& basis, bool include_free = false) {
  using namespace detail;
  spec.validate();
  const auto n = static_cast<std::size_t>(spec.n_pairs);
  require_modes(*basis, 2 * n + 1, "truncated Hamiltonian");
  const std::size_t b = 2 * n;
  SparseOp h = SparseOp::zero(basis);
  for (std::size_t k = 0; k < n; ++k) {
    h = h + term(basis, {{k, L}, {n + k, R}, {b, R}}, 1.0);
    h = h + term(basis, {{k, R}, {n + k, L}, {b, L}}, 1.0);
  }
  if (include_free) {
    if (spec.omega_pump.size() != n || spec.omega_stokes.size() != n)
      throw ConfigError("free Hamiltonian needs omega_pump and omega_stokes for every pair");
    std::vector<Entry> diag;
    for (std::size_t i = 0; i < basis->dim(); ++i) {
      const auto occ = basis->occupation(i);
      double e = spec.omega_phonon * occ[b];
      for (std::size_t k = 0; k < n; ++k) e += spec.omega_pump[k] * occ[k] + spec.omega_stokes[k] * occ[n + k];
      if (e != 0.0) diag.push_back({i, i, e / spec.g});
    }
    h = h + SparseOp(basis, diag);
  }
  return h;
}

/// A = sum_n conj(alpha_n) a_pn on a [pump..., phonon] basis.
inline SparseOp collective_lowering(const Drive& drive, const BasisPtr& basis) {
  using namespace detail;
  require_modes(*basis, drive.size() + 1, "collective mode operator");
  SparseOp a = SparseOp::zero(basis);
  for (std::size_t k = 0; k < drive.size(); ++k)
    if (drive.amplitudes[k] != cplx{}) a = a + term(basis, {{k, L}}, std::conj(drive.amplitudes[k]));
  return a;
}

/// A b^dag: moves one quantum from the collective pump mode into the phonon.
inline SparseOp pump_to_phonon(const Drive& drive, const BasisPtr& basis) {
  using namespace detail;
  require_modes(*basis, drive.size() + 1, "pump-to-phonon operator");
  const std::size_t b = drive.size();
  SparseOp op = SparseOp::zero(basis);
  for (std::size_t k = 0; k < drive.size(); ++k)
    if (drive.amplitudes[k] != cplx{}) op = op + term(basis, {{k, L}, {b, R}}, std::conj(drive.amplitudes[k]));
  return op;
}

/// A^dag b: moves one quantum from the phonon into the collective pump mode.
inline SparseOp phonon_to_pump(const Drive& drive, const BasisPtr& basis) {
  return pump_to_phonon(drive, basis).adjoint();
}

/// A b^dag + A^dag b, the strong-Stokes-drive ("super beamsplitter") Hamiltonian.
inline SparseOp build_classical_pump_hamiltonian(const Drive& drive, const BasisPtr& basis) {
  const SparseOp down = pump_to_phonon(drive, basis);
  return down + down.adjoint();
}

inline SparseOp build_classical_pump_hamiltonian(const SystemSpec& spec, const Drive& drive, const BasisPtr& basis) {
  spec.validate();
  if (drive.size() != static_cast<std::size_t>(spec.n_pairs))
    throw ConfigError("drive has " + std::to_string(drive.size()) + " amplitudes but n_pairs = " +
                      std::to_string(spec.n_pairs));
  return build_classical_pump_hamiltonian(drive, basis);
}

/// Theta = [A^dag b, A b^dag] = A^dag A - eta * n_b, assembled term by term from
/// [a_n b^dag, a_m^dag b] = delta_nm n_b - a_m^dag a_n.
inline SparseOp theta_operator(const Drive& drive, const BasisPtr& basis) {
  using namespace detail;
  require_modes(*basis, drive.size() + 1, "Theta operator");
  const std::size_t b = drive.size();
  SparseOp theta = (-drive.eta()) * number_op(basis, b);
  for (std::size_t m = 0; m < drive.size(); ++m)
    for (std::size_t n = 0; n < drive.size(); ++n) {
      const cplx c = drive.amplitudes[m] * std::conj(drive.amplitudes[n]);
      if (c != cplx{}) theta = theta + term(basis, {{m, R}, {n, L}}, c);
    }
  return theta;
}

/// G = xi a_s^dag b^dag - conj(xi) a_s b on a [stokes, phonon] basis; S(xi) = exp(G).
inline SparseOp build_squeezer_generator(const BasisPtr& basis, cplx xi) {
  using namespace detail;
  require_modes(*basis, 2, "squeezer generator");
  return term(basis, {{0, R}, {1, R}}, xi) + term(basis, {{0, L}, {1, L}}, -std::conj(xi));
}

/// G = mu a^dag b - conj(mu) a b^dag for pump mode `pair`; B(mu) = exp(G).
/// A Stokes drive alpha held for time gt corresponds to mu = -i gt alpha.
inline SparseOp build_beamsplitter_generator(const BasisPtr& basis, cplx mu, std::size_t pair) {
  using namespace detail;
  if (basis->mode_count() < 2) throw BasisMismatch("beamsplitter needs a pump mode and the phonon");
  const std::size_t b = basis->mode_count() - 1;
  if (pair >= b) throw ConfigError("pair index " + std::to_string(pair) + " out of range");
  return term(basis, {{pair, R}, {b, L}}, mu) + term(basis, {{pair, L}, {b, R}}, -std::conj(mu));
}

}  // namespace fbs
