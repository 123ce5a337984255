#pragma once

// Pulse schedules and the state-synthesis / frequency-translation protocols.
//
// A PulseSchedule is a list of square segments, each holding a constant set of
// classical Stokes amplitudes for a duration in gt. Executing a schedule is a
// pure function of (schedule, EngineConfig): lossless runs propagate a Ket with
// the super-beamsplitter Hamiltonian, lossy runs integrate the master equation
// on a DensityOp with amplitude damping on every pump mode.
//
// Phase conventions follow H = A b^dag + A^dag b with A = sum conj(alpha_n) a_n:
//   photon in pump i -> phonon after a pi-pulse:  factor -i exp(-i phi_i)
//   phonon -> photon in pump j after a pi-pulse:  factor -i exp(+i phi_j)
// so translating |k> from pump i to pump j multiplies it by (-exp(-i(phi_i - phi_j)))^k.

#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fbs/dynamics.hpp"
#include "fbs/hamiltonians.hpp"
#include "fbs/metrics.hpp"

namespace fbs {

struct InitialState {
  enum class Kind { vacuum, phonon_fock, pump_fock };

  Kind kind = Kind::phonon_fock;
  int phonon_number = 1;
  std::size_t pump_mode = 0;
  std::vector<cplx> fock_coefficients;  // C_0, C_1, ... in pump_mode

  static InitialState vacuum() { return {Kind::vacuum, 0, 0, {}}; }
  static InitialState phonon(int k = 1) { return {Kind::phonon_fock, k, 0, {}}; }
  static InitialState photon(std::size_t mode) { return {Kind::pump_fock, 0, mode, {0.0, 1.0}}; }
  static InitialState pump_superposition(std::size_t mode, std::vector<cplx> coefficients) {
    return {Kind::pump_fock, 0, mode, std::move(coefficients)};
  }

  int max_excitation() const {
    switch (kind) {
      case Kind::vacuum: return 0;
      case Kind::phonon_fock: return phonon_number;
      case Kind::pump_fock: {
        int top = 0;
        for (std::size_t k = 0; k < fock_coefficients.size(); ++k)
          if (fock_coefficients[k] != cplx{}) top = static_cast<int>(k);
        return top;
      }
    }
    return 0;
  }

  /// Normalized state on a [pump..., phonon] basis.
  Ket build(const BasisPtr& basis) const {
    const std::size_t phonon = basis->mode_count() - 1;
    Occupation occ(basis->mode_count(), 0);
    switch (kind) {
      case Kind::vacuum: return Ket::basis_state(basis, occ);
      case Kind::phonon_fock:
        if (phonon_number < 0) throw ConfigError("phonon number must be >= 0");
        occ[phonon] = phonon_number;
        return Ket::basis_state(basis, occ);
      case Kind::pump_fock: {
        if (pump_mode >= phonon) throw ConfigError("initial pump mode " + std::to_string(pump_mode) + " out of range");
        Ket psi(basis);
        for (std::size_t k = 0; k < fock_coefficients.size(); ++k) {
          if (fock_coefficients[k] == cplx{}) continue;
          occ[pump_mode] = static_cast<int>(k);
          const auto idx = basis->index_of(occ);
          if (!idx) throw ConfigError("Fock level " + std::to_string(k) + " exceeds the basis cutoff");
          psi.amplitudes()[static_cast<Eigen::Index>(*idx)] = fock_coefficients[k];
        }
        return psi.normalize();
      }
    }
    throw ConfigError("unknown initial state kind");
  }

  std::string describe() const {
    switch (kind) {
      case Kind::vacuum: return "vacuum";
      case Kind::phonon_fock: return "phonon:" + std::to_string(phonon_number);
      case Kind::pump_fock:
        if (max_excitation() == 1 && fock_coefficients.size() == 2 && fock_coefficients[0] == cplx{})
          return "photon:" + std::to_string(pump_mode);
        return "pump-superposition:" + std::to_string(pump_mode);
    }
    return "?";
  }

  /// Accepts "vacuum", "phonon", "phonon:<k>", "photon:<mode>".
  static InitialState parse(const std::string& text) {
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    const auto number = [&]() -> long {
      if (colon == std::string::npos) return -1;
      char* end = nullptr;
      const long v = std::strtol(text.c_str() + colon + 1, &end, 10);
      if (*end != '\0' || v < 0) throw ConfigError("initial_state: bad number in '" + text + "'");
      return v;
    };
    if (head == "vacuum" && colon == std::string::npos) return vacuum();
    if (head == "phonon") {
      const long k = number();
      return phonon(k < 0 ? 1 : static_cast<int>(k));
    }
    if (head == "photon") {
      const long m = number();
      return photon(m < 0 ? 0 : static_cast<std::size_t>(m));
    }
    throw ConfigError("initial_state: expected vacuum, phonon[:k] or photon[:mode], got '" + text + "'");
  }
};

struct Segment {
  Drive drive;
  double duration_gt = 0.0;
  std::string label;
};

/// Projects `mode` onto occupation `outcome` after segment `after_segment` completes.
struct Measurement {
  std::size_t after_segment = 0;
  std::size_t mode = 0;
  int outcome = 0;
};

struct PulseSchedule {
  std::size_t n_pairs = 1;
  InitialState initial_state = InitialState::phonon();
  std::vector<Segment> segments;
  std::vector<Measurement> measurements;

  void validate() const {
    if (n_pairs < 1) throw ConfigError("schedule needs n_pairs >= 1");
    for (std::size_t i = 0; i < segments.size(); ++i) {
      if (!(segments[i].duration_gt > 0.0))
        throw ConfigError("segment " + std::to_string(i) + ": duration_gt must be > 0");
      if (segments[i].drive.size() != n_pairs)
        throw ConfigError("segment " + std::to_string(i) + ": drive has " + std::to_string(segments[i].drive.size()) +
                          " amplitudes, expected " + std::to_string(n_pairs));
    }
    for (const auto& m : measurements) {
      if (m.after_segment >= segments.size()) throw ConfigError("measurement references a missing segment");
      if (m.mode > n_pairs) throw ConfigError("measurement references a missing mode");
    }
  }

  double total_duration() const {
    double t = 0.0;
    for (const auto& s : segments) t += s.duration_gt;
    return t;
  }

  BasisPtr make_basis() const { return excitation_basis(n_pairs, std::max(1, initial_state.max_excitation())); }
};

enum class Propagator { exact, wei_norman, closed_form };

struct EngineConfig {
  Propagator propagator = Propagator::exact;
  double gamma_over_g = 0.0;  // > 0 switches to density-matrix integration
  double dt = 0.0;            // 0: LindbladConfig::recommended_dt per segment
  Integrator method = Integrator::rk4;
  bool force_density = false;

  bool dissipative() const { return gamma_over_g > 0.0 || force_density; }
};

/// Steps a schedule forward in time. Used for final states and sampled traces.
class ScheduleCursor {
 public:
  ScheduleCursor(const PulseSchedule& schedule, EngineConfig engine)
      : schedule_(schedule), engine_(engine), state_(make_initial(schedule, engine)) {
    schedule_.validate();
    if (engine_.propagator == Propagator::closed_form) {
      if (engine_.dissipative()) throw ConfigError("closed-form propagation is lossless only");
      if (schedule_.segments.size() != 1) throw ConfigError("closed-form propagation needs a single-segment schedule");
      initial_ = std::get<Ket>(state_);
    }
  }

  double time() const noexcept { return time_; }
  const State& state() const noexcept { return state_; }
  double success_probability() const noexcept { return success_; }

  /// Advances to absolute time gt (clamped to the schedule end).
  void advance_to(double gt) {
    gt = std::min(gt, schedule_.total_duration());
    while (segment_ < schedule_.segments.size()) {
      const Segment& seg = schedule_.segments[segment_];
      const double seg_end = seg_start_ + seg.duration_gt;
      const double target = std::min(gt, seg_end);
      if (target > time_) {
        step(seg, time_ - seg_start_, target - time_);
        time_ = target;
      }
      if (time_ < seg_end) return;
      time_ = seg_end;
      apply_measurements(segment_);
      seg_start_ = seg_end;
      ++segment_;
    }
  }

 private:
  static State make_initial(const PulseSchedule& schedule, const EngineConfig& engine) {
    const Ket psi = schedule.initial_state.build(schedule.make_basis());
    if (engine.dissipative()) return DensityOp::pure(psi);
    return psi;
  }

  void step(const Segment& seg, double offset, double duration) {
    if (auto* rho = std::get_if<DensityOp>(&state_)) {
      const SparseOp h = build_classical_pump_hamiltonian(seg.drive, rho->basis_ptr());
      LindbladConfig cfg;
      cfg.gamma_over_g = engine_.gamma_over_g;
      for (std::size_t m = 0; m < schedule_.n_pairs; ++m) cfg.collapse_modes.push_back(m);
      cfg.dt = engine_.dt > 0.0 ? engine_.dt
                                : LindbladConfig::recommended_dt(engine_.gamma_over_g, seg.drive.collective_rate());
      cfg.method = engine_.method;
      *rho = lindblad_evolve(h, *rho, cfg, duration);
      return;
    }
    Ket& psi = std::get<Ket>(state_);
    if (!seg.drive.active()) return;  // a delay is the identity in the interaction picture
    switch (engine_.propagator) {
      case Propagator::exact:
        psi = evolve_exact(build_classical_pump_hamiltonian(seg.drive, psi.basis_ptr()), psi, duration);
        break;
      case Propagator::wei_norman: psi = wei_norman_evolve(seg.drive, psi, duration); break;
      case Propagator::closed_form: psi = closed_form(seg.drive, offset + duration); break;
    }
  }

  Ket closed_form(const Drive& drive, double gt) const {
    const InitialState& init = schedule_.initial_state;
    const BasisPtr& basis = initial_->basis_ptr();
    if (init.kind == InitialState::Kind::phonon_fock) return closed_form_fock_start(drive, init.phonon_number, gt, basis);
    if (init.describe().rfind("photon:", 0) == 0) return closed_form_photon_start(drive, gt, init.pump_mode, basis);
    throw ConfigError("no closed form for initial state " + init.describe());
  }

  void apply_measurements(std::size_t segment) {
    for (const auto& m : schedule_.measurements) {
      if (m.after_segment != segment) continue;
      const auto keep = patterns::mode_equals(m.mode, m.outcome);
      double p = 0.0;
      if (auto* psi = std::get_if<Ket>(&state_)) {
        for (std::size_t i = 0; i < psi->dim(); ++i)
          if (!keep(psi->basis().occupation(i))) psi->amplitudes()[static_cast<Eigen::Index>(i)] = 0.0;
        p = psi->norm() * psi->norm();
        if (p == 0.0) throw NumericalError("conditioning outcome has zero probability");
        psi->normalize();
      } else {
        auto& rho = std::get<DensityOp>(state_);
        for (std::size_t i = 0; i < rho.dim(); ++i)
          if (!keep(rho.basis().occupation(i))) {
            rho.matrix().row(static_cast<Eigen::Index>(i)).setZero();
            rho.matrix().col(static_cast<Eigen::Index>(i)).setZero();
          }
        p = rho.trace().real();
        if (p <= 0.0) throw NumericalError("conditioning outcome has zero probability");
        rho.matrix() /= p;
      }
      success_ *= p;
    }
  }

  PulseSchedule schedule_;
  EngineConfig engine_;
  State state_;
  std::optional<Ket> initial_;
  std::size_t segment_ = 0;
  double seg_start_ = 0.0;
  double time_ = 0.0;
  double success_ = 1.0;
};

struct ExecutionResult {
  State state;
  double success_probability = 1.0;
};

inline ExecutionResult run_schedule(const PulseSchedule& schedule, const EngineConfig& engine = {}) {
  ScheduleCursor cursor(schedule, engine);
  cursor.advance_to(schedule.total_duration());
  return {cursor.state(), cursor.success_probability()};
}

struct Timing {
  double gt = 0.0;
  double seconds = 0.0;
};

inline Timing make_timing(double gt, double g_rad_per_s) { return {gt, gt / g_rad_per_s}; }

struct ProtocolResult {
  State final_state;
  Ket target;
  double fidelity = 0.0;
  std::optional<cplx> global_phase;  // phase of <target|psi>, pure final states only
  std::map<std::string, Timing> timings;
  double success_probability = 1.0;
  PulseSchedule schedule;
  std::map<std::string, double> metrics;
};

struct ProtocolOptions {
  double g_rad_per_s = kDefaultCouplingRadPerSec;
  EngineConfig engine;
  std::optional<int> fock_cutoff;  // frequency translation only
};

enum class StartKind { heralded, injected };
enum class LasersOnVariant { standard_plus, standard_minus, perfect_plus, perfect_minus };
enum class SuperPiKind { standard, perfect, alpha_max };

/// Single-photon W-type state sum_n c_n |1_n>|0_ph> (normalized).
inline Ket w_type_state(const BasisPtr& basis, std::span<const cplx> coefficients) {
  const std::size_t phonon = basis->mode_count() - 1;
  if (coefficients.size() > phonon) throw ConfigError("more W coefficients than pump modes");
  Ket psi(basis);
  Occupation occ(basis->mode_count(), 0);
  for (std::size_t n = 0; n < coefficients.size(); ++n) {
    occ[n] = 1;
    psi.amplitudes()[static_cast<Eigen::Index>(*basis->index_of(occ))] = coefficients[n];
    occ[n] = 0;
  }
  return psi.normalize();
}

inline Ket standard_w_state(const BasisPtr& basis, std::size_t n) {
  return w_type_state(basis, std::vector<cplx>(n, 1.0));
}

/// 1/sqrt(2) on the first pump mode, 1/sqrt(2(N-1)) on the others.
inline Ket perfect_w_state(const BasisPtr& basis, std::size_t n) {
  if (n < 2) throw ConfigError("perfect W state needs N >= 2");
  std::vector<cplx> c(n, 1.0 / std::sqrt(2.0 * static_cast<double>(n - 1)));
  c[0] = 1.0 / std::sqrt(2.0);
  return w_type_state(basis, c);
}

/// Amplitudes of |k> in `mode` with every other mode empty, k = 0..max_k.
inline std::vector<cplx> fock_coefficients(const Ket& psi, std::size_t mode, int max_k) {
  std::vector<cplx> out;
  Occupation occ(psi.basis().mode_count(), 0);
  for (int k = 0; k <= max_k; ++k) {
    occ[mode] = k;
    out.push_back(psi.amplitude(occ));
  }
  return out;
}

/// Multiplier picked up by each photon moved from pump i to pump j by two pi-pulses.
inline cplx translation_phase(double phi_i, double phi_j) { return -std::exp(cplx{0.0, -(phi_i - phi_j)}); }

/// r_1/alpha for the lasers-on-before-injection protocol.
inline double lasers_on_ratio(std::size_t n, LasersOnVariant v) {
  const double nn = static_cast<double>(n);
  switch (v) {
    case LasersOnVariant::standard_plus: return (nn - 1.0) / (std::sqrt(nn) + 1.0);
    case LasersOnVariant::standard_minus: return (nn - 1.0) / (std::sqrt(nn) - 1.0);
    case LasersOnVariant::perfect_plus: return std::sqrt((nn - 1.0) / (3.0 + std::sqrt(8.0)));
    case LasersOnVariant::perfect_minus: return std::sqrt((nn - 1.0) / (3.0 - std::sqrt(8.0)));
  }
  throw ConfigError("invalid lasers-on variant");
}

inline const char* to_string(LasersOnVariant v) {
  switch (v) {
    case LasersOnVariant::standard_plus: return "standard_plus";
    case LasersOnVariant::standard_minus: return "standard_minus";
    case LasersOnVariant::perfect_plus: return "perfect_plus";
    case LasersOnVariant::perfect_minus: return "perfect_minus";
  }
  return "?";
}

inline LasersOnVariant parse_lasers_on_variant(const std::string& s) {
  for (auto v : {LasersOnVariant::standard_plus, LasersOnVariant::standard_minus, LasersOnVariant::perfect_plus,
                 LasersOnVariant::perfect_minus})
    if (s == to_string(v)) return v;
  throw ConfigError("invalid lasers-on variant '" + s + "'");
}

inline StartKind parse_start_kind(const std::string& s) {
  if (s == "heralded") return StartKind::heralded;
  if (s == "injected") return StartKind::injected;
  throw ConfigError("start must be 'heralded' or 'injected', got '" + s + "'");
}

/// t_W (standard, equal amplitudes), t_W,p (perfect) or tau(alpha_max) = pi/(2 sqrt(eta)).
inline Timing super_pi_time(std::size_t n, const Drive& drive, SuperPiKind kind,
                            double g_rad_per_s = kDefaultCouplingRadPerSec) {
  if (!drive.active()) throw ConfigError("super pi-pulse time needs a nonzero drive");
  if (drive.size() != n) throw ConfigError("drive length does not match N");
  constexpr double rel = 1e-9;
  const double pi = std::numbers::pi;
  switch (kind) {
    case SuperPiKind::alpha_max: return make_timing(pi / (2.0 * drive.collective_rate()), g_rad_per_s);
    case SuperPiKind::standard: {
      const double a = drive.r(0);
      for (std::size_t k = 1; k < n; ++k)
        if (std::abs(drive.r(k) - a) > rel * a) throw ConfigError("standard W timing needs equal amplitudes");
      return make_timing(pi / (2.0 * a * std::sqrt(static_cast<double>(n))), g_rad_per_s);
    }
    case SuperPiKind::perfect: {
      if (n < 2) throw ConfigError("perfect W timing needs N >= 2");
      const double a = drive.r(1);
      for (std::size_t k = 2; k < n; ++k)
        if (std::abs(drive.r(k) - a) > rel * a) throw ConfigError("perfect W timing needs r_2..r_N equal");
      if (std::abs(drive.r(0) - a * std::sqrt(n - 1.0)) > rel * a * std::sqrt(n - 1.0))
        throw ConfigError("perfect W timing needs r_1 = alpha sqrt(N-1)");
      return make_timing(pi / (2.0 * a * std::sqrt(2.0 * (n - 1.0))), g_rad_per_s);
    }
  }
  throw ConfigError("invalid super pi-pulse kind");
}

namespace detail {

inline ProtocolResult finish(PulseSchedule schedule, Ket target, const ProtocolOptions& opts,
                             std::map<std::string, Timing> timings) {
  schedule.validate();
  auto exec = run_schedule(schedule, opts.engine);
  const Ket& tgt = target;
  ProtocolResult r{exec.state, tgt, 0.0, std::nullopt, std::move(timings), exec.success_probability, schedule, {}};
  r.fidelity = fidelity(r.final_state, r.target);
  if (const auto* psi = std::get_if<Ket>(&r.final_state)) {
    const cplx overlap = r.target.inner(*psi);
    if (std::abs(overlap) > 0.0) r.global_phase = overlap / std::abs(overlap);
  }
  return r;
}

inline void require_positive(double v, const char* name) {
  if (!(v > 0.0)) throw ConfigError(std::string(name) + " must be > 0");
}

}  // namespace detail

/// Two-mode squeezing of the Stokes/phonon vacuum followed by detection of one
/// Stokes photon. The returned final state lives on a phonon-only basis.
/// Throws for xi = 0 (the heralding probability vanishes).
inline ProtocolResult herald_phonon(cplx xi, int cutoff) {
  if (cutoff < 2) throw ConfigError("heralding needs a cutoff >= 2");
  const double r = std::abs(xi);
  if (r == 0.0) throw ConfigError("heralding probability is zero for xi = 0");
  const double lambda = std::pow(std::tanh(r), 2);
  const double tail = std::pow(lambda, cutoff - 1);  // P(n >= cutoff-1) of the ideal squeezed vacuum
  if (tail >= 1e-6)
    throw ConfigError("truncation budget exceeded: P(n >= cutoff-1) = " + std::to_string(tail) +
                      " for |xi| = " + std::to_string(r) + "; raise the cutoff");

  const auto pair_basis = build_basis(2, {cutoff, cutoff});
  const Ket vac = Ket::basis_state(pair_basis, Occupation{0, 0});
  const Ket squeezed(pair_basis, expm_multiply(build_squeezer_generator(pair_basis, xi), 1.0, vac.amplitudes()));

  const auto phonon_basis = build_basis(1, {cutoff});
  Ket heralded(phonon_basis);
  for (int n = 0; n <= cutoff; ++n) heralded.amplitudes()[n] = squeezed.amplitude(Occupation{1, n});
  const double success = heralded.norm() * heralded.norm();
  heralded.normalize();

  const Ket target = Ket::basis_state(phonon_basis, Occupation{1});
  PulseSchedule sched;
  sched.initial_state = InitialState::vacuum();
  ProtocolResult res{heralded, target, fidelity(heralded, target), std::nullopt, {}, success, sched, {}};
  const cplx amp = heralded.amplitudes()[1];
  res.global_phase = amp / std::abs(amp);
  res.metrics["heralded_phase"] = std::arg(amp);
  res.metrics["squeezed_norm"] = squeezed.norm();
  return res;
}

/// One square pulse on `pair` with |alpha| = r for duration fraction * pi/(2r).
/// Starting from a photon in pump `pair`, the target is the single phonon.
inline ProtocolResult pi_pulse_swap(std::size_t pair, double r, double phi, const ProtocolOptions& opts = {},
                                    double fraction = 1.0, std::size_t n_pairs = 0) {
  detail::require_positive(r, "pi-pulse amplitude r");
  detail::require_positive(fraction, "pulse fraction");
  if (n_pairs == 0) n_pairs = pair + 1;
  PulseSchedule s;
  s.n_pairs = n_pairs;
  s.initial_state = InitialState::photon(pair);
  const double t_pi = std::numbers::pi / (2.0 * r);
  s.segments.push_back({Drive::single(n_pairs, pair, r, phi), fraction * t_pi, "pi-pulse"});
  const BasisPtr basis = s.make_basis();
  Occupation occ(n_pairs + 1, 0);
  occ[n_pairs] = 1;
  return detail::finish(s, Ket::basis_state(basis, occ), opts,
                        {{"t_pi", make_timing(t_pi, opts.g_rad_per_s)},
                         {"pulse", make_timing(fraction * t_pi, opts.g_rad_per_s)}});
}

namespace detail {

/// Injected starts swap the photon into the phonon with a pi-pulse of the same
/// collective rate as the following super pi-pulse.
inline void prepend_injection(PulseSchedule& s, StartKind start, std::size_t inject_pair, double rate,
                              std::map<std::string, Timing>& timings, double g) {
  if (start == StartKind::heralded) {
    s.initial_state = InitialState::phonon(1);
    return;
  }
  if (inject_pair >= s.n_pairs) throw ConfigError("inject_pair out of range");
  s.initial_state = InitialState::photon(inject_pair);
  const double t_pi = std::numbers::pi / (2.0 * rate);
  s.segments.push_back({Drive::single(s.n_pairs, inject_pair, rate), t_pi, "pi-pulse"});
  timings["t_pi"] = make_timing(t_pi, g);
}

}  // namespace detail

/// Super pi-pulse with equal amplitudes alpha on N Stokes modes, t_W = pi/(2 alpha sqrt(N)).
inline ProtocolResult synthesize_w_standard(std::size_t n, double alpha, StartKind start, std::size_t inject_pair = 0,
                                            const ProtocolOptions& opts = {}) {
  if (n < 2) throw ConfigError("W-state synthesis needs N >= 2");
  detail::require_positive(alpha, "alpha");
  PulseSchedule s;
  s.n_pairs = n;
  const Drive drive = Drive::uniform(n, alpha);
  std::map<std::string, Timing> timings;
  detail::prepend_injection(s, start, inject_pair, drive.collective_rate(), timings, opts.g_rad_per_s);
  const Timing t_w = super_pi_time(n, drive, SuperPiKind::standard, opts.g_rad_per_s);
  s.segments.push_back({drive, t_w.gt, "super-pi-pulse"});
  timings["t_W"] = t_w;
  timings["total"] = make_timing(s.total_duration(), opts.g_rad_per_s);
  return detail::finish(s, standard_w_state(s.make_basis(), n), opts, std::move(timings));
}

/// r_1 = alpha sqrt(N-1), r_2..N = alpha, t_W,p = pi/(2 alpha sqrt(2(N-1))).
inline ProtocolResult synthesize_w_perfect(std::size_t n, double alpha, StartKind start, std::size_t inject_pair = 0,
                                           const ProtocolOptions& opts = {}) {
  if (n < 2) throw ConfigError("W-state synthesis needs N >= 2");
  detail::require_positive(alpha, "alpha");
  PulseSchedule s;
  s.n_pairs = n;
  Drive drive = Drive::uniform(n, alpha);
  drive.amplitudes[0] = alpha * std::sqrt(static_cast<double>(n - 1));
  std::map<std::string, Timing> timings;
  detail::prepend_injection(s, start, inject_pair, drive.collective_rate(), timings, opts.g_rad_per_s);
  const Timing t_w = super_pi_time(n, drive, SuperPiKind::perfect, opts.g_rad_per_s);
  s.segments.push_back({drive, t_w.gt, "super-pi-pulse"});
  timings["t_W,p"] = t_w;
  timings["total"] = make_timing(s.total_duration(), opts.g_rad_per_s);
  return detail::finish(s, perfect_w_state(s.make_basis(), n), opts, std::move(timings));
}

/// Photon injected into pump 0 with every Stokes drive already on; r_1 = ratio * alpha,
/// evolution for t_W = pi/sqrt(eta). The target carries the real signs the protocol
/// imprints (plus branches flip mode 0 relative to the rest); the fidelity to the
/// all-positive W state is reported as metrics["fidelity_canonical"].
inline ProtocolResult synthesize_w_lasers_on(std::size_t n, double alpha, LasersOnVariant variant,
                                             const ProtocolOptions& opts = {}) {
  if (n < 2) throw ConfigError("W-state synthesis needs N >= 2");
  detail::require_positive(alpha, "alpha");
  const double ratio = lasers_on_ratio(n, variant);
  PulseSchedule s;
  s.n_pairs = n;
  s.initial_state = InitialState::photon(0);
  Drive drive = Drive::uniform(n, alpha);
  drive.amplitudes[0] = ratio * alpha;
  const double eta = drive.eta();
  const double t_w = std::numbers::pi / std::sqrt(eta);
  s.segments.push_back({drive, t_w, "lasers-on"});

  const bool perfect = variant == LasersOnVariant::perfect_plus || variant == LasersOnVariant::perfect_minus;
  const BasisPtr basis = s.make_basis();
  // Ideal amplitudes at cos(gt sqrt(eta)) = -1: 1 - 2 r_1^2/eta on mode 0, -2 r_1 r_n/eta elsewhere.
  const double r1 = drive.r(0);
  std::vector<cplx> canonical(n, perfect ? 1.0 / std::sqrt(2.0 * (n - 1.0)) : 1.0 / std::sqrt(double(n)));
  if (perfect) canonical[0] = 1.0 / std::sqrt(2.0);
  std::vector<cplx> signed_target = canonical;
  if (1.0 - 2.0 * r1 * r1 / eta < 0.0) signed_target[0] = -signed_target[0];
  for (std::size_t k = 1; k < n; ++k) signed_target[k] = -signed_target[k];

  auto res = detail::finish(s, w_type_state(basis, signed_target), opts,
                            {{"t_W", make_timing(t_w, opts.g_rad_per_s)},
                             {"total", make_timing(t_w, opts.g_rad_per_s)}});
  res.metrics["ratio_r1_over_alpha"] = ratio;
  res.metrics["fidelity_canonical"] = fidelity(res.final_state, w_type_state(basis, canonical));
  return res;
}

/// Two pi-pulses, pump i -> phonon -> pump j. `input` must be a state of pump mode i.
inline ProtocolResult frequency_translate(std::size_t i, std::size_t j, double r_i, double r_j, double phi_i,
                                          double phi_j, const InitialState& input, const ProtocolOptions& opts = {}) {
  if (i == j) throw ConfigError("frequency translation needs distinct pump modes i != j");
  detail::require_positive(r_i, "r_i");
  detail::require_positive(r_j, "r_j");
  if (input.kind != InitialState::Kind::pump_fock || input.pump_mode != i)
    throw ConfigError("frequency translation input must be a photonic state in pump mode i");
  const int top = input.max_excitation();
  if (opts.fock_cutoff && *opts.fock_cutoff < top)
    throw ConfigError("Fock cutoff " + std::to_string(*opts.fock_cutoff) + " too small for input with level " +
                      std::to_string(top));

  PulseSchedule s;
  s.n_pairs = std::max(i, j) + 1;
  s.initial_state = input;
  const double t_i = std::numbers::pi / (2.0 * r_i);
  const double t_j = std::numbers::pi / (2.0 * r_j);
  s.segments.push_back({Drive::single(s.n_pairs, i, r_i, phi_i), t_i, "pi-pulse i"});
  s.segments.push_back({Drive::single(s.n_pairs, j, r_j, phi_j), t_j, "pi-pulse j"});

  const BasisPtr basis = s.make_basis();
  const Ket in = input.build(basis);
  const cplx factor = translation_phase(phi_i, phi_j);
  Ket target(basis);
  Occupation occ(basis->mode_count(), 0);
  for (int k = 0; k <= top; ++k) {
    occ[i] = k;
    const cplx c = in.amplitude(occ);
    occ[i] = 0;
    occ[j] = k;
    target.amplitudes()[static_cast<Eigen::Index>(*basis->index_of(occ))] = c * std::pow(factor, k);
    occ[j] = 0;
  }
  return detail::finish(s, target, opts,
                        {{"t_pi_i", make_timing(t_i, opts.g_rad_per_s)},
                         {"t_pi_j", make_timing(t_j, opts.g_rad_per_s)},
                         {"t_qft", make_timing(t_i + t_j, opts.g_rad_per_s)}});
}

}  // namespace fbs
