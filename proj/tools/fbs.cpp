// fbs: command-line front end.
//
//   fbs simulate     --preset w-standard|w-perfect|w-lasers-on|qft|herald|pi-pulse, or --config with [[segment]]s
//   fbs oracle-check Wei-Norman vs matrix exponential on random drives
//   fbs figures      probability traces for the four reference plots
//   fbs sweep        fidelity against gamma/g, alpha_max or N
//
// Exit codes: 0 ok, 1 configuration error, 2 numerical failure, 3 oracle mismatch.
// Precedence: command-line flags > config file > built-in defaults.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "fbs/fbs.hpp"

namespace fs = std::filesystem;
using namespace fbs;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitOracle = 3;

struct SimulateFlags {
  std::string config;
  std::string preset;
  std::string out;
  std::string format;
  std::optional<std::uint64_t> seed;
  std::optional<double> gamma_over_g;
  std::optional<double> alpha_max;
  std::optional<long long> n;
  std::optional<double> dt;
  std::optional<long long> samples;
};

std::vector<Format> formats_from(const std::vector<std::string>& names) {
  std::vector<Format> out;
  for (const auto& f : names) out.push_back(parse_format(f));
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void emit_all(const Trace& tr, const std::vector<std::string>& formats, const fs::path& stem,
              const std::string& title) {
  for (const auto& f : formats) {
    const Format fmt = parse_format(f);
    fs::path p = stem;
    p += fmt == Format::csv ? ".csv" : ".svg";
    emit(tr, fmt, p, title);
  }
}

void write_density(std::ostream& os, const DensityOp& rho) {
  const Basis& b = rho.basis();
  os << "# fbs-rho modes=" << b.mode_count() << " cutoffs=" << format_occupation(b.cutoffs())
     << " total_cap=" << (b.total_cap() ? std::to_string(*b.total_cap()) : std::string("none")) << '\n';
  for (std::size_t i = 0; i < rho.dim(); ++i)
    for (std::size_t j = 0; j < rho.dim(); ++j) {
      const cplx v = rho.matrix()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (v == cplx{}) continue;
      os << format_occupation(b.occupation(i)) << '\t' << format_occupation(b.occupation(j)) << '\t'
         << format_double(v.real()) << '\t' << format_double(v.imag()) << '\n';
    }
}

void write_state(const fs::path& dir, const State& s) {
  if (const auto* psi = std::get_if<Ket>(&s))
    write_atomically(dir / "final_state.ket", [&](std::ostream& os) { write_ket(os, *psi); });
  else
    write_atomically(dir / "final_state.rho", [&](std::ostream& os) { write_density(os, std::get<DensityOp>(s)); });
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Resolved {
  RunConfig cfg;
  std::size_t n = 3;
  double alpha_max = 4200.0;
  double gamma_over_g = 0.0;
};

Resolved resolve(const SimulateFlags& fl) {
  Resolved r;
  if (!fl.config.empty()) r.cfg = load_run_config(fl.config);
  RunConfig& c = r.cfg;
  if (!fl.preset.empty()) {
    if (!known_presets().count(fl.preset)) throw ConfigError("unknown preset '" + fl.preset + "'");
    if (c.schedule) throw ConfigError("--preset conflicts with [[segment]] blocks in the config");
    c.preset = fl.preset;
  }
  if (!fl.out.empty()) c.output_dir = fl.out;
  if (!fl.format.empty()) {
    c.formats = split_list(fl.format);
    formats_from(c.formats);
  }
  if (fl.seed) c.seed = *fl.seed;
  if (fl.dt) c.dt = *fl.dt;
  if (fl.samples) c.samples = *fl.samples;
  if (c.samples < 2) throw ConfigError("samples must be >= 2");

  if (fl.n) r.n = static_cast<std::size_t>(*fl.n);
  else if (c.params.n) r.n = static_cast<std::size_t>(*c.params.n);
  else if (c.n_pairs_explicit) r.n = static_cast<std::size_t>(c.system.n_pairs);
  if (fl.n && *fl.n < 1) throw ConfigError("--n must be >= 1");

  if (fl.alpha_max) r.alpha_max = *fl.alpha_max;
  else if (c.params.alpha_max) r.alpha_max = *c.params.alpha_max;
  else if (c.power && c.power->alpha_max > 0) r.alpha_max = c.power->alpha_max;
  else if (c.power && c.power->power > 0) r.alpha_max = alpha_from_power(*c.power);
  if (!(r.alpha_max > 0)) throw ConfigError("alpha_max must be > 0");

  r.gamma_over_g = fl.gamma_over_g ? *fl.gamma_over_g : c.effective_gamma_over_g();
  if (r.gamma_over_g < 0) throw ConfigError("gamma/g must be >= 0");
  if (c.preset.empty() && !c.schedule)
    throw ConfigError("nothing to simulate: pass --preset or a config with a preset or [[segment]] blocks");
  return r;
}

ProtocolResult run_preset(const Resolved& r, ProtocolOptions opts, std::map<std::string, std::string>& info) {
  const RunConfig& c = r.cfg;
  const auto& p = c.params;
  const double nn = static_cast<double>(r.n);
  info["N"] = std::to_string(r.n);
  info["alpha_max"] = fmt("%.6g", r.alpha_max);
  if (c.preset == "w-standard") {
    const double alpha = p.alpha.value_or(r.alpha_max / std::sqrt(nn));
    info["alpha"] = fmt("%.6g", alpha);
    info["start"] = p.start;
    return synthesize_w_standard(r.n, alpha, parse_start_kind(p.start), static_cast<std::size_t>(p.inject_pair), opts);
  }
  if (c.preset == "w-perfect") {
    if (r.n < 2) throw ConfigError("w-perfect needs N >= 2");
    const double alpha = p.alpha.value_or(r.alpha_max / std::sqrt(2.0 * (nn - 1.0)));
    info["alpha"] = fmt("%.6g", alpha);
    info["start"] = p.start;
    return synthesize_w_perfect(r.n, alpha, parse_start_kind(p.start), static_cast<std::size_t>(p.inject_pair), opts);
  }
  if (c.preset == "w-lasers-on") {
    const auto v = parse_lasers_on_variant(p.variant);
    const double ratio = lasers_on_ratio(r.n, v);
    const double alpha = p.alpha.value_or(r.alpha_max / std::sqrt(ratio * ratio + nn - 1.0));
    info["alpha"] = fmt("%.6g", alpha);
    info["variant"] = p.variant;
    return synthesize_w_lasers_on(r.n, alpha, v, opts);
  }
  if (c.preset == "qft") {
    if (p.i < 0 || p.j < 0) throw ConfigError("qft mode indices must be >= 0");
    InitialState input = InitialState::photon(static_cast<std::size_t>(p.i));
    if (!p.fock_re.empty()) {
      if (!p.fock_im.empty() && p.fock_im.size() != p.fock_re.size())
        throw ConfigError("protocol.fock_im must match protocol.fock_re in length");
      std::vector<cplx> coeffs;
      for (std::size_t k = 0; k < p.fock_re.size(); ++k)
        coeffs.emplace_back(p.fock_re[k], p.fock_im.empty() ? 0.0 : p.fock_im[k]);
      input = InitialState::pump_superposition(static_cast<std::size_t>(p.i), coeffs);
    }
    if (p.fock_cutoff) opts.fock_cutoff = static_cast<int>(*p.fock_cutoff);
    info["i"] = std::to_string(p.i);
    info["j"] = std::to_string(p.j);
    info["output_mode"] = std::to_string(p.j);
    return frequency_translate(static_cast<std::size_t>(p.i), static_cast<std::size_t>(p.j),
                               p.r_i.value_or(r.alpha_max), p.r_j.value_or(r.alpha_max), p.phi_i, p.phi_j, input, opts);
  }
  if (c.preset == "pi-pulse") {
    if (p.pair < 0) throw ConfigError("protocol.pair must be >= 0");
    info["pair"] = std::to_string(p.pair);
    return pi_pulse_swap(static_cast<std::size_t>(p.pair), r.alpha_max, p.phi, opts, p.fraction);
  }
  if (c.preset == "herald") {
    info["xi_r"] = fmt("%.6g", c.herald.xi_r);
    info["xi_phi"] = fmt("%.6g", c.herald.xi_phi);
    info["cutoff"] = std::to_string(c.herald.cutoff);
    return herald_phonon(std::polar(c.herald.xi_r, c.herald.xi_phi), static_cast<int>(c.herald.cutoff));
  }
  throw ConfigError("unknown preset '" + c.preset + "'");
}

int cmd_simulate(const SimulateFlags& fl) {
  const Resolved r = resolve(fl);
  const RunConfig& c = r.cfg;
  ProtocolOptions opts;
  opts.g_rad_per_s = c.system.g;
  opts.engine.gamma_over_g = r.gamma_over_g;
  opts.engine.dt = c.dt;
  opts.engine.method = c.method;

  const fs::path out = c.output_dir;
  fs::create_directories(out);
  std::ostringstream report;
  report << "fbs " << kVersion << " simulate\n";
  report << "seed = " << c.seed << "\n";
  report << "gamma_over_g = " << format_double(r.gamma_over_g) << "\n";
  report << "g_rad_per_s = " << format_double(c.system.g) << "\n";

  PulseSchedule schedule;
  State final_state = Ket(excitation_basis(1, 1));
  if (!c.preset.empty()) {
    std::map<std::string, std::string> info;
    const ProtocolResult res = run_preset(r, opts, info);
    report << "preset = " << c.preset << "\n";
    for (const auto& [k, v] : info) report << k << " = " << v << "\n";
    report << "fidelity = " << fmt("%.10f", res.fidelity) << "\n";
    if (res.global_phase)
      report << "global_phase = " << fmt("%.10f", res.global_phase->real()) << (res.global_phase->imag() < 0 ? "" : "+")
             << fmt("%.10f", res.global_phase->imag()) << "i (arg " << fmt("%.10f", std::arg(*res.global_phase))
             << ")\n";
    report << "success_probability = " << fmt("%.10f", res.success_probability) << "\n";
    for (const auto& [k, t] : res.timings)
      report << "time." << k << " = " << format_double(t.gt) << " gt = " << fmt("%.6g", t.seconds * 1e9) << " ns\n";
    for (const auto& [k, v] : res.metrics) report << "metric." << k << " = " << format_double(v) << "\n";
    schedule = res.schedule;
    final_state = res.final_state;
  } else {
    schedule = *c.schedule;
    const auto exec = run_schedule(schedule, opts.engine);
    final_state = exec.state;
    report << "schedule_segments = " << schedule.segments.size() << "\n";
    report << "total_gt = " << format_double(schedule.total_duration()) << "\n";
    report << "success_probability = " << fmt("%.10f", exec.success_probability) << "\n";
    for (const auto& pat : single_excitation_patterns(schedule.n_pairs))
      report << "final." << pat.label << " = " << fmt("%.10f", partial_probability(final_state, pat.predicate)) << "\n";
  }

  write_state(out, final_state);
  if (!schedule.segments.empty()) {
    TraceOptions to;
    to.samples = static_cast<std::size_t>(c.samples);
    Trace tr = probability_trace(schedule, single_excitation_patterns(schedule.n_pairs), opts.engine, to);
    emit_all(tr, c.formats, out / "trace", c.preset.empty() ? "schedule" : c.preset);
    write_atomically(out / "schedule.toml", [&](std::ostream& os) { os << write_schedule(schedule); });
  }
  write_atomically(out / "report.txt", [&](std::ostream& os) { os << report.str(); });
  std::cout << report.str() << "outputs written to " << out.string() << "\n";
  return kExitOk;
}

struct OracleFlags {
  std::uint64_t seed = 1;
  int trials = 20;
  double tolerance = 1e-8;
  double corrupt = 0.0;
};

int cmd_oracle_check(const OracleFlags& fl) {
  std::mt19937_64 rng(fl.seed);
  std::uniform_real_distribution<double> amp(0.2, 2.0), phase(-std::numbers::pi, std::numbers::pi), unit(-1.0, 1.0);
  WeiNormanOptions wn;
  wn.coefficient_perturbation = fl.corrupt;
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  for (std::size_t n = 1; n <= 4; ++n) {
    const BasisPtr basis = excitation_basis(n, 1);
    double worst = 0.0;
    for (int trial = 0; trial < fl.trials; ++trial) {
      std::vector<double> r(n), phi(n);
      for (std::size_t k = 0; k < n; ++k) {
        r[k] = amp(rng);
        phi[k] = phase(rng);
      }
      const Drive drive = Drive::from_polar(r, phi);
      double s = 0.0;
      do s = 3.0 * std::abs(unit(rng)) + 0.01;
      while (std::abs(s - std::numbers::pi / 2) < 0.1);
      const double gt = s / drive.collective_rate();
      Ket psi(basis);
      for (std::size_t i = 0; i < psi.dim(); ++i) psi.amplitudes()[static_cast<Eigen::Index>(i)] = {unit(rng), unit(rng)};
      psi.normalize();
      const Ket a = wei_norman_evolve(drive, psi, gt, wn);
      const Ket b = evolve_exact(build_classical_pump_hamiltonian(drive, basis), psi, gt);
      const double err = (a.amplitudes() - b.amplitudes()).norm();
      worst = std::max(worst, err);
      if (err > fl.tolerance && ok) {
        ok = false;
        std::printf("MISMATCH N=%zu trial=%d gt=%.17g s=%.6f error=%.3e\n", n, trial, gt, s, err);
      }
    }
    std::printf("N=%zu trials=%d max_l2_error=%.3e %s\n", n, fl.trials, worst, worst <= fl.tolerance ? "ok" : "FAIL");
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("oracle-check: seed=%llu tolerance=%.1e elapsed=%.3fs %s\n", static_cast<unsigned long long>(fl.seed),
              fl.tolerance, secs, ok ? "PASS" : "FAIL");
  return ok ? kExitOk : kExitOracle;
}

struct FigureFlags {
  std::string out = "figures";
  std::string format = "csv,svg";
  long long samples = 601;
};

int cmd_figures(const FigureFlags& fl) {
  const auto formats = split_list(fl.format);
  formats_from(formats);
  if (fl.samples < 2) throw ConfigError("samples must be >= 2");
  TraceOptions to;
  to.samples = static_cast<std::size_t>(fl.samples);
  const double pi = std::numbers::pi;
  constexpr std::size_t n = 3;

  struct Fig {
    std::string name, title;
    Drive drive;
    InitialState init;
    double periods;  // duration in units of pi/sqrt(eta)
    std::vector<double> marker_s;  // marker positions in units of pi/sqrt(eta)
  };
  std::vector<Fig> figs;
  figs.push_back({"w_standard", "standard W, N=3, alpha=2424, phonon start", Drive::uniform(n, 2424.0),
                  InitialState::phonon(1), 3.0, {0.5, 1.5, 2.5}});
  Drive perfect = Drive::uniform(n, 2100.0);
  perfect.amplitudes[0] = 2100.0 * std::sqrt(2.0);
  figs.push_back({"w_perfect", "perfect W, N=3, alpha=2100, phonon start", perfect, InitialState::phonon(1), 3.0,
                  {0.5, 1.5, 2.5}});
  Drive plus = Drive::uniform(n, 2637.0);
  plus.amplitudes[0] = 2637.0 * lasers_on_ratio(n, LasersOnVariant::standard_plus);
  figs.push_back({"lasers_on_plus", "lasers on, plus branch, N=3, alpha=2637, photon in pump 1", plus, InitialState::photon(0),
                  4.0, {1.0, 3.0}});
  Drive minus = Drive::uniform(n, 1365.0);
  minus.amplitudes[0] = 1365.0 * lasers_on_ratio(n, LasersOnVariant::standard_minus);
  figs.push_back({"lasers_on_minus", "lasers on, minus branch, N=3, alpha=1365, photon in pump 1", minus,
                  InitialState::photon(0), 4.0, {1.0, 3.0}});

  for (const auto& f : figs) {
    const double unit = pi / f.drive.collective_rate();
    PulseSchedule s;
    s.n_pairs = n;
    s.initial_state = f.init;
    s.segments.push_back({f.drive, f.periods * unit, f.name});
    Trace tr = probability_trace(s, single_excitation_patterns(n), {}, to);
    for (double m : f.marker_s) tr.markers.push_back(m * unit);
    emit_all(tr, formats, fs::path(fl.out) / f.name, f.title);
    std::printf("%s: sqrt(eta)=%.1f duration_gt=%.6e samples=%lld\n", f.name.c_str(), f.drive.collective_rate(),
                f.periods * unit, fl.samples);
  }
  return kExitOk;
}

struct SweepFlags {
  std::string protocol = "w-standard-heralded";
  std::string param = "gamma_over_g";
  std::string values = "0,100,300,600,1000,1800";
  std::string out = "sweep";
  std::string format = "csv,svg";
  long long n = 3;
  double alpha_max = 4200.0;
  double gamma_over_g = 0.0;
};

int cmd_sweep(const SweepFlags& fl) {
  SweepSpec spec;
  spec.protocol = parse_sweep_protocol(fl.protocol);
  spec.parameter = parse_sweep_parameter(fl.param);
  for (const auto& v : split_list(fl.values)) spec.values.push_back(detail::parse_double(v, "--values"));
  if (fl.n < 1) throw ConfigError("--n must be >= 1");
  spec.n = static_cast<std::size_t>(fl.n);
  spec.alpha_max = fl.alpha_max;
  spec.gamma_over_g = fl.gamma_over_g;
  const auto formats = split_list(fl.format);
  formats_from(formats);
  const Trace tr = fidelity_sweep(spec);
  emit_all(tr, formats, fs::path(fl.out) / "sweep", fl.protocol);
  write_summary_csv(fs::path(fl.out) / "summary.csv", fl.param, "fidelity", tr.x, tr.at("fidelity"));
  for (std::size_t i = 0; i < tr.x.size(); ++i)
    std::printf("%s=%.6g fidelity=%.6f\n", fl.param.c_str(), tr.x[i], tr.at("fidelity")[i]);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frequency-bin photonic states from forward Brillouin scattering: simulator"};
  app.set_version_flag("--version", std::string("fbs ") + kVersion + " (built " __DATE__ ", " +
                                        (std::string("g++ ") + __VERSION__) + ")");
  app.require_subcommand(1);

  SimulateFlags sf;
  auto* sim = app.add_subcommand("simulate", "run a preset protocol or a configured pulse schedule");
  sim->add_option("--config", sf.config, "TOML-subset config file")->check(CLI::ExistingFile);
  sim->add_option("--preset", sf.preset, "w-standard | w-perfect | w-lasers-on | qft | herald | pi-pulse");
  sim->add_option("--out", sf.out, "output directory (default: config output.dir, else ./out)");
  sim->add_option("--format", sf.format, "comma-separated: csv,svg");
  sim->add_option("--seed", sf.seed, "RNG seed, recorded in the report");
  sim->add_option("--gamma-over-g", sf.gamma_over_g, "pump amplitude decay rate in units of g");
  sim->add_option("--alpha-max", sf.alpha_max, "collective drive sqrt(eta)");
  sim->add_option("--n", sf.n, "number of pump/Stokes pairs");
  sim->add_option("--dt", sf.dt, "master-equation step in gt (default 0.05/max(gamma/g, sqrt(eta)))");
  sim->add_option("--samples", sf.samples, "trace samples");

  OracleFlags of;
  auto* oracle = app.add_subcommand("oracle-check", "compare Wei-Norman evolution with the matrix exponential");
  oracle->add_option("--seed", of.seed, "RNG seed");
  oracle->add_option("--trials", of.trials, "random drives per N")->check(CLI::PositiveNumber);
  oracle->add_option("--tolerance", of.tolerance, "maximum L2 error");
  oracle->add_option("--corrupt-coefficient", of.corrupt)->group("");  // test hook

  FigureFlags ff;
  auto* figs = app.add_subcommand("figures", "write the reference probability traces");
  figs->add_option("--out", ff.out, "output directory");
  figs->add_option("--format", ff.format, "comma-separated: csv,svg");
  figs->add_option("--samples", ff.samples, "samples per trace");

  SweepFlags wf;
  auto* sweep = app.add_subcommand("sweep", "fidelity against one parameter");
  sweep->add_option("--protocol", wf.protocol,
                    "w-standard-heralded | w-standard-injected | w-perfect-heralded | w-perfect-injected | pi-pulse");
  sweep->add_option("--param", wf.param, "gamma_over_g | alpha_max | n");
  sweep->add_option("--values", wf.values, "comma-separated values");
  sweep->add_option("--out", wf.out, "output directory");
  sweep->add_option("--format", wf.format, "comma-separated: csv,svg");
  sweep->add_option("--n", wf.n, "number of pairs");
  sweep->add_option("--alpha-max", wf.alpha_max, "collective drive sqrt(eta)");
  sweep->add_option("--gamma-over-g", wf.gamma_over_g, "loss rate when not swept");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*sim) return cmd_simulate(sf);
    if (*oracle) return cmd_oracle_check(of);
    if (*figs) return cmd_figures(ff);
    if (*sweep) return cmd_sweep(wf);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const BasisMismatch& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}
