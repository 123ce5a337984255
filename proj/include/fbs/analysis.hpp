#pragma once

// Probability traces, fidelity sweeps and their CSV/SVG renderings.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fbs/metrics.hpp"
#include "fbs/protocols.hpp"
#include "fbs/state_io.hpp"

namespace fbs {

/// Sampled series sharing one abscissa (gt for time traces, the swept
/// parameter for sweeps).
struct Trace {
  std::string x_label = "gt";
  std::string y_label = "probability";
  std::vector<double> x;
  std::vector<std::string> labels;
  std::vector<std::vector<double>> series;
  std::vector<double> markers;  // vertical guides, e.g. odd multiples of t_W
  std::map<std::string, std::string> metadata;

  void add_series(std::string label, std::vector<double> values) {
    if (values.size() != x.size())
      throw ConfigError("series '" + label + "' has " + std::to_string(values.size()) + " samples, expected " +
                        std::to_string(x.size()));
    labels.push_back(std::move(label));
    series.push_back(std::move(values));
  }

  const std::vector<double>& at(const std::string& label) const {
    const auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) throw ConfigError("no series named '" + label + "'");
    return series[static_cast<std::size_t>(it - labels.begin())];
  }
};

struct NamedPattern {
  std::string label;
  OccupationPredicate predicate;
  bool photonic = false;  // counts toward the W sum
};

/// P_1..P_N (one photon in pump n, nothing else) and P_ph (one phonon, pumps empty).
inline std::vector<NamedPattern> single_excitation_patterns(std::size_t n_pairs) {
  std::vector<NamedPattern> out;
  for (std::size_t n = 0; n < n_pairs; ++n) {
    Occupation occ(n_pairs + 1, 0);
    occ[n] = 1;
    out.push_back({"P_" + std::to_string(n + 1), patterns::exactly(occ), true});
  }
  Occupation ph(n_pairs + 1, 0);
  ph[n_pairs] = 1;
  out.push_back({"P_ph", patterns::exactly(ph), false});
  return out;
}

struct TraceOptions {
  std::size_t samples = 201;
  bool include_w_sum = true;  // adds "W" = sum of the photonic patterns
  double t_end = -1.0;        // < 0: the schedule duration
};

/// Samples the pattern probabilities on a uniform grid of gt.
inline Trace probability_trace(const PulseSchedule& schedule, const std::vector<NamedPattern>& pats,
                               const EngineConfig& engine = {}, const TraceOptions& opts = {}) {
  if (opts.samples < 2) throw ConfigError("a trace needs at least 2 samples");
  if (pats.empty()) throw ConfigError("no series: pattern list is empty");
  const double t_end = opts.t_end < 0.0 ? schedule.total_duration() : opts.t_end;
  if (t_end > schedule.total_duration() * (1.0 + 1e-12))
    throw ConfigError("trace end exceeds the schedule duration");

  Trace tr;
  std::vector<std::vector<double>> values(pats.size());
  std::vector<double> w;
  ScheduleCursor cursor(schedule, engine);
  for (std::size_t i = 0; i < opts.samples; ++i) {
    const double t = t_end * static_cast<double>(i) / static_cast<double>(opts.samples - 1);
    cursor.advance_to(t);
    tr.x.push_back(t);
    double wsum = 0.0;
    for (std::size_t p = 0; p < pats.size(); ++p) {
      const double v = partial_probability(cursor.state(), pats[p].predicate);
      values[p].push_back(v);
      if (pats[p].photonic) wsum += v;
    }
    w.push_back(wsum);
  }
  for (std::size_t p = 0; p < pats.size(); ++p) tr.add_series(pats[p].label, std::move(values[p]));
  if (opts.include_w_sum && std::any_of(pats.begin(), pats.end(), [](const auto& p) { return p.photonic; }))
    tr.add_series("W", std::move(w));
  tr.metadata["initial_state"] = schedule.initial_state.describe();
  tr.metadata["n_pairs"] = std::to_string(schedule.n_pairs);
  return tr;
}

// ---------------------------------------------------------------- sweeps

enum class SweepProtocol { w_standard_heralded, w_standard_injected, w_perfect_heralded, w_perfect_injected, pi_pulse };
enum class SweepParameter { gamma_over_g, alpha_max, n };

inline const char* to_string(SweepParameter p) {
  switch (p) {
    case SweepParameter::gamma_over_g: return "gamma_over_g";
    case SweepParameter::alpha_max: return "alpha_max";
    case SweepParameter::n: return "n";
  }
  return "?";
}

inline SweepParameter parse_sweep_parameter(const std::string& s) {
  for (auto p : {SweepParameter::gamma_over_g, SweepParameter::alpha_max, SweepParameter::n})
    if (s == to_string(p)) return p;
  throw ConfigError("unknown sweep parameter '" + s + "'");
}

inline SweepProtocol parse_sweep_protocol(const std::string& s) {
  static const std::map<std::string, SweepProtocol> names{
      {"w-standard-heralded", SweepProtocol::w_standard_heralded},
      {"w-standard-injected", SweepProtocol::w_standard_injected},
      {"w-perfect-heralded", SweepProtocol::w_perfect_heralded},
      {"w-perfect-injected", SweepProtocol::w_perfect_injected},
      {"pi-pulse", SweepProtocol::pi_pulse}};
  const auto it = names.find(s);
  if (it == names.end()) throw ConfigError("unknown sweep protocol '" + s + "'");
  return it->second;
}

struct SweepSpec {
  SweepProtocol protocol = SweepProtocol::w_standard_heralded;
  SweepParameter parameter = SweepParameter::gamma_over_g;
  std::vector<double> values;
  // Base point; the swept parameter overrides one of these.
  std::size_t n = 3;
  double alpha_max = 4200.0;  // sqrt(eta) of every super pi-pulse, r of the pi-pulse
  double gamma_over_g = 0.0;
  double dt = 0.0;
  std::size_t max_threads = 0;  // 0: hardware concurrency
};

/// One sweep point. Amplitudes are chosen so the collective rate equals alpha_max.
inline ProtocolResult run_sweep_point(const SweepSpec& spec, double value) {
  std::size_t n = spec.n;
  double alpha_max = spec.alpha_max;
  ProtocolOptions opts;
  opts.engine.gamma_over_g = spec.gamma_over_g;
  opts.engine.dt = spec.dt;
  opts.engine.force_density = true;  // same engine across the sweep, lossless points included
  switch (spec.parameter) {
    case SweepParameter::gamma_over_g: opts.engine.gamma_over_g = value; break;
    case SweepParameter::alpha_max: alpha_max = value; break;
    case SweepParameter::n:
      if (value < 1.0 || value != std::floor(value)) throw ConfigError("swept N must be a positive integer");
      n = static_cast<std::size_t>(value);
      break;
  }
  const double nn = static_cast<double>(n);
  switch (spec.protocol) {
    case SweepProtocol::w_standard_heralded:
      return synthesize_w_standard(n, alpha_max / std::sqrt(nn), StartKind::heralded, 0, opts);
    case SweepProtocol::w_standard_injected:
      return synthesize_w_standard(n, alpha_max / std::sqrt(nn), StartKind::injected, 0, opts);
    case SweepProtocol::w_perfect_heralded:
      return synthesize_w_perfect(n, alpha_max / std::sqrt(2.0 * (nn - 1.0)), StartKind::heralded, 0, opts);
    case SweepProtocol::w_perfect_injected:
      return synthesize_w_perfect(n, alpha_max / std::sqrt(2.0 * (nn - 1.0)), StartKind::injected, 0, opts);
    case SweepProtocol::pi_pulse: return pi_pulse_swap(0, alpha_max, 0.0, opts, 1.0, n);
  }
  throw ConfigError("invalid sweep protocol");
}

/// Fidelity (and success probability) at every sweep value. Points run concurrently;
/// results are placed by index so the output order does not depend on scheduling.
inline Trace fidelity_sweep(const SweepSpec& spec) {
  if (spec.values.empty()) throw ConfigError("sweep has no values");
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t width = spec.max_threads ? spec.max_threads : hw;
  std::vector<double> fid(spec.values.size()), succ(spec.values.size());
  for (std::size_t start = 0; start < spec.values.size(); start += width) {
    std::vector<std::future<ProtocolResult>> jobs;
    const std::size_t stop = std::min(spec.values.size(), start + width);
    for (std::size_t i = start; i < stop; ++i)
      jobs.push_back(std::async(std::launch::async, run_sweep_point, std::cref(spec), spec.values[i]));
    for (std::size_t i = start; i < stop; ++i) {
      const auto r = jobs[i - start].get();
      fid[i] = r.fidelity;
      succ[i] = r.success_probability;
    }
  }
  Trace tr;
  tr.x_label = to_string(spec.parameter);
  tr.y_label = "fidelity";
  tr.x = spec.values;
  tr.add_series("fidelity", std::move(fid));
  tr.add_series("success_probability", std::move(succ));
  return tr;
}

/// True when `values` never increases by more than `slack` from one point to the next.
inline bool non_increasing(const std::vector<double>& values, double slack = 0.0) {
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[i - 1] + slack) return false;
  return true;
}

// ---------------------------------------------------------------- output

enum class Format { csv, svg };

inline Format parse_format(const std::string& s) {
  if (s == "csv") return Format::csv;
  if (s == "svg") return Format::svg;
  throw ConfigError("unknown output format '" + s + "' (expected csv or svg)");
}

inline void write_csv(std::ostream& os, const Trace& tr) {
  os << tr.x_label;
  for (const auto& l : tr.labels) os << ',' << l;
  os << '\n';
  for (std::size_t i = 0; i < tr.x.size(); ++i) {
    os << format_double(tr.x[i]);
    for (const auto& s : tr.series) os << ',' << format_double(s[i]);
    os << '\n';
  }
}

inline Trace read_csv(std::istream& is) {
  Trace tr;
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("csv: empty input");
  std::vector<std::string> head;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) head.push_back(cell);
  }
  if (head.empty()) throw ConfigError("csv: empty header");
  tr.x_label = head[0];
  tr.labels.assign(head.begin() + 1, head.end());
  tr.series.resize(tr.labels.size());
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    const std::string ctx = "csv line " + std::to_string(lineno);
    while (std::getline(ss, cell, ',')) row.push_back(detail::parse_double(cell, ctx));
    if (row.size() != head.size()) throw ConfigError(ctx + ": expected " + std::to_string(head.size()) + " fields");
    tr.x.push_back(row[0]);
    for (std::size_t k = 1; k < row.size(); ++k) tr.series[k - 1].push_back(row[k]);
  }
  return tr;
}

namespace detail {

inline std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace detail

/// Line plot: one polyline per series, the "W" series dashed, markers as
/// dashed vertical guides with a small arrowhead at the top.
inline void write_svg(std::ostream& os, const Trace& tr, const std::string& title = "") {
  if (tr.series.empty()) throw ConfigError("no series to plot");
  if (tr.x.size() < 2) throw ConfigError("a plot needs at least 2 samples");
  using detail::fmt;
  constexpr double W = 760, H = 480, ml = 70, mr = 150, mt = 40, mb = 60;
  const double pw = W - ml - mr, ph = H - mt - mb;
  const double x0 = *std::min_element(tr.x.begin(), tr.x.end());
  double x1 = *std::max_element(tr.x.begin(), tr.x.end());
  if (x1 == x0) x1 = x0 + 1.0;
  double y0 = 0.0, y1 = 1.0;
  for (const auto& s : tr.series)
    for (double v : s) {
      y0 = std::min(y0, v);
      y1 = std::max(y1, v);
    }
  const auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * pw; };
  const auto py = [&](double y) { return mt + (1.0 - (y - y0) / (y1 - y0)) * ph; };
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                 "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty())
    os << "<text x=\"" << ml + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
       << detail::svg_escape(title) << "</text>\n";
  os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double xv = x0 + (x1 - x0) * k / 5.0, yv = y0 + (y1 - y0) * k / 5.0;
    os << "<line x1=\"" << fmt("%.2f", px(xv)) << "\" y1=\"" << mt + ph << "\" x2=\"" << fmt("%.2f", px(xv))
       << "\" y2=\"" << mt + ph + 5 << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << fmt("%.2f", px(xv)) << "\" y=\"" << mt + ph + 18 << "\" text-anchor=\"middle\">"
       << fmt("%.3g", xv) << "</text>\n";
    os << "<line x1=\"" << ml - 5 << "\" y1=\"" << fmt("%.2f", py(yv)) << "\" x2=\"" << ml << "\" y2=\""
       << fmt("%.2f", py(yv)) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << ml - 8 << "\" y=\"" << fmt("%.2f", py(yv) + 4) << "\" text-anchor=\"end\">"
       << fmt("%.2f", yv) << "</text>\n";
  }
  os << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">"
     << detail::svg_escape(tr.x_label) << "</text>\n";
  os << "<text x=\"18\" y=\"" << mt + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
     << mt + ph / 2 << ")\">" << detail::svg_escape(tr.y_label) << "</text>\n";

  for (double m : tr.markers) {
    if (m < x0 || m > x1) continue;
    const std::string xm = fmt("%.2f", px(m));
    os << "<line x1=\"" << xm << "\" y1=\"" << mt << "\" x2=\"" << xm << "\" y2=\"" << mt + ph
       << "\" stroke=\"#999\" stroke-dasharray=\"2,3\"/>\n";
    os << "<path d=\"M" << xm << ' ' << mt + 10 << " l-5 -9 l10 0 z\" fill=\"#d62728\"/>\n";
  }

  for (std::size_t s = 0; s < tr.series.size(); ++s) {
    const bool w = tr.labels[s] == "W";
    const char* color = w ? "black" : colors[s % 10];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\""
       << (w ? " stroke-dasharray=\"6,4\"" : "") << " points=\"";
    for (std::size_t i = 0; i < tr.x.size(); ++i)
      os << fmt("%.2f", px(tr.x[i])) << ',' << fmt("%.2f", py(tr.series[s][i])) << ' ';
    os << "\"/>\n";
    const double ly = mt + 14 + 20.0 * static_cast<double>(s);
    os << "<line x1=\"" << ml + pw + 14 << "\" y1=\"" << ly << "\" x2=\"" << ml + pw + 44 << "\" y2=\"" << ly
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"" << (w ? " stroke-dasharray=\"6,4\"" : "") << "/>\n";
    os << "<text x=\"" << ml + pw + 50 << "\" y=\"" << ly + 4 << "\">" << detail::svg_escape(tr.labels[s])
       << "</text>\n";
  }
  os << "</svg>\n";
}

/// Writes to `<path>.partial` and renames on success, so an interrupted run
/// never leaves a truncated file under the final name.
inline void write_atomically(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto partial = path;
  partial += ".partial";
  {
    std::ofstream out(partial);
    if (!out) throw Error("cannot open '" + partial.string() + "' for writing");
    body(out);
    out.flush();
    if (!out) throw Error("write failed for '" + partial.string() + "'");
  }
  std::filesystem::rename(partial, path);
}

inline void emit(const Trace& tr, Format format, const std::filesystem::path& path, const std::string& title = "") {
  if (tr.series.empty()) throw ConfigError("no series to emit");
  write_atomically(path, [&](std::ostream& os) {
    if (format == Format::csv) write_csv(os, tr);
    else write_svg(os, tr, title);
  });
}

inline Trace load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  return read_csv(in);
}

/// Two-column `param,metric` summary.
inline void write_summary_csv(const std::filesystem::path& path, const std::string& param, const std::string& metric,
                              const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw ConfigError("summary columns differ in length");
  write_atomically(path, [&](std::ostream& os) {
    os << param << ',' << metric << '\n';
    for (std::size_t i = 0; i < xs.size(); ++i) os << format_double(xs[i]) << ',' << format_double(ys[i]) << '\n';
  });
}

}  // namespace fbs
