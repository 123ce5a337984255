#pragma once

// Run configuration in a small TOML subset: comments, `key = value` with
// numbers, strings, booleans and single- or multi-line arrays of those, dotted
// keys, [table] headers and [[segment]] arrays of tables. Anything else is an
// error with a line number. Unknown keys are rejected so typos surface.

#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "fbs/analysis.hpp"
#include "fbs/hamiltonians.hpp"
#include "fbs/protocols.hpp"
#include "fbs/state_io.hpp"

namespace fbs {

using TomlScalar = std::variant<double, bool, std::string>;

struct TomlValue {
  std::vector<TomlScalar> items;
  bool is_array = false;
  std::size_t line = 0;
};

using TomlTable = std::map<std::string, TomlValue>;

struct TomlDocument {
  TomlTable root;                                      // dotted keys, tables flattened
  std::map<std::string, std::vector<TomlTable>> arrays;  // [[name]] blocks
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

inline std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_str = !in_str;
    if (line[i] == '#' && !in_str) return line.substr(0, i);
  }
  return line;
}

inline bool valid_key(const std::string& k) {
  if (k.empty() || k.front() == '.' || k.back() == '.') return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
  return k.find("..") == std::string::npos;
}

class TomlParser {
 public:
  TomlParser(std::string_view text, std::string_view name) : text_(text), name_(name) {}

  TomlDocument parse() {
    TomlDocument doc;
    TomlTable* target = &doc.root;
    std::string prefix;
    std::set<std::string> seen_tables;
    std::istringstream in{std::string(text_)};
    std::string raw;
    while (std::getline(in, raw)) {
      ++line_;
      std::string l = trim(strip_comment(raw));
      if (l.empty()) continue;
      if (l.rfind("[[", 0) == 0) {
        if (l.size() < 4 || l.substr(l.size() - 2) != "]]") fail("malformed array-of-tables header");
        const std::string name = trim(std::string_view(l).substr(2, l.size() - 4));
        if (!valid_key(name)) fail("bad table name '" + name + "'");
        auto& vec = doc.arrays[name];
        vec.emplace_back();
        target = &vec.back();
        prefix.clear();
        continue;
      }
      if (l.front() == '[') {
        if (l.back() != ']') fail("malformed table header");
        const std::string name = trim(std::string_view(l).substr(1, l.size() - 2));
        if (!valid_key(name)) fail("bad table name '" + name + "'");
        if (!seen_tables.insert(name).second) fail("table [" + name + "] defined twice");
        target = &doc.root;
        prefix = name + ".";
        continue;
      }
      const auto eq = l.find('=');
      if (eq == std::string::npos) fail("expected key = value");
      const std::string key = trim(std::string_view(l).substr(0, eq));
      if (!valid_key(key)) fail("bad key '" + key + "'");
      std::string value = trim(std::string_view(l).substr(eq + 1));
      // multi-line arrays: keep reading until the brackets balance
      while (!value.empty() && value.front() == '[' && !balanced(value)) {
        if (!std::getline(in, raw)) fail("unterminated array for key '" + key + "'");
        ++line_;
        value += " " + trim(strip_comment(raw));
      }
      const std::string full = prefix + key;
      if (target->count(full)) fail("duplicate key '" + full + "'");
      TomlValue v = parse_value(value);
      v.line = line_;
      (*target)[full] = std::move(v);
    }
    return doc;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(std::string(name_) + ":" + std::to_string(line_) + ": " + what);
  }

  static bool balanced(const std::string& s) {
    int depth = 0;
    bool in_str = false;
    for (char c : s) {
      if (c == '"') in_str = !in_str;
      if (in_str) continue;
      if (c == '[') ++depth;
      if (c == ']') --depth;
    }
    return depth == 0;
  }

  TomlScalar parse_scalar(const std::string& s) const {
    if (s.empty()) fail("missing value");
    if (s.front() == '"') {
      if (s.size() < 2 || s.back() != '"') fail("unterminated string");
      std::string out;
      for (std::size_t i = 1; i + 1 < s.size(); ++i) {
        if (s[i] == '\\' && i + 2 < s.size()) {
          const char e = s[++i];
          out += e == 'n' ? '\n' : e == 't' ? '\t' : e;
        } else {
          out += s[i];
        }
      }
      return out;
    }
    if (s == "true") return true;
    if (s == "false") return false;
    std::string digits;
    for (char c : s)
      if (c != '_') digits += c;
    char* end = nullptr;
    const double v = std::strtod(digits.c_str(), &end);
    if (digits.empty() || end != digits.c_str() + digits.size()) fail("cannot parse value '" + s + "'");
    return v;
  }

  TomlValue parse_value(const std::string& s) const {
    TomlValue v;
    if (s.empty() || s.front() != '[') {
      v.items.push_back(parse_scalar(s));
      return v;
    }
    if (s.back() != ']') fail("malformed array");
    v.is_array = true;
    const std::string body = s.substr(1, s.size() - 2);
    std::string cur;
    bool in_str = false;
    for (char c : body) {
      if (c == '"') in_str = !in_str;
      if (c == ',' && !in_str) {
        const auto t = trim(cur);
        if (!t.empty()) v.items.push_back(parse_scalar(t));
        else fail("empty array element");
        cur.clear();
        continue;
      }
      if (c == '[' && !in_str) fail("nested arrays are not supported");
      cur += c;
    }
    const auto t = trim(cur);
    if (!t.empty()) v.items.push_back(parse_scalar(t));  // trailing comma allowed
    return v;
  }

  std::string_view text_;
  std::string_view name_;
  std::size_t line_ = 0;
};

}  // namespace detail

inline TomlDocument parse_toml(std::string_view text, std::string_view source_name = "config") {
  return detail::TomlParser(text, source_name).parse();
}

/// Typed, consumption-tracking view over one table.
class TableReader {
 public:
  TableReader(const TomlTable& t, std::string context) : table_(t), context_(std::move(context)) {}

  bool has(const std::string& key) const { return table_.count(key) > 0; }

  std::optional<double> number(const std::string& key) {
    const auto* v = scalar(key);
    if (!v) return std::nullopt;
    if (const auto* d = std::get_if<double>(v)) return *d;
    throw error(key, "expected a number");
  }

  std::optional<long long> integer(const std::string& key) {
    const auto d = number(key);
    if (!d) return std::nullopt;
    if (*d != std::floor(*d) || std::abs(*d) > 9.0e15) throw error(key, "expected an integer");
    return static_cast<long long>(*d);
  }

  std::optional<bool> boolean(const std::string& key) {
    const auto* v = scalar(key);
    if (!v) return std::nullopt;
    if (const auto* b = std::get_if<bool>(v)) return *b;
    throw error(key, "expected true or false");
  }

  std::optional<std::string> string(const std::string& key) {
    const auto* v = scalar(key);
    if (!v) return std::nullopt;
    if (const auto* s = std::get_if<std::string>(v)) return *s;
    throw error(key, "expected a string");
  }

  std::optional<std::vector<double>> numbers(const std::string& key) {
    const auto it = table_.find(key);
    if (it == table_.end()) return std::nullopt;
    used_.insert(key);
    std::vector<double> out;
    for (const auto& item : it->second.items) {
      const auto* d = std::get_if<double>(&item);
      if (!d) throw error(key, "expected an array of numbers");
      out.push_back(*d);
    }
    return out;
  }

  /// Throws for the first key nobody asked for.
  void reject_unknown() const {
    for (const auto& [k, v] : table_)
      if (!used_.count(k))
        throw ConfigError(context_ + ":" + std::to_string(v.line) + ": unknown key '" + k + "'");
  }

  ConfigError error(const std::string& key, const std::string& what) const {
    const auto it = table_.find(key);
    const std::string where = it == table_.end() ? context_ : context_ + ":" + std::to_string(it->second.line);
    return ConfigError(where + ": key '" + key + "': " + what);
  }

 private:
  const TomlScalar* scalar(const std::string& key) {
    const auto it = table_.find(key);
    if (it == table_.end()) return nullptr;
    used_.insert(key);
    if (it->second.is_array) throw error(key, "expected a scalar, got an array");
    return &it->second.items.front();
  }

  const TomlTable& table_;
  std::string context_;
  std::set<std::string> used_;
};

/// Parameters shared by the named presets. Unset fields take preset defaults.
struct PresetParams {
  std::optional<long long> n;
  std::optional<double> alpha;      // per-mode amplitude; derived from alpha_max when absent
  std::optional<double> alpha_max;  // collective rate sqrt(eta)
  std::string start = "heralded";
  std::string variant = "standard_plus";
  long long inject_pair = 0;
  long long i = 0, j = 1;
  std::optional<double> r_i, r_j;
  double phi_i = 0.0, phi_j = 0.0;
  std::vector<double> fock_re, fock_im;  // input of the qft preset; default a single photon
  std::optional<long long> fock_cutoff;
  long long pair = 0;  // pi-pulse
  double phi = 0.0;
  double fraction = 1.0;
};

struct HeraldParams {
  double xi_r = 0.5;
  double xi_phi = 0.0;
  long long cutoff = 40;
};

struct RunConfig {
  SystemSpec system;
  bool n_pairs_explicit = false;
  std::optional<Drive> drive;
  std::optional<PowerBudget> power;
  std::string preset;
  PresetParams params;
  HeraldParams herald;
  std::optional<PulseSchedule> schedule;
  std::optional<double> gamma_over_g;  // explicit [loss] value, else system.gamma / system.g
  double dt = 0.0;
  Integrator method = Integrator::rk4;
  std::string output_dir = "out";
  std::vector<std::string> formats{"csv"};
  std::uint64_t seed = 20240917;
  long long samples = 301;

  double effective_gamma_over_g() const { return gamma_over_g ? *gamma_over_g : system.gamma_over_g(); }
};

inline const std::set<std::string>& known_presets() {
  static const std::set<std::string> p{"w-standard", "w-perfect", "w-lasers-on", "qft", "herald", "pi-pulse"};
  return p;
}

namespace detail {

inline std::vector<double> phases_or_zero(TableReader& t, const std::string& key, std::size_t n) {
  auto phi = t.numbers(key);
  if (!phi) return std::vector<double>(n, 0.0);
  if (phi->size() != n) throw t.error(key, "expected " + std::to_string(n) + " phases");
  return *phi;
}

inline PulseSchedule read_schedule(const TomlDocument& doc, TableReader& root, std::size_t n_pairs,
                                   const std::string& context) {
  PulseSchedule s;
  s.n_pairs = n_pairs;
  if (auto init = root.string("initial_state")) s.initial_state = InitialState::parse(*init);
  const auto& segs = doc.arrays.at("segment");
  for (std::size_t k = 0; k < segs.size(); ++k) {
    TableReader t(segs[k], context + " [[segment]] #" + std::to_string(k + 1));
    const auto r = t.numbers("r");
    if (!r) throw t.error("r", "missing");
    const auto phi = phases_or_zero(t, "phi", r->size());
    const auto d = t.number("duration_gt");
    if (!d) throw t.error("duration_gt", "missing");
    Segment seg{Drive::from_polar(*r, phi), *d, t.string("label").value_or("")};
    if (auto after = t.integer("measure_mode")) {
      const auto outcome = t.integer("measure_outcome");
      if (!outcome) throw t.error("measure_outcome", "missing (measure_mode given)");
      s.measurements.push_back({k, static_cast<std::size_t>(*after), static_cast<int>(*outcome)});
    }
    t.reject_unknown();
    s.segments.push_back(std::move(seg));
  }
  s.validate();
  return s;
}

}  // namespace detail

inline RunConfig parse_run_config(std::string_view text, const std::string& source_name = "config") {
  const TomlDocument doc = parse_toml(text, source_name);
  for (const auto& [name, v] : doc.arrays)
    if (name != "segment") throw ConfigError(source_name + ": unknown array of tables [[" + name + "]]");
  TableReader t(doc.root, source_name);
  RunConfig c;

  if (auto v = t.integer("n_pairs")) {
    c.system.n_pairs = static_cast<int>(*v);
    c.n_pairs_explicit = true;
  }
  if (auto v = t.number("g_rad_per_s")) c.system.g = *v;
  if (auto v = t.number("gamma_rad_per_s")) c.system.gamma = *v;
  if (auto v = t.number("omega_phonon_rad_per_s")) c.system.omega_phonon = *v;
  if (auto v = t.numbers("omega_pump_rad_per_s")) c.system.omega_pump = *v;
  if (auto v = t.numbers("omega_stokes_rad_per_s")) c.system.omega_stokes = *v;
  if (auto v = t.integer("seed")) {
    if (*v < 0) throw t.error("seed", "must be >= 0");
    c.seed = static_cast<std::uint64_t>(*v);
  }
  if (auto v = t.string("preset")) {
    if (!known_presets().count(*v)) throw t.error("preset", "unknown preset '" + *v + "'");
    c.preset = *v;
  }

  if (auto r = t.numbers("drive.r")) c.drive = Drive::from_polar(*r, detail::phases_or_zero(t, "drive.phi", r->size()));
  else if (t.has("drive.phi")) throw t.error("drive.phi", "given without drive.r");

  if (t.has("power.alpha_max") || t.has("power.power_w") || t.has("power.omega_optical_rad_per_s") ||
      t.has("power.v_g_m_per_s") || t.has("power.length_m")) {
    PowerBudget b;
    b.alpha_max = t.number("power.alpha_max").value_or(0.0);
    b.power = t.number("power.power_w").value_or(0.0);
    b.omega_optical = t.number("power.omega_optical_rad_per_s").value_or(0.0);
    b.v_g = t.number("power.v_g_m_per_s").value_or(0.0);
    b.length = t.number("power.length_m").value_or(0.0);
    c.power = b;
  }

  auto& p = c.params;
  if (auto v = t.integer("protocol.n")) p.n = *v;
  if (auto v = t.number("protocol.alpha")) p.alpha = *v;
  if (auto v = t.number("protocol.alpha_max")) p.alpha_max = *v;
  if (auto v = t.string("protocol.start")) p.start = *v;
  if (auto v = t.string("protocol.variant")) p.variant = *v;
  if (auto v = t.integer("protocol.inject_pair")) p.inject_pair = *v;
  if (auto v = t.integer("protocol.i")) p.i = *v;
  if (auto v = t.integer("protocol.j")) p.j = *v;
  if (auto v = t.number("protocol.r_i")) p.r_i = *v;
  if (auto v = t.number("protocol.r_j")) p.r_j = *v;
  if (auto v = t.number("protocol.phi_i")) p.phi_i = *v;
  if (auto v = t.number("protocol.phi_j")) p.phi_j = *v;
  if (auto v = t.numbers("protocol.fock_re")) p.fock_re = *v;
  if (auto v = t.numbers("protocol.fock_im")) p.fock_im = *v;
  if (auto v = t.integer("protocol.fock_cutoff")) p.fock_cutoff = *v;
  if (auto v = t.integer("protocol.pair")) p.pair = *v;
  if (auto v = t.number("protocol.phi")) p.phi = *v;
  if (auto v = t.number("protocol.fraction")) p.fraction = *v;
  if (auto v = t.integer("protocol.samples")) c.samples = *v;

  if (auto v = t.number("herald.xi_r")) c.herald.xi_r = *v;
  if (auto v = t.number("herald.xi_phi")) c.herald.xi_phi = *v;
  if (auto v = t.integer("herald.cutoff")) c.herald.cutoff = *v;

  if (auto v = t.number("loss.gamma_over_g")) {
    if (*v < 0.0) throw t.error("loss.gamma_over_g", "must be >= 0");
    c.gamma_over_g = *v;
  }
  if (auto v = t.number("loss.dt")) c.dt = *v;
  if (auto v = t.string("loss.method")) {
    if (*v == "rk4") c.method = Integrator::rk4;
    else if (*v == "adaptive") c.method = Integrator::adaptive;
    else throw t.error("loss.method", "expected \"rk4\" or \"adaptive\"");
  }

  if (auto v = t.string("output.dir")) c.output_dir = *v;
  if (auto v = t.string("output.format")) {
    c.formats.clear();
    std::stringstream ss(*v);
    std::string f;
    while (std::getline(ss, f, ',')) {
      parse_format(detail::trim(f));
      c.formats.push_back(detail::trim(f));
    }
  }

  if (doc.arrays.count("segment")) {
    if (!c.preset.empty()) throw ConfigError(source_name + ": preset and [[segment]] blocks are mutually exclusive");
    c.schedule = detail::read_schedule(doc, t, static_cast<std::size_t>(c.system.n_pairs), source_name);
  } else if (t.has("initial_state")) {
    throw t.error("initial_state", "only meaningful with [[segment]] blocks");
  }

  t.reject_unknown();
  c.system.validate();
  if (c.drive && c.drive->size() != static_cast<std::size_t>(c.system.n_pairs))
    throw ConfigError(source_name + ": drive.r has " + std::to_string(c.drive->size()) + " entries but n_pairs = " +
                      std::to_string(c.system.n_pairs));
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path);
}

/// Serializes a schedule in the same syntax read_schedule accepts.
inline std::string write_schedule(const PulseSchedule& s) {
  std::ostringstream os;
  os << "n_pairs = " << s.n_pairs << '\n';
  os << "initial_state = \"" << s.initial_state.describe() << "\"\n";
  const auto list = [&](const std::vector<double>& v) {
    os << '[';
    for (std::size_t k = 0; k < v.size(); ++k) os << (k ? ", " : "") << format_double(v[k]);
    os << ']';
  };
  for (std::size_t k = 0; k < s.segments.size(); ++k) {
    const auto& seg = s.segments[k];
    std::vector<double> r, phi;
    for (std::size_t n = 0; n < seg.drive.size(); ++n) {
      r.push_back(seg.drive.r(n));
      phi.push_back(seg.drive.phi(n));
    }
    os << "\n[[segment]]\nr = ";
    list(r);
    os << "\nphi = ";
    list(phi);
    os << "\nduration_gt = " << format_double(seg.duration_gt) << '\n';
    if (!seg.label.empty()) os << "label = \"" << seg.label << "\"\n";
    for (const auto& m : s.measurements)
      if (m.after_segment == k) os << "measure_mode = " << m.mode << "\nmeasure_outcome = " << m.outcome << '\n';
  }
  return os.str();
}

}  // namespace fbs
