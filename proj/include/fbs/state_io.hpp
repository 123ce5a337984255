#pragma once

// Plain-text ket serialization.
//
//   # fbs-ket modes=3 cutoffs=1,1,1 total_cap=1
//   0,1,0\t0.70710678118654757\t0
//   1,0,0\t0\t-0.70710678118654757
//
// One line per nonzero amplitude; doubles are written with 17 significant
// digits so a write/read cycle reproduces every bit. total_cap=none when the
// basis has no total excitation cap.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>

#include "fbs/fockspace.hpp"

namespace fbs {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline double parse_double(std::string_view text, const std::string& context) {
  std::string s(text);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw ConfigError(context + ": not a number: '" + s + "'");
  return v;
}

inline std::vector<int> parse_int_list(std::string_view text, const std::string& context) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = text.find(',', pos);
    const auto piece = text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    int v = 0;
    const auto [p, ec] = std::from_chars(piece.data(), piece.data() + piece.size(), v);
    if (ec != std::errc{} || p != piece.data() + piece.size())
      throw ConfigError(context + ": bad integer list '" + std::string(text) + "'");
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace detail

inline void write_ket(std::ostream& os, const Ket& psi) {
  const Basis& b = psi.basis();
  os << "# fbs-ket modes=" << b.mode_count() << " cutoffs=" << format_occupation(b.cutoffs())
     << " total_cap=" << (b.total_cap() ? std::to_string(*b.total_cap()) : std::string("none")) << '\n';
  for (std::size_t i = 0; i < psi.dim(); ++i) {
    const cplx a = psi.amplitudes()[static_cast<Eigen::Index>(i)];
    if (a == cplx{}) continue;
    os << format_occupation(b.occupation(i)) << '\t' << format_double(a.real()) << '\t'
       << format_double(a.imag()) << '\n';
  }
}

inline Ket read_ket(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("ket file: missing header");
  std::istringstream header(line);
  std::string hash, tag, modes_kv, cutoffs_kv, cap_kv;
  header >> hash >> tag >> modes_kv >> cutoffs_kv >> cap_kv;
  if (hash != "#" || tag != "fbs-ket" || modes_kv.rfind("modes=", 0) != 0 ||
      cutoffs_kv.rfind("cutoffs=", 0) != 0 || cap_kv.rfind("total_cap=", 0) != 0)
    throw ConfigError("ket file: malformed header '" + line + "'");

  const auto modes = detail::parse_int_list(std::string_view(modes_kv).substr(6), "ket header modes");
  const auto cutoffs = detail::parse_int_list(std::string_view(cutoffs_kv).substr(8), "ket header cutoffs");
  std::optional<int> cap;
  const auto cap_text = std::string_view(cap_kv).substr(10);
  if (cap_text != "none") cap = detail::parse_int_list(cap_text, "ket header total_cap").at(0);
  if (modes.size() != 1 || static_cast<std::size_t>(modes[0]) != cutoffs.size())
    throw ConfigError("ket file: mode count does not match cutoffs");

  const auto basis = build_basis(cutoffs.size(), cutoffs, cap);
  Ket psi(basis);
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = line.find('\t', t1 == std::string::npos ? t1 : t1 + 1);
    const std::string ctx = "ket file line " + std::to_string(lineno);
    if (t1 == std::string::npos || t2 == std::string::npos) throw ConfigError(ctx + ": expected 3 tab-separated fields");
    const auto occ = detail::parse_int_list(std::string_view(line).substr(0, t1), ctx);
    const auto idx = basis->index_of(occ);
    if (!idx) throw ConfigError(ctx + ": occupation outside basis");
    const double re = detail::parse_double(std::string_view(line).substr(t1 + 1, t2 - t1 - 1), ctx);
    const double im = detail::parse_double(std::string_view(line).substr(t2 + 1), ctx);
    psi.amplitudes()[static_cast<Eigen::Index>(*idx)] = {re, im};
  }
  return psi;
}

inline void save_ket(const std::string& path, const Ket& psi) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write_ket(out, psi);
  if (!out) throw Error("write failed for '" + path + "'");
}

inline Ket load_ket(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  return read_ket(in);
}

}  // namespace fbs
