#pragma once

#include <variant>

#include "fbs/fockspace.hpp"

namespace fbs {

/// A pure or mixed state.
using State = std::variant<Ket, DensityOp>;

/// |<target|psi>|^2
inline double fidelity(const Ket& psi, const Ket& target) { return std::norm(target.inner(psi)); }

/// <target|rho|target>
inline double fidelity(const DensityOp& rho, const Ket& target) {
  require_same_basis(rho.basis(), target.basis(), "fidelity");
  return std::real(target.amplitudes().dot(rho.matrix() * target.amplitudes()));
}

inline double fidelity(const State& s, const Ket& target) {
  return std::visit([&](const auto& v) { return fidelity(v, target); }, s);
}

inline double partial_probability(const State& s, const OccupationPredicate& pattern) {
  return std::visit([&](const auto& v) { return partial_probability(v, pattern); }, s);
}

inline const Basis& basis_of(const State& s) {
  return std::visit([](const auto& v) -> const Basis& { return v.basis(); }, s);
}

inline const BasisPtr& basis_ptr_of(const State& s) {
  return std::visit([](const auto& v) -> const BasisPtr& { return v.basis_ptr(); }, s);
}

}  // namespace fbs
