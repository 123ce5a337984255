#pragma once

// Truncated multimode bosonic Fock space.
//
// A Basis enumerates occupation vectors (n_0, ..., n_{M-1}) with n_m <= cutoff_m
// and, optionally, sum(n) <= total_cap. States are ordered lexicographically,
// first mode most significant. By convention the phonon is the last mode.
//
// Operators are projector-truncated: an operator O is represented by P O P where
// P projects on the basis. Amplitude that would leave the basis is dropped;
// truncation_leakage() measures how much.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdio>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "fbs/error.hpp"

namespace fbs {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using Occupation = std::vector<int>;

inline constexpr cplx kI{0.0, 1.0};

inline std::string format_occupation(std::span<const int> occ) {
  std::string out;
  for (std::size_t m = 0; m < occ.size(); ++m) {
    if (m) out += ',';
    out += std::to_string(occ[m]);
  }
  return out;
}

class Basis {
 public:
  static constexpr std::size_t kDefaultDimensionLimit = 2'000'000;

  explicit Basis(std::vector<int> cutoffs, std::optional<int> total_cap = std::nullopt,
                 std::size_t dimension_limit = kDefaultDimensionLimit)
      : cutoffs_(std::move(cutoffs)), total_cap_(total_cap) {
    if (cutoffs_.empty()) throw ConfigError("basis needs at least one mode");
    for (int c : cutoffs_)
      if (c < 0) throw ConfigError("mode cutoff must be >= 0, got " + std::to_string(c));
    if (total_cap_ && *total_cap_ < 0)
      throw ConfigError("total excitation cap must be >= 0");

    const double expected = count_states();
    if (expected > static_cast<double>(dimension_limit)) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "basis dimension %.0f exceeds limit %zu", expected,
                    dimension_limit);
      throw ConfigError(buf);
    }
    occupations_.reserve(static_cast<std::size_t>(expected) * cutoffs_.size());
    Occupation current(cutoffs_.size(), 0);
    enumerate(0, 0, current);
  }

  std::size_t mode_count() const noexcept { return cutoffs_.size(); }
  std::size_t dim() const noexcept { return occupations_.size() / cutoffs_.size(); }
  std::span<const int> cutoffs() const noexcept { return cutoffs_; }
  int cutoff(std::size_t mode) const { return cutoffs_.at(mode); }
  std::optional<int> total_cap() const noexcept { return total_cap_; }

  std::span<const int> occupation(std::size_t index) const {
    if (index >= dim()) throw std::out_of_range("basis index out of range");
    return {occupations_.data() + index * mode_count(), mode_count()};
  }

  bool admits(std::span<const int> occ) const noexcept {
    if (occ.size() != mode_count()) return false;
    int total = 0;
    for (std::size_t m = 0; m < occ.size(); ++m) {
      if (occ[m] < 0 || occ[m] > cutoffs_[m]) return false;
      total += occ[m];
    }
    return !total_cap_ || total <= *total_cap_;
  }

  /// Binary search in the lexicographic enumeration.
  std::optional<std::size_t> index_of(std::span<const int> occ) const noexcept {
    if (!admits(occ)) return std::nullopt;
    std::size_t lo = 0, hi = dim();
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      const auto row = occupation(mid);
      if (std::lexicographical_compare(row.begin(), row.end(), occ.begin(), occ.end()))
        lo = mid + 1;
      else
        hi = mid;
    }
    if (lo < dim()) {
      const auto row = occupation(lo);
      if (std::equal(row.begin(), row.end(), occ.begin())) return lo;
    }
    return std::nullopt;
  }

  friend bool operator==(const Basis& a, const Basis& b) noexcept {
    return a.cutoffs_ == b.cutoffs_ && a.total_cap_ == b.total_cap_;
  }

 private:
  double count_states() const {
    // ways[s] = number of prefixes with total excitation s
    const int cap = total_cap_.value_or(-1);
    int max_total = 0;
    for (int c : cutoffs_) max_total += c;
    if (cap >= 0) max_total = std::min(max_total, cap);
    std::vector<double> ways(static_cast<std::size_t>(max_total) + 1, 0.0);
    ways[0] = 1.0;
    for (int c : cutoffs_) {
      std::vector<double> next(ways.size(), 0.0);
      for (std::size_t s = 0; s < ways.size(); ++s) {
        if (ways[s] == 0.0) continue;
        for (int n = 0; n <= c && s + n < ways.size(); ++n) next[s + n] += ways[s];
      }
      ways = std::move(next);
    }
    double total = 0.0;
    for (double w : ways) total += w;
    return total;
  }

  void enumerate(std::size_t mode, int used, Occupation& current) {
    if (mode == cutoffs_.size()) {
      occupations_.insert(occupations_.end(), current.begin(), current.end());
      return;
    }
    int top = cutoffs_[mode];
    if (total_cap_) top = std::min(top, *total_cap_ - used);
    for (int n = 0; n <= top; ++n) {
      current[mode] = n;
      enumerate(mode + 1, used + n, current);
    }
    current[mode] = 0;
  }

  std::vector<int> cutoffs_;
  std::optional<int> total_cap_;
  std::vector<int> occupations_;
};

using BasisPtr = std::shared_ptr<const Basis>;

/// A single cutoff is broadcast to every mode.
inline BasisPtr build_basis(std::size_t mode_count, std::vector<int> per_mode_cutoff,
                            std::optional<int> total_cap = std::nullopt,
                            std::size_t dimension_limit = Basis::kDefaultDimensionLimit) {
  if (mode_count < 1) throw ConfigError("mode_count must be >= 1");
  if (per_mode_cutoff.size() == 1 && mode_count > 1)
    per_mode_cutoff.assign(mode_count, per_mode_cutoff.front());
  if (per_mode_cutoff.size() != mode_count)
    throw ConfigError("expected " + std::to_string(mode_count) + " cutoffs, got " +
                      std::to_string(per_mode_cutoff.size()));
  return std::make_shared<const Basis>(std::move(per_mode_cutoff), total_cap, dimension_limit);
}

/// Pump modes 0..n_pairs-1 followed by the phonon, at most max_excitation quanta in total.
inline BasisPtr excitation_basis(std::size_t n_pairs, int max_excitation) {
  return build_basis(n_pairs + 1, {max_excitation}, max_excitation);
}

inline void require_same_basis(const Basis& a, const Basis& b, const char* what) {
  if (&a != &b && !(a == b)) throw BasisMismatch(std::string(what) + ": basis mismatch");
}

class Ket {
 public:
  explicit Ket(BasisPtr basis) : basis_(std::move(basis)), amplitudes_(CVector::Zero(basis_->dim())) {}

  Ket(BasisPtr basis, CVector amplitudes) : basis_(std::move(basis)), amplitudes_(std::move(amplitudes)) {
    if (static_cast<std::size_t>(amplitudes_.size()) != basis_->dim())
      throw BasisMismatch("amplitude vector length " + std::to_string(amplitudes_.size()) +
                          " does not match basis dimension " + std::to_string(basis_->dim()));
  }

  static Ket basis_state(BasisPtr basis, std::span<const int> occ) {
    const auto idx = basis->index_of(occ);
    if (!idx) throw ConfigError("occupation (" + format_occupation(occ) + ") not in basis");
    Ket k(std::move(basis));
    k.amplitudes_[static_cast<Eigen::Index>(*idx)] = 1.0;
    return k;
  }

  const Basis& basis() const noexcept { return *basis_; }
  const BasisPtr& basis_ptr() const noexcept { return basis_; }
  std::size_t dim() const noexcept { return basis_->dim(); }
  const CVector& amplitudes() const noexcept { return amplitudes_; }
  CVector& amplitudes() noexcept { return amplitudes_; }

  cplx amplitude(std::span<const int> occ) const {
    const auto idx = basis_->index_of(occ);
    return idx ? amplitudes_[static_cast<Eigen::Index>(*idx)] : cplx{};
  }

  double norm() const { return amplitudes_.norm(); }

  Ket& normalize() {
    const double n = norm();
    if (n == 0.0 || !std::isfinite(n)) throw NumericalError("cannot normalize a zero or non-finite ket");
    amplitudes_ /= n;
    return *this;
  }

  /// <this|other>
  cplx inner(const Ket& other) const {
    require_same_basis(*basis_, other.basis(), "inner product");
    return amplitudes_.dot(other.amplitudes_);
  }

  Ket& operator+=(const Ket& o) {
    require_same_basis(*basis_, o.basis(), "ket addition");
    amplitudes_ += o.amplitudes_;
    return *this;
  }
  Ket& operator-=(const Ket& o) {
    require_same_basis(*basis_, o.basis(), "ket subtraction");
    amplitudes_ -= o.amplitudes_;
    return *this;
  }
  Ket& operator*=(cplx s) {
    amplitudes_ *= s;
    return *this;
  }
  friend Ket operator+(Ket a, const Ket& b) { return a += b; }
  friend Ket operator-(Ket a, const Ket& b) { return a -= b; }
  friend Ket operator*(cplx s, Ket a) { return a *= s; }

 private:
  BasisPtr basis_;
  CVector amplitudes_;
};

class DensityOp {
 public:
  DensityOp(BasisPtr basis, CMatrix matrix) : basis_(std::move(basis)), matrix_(std::move(matrix)) {
    const auto d = static_cast<Eigen::Index>(basis_->dim());
    if (matrix_.rows() != d || matrix_.cols() != d)
      throw BasisMismatch("density matrix shape does not match basis dimension " +
                          std::to_string(d));
  }

  static DensityOp pure(const Ket& psi) {
    return {psi.basis_ptr(), psi.amplitudes() * psi.amplitudes().adjoint()};
  }

  const Basis& basis() const noexcept { return *basis_; }
  const BasisPtr& basis_ptr() const noexcept { return basis_; }
  std::size_t dim() const noexcept { return basis_->dim(); }
  const CMatrix& matrix() const noexcept { return matrix_; }
  CMatrix& matrix() noexcept { return matrix_; }

  cplx trace() const { return matrix_.trace(); }

  double hermiticity_error() const {
    return (matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff();
  }

  double min_eigenvalue() const {
    const CMatrix h = 0.5 * (matrix_ + matrix_.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }

  DensityOp& symmetrize() {
    matrix_ = 0.5 * (matrix_ + matrix_.adjoint()).eval();
    return *this;
  }

 private:
  BasisPtr basis_;
  CMatrix matrix_;
};

struct Entry {
  std::size_t row;
  std::size_t col;
  cplx value;
};

class SparseOp {
 public:
  using Matrix = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

  /// Duplicate (row, col) pairs are summed.
  SparseOp(BasisPtr basis, std::span<const Entry> entries) : basis_(std::move(basis)) {
    const std::size_t d = basis_->dim();
    std::vector<Eigen::Triplet<cplx>> triplets;
    triplets.reserve(entries.size());
    for (const auto& e : entries) {
      if (e.row >= d || e.col >= d)
        throw ConfigError("operator entry (" + std::to_string(e.row) + "," + std::to_string(e.col) +
                          ") outside basis dimension " + std::to_string(d));
      triplets.emplace_back(static_cast<int>(e.row), static_cast<int>(e.col), e.value);
    }
    matrix_.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    matrix_.setFromTriplets(triplets.begin(), triplets.end());
    matrix_.makeCompressed();
  }

  SparseOp(BasisPtr basis, Matrix matrix) : basis_(std::move(basis)), matrix_(std::move(matrix)) {
    const auto d = static_cast<Eigen::Index>(basis_->dim());
    if (matrix_.rows() != d || matrix_.cols() != d)
      throw BasisMismatch("sparse operator shape does not match basis dimension");
    matrix_.makeCompressed();
  }

  static SparseOp zero(BasisPtr basis) { return SparseOp(std::move(basis), std::span<const Entry>{}); }

  static SparseOp identity(BasisPtr basis) {
    std::vector<Entry> e;
    for (std::size_t i = 0; i < basis->dim(); ++i) e.push_back({i, i, 1.0});
    return SparseOp(std::move(basis), e);
  }

  const Basis& basis() const noexcept { return *basis_; }
  const BasisPtr& basis_ptr() const noexcept { return basis_; }
  std::size_t dim() const noexcept { return basis_->dim(); }
  const Matrix& matrix() const noexcept { return matrix_; }

  std::vector<Entry> entries() const {
    std::vector<Entry> out;
    for (int r = 0; r < matrix_.outerSize(); ++r)
      for (Matrix::InnerIterator it(matrix_, r); it; ++it)
        out.push_back({static_cast<std::size_t>(it.row()), static_cast<std::size_t>(it.col()), it.value()});
    return out;
  }

  cplx element(std::size_t row, std::size_t col) const {
    return matrix_.coeff(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
  }

  CMatrix dense() const { return CMatrix(matrix_); }

  SparseOp adjoint() const { return {basis_, Matrix(matrix_.adjoint())}; }

  double hermiticity_error() const { return max_abs(Matrix(matrix_ - Matrix(matrix_.adjoint()))); }
  double anti_hermiticity_error() const { return max_abs(Matrix(matrix_ + Matrix(matrix_.adjoint()))); }

  /// Max absolute column sum.
  double norm1() const {
    Eigen::VectorXd col = Eigen::VectorXd::Zero(matrix_.cols());
    for (int r = 0; r < matrix_.outerSize(); ++r)
      for (Matrix::InnerIterator it(matrix_, r); it; ++it) col[it.col()] += std::abs(it.value());
    return col.size() ? col.maxCoeff() : 0.0;
  }

  double max_abs() const { return max_abs(matrix_); }

  friend SparseOp operator+(const SparseOp& a, const SparseOp& b) {
    require_same_basis(a.basis(), b.basis(), "operator sum");
    return {a.basis_, Matrix(a.matrix_ + b.matrix_)};
  }
  friend SparseOp operator-(const SparseOp& a, const SparseOp& b) {
    require_same_basis(a.basis(), b.basis(), "operator difference");
    return {a.basis_, Matrix(a.matrix_ - b.matrix_)};
  }
  /// Matrix product of the truncated representations.
  friend SparseOp operator*(const SparseOp& a, const SparseOp& b) {
    require_same_basis(a.basis(), b.basis(), "operator product");
    return {a.basis_, Matrix(a.matrix_ * b.matrix_)};
  }
  friend SparseOp operator*(cplx s, const SparseOp& a) { return {a.basis_, Matrix(s * a.matrix_)}; }

 private:
  static double max_abs(const Matrix& m) {
    double best = 0.0;
    for (int r = 0; r < m.outerSize(); ++r)
      for (Matrix::InnerIterator it(m, r); it; ++it) best = std::max(best, std::abs(it.value()));
    return best;
  }

  BasisPtr basis_;
  Matrix matrix_;
};

inline SparseOp commutator(const SparseOp& a, const SparseOp& b) { return a * b - b * a; }

enum class LadderKind { raise, lower };

struct LadderFactor {
  std::size_t mode;
  LadderKind kind;
};

/// P (c * f_1 f_2 ... f_k) P for a product of ladder operators, rightmost applied first.
/// Intermediate states are not truncated; only the final state must lie in the basis.
inline SparseOp monomial(const BasisPtr& basis, std::span<const LadderFactor> factors, cplx coeff = 1.0) {
  for (const auto& f : factors)
    if (f.mode >= basis->mode_count())
      throw ConfigError("mode index " + std::to_string(f.mode) + " out of range for " +
                        std::to_string(basis->mode_count()) + "-mode basis");
  std::vector<Entry> entries;
  Occupation occ(basis->mode_count());
  for (std::size_t col = 0; col < basis->dim(); ++col) {
    const auto src = basis->occupation(col);
    std::copy(src.begin(), src.end(), occ.begin());
    double weight = 1.0;
    for (auto it = factors.rbegin(); it != factors.rend() && weight != 0.0; ++it) {
      int& n = occ[it->mode];
      if (it->kind == LadderKind::lower) {
        weight *= std::sqrt(static_cast<double>(n));
        --n;
      } else {
        ++n;
        weight *= std::sqrt(static_cast<double>(n));
      }
    }
    if (weight == 0.0) continue;
    if (const auto row = basis->index_of(occ)) entries.push_back({*row, col, coeff * weight});
  }
  return SparseOp(basis, entries);
}

inline SparseOp ladder(const BasisPtr& basis, std::size_t mode, LadderKind kind) {
  const LadderFactor f{mode, kind};
  return monomial(basis, std::span(&f, 1));
}

inline SparseOp number_op(const BasisPtr& basis, std::size_t mode) {
  if (mode >= basis->mode_count()) throw ConfigError("mode index out of range");
  std::vector<Entry> e;
  for (std::size_t i = 0; i < basis->dim(); ++i) {
    const int n = basis->occupation(i)[mode];
    if (n) e.push_back({i, i, static_cast<double>(n)});
  }
  return SparseOp(basis, e);
}

inline Ket apply(const SparseOp& op, const Ket& state) {
  require_same_basis(op.basis(), state.basis(), "apply");
  return Ket(state.basis_ptr(), CVector(op.matrix() * state.amplitudes()));
}

inline cplx expect(const SparseOp& op, const Ket& state) {
  require_same_basis(op.basis(), state.basis(), "expect");
  return state.amplitudes().dot(CVector(op.matrix() * state.amplitudes()));
}

/// trace(O rho)
inline cplx expect(const SparseOp& op, const DensityOp& rho) {
  require_same_basis(op.basis(), rho.basis(), "expect");
  const CMatrix prod = op.matrix() * rho.matrix();
  return prod.trace();
}

using OccupationPredicate = std::function<bool(std::span<const int>)>;

namespace patterns {

inline OccupationPredicate any() {
  return [](std::span<const int>) { return true; };
}

inline OccupationPredicate exactly(Occupation target) {
  return [t = std::move(target)](std::span<const int> occ) {
    return std::equal(occ.begin(), occ.end(), t.begin(), t.end());
  };
}

inline OccupationPredicate mode_equals(std::size_t mode, int n) {
  return [=](std::span<const int> occ) { return mode < occ.size() && occ[mode] == n; };
}

/// One quantum in `mode`, every other mode empty.
inline OccupationPredicate single_quantum_in(std::size_t mode) {
  return [=](std::span<const int> occ) {
    for (std::size_t m = 0; m < occ.size(); ++m)
      if (occ[m] != (m == mode ? 1 : 0)) return false;
    return true;
  };
}

}  // namespace patterns

inline double partial_probability(const Ket& state, const OccupationPredicate& pattern) {
  double p = 0.0;
  for (std::size_t i = 0; i < state.dim(); ++i)
    if (pattern(state.basis().occupation(i))) p += std::norm(state.amplitudes()[static_cast<Eigen::Index>(i)]);
  return p;
}

inline double partial_probability(const DensityOp& rho, const OccupationPredicate& pattern) {
  double p = 0.0;
  for (std::size_t i = 0; i < rho.dim(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    if (pattern(rho.basis().occupation(i))) p += rho.matrix()(k, k).real();
  }
  return p;
}

/// Embed a ket into a larger basis (every occupation must be admitted by `target`).
inline Ket embed(const Ket& psi, const BasisPtr& target) {
  Ket out(target);
  for (std::size_t i = 0; i < psi.dim(); ++i) {
    const cplx a = psi.amplitudes()[static_cast<Eigen::Index>(i)];
    if (a == cplx{}) continue;
    const auto occ = psi.basis().occupation(i);
    const auto j = target->index_of(occ);
    if (!j) throw BasisMismatch("cannot embed occupation (" + format_occupation(occ) + ")");
    out.amplitudes()[static_cast<Eigen::Index>(*j)] = a;
  }
  return out;
}

/// Norm of the part of O|psi> that leaves the basis of psi. `build` constructs O on
/// any basis; it is evaluated on a basis `margin` quanta larger in every direction,
/// which is exact for operators of degree <= margin (the Hamiltonians here are cubic).
inline double truncation_leakage(const Ket& psi, const std::function<SparseOp(const BasisPtr&)>& build,
                                 int margin = 3) {
  if (margin < 1) throw ConfigError("leakage margin must be >= 1");
  const Basis& b = psi.basis();
  std::vector<int> wider(b.cutoffs().begin(), b.cutoffs().end());
  for (int& c : wider) c += margin;
  std::optional<int> cap = b.total_cap();
  if (cap) *cap += margin;
  const auto big = build_basis(b.mode_count(), wider, cap);
  const Ket out = apply(build(big), embed(psi, big));
  double lost = 0.0;
  for (std::size_t i = 0; i < out.dim(); ++i)
    if (!b.admits(big->occupation(i))) lost += std::norm(out.amplitudes()[static_cast<Eigen::Index>(i)]);
  return std::sqrt(lost);
}

}  // namespace fbs
