#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "errors.hpp"
#include "lattice.hpp"

namespace quasiloc {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;

inline constexpr std::int64_t kMaxDimension = std::int64_t(1) << 14;

inline std::int64_t ipow(int d, std::size_t n) {
  std::int64_t r = 1;
  // saturates well above kMaxDimension so large regions cannot overflow
  for (std::size_t i = 0; i < n && r <= (std::int64_t(1) << 40); ++i) r *= d;
  return r;
}

namespace detail {

// Offsets of the basis states of `kept` and of ambient \ kept inside the ambient tensor
// product, so that ambient index = kept[a] + rest[b]. First site is the most significant leg.
struct SplitIndex {
  std::vector<Eigen::Index> kept, rest;
};

inline std::vector<Eigen::Index> digit_offsets(const std::vector<std::int64_t>& strides, int d) {
  std::vector<Eigen::Index> off(std::size_t(ipow(d, strides.size())), 0);
  for (std::size_t a = 0; a < off.size(); ++a) {
    std::int64_t rem = std::int64_t(a), v = 0;
    for (std::size_t k = strides.size(); k-- > 0;) {
      v += (rem % d) * strides[k];
      rem /= d;
    }
    off[a] = Eigen::Index(v);
  }
  return off;
}

inline SplitIndex split_index(const Region& ambient, const Region& kept, int d) {
  const std::size_t n = ambient.size();
  std::vector<std::int64_t> ks, rs;
  for (std::size_t p = 0; p < n; ++p) {
    const std::int64_t stride = ipow(d, n - 1 - p);
    (kept.contains(ambient[p]) ? ks : rs).push_back(stride);
  }
  return {digit_offsets(ks, d), digit_offsets(rs, d)};
}

inline bool hermitian_within(const Matrix& m, double rel = 1e-12) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= rel * scale;
}

}  // namespace detail

/// Operator on the tensor product over `ambient`, acting as identity off `support`.
class LocalOperator {
 public:
  LocalOperator() : matrix_(Matrix::Zero(1, 1)) {}

  LocalOperator(Region support, Region ambient, Matrix m, int d = 2)
      : support_(std::move(support)), ambient_(std::move(ambient)), matrix_(std::move(m)), d_(d) {
    if (d_ < 2 || d_ > 4) throw DomainError("local dimension must lie in [2,4]");
    if (!support_.subset_of(ambient_)) throw DomainError("LocalOperator: support not inside ambient");
    const std::int64_t D = ipow(d_, ambient_.size());
    if (D > kMaxDimension) throw DomainError("LocalOperator: dimension above 2^14");
    if (matrix_.rows() != D || matrix_.cols() != D) throw DomainError("LocalOperator: matrix size mismatch");
    hermitian_ = detail::hermitian_within(matrix_);
  }

  static LocalOperator on(const Region& r, Matrix m, int d = 2) { return LocalOperator(r, r, std::move(m), d); }
  static LocalOperator identity(const Region& ambient, int d = 2) {
    const auto D = checked_dim(ambient, d);
    return LocalOperator({}, ambient, Matrix::Identity(D, D), d);
  }
  static LocalOperator zero(const Region& ambient, int d = 2) {
    const auto D = checked_dim(ambient, d);
    return LocalOperator({}, ambient, Matrix::Zero(D, D), d);
  }

  const Region& support() const { return support_; }
  const Region& ambient() const { return ambient_; }
  const Matrix& matrix() const { return matrix_; }
  int local_dim() const { return d_; }
  bool is_hermitian() const { return hermitian_; }
  Eigen::Index dim() const { return matrix_.rows(); }

 private:
  // checked before allocating so oversized requests fail cleanly
  static Eigen::Index checked_dim(const Region& ambient, int d) {
    if (d < 2 || d > 4) throw DomainError("local dimension must lie in [2,4]");
    const std::int64_t D = ipow(d, ambient.size());
    if (D > kMaxDimension) throw DomainError("LocalOperator: dimension above 2^14");
    return Eigen::Index(D);
  }

  Region support_;
  Region ambient_;
  Matrix matrix_;
  int d_ = 2;
  bool hermitian_ = true;
};

// (A (x) identity) * M for A on `sub` and M on `ambient`, without forming the embedding.
inline Matrix apply_left(const Matrix& a, const Region& sub, const Matrix& M, const Region& ambient, int d) {
  const auto idx = detail::split_index(ambient, sub, d);
  Matrix out = Matrix::Zero(M.rows(), M.cols());
  const auto nk = Eigen::Index(idx.kept.size());
  for (Eigen::Index b : idx.rest)
    for (Eigen::Index i = 0; i < nk; ++i)
      for (Eigen::Index j = 0; j < nk; ++j) {
        const cplx aij = a(i, j);
        if (aij == cplx(0)) continue;
        out.row(idx.kept[std::size_t(i)] + b) += aij * M.row(idx.kept[std::size_t(j)] + b);
      }
  return out;
}

inline LocalOperator embed(const LocalOperator& A, const Region& into) {
  if (!A.ambient().subset_of(into)) throw DomainError("embed: ambient not a subset of target");
  if (A.ambient() == into) return A;
  const int d = A.local_dim();
  const auto idx = detail::split_index(into, A.ambient(), d);
  const auto D = Eigen::Index(ipow(d, into.size()));
  Matrix m = Matrix::Zero(D, D);
  const auto nk = Eigen::Index(idx.kept.size());
  const Matrix& a = A.matrix();
  for (Eigen::Index b : idx.rest)
    for (Eigen::Index j = 0; j < nk; ++j)
      for (Eigen::Index i = 0; i < nk; ++i) m(idx.kept[std::size_t(i)] + b, idx.kept[std::size_t(j)] + b) = a(i, j);
  return LocalOperator(A.support(), into, std::move(m), d);
}

// Normalized partial trace onto `keep` (must contain A's support for exactness of identity
// legs, but any subset of the ambient is accepted).
inline Matrix partial_trace_normalized(const LocalOperator& A, const Region& keep) {
  const auto idx = detail::split_index(A.ambient(), keep, A.local_dim());
  const auto nk = Eigen::Index(idx.kept.size());
  Matrix out = Matrix::Zero(nk, nk);
  const Matrix& a = A.matrix();
  for (Eigen::Index b : idx.rest)
    for (Eigen::Index j = 0; j < nk; ++j)
      for (Eigen::Index i = 0; i < nk; ++i) out(i, j) += a(idx.kept[std::size_t(i)] + b, idx.kept[std::size_t(j)] + b);
  out /= double(idx.rest.size());
  return out;
}

/// Same operator with the ambient shrunk to `to` (support must lie inside `to`).
inline LocalOperator restrict_ambient(const LocalOperator& A, const Region& to) {
  if (!A.support().subset_of(to) || !to.subset_of(A.ambient()))
    throw DomainError("restrict_ambient: need support <= target <= ambient");
  if (to == A.ambient()) return A;
  return LocalOperator(A.support(), to, partial_trace_normalized(A, to), A.local_dim());
}

inline LocalOperator compact(const LocalOperator& A) { return restrict_ambient(A, A.support()); }

/// Pi_X: normalized partial trace over ambient \ X, re-tensored with the identity.
inline LocalOperator cond_expect(const LocalOperator& A, const Region& X) {
  const Region keep = X & A.ambient();
  const Region supp = keep & A.support();
  if (supp == A.support()) return A;
  const Matrix reduced = partial_trace_normalized(A, keep);
  LocalOperator small(supp, keep, reduced, A.local_dim());
  return embed(small, A.ambient());
}

inline double op_norm(const LocalOperator& A) {
  const LocalOperator c = compact(A);
  const Matrix& m = c.matrix();
  if (m.size() == 1) return std::abs(m(0, 0));
  if (c.is_hermitian()) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  if (detail::hermitian_within(cplx(0, 1) * m)) {
    const Matrix h = cplx(0, 1) * m;
    Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  Eigen::BDCSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

namespace detail {

inline std::pair<LocalOperator, LocalOperator> common_ambient(const LocalOperator& A, const LocalOperator& B) {
  if (A.local_dim() != B.local_dim()) throw DomainError("operators with different local dimensions");
  const Region u = A.ambient() | B.ambient();
  return {embed(A, u), embed(B, u)};
}

}  // namespace detail

inline LocalOperator operator+(const LocalOperator& A, const LocalOperator& B) {
  auto [a, b] = detail::common_ambient(A, B);
  return LocalOperator(a.support() | b.support(), a.ambient(), a.matrix() + b.matrix(), a.local_dim());
}

inline LocalOperator operator-(const LocalOperator& A, const LocalOperator& B) {
  auto [a, b] = detail::common_ambient(A, B);
  return LocalOperator(a.support() | b.support(), a.ambient(), a.matrix() - b.matrix(), a.local_dim());
}

inline LocalOperator operator*(cplx c, const LocalOperator& A) {
  return LocalOperator(A.support(), A.ambient(), c * A.matrix(), A.local_dim());
}

namespace detail {

// Matrix of A B on the union of the ambients. A factor supported on at most half of the sites
// is applied through its Kronecker structure instead of a dense product.
inline Matrix product_matrix(const LocalOperator& A, const LocalOperator& B) {
  if (A.local_dim() != B.local_dim()) throw DomainError("operators with different local dimensions");
  const Region u = A.ambient() | B.ambient();
  const int d = A.local_dim();
  if (2 * A.support().size() <= u.size() && A.support().size() <= B.support().size()) {
    const LocalOperator a = compact(A);
    return apply_left(a.matrix(), a.support(), embed(B, u).matrix(), u, d);
  }
  if (2 * B.support().size() <= u.size()) {
    const LocalOperator b = compact(B);
    return apply_left(b.matrix().adjoint(), b.support(), embed(A, u).matrix().adjoint(), u, d).adjoint();
  }
  return embed(A, u).matrix() * embed(B, u).matrix();
}

}  // namespace detail

inline LocalOperator operator*(const LocalOperator& A, const LocalOperator& B) {
  return LocalOperator(A.support() | B.support(), A.ambient() | B.ambient(), detail::product_matrix(A, B), A.local_dim());
}

inline LocalOperator adjoint(const LocalOperator& A) {
  return LocalOperator(A.support(), A.ambient(), A.matrix().adjoint(), A.local_dim());
}

inline LocalOperator commutator(const LocalOperator& A, const LocalOperator& B) {
  Matrix m = detail::product_matrix(A, B) - detail::product_matrix(B, A);
  return LocalOperator(A.support() | B.support(), A.ambient() | B.ambient(), std::move(m), A.local_dim());
}

inline double distance_norm(const LocalOperator& A, const LocalOperator& B) { return op_norm(A - B); }

/// Delta_{X(m)} = Pi_{X(m)} - Pi_{X(m-1)} with fattenings taken inside the ambient;
/// Delta_{X(0)} = Pi_X so that the increments telescope to Pi_{X(M)}.
inline LocalOperator delta_m(const LocalOperator& A, const Region& X, int m) {
  if (m < 0) throw DomainError("delta_m: negative m");
  if (X.empty()) throw DomainError("delta_m: empty X");
  const LocalOperator hi = cond_expect(A, fatten_within(X, m, A.ambient()) | (X & A.ambient()));
  if (m == 0) return hi;
  const LocalOperator lo = cond_expect(A, fatten_within(X, m - 1, A.ambient()) | (X & A.ambient()));
  return LocalOperator(hi.support() | lo.support(), A.ambient(), hi.matrix() - lo.matrix(), A.local_dim());
}

inline Matrix pauli(char p) {
  Matrix m(2, 2);
  switch (p) {
    case 'I': m << 1, 0, 0, 1; break;
    case 'X': m << 0, 1, 1, 0; break;
    case 'Y': m << 0, cplx(0, -1), cplx(0, 1), 0; break;
    case 'Z': m << 1, 0, 0, -1; break;
    default: throw DomainError(std::string("unknown Pauli label '") + p + "'");
  }
  return m;
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Tensor product of Pauli labels, first label on the first (lexicographically smallest) site.
inline Matrix pauli_string(const std::string& labels) {
  Matrix m = Matrix::Identity(1, 1);
  for (char c : labels) m = kron(m, pauli(c));
  return m;
}

inline Matrix random_hermitian_matrix(Eigen::Index D, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(D, D);
  for (Eigen::Index j = 0; j < D; ++j)
    for (Eigen::Index i = 0; i < D; ++i) m(i, j) = cplx(g(rng), g(rng));
  return (m + m.adjoint()) / 2.0;
}

inline Matrix random_matrix(Eigen::Index D, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(D, D);
  for (Eigen::Index j = 0; j < D; ++j)
    for (Eigen::Index i = 0; i < D; ++i) m(i, j) = cplx(g(rng), g(rng));
  return m;
}

inline LocalOperator random_hermitian(const Region& r, std::mt19937_64& rng, int d = 2) {
  return LocalOperator::on(r, random_hermitian_matrix(Eigen::Index(ipow(d, r.size())), rng), d);
}

}  // namespace quasiloc
