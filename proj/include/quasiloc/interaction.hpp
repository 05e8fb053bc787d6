#pragma once

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <unordered_map>
#include <vector>

#include "algebra.hpp"
#include "ffunc.hpp"
#include "lattice.hpp"

namespace quasiloc {

/// Continuous piecewise polynomial g on [0,1]; piece k covers [breaks[k], breaks[k+1]]
/// with coefficients (in powers of the global t) coeffs[k][0] + coeffs[k][1] t + ...
class TimeProfile {
 public:
  TimeProfile() : TimeProfile({0.0, 1.0}, {{1.0}}) {}

  TimeProfile(std::vector<double> breaks, std::vector<std::vector<double>> coeffs)
      : breaks_(std::move(breaks)), coeffs_(std::move(coeffs)) {
    if (breaks_.size() < 2 || breaks_.front() != 0.0 || breaks_.back() != 1.0)
      throw DomainError("TimeProfile: breakpoints must run from 0 to 1");
    if (coeffs_.size() + 1 != breaks_.size()) throw DomainError("TimeProfile: one coefficient list per piece");
    for (std::size_t k = 0; k + 1 < breaks_.size(); ++k) {
      if (!(breaks_[k] < breaks_[k + 1])) throw DomainError("TimeProfile: breakpoints must increase");
      if (coeffs_[k].empty()) throw DomainError("TimeProfile: empty piece");
    }
    for (std::size_t k = 1; k + 1 < breaks_.size(); ++k) {
      const double t = breaks_[k];
      const double l = horner(coeffs_[k - 1], t), r = horner(coeffs_[k], t);
      if (std::abs(l - r) > 1e-12 * std::max(1.0, std::abs(l))) throw DomainError("TimeProfile: discontinuous at a breakpoint");
    }
    sup_abs_ = compute_sup();
  }

  static TimeProfile constant(double c) { return TimeProfile({0.0, 1.0}, {{c}}); }
  static TimeProfile ramp() { return TimeProfile({0.0, 1.0}, {{0.0, 1.0}}); }

  double operator()(double t) const {
    const std::size_t k = piece(t);
    return horner(coeffs_[k], t);
  }

  bool is_constant() const {
    for (const auto& c : coeffs_)
      for (std::size_t i = 1; i < c.size(); ++i)
        if (c[i] != 0.0) return false;
    return true;
  }

  double sup_abs() const { return sup_abs_; }
  const std::vector<double>& breaks() const { return breaks_; }
  const std::vector<std::vector<double>>& coeffs() const { return coeffs_; }

  friend bool operator==(const TimeProfile&, const TimeProfile&) = default;

 private:
  static double horner(const std::vector<double>& c, double t) {
    double v = 0;
    for (std::size_t i = c.size(); i-- > 0;) v = v * t + c[i];
    return v;
  }

  std::size_t piece(double t) const {
    auto it = std::upper_bound(breaks_.begin() + 1, breaks_.end() - 1, t);
    return std::size_t(it - breaks_.begin() - 1);
  }

  // max |g| over [0,1]: endpoints of every piece plus real critical points from the
  // companion matrix of the derivative.
  double compute_sup() const {
    double best = 0;
    for (std::size_t k = 0; k + 1 < breaks_.size(); ++k) {
      const auto& c = coeffs_[k];
      const double a = breaks_[k], b = breaks_[k + 1];
      best = std::max({best, std::abs(horner(c, a)), std::abs(horner(c, b))});
      std::vector<double> dc;
      for (std::size_t i = 1; i < c.size(); ++i) dc.push_back(double(i) * c[i]);
      while (!dc.empty() && dc.back() == 0.0) dc.pop_back();
      if (dc.size() < 2) continue;
      const auto n = Eigen::Index(dc.size() - 1);
      Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(n, n);
      for (Eigen::Index i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
      for (Eigen::Index i = 0; i < n; ++i) comp(i, n - 1) = -dc[std::size_t(i)] / dc.back();
      Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto z = es.eigenvalues()(i);
        if (std::abs(z.imag()) > 1e-9) continue;
        const double t = z.real();
        if (t > a && t < b) best = std::max(best, std::abs(horner(c, t)));
      }
    }
    return best;
  }

  std::vector<double> breaks_;
  std::vector<std::vector<double>> coeffs_;
  double sup_abs_ = 0;
};

/// Phi(X; t) = g(t) * op with op Hermitian on X.
struct InteractionTerm {
  Region region;
  Matrix op;
  TimeProfile profile;
  double op_norm = 0;  // spectral norm of op, filled by Interaction

  double sup_norm() const { return profile.sup_abs() * op_norm; }
};

class Interaction {
 public:
  explicit Interaction(int local_dim = 2) : d_(local_dim) {}

  Interaction(std::vector<InteractionTerm> terms, int local_dim = 2) : d_(local_dim) {
    for (auto& t : terms) add(std::move(t));
  }

  void add(InteractionTerm t) {
    if (t.region.empty()) throw DomainError("interaction term on an empty region");
    const auto D = Eigen::Index(ipow(d_, t.region.size()));
    if (t.op.rows() != D || t.op.cols() != D) throw DomainError("interaction term matrix size mismatch");
    if (!detail::hermitian_within(t.op, 1e-10)) throw DomainError("interaction term not Hermitian");
    t.op = (t.op + t.op.adjoint()) / 2.0;
    t.op_norm = op_norm(LocalOperator::on(t.region, t.op, d_));
    range_ = std::max(range_, diameter(t.region));
    size_cap_ = std::max(size_cap_, int(t.region.size()));
    auto [it, fresh] = group_of_.try_emplace(t.region, groups_.size());
    if (fresh) {
      groups_.push_back({t.region, {}});
      for (Site s : t.region) site_groups_[site_key(s)].push_back(it->second);
    }
    TermGroup& g = groups_[it->second];
    g.terms.push_back(terms_.size());
    terms_.push_back(std::move(t));
    uniform_bound_ = std::max(uniform_bound_, group_sup_norm(g.terms));
  }

  void add(const Region& r, Matrix op, TimeProfile g = TimeProfile::constant(1.0)) {
    add(InteractionTerm{r, std::move(op), std::move(g), 0.0});
  }

  const std::vector<InteractionTerm>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }
  int local_dim() const { return d_; }
  double range() const { return range_; }
  int size_cap() const { return size_cap_; }
  double uniform_bound() const { return uniform_bound_; }

  struct TermGroup {
    Region region;
    std::vector<std::size_t> terms;
  };

  // Terms grouped by region, in order of first appearance.
  const std::vector<TermGroup>& groups() const { return groups_; }

  // Indices into groups() of the regions containing s.
  const std::vector<std::size_t>& groups_at(Site s) const {
    static const std::vector<std::size_t> none;
    auto it = site_groups_.find(site_key(s));
    return it == site_groups_.end() ? none : it->second;
  }

  bool time_independent() const {
    return std::all_of(terms_.begin(), terms_.end(), [](const auto& t) { return t.profile.is_constant(); });
  }

  std::vector<double> breakpoints() const {
    std::vector<double> b;
    for (const auto& t : terms_) b.insert(b.end(), t.profile.breaks().begin(), t.profile.breaks().end());
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    return b;
  }

  // Phi(X; t) summed over the terms sharing region X.
  Matrix group_matrix(const std::vector<std::size_t>& idx, double t) const {
    Matrix m = Matrix::Zero(terms_[idx.front()].op.rows(), terms_[idx.front()].op.cols());
    for (std::size_t i : idx) m += terms_[i].profile(t) * terms_[i].op;
    return m;
  }

  // sup_t ||Phi(X;t)||: exact for a single term, triangle bound for shared regions.
  double group_sup_norm(const std::vector<std::size_t>& idx) const {
    double s = 0;
    for (std::size_t i : idx) s += terms_[i].sup_norm();
    return s;
  }

  double group_norm_at(const std::vector<std::size_t>& idx, double t) const {
    if (idx.size() == 1) return std::abs(terms_[idx[0]].profile(t)) * terms_[idx[0]].op_norm;
    return op_norm(LocalOperator::on(terms_[idx.front()].region, group_matrix(idx, t), d_));
  }

  Region sites() const {
    std::vector<Site> v;
    for (const auto& t : terms_) v.insert(v.end(), t.region.begin(), t.region.end());
    return Region(std::move(v));
  }

  Interaction restricted_to(const Region& lambda) const {
    Interaction out(d_);
    for (const auto& t : terms_)
      if (t.region.subset_of(lambda)) out.add(t);
    return out;
  }

 private:
  int d_ = 2;
  std::vector<InteractionTerm> terms_;
  static std::int64_t site_key(Site s) { return (std::int64_t(s.x) << 32) ^ std::uint32_t(s.y); }

  std::vector<TermGroup> groups_;
  std::map<Region, std::size_t> group_of_;
  std::unordered_map<std::int64_t, std::vector<std::size_t>> site_groups_;
  double range_ = 0;
  int size_cap_ = 0;
  double uniform_bound_ = 0;
};

/// H_{Lambda,Phi}(t): sum of the terms inside Lambda, embedded into Lambda.
inline LocalOperator local_hamiltonian(const Interaction& phi, const Region& lambda, double t) {
  const int d = phi.local_dim();
  const auto D = Eigen::Index(ipow(d, lambda.size()));
  Matrix h = Matrix::Zero(D, D);
  std::vector<Site> supp;
  for (const auto& [region, idx] : phi.groups()) {
    if (!region.subset_of(lambda)) continue;
    const Matrix g = phi.group_matrix(idx, t);
    const auto split = detail::split_index(lambda, region, d);
    const auto nk = Eigen::Index(split.kept.size());
    for (Eigen::Index b : split.rest)
      for (Eigen::Index j = 0; j < nk; ++j)
        for (Eigen::Index i = 0; i < nk; ++i) h(split.kept[std::size_t(i)] + b, split.kept[std::size_t(j)] + b) += g(i, j);
    supp.insert(supp.end(), region.begin(), region.end());
  }
  return LocalOperator(Region(std::move(supp)), lambda, std::move(h), d);
}

/// ||Phi||(t) = sup over present pairs of sum_{Z containing x,y} ||Phi(Z;t)|| / F(d(x,y)).
inline double interaction_norm(const Interaction& phi, const FFunction& F, double t) {
  std::map<std::pair<Site, Site>, double> acc;
  for (const auto& [region, idx] : phi.groups()) {
    const double n = phi.group_norm_at(idx, t);
    for (Site x : region)
      for (Site y : region) acc[{x, y}] += n;
  }
  double best = 0;
  for (const auto& [xy, v] : acc) best = std::max(best, v / F(distance(xy.first, xy.second)));
  return best;
}

struct Quadrature {
  double value = 0;
  double error = 0;
};

namespace detail {

template <class Fn>
double adaptive_simpson(const Fn& f, double a, double b, double fa, double fm, double fb, double whole, double tol,
                        int depth, double& err) {
  const double m = (a + b) / 2, lm = (a + m) / 2, rm = (m + b) / 2;
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6 * (fa + 4 * flm + fm), right = (b - m) / 6 * (fm + 4 * frm + fb);
  const double diff = left + right - whole;
  if (depth <= 0 || std::abs(diff) <= 15 * tol) {
    err += std::abs(diff) / 15;
    return left + right + diff / 15;
  }
  return adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2, depth - 1, err) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, tol / 2, depth - 1, err);
}

}  // namespace detail

/// integral_0^1 ||Phi||(t) dt, adaptive Simpson on each polynomial piece.
inline Quadrature norm_integral(const Interaction& phi, const FFunction& F, double tol = 1e-10) {
  if (phi.empty()) return {};
  if (phi.time_independent()) return {interaction_norm(phi, F, 0.0), 0.0};
  const auto br = phi.breakpoints();
  Quadrature q;
  auto f = [&](double t) { return interaction_norm(phi, F, t); };
  for (std::size_t k = 0; k + 1 < br.size(); ++k) {
    const double a = br[k], b = br[k + 1];
    const double fa = f(a), fb = f(b), fm = f((a + b) / 2);
    const double whole = (b - a) / 6 * (fa + 4 * fm + fb);
    q.value += detail::adaptive_simpson(f, a, b, fa, fm, fb, whole, tol * (b - a), 40, q.error);
  }
  return q;
}

/// I(Phi) = C_F * integral of ||Phi||(t), with the upper C_F enclosure and the quadrature
/// error added so that the result is an upper bound.
inline double i_phi(const Interaction& phi, const FFunction& F, const TailBound& cf) {
  const Quadrature q = norm_integral(phi, F);
  return cf.upper() * (q.value + q.error);
}

inline double i_phi(const Interaction& phi, const FFunction& F) { return i_phi(phi, F, F.cf_bounds()); }

/// Phi_m(X;t) = |X|^m Phi(X;t).
inline Interaction weight(const Interaction& phi, double m) {
  Interaction out(phi.local_dim());
  for (auto t : phi.terms()) {
    t.op *= std::pow(double(t.region.size()), m);
    out.add(std::move(t));
  }
  return out;
}

struct Decoupled {
  Interaction phi0;
  Interaction phi1;  // phi0 - phi: the dropped terms with opposite sign
};

/// Keep terms inside one of Gamma1, Gamma2 \ Gamma1, Gamma2^c; Gamma2^c is the complement in
/// the whole lattice, so "inside" means disjoint from Gamma2.
inline Decoupled decouple(const Interaction& phi, const std::function<bool(Site)>& in_g1,
                          const std::function<bool(Site)>& in_g2) {
  Decoupled out{Interaction(phi.local_dim()), Interaction(phi.local_dim())};
  for (const auto& t : phi.terms()) {
    bool all1 = true, all_mid = true, all_out = true;
    for (Site s : t.region) {
      const bool a = in_g1(s), b = in_g2(s);
      all1 = all1 && a;
      all_mid = all_mid && b && !a;
      all_out = all_out && !b;
    }
    if (all1 || all_mid || all_out) {
      out.phi0.add(t);
    } else {
      auto neg = t;
      neg.op = -neg.op;
      out.phi1.add(std::move(neg));
    }
  }
  return out;
}

inline Decoupled decouple(const Interaction& phi, const Region& g1, const Region& g2) {
  if (!g1.subset_of(g2)) throw DomainError("decouple: Gamma1 must lie inside Gamma2");
  return decouple(phi, [&](Site s) { return g1.contains(s); }, [&](Site s) { return g2.contains(s); });
}

inline Decoupled decouple(const Interaction& phi, const Cone& g1, const Cone& g2) {
  return decouple(phi, [&](Site s) { return g1.contains(s); }, [&](Site s) { return g2.contains(s); });
}

/// Exact lattice distance from a site to the nearest lattice point outside a predicate set;
/// memoized per site.
class ComplementDistance {
 public:
  ComplementDistance(std::function<bool(Site)> inside, int dimension = 2, int search_cap = 100000)
      : inside_(std::move(inside)), dim_(dimension), cap_(search_cap) {}

  double operator()(Site x) const {
    if (auto it = memo_.find(key(x)); it != memo_.end()) return it->second;
    std::int64_t best = INT64_MAX;
    for (int R = 0; R <= cap_; ++R) {
      if (best != INT64_MAX && std::int64_t(R) * R > best) break;
      auto visit = [&](int dx, int dy) {
        if (!inside_({x.x + dx, x.y + dy})) best = std::min(best, std::int64_t(dx) * dx + std::int64_t(dy) * dy);
      };
      if (dim_ == 1) {
        visit(R, 0);
        if (R) visit(-R, 0);
        continue;
      }
      if (R == 0) {
        visit(0, 0);
        continue;
      }
      for (int k = -R; k <= R; ++k) {
        visit(k, R);
        visit(k, -R);
      }
      for (int k = -R + 1; k <= R - 1; ++k) {
        visit(R, k);
        visit(-R, k);
      }
    }
    if (best == INT64_MAX) throw DomainError("ComplementDistance: complement not found within search cap");
    const double d = std::sqrt(double(best));
    memo_.emplace(key(x), d);
    return d;
  }

  double operator()(const Region& X) const {
    double d = INFINITY;
    for (Site s : X) d = std::min(d, (*this)(s));
    return d;
  }

 private:
  static std::int64_t key(Site s) { return (std::int64_t(s.x) << 32) ^ std::uint32_t(s.y); }
  std::function<bool(Site)> inside_;
  int dim_;
  int cap_;
  mutable std::unordered_map<std::int64_t, double> memo_;
};

/// f(m,x,y) = sum over regions X containing x and y with d(complement of the strip, X) <= m
/// of |X| sup_t ||Phi(X;t)||; the strip is Gamma2' \ Gamma1'.
inline double f_mxy(const Interaction& phi, const ComplementDistance& strip_complement, int m, Site x, Site y) {
  if (m < 0) throw DomainError("f_mxy: negative m");
  if (distance(x, y) > phi.range() + 1e-12) return 0.0;
  double acc = 0;
  for (std::size_t gi : phi.groups_at(x)) {
    const auto& [region, idx] = phi.groups()[gi];
    if (!region.contains(y)) continue;
    if (strip_complement(region) <= m + 1e-12) acc += double(region.size()) * phi.group_sup_norm(idx);
  }
  return acc;
}

inline double f_mxy(const Interaction& phi, const Cone& g1p, const Cone& g2p, int m, Site x, Site y,
                    int dimension = 2) {
  ComplementDistance cd([&](Site s) { return g2p.contains(s) && !g1p.contains(s); }, dimension);
  return f_mxy(phi, cd, m, x, y);
}

}  // namespace quasiloc
