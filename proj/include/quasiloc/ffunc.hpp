#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"

namespace quasiloc {

namespace detail {

inline double log_add_exp(double a, double b) {
  if (a == -INFINITY) return b;
  if (b == -INFINITY) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

// Relative slack covering accumulated rounding in the enclosure sums.
inline constexpr double kSumSlack = 1e-10;

}  // namespace detail

/// Certified value in e^{log_scale} * [partial_sum, partial_sum + tail_upper].
struct TailBound {
  double partial_sum = 0.0;
  double tail_upper = 0.0;
  int cut_radius = 0;
  double log_scale = 0.0;

  double lower() const { return std::exp(log_scale) * partial_sum; }
  double upper() const { return std::exp(log_scale) * (partial_sum + tail_upper); }
  double log_lower() const { return log_scale + std::log(partial_sum); }
  double log_upper() const { return log_scale + std::log(partial_sum + tail_upper); }
  bool contains(double v) const { return v >= lower() && v <= upper(); }
  bool encloses(const TailBound& o) const { return o.lower() >= lower() && o.upper() <= upper(); }
};

namespace detail {

inline TailBound make_bound(double log_partial, double log_tail, int cut) {
  TailBound b;
  b.cut_radius = cut;
  if (log_partial == -INFINITY) {
    b.log_scale = log_tail;
    b.partial_sum = 0.0;
    b.tail_upper = log_tail == -INFINITY ? 0.0 : 1.0;
    if (log_tail == -INFINITY) b.log_scale = 0.0;
    return b;
  }
  const double tail_rel = std::exp(log_tail - log_partial);
  if (log_partial > -600 && log_partial < 600) {
    const double p = std::exp(log_partial);
    b.partial_sum = p * (1 - kSumSlack);
    b.tail_upper = p * tail_rel + 2 * kSumSlack * p;
  } else {
    b.log_scale = log_partial;
    b.partial_sum = 1 - kSumSlack;
    b.tail_upper = tail_rel + 2 * kSumSlack;
  }
  return b;
}

}  // namespace detail

/// Log of an upper bound for sum_{|y| > R} e^{-a|y|} (1+|y|)^{-p} over Z^dim.
/// Every unit cell of a point with |y| > R lies in |q| > R - sqrt(2) (2D), so the sum
/// is dominated by the radial integral of e^{-a(r - sqrt 2)} (1 + r - sqrt 2)^{-p} r dr.
inline double lattice_tail_log(int dim, double a, double p, double R) {
  constexpr double sqrt2 = std::numbers::sqrt2;
  if (dim == 1) {
    const double Rf = std::floor(R);
    if (Rf < 0) throw DomainError("lattice_tail: negative radius");
    if (a == 0) {
      if (p <= 1) throw DivergenceError("lattice tail diverges: exponent <= dimension");
      return std::log(2.0) + (1 - p) * std::log1p(Rf) - std::log(p - 1);
    }
    return std::log(2.0) - p * std::log1p(Rf) - a * Rf - std::log(a);
  }
  const double u0 = 1 + R - sqrt2;
  if (u0 <= 0) throw DomainError("lattice_tail: radius too small");
  if (a == 0) {
    if (p <= 2) throw DivergenceError("lattice tail diverges: exponent <= dimension");
    const double c = sqrt2 - 1;
    const double v = std::pow(u0, 2 - p) / (p - 2) + c * std::pow(u0, 1 - p) / (p - 1);
    return std::log(2 * std::numbers::pi) + std::log(v);
  }
  return std::log(2 * std::numbers::pi) + a * sqrt2 - p * std::log(u0) - a * R + std::log(a * R + 1) -
         2 * std::log(a);
}

/// F(r) = (1+r)^{-s}, optionally weighted to e^{-r}(1+r)^{-s}, on Z^nu.
class FFunction {
 public:
  FFunction(double s, bool weighted, int nu = 2) : s_(s), weighted_(weighted), nu_(nu) {
    if (!(s >= 0)) throw DomainError("FFunction: exponent must be non-negative");
    if (nu != 1 && nu != 2) throw DomainError("FFunction: nu must be 1 or 2");
    if (!weighted && s <= nu) throw DivergenceError("FFunction: unweighted family needs s > nu");
  }

  double s() const { return s_; }
  bool weighted() const { return weighted_; }
  int nu() const { return nu_; }

  double log_value(double r) const { return -s_ * std::log1p(r) - (weighted_ ? r : 0.0); }
  double operator()(double r) const { return std::exp(log_value(r)); }

  FFunction base() const { return FFunction(s_, false, nu_); }
  FFunction with_weight() const { return FFunction(s_, true, nu_); }

  static constexpr int kNormCut = 200;
  static constexpr int kConvCut = 40;

  // Cached at kNormCut / kConvCut; computed once, read-only afterwards.
  const TailBound& f_norm_bounds() const;
  const TailBound& cf_bounds() const;

  friend bool operator==(const FFunction& a, const FFunction& b) {
    return a.s_ == b.s_ && a.weighted_ == b.weighted_ && a.nu_ == b.nu_;
  }

 private:
  struct Cache {
    std::once_flag norm_once, conv_once;
    TailBound norm, conv;
  };
  double s_;
  bool weighted_;
  int nu_;
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

/// Lattice points of Z^nu grouped by squared norm, up to norm cut.
struct RadialShells {
  std::vector<std::int64_t> norm2;
  std::vector<std::int64_t> count;

  RadialShells(int nu, std::int64_t cut) {
    const std::int64_t c2 = cut * cut;
    if (nu == 1) {
      for (std::int64_t k = 0; k <= cut; ++k) {
        norm2.push_back(k * k);
        count.push_back(k == 0 ? 1 : 2);
      }
      return;
    }
    std::vector<std::int64_t> tally(std::size_t(c2 + 1), 0);
    for (std::int64_t a = 0; a <= cut; ++a)
      for (std::int64_t b = 0; a * a + b * b <= c2; ++b) {
        const std::int64_t mult = (a == 0 ? 1 : 2) * (b == 0 ? 1 : 2);
        tally[std::size_t(a * a + b * b)] += mult;
      }
    for (std::int64_t n = 0; n <= c2; ++n)
      if (tally[std::size_t(n)]) {
        norm2.push_back(n);
        count.push_back(tally[std::size_t(n)]);
      }
  }
};

/// Enclosures of G_F(t) = sum_{|y| >= t} F(|y|) for 0 <= t <= cut.
class GTable {
 public:
  GTable(const FFunction& F, int cut) : F_(F), cut_(cut), shells_(F.nu(), cut) {
    if (cut < 1) throw DomainError("GTable: cut must be >= 1");
    log_tail_ = lattice_tail_log(F.nu(), F.weighted() ? 1.0 : 0.0, F.s(), cut);
    suffix_.assign(shells_.norm2.size() + 1, -INFINITY);
    for (std::size_t i = shells_.norm2.size(); i-- > 0;) {
      const double r = std::sqrt(double(shells_.norm2[i]));
      const double term = std::log(double(shells_.count[i])) + F.log_value(r);
      suffix_[i] = detail::log_add_exp(suffix_[i + 1], term);
    }
  }

  int cut() const { return cut_; }
  const FFunction& function() const { return F_; }
  double log_tail() const { return log_tail_; }

  TailBound at(double t) const {
    if (t < 0) throw DomainError("g_f: negative t");
    if (t > cut_) throw DomainError("g_f: cut must be >= t");
    const auto first = std::int64_t(std::ceil(t * t - 1e-9));
    const auto it = std::lower_bound(shells_.norm2.begin(), shells_.norm2.end(), first);
    return detail::make_bound(suffix_[std::size_t(it - shells_.norm2.begin())], log_tail_, cut_);
  }

 private:
  FFunction F_;
  int cut_;
  RadialShells shells_;
  std::vector<double> suffix_;
  double log_tail_ = 0;
};

inline TailBound g_f(const FFunction& F, double t, int cut) {
  if (t > cut) throw DomainError("g_f: cut must be >= t");
  return GTable(F, cut).at(t);
}

inline TailBound f_norm(const FFunction& F, int cut) { return GTable(F, cut).at(0.0); }

namespace detail {

// sum_{|z|^2 <= Rz2} f[|z|^2] f[|z-v|^2] / f[|v|^2] for a table f indexed by squared norm.
inline double conv_partial_sum(std::span<const double> f, int nu, int vx, int vy, double Rz) {
  const std::int64_t R = std::int64_t(std::floor(Rz + 1e-12));
  const double Rz2 = Rz * Rz + 1e-9;
  const std::int64_t v2 = std::int64_t(vx) * vx + std::int64_t(vy) * vy;
  double acc = 0.0;
  const std::int64_t ylim = nu == 2 ? R : 0;
  for (std::int64_t zx = -R; zx <= R; ++zx) {
    double row = 0.0;
    for (std::int64_t zy = -ylim; zy <= ylim; ++zy) {
      const std::int64_t z2 = zx * zx + zy * zy;
      if (double(z2) > Rz2) continue;
      const std::int64_t dx = zx - vx, dy = zy - vy;
      row += f[std::size_t(z2)] * f[std::size_t(dx * dx + dy * dy)];
    }
    acc += row;
  }
  return acc / f[std::size_t(v2)];
}

}  // namespace detail

/// Enclosure of C_F = sup_{x,y} sum_z F(d(x,z)) F(d(z,y)) / F(d(x,y)).
/// The scan over |y - x| <= cut gives the lower end; every displacement obeys the universal
/// bound 2^{s+1} ||F_base||, which is what the upper end reports when it dominates.
inline TailBound conv_constant(const FFunction& F, int cut) {
  if (cut < 1) throw DomainError("conv_constant: cut must be >= 1");
  if (F.s() <= F.nu()) throw DivergenceError("conv_constant: needs s > nu");
  const int nu = F.nu();
  const double w = F.weighted() ? 1.0 : 0.0;
  const std::int64_t maxn = 3 * std::int64_t(cut) + 2;
  const std::int64_t max2 = nu == 2 ? 2 * maxn * maxn : maxn * maxn;
  std::vector<double> table(std::size_t(max2 + 1));
  for (std::int64_t n = 0; n <= max2; ++n) table[std::size_t(n)] = F(std::sqrt(double(n)));

  double best_lower = 0.0, best_upper = 0.0;
  const int ylim = nu == 2 ? cut : 0;
  for (int vx = 0; vx <= cut; ++vx)
    for (int vy = 0; vy <= std::min(vx, ylim); ++vy) {
      const double vn = std::hypot(double(vx), double(vy));
      if (vn > cut + 1e-12) continue;
      const double Rz = cut + vn;
      const double part = detail::conv_partial_sum(table, nu, vx, vy, Rz);
      const double kappa = Rz / cut;
      const double log_tail = F.s() * std::log(kappa) + F.s() * std::log1p(vn) + 2 * w * vn +
                              lattice_tail_log(nu, 2 * w, 2 * F.s(), Rz);
      best_lower = std::max(best_lower, part);
      best_upper = std::max(best_upper, part * (1 + detail::kSumSlack) + std::exp(log_tail));
    }
  const double universal = std::pow(2.0, F.s() + 1) * f_norm(F.base(), std::max(cut, 50)).upper();
  TailBound b;
  b.cut_radius = cut;
  b.partial_sum = best_lower * (1 - detail::kSumSlack);
  b.tail_upper = std::max(best_upper, universal) - b.partial_sum;
  return b;
}

inline const TailBound& FFunction::f_norm_bounds() const {
  std::call_once(cache_->norm_once, [&] { cache_->norm = f_norm(*this, kNormCut); });
  return cache_->norm;
}

inline const TailBound& FFunction::cf_bounds() const {
  std::call_once(cache_->conv_once, [&] { cache_->conv = conv_constant(*this, kConvCut); });
  return cache_->conv;
}

/// C = 4 pi e^{sqrt 2}, the constant of the weighted tail estimate.
inline double lemma_constant() { return 4 * std::numbers::pi * std::exp(std::numbers::sqrt2); }

// log of C F(m - sqrt2) m e^{-m} for the unweighted base of F.
inline double gf_decay_rhs_log(const FFunction& F, double m) {
  return std::log(lemma_constant()) + F.base().log_value(m - std::numbers::sqrt2) + std::log(m) - m;
}

struct GfDecayRow {
  int m = 0;
  double log_lhs = 0;  // log of the G_{F_r}(m) upper enclosure
  double log_rhs = 0;
  double margin = 0;   // log_rhs - log_lhs
  bool holds = false;
};

struct GfDecayReport {
  std::vector<GfDecayRow> rows;
  bool all_hold = true;
};

inline GfDecayReport gf_decay_check(const FFunction& F, int m_lo, int m_hi) {
  if (!F.weighted()) throw DomainError("gf_decay_check: the estimate concerns the weighted F_r");
  if (F.nu() != 2) throw DomainError("gf_decay_check: stated on Z^2");
  if (!(m_lo > std::numbers::sqrt2)) throw DomainError("gf_decay_check: m_lo must exceed sqrt(2)");
  if (m_hi < m_lo) throw DomainError("gf_decay_check: empty range");
  GTable table(F, m_hi + 40);
  GfDecayReport rep;
  for (int m = m_lo; m <= m_hi; ++m) {
    GfDecayRow row;
    row.m = m;
    row.log_lhs = table.at(m).log_upper();
    row.log_rhs = gf_decay_rhs_log(F, m);
    row.margin = row.log_rhs - row.log_lhs;
    row.holds = row.margin >= 0;
    rep.all_hold = rep.all_hold && row.holds;
    rep.rows.push_back(row);
  }
  return rep;
}

// log of C F(0) e^{-k+1} ((e-1)k + 1) / (e-1)^2, the bound on sum_{m>=k} G_{F_r}(m).
inline double gsum_bound_log(int k, const FFunction& F) {
  const double e = std::numbers::e;
  return std::log(lemma_constant()) + F.base().log_value(0.0) + (1.0 - k) + std::log((e - 1) * k + 1) -
         2 * std::log(e - 1);
}

// sum_{k >= k0} of the above, in closed form (geometric and arithmetico-geometric series).
inline double gsum_bound_series_log(int k0, const FFunction& F) {
  const double e = std::numbers::e, x = 1 / e;
  const double geo = 1 / (1 - x);
  const double arith = (k0 - (k0 - 1) * x) / ((1 - x) * (1 - x));
  return std::log(lemma_constant()) + F.base().log_value(0.0) + 1.0 - k0 +
         std::log((e - 1) * arith + geo) - 2 * std::log(e - 1);
}

struct MomentResult {
  TailBound moment;
  std::vector<double> radius;   // r = 0, 1, ..., 3 cut + 2
  std::vector<double> f_tilde;  // max{F(r/3), sum_{n >= floor(r/3)} (1+n)^{2nu+1} G_F(n)^alpha}
  double alpha = 0.5;
};

/// Enclosure of sum_{n>=0} (1+n)^{2nu+1} G_F(n)^alpha and the tabulated F-tilde.
inline MomentResult moment_and_tilde(const FFunction& F, double alpha, int cut) {
  if (!(alpha > 0 && alpha <= 1)) throw DomainError("moment_and_tilde: alpha must lie in (0,1]");
  if (cut < 4) throw DomainError("moment_and_tilde: cut must be >= 4");
  const int nu = F.nu();
  const double q = 2 * nu + 1;
  constexpr double delta = 1e-6;
  const int N = cut;
  GTable table(F, N);

  std::vector<double> h_lo(std::size_t(N + 1)), h_up(std::size_t(N + 1));
  for (int n = 0; n <= N; ++n) {
    const TailBound g = table.at(n);
    const double w = q * std::log1p(double(n));
    h_lo[std::size_t(n)] = g.partial_sum > 0 ? std::exp(w + alpha * g.log_lower()) : 0.0;
    h_up[std::size_t(n)] = std::exp(w + alpha * g.log_upper());
  }

  // tail beyond N, from G_F(n) <= T(n) := lattice tail past n - delta
  auto T_log = [&](int n) { return lattice_tail_log(nu, F.weighted() ? 1.0 : 0.0, F.s(), n - delta); };
  double tail;
  if (F.weighted()) {
    double rho = std::pow((N + 3.0) / (N + 2.0), q);
    rho *= nu == 2 ? std::pow(std::exp(-1.0) * (N + 3 - delta) / (N + 2 - delta), alpha) : std::exp(-alpha);
    if (rho >= 1) throw DivergenceError("moment_and_tilde: cut too small for the geometric tail");
    tail = std::exp(q * std::log(N + 2.0) + alpha * T_log(N + 1)) / (1 - rho);
  } else {
    const double e = q + alpha * (nu - F.s());
    if (e >= -1) throw DivergenceError("moment_and_tilde: moment series diverges for this s and alpha");
    double K, lambda;
    if (nu == 2) {
      const double u1 = 1 + (N + 1) - delta - std::numbers::sqrt2;
      K = 2 * std::numbers::pi * (1 / (F.s() - 2) + (std::numbers::sqrt2 - 1) / ((F.s() - 1) * u1));
      lambda = u1 / (N + 2.0);
    } else {
      K = 2 / (F.s() - 1);
      lambda = (N + 1.0) / (N + 2.0);
    }
    const double coef = std::pow(K, alpha) * std::pow(lambda, alpha * (nu - F.s()));
    tail = coef * std::pow(1.0 + N, e + 1) / (-e - 1);
  }

  double lo = 0, up = 0;
  for (int n = 0; n <= N; ++n) {
    lo += h_lo[std::size_t(n)];
    up += h_up[std::size_t(n)];
  }
  MomentResult res;
  res.alpha = alpha;
  res.moment.cut_radius = N;
  res.moment.partial_sum = lo * (1 - detail::kSumSlack);
  res.moment.tail_upper = up * (1 + detail::kSumSlack) + tail - res.moment.partial_sum;

  std::vector<double> suffix(std::size_t(N + 2), 0.0);
  suffix[std::size_t(N + 1)] = tail;
  for (int n = N; n >= 0; --n) suffix[std::size_t(n)] = suffix[std::size_t(n + 1)] + h_up[std::size_t(n)];
  for (int r = 0; r <= 3 * N + 2; ++r) {
    res.radius.push_back(r);
    res.f_tilde.push_back(std::max(F(r / 3.0), suffix[std::size_t(r / 3)]));
  }
  return res;
}

}  // namespace quasiloc
