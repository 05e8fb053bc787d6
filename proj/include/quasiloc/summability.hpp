#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "errors.hpp"
#include "ffunc.hpp"
#include "interaction.hpp"
#include "lattice.hpp"

namespace quasiloc {

/// Cone pair Gamma1 in Gamma2 sharing an axis, plus the widened/narrowed cones built from them.
/// Angles are half-angles in radians; Gamma2 has its apex at (apex_x, apex_y), Gamma1 sits
/// d2 further along the axis.
struct ConePairConfig {
  double alpha = std::numbers::pi / 6;
  double beta = std::numbers::pi / 12;
  double epsilon = std::numbers::pi / 36;
  double d2 = 20;
  double d1 = 1;   // Gamma1' apex beyond Gamma1's
  double d2p = 1;  // Gamma2' apex behind Gamma2's
  double d_phi = 1;
  double c_count = 2;
  double M = 1;
  double apex_x = 0, apex_y = 0, axis = 0;

  void validate() const {
    if (!(alpha > beta)) throw GeometryInfeasible("cone pair: alpha must exceed beta (boundaries are parallel otherwise)");
    if (!(beta > 0)) throw DomainError("cone pair: beta must be positive");
    if (!(epsilon > 0 && epsilon < beta)) throw DomainError("cone pair: need 0 < epsilon < beta");
    if (!(alpha + epsilon < std::numbers::pi / 2)) throw DomainError("cone pair: need alpha + epsilon < pi/2");
    if (!(d2 > 0 && d1 > 0 && d2p > 0)) throw DomainError("cone pair: tip separations must be positive");
    if (!(d_phi > 0) || !(c_count > 0) || !(M >= 0)) throw DomainError("cone pair: invalid interaction metadata");
  }

  double ux() const { return std::cos(axis); }
  double uy() const { return std::sin(axis); }
  Cone gamma2() const { return {apex_x, apex_y, axis, alpha}; }
  Cone gamma1() const { return {apex_x + d2 * ux(), apex_y + d2 * uy(), axis, beta}; }
  Cone gamma2p() const { return {apex_x - d2p * ux(), apex_y - d2p * uy(), axis, alpha + epsilon}; }
  Cone gamma1p() const { return {apex_x + (d2 + d1) * ux(), apex_y + (d2 + d1) * uy(), axis, beta - epsilon}; }
  double radius(Site s) const { return std::hypot(s.x - apex_x, s.y - apex_y); }
};

/// Arc length along the boundary of Gamma1 from its tip to the circle of radius n around
/// Gamma2's tip; 0 when there is no intersection beyond the tip.
inline double d_gamma1(const ConePairConfig& c, double n) {
  const double disc = n * n - c.d2 * c.d2 * std::pow(std::sin(c.beta), 2);
  if (disc < 0) return 0.0;
  return std::max(0.0, std::sqrt(disc) - c.d2 * std::cos(c.beta));
}

// Lower bound on the distance from Gamma2 \ Gamma1 outside b_0(n) to Gamma1'. It equals
// gamma0 + (d_Gamma1(n) - d_gamma0) sin(eps) identically: the half-plane bound of the
// boundary line of Gamma1'.
inline double gamma_of(const ConePairConfig& c, double n) {
  return d_gamma1(c, n) * std::sin(c.epsilon) + c.d1 * std::sin(c.beta - c.epsilon);
}

// Distance from Gamma2 outside b_0(n) to the complement of Gamma2'.
inline double outer_gap(const ConePairConfig& c, double n) {
  return c.d2p * std::sin(c.alpha + c.epsilon) + n * std::sin(c.epsilon);
}

struct GeometryReport {
  double d0 = 0;
  int n0 = 0;
  double shell_width = 0;
  double shell_origin = 0;  // B_k = b_0(O + (k+1) w) \ b_0(O + k w)
  double gamma0 = 0, d_gamma0 = 0;
  double gamma1_gap = 0;    // d(Gamma1, Gamma2^c) = d2 sin(alpha)
  std::vector<double> n_samples, gamma_samples, d_gamma1_samples;
};

inline GeometryReport build_geometry(const ConePairConfig& c, int n_cap = 1000000) {
  c.validate();
  GeometryReport g;
  const double se = std::sin(c.epsilon);
  g.shell_width = 1 / se;
  g.d_gamma0 = c.d1 * std::cos(c.beta - c.epsilon) / std::cos(c.epsilon);
  g.gamma0 = g.d_gamma0 * se + c.d1 * std::sin(c.beta - c.epsilon);
  g.gamma1_gap = c.d2 * std::sin(c.alpha);
  const double target = 2 * c.d_phi;
  auto d0_at = [&](double n) { return std::min(outer_gap(c, n), gamma_of(c, n)); };
  // both parts are non-decreasing in n, so bisect for the first integer above target
  if (!(d0_at(n_cap) > target))
    throw GeometryInfeasible("geometry: no n0 below " + std::to_string(n_cap) + " (epsilon too small)");
  int lo = -1, hi = n_cap;
  while (hi - lo > 1) {
    const int mid = lo + (hi - lo) / 2;
    (d0_at(mid) > target ? hi : lo) = mid;
  }
  g.n0 = hi;
  g.d0 = d0_at(hi);
  g.shell_origin = std::max(double(g.n0), g.d0);
  const int n_top = int(std::ceil(g.shell_origin + 4 * g.shell_width));
  const int step = std::max(1, n_top / 64);
  for (int n = 0; n <= n_top; n += step) {
    g.n_samples.push_back(n);
    g.gamma_samples.push_back(gamma_of(c, n));
    g.d_gamma1_samples.push_back(d_gamma1(c, n));
  }
  return g;
}

/// C F(0) e^{-k+1}((e-1)k + 1)/(e-1)^2, the bound on sum_{m>=k} G_{F_r}(m).
inline double shell_tail(int k, const FFunction& F) {
  if (k < 2) throw DomainError("shell_tail: k must be >= 2");
  if (!F.weighted()) throw DomainError("shell_tail: F must be weighted");
  return std::exp(gsum_bound_log(k, F));
}

/// Enclosures of S(k) = sum_{m>=k} G_{F_r}(m): direct up to m_cap, closed-form tail beyond.
class GSums {
 public:
  GSums(const FFunction& F, int m_cap) : F_(F), m_cap_(m_cap) {
    if (!F.weighted() || F.nu() != 2) throw DomainError("GSums: weighted F on Z^2 required");
    if (m_cap < 2) throw DomainError("GSums: m_cap must be >= 2");
    GTable table(F, m_cap + 40);
    lo_.assign(std::size_t(m_cap) + 2, 0.0);
    hi_.assign(std::size_t(m_cap) + 2, std::exp(gsum_bound_log(m_cap + 1, F)));
    g_lo_.resize(std::size_t(m_cap) + 1);
    g_hi_.resize(std::size_t(m_cap) + 1);
    for (int m = m_cap; m >= 0; --m) {
      const TailBound b = table.at(m);
      g_lo_[m] = b.lower();
      g_hi_[m] = b.upper();
      lo_[m] = lo_[m + 1] + g_lo_[m];
      hi_[m] = hi_[m + 1] + g_hi_[m];
    }
  }

  int m_cap() const { return m_cap_; }
  double g_lower(int m) const { return m <= m_cap_ ? g_lo_[m] : 0.0; }
  double g_upper(int m) const { return m <= m_cap_ ? g_hi_[m] : std::exp(gsum_bound_log(std::max(m, 2), F_)); }
  double s_lower(int k) const { return k <= m_cap_ ? lo_[std::max(k, 0)] : 0.0; }
  double s_upper(int k) const { return k <= m_cap_ ? hi_[std::max(k, 0)] : std::exp(gsum_bound_log(k, F_)); }

 private:
  FFunction F_;
  int m_cap_;
  std::vector<double> lo_, hi_, g_lo_, g_hi_;
};

struct ShellRow {
  int k = 0;
  double r_inner = 0, r_outer = 0;
  double lower = 0, upper = 0;
  double bound = 0;            // C_p(k) C_# M 2^{|b_0(d_Phi)|} S(k)
  std::size_t pairs = 0;       // contributing (x,y) pairs
  double min_strip_distance = INFINITY;  // min d(x, (Gamma2' \ Gamma1')^c) over x in the shell
};

struct SummabilityCertificate {
  double finite_pair_sum = 0, finite_pair_lower = 0;
  double ball_sum = 0, ball_lower = 0;
  double shell_sum_partial = 0, shell_partial_lower = 0;
  double shell_tail_upper = 0;
  double total_upper = 0, total_lower = 0;
  double c_p = 0;              // per-shell pair count bound used for the tail
  int shells = 0;              // K
  int ball_count = 0;          // |b_0(d_Phi)|
  bool shell_distances_ok = true;
  bool shells_within_bound = true;
  bool converged = false;
  GeometryReport geometry;
  ConePairConfig config;
  std::vector<ShellRow> rows;
};

namespace detail {

inline int ball_count(double r) {
  const int k = int(std::floor(r + 1e-12));
  int n = 0;
  for (int dx = -k; dx <= k; ++dx)
    for (int dy = -k; dy <= k; ++dy)
      if (double(dx * dx + dy * dy) <= r * r + 1e-9) ++n;
  return n;
}

// Lattice points within h of the part of a boundary ray whose foot points lie at radius
// [R - h, R + w + h], bounded via the area of the stadium thickened by a unit cell.
inline double band_count_bound(double L, double h) {
  const double rho = std::numbers::sqrt2 / 2;
  return 2 * (h + rho) * L + std::numbers::pi * (h + rho) * (h + rho);
}

}  // namespace detail

/// Upper bound on the number of pairs (x,y) with x in B_k cap (Gamma2 \ Gamma1), y outside
/// Gamma2 \ Gamma1 and d(x,y) <= d_Phi, for every shell with inner radius >= R.
inline double pair_count_bound(const ConePairConfig& c, double R, double w) {
  const double h = c.d_phi;
  const double L2 = w + 2 * h;
  const double L1 = d_gamma1(c, R + w + h) - d_gamma1(c, std::max(0.0, R - h));
  const double per_x = detail::ball_count(h) - 1;
  return per_x * 2 * (detail::band_count_bound(L2, h) + detail::band_count_bound(L1, h));
}

/// Evaluates the summability condition for Phi over the cone pair: exact lattice sums over the
/// Gamma1 x Gamma2^c pairs, the central ball and shells k = 0..K, and a rigorous tail for k > K.
inline SummabilityCertificate certify_anan(const Interaction& phi, const ConePairConfig& c, const LatticeConfig& lat,
                                           const FFunction& F, int K = 8, int m_cap = 400) {
  c.validate();
  lat.validate();
  if (lat.dimension != 2) throw DomainError("certify_anan: needs a 2D lattice");
  if (K < 1) throw DomainError("certify_anan: K must be >= 1");
  if (phi.range() > c.d_phi + 1e-12) throw DomainError("certify_anan: interaction range exceeds d_phi");
  if (phi.size_cap() > c.c_count + 1e-12) throw DomainError("certify_anan: term support exceeds C_#");
  if (phi.uniform_bound() > c.M * (1 + 1e-12) + 1e-300) throw DomainError("certify_anan: term norm exceeds M");

  SummabilityCertificate cert;
  cert.config = c;
  cert.shells = K;
  cert.geometry = build_geometry(c);
  const GeometryReport& g = cert.geometry;
  const double O = g.shell_origin, w = g.shell_width;
  const double r_max = O + (K + 1) * w;

  const Cone g1 = c.gamma1(), g2 = c.gamma2(), g1p = c.gamma1p(), g2p = c.gamma2p();
  const double sa = std::sin(c.alpha);
  const double s1_radius =
      std::max(0.0, c.d_phi - c.d2 * sa) / std::min(std::sin(c.alpha - c.beta), std::sin(c.alpha + c.beta));
  const double need = std::max(r_max, c.d2 + s1_radius) + c.d_phi + 1;
  const double reach = std::max(std::abs(c.apex_x), std::abs(c.apex_y)) + need;
  if (reach > lat.truncation_radius)
    throw TruncationOverflow("certify_anan: truncation radius must be at least " +
                             std::to_string(int(std::ceil(reach))));

  const GSums S(F, m_cap);
  cert.ball_count = detail::ball_count(c.d_phi);
  const double f_cap = c.c_count * c.M * std::pow(2.0, cert.ball_count);
  const ComplementDistance strip_cd([&](Site s) { return g2p.contains(s) && !g1p.contains(s); }, 2);

  std::vector<Site> offsets;
  const int hk = int(std::floor(c.d_phi + 1e-12));
  for (int dx = -hk; dx <= hk; ++dx)
    for (int dy = -hk; dy <= hk; ++dy)
      if ((dx || dy) && double(dx * dx + dy * dy) <= c.d_phi * c.d_phi + 1e-9) offsets.push_back({dx, dy});

  // sum_m G(m) f(m,x,y) = sum_{m < M} G(m) f(m,x,y) + f(M,x,y) S(M) once f saturates at M >= d(x, strip^c)
  struct Acc {
    double lo = 0, hi = 0;
    std::size_t pairs = 0;
  };
  auto pair_value = [&](Site x, Site y, Acc& acc) {
    const double cd = strip_cd(x);
    const int M = int(std::ceil(cd - 1e-9));
    const int m_lo = std::max(0, int(std::ceil(cd - c.d_phi - 1e-9)));
    double lo = 0, hi = 0;
    for (int m = m_lo; m < M; ++m) {
      const double f = f_mxy(phi, strip_cd, m, x, y);
      lo += S.g_lower(m) * f;
      hi += S.g_upper(m) * f;
    }
    const double f_full = f_mxy(phi, strip_cd, M, x, y);
    lo += f_full * S.s_lower(M);
    hi += f_full * S.s_upper(M);
    if (f_full > 0) ++acc.pairs;
    acc.lo += lo;
    acc.hi += hi;
  };

  const int box = int(std::ceil(need));
  const auto cx = int(std::lround(c.apex_x)), cy = int(std::lround(c.apex_y));

  // x in Gamma1, y outside Gamma2
  Acc first;
  if (s1_radius > 0 || c.d2 * sa <= c.d_phi) {
    for (int dx = -box; dx <= box; ++dx)
      for (int dy = -box; dy <= box; ++dy) {
        const Site x{cx + dx, cy + dy};
        if (!g1.contains(x)) continue;
        for (Site o : offsets) {
          const Site y{x.x + o.x, x.y + o.y};
          if (!g2.contains(y)) pair_value(x, y, first);
        }
      }
  }
  cert.finite_pair_sum = first.hi;
  cert.finite_pair_lower = first.lo;

  // x in Gamma2 \ Gamma1, split into the central ball and shells
  Acc ball;
  std::vector<Acc> shell(std::size_t(K) + 1);
  cert.rows.resize(std::size_t(K) + 1);
  for (int k = 0; k <= K; ++k) {
    cert.rows[k].k = k;
    cert.rows[k].r_inner = O + k * w;
    cert.rows[k].r_outer = O + (k + 1) * w;
  }
  for (int dx = -box; dx <= box; ++dx)
    for (int dy = -box; dy <= box; ++dy) {
      const Site x{cx + dx, cy + dy};
      if (!g2.contains(x) || g1.contains(x)) continue;
      const double r = c.radius(x);
      if (r > r_max + 1e-12) continue;
      bool boundary = false;
      for (Site o : offsets) {
        const Site y{x.x + o.x, x.y + o.y};
        boundary = boundary || !g2.contains(y) || g1.contains(y);
      }
      if (!boundary) continue;
      Acc* acc = &ball;
      if (r > O + 1e-12) {
        const int k = std::min(K, int(std::floor((r - O) / w - 1e-12)));
        acc = &shell[k];
        cert.rows[k].min_strip_distance = std::min(cert.rows[k].min_strip_distance, strip_cd(x));
      }
      for (Site o : offsets) {
        const Site y{x.x + o.x, x.y + o.y};
        if (!g2.contains(y) || g1.contains(y)) pair_value(x, y, *acc);
      }
    }
  cert.ball_sum = ball.hi;
  cert.ball_lower = ball.lo;

  for (int k = 0; k <= K; ++k) {
    ShellRow& row = cert.rows[k];
    row.lower = shell[k].lo;
    row.upper = shell[k].hi;
    row.pairs = shell[k].pairs;
    row.bound = pair_count_bound(c, row.r_inner, w) * f_cap * S.s_upper(k);
    cert.shell_sum_partial += row.upper;
    cert.shell_partial_lower += row.lower;
    if (row.min_strip_distance < k + 2 * c.d_phi - 1e-9) cert.shell_distances_ok = false;
    if (row.upper > row.bound * (1 + detail::kSumSlack)) cert.shells_within_bound = false;
  }

  cert.c_p = pair_count_bound(c, O + (K + 1) * w, w);
  cert.shell_tail_upper = f_cap == 0 ? 0.0 : std::exp(std::log(cert.c_p * f_cap) + gsum_bound_series_log(K + 1, F));
  cert.total_upper = cert.finite_pair_sum + cert.ball_sum + cert.shell_sum_partial + cert.shell_tail_upper;
  cert.total_lower = cert.finite_pair_lower + cert.ball_lower + cert.shell_partial_lower;
  cert.converged = std::isfinite(cert.shell_tail_upper) && std::isfinite(cert.total_upper) &&
                   cert.shell_distances_ok && cert.shells_within_bound;
  return cert;
}

struct TheoremResult {
  Cone gamma1p, gamma2p;
  ConePairConfig config;
  SummabilityCertificate certificate;
};

/// Picks epsilon = min(beta/2, (pi/2 - alpha)/2), builds Gamma1' and Gamma2' and certifies the pair.
inline ConePairConfig theorem_config(const Cone& g1, const Cone& g2, double d_phi, double c_count, double M,
                                     double d1 = 1, double d2p = 1) {
  const double alpha = g2.half_angle, beta = g1.half_angle;
  if (!(alpha > beta)) throw GeometryInfeasible("cone boundaries are parallel: Gamma2 must be strictly wider");
  const double turn = std::remainder(g1.axis_angle - g2.axis_angle, 2 * std::numbers::pi);
  if (std::abs(turn) > 1e-9) throw DomainError("certify_theorem: cones must share the axis direction");
  const double vx = g1.apex_x - g2.apex_x, vy = g1.apex_y - g2.apex_y;
  const double along = vx * std::cos(g2.axis_angle) + vy * std::sin(g2.axis_angle);
  const double across = -vx * std::sin(g2.axis_angle) + vy * std::cos(g2.axis_angle);
  if (std::abs(across) > 1e-9 || !(along > 0))
    throw DomainError("certify_theorem: Gamma1's tip must lie on Gamma2's axis, ahead of its tip");
  ConePairConfig c;
  c.alpha = alpha;
  c.beta = beta;
  c.epsilon = std::min(beta / 2, (std::numbers::pi / 2 - alpha) / 2);
  c.d2 = along;
  c.d1 = d1;
  c.d2p = d2p;
  c.d_phi = d_phi;
  c.c_count = c_count;
  c.M = M;
  c.apex_x = g2.apex_x;
  c.apex_y = g2.apex_y;
  c.axis = g2.axis_angle;
  c.validate();
  return c;
}

inline TheoremResult certify_theorem(const Interaction& phi, const Cone& g1, const Cone& g2, const LatticeConfig& lat,
                                     const FFunction& F, double d_phi, double c_count, double M, int K = 8,
                                     double d1 = 1, double d2p = 1) {
  const ConePairConfig c = theorem_config(g1, g2, d_phi, c_count, M, d1, d2p);
  return {c.gamma1p(), c.gamma2p(), c, certify_anan(phi, c, lat, F, K)};
}

/// Sites within `width` of the boundary of Gamma2 \ Gamma1 and within `radius` of Gamma2's tip.
/// A finite-range interaction only enters the summability condition through terms meeting
/// this band when width >= d_Phi.
inline Region boundary_band(const ConePairConfig& c, double radius, double width) {
  const Cone g1 = c.gamma1(), g2 = c.gamma2();
  const int box = int(std::ceil(radius + width)) + 1;
  const auto cx = int(std::lround(c.apex_x)), cy = int(std::lround(c.apex_y));
  const int wk = int(std::ceil(width));
  std::vector<Site> out;
  for (int dx = -box; dx <= box; ++dx)
    for (int dy = -box; dy <= box; ++dy) {
      const Site x{cx + dx, cy + dy};
      if (c.radius(x) > radius + width) continue;
      const bool in_mid = g2.contains(x) && !g1.contains(x);
      bool near = false;
      for (int ex = -wk; ex <= wk && !near; ++ex)
        for (int ey = -wk; ey <= wk && !near; ++ey) {
          if (double(ex * ex + ey * ey) > width * width + 1e-9) continue;
          const Site y{x.x + ex, x.y + ey};
          near = (g2.contains(y) && !g1.contains(y)) != in_mid;
        }
      if (near) out.push_back(x);
    }
  return Region(std::move(out));
}

}  // namespace quasiloc
