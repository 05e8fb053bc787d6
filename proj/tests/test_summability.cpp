#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include <quasiloc/quasiloc.hpp>

using namespace quasiloc;

namespace {

constexpr double kDeg = std::numbers::pi / 180;

// Euclidean distance from p to a closed cone (half-angle below pi/2).
double dist_to_cone(const Cone& c, double px, double py) {
  const double vx = px - c.apex_x, vy = py - c.apex_y;
  const double r = std::hypot(vx, vy);
  if (r == 0) return 0;
  const double phi = std::acos(std::clamp((vx * std::cos(c.axis_angle) + vy * std::sin(c.axis_angle)) / r, -1.0, 1.0));
  if (phi <= c.half_angle) return 0;
  if (phi >= c.half_angle + std::numbers::pi / 2) return r;
  return r * std::sin(phi - c.half_angle);
}

// Distance from p inside the cone to its complement.
double dist_to_outside(const Cone& c, double px, double py) {
  const double vx = px - c.apex_x, vy = py - c.apex_y;
  const double r = std::hypot(vx, vy);
  const double phi = std::acos(std::clamp((vx * std::cos(c.axis_angle) + vy * std::sin(c.axis_angle)) / r, -1.0, 1.0));
  return phi >= c.half_angle ? 0 : r * std::sin(c.half_angle - phi);
}

ConePairConfig standard() {
  const Cone g2{0, 0, 0, 30 * kDeg}, g1{20, 0, 0, 15 * kDeg};
  return theorem_config(g1, g2, 1.0, 2.0, 1.0);
}

}  // namespace

TEST(Summability, TheoremConfigPlacesCones) {
  const ConePairConfig c = standard();
  EXPECT_NEAR(c.epsilon, 7.5 * kDeg, 1e-15);
  EXPECT_DOUBLE_EQ(c.d2, 20.0);
  EXPECT_NEAR(c.gamma1p().apex_x, 21.0, 1e-12);
  EXPECT_NEAR(c.gamma2p().apex_x, -1.0, 1e-12);
  EXPECT_NEAR(c.gamma2p().half_angle, 37.5 * kDeg, 1e-15);
  EXPECT_NEAR(c.gamma1p().half_angle, 7.5 * kDeg, 1e-15);
  EXPECT_THROW(theorem_config(Cone{20, 0, 0, 0.5}, Cone{0, 0, 0, 0.5}, 1, 2, 1), GeometryInfeasible);
  EXPECT_THROW(theorem_config(Cone{20, 1, 0, 0.2}, Cone{0, 0, 0, 0.5}, 1, 2, 1), DomainError);
  EXPECT_THROW(theorem_config(Cone{20, 0, 0.1, 0.2}, Cone{0, 0, 0, 0.5}, 1, 2, 1), DomainError);
}

TEST(Summability, DGamma1IsBoundaryRayLength) {
  const ConePairConfig c = standard();
  for (double n : {25.0, 40.0, 100.0}) {
    const double L = d_gamma1(c, n);
    const double px = c.d2 + L * std::cos(c.beta), py = L * std::sin(c.beta);
    EXPECT_NEAR(std::hypot(px, py), n, 1e-9);
  }
  EXPECT_EQ(d_gamma1(c, 5.0), 0.0);
}

TEST(Summability, GapFunctionsBoundTrueDistances) {
  const ConePairConfig c = standard();
  const Cone g1 = c.gamma1(), g2 = c.gamma2(), g1p = c.gamma1p(), g2p = c.gamma2p();
  for (double n : {10.0, 30.0, 60.0})
    for (double r = n; r <= n + 40; r += 2.5)
      for (int i = -600; i <= 600; ++i) {
        const double th = i * (c.alpha / 600);
        const double px = r * std::cos(th), py = r * std::sin(th);
        if (!g2.contains(px, py) || g1.contains(px, py)) continue;
        EXPECT_GE(dist_to_cone(g1p, px, py), gamma_of(c, n) - 1e-9) << n << " " << r << " " << th;
        EXPECT_GE(dist_to_outside(g2p, px, py), outer_gap(c, n) - 1e-9) << n << " " << r << " " << th;
      }
}

TEST(Summability, GeometryReportThresholds) {
  ConePairConfig c = standard();
  GeometryReport g = build_geometry(c);
  auto d0 = [&](double n) { return std::min(outer_gap(c, n), gamma_of(c, n)); };
  EXPECT_GT(d0(g.n0), 2 * c.d_phi);
  EXPECT_LE(d0(g.n0 - 1), 2 * c.d_phi);
  EXPECT_NEAR(g.shell_width, 1 / std::sin(7.5 * kDeg), 1e-12);
  EXPECT_NEAR(g.d_gamma0, std::cos(c.beta - c.epsilon) / std::cos(c.epsilon), 1e-15);
  EXPECT_NEAR(g.gamma0, g.d_gamma0 * std::sin(c.epsilon) + std::sin(c.beta - c.epsilon), 1e-15);
  c.epsilon = 5 * kDeg;
  g = build_geometry(c);
  EXPECT_EQ(g.n0, 41);
  EXPECT_NEAR(g.shell_width, 11.4737, 1e-4);
}

TEST(Summability, LatticeDistancesFollowGeometry) {
  const ConePairConfig c = standard();
  const GeometryReport g = build_geometry(c);
  const Cone g1 = c.gamma1(), g2 = c.gamma2(), g1p = c.gamma1p(), g2p = c.gamma2p();
  ComplementDistance cd([&](Site s) { return g2p.contains(s) && !g1p.contains(s); });
  for (int x = 0; x <= 90; ++x)
    for (int y = -60; y <= 60; ++y) {
      const Site s{x, y};
      const double r = c.radius(s);
      if (r < g.n0 || !g2.contains(s) || g1.contains(s)) continue;
      const double d0 = std::min(outer_gap(c, r), gamma_of(c, r));
      EXPECT_GE(cd(s), d0 - std::numbers::sqrt2) << x << "," << y;
    }
}

TEST(Summability, ShellTailValidation) {
  EXPECT_THROW(shell_tail(1, FFunction(3, true)), DomainError);
  EXPECT_THROW(shell_tail(3, FFunction(3, false)), DomainError);
  EXPECT_NEAR(shell_tail(3, FFunction(3, true)), std::exp(gsum_bound_log(3, FFunction(3, true))), 1e-15);
}

// The per-pair shortcut (f saturates once m reaches the strip distance) against the plain
// sum over m, and the band restriction against the full rectangle.
TEST(Summability, CertificateMatchesDirectSummation) {
  const ConePairConfig c = standard();
  const FFunction F(3, true);
  const LatticeConfig lat{2, 80};
  const GeometryReport g = build_geometry(c);
  const int K = 1;
  const double r_max = g.shell_origin + (K + 1) * g.shell_width;
  const Interaction band = nearest_neighbor(boundary_band(c, r_max + 2, 1.0));
  const SummabilityCertificate cert = certify_anan(band, c, lat, F, K);
  EXPECT_TRUE(cert.converged);
  EXPECT_LE(cert.total_lower, cert.total_upper);

  const GSums S(F, 400);
  const Cone g1 = c.gamma1(), g2 = c.gamma2(), g1p = c.gamma1p(), g2p = c.gamma2p();
  ComplementDistance cd([&](Site s) { return g2p.contains(s) && !g1p.contains(s); });
  double direct = 0;
  for (int x = -5; x <= 70; ++x)
    for (int y = -45; y <= 45; ++y) {
      const Site s{x, y};
      if (!g2.contains(s) || g1.contains(s) || c.radius(s) > r_max + 1e-12) continue;
      for (Site o : {Site{1, 0}, Site{-1, 0}, Site{0, 1}, Site{0, -1}}) {
        const Site t{s.x + o.x, s.y + o.y};
        if (g2.contains(t) && !g1.contains(t)) continue;
        for (int m = 0; m <= 400; ++m) direct += S.g_upper(m) * f_mxy(band, cd, m, s, t);
        direct += f_mxy(band, cd, 400, s, t) * S.s_upper(401);
      }
    }
  const double finite = cert.total_upper - cert.shell_tail_upper;
  EXPECT_NEAR(finite, direct, 1e-9 * direct);

  const Interaction full = nearest_neighbor(lat.box().filter([&](Site s) { return c.radius(s) <= r_max + 3; }));
  const SummabilityCertificate whole = certify_anan(full, c, lat, F, K);
  EXPECT_NEAR(whole.total_upper, cert.total_upper, 1e-12 * cert.total_upper);
}

TEST(Summability, InputValidation) {
  const ConePairConfig c = standard();
  const FFunction F(3, true);
  EXPECT_THROW(certify_anan(nearest_neighbor(chain(3)), c, LatticeConfig{2, 30}, F, 2), TruncationOverflow);
  EXPECT_THROW(certify_anan(nearest_neighbor(chain(3), 2.0), c, LatticeConfig{2, 200}, F, 2), DomainError);
  Interaction wide(2);
  wide.add(Region{{0, 0}, {2, 0}}, pauli_string("ZZ"));
  EXPECT_THROW(certify_anan(wide, c, LatticeConfig{2, 200}, F, 2), DomainError);
  EXPECT_THROW(certify_anan(nearest_neighbor(chain(3)), c, LatticeConfig{1, 200}, F, 2), DomainError);
}
