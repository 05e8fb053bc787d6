#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <quasiloc/quasiloc.hpp>

using namespace quasiloc;

TEST(TimeProfile, EvaluationAndSup) {
  const TimeProfile g({0.0, 0.5, 1.0}, {{0.0, 2.0}, {2.0, -2.0}});  // tent with peak 1 at 1/2
  EXPECT_NEAR(g(0.25), 0.5, 1e-15);
  EXPECT_NEAR(g(0.5), 1.0, 1e-15);
  EXPECT_NEAR(g(0.75), 0.5, 1e-15);
  EXPECT_NEAR(g.sup_abs(), 1.0, 1e-15);
  EXPECT_FALSE(g.is_constant());

  // interior maximum of a quadratic: 4t(1-t) peaks at 1
  const TimeProfile q({0.0, 1.0}, {{0.0, 4.0, -4.0}});
  EXPECT_NEAR(q.sup_abs(), 1.0, 1e-12);
  double dense = 0;
  const TimeProfile cubic({0.0, 1.0}, {{0.1, -3.0, 2.0, 1.5}});
  for (int i = 0; i <= 100000; ++i) dense = std::max(dense, std::abs(cubic(i / 100000.0)));
  EXPECT_NEAR(cubic.sup_abs(), dense, 1e-8);
  EXPECT_GE(cubic.sup_abs(), dense);

  EXPECT_THROW(TimeProfile({0.0, 0.5}, {{1.0}}), DomainError);
  EXPECT_THROW(TimeProfile({0.0, 0.5, 1.0}, {{0.0}, {1.0}}), DomainError);
  EXPECT_THROW(TimeProfile({0.0, 1.0}, {{1.0}, {2.0}}), DomainError);
}

TEST(Interaction, LocalHamiltonianMatchesKronecker) {
  const Interaction phi = tfim_chain(3, 1.0, 0.7);
  const Matrix H = local_hamiltonian(phi, chain(3), 0.0).matrix();
  const Matrix I = pauli('I'), X = pauli('X'), Z = pauli('Z');
  const Matrix expect = -(kron(kron(Z, Z), I) + kron(I, kron(Z, Z))) -
                        0.7 * (kron(kron(X, I), I) + kron(kron(I, X), I) + kron(kron(I, I), X));
  EXPECT_LT((H - expect).norm(), 1e-13);
  // restriction to a subregion keeps only the terms inside it
  const Matrix H2 = local_hamiltonian(phi, Region{{0, 0}, {1, 0}}, 0.0).matrix();
  EXPECT_LT((H2 - (-kron(Z, Z) - 0.7 * (kron(X, I) + kron(I, X)))).norm(), 1e-13);
}

TEST(Interaction, BookkeepingAndValidation) {
  const Interaction phi = tfim(rectangle(3, 2), 1.0, 0.5);
  EXPECT_EQ(phi.terms().size(), 7u + 6u);
  EXPECT_DOUBLE_EQ(phi.range(), 1.0);
  EXPECT_EQ(phi.size_cap(), 2);
  EXPECT_DOUBLE_EQ(phi.uniform_bound(), 1.0);
  EXPECT_EQ(phi.groups_at({1, 0}).size(), 4u);  // 3 bonds and the field
  Interaction bad(2);
  EXPECT_THROW(bad.add(Region{{0, 0}}, Matrix::Identity(4, 4)), DomainError);
  EXPECT_THROW(bad.add(Region{{0, 0}}, pauli('Y') * cplx(0, 1)), DomainError);
  EXPECT_THROW(bad.add(Region{}, Matrix::Identity(1, 1)), DomainError);
}

TEST(Interaction, NormOfNearestNeighbourModel) {
  // pairs (x,x) collect at most 2 bonds, adjacent pairs one bond of norm 1 at distance 1
  const FFunction F(3, true);
  const Interaction phi = nearest_neighbor(chain(5));
  EXPECT_NEAR(interaction_norm(phi, F, 0.3), std::max(2.0, 1.0 / F(1.0)), 1e-12);
}

TEST(Interaction, NormIntegralOfRamp) {
  const FFunction F(3, true);
  Interaction phi(2);
  phi.add(Region{{0, 0}, {1, 0}}, pauli_string("ZZ"), TimeProfile::ramp());
  const Quadrature q = norm_integral(phi, F);
  EXPECT_NEAR(q.value, 0.5 / F(1.0), 1e-9);
  EXPECT_LE(q.error, 1e-9);
  EXPECT_NEAR(i_phi(phi, F), F.cf_bounds().upper() * (q.value + q.error), 1e-12);
}

TEST(Interaction, WeightScalesByRegionSize) {
  const Interaction phi = tfim_chain(4, 1.0, 1.0);
  const Interaction w = weight(phi, 2.0);
  for (std::size_t i = 0; i < phi.terms().size(); ++i) {
    const double f = std::pow(double(phi.terms()[i].region.size()), 2.0);
    EXPECT_NEAR(w.terms()[i].op_norm, f * phi.terms()[i].op_norm, 1e-12);
  }
}

TEST(Interaction, DecoupleSplitsByZones) {
  const Region sites = chain(8);
  const Interaction phi = random_two_local(sites, 3);
  const Region g1{{5, 0}, {6, 0}, {7, 0}}, g2{{3, 0}, {4, 0}, {5, 0}, {6, 0}, {7, 0}};
  const Decoupled d = decouple(phi, g1, g2);
  EXPECT_EQ(d.phi0.terms().size() + d.phi1.terms().size(), phi.terms().size());
  EXPECT_EQ(d.phi1.terms().size(), 2u);  // bonds (2,3) and (4,5)
  // H_phi0 - H_phi = H_phi1
  const Matrix lhs = local_hamiltonian(d.phi0, sites, 0.2).matrix() - local_hamiltonian(phi, sites, 0.2).matrix();
  EXPECT_LT((lhs - local_hamiltonian(d.phi1, sites, 0.2).matrix()).norm(), 1e-12);
  EXPECT_THROW(decouple(phi, g2, g1), DomainError);
}

TEST(Interaction, ComplementDistanceMatchesBruteForce) {
  const Cone outer{-3, 0, 0, 1.0}, inner{2, 0, 0, 0.5};
  auto inside = [&](Site s) { return outer.contains(s) && !inner.contains(s); };
  ComplementDistance cd(inside);
  for (int x = -2; x <= 6; ++x)
    for (int y = -4; y <= 4; ++y) {
      double best = INFINITY;
      for (int a = -30; a <= 30; ++a)
        for (int b = -30; b <= 30; ++b)
          if (!inside({a, b})) best = std::min(best, std::hypot(a - x, b - y));
      EXPECT_DOUBLE_EQ(cd({x, y}), best) << x << "," << y;
    }
}

TEST(Interaction, FmxyMatchesDirectSum) {
  const Interaction phi = weight(tfim(rectangle(6, 4), 1.0, 0.5), 0.0);
  const Cone g1p{4, 1.5, 0, 0.5}, g2p{-2, 1.5, 0, 1.2};
  ComplementDistance cd([&](Site s) { return g2p.contains(s) && !g1p.contains(s); });
  for (int m = 0; m <= 3; ++m)
    for (Site x : rectangle(6, 4))
      for (Site y : rectangle(6, 4)) {
        double direct = 0;
        for (const auto& t : phi.terms())
          if (t.region.contains(x) && t.region.contains(y) && cd(t.region) <= m)
            direct += double(t.region.size()) * t.sup_norm();
        EXPECT_NEAR(f_mxy(phi, cd, m, x, y), direct, 1e-12);
      }
  EXPECT_THROW(f_mxy(phi, cd, -1, {0, 0}, {0, 0}), DomainError);
}
