#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <quasiloc/quasiloc.hpp>

using namespace quasiloc;

TEST(Region, CanonicalOrderAndSetAlgebra) {
  const Region a{{2, 0}, {0, 1}, {0, 0}, {2, 0}};
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a[0], (Site{0, 0}));
  EXPECT_EQ(a[1], (Site{0, 1}));
  EXPECT_EQ(a[2], (Site{2, 0}));
  const Region b{{0, 1}, {5, 5}};
  EXPECT_EQ((a & b), (Region{{0, 1}}));
  EXPECT_EQ((a | b).size(), 4u);
  EXPECT_EQ((a - b), (Region{{0, 0}, {2, 0}}));
  EXPECT_TRUE((a & b).subset_of(a));
  EXPECT_TRUE(a.intersects(b));
  EXPECT_FALSE(a.intersects(Region{{9, 9}}));
  EXPECT_EQ(a.index_of({2, 0}), std::optional<std::size_t>(2));
  EXPECT_FALSE(a.index_of({1, 1}).has_value());
}

TEST(Region, DistanceAndDiameter) {
  const Region x{{0, 0}, {1, 0}};
  const Region y{{4, 4}};
  EXPECT_DOUBLE_EQ(set_distance(x, y), 5.0);
  EXPECT_DOUBLE_EQ(diameter(Region{{0, 0}, {3, 4}}), 5.0);
  EXPECT_DOUBLE_EQ(diameter(Region{{1, 1}}), 0.0);
  EXPECT_THROW(set_distance(Region{}, y), DomainError);
}

TEST(Lattice, BallCountsMatchBruteForce) {
  LatticeConfig cfg{2, 12};
  for (double n : {0.0, 1.0, 1.5, 2.0, std::sqrt(5.0), 4.2, 7.0}) {
    const Region b = cfg.ball({1, -2}, n);
    std::size_t brute = 0;
    for (int x = -30; x <= 30; ++x)
      for (int y = -30; y <= 30; ++y)
        if (std::hypot(x - 1, y + 2) <= n + 1e-9) ++brute;
    EXPECT_EQ(b.size(), brute) << "radius " << n;
  }
}

TEST(Lattice, OneDimensionalBall) {
  LatticeConfig cfg{1, 10};
  EXPECT_EQ(cfg.ball({0, 0}, 3).size(), 7u);
  EXPECT_EQ(cfg.box().size(), 21u);
  EXPECT_FALSE(cfg.in_box({0, 1}));
}

TEST(Lattice, TruncationOverflowIsRaised) {
  LatticeConfig cfg{2, 5};
  EXPECT_NO_THROW(cfg.ball({0, 0}, 5));
  EXPECT_THROW(cfg.ball({1, 0}, 5), TruncationOverflow);
  EXPECT_THROW(cfg.ball({0, 0}, -1), DomainError);
  EXPECT_THROW(cfg.fatten(Region{{4, 4}}, 2), TruncationOverflow);
  EXPECT_THROW(cfg.cone_region(Cone{}, 6), TruncationOverflow);
  EXPECT_THROW((LatticeConfig{3, 5}.validate()), DomainError);
  EXPECT_THROW((LatticeConfig{2, 0}.validate()), DomainError);
}

TEST(Lattice, FatteningIsMonotoneAndAgreesWithFattenWithin) {
  LatticeConfig cfg{2, 10};
  const Region X{{0, 0}, {1, 1}};
  Region prev = X;
  for (int m = 0; m <= 4; ++m) {
    const Region f = cfg.fatten(X, m);
    EXPECT_TRUE(prev.subset_of(f));
    EXPECT_EQ(f, fatten_within(X, m, cfg.box()));
    for (Site s : f) EXPECT_LE(set_distance(Region{s}, X), m + 1e-12);
    prev = f;
  }
}

TEST(Cone, ClosedWithApexAndBoundary) {
  const Cone c{0, 0, 0, std::numbers::pi / 4};
  EXPECT_TRUE(c.contains(Site{0, 0}));
  EXPECT_TRUE(c.contains(Site{3, 3}));   // on the boundary ray
  EXPECT_TRUE(c.contains(Site{3, -3}));
  EXPECT_FALSE(c.contains(Site{3, 4}));
  EXPECT_FALSE(c.contains(Site{-1, 0}));
  const Cone up{0.5, 0, std::numbers::pi / 2, 0.3};
  EXPECT_TRUE(up.contains(Site{0, 5}));
  EXPECT_FALSE(up.contains(Site{3, 1}));
}

TEST(Cone, RegionMatchesPointwiseTest) {
  LatticeConfig cfg{2, 8};
  const Cone c{-1.5, 0.5, 0.3, 0.6};
  const Region r = cfg.cone_region(c, 6);
  for (Site s : cfg.box()) {
    const bool expect = c.contains(s) && c.apex_distance(s) <= 6 + 1e-12;
    EXPECT_EQ(r.contains(s), expect);
  }
}

TEST(Lattice, RegularityConstantBoundsBallSizes) {
  const double kappa = regularity_constant(30);
  LatticeConfig cfg{2, 40};
  for (int n = 1; n <= 30; ++n) EXPECT_LE(double(cfg.ball({0, 0}, n).size()), kappa * n * n + 1e-9);
  EXPECT_GE(kappa, std::numbers::pi);
  EXPECT_DOUBLE_EQ(regularity_constant(5, 1), 3.0);
}

TEST(Lattice, RandomRegionsObeyTriangleInequality) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> u(-6, 6);
  for (int trial = 0; trial < 50; ++trial) {
    const Site a{u(rng), u(rng)}, b{u(rng), u(rng)}, c{u(rng), u(rng)};
    EXPECT_LE(distance(a, c), distance(a, b) + distance(b, c) + 1e-12);
  }
}
