#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include <quasiloc/quasiloc.hpp>

using namespace quasiloc;

namespace {

// Direct lattice sum of F(|y|) over |y| >= t and |y| <= R, with no tables involved.
double brute_tail(const FFunction& F, double t, int R) {
  double acc = 0;
  const int ylim = F.nu() == 2 ? R : 0;
  for (int x = -R; x <= R; ++x)
    for (int y = -ylim; y <= ylim; ++y) {
      const double r = std::hypot(x, y);
      if (r >= t - 1e-12 && r <= R) acc += F(r);
    }
  return acc;
}

}  // namespace

TEST(FFunction, ValuesAndValidation) {
  const FFunction F(3, true);
  EXPECT_NEAR(F(0), 1.0, 1e-15);
  EXPECT_NEAR(F(2), std::exp(-2.0) / 27.0, 1e-15);
  EXPECT_NEAR(F.base()(2), 1.0 / 27.0, 1e-15);
  EXPECT_THROW(FFunction(2, false, 2), DivergenceError);
  EXPECT_THROW(FFunction(1, false, 1), DivergenceError);
  EXPECT_NO_THROW(FFunction(0, true, 2));
  EXPECT_THROW(FFunction(-1, true), DomainError);
  EXPECT_THROW(FFunction(3, true, 3), DomainError);
}

TEST(FFunction, OneDimensionalNormEnclosesZeta) {
  // sum_{n in Z} (1+|n|)^{-3} = 2 zeta(3) - 1
  const double zeta3 = 1.2020569031595942;
  const FFunction F(3, false, 1);
  const TailBound b = f_norm(F, 200);
  EXPECT_TRUE(b.contains(2 * zeta3 - 1)) << b.lower() << " " << b.upper();
  EXPECT_LT(b.upper() - b.lower(), 1e-4);
}

TEST(FFunction, GTableEnclosesBruteForce) {
  for (const FFunction& F : {FFunction(3, true), FFunction(3, false), FFunction(2.5, true, 1)}) {
    const GTable table(F, 60);
    for (double t : {0.0, 1.0, 2.5, 7.0, 20.0}) {
      const TailBound b = table.at(t);
      // the brute sum truncated at 600 differs from the true sum by less than the table's slack
      const double v = brute_tail(F, t, F.nu() == 2 && !F.weighted() ? 600 : 200);
      EXPECT_LE(b.lower(), v * (1 + 1e-12)) << "t=" << t;
      EXPECT_GE(b.upper(), v) << "t=" << t;
    }
  }
  EXPECT_THROW(GTable(FFunction(3, true), 10).at(11), DomainError);
}

TEST(FFunction, LatticeTailDominatesBruteForce) {
  for (double R : {5.0, 10.0, 20.0}) {
    const FFunction Fw(3, true), Fu(3, false);
    double w = 0, u = 0;
    for (int x = -300; x <= 300; ++x)
      for (int y = -300; y <= 300; ++y) {
        const double r = std::hypot(x, y);
        if (r > R && r <= 300) {
          w += Fw(r);
          u += Fu(r);
        }
      }
    EXPECT_GE(std::exp(lattice_tail_log(2, 1.0, 3, R)), w) << R;
    EXPECT_GE(std::exp(lattice_tail_log(2, 0.0, 3, R)), u) << R;
  }
  EXPECT_THROW(lattice_tail_log(2, 0.0, 2, 5), DivergenceError);
}

TEST(FFunction, ConvolutionConstantEnclosesDirectSums) {
  const FFunction F(3, false, 1);
  const TailBound cf = conv_constant(F, 20);
  for (int v : {0, 1, 3, 10}) {
    double acc = 0;
    for (int z = -4000; z <= 4000; ++z) acc += F(std::abs(z)) * F(std::abs(z - v));
    EXPECT_LE(acc / F(v), cf.upper()) << v;
  }
  EXPECT_LE(cf.lower(), cf.upper());
  // the universal bound 2^{s+1} ||F|| always caps C_F
  EXPECT_LE(cf.upper(), std::pow(2.0, 4) * f_norm(F, 50).upper() * (1 + 1e-9));
}

TEST(FFunction, GfDecayHoldsOnFullRange) {
  const GfDecayReport rep = gf_decay_check(FFunction(3, true), 2, 200);
  EXPECT_TRUE(rep.all_hold);
  ASSERT_EQ(rep.rows.size(), 199u);
  for (const auto& r : rep.rows) EXPECT_GE(r.margin, 0) << r.m;
  EXPECT_THROW(gf_decay_check(FFunction(3, false), 2, 10), DomainError);
  EXPECT_THROW(gf_decay_check(FFunction(3, true), 1, 10), DomainError);
}

TEST(FFunction, GsumBoundDominatesPartialSums) {
  const FFunction F(3, true);
  const GTable table(F, 440);
  for (int k = 2; k <= 50; ++k) {
    double acc = 0;
    for (int m = k; m <= 400; ++m) acc += table.at(m).upper();
    EXPECT_LE(acc, std::exp(gsum_bound_log(k, F))) << k;
  }
}

TEST(FFunction, SeriesClosedFormMatchesSummation) {
  const FFunction F(3, true);
  for (int k0 : {2, 5, 17}) {
    double acc = 0;
    for (int k = k0; k < k0 + 200; ++k) acc += std::exp(gsum_bound_log(k, F));
    EXPECT_NEAR(gsum_bound_series_log(k0, F), std::log(acc), 1e-12);
  }
}

TEST(FFunction, MomentEnclosesDirectSum) {
  const FFunction F(3, true);
  const MomentResult m = moment_and_tilde(F, 0.5, 60);
  const GTable table(F, 400);
  double lo = 0;
  for (int n = 0; n <= 300; ++n) lo += std::pow(1.0 + n, 5) * std::sqrt(table.at(n).lower());
  EXPECT_LE(m.moment.lower(), lo * (1 + 1e-9));
  EXPECT_GE(m.moment.upper(), lo);
  for (std::size_t i = 0; i < m.radius.size(); ++i) EXPECT_GE(m.f_tilde[i], F(m.radius[i] / 3.0));
  EXPECT_THROW(moment_and_tilde(F, 0.0, 60), DomainError);
  // (1+n)^5 G^{1/2} with G ~ n^{-1} for s = 3 unweighted diverges
  EXPECT_THROW(moment_and_tilde(FFunction(3, false), 0.5, 60), DivergenceError);
}

TEST(FFunction, LemmaConstant) {
  EXPECT_NEAR(lemma_constant(), 4 * std::numbers::pi * std::exp(std::sqrt(2.0)), 1e-12);
}
