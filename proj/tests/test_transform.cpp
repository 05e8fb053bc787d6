#include <gtest/gtest.h>

#include <memory>
#include <random>

#include <quasiloc/quasiloc.hpp>

using namespace quasiloc;

namespace {

std::shared_ptr<Evolution> evolution(const Interaction& phi, const Region& vol, double tol = 1e-10) {
  EvolveConfig c;
  c.tolerance = tol;
  return std::make_shared<Evolution>(make_generator(phi, vol), c);
}

}  // namespace

TEST(Transform, TrivialBaseReproducesSeed) {
  const Region vol = chain(4);
  const Interaction seed = tfim_chain(4, 0.7, 0.3);
  auto T = std::make_shared<TransformedInteraction>(evolution(Interaction(2), vol), seed, 1.0);
  const auto terms = T->terms(0.4);
  EXPECT_EQ(terms.size(), seed.groups().size());
  for (const auto& g : seed.groups()) {
    const LocalOperator expect = LocalOperator::on(g.region, seed.group_matrix(g.terms, 0.4));
    ASSERT_TRUE(terms.count(g.region));
    EXPECT_LT(op_norm(terms.at(g.region) - expect), 1e-14);
  }
}

TEST(Transform, HamiltonianMatchesEvolvedSeed) {
  RandomTwoLocalOptions o;
  o.time_dependent = true;
  for (std::uint64_t seed : {1u, 2u}) {
    const Region vol = chain(5);
    const Interaction phi = random_two_local(vol, seed, o);
    const Interaction psi_seed = random_two_local(vol, seed + 100, o);
    TransformedInteraction T(evolution(phi, vol), psi_seed, 0.5);
    for (double t : {0.0, 0.3, 1.0}) EXPECT_LE(psio_residual(T, t), 1e-8) << seed << " t=" << t;
  }
}

TEST(Transform, TermsSitInsideFattenings) {
  const Region vol = chain(6);
  const Interaction phi = tfim_chain(6, 1.0, 0.8);
  const Interaction seed = nearest_neighbor(Region{{2, 0}, {3, 0}});
  TransformedInteraction T(evolution(phi, vol), seed, 0.0);
  int max_m = 0;
  for (const auto& c : *T.contributions(0.7)) {
    EXPECT_TRUE(c.delta.support().subset_of(c.Z));
    EXPECT_EQ(c.Z, fatten_within(seed.groups()[c.group].region, c.m, vol));
    max_m = std::max(max_m, c.m);
  }
  EXPECT_GE(max_m, 2);
  // at t = s the transformed interaction is the seed itself
  const auto at_anchor = T.terms(0.0);
  ASSERT_EQ(at_anchor.size(), 1u);
  EXPECT_LT(op_norm(at_anchor.begin()->second - LocalOperator::on(Region{{2, 0}, {3, 0}}, pauli_string("ZZ"))), 1e-12);
}

TEST(Transform, ProjectedGeneratorUsesPartialTraces) {
  const Region vol = chain(4);
  auto T = std::make_shared<TransformedInteraction>(evolution(tfim_chain(4, 1.0, 0.5), vol),
                                                    nearest_neighbor(Region{{1, 0}, {2, 0}}), 1.0);
  const Region S{{0, 0}, {1, 0}};
  PsiGenerator proj(T, S);
  for (const auto& c : *T->contributions(0.2)) {
    const auto p = proj.term(c);
    const Region keep = c.delta.ambient() & S;
    if (keep.empty()) {
      EXPECT_FALSE(p.has_value());
      continue;
    }
    ASSERT_TRUE(p.has_value());
    EXPECT_TRUE(p->ambient().subset_of(S));
    EXPECT_LT(op_norm(embed(*p, c.delta.ambient()) - cond_expect(c.delta, S)), 1e-12);
  }
}

TEST(Transform, PsiDynamicsConvergesWithVolume) {
  const Interaction phi = tfim_chain(7, 1.0, 0.9);
  const Interaction seed = nearest_neighbor(Region{{3, 0}, {4, 0}});
  std::mt19937_64 rng(12);
  const LocalOperator A = random_hermitian(Region{{3, 0}}, rng);
  const auto rep = psi_convergence(phi, seed, 1.0, {Region{{2, 0}, {3, 0}, {4, 0}, {5, 0}},
                                                    Region{{1, 0}, {2, 0}, {3, 0}, {4, 0}, {5, 0}, {6, 0}}, chain(7)},
                                   A, 0.0, 1.0);
  ASSERT_EQ(rep.differences.size(), 3u);
  EXPECT_TRUE(rep.non_increasing);
  EXPECT_EQ(rep.differences.back(), 0.0);
  EXPECT_THROW(psi_convergence(phi, seed, 1.0, {chain(7), chain(5)}, A, 0.0, 1.0), DomainError);
}
