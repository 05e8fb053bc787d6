#include <gtest/gtest.h>

#include <memory>

#include <quasiloc/quasiloc.hpp>

using namespace quasiloc;

namespace {

// zones on chain(6): Gamma1 = {4,5}, Gamma2 \ Gamma1 = {2,3}, rest = {0,1}; strip = {1,2,3,4}
ConeSandwich chain_sandwich() {
  return {Cone{4.5, 0, 0, 0.2}, Cone{3.5, 0, 0, 0.4}, Cone{1.5, 0, 0, 0.6}, Cone{0.5, 0, 0, 0.8}};
}

EvolveConfig tight() {
  EvolveConfig c;
  c.tolerance = 1e-10;
  return c;
}

Interaction chain_model(std::uint64_t seed) {
  RandomTwoLocalOptions o;
  o.time_dependent = true;
  return random_two_local(chain(6), seed, o);
}

}  // namespace

TEST(Factorize, SandwichValidation) {
  const Region vol = chain(6);
  EXPECT_NO_THROW(chain_sandwich().validate(vol));
  ConeSandwich bad = chain_sandwich();
  bad.g2p.half_angle = 0.5;
  EXPECT_THROW(bad.validate(vol), DomainError);
  bad = chain_sandwich();
  bad.g1p = bad.g1;
  bad.g1p.half_angle = 0.3;  // same sites as Gamma1: inclusion not strict
  EXPECT_THROW(bad.validate(vol), DomainError);
}

TEST(Factorize, CertificateOnChain) {
  FactorizeOptions fo;
  fo.probes_per_zone = 6;
  const FactorizationCertificate c = factorize(chain_model(3), chain_sandwich(), chain(6), tight(), fo);
  EXPECT_TRUE(c.valid);
  EXPECT_TRUE(c.chain_consistent);
  EXPECT_EQ(c.crossing_terms, 2u);
  EXPECT_LE(c.residual_ata, 1e-7);
  EXPECT_LE(c.residual_www, 1e-7);
  EXPECT_LE(c.residual_ttt, 1e-7);
  EXPECT_LE(c.residual_quasifactor, 1e-7);
  EXPECT_LE(c.beta_support_defect, 1e-7);
  EXPECT_LE(c.u_norm_defect, 1e-9);
  EXPECT_LE(c.beta_isometry_defect, 1e-9);
  EXPECT_GT(c.v_norm_max, 0.0);
  EXPECT_EQ(c.strip, (Region{{1, 0}, {2, 0}, {3, 0}, {4, 0}}));
}

// The coupled flow has to agree with the nested construction: Psi and psi_tilde evolved by
// their own generators, and W from the interpolating equation.
TEST(Factorize, JointFlowMatchesNestedEvolutions) {
  const Region vol = chain(4);
  const ConeSandwich sw{Cone{2.5, 0, 0, 0.2}, Cone{1.5, 0, 0, 0.4}, Cone{0.5, 0, 0, 0.6}, Cone{-0.5, 0, 0, 0.8}};
  RandomTwoLocalOptions o;
  o.time_dependent = true;
  const Interaction phi = random_two_local(vol, 21, o);
  FactorizeOptions fo;
  fo.sample_times = {0.0, 0.5};
  Factorization f(phi, sw, vol, tight(), fo);
  std::mt19937_64 rng(4);
  const LocalOperator A = random_hermitian(Region{{1, 0}, {2, 0}}, rng);
  for (double t : {0.0, 0.5, 0.3}) {
    EXPECT_LT(op_norm(f.psi_tau(A, t) - f.tau_psi().tau(A, t, 1.0)), 1e-8) << t;
    EXPECT_LT(op_norm(f.psi_tilde_tau(A, t) - f.tau_psi_tilde().tau(A, t, 1.0)), 1e-8) << t;
  }
  const Propagator W = interpolating_unitary(
      f.tau_psi_tilde(), [&](double t) { return f.boundary_potential(t); }, f.w_region(), 1.0, 0.0, tight());
  EXPECT_LT((f.W(0.0).matrix() - W.matrix).norm(), 1e-7);
}

TEST(Factorize, ZoneRespectingModelFactorizesTrivially) {
  const Region vol = chain(6);
  const ConeSandwich sw = chain_sandwich();
  const Region g1 = vol.filter([&](Site s) { return sw.in_g1(s); });
  const Region g2 = vol.filter([&](Site s) { return sw.in_g2(s); });
  RandomTwoLocalOptions o;
  o.time_dependent = true;
  const Interaction phi = zone_respecting(vol, {g1, g2 - g1, vol - g2}, 8, o);
  FactorizeOptions fo;
  fo.probes_per_zone = 4;
  const FactorizationCertificate c = factorize(phi, sw, vol, tight(), fo);
  EXPECT_EQ(c.crossing_terms, 0u);
  EXPECT_LE(c.u_identity_defect, 1e-8);
  EXPECT_LE(c.beta_identity_defect, 1e-8);
  EXPECT_TRUE(c.valid);
}

TEST(Factorize, SplitShapeOfDecoupledDynamics) {
  Factorization f(chain_model(5), chain_sandwich(), chain(6), tight());
  std::mt19937_64 rng(6);
  std::vector<LocalOperator> ops = {random_hermitian(Region{{0, 0}, {1, 0}}, rng), random_hermitian(Region{{3, 0}}, rng),
                                    random_hermitian(Region{{5, 0}}, rng), random_hermitian(Region{{1, 0}, {2, 0}}, rng)};
  const SplitShapeReport rep = f.split_shape_check(ops);
  EXPECT_TRUE(rep.passed);
  EXPECT_TRUE(rep.rows.back().skipped);
  EXPECT_LE(rep.max_zone_defect, 1e-9);
}
