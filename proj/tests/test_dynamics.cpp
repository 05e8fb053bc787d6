#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <quasiloc/quasiloc.hpp>

using namespace quasiloc;

namespace {

// exp(-i c H) for Hermitian H, from an eigendecomposition.
Matrix expm_herm(const Matrix& H, double c) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(H);
  const Eigen::VectorXcd ph = (es.eigenvalues().cast<cplx>() * cplx(0, -c)).array().exp();
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

EvolveConfig config(EvolveConfig::Method m, double tol = 1e-10) {
  EvolveConfig c;
  c.method = m;
  c.tolerance = tol;
  return c;
}

}  // namespace

TEST(Dynamics, SingleSiteClosedForm) {
  // H = h Z: tau_{t,s}(X) = U* X U with U = exp(-i h Z (t-s)) gives cos(2h(t-s)) X - sin(2h(t-s)) Y
  const double h = 0.8;
  Interaction phi(2);
  phi.add(Region{{0, 0}}, h * pauli('Z'));
  const LocalOperator X = LocalOperator::on(Region{{0, 0}}, pauli('X'));
  for (auto m : {EvolveConfig::Method::spectral, EvolveConfig::Method::extrapolation, EvolveConfig::Method::rk4}) {
    Evolution evo(make_generator(phi, chain(1)), config(m));
    for (double t : {0.0, 0.3, 1.0}) {
      const double a = 2 * h * (t - 0.6);
      const Matrix expect = std::cos(a) * pauli('X') - std::sin(a) * pauli('Y');
      EXPECT_LT((evo.tau(X, t, 0.6).matrix() - expect).norm(), 1e-10);
    }
  }
}

TEST(Dynamics, CommutingTimeDependentClosedForm) {
  // commuting terms with a common profile g: U(t;s) = exp(-i (int_s^t g) H0)
  const Region sites = chain(4);
  const TimeProfile g({0.0, 0.5, 1.0}, {{1.0, 2.0}, {3.0, -2.0}});
  auto G = [](double a) { return a <= 0.5 ? a + a * a : 0.5 + 0.25 + 3 * (a - 0.5) - (a * a - 0.25); };
  Interaction phi(2);
  const Interaction base = commuting_zz(sites, 0.9, 0.4);
  for (const auto& t : base.terms()) phi.add(t.region, t.op, g);
  const Matrix H0 = local_hamiltonian(base, sites, 0.0).matrix();
  Evolution evo(make_generator(phi, sites), config(EvolveConfig::Method::automatic));
  for (auto [t, s] : {std::pair{1.0, 0.0}, {0.2, 0.9}, {0.75, 0.25}}) {
    const Matrix expect = expm_herm(H0, G(t) - G(s));
    EXPECT_LT((evo.unitary(sites, t, s) - expect).norm(), 1e-9) << t << " " << s;
  }
}

TEST(Dynamics, MethodsAgreeOnRandomChain) {
  RandomTwoLocalOptions o;
  o.time_dependent = true;
  const Interaction phi = random_two_local(chain(5), 17, o);
  Evolution a(make_generator(phi, chain(5)), config(EvolveConfig::Method::rk4, 1e-10));
  Evolution b(make_generator(phi, chain(5)), config(EvolveConfig::Method::extrapolation, 1e-10));
  for (auto [t, s] : {std::pair{1.0, 0.0}, {0.0, 1.0}, {0.3, 0.8}})
    EXPECT_LT((a.unitary(chain(5), t, s) - b.unitary(chain(5), t, s)).norm(), 1e-8);
  EXPECT_THROW(Evolution(make_generator(phi, chain(5)), config(EvolveConfig::Method::spectral)).unitary(chain(5), 1, 0),
               DomainError);
}

TEST(Dynamics, UnitarityAndInverse) {
  RandomTwoLocalOptions o;
  o.time_dependent = true;
  const Interaction phi = random_two_local(chain(4), 2, o);
  Evolution evo(make_generator(phi, chain(4)), config(EvolveConfig::Method::automatic));
  const Matrix U = evo.unitary(chain(4), 0.9, 0.1), V = evo.unitary(chain(4), 0.1, 0.9);
  EXPECT_LT((U.adjoint() * U - Matrix::Identity(16, 16)).norm(), 1e-10);
  EXPECT_LT((U * V - Matrix::Identity(16, 16)).norm(), 1e-8);
}

TEST(Dynamics, CocycleOnRandomChain) {
  RandomTwoLocalOptions o;
  o.time_dependent = true;
  const Region sites = chain(6);
  const Interaction phi = random_two_local(sites, 4, o);
  Evolution evo(make_generator(phi, sites), config(EvolveConfig::Method::automatic, 1e-10));
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0, 1);
  const LocalOperator A = random_hermitian(Region{{2, 0}, {3, 0}}, rng);
  for (int i = 0; i < 5; ++i) EXPECT_LE(cocycle_residual(evo, u(rng), u(rng), u(rng), A), 1e-8);
}

TEST(Dynamics, ProductOverComponents) {
  // two disconnected chains: tau of a product is the product of the factors
  Interaction phi(2);
  const Interaction left = random_two_local(Region{{0, 0}, {1, 0}}, 1);
  const Interaction right = random_two_local(Region{{3, 0}, {4, 0}}, 2);
  for (const auto& t : left.terms()) phi.add(t);
  for (const auto& t : right.terms()) phi.add(t);
  const Region vol = Region{{0, 0}, {1, 0}, {3, 0}, {4, 0}};
  Evolution evo(make_generator(phi, vol), config(EvolveConfig::Method::automatic));
  EXPECT_EQ(evo.closure(Region{{0, 0}}), (Region{{0, 0}, {1, 0}}));
  const LocalOperator a = LocalOperator::on(Region{{1, 0}}, pauli('X'));
  const LocalOperator b = LocalOperator::on(Region{{3, 0}}, pauli('Y'));
  EXPECT_LT(op_norm(evo.tau(a * b, 0.7, 0.0) - evo.tau(a, 0.7, 0.0) * evo.tau(b, 0.7, 0.0)), 1e-12);
}

TEST(Dynamics, TauHatInvertsTau) {
  const Interaction phi = tfim_chain(4, 1.0, 0.6);
  Evolution evo(make_generator(phi, chain(4)));
  std::mt19937_64 rng(8);
  const LocalOperator A = random_hermitian(Region{{1, 0}}, rng);
  EXPECT_LT(op_norm(evo.tau_hat(evo.tau(A, 0.4, 0.0), 0.4, 0.0) - A), 1e-12);
  EXPECT_LT(op_norm(evo.tau_hat(A, 0.4, 0.0) - evo.tau(A, 0.0, 0.4)), 1e-12);
}

TEST(Dynamics, LiebRobinsonSmallChain) {
  const Interaction phi = tfim_chain(6, 1.0, 1.0);
  const FFunction F(3, true, 1);
  const BoundContext ctx(phi, F);
  Evolution evo(make_generator(phi, chain(6)));
  const LocalOperator A = LocalOperator::on(Region{{0, 0}}, pauli('Z'));
  const LocalOperator B = LocalOperator::on(Region{{4, 0}}, pauli('X'));
  for (double t : {0.1, 0.5, 1.0}) {
    const LrSample s = lr_check(evo, ctx, A, B, t, 0.0);
    EXPECT_TRUE(s.check.satisfied);
    EXPECT_DOUBLE_EQ(s.distance, 4.0);
  }
  EXPECT_THROW(lr_check(evo, ctx, A, A, 0.5, 0.0), DomainError);
  for (const auto& r : delta_decay_check(evo, ctx, A, Region{{0, 0}}, 0.5, 0.0, {0, 1, 2, 3})) {
    EXPECT_TRUE(r.check.satisfied);
    EXPECT_EQ(r.applicable, r.m >= 1);
  }
  const VolumeReport v = volume_convergence_check(phi, ctx, Region{{0, 0}}, A, {chain(3), chain(4), chain(6)}, 0.5, 0.0);
  EXPECT_TRUE(v.all_satisfied);
  EXPECT_TRUE(v.non_increasing);
}

TEST(Dynamics, ConfigValidation) {
  EvolveConfig c;
  c.tolerance = 1e-2;
  EXPECT_THROW(c.validate(), DomainError);
  c.tolerance = 1e-10;
  c.reunitarize_every = 0;
  EXPECT_THROW(c.validate(), DomainError);
}
