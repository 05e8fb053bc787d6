#pragma once

#include <functional>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "algebra.hpp"
#include "dynamics.hpp"
#include "interaction.hpp"

namespace quasiloc {

/// Finite-volume transformed interaction
///   Psi(Z;t) = sum_{m>=0} sum_{X : X(m) cap Lambda_n = Z} Delta_{X(m)}(tau_{t,s}(seed(X;t)))
/// with tau generated by the base interaction on Lambda_n. Only regions carrying seed terms
/// are enumerated; fattenings are intersected with Lambda_n.
class TransformedInteraction {
 public:
  /// One Delta increment from seed region `group` at fattening m; `delta` lives on Z cap C_X.
  struct Contribution {
    std::size_t group;
    int m;
    Region Z;
    LocalOperator delta;
  };

  TransformedInteraction(std::shared_ptr<const Evolution> base, const Interaction& seed, double s)
      : base_(std::move(base)), seed_(seed.restricted_to(base_->generator().volume())), s_(s) {
    if (seed_.local_dim() != base_->generator().local_dim()) throw DomainError("transform: local dimension mismatch");
    for (const auto& g : seed_.groups()) closures_.push_back(base_->closure(g.region));
  }

  const Region& volume() const { return base_->generator().volume(); }
  double anchor() const { return s_; }
  const Interaction& seed() const { return seed_; }
  const Evolution& base() const { return *base_; }
  int local_dim() const { return seed_.local_dim(); }

  // Closure C_X of each seed region under the base couplings, indexed like seed().groups().
  const std::vector<Region>& closures() const { return closures_; }

  Region closure_union() const {
    Region u;
    for (const Region& c : closures_) u = u | c;
    return u;
  }

  std::vector<double> breakpoints() const {
    std::vector<double> b = seed_.breakpoints();
    const auto bb = base_->generator().breakpoints();
    b.insert(b.end(), bb.begin(), bb.end());
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    return b;
  }

  std::shared_ptr<const std::vector<Contribution>> contributions(double t) const {
    {
      std::lock_guard lock(mu_);
      for (auto it = cache_.begin(); it != cache_.end(); ++it)
        if (it->first == t) {
          cache_.splice(cache_.begin(), cache_, it);
          return cache_.front().second;
        }
    }
    auto list = std::make_shared<std::vector<Contribution>>(compute(t));
    std::lock_guard lock(mu_);
    cache_.emplace_front(t, list);
    if (cache_.size() > kCacheSize) cache_.pop_back();
    return list;
  }

  /// All nonzero terms Psi(Z;t), keyed by Z.
  std::map<Region, LocalOperator> terms(double t) const {
    std::map<Region, LocalOperator> out;
    for (const auto& c : *contributions(t)) {
      auto it = out.find(c.Z);
      if (it == out.end()) out.emplace(c.Z, c.delta);
      else it->second = it->second + c.delta;
    }
    return out;
  }

  LocalOperator psi_term(const Region& Z, double t) const {
    if (!Z.subset_of(volume())) throw DomainError("psi_term: Z not inside Lambda_n");
    LocalOperator acc = LocalOperator::zero(Region{}, local_dim());
    for (const auto& c : *contributions(t))
      if (c.Z == Z) acc = acc + c.delta;
    return acc;
  }

  /// H_{Lambda_n, Psi}(t) = sum_Z Psi(Z;t), on the union of the seed closures.
  LocalOperator hamiltonian(double t) const {
    const Region amb = closure_union();
    const auto D = Eigen::Index(ipow(local_dim(), amb.size()));
    Matrix h = Matrix::Zero(D, D);
    Region supp;
    for (const auto& c : *contributions(t)) {
      h += embed(c.delta, amb).matrix();
      supp = supp | c.delta.support();
    }
    return LocalOperator(supp, amb, std::move(h), local_dim());
  }

  /// Contributions at time t with tau_{t,s} supplied by the caller: `evolve(seed_op, group)`
  /// must return tau_{t,s}(seed_op) with ambient equal to closures()[group]. Not cached.
  using Evolver = std::function<LocalOperator(const LocalOperator&, std::size_t)>;
  std::vector<Contribution> contributions_with(double t, const Evolver& evolve) const { return compute(t, evolve); }

 private:
  static constexpr std::size_t kCacheSize = 16;

  std::vector<Contribution> compute(double t, const Evolver& evolve = {}) const {
    std::vector<Contribution> out;
    const Region& vol = volume();
    const int d = local_dim();
    const auto& groups = seed_.groups();
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      const Region& X = groups[gi].region;
      const LocalOperator seed_op = LocalOperator::on(X, seed_.group_matrix(groups[gi].terms, t), d);
      const LocalOperator B = evolve ? evolve(seed_op, gi) : base_->tau(seed_op, t, s_);
      const Region& C = B.ambient();
      std::optional<LocalOperator> prev;
      for (int m = 0;; ++m) {
        const Region Z = fatten_within(X, m, vol);
        const Region keep = Z & C;
        LocalOperator P(keep & B.support(), keep, partial_trace_normalized(B, keep), d);
        LocalOperator delta = prev ? P - embed(*prev, keep) : P;
        const bool nonzero = delta.matrix().cwiseAbs().maxCoeff() > 0.0;
        if (nonzero) out.push_back({gi, m, Z, std::move(delta)});
        prev = std::move(P);
        if (keep == C || Z == vol) break;
      }
    }
    return out;
  }

  std::shared_ptr<const Evolution> base_;
  Interaction seed_;
  double s_;
  std::vector<Region> closures_;
  mutable std::mutex mu_;
  mutable std::list<std::pair<double, std::shared_ptr<const std::vector<Contribution>>>> cache_;
};

/// The transformed interaction as a dynamics generator. With a projection region S the terms
/// are replaced by Pi_S(Psi(Z;t)); increments whose projection is a multiple of the identity
/// are dropped, which changes propagators only by a global phase.
class PsiGenerator final : public Generator {
 public:
  explicit PsiGenerator(std::shared_ptr<const TransformedInteraction> T, std::optional<Region> projection = {})
      : T_(std::move(T)), proj_(std::move(projection)) {
    for (const Region& c : T_->closures()) {
      Region e = proj_ ? (c & *proj_) : c;
      if (!e.empty()) couplings_.push_back(std::move(e));
      edge_of_group_.push_back(proj_ ? (c & *proj_) : c);
    }
  }

  const Region& volume() const override { return T_->volume(); }
  int local_dim() const override { return T_->local_dim(); }
  const std::vector<Region>& couplings() const override { return couplings_; }
  bool time_independent() const override { return false; }
  std::vector<double> breakpoints() const override { return T_->breakpoints(); }

  /// Term as used by this generator: the increment itself or its projection onto S.
  std::optional<LocalOperator> term(const TransformedInteraction::Contribution& c) const {
    if (!proj_) return c.delta;
    const Region keep = c.delta.ambient() & *proj_;
    if (keep.empty()) return std::nullopt;
    return LocalOperator(keep & c.delta.support(), keep, partial_trace_normalized(c.delta, keep), c.delta.local_dim());
  }

  Matrix hamiltonian(const Region& cluster, double t) const override {
    const auto D = Eigen::Index(ipow(local_dim(), cluster.size()));
    Matrix h = Matrix::Zero(D, D);
    for (const auto& c : *T_->contributions(t)) {
      const Region& edge = edge_of_group_[c.group];
      if (edge.empty() || !edge.subset_of(cluster)) continue;
      if (auto op = term(c)) h += embed(*op, cluster).matrix();
    }
    return h;
  }

  const TransformedInteraction& transformed() const { return *T_; }

 private:
  std::shared_ptr<const TransformedInteraction> T_;
  std::optional<Region> proj_;
  std::vector<Region> couplings_;
  std::vector<Region> edge_of_group_;
};

/// ||tau_{t,s}(H_{Lambda_n,seed}(t)) - H_{Lambda_n,Psi}(t)||.
inline double psio_residual(const TransformedInteraction& T, double t) {
  if (T.seed().empty()) return 0.0;
  Region seed_sites = T.seed().sites();
  const LocalOperator lhs = T.base().tau(local_hamiltonian(T.seed(), seed_sites, t), t, T.anchor());
  return op_norm(lhs - T.hamiltonian(t));
}

struct PsiConvergenceReport {
  std::vector<std::size_t> volume_sizes;
  std::vector<double> differences;  // against the largest volume
  bool non_increasing = true;
};

/// ||tau^{Psi_n}_{t,u}(A) - tau^{Psi_N}_{t,u}(A)|| over nested volumes Lambda_n, each Psi_n
/// built from the finite-volume formula on its own Lambda_n.
inline PsiConvergenceReport psi_convergence(const Interaction& phi, const Interaction& seed, double s,
                                            const std::vector<Region>& volumes, const LocalOperator& A, double t,
                                            double u, EvolveConfig cfg = {}, double trend_slack = 1e-8) {
  if (volumes.empty()) throw DomainError("psi_convergence: no volumes");
  for (std::size_t i = 0; i + 1 < volumes.size(); ++i)
    if (!volumes[i].subset_of(volumes[i + 1])) throw DomainError("psi_convergence: volumes must be nested");
  if (!A.support().subset_of(volumes.front())) throw DomainError("psi_convergence: probe outside smallest volume");
  std::vector<LocalOperator> evolved;
  for (const Region& v : volumes) {
    auto base = std::make_shared<Evolution>(make_generator(phi, v), cfg);
    auto T = std::make_shared<TransformedInteraction>(base, seed, s);
    Evolution psi(std::make_shared<PsiGenerator>(T), cfg);
    evolved.push_back(psi.tau(A, t, u));
  }
  PsiConvergenceReport rep;
  double prev = INFINITY;
  for (std::size_t i = 0; i < volumes.size(); ++i) {
    const double d = op_norm(evolved[i] - evolved.back());
    rep.volume_sizes.push_back(volumes[i].size());
    rep.differences.push_back(d);
    rep.non_increasing = rep.non_increasing && d <= prev + trend_slack;
    prev = d;
  }
  return rep;
}

}  // namespace quasiloc
