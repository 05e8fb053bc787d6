#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <tuple>
#include <vector>

#include "algebra.hpp"
#include "ffunc.hpp"
#include "interaction.hpp"

namespace quasiloc {

struct EvolveConfig {
  // automatic: spectral for time-independent generators, extrapolation otherwise
  enum class Method { automatic, rk4, extrapolation, spectral };

  double tolerance = 1e-10;  // local error per unit time (Frobenius)
  bool reunitarize = true;
  int reunitarize_every = 64;
  Method method = Method::automatic;
  double min_step = 1e-12;
  std::size_t max_steps = 20'000'000;
  std::size_t cache_bytes = std::size_t(768) << 20;

  void validate() const {
    if (!(tolerance >= 1e-12 && tolerance <= 1e-4)) throw DomainError("EvolveConfig: tolerance outside [1e-12, 1e-4]");
    if (reunitarize_every < 1) throw DomainError("EvolveConfig: reunitarize_every must be >= 1");
  }
};

/// Time-dependent Hamiltonian on a finite volume, presented through its coupling hypergraph.
/// hamiltonian(cluster, t) must contain every term whose support lies inside `cluster`; it is
/// only ever called on unions of connected components, so no term crosses the cluster edge.
class Generator {
 public:
  virtual ~Generator() = default;
  virtual const Region& volume() const = 0;
  virtual int local_dim() const = 0;
  virtual const std::vector<Region>& couplings() const = 0;
  virtual Matrix hamiltonian(const Region& cluster, double t) const = 0;
  virtual bool time_independent() const = 0;
  virtual std::vector<double> breakpoints() const { return {0.0, 1.0}; }
};

class InteractionGenerator final : public Generator {
 public:
  InteractionGenerator(const Interaction& phi, Region volume)
      : phi_(phi.restricted_to(volume)), volume_(std::move(volume)) {
    for (const auto& g : phi_.groups()) couplings_.push_back(g.region);
  }

  const Region& volume() const override { return volume_; }
  int local_dim() const override { return phi_.local_dim(); }
  const std::vector<Region>& couplings() const override { return couplings_; }
  bool time_independent() const override { return phi_.time_independent(); }
  std::vector<double> breakpoints() const override { return phi_.breakpoints(); }
  const Interaction& interaction() const { return phi_; }

  Matrix hamiltonian(const Region& cluster, double t) const override {
    const auto& parts = profile_parts(cluster);
    const auto D = Eigen::Index(ipow(phi_.local_dim(), cluster.size()));
    Matrix h = Matrix::Zero(D, D);
    for (const auto& [profile, m] : parts) h += profile(t) * m;
    return h;
  }

 private:
  // Embedded operators of the cluster's terms, summed per distinct time profile.
  const std::vector<std::pair<TimeProfile, Matrix>>& profile_parts(const Region& cluster) const {
    std::lock_guard lock(mu_);
    auto it = parts_.find(cluster);
    if (it != parts_.end()) return it->second;
    std::vector<std::pair<TimeProfile, Matrix>> parts;
    const int d = phi_.local_dim();
    for (const auto& t : phi_.terms()) {
      if (!t.region.subset_of(cluster)) continue;
      const Matrix m = embed(LocalOperator::on(t.region, t.op, d), cluster).matrix();
      auto p = std::find_if(parts.begin(), parts.end(), [&](const auto& e) { return e.first == t.profile; });
      if (p == parts.end()) parts.emplace_back(t.profile, m);
      else p->second += m;
    }
    return parts_.emplace(cluster, std::move(parts)).first->second;
  }

  Interaction phi_;
  Region volume_;
  std::vector<Region> couplings_;
  mutable std::mutex mu_;
  mutable std::map<Region, std::vector<std::pair<TimeProfile, Matrix>>> parts_;
};

/// U(t;s) on a volume together with the tolerance it was produced at.
struct Propagator {
  Region volume;
  double t = 0, s = 0;
  Matrix matrix;
  double tolerance = 0;
};

namespace detail {

inline Matrix polar_unitary(const Matrix& U) {
  Eigen::BDCSVD<Matrix> svd(U, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

using State = std::vector<Matrix>;
using Derivative = std::function<void(double t, const State& y, State& dy)>;

inline double state_distance(const State& a, const State& b) {
  double e = 0;
  for (std::size_t i = 0; i < a.size(); ++i) e = std::max(e, (a[i] - b[i]).norm());
  return e;
}

inline std::vector<double> stops_between(double a, double b, const std::vector<double>& breaks) {
  const double dir = b > a ? 1.0 : -1.0;
  std::vector<double> stops;
  for (double p : breaks)
    if ((p - a) * dir > 0 && (b - p) * dir > 0) stops.push_back(p);
  stops.push_back(b);
  if (dir < 0) std::sort(stops.begin(), stops.end(), std::greater<>());
  else std::sort(stops.begin(), stops.end());
  return stops;
}

/// Gragg-Bulirsch-Stoer integration: modified midpoint rule with 2, 4, 6, ... substeps,
/// extrapolated to zero step in h^2. A step is accepted once two successive diagonal
/// entries of the tableau agree to tol * |H| (Frobenius, worst component). Every state
/// component is a unitary matrix and is re-projected onto the unitaries after each step.
inline void extrapolate(const Derivative& f, State& y, double a, double b, const std::vector<double>& breaks,
                        const EvolveConfig& cfg, std::size_t cluster_size) {
  if (a == b) return;
  constexpr int kCols = 8;
  const double dir = b > a ? 1.0 : -1.0;
  Eigen::Index dmax = 1;
  for (const Matrix& m : y) dmax = std::max(dmax, m.rows());
  const double floor = 256 * std::numeric_limits<double>::epsilon() * std::sqrt(double(dmax));
  double t = a, H = std::min(std::abs(b - a), 0.125);
  std::size_t steps = 0;
  State f0(y.size()), fz(y.size()), z0, z1, z2;
  std::vector<State> row, prev;
  for (double stop : stops_between(a, b, breaks)) {
    while ((stop - t) * dir > 0) {
      const double hh = std::min(H, std::abs(stop - t));
      const bool lands = hh >= std::abs(stop - t);
      const double sh = dir * hh;
      const double allowed = cfg.tolerance * hh + floor;
      f(t, y, f0);
      prev.clear();
      bool accepted = false;
      int used = 0;
      double err = INFINITY;
      for (int k = 0; k < kCols && !accepted; ++k) {
        const int n = 2 * (k + 1);
        const double h = sh / n;
        z0 = y;
        z1 = y;
        for (std::size_t i = 0; i < y.size(); ++i) z1[i] += h * f0[i];
        for (int m = 1; m < n; ++m) {
          f(t + m * h, z1, fz);
          z2 = z0;
          for (std::size_t i = 0; i < y.size(); ++i) z2[i] += (2 * h) * fz[i];
          z0 = std::move(z1);
          z1 = std::move(z2);
        }
        f(t + sh, z1, fz);
        row.assign(std::size_t(k) + 1, State{});
        row[0] = State(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) row[0][i] = 0.5 * (z1[i] + z0[i] + h * fz[i]);
        for (int l = 1; l <= k; ++l) {
          const double r = double(n) / double(2 * (k - l + 1));
          const double c = 1.0 / (r * r - 1.0);
          row[l] = row[l - 1];
          for (std::size_t i = 0; i < y.size(); ++i) row[l][i] += c * (row[l - 1][i] - prev[l - 1][i]);
        }
        if (k >= 2) {
          err = state_distance(row[k], row[k - 1]);
          if (err <= allowed) {
            accepted = true;
            used = k;
            y = std::move(row[k]);
          }
        }
        prev = std::move(row);
      }
      if (accepted) {
        if (cfg.reunitarize)
          for (Matrix& m : y) m = polar_unitary(m);
        t = lands ? stop : t + sh;
        ++steps;
        const double next = used <= 3 ? 2 * hh : used >= kCols - 1 ? 0.7 * hh : hh;
        H = (lands && hh < H) ? std::max(H, next) : next;
      } else {
        H = hh * 0.3;
      }
      if ((!accepted && H < cfg.min_step) || steps > cfg.max_steps) {
        std::ostringstream msg;
        msg << "propagator integration failed at t=" << t << " (step " << H << ", error " << err << ", allowed "
            << allowed << ", steps " << steps << ", cluster size " << cluster_size << ")";
        throw IntegrationFailure(msg.str());
      }
    }
  }
}

}  // namespace detail

/// Heisenberg dynamics tau_{t,s}(A) = U(t;s)* A U(t;s) generated on a finite volume.
/// Observables are evolved on the union of coupling components that meet their support,
/// which is exact because the Hamiltonian splits into commuting component blocks.
class Evolution {
 public:
  explicit Evolution(std::shared_ptr<const Generator> gen, EvolveConfig cfg = {})
      : gen_(std::move(gen)), cfg_(cfg) {
    cfg_.validate();
    build_components();
  }

  const Generator& generator() const { return *gen_; }
  const EvolveConfig& config() const { return cfg_; }

  Region closure(const Region& seed) const {
    if (!seed.subset_of(gen_->volume())) throw DomainError("closure: region not inside the volume");
    std::vector<Site> out(seed.begin(), seed.end());
    std::vector<bool> taken(components_.size(), false);
    for (Site s : seed) {
      const std::size_t c = component_of_[*gen_->volume().index_of(s)];
      if (taken[c]) continue;
      taken[c] = true;
      out.insert(out.end(), components_[c].begin(), components_[c].end());
    }
    return Region(std::move(out));
  }

  /// U(t;s) restricted to `cluster` (a union of components).
  Matrix unitary(const Region& cluster, double t, double s) const {
    const auto D = Eigen::Index(ipow(gen_->local_dim(), cluster.size()));
    if (t == s || cluster.empty()) return Matrix::Identity(D, D);
    // distinct components evolve independently; the product is assembled from the factors
    std::vector<std::size_t> parts;
    for (Site x : cluster) {
      const auto i = gen_->volume().index_of(x);
      if (!i) throw DomainError("unitary: cluster not inside the volume");
      parts.push_back(component_of_[*i]);
    }
    std::sort(parts.begin(), parts.end());
    parts.erase(std::unique(parts.begin(), parts.end()), parts.end());
    if (parts.size() > 1) {
      Matrix U = Matrix::Identity(D, D);
      const int d = gen_->local_dim();
      for (std::size_t c : parts) {
        const Region& comp = components_[c];
        if (!comp.subset_of(cluster)) throw DomainError("unitary: cluster is not a union of components");
        U = apply_left(unitary(comp, t, s), comp, U, cluster, d);
      }
      return U;
    }
    if (use_spectral()) return spectral_unitary(cluster, t, s);
    return integrated_unitary(cluster, t, s);
  }

  Propagator propagator(double t, double s) const {
    return {gen_->volume(), t, s, unitary(gen_->volume(), t, s), cfg_.tolerance};
  }

  LocalOperator tau(const LocalOperator& A, double t, double s) const { return conjugate(A, t, s, false); }
  LocalOperator tau_hat(const LocalOperator& A, double t, double s) const { return conjugate(A, t, s, true); }

 private:
  bool use_spectral() const {
    using M = EvolveConfig::Method;
    if (cfg_.method == M::spectral && !gen_->time_independent())
      throw DomainError("spectral propagation requires a time-independent generator");
    return cfg_.method == M::spectral || (cfg_.method == M::automatic && gen_->time_independent());
  }

  void build_components() {
    const Region& vol = gen_->volume();
    std::vector<std::size_t> parent(vol.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t i) {
      while (parent[i] != i) i = parent[i] = parent[parent[i]];
      return i;
    };
    for (const Region& e : gen_->couplings()) {
      if (!e.subset_of(vol)) throw DomainError("generator coupling outside its volume");
      const std::size_t r0 = find(*vol.index_of(e[0]));
      for (Site s : e) parent[find(*vol.index_of(s))] = r0;
    }
    std::map<std::size_t, std::size_t> label;
    component_of_.resize(vol.size());
    std::vector<std::vector<Site>> comps;
    for (std::size_t i = 0; i < vol.size(); ++i) {
      auto [it, fresh] = label.try_emplace(find(i), comps.size());
      if (fresh) comps.emplace_back();
      comps[it->second].push_back(vol[i]);
      component_of_[i] = it->second;
    }
    for (auto& c : comps) components_.emplace_back(std::move(c));
  }

  LocalOperator conjugate(const LocalOperator& A, double t, double s, bool hat) const {
    if (A.support().empty() || t == s) return A;
    if (A.local_dim() != gen_->local_dim()) throw DomainError("tau: local dimension mismatch");
    const Region C = closure(A.support());
    const Matrix U = unitary(C, t, s);
    const LocalOperator a = compact(A);
    // hat-tau_{t,s}(A) = U A U* is computed from the same U(t;s), so that its agreement with
    // tau_{s,t} compares two independent integrations.
    Matrix r = hat ? Matrix(U * apply_left(a.matrix(), a.support(), U.adjoint(), C, A.local_dim()))
                   : Matrix(U.adjoint() * apply_left(a.matrix(), a.support(), U, C, A.local_dim()));
    if (A.is_hermitian()) r = (r + r.adjoint()) / 2.0;
    LocalOperator out(C, C, std::move(r), A.local_dim());
    if (A.ambient().subset_of(C)) return out;
    return embed(out, A.ambient() | C);
  }

  // --- spectral path: cached eigendecomposition of the constant cluster Hamiltonian
  struct Spectral {
    Matrix V;
    Eigen::VectorXd E;
  };

  Matrix spectral_unitary(const Region& cluster, double t, double s) const {
    const auto key = std::make_tuple(cluster, t, s);
    if (auto hit = lookup(key)) return *hit;
    const Spectral& sp = spectral(cluster);
    const Eigen::VectorXcd phase = (sp.E.cast<cplx>() * cplx(0, -(t - s))).array().exp();
    Matrix U = sp.V * phase.asDiagonal() * sp.V.adjoint();
    store(key, U);
    return U;
  }

  const Spectral& spectral(const Region& cluster) const {
    std::lock_guard lock(mu_);
    auto it = spectral_.find(cluster);
    if (it != spectral_.end()) return it->second;
    const Matrix H = gen_->hamiltonian(cluster, 0.0);
    Eigen::SelfAdjointEigenSolver<Matrix> es(H);
    return spectral_.emplace(cluster, Spectral{es.eigenvectors(), es.eigenvalues()}).first->second;
  }

  // --- ODE paths; trajectories are cached per (cluster, s)
  Matrix integrated_unitary(const Region& cluster, double t, double s) const {
    const auto key = std::make_tuple(cluster, t, s);
    if (auto hit = lookup(key)) return *hit;
    // nearest cached point between s and t serves as the starting value
    double t0 = s;
    Matrix U0 = Matrix::Identity(Eigen::Index(ipow(gen_->local_dim(), cluster.size())),
                                 Eigen::Index(ipow(gen_->local_dim(), cluster.size())));
    {
      std::lock_guard lock(mu_);
      for (const auto& e : cache_) {
        const auto& [c, tc, sc] = e.key;
        if (sc != s || !(c == cluster)) continue;
        const bool between = (s < t) ? (tc > t0 && tc <= t) : (tc < t0 && tc >= t);
        if (between) {
          t0 = tc;
          U0 = e.value;
        }
      }
    }
    Matrix U;
    if (cfg_.method == EvolveConfig::Method::rk4) {
      U = integrate(cluster, std::move(U0), t0, t);
    } else {
      detail::State y{std::move(U0)};
      const cplx mi(0, -1);
      detail::extrapolate([&](double tt, const detail::State& z, detail::State& dz) {
        dz[0] = mi * (gen_->hamiltonian(cluster, tt) * z[0]);
      }, y, t0, t, gen_->breakpoints(), cfg_, cluster.size());
      U = std::move(y[0]);
    }
    store(key, U);
    return U;
  }

  Matrix rk4_step(const Region& cluster, const Matrix& U, double t, double h) const {
    const cplx mi(0, -1);
    const Matrix H0 = gen_->hamiltonian(cluster, t);
    const Matrix Hm = gen_->hamiltonian(cluster, t + h / 2);
    const Matrix H1 = gen_->hamiltonian(cluster, t + h);
    const Matrix k1 = mi * (H0 * U);
    const Matrix k2 = mi * (Hm * (U + (h / 2) * k1));
    const Matrix k3 = mi * (Hm * (U + (h / 2) * k2));
    const Matrix k4 = mi * (H1 * (U + h * k3));
    return U + (h / 6) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  Matrix integrate(const Region& cluster, Matrix U, double a, double b) const {
    if (a == b) return U;
    const double dir = b > a ? 1.0 : -1.0;
    const std::vector<double> stops = detail::stops_between(a, b, gen_->breakpoints());

    const double tol = cfg_.tolerance;
    double t = a, h = std::min(std::abs(b - a), 1e-2);
    std::size_t steps = 0, since_polar = 0;
    for (double stop : stops) {
      while ((stop - t) * dir > 0) {
        double hh = std::min(h, std::abs(stop - t));
        const bool lands = hh >= std::abs(stop - t);
        const double sh = dir * hh;
        const Matrix full = rk4_step(cluster, U, t, sh);
        const Matrix half = rk4_step(cluster, rk4_step(cluster, U, t, sh / 2), t + sh / 2, sh / 2);
        const double err = (full - half).norm() / 15.0;
        // rounding floor: on tiny intervals the two paths differ only by float noise
        const double allowed = tol * hh + 64 * std::numeric_limits<double>::epsilon() * std::sqrt(double(U.rows()));
        if (err <= allowed) {
          U = half + (half - full) / 15.0;
          t = lands ? stop : t + sh;
          ++steps;
          if (cfg_.reunitarize && ++since_polar >= std::size_t(cfg_.reunitarize_every)) {
            U = detail::polar_unitary(U);
            since_polar = 0;
          }
          const double grow = err > 0 ? 0.9 * std::pow(allowed / err, 0.25) : 4.0;
          const double next = hh * std::clamp(grow, 0.2, 4.0);
          // a step cut short by a stop says nothing about the step size
          h = (lands && hh < h) ? std::max(h, next) : next;
          if (steps <= cfg_.max_steps) continue;
        } else {
          h = hh * std::clamp(0.9 * std::pow(allowed / err, 0.25), 0.1, 0.9);
        }
        if (h < cfg_.min_step || steps > cfg_.max_steps) {
          std::ostringstream msg;
          msg << "propagator integration failed at t=" << t << " (step " << h << ", error " << err
              << ", allowed " << allowed << ", steps " << steps << ", cluster size " << cluster.size() << ")";
          throw IntegrationFailure(msg.str());
        }
      }
    }
    if (cfg_.reunitarize && since_polar > 0) U = detail::polar_unitary(U);
    return U;
  }

  // --- bounded LRU cache of propagator matrices
  static constexpr std::size_t kMaxEntries = 2048;
  using Key = std::tuple<Region, double, double>;
  struct Entry {
    Key key;
    Matrix value;
  };

  std::optional<Matrix> lookup(const Key& key) const {
    std::lock_guard lock(mu_);
    for (auto it = cache_.begin(); it != cache_.end(); ++it)
      if (it->key == key) {
        cache_.splice(cache_.begin(), cache_, it);
        return cache_.front().value;
      }
    return std::nullopt;
  }

  void store(const Key& key, const Matrix& U) const {
    std::lock_guard lock(mu_);
    const std::size_t bytes = std::size_t(U.size()) * sizeof(cplx);
    cache_.push_front({key, U});
    bytes_ += bytes;
    while ((bytes_ > cfg_.cache_bytes || cache_.size() > kMaxEntries) && cache_.size() > 1) {
      bytes_ -= std::size_t(cache_.back().value.size()) * sizeof(cplx);
      cache_.pop_back();
    }
  }

  std::shared_ptr<const Generator> gen_;
  EvolveConfig cfg_;
  std::vector<Region> components_;
  std::vector<std::size_t> component_of_;

  mutable std::mutex mu_;
  mutable std::map<Region, Spectral> spectral_;
  mutable std::list<Entry> cache_;
  mutable std::size_t bytes_ = 0;
};

inline std::shared_ptr<const Generator> make_generator(const Interaction& phi, const Region& volume) {
  return std::make_shared<InteractionGenerator>(phi, volume);
}

inline Propagator propagator(const Interaction& phi, const Region& lambda, double t, double s, EvolveConfig cfg = {}) {
  if (ipow(phi.local_dim(), lambda.size()) > kMaxDimension) throw DomainError("propagator: volume too large");
  return Evolution(make_generator(phi, lambda), cfg).propagator(t, s);
}

enum class Direction { tau, tau_hat };

inline LocalOperator heisenberg(const Interaction& phi, const Region& lambda, double t, double s, const LocalOperator& A,
                                Direction dir, EvolveConfig cfg = {}) {
  if (!A.ambient().subset_of(lambda)) throw DomainError("heisenberg: operator ambient not inside the volume");
  Evolution evo(make_generator(phi, lambda), cfg);
  return dir == Direction::tau ? evo.tau(A, t, s) : evo.tau_hat(A, t, s);
}

/// ||tau_{s,u}(tau_{t,s}(A)) - tau_{t,u}(A)||. With tau_{t,s}(A) = U(t;s)* A U(t;s) and
/// U(t;u) = U(t;s) U(s;u) this is the composition order that holds for time-dependent H.
inline double cocycle_residual(const Evolution& evo, double t, double s, double u, const LocalOperator& A) {
  return op_norm(evo.tau(evo.tau(A, t, s), s, u) - evo.tau(A, t, u));
}

inline double cocycle_residual(const Interaction& phi, const Region& lambda, double t, double s, double u,
                               const LocalOperator& A, EvolveConfig cfg = {}) {
  Evolution evo(make_generator(phi, lambda), cfg);
  return cocycle_residual(evo, t, s, u, A);
}

// log(e^{2I} - 1), -inf at I = 0.
inline double log_expm1_2i(double I) {
  if (I <= 0) return -INFINITY;
  const double x = 2 * I;
  return x + std::log(-std::expm1(-x));
}

/// Constants shared by the locality bounds: C_F enclosure, I(Phi), and a G_F table.
struct BoundContext {
  FFunction F;
  TailBound cf;
  double i_phi = 0;
  std::shared_ptr<const GTable> g;

  BoundContext(const Interaction& phi, const FFunction& f, int g_cut = 64, int cf_cut = FFunction::kConvCut)
      : F(f), cf(conv_constant(f, cf_cut)), g(std::make_shared<GTable>(f, g_cut)) {
    i_phi = quasiloc::i_phi(phi, F, cf);
  }

  double log_g_upper(double t) const {
    if (std::isinf(t)) return -INFINITY;
    return g->at(t).log_upper();
  }
};

struct BoundCheck {
  double measured = 0;
  double log_bound = -INFINITY;
  double bound = 0;
  double margin = INFINITY;  // log_bound - log(measured)
  bool satisfied = true;
  bool flagged = false;      // exceeded by less than the enclosure slack
};

inline BoundCheck compare_to_bound(double measured, double log_bound) {
  BoundCheck c;
  c.measured = measured;
  c.log_bound = log_bound;
  c.bound = std::exp(log_bound);
  c.margin = measured > 0 ? log_bound - std::log(measured) : INFINITY;
  c.satisfied = c.margin >= 0;
  c.flagged = !c.satisfied && c.margin > -1e-9;
  return c;
}

struct LrSample {
  double t = 0, s = 0, distance = 0;
  BoundCheck check;
};

/// ||[tau_{t,s}(A), B]|| against (2||A|| ||B|| / C_F)(e^{2I} - 1)|X| G_F(d(X,Y)).
inline LrSample lr_check(const Evolution& evo, const BoundContext& ctx, const LocalOperator& A, const LocalOperator& B,
                         double t, double s) {
  if (A.support().empty() || B.support().empty()) throw DomainError("lr_check: empty support");
  if (A.support().intersects(B.support())) throw DomainError("lr_check: supports overlap");
  const Region& vol = evo.generator().volume();
  if (!A.support().subset_of(vol) || !B.support().subset_of(vol)) throw DomainError("lr_check: support outside volume");
  LrSample out;
  out.t = t;
  out.s = s;
  out.distance = set_distance(A.support(), B.support());
  const double measured = op_norm(commutator(evo.tau(A, t, s), B));
  const double log_bound = std::log(2.0) + std::log(op_norm(A)) + std::log(op_norm(B)) - std::log(ctx.cf.lower()) +
                           log_expm1_2i(ctx.i_phi) + std::log(double(A.support().size())) +
                           ctx.log_g_upper(out.distance);
  out.check = compare_to_bound(measured, log_bound);
  return out;
}

struct DeltaRow {
  int m = 0;
  bool applicable = true;  // the inequality is stated for m >= 1
  BoundCheck check;
};

/// ||Delta_{X(m)}(tau_{t,s}(A))|| against (4||A|| / C_F)(e^{2I} - 1)|X| G_F(m).
inline std::vector<DeltaRow> delta_decay_check(const Evolution& evo, const BoundContext& ctx, const LocalOperator& A,
                                               const Region& X, double t, double s, const std::vector<int>& ms) {
  if (!A.support().subset_of(X)) throw DomainError("delta_decay_check: A not supported in X");
  const LocalOperator B = evo.tau(A, t, s);
  const double base = std::log(4.0) + std::log(op_norm(A)) - std::log(ctx.cf.lower()) + log_expm1_2i(ctx.i_phi) +
                      std::log(double(X.size()));
  std::vector<DeltaRow> rows;
  for (int m : ms) {
    DeltaRow r;
    r.m = m;
    const double measured = op_norm(delta_m(B, X, m));
    r.applicable = m >= 1;
    r.check = compare_to_bound(measured, base + ctx.log_g_upper(m));
    if (!r.applicable) r.check.satisfied = true;
    rows.push_back(r);
  }
  return rows;
}

struct VolumeRow {
  std::size_t volume_size = 0;
  double boundary_distance = 0;  // d(X, Lambda_max \ Lambda_n)
  BoundCheck check;
};

struct VolumeReport {
  std::vector<VolumeRow> rows;
  bool all_satisfied = true;
  bool non_increasing = true;
};

/// ||tau^{(Lambda_n)}(A) - tau^{(Lambda_max)}(A)|| against
/// (2/C_F)||A|| e^{2I} I |X| G_F(d(X, Lambda_max \ Lambda_n)); the largest volume stands in
/// for the infinite system.
inline VolumeReport volume_convergence_check(const Interaction& phi, const BoundContext& ctx, const Region& X,
                                             const LocalOperator& A, const std::vector<Region>& volumes, double t,
                                             double s, EvolveConfig cfg = {}, double trend_slack = 1e-9) {
  if (volumes.empty()) throw DomainError("volume_convergence_check: no volumes");
  for (std::size_t i = 0; i + 1 < volumes.size(); ++i)
    if (!volumes[i].subset_of(volumes[i + 1]) || volumes[i] == volumes[i + 1])
      throw DomainError("volume_convergence_check: volumes must be strictly nested");
  if (!X.subset_of(volumes.front()) || !A.support().subset_of(X))
    throw DomainError("volume_convergence_check: X must lie in the smallest volume and carry A");
  const Region& vmax = volumes.back();
  const LocalOperator ref = Evolution(make_generator(phi, vmax), cfg).tau(A, t, s);
  const double base = std::log(2.0) - std::log(ctx.cf.lower()) + std::log(op_norm(A)) + 2 * ctx.i_phi +
                      (ctx.i_phi > 0 ? std::log(ctx.i_phi) : -INFINITY) + std::log(double(X.size()));
  VolumeReport rep;
  double prev = INFINITY;
  for (const Region& v : volumes) {
    VolumeRow row;
    row.volume_size = v.size();
    const Region outside = vmax - v;
    row.boundary_distance = outside.empty() ? INFINITY : set_distance(X, outside);
    const double diff = v == vmax ? 0.0 : op_norm(Evolution(make_generator(phi, v), cfg).tau(A, t, s) - ref);
    row.check = compare_to_bound(diff, base + ctx.log_g_upper(row.boundary_distance));
    rep.all_satisfied = rep.all_satisfied && row.check.satisfied;
    rep.non_increasing = rep.non_increasing && diff <= prev + trend_slack;
    prev = diff;
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace quasiloc
