#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "algebra.hpp"
#include "dynamics.hpp"
#include "interaction.hpp"
#include "lattice.hpp"
#include "transform.hpp"

namespace quasiloc {

/// Gamma1' in Gamma1 in Gamma2 in Gamma2'; the strip Gamma2' \ Gamma1' carries beta.
struct ConeSandwich {
  Cone g1p, g1, g2, g2p;

  bool in_g1(Site s) const { return g1.contains(s); }
  bool in_g2(Site s) const { return g2.contains(s); }
  bool in_strip(Site s) const { return g2p.contains(s) && !g1p.contains(s); }

  void validate(const Region& volume) const {
    if (!(g2p.half_angle > g2.half_angle)) throw DomainError("sandwich: Gamma2' must be wider than Gamma2");
    if (!(g1p.half_angle < g1.half_angle)) throw DomainError("sandwich: Gamma1' must be narrower than Gamma1");
    const Region r1p = volume.filter([&](Site s) { return g1p.contains(s); });
    const Region r1 = volume.filter([&](Site s) { return g1.contains(s); });
    const Region r2 = volume.filter([&](Site s) { return g2.contains(s); });
    const Region r2p = volume.filter([&](Site s) { return g2p.contains(s); });
    auto strict = [](const Region& a, const Region& b) { return a.subset_of(b) && !(a == b); };
    if (!strict(r1p, r1) || !strict(r1, r2) || !strict(r2, r2p))
      throw DomainError("sandwich: inclusions are not strict on the volume");
  }
};

/// Generator with a single coupling covering its whole volume and a callback Hamiltonian.
class FunctionGenerator final : public Generator {
 public:
  FunctionGenerator(Region volume, int d, std::function<Matrix(double)> h, std::vector<double> breaks)
      : volume_(std::move(volume)), d_(d), h_(std::move(h)), breaks_(std::move(breaks)) {
    if (!volume_.empty()) couplings_.push_back(volume_);
  }
  const Region& volume() const override { return volume_; }
  int local_dim() const override { return d_; }
  const std::vector<Region>& couplings() const override { return couplings_; }
  bool time_independent() const override { return false; }
  std::vector<double> breakpoints() const override { return breaks_; }
  Matrix hamiltonian(const Region& cluster, double t) const override {
    if (!(cluster == volume_)) throw DomainError("FunctionGenerator: cluster must be the whole volume");
    return h_(t);
  }

 private:
  Region volume_;
  int d_;
  std::function<Matrix(double)> h_;
  std::vector<double> breaks_;
  std::vector<Region> couplings_;
};

/// W^{(s)}(t) solving dW/dt = -i tau^{psi_tilde}_{t,s}(V(t)) W, W(s) = 1, on `region`
/// (which must contain the support of every tau^{psi_tilde}_{t,s}(V(t))).
inline Propagator interpolating_unitary(const Evolution& psi_tilde, const std::function<LocalOperator(double)>& V,
                                        const Region& region, double s, double t, EvolveConfig cfg = {}) {
  const int d = psi_tilde.generator().local_dim();
  auto K = [&psi_tilde, V, region, s](double tt) {
    const LocalOperator k = psi_tilde.tau(V(tt), tt, s);
    return embed(k, region).matrix();
  };
  Evolution w(std::make_shared<FunctionGenerator>(region, d, K, psi_tilde.generator().breakpoints()), cfg);
  return {region, t, s, w.unitary(region, t, s), cfg.tolerance};
}

struct FactorizeOptions {
  std::uint64_t seed = 1234;
  int probes_per_zone = 20;
  std::vector<double> sample_times = {0.0, 0.25, 0.5, 0.75};
  double residual_tolerance = 0;    // 0 selects 1000 x integrator tolerance
  double unitarity_tolerance = 0;   // 0 selects 10 x integrator tolerance
};

struct Probe {
  std::string zone;
  LocalOperator op;
};

struct FactorizationCertificate {
  double residual_ata = 0, residual_www = 0, residual_ttt = 0, residual_quasifactor = 0;
  double u_norm_defect = 0;        // ||u* u - 1||
  double u_identity_defect = 0;    // ||u - 1||
  double beta_support_defect = 0;  // probes off the strip
  double beta_identity_defect = 0; // all probes
  double beta_isometry_defect = 0;
  double v_norm_max = 0;           // max over sample times of ||V_n(t)||
  double integrator_tolerance = 0, residual_tolerance = 0, unitarity_tolerance = 0;
  bool chain_consistent = false;
  bool valid = false;
  std::size_t probe_count = 0;
  std::size_t crossing_terms = 0;
  std::uint64_t seed = 0;
  std::size_t volume_size = 0, w_region_size = 0;
  Region zone_g1, zone_mid, zone_out, strip;
};

struct ZoneDefect {
  std::string zone;
  double defect = 0;
  bool skipped = false;
};

struct SplitShapeReport {
  std::vector<ZoneDefect> rows;
  double max_zone_defect = 0;
  double beta_off_strip_defect = 0;
  bool passed = false;
};

/// Quasi-factorization tau^Phi_{1,0} = Ad(u) o tau^{Phi0}_{1,0} o beta on a finite volume,
/// with anchor time s = 1 throughout.
class Factorization {
 public:
  Factorization(const Interaction& phi, ConeSandwich sandwich, Region volume, EvolveConfig cfg = {},
                FactorizeOptions opt = {})
      : sw_(sandwich), volume_(std::move(volume)), cfg_(cfg), opt_(std::move(opt)) {
    sw_.validate(volume_);
    phi_ = phi.restricted_to(volume_);
    zone_g1_ = volume_.filter([&](Site s) { return sw_.in_g1(s); });
    const Region g2 = volume_.filter([&](Site s) { return sw_.in_g2(s); });
    zone_mid_ = g2 - zone_g1_;
    zone_out_ = volume_ - g2;
    strip_ = volume_.filter([&](Site s) { return sw_.in_strip(s); });

    dec_ = decouple(phi_, [&](Site s) { return sw_.in_g1(s); }, [&](Site s) { return sw_.in_g2(s); });
    evo_phi_ = std::make_shared<Evolution>(make_generator(phi_, volume_), cfg_);
    evo_phi0_ = std::make_shared<Evolution>(make_generator(dec_.phi0, volume_), cfg_);
    T_ = std::make_shared<TransformedInteraction>(evo_phi_, dec_.phi1, 1.0);
    evo_psi_ = std::make_shared<Evolution>(std::make_shared<PsiGenerator>(T_), cfg_);
    tilde_gen_ = std::make_shared<PsiGenerator>(T_, strip_);
    evo_tilde_ = std::make_shared<Evolution>(tilde_gen_, cfg_);

    joint_region_ = T_->closure_union();
    w_region_ = joint_region_;
  }

  const Interaction& phi() const { return phi_; }
  const Decoupled& decoupled() const { return dec_; }
  const TransformedInteraction& transformed() const { return *T_; }
  const Evolution& tau_phi() const { return *evo_phi_; }
  const Evolution& tau_phi0() const { return *evo_phi0_; }
  const Evolution& tau_psi() const { return *evo_psi_; }
  const Evolution& tau_psi_tilde() const { return *evo_tilde_; }
  const Region& strip() const { return strip_; }
  const Region& w_region() const { return w_region_; }

  /// V_n(t) = sum_Z (id - Pi_strip)(Psi(Z;t)).
  LocalOperator boundary_potential(double t) const {
    const Region amb = T_->closure_union();
    const int d = phi_.local_dim();
    const auto D = Eigen::Index(ipow(d, amb.size()));
    Matrix v = Matrix::Zero(D, D);
    for (const auto& c : *T_->contributions(t)) {
      v += embed(c.delta, amb).matrix();
      if (auto p = tilde_gen_->term(c)) v -= embed(*p, amb).matrix();
    }
    return LocalOperator(amb, amb, std::move(v), d);
  }

  /// W^{(1)}(t) on the W region.
  LocalOperator W(double t) const { return LocalOperator::on(w_region_, joint_state(t)[3], phi_.local_dim()); }

  /// u = tau^{Phi0}_{1,0}(W^{(1)}(0)*).
  LocalOperator u() const { return evo_phi0_->tau(adjoint(W(0.0)), 1.0, 0.0); }

  /// beta = tau^{psi_tilde}_{0,1}.
  LocalOperator beta(const LocalOperator& A) const { return joint_tau(2, A, 0.0, false); }

  /// tau^{Psi}_{t,1} and tau^{psi_tilde}_{t,1} read off the joint flow.
  LocalOperator psi_tau(const LocalOperator& A, double t) const { return joint_tau(1, A, t, false); }
  LocalOperator psi_tilde_tau(const LocalOperator& A, double t) const { return joint_tau(2, A, t, false); }

  std::vector<Probe> probes() const {
    std::mt19937_64 rng(opt_.seed);
    std::vector<Probe> out;
    auto add_zone = [&](const std::string& name, const Region& zone) {
      if (zone.empty()) return;
      std::vector<std::pair<Site, Site>> pairs;
      for (Site a : zone)
        for (Site b : zone)
          if (a < b && dist2(a, b) == 1) pairs.emplace_back(a, b);
      for (int i = 0; i < opt_.probes_per_zone; ++i) {
        Region r;
        if (i % 2 == 1 && !pairs.empty()) {
          const auto& p = pairs[std::uniform_int_distribution<std::size_t>(0, pairs.size() - 1)(rng)];
          r = Region{p.first, p.second};
        } else {
          r = Region{zone[std::uniform_int_distribution<std::size_t>(0, zone.size() - 1)(rng)]};
        }
        LocalOperator A = random_hermitian(r, rng, phi_.local_dim());
        A = cplx(1.0 / op_norm(A)) * A;
        out.push_back({name, std::move(A)});
      }
    };
    add_zone("gamma1", zone_g1_);
    add_zone("gamma2_minus_gamma1", zone_mid_);
    add_zone("gamma2_complement", zone_out_);
    add_zone("off_strip", volume_ - strip_);
    return out;
  }

  FactorizationCertificate certificate() const {
    FactorizationCertificate c;
    c.integrator_tolerance = cfg_.tolerance;
    c.residual_tolerance = opt_.residual_tolerance > 0 ? opt_.residual_tolerance : 1e3 * cfg_.tolerance;
    c.unitarity_tolerance = opt_.unitarity_tolerance > 0 ? opt_.unitarity_tolerance : 10 * cfg_.tolerance;
    c.seed = opt_.seed;
    c.crossing_terms = dec_.phi1.terms().size();
    c.volume_size = volume_.size();
    c.w_region_size = w_region_.size();
    c.zone_g1 = zone_g1_;
    c.zone_mid = zone_mid_;
    c.zone_out = zone_out_;
    c.strip = strip_;

    const auto probe_set = probes();
    c.probe_count = probe_set.size();
    for (double t : opt_.sample_times) c.v_norm_max = std::max(c.v_norm_max, op_norm(boundary_potential(t)));

    for (const Probe& p : probe_set) {
      const LocalOperator& A = p.op;
      for (double t : opt_.sample_times) {
        const LocalOperator lhs = joint_tau(1, A, t, true);
        const LocalOperator rhs = evo_phi_->tau(evo_phi0_->tau_hat(A, t, 1.0), t, 1.0);
        c.residual_ata = std::max(c.residual_ata, op_norm(lhs - rhs));

        const LocalOperator Wt = W(t);
        const LocalOperator www = adjoint(Wt) * psi_tilde_tau(A, t) * Wt;
        c.residual_www = std::max(c.residual_www, op_norm(www - psi_tau(A, t)));
      }
    }

    const LocalOperator uu = u();
    c.u_norm_defect = op_norm(adjoint(uu) * uu - LocalOperator::identity(uu.ambient(), uu.local_dim()));
    c.u_identity_defect = op_norm(uu - LocalOperator::identity(uu.ambient(), uu.local_dim()));

    for (const Probe& p : probe_set) {
      const LocalOperator& A = p.op;
      const LocalOperator target = evo_phi_->tau(A, 1.0, 0.0);
      const LocalOperator ttt = evo_phi0_->tau(psi_tau(A, 0.0), 1.0, 0.0);
      c.residual_ttt = std::max(c.residual_ttt, op_norm(target - ttt));

      const LocalOperator b = beta(A);
      const LocalOperator qf = uu * evo_phi0_->tau(b, 1.0, 0.0) * adjoint(uu);
      c.residual_quasifactor = std::max(c.residual_quasifactor, op_norm(target - qf));

      const double defect = op_norm(b - A);
      c.beta_identity_defect = std::max(c.beta_identity_defect, defect);
      c.beta_isometry_defect = std::max(c.beta_isometry_defect, std::abs(op_norm(b) - op_norm(A)));
      if (!A.support().intersects(strip_)) c.beta_support_defect = std::max(c.beta_support_defect, defect);
    }

    const double floor = 100 * cfg_.tolerance;
    c.chain_consistent = c.residual_ttt <= 10 * (c.residual_ata + floor) &&
                         c.residual_quasifactor <= 10 * (c.residual_ttt + c.residual_www + floor);
    c.valid = c.residual_ata <= c.residual_tolerance && c.residual_www <= c.residual_tolerance &&
              c.residual_ttt <= c.residual_tolerance && c.residual_quasifactor <= c.residual_tolerance &&
              c.beta_support_defect <= c.residual_tolerance && c.u_norm_defect <= c.unitarity_tolerance &&
              c.chain_consistent;
    return c;
  }

  /// Zone invariance of tau^{Phi0}_{1,0} and triviality of beta off the strip, on the given probes.
  SplitShapeReport split_shape_check(const std::vector<LocalOperator>& probe_ops) const {
    SplitShapeReport rep;
    const std::vector<std::pair<std::string, Region>> zones = {
        {"gamma1", zone_g1_}, {"gamma2_minus_gamma1", zone_mid_}, {"gamma2_complement", zone_out_}};
    for (const LocalOperator& A : probe_ops) {
      ZoneDefect row;
      const auto z = std::find_if(zones.begin(), zones.end(), [&](const auto& e) { return A.support().subset_of(e.second); });
      if (z == zones.end()) {
        row.zone = "straddling";
        row.skipped = true;
      } else {
        row.zone = z->first;
        const LocalOperator B = evo_phi0_->tau(A, 1.0, 0.0);
        row.defect = op_norm(cond_expect(B, z->second) - B);
        rep.max_zone_defect = std::max(rep.max_zone_defect, row.defect);
      }
      if (!A.support().intersects(strip_))
        rep.beta_off_strip_defect = std::max(rep.beta_off_strip_defect, op_norm(beta(A) - A));
      rep.rows.push_back(row);
    }
    rep.passed = rep.max_zone_defect <= 10 * cfg_.tolerance && rep.beta_off_strip_defect <= 10 * cfg_.tolerance;
    return rep;
  }

 private:
  // The Psi and psi_tilde propagators and W all need U^Phi(t;1) at every time they are
  // evaluated, so they are integrated together as one system
  //   (U^Phi, U^Psi, U^psi_tilde, W)
  // on the union of the seed closures, which contains every coupling of both Psi generators.
  using JointState = detail::State;

  void joint_rhs(double t, const JointState& y, JointState& dy) const {
    const int d = phi_.local_dim();
    const Region& R = joint_region_;
    const Matrix& uphi = y[0];
    const Matrix hphi = local_hamiltonian(phi_, R, t).matrix();
    const auto evolve = [&](const LocalOperator& seed_op, std::size_t gi) {
      const Region& C = T_->closures()[gi];
      const LocalOperator a = compact(seed_op);
      Matrix m = uphi.adjoint() * apply_left(a.matrix(), a.support(), uphi, R, d);
      m = (m + m.adjoint()) / 2.0;
      const LocalOperator full(R, R, std::move(m), d);
      return LocalOperator(C, C, partial_trace_normalized(full, C), d);
    };
    const auto D = hphi.rows();
    Matrix hpsi = Matrix::Zero(D, D), htilde = Matrix::Zero(D, D);
    for (const auto& c : T_->contributions_with(t, evolve)) {
      hpsi += embed(c.delta, R).matrix();
      if (auto p = tilde_gen_->term(c)) htilde += embed(*p, R).matrix();
    }
    const Matrix k = y[2].adjoint() * (hpsi - htilde) * y[2];
    const cplx mi(0, -1);
    dy.resize(4);
    dy[0] = mi * (hphi * y[0]);
    dy[1] = mi * (hpsi * y[1]);
    dy[2] = mi * (htilde * y[2]);
    dy[3] = mi * (k * y[3]);
  }

  const JointState& joint_state(double t) const {
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("factorization: time outside [0,1]");
    std::lock_guard lock(joint_mu_);
    if (joint_.empty()) {
      const auto D = Eigen::Index(ipow(phi_.local_dim(), joint_region_.size()));
      const Matrix id = Matrix::Identity(D, D);
      joint_.emplace(1.0, JointState{id, id, id, id});
      std::vector<double> stops = opt_.sample_times;
      stops.push_back(0.0);
      std::sort(stops.begin(), stops.end(), std::greater<>());
      for (double s : stops) advance_joint(s);
    }
    if (joint_.find(t) == joint_.end()) advance_joint(t);
    return joint_.at(t);
  }

  // integrates from the nearest recorded time above t
  void advance_joint(double t) const {
    if (joint_.count(t)) return;
    auto it = joint_.upper_bound(t);
    JointState y = it->second;
    if (!joint_region_.empty()) {
      const detail::Derivative f = [this](double tt, const JointState& z, JointState& dz) { joint_rhs(tt, z, dz); };
      detail::extrapolate(f, y, it->first, t, T_->breakpoints(), cfg_, joint_region_.size());
    }
    joint_.emplace(t, std::move(y));
  }

  // component 1 = Psi, 2 = psi_tilde; hat selects U A U*
  LocalOperator joint_tau(int component, const LocalOperator& A, double t, bool hat) const {
    if (joint_region_.empty() || !A.support().intersects(joint_region_) || t == 1.0) return A;
    const int d = A.local_dim();
    const Region amb = joint_region_ | A.ambient();
    const Matrix U = embed(LocalOperator::on(joint_region_, joint_state(t)[std::size_t(component)], d), amb).matrix();
    const Matrix a = embed(A, amb).matrix();
    Matrix r = hat ? Matrix(U * a * U.adjoint()) : Matrix(U.adjoint() * a * U);
    if (A.is_hermitian()) r = (r + r.adjoint()) / 2.0;
    return LocalOperator(amb, amb, std::move(r), d);
  }

  ConeSandwich sw_;
  Region volume_;
  EvolveConfig cfg_;
  FactorizeOptions opt_;
  Interaction phi_;
  Region zone_g1_, zone_mid_, zone_out_, strip_;
  Decoupled dec_;
  std::shared_ptr<Evolution> evo_phi_, evo_phi0_, evo_psi_, evo_tilde_;
  std::shared_ptr<TransformedInteraction> T_;
  std::shared_ptr<PsiGenerator> tilde_gen_;
  Region w_region_, joint_region_;
  mutable std::mutex joint_mu_;
  mutable std::map<double, JointState> joint_;
};

inline FactorizationCertificate factorize(const Interaction& phi, const ConeSandwich& sandwich, const Region& volume,
                                          EvolveConfig cfg = {}, FactorizeOptions opt = {}) {
  return Factorization(phi, sandwich, volume, cfg, std::move(opt)).certificate();
}

inline LocalOperator boundary_potential(const Interaction& phi, const ConeSandwich& sandwich, const Region& volume,
                                        double t, EvolveConfig cfg = {}) {
  return Factorization(phi, sandwich, volume, cfg).boundary_potential(t);
}

}  // namespace quasiloc
