#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"

namespace quasiloc {

struct Site {
  int x = 0;
  int y = 0;
  friend auto operator<=>(const Site&, const Site&) = default;
};

inline std::int64_t dist2(Site a, Site b) {
  const std::int64_t dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

inline double distance(Site a, Site b) { return std::sqrt(double(dist2(a, b))); }

/// Finite site set, kept sorted (lexicographic in (x, y)) and duplicate free.
/// The sort order fixes the tensor leg order of every operator on the region.
class Region {
 public:
  Region() = default;
  Region(std::initializer_list<Site> s) : sites_(s) { canonicalize(); }
  explicit Region(std::vector<Site> s) : sites_(std::move(s)) { canonicalize(); }

  const std::vector<Site>& sites() const { return sites_; }
  std::size_t size() const { return sites_.size(); }
  bool empty() const { return sites_.empty(); }
  auto begin() const { return sites_.begin(); }
  auto end() const { return sites_.end(); }
  const Site& operator[](std::size_t i) const { return sites_[i]; }

  bool contains(Site s) const { return std::binary_search(sites_.begin(), sites_.end(), s); }

  std::optional<std::size_t> index_of(Site s) const {
    auto it = std::lower_bound(sites_.begin(), sites_.end(), s);
    if (it == sites_.end() || *it != s) return std::nullopt;
    return std::size_t(it - sites_.begin());
  }

  bool subset_of(const Region& o) const {
    return std::includes(o.sites_.begin(), o.sites_.end(), sites_.begin(), sites_.end());
  }

  bool intersects(const Region& o) const {
    auto a = sites_.begin(), b = o.sites_.begin();
    while (a != sites_.end() && b != o.sites_.end()) {
      if (*a < *b) ++a;
      else if (*b < *a) ++b;
      else return true;
    }
    return false;
  }

  friend Region operator|(const Region& a, const Region& b) {
    Region r;
    r.sites_.reserve(a.size() + b.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(r.sites_));
    return r;
  }
  friend Region operator&(const Region& a, const Region& b) {
    Region r;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(r.sites_));
    return r;
  }
  friend Region operator-(const Region& a, const Region& b) {
    Region r;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(r.sites_));
    return r;
  }
  friend bool operator==(const Region&, const Region&) = default;
  friend bool operator<(const Region& a, const Region& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a.sites_ < b.sites_;
  }

  template <class Pred>
  Region filter(Pred&& keep) const {
    Region r;
    for (const Site& s : sites_)
      if (keep(s)) r.sites_.push_back(s);
    return r;
  }

 private:
  void canonicalize() {
    std::sort(sites_.begin(), sites_.end());
    sites_.erase(std::unique(sites_.begin(), sites_.end()), sites_.end());
  }
  std::vector<Site> sites_;
};

inline double set_distance(const Region& X, const Region& Y) {
  if (X.empty() || Y.empty()) throw DomainError("set_distance: empty region");
  std::int64_t best = INT64_MAX;
  for (Site a : X)
    for (Site b : Y) best = std::min(best, dist2(a, b));
  return std::sqrt(double(best));
}

inline double diameter(const Region& X) {
  std::int64_t best = 0;
  for (Site a : X)
    for (Site b : X) best = std::max(best, dist2(a, b));
  return std::sqrt(double(best));
}

// Sites of V within distance m of X. No truncation box involved.
inline Region fatten_within(const Region& X, double m, const Region& V) {
  const double m2 = m * m + 1e-9;
  return V.filter([&](Site v) {
    for (Site x : X)
      if (double(dist2(v, x)) <= m2) return true;
    return false;
  });
}

/// Closed cone {p : angle(p - apex, axis) <= half_angle}; the apex itself belongs to it.
struct Cone {
  double apex_x = 0.0;
  double apex_y = 0.0;
  double axis_angle = 0.0;
  double half_angle = std::numbers::pi / 4;

  static constexpr double angle_slack = 1e-12;

  bool contains(double px, double py) const {
    const double vx = px - apex_x, vy = py - apex_y;
    if (std::hypot(vx, vy) < 1e-12) return true;
    const double ax = std::cos(axis_angle), ay = std::sin(axis_angle);
    const double ang = std::atan2(std::abs(ax * vy - ay * vx), ax * vx + ay * vy);
    return ang <= half_angle + angle_slack;
  }
  bool contains(Site s) const { return contains(double(s.x), double(s.y)); }

  double apex_distance(Site s) const { return std::hypot(s.x - apex_x, s.y - apex_y); }
};

struct LatticeConfig {
  int dimension = 2;
  int truncation_radius = 10;

  void validate() const {
    if (dimension != 1 && dimension != 2) throw DomainError("lattice dimension must be 1 or 2");
    if (truncation_radius < 1) throw DomainError("truncation_radius must be >= 1");
  }

  bool in_box(Site s) const {
    if (dimension == 1 && s.y != 0) return false;
    return std::abs(s.x) <= truncation_radius && std::abs(s.y) <= truncation_radius;
  }

  Region box() const {
    validate();
    std::vector<Site> v;
    const int R = truncation_radius;
    const int ylim = dimension == 2 ? R : 0;
    for (int x = -R; x <= R; ++x)
      for (int y = -ylim; y <= ylim; ++y) v.push_back({x, y});
    return Region(std::move(v));
  }

  Region ball(Site c, double n) const {
    validate();
    if (n < 0) throw DomainError("ball: negative radius");
    if (!in_box(c)) throw DomainError("ball: centre outside truncation");
    const int k = int(std::floor(n + 1e-12));
    const int ylim = dimension == 2 ? k : 0;
    if (std::abs(c.x) + k > truncation_radius || std::abs(c.y) + ylim > truncation_radius)
      throw TruncationOverflow("ball of radius " + std::to_string(n) + " around (" + std::to_string(c.x) +
                               "," + std::to_string(c.y) + ") exceeds truncation radius " +
                               std::to_string(truncation_radius));
    const double n2 = n * n + 1e-9;
    std::vector<Site> v;
    for (int dx = -k; dx <= k; ++dx)
      for (int dy = -ylim; dy <= ylim; ++dy)
        if (double(dx * dx + dy * dy) <= n2) v.push_back({c.x + dx, c.y + dy});
    return Region(std::move(v));
  }

  Region fatten(const Region& X, int m) const {
    if (X.empty()) throw DomainError("fatten: empty region");
    if (m < 0) throw DomainError("fatten: negative m");
    if (m == 0) return X;
    std::vector<Site> v;
    for (Site x : X) {
      Region b = ball(x, m);
      v.insert(v.end(), b.begin(), b.end());
    }
    return Region(std::move(v));
  }

  Region cone_region(const Cone& c, double radius) const {
    validate();
    if (!(c.half_angle > 0)) throw DomainError("cone_region: half_angle must be positive");
    if (radius > truncation_radius) throw TruncationOverflow("cone_region: radius exceeds truncation radius");
    return box().filter([&](Site s) { return c.apex_distance(s) <= radius + 1e-12 && c.contains(s); });
  }
};

// Smallest kappa with |b_0(n)| <= kappa n^dim for 1 <= n <= n_max.
inline double regularity_constant(int n_max, int dimension = 2) {
  if (n_max < 1) throw DomainError("regularity_constant: n_max must be >= 1");
  double kappa = 0;
  for (int n = 1; n <= n_max; ++n) {
    std::int64_t count = 0;
    if (dimension == 1) {
      count = 2 * n + 1;
    } else {
      for (int dx = -n; dx <= n; ++dx)
        for (int dy = -n; dy <= n; ++dy)
          if (dx * dx + dy * dy <= n * n) ++count;
    }
    kappa = std::max(kappa, double(count) / std::pow(double(n), dimension));
  }
  return kappa;
}

}  // namespace quasiloc
