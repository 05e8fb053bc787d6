#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "quasiloc.hpp"

namespace quasiloc::io {

using nlohmann::json;

// Infinite and NaN values become strings; JSON has no literal for them.
inline json num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline json to_json(Site s) { return json::array({s.x, s.y}); }

inline json to_json(const Region& r) {
  json a = json::array();
  for (Site s : r) a.push_back(to_json(s));
  return a;
}

inline json to_json(const Cone& c) {
  return {{"apex", {c.apex_x, c.apex_y}}, {"axis", c.axis_angle}, {"half_angle", c.half_angle}};
}

inline json to_json(const TailBound& b) {
  return {{"lower", num(b.lower())}, {"upper", num(b.upper())}, {"log_upper", num(b.log_upper())},
          {"cut_radius", b.cut_radius}};
}

inline json to_json(const FFunction& F) { return {{"s", F.s()}, {"weighted", F.weighted()}, {"nu", F.nu()}}; }

inline json to_json(const Matrix& m) {
  json re = json::array(), im = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array(), c = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      r.push_back(m(i, j).real());
      c.push_back(m(i, j).imag());
    }
    re.push_back(std::move(r));
    im.push_back(std::move(c));
  }
  return {{"re", re}, {"im", im}};
}

inline json to_json(const TimeProfile& g) { return {{"breaks", g.breaks()}, {"coeffs", g.coeffs()}}; }

inline json to_json(const Interaction& phi) {
  json terms = json::array();
  for (const auto& t : phi.terms())
    terms.push_back({{"region", to_json(t.region)}, {"op", to_json(t.op)}, {"profile", to_json(t.profile)}});
  return {{"local_dim", phi.local_dim()}, {"terms", terms}};
}

/// Reads values out of a JSON tree, reporting failures with the field path.
class Reader {
 public:
  Reader(const json& j, std::string path = "") : j_(j), path_(std::move(path)) {}

  const json& raw() const { return j_; }
  const std::string& path() const { return path_; }
  bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }

  Reader at(const std::string& key) const {
    if (!j_.is_object()) fail("expected a table");
    if (!j_.contains(key)) throw ConfigError(join(key) + ": missing required field");
    return Reader(j_.at(key), join(key));
  }
  Reader at(std::size_t i) const {
    if (!j_.is_array()) fail("expected an array");
    if (i >= j_.size()) fail("index out of range");
    return Reader(j_.at(i), path_ + "[" + std::to_string(i) + "]");
  }
  std::size_t size() const {
    if (!j_.is_array()) fail("expected an array");
    return j_.size();
  }

  double number() const {
    if (!j_.is_number()) fail("expected a number");
    return j_.get<double>();
  }
  std::int64_t integer() const {
    if (!j_.is_number_integer()) fail("expected an integer");
    return j_.get<std::int64_t>();
  }
  std::uint64_t unsigned_integer() const {
    if (!j_.is_number_integer() || (j_.is_number_integer() && !j_.is_number_unsigned() && j_.get<std::int64_t>() < 0))
      fail("expected a non-negative integer");
    return j_.get<std::uint64_t>();
  }
  bool boolean() const {
    if (!j_.is_boolean()) fail("expected a boolean");
    return j_.get<bool>();
  }
  std::string string() const {
    if (!j_.is_string()) fail("expected a string");
    return j_.get<std::string>();
  }

  double number_or(const std::string& key, double dflt) const { return has(key) ? at(key).number() : dflt; }
  std::int64_t integer_or(const std::string& key, std::int64_t dflt) const { return has(key) ? at(key).integer() : dflt; }
  std::uint64_t unsigned_or(const std::string& key, std::uint64_t dflt) const {
    return has(key) ? at(key).unsigned_integer() : dflt;
  }
  bool boolean_or(const std::string& key, bool dflt) const { return has(key) ? at(key).boolean() : dflt; }
  std::string string_or(const std::string& key, const std::string& dflt) const {
    return has(key) ? at(key).string() : dflt;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ConfigError((path_.empty() ? "<root>" : path_) + ": " + what); }

 private:
  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const json& j_;
  std::string path_;
};

inline Site site_from(const Reader& r) {
  if (r.size() != 2) r.fail("a site is [x, y]");
  return {int(r.at(0).integer()), int(r.at(1).integer())};
}

inline Region region_from(const Reader& r) {
  std::vector<Site> v;
  for (std::size_t i = 0; i < r.size(); ++i) v.push_back(site_from(r.at(i)));
  return Region(std::move(v));
}

inline Cone cone_from(const Reader& r) {
  Cone c;
  const Reader apex = r.at("apex");
  if (apex.size() != 2) apex.fail("apex is [x, y]");
  c.apex_x = apex.at(0).number();
  c.apex_y = apex.at(1).number();
  c.axis_angle = r.number_or("axis", 0.0);
  c.half_angle = r.at("half_angle").number();
  if (!(c.half_angle > 0 && c.half_angle < std::numbers::pi)) r.at("half_angle").fail("must lie in (0, pi)");
  return c;
}

inline Matrix matrix_from(const Reader& r, Eigen::Index D) {
  if (r.has("pauli")) {
    const std::string labels = r.at("pauli").string();
    if (Eigen::Index(ipow(2, labels.size())) != D) r.at("pauli").fail("label length does not match the region");
    try {
      return r.number_or("coefficient", 1.0) * pauli_string(labels);
    } catch (const DomainError& e) {
      r.at("pauli").fail(e.what());
    }
  }
  const Reader re = r.at("re");
  const bool has_im = r.has("im");
  if (Eigen::Index(re.size()) != D) re.fail("expected " + std::to_string(D) + " rows");
  Matrix m(D, D);
  for (Eigen::Index i = 0; i < D; ++i) {
    const Reader row = re.at(std::size_t(i));
    if (Eigen::Index(row.size()) != D) row.fail("expected " + std::to_string(D) + " columns");
    for (Eigen::Index j = 0; j < D; ++j) {
      const double im = has_im ? r.at("im").at(std::size_t(i)).at(std::size_t(j)).number() : 0.0;
      m(i, j) = cplx(row.at(std::size_t(j)).number(), im);
    }
  }
  return m;
}

inline TimeProfile profile_from(const Reader& r) {
  std::vector<double> breaks;
  std::vector<std::vector<double>> coeffs;
  const Reader b = r.at("breaks"), c = r.at("coeffs");
  for (std::size_t i = 0; i < b.size(); ++i) breaks.push_back(b.at(i).number());
  for (std::size_t i = 0; i < c.size(); ++i) {
    std::vector<double> piece;
    for (std::size_t k = 0; k < c.at(i).size(); ++k) piece.push_back(c.at(i).at(k).number());
    coeffs.push_back(std::move(piece));
  }
  try {
    return TimeProfile(std::move(breaks), std::move(coeffs));
  } catch (const DomainError& e) {
    r.fail(e.what());
  }
}

inline Interaction interaction_from(const Reader& r) {
  const int d = int(r.integer_or("local_dim", 2));
  if (d < 2 || d > 4) r.at("local_dim").fail("must lie in [2, 4]");
  Interaction phi(d);
  const Reader terms = r.at("terms");
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const Reader t = terms.at(i);
    const Region region = region_from(t.at("region"));
    if (region.empty()) t.at("region").fail("empty region");
    const Matrix op = matrix_from(t.at("op"), Eigen::Index(ipow(d, region.size())));
    const TimeProfile g = t.has("profile") ? profile_from(t.at("profile")) : TimeProfile::constant(1.0);
    try {
      phi.add(region, op, g);
    } catch (const DomainError& e) {
      t.fail(e.what());
    }
  }
  return phi;
}

inline Interaction read_interaction_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open interaction file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return interaction_from(Reader(j, ""));
}

/// A named model together with the sites it lives on.
struct Model {
  Interaction phi;
  Region sites;
};

inline Region model_sites(const Reader& p, int default_chain) {
  const auto width = p.integer_or("width", 0);
  if (width > 0) return rectangle(int(width), int(p.integer_or("height", 1)));
  const auto n = p.integer_or("sites", default_chain);
  if (n < 1) p.at("sites").fail("must be >= 1");
  return chain(int(n));
}

/// Builds a catalog generator; `zones` is used by the zone-respecting variant.
inline Model build_generator(const std::string& name, const Reader& p, const std::vector<Region>& zones = {}) {
  auto spec = std::find_if(generator_catalog().begin(), generator_catalog().end(),
                           [&](const GeneratorSpec& g) { return g.name == name; });
  if (spec == generator_catalog().end()) throw ConfigError("unknown generator '" + name + "'");
  if (p.raw().is_object())
    for (const auto& [key, _] : p.raw().items())
      if (std::none_of(spec->fields.begin(), spec->fields.end(), [&](const FieldSpec& f) { return f.name == key; }))
        throw ConfigError((p.path().empty() ? key : p.path() + "." + key) + ": unknown field for generator " + name);

  RandomTwoLocalOptions opt;
  opt.bond_scale = p.number_or("bond_scale", 1.0);
  opt.field_scale = p.number_or("field_scale", 0.5);
  opt.time_dependent = p.boolean_or("time_dependent", false);
  if (p.has("bond_columns")) {
    const Reader cols = p.at("bond_columns");
    for (std::size_t i = 0; i < cols.size(); ++i) opt.bond_columns.push_back(int(cols.at(i).integer()));
  }
  if (name == "tfim") {
    Region s = model_sites(p, 10);
    return {tfim(s, p.number_or("J", 1.0), p.number_or("h", 1.0)), s};
  }
  if (name == "random-2local") {
    Region s = model_sites(p, 6);
    return {random_two_local(s, p.unsigned_or("seed", 1), opt), s};
  }
  if (name == "random-2local-zoned") {
    Region s = model_sites(p, 8);
    if (zones.empty()) throw ConfigError(p.path() + ": zone-respecting generator needs a sandwich");
    return {zone_respecting(s, zones, p.unsigned_or("seed", 1), opt), s};
  }
  if (name == "commuting-zz") {
    Region s = chain(int(p.integer_or("sites", 6)));
    return {commuting_zz(s, p.number_or("J", 1.0), p.number_or("h", 0.5)), s};
  }
  Region s = rectangle(int(p.integer_or("width", 4)), int(p.integer_or("height", 2)));
  return {nearest_neighbor(s, p.number_or("coupling", 1.0)), s};
}

inline json catalog_json() {
  json out = json::array();
  for (const auto& g : generator_catalog()) {
    json fields = json::array();
    for (const auto& f : g.fields)
      fields.push_back({{"name", f.name}, {"type", f.type}, {"default", f.default_value}, {"description", f.description}});
    out.push_back({{"name", g.name}, {"description", g.description}, {"fields", fields}});
  }
  return out;
}

/// CSV with a fixed column list; numbers are printed with %.17g so reruns are byte-identical.
class CsvWriter {
 public:
  CsvWriter(std::ostream& os, std::vector<std::string> columns) : os_(os), n_(columns.size()) {
    for (std::size_t i = 0; i < columns.size(); ++i) os_ << (i ? "," : "") << columns[i];
    os_ << '\n';
  }

  struct Cell {
    std::string text;
    Cell(double v) : text(format(v)) {}
    Cell(int v) : text(std::to_string(v)) {}
    Cell(long v) : text(std::to_string(v)) {}
    Cell(long long v) : text(std::to_string(v)) {}
    Cell(unsigned long v) : text(std::to_string(v)) {}
    Cell(unsigned long long v) : text(std::to_string(v)) {}
    Cell(bool v) : text(v ? "true" : "false") {}
    Cell(const char* s) : text(s) {}
    Cell(std::string s) : text(std::move(s)) {}
  };

  void row(std::initializer_list<Cell> cells) {
    if (cells.size() != n_) throw DomainError("CsvWriter: wrong number of cells");
    bool first = true;
    for (const Cell& c : cells) {
      os_ << (first ? "" : ",") << c.text;
      first = false;
    }
    os_ << '\n';
  }

  static std::string format(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }

 private:
  std::ostream& os_;
  std::size_t n_;
};

inline json to_json(const BoundCheck& c) {
  return {{"measured", num(c.measured)}, {"log_bound", num(c.log_bound)}, {"bound", num(c.bound)},
          {"log_margin", num(c.margin)}, {"satisfied", c.satisfied}, {"flagged", c.flagged}};
}

inline json to_json(const GeometryReport& g) {
  return {{"d0", num(g.d0)},
          {"n0", g.n0},
          {"shell_width", num(g.shell_width)},
          {"shell_origin", num(g.shell_origin)},
          {"gamma0", num(g.gamma0)},
          {"d_gamma0", num(g.d_gamma0)},
          {"gamma1_gap", num(g.gamma1_gap)},
          {"n_samples", g.n_samples},
          {"gamma_samples", g.gamma_samples},
          {"d_gamma1_samples", g.d_gamma1_samples}};
}

inline json to_json(const ConePairConfig& c) {
  return {{"alpha", c.alpha}, {"beta", c.beta},   {"epsilon", c.epsilon}, {"d2", c.d2},         {"d1", c.d1},
          {"d2p", c.d2p},     {"d_phi", c.d_phi}, {"c_count", c.c_count}, {"M", c.M},           {"apex", {c.apex_x, c.apex_y}},
          {"axis", c.axis},   {"gamma1", to_json(c.gamma1())}, {"gamma2", to_json(c.gamma2())},
          {"gamma1p", to_json(c.gamma1p())}, {"gamma2p", to_json(c.gamma2p())}};
}

inline json to_json(const SummabilityCertificate& s) {
  return {{"finite_pair_sum", num(s.finite_pair_sum)},
          {"finite_pair_lower", num(s.finite_pair_lower)},
          {"ball_sum", num(s.ball_sum)},
          {"ball_lower", num(s.ball_lower)},
          {"shell_sum_partial", num(s.shell_sum_partial)},
          {"shell_partial_lower", num(s.shell_partial_lower)},
          {"shell_tail_upper", num(s.shell_tail_upper)},
          {"total_upper", num(s.total_upper)},
          {"total_lower", num(s.total_lower)},
          {"c_p", num(s.c_p)},
          {"shells", s.shells},
          {"ball_count", s.ball_count},
          {"shell_distances_ok", s.shell_distances_ok},
          {"shells_within_bound", s.shells_within_bound},
          {"converged", s.converged},
          {"geometry", to_json(s.geometry)},
          {"cones", to_json(s.config)}};
}

inline void write_shell_csv(std::ostream& os, const SummabilityCertificate& s) {
  CsvWriter w(os, {"k", "r_inner", "r_outer", "lower", "upper", "bound", "pairs", "min_strip_distance"});
  for (const ShellRow& r : s.rows)
    w.row({r.k, r.r_inner, r.r_outer, r.lower, r.upper, r.bound, (unsigned long long)r.pairs, r.min_strip_distance});
}

inline json to_json(const FactorizationCertificate& c) {
  return {{"residual_ata", num(c.residual_ata)},
          {"residual_www", num(c.residual_www)},
          {"residual_ttt", num(c.residual_ttt)},
          {"residual_quasifactor", num(c.residual_quasifactor)},
          {"u_norm_defect", num(c.u_norm_defect)},
          {"u_identity_defect", num(c.u_identity_defect)},
          {"beta_support_defect", num(c.beta_support_defect)},
          {"beta_identity_defect", num(c.beta_identity_defect)},
          {"beta_isometry_defect", num(c.beta_isometry_defect)},
          {"v_norm_max", num(c.v_norm_max)},
          {"integrator_tolerance", c.integrator_tolerance},
          {"residual_tolerance", c.residual_tolerance},
          {"unitarity_tolerance", c.unitarity_tolerance},
          {"chain_consistent", c.chain_consistent},
          {"valid", c.valid},
          {"probe_count", c.probe_count},
          {"crossing_terms", c.crossing_terms},
          {"seed", c.seed},
          {"volume_size", c.volume_size},
          {"w_region_size", c.w_region_size},
          {"zones",
           {{"gamma1", to_json(c.zone_g1)},
            {"gamma2_minus_gamma1", to_json(c.zone_mid)},
            {"gamma2_complement", to_json(c.zone_out)},
            {"strip", to_json(c.strip)}}}};
}

}  // namespace quasiloc::io
