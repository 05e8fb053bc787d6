#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <toml.hpp>

#include "io.hpp"
#include "quasiloc.hpp"

namespace quasiloc::cli {

using io::json;
using io::Reader;

enum Exit : int { kPass = 0, kOperational = 1, kAssertion = 2 };

struct RunOptions {
  std::filesystem::path out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  std::filesystem::path base_dir = ".";  // relative interaction files resolve against this
  std::ostream* log = &std::cout;
};

struct RunResult {
  int exit_code = kPass;
  std::string message;
  json report;
  std::vector<std::filesystem::path> files;
};

inline json toml_to_json(const toml::node& n) {
  if (auto t = n.as_table()) {
    json o = json::object();
    for (auto&& [k, v] : *t) o[std::string(k.str())] = toml_to_json(v);
    return o;
  }
  if (auto a = n.as_array()) {
    json o = json::array();
    for (auto&& v : *a) o.push_back(toml_to_json(v));
    return o;
  }
  if (auto v = n.as_integer()) return v->get();
  if (auto v = n.as_floating_point()) return v->get();
  if (auto v = n.as_boolean()) return v->get();
  if (auto v = n.as_string()) return v->get();
  throw ConfigError("unsupported TOML value (dates and times are not accepted)");
}

inline json load_config(const std::filesystem::path& path) {
  try {
    const toml::table t = toml::parse_file(path.string());
    return toml_to_json(t);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << path.string() << ":" << e.source().begin.line << ": " << e.description();
    throw ConfigError(os.str());
  }
}

namespace detail {

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> s = {"lr-check", "transform-check", "factorize", "summability", "geometry", "gf-suite"};
  return s;
}

inline EvolveConfig evolve_config(const Reader& root, const RunOptions& opt) {
  EvolveConfig cfg;
  if (root.has("tolerances")) {
    const Reader t = root.at("tolerances");
    cfg.tolerance = t.number_or("integrator", cfg.tolerance);
    const std::string m = t.string_or("method", "automatic");
    if (m == "automatic") cfg.method = EvolveConfig::Method::automatic;
    else if (m == "rk4") cfg.method = EvolveConfig::Method::rk4;
    else if (m == "extrapolation") cfg.method = EvolveConfig::Method::extrapolation;
    else if (m == "spectral") cfg.method = EvolveConfig::Method::spectral;
    else t.at("method").fail("expected automatic, rk4, extrapolation or spectral");
  }
  if (opt.tol) cfg.tolerance = *opt.tol;
  try {
    cfg.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("tolerances.integrator: ") + e.what());
  }
  return cfg;
}

inline LatticeConfig lattice_config(const Reader& root) {
  LatticeConfig lat;
  if (root.has("lattice")) {
    const Reader l = root.at("lattice");
    lat.dimension = int(l.integer_or("dimension", 2));
    lat.truncation_radius = int(l.integer_or("truncation_radius", 10));
  }
  try {
    lat.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("lattice: ") + e.what());
  }
  return lat;
}

inline FFunction f_function(const Reader& r) {
  try {
    return FFunction(r.at("s").number(), r.boolean_or("weighted", true), int(r.integer_or("nu", 2)));
  } catch (const DomainError& e) {
    r.fail(e.what());
  } catch (const DivergenceError& e) {
    r.fail(e.what());
  }
}

inline io::Model model(const Reader& root, const RunOptions& opt, const std::vector<Region>& zones = {}) {
  const Reader m = root.at("interaction");
  if (m.has("file")) {
    std::filesystem::path p = m.at("file").string();
    if (p.is_relative()) p = opt.base_dir / p;
    Interaction phi = io::read_interaction_file(p.string());
    Region sites = m.has("volume") ? io::region_from(m.at("volume")) : phi.sites();
    return {std::move(phi), std::move(sites)};
  }
  const std::string name = m.at("generator").string();
  json params = m.has("params") ? m.at("params").raw() : json::object();
  if (opt.seed && (name == "random-2local" || name == "random-2local-zoned")) params["seed"] = *opt.seed;
  return io::build_generator(name, Reader(params, "interaction.params"), zones);
}

inline std::ofstream open_out(const RunOptions& opt, const std::string& name, RunResult& res) {
  std::filesystem::create_directories(opt.out_dir);
  const auto path = opt.out_dir / name;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path.string());
  res.files.push_back(path);
  return os;
}

inline LocalOperator unit_probe(const Region& r, std::mt19937_64& rng, int d) {
  LocalOperator A = random_hermitian(r, rng, d);
  return cplx(1.0 / op_norm(A)) * A;
}

inline ConePairConfig cone_pair(const Reader& c) {
  ConePairConfig p;
  const double deg = std::numbers::pi / 180;
  auto angle = [&](const char* rad, const char* degs, double dflt) {
    if (c.has(rad)) return c.at(rad).number();
    if (c.has(degs)) return c.at(degs).number() * deg;
    return dflt;
  };
  p.alpha = angle("alpha", "alpha_deg", p.alpha);
  p.beta = angle("beta", "beta_deg", p.beta);
  p.epsilon = angle("epsilon", "epsilon_deg", p.epsilon);
  p.d2 = c.number_or("d2", p.d2);
  p.d1 = c.number_or("d1", p.d1);
  p.d2p = c.number_or("d2p", p.d2p);
  p.d_phi = c.number_or("d_phi", p.d_phi);
  p.c_count = c.number_or("c_count", p.c_count);
  p.M = c.number_or("M", p.M);
  return p;
}

// ---------------------------------------------------------------------------

inline RunResult lr_check_cmd(const Reader& root, const RunOptions& opt) {
  RunResult res;
  const EvolveConfig cfg = evolve_config(root, opt);
  const io::Model mdl = model(root, opt);
  const Reader lr = root.at("lr");
  const FFunction F = f_function(lr.at("F"));
  const Region A_reg = io::region_from(lr.at("A")), B_reg = io::region_from(lr.at("B"));
  std::mt19937_64 rng(opt.seed.value_or(lr.unsigned_or("seed", 1)));
  const int d = mdl.phi.local_dim();
  if (A_reg.empty() || B_reg.empty()) lr.fail("A and B must be non-empty");
  const LocalOperator A = unit_probe(A_reg, rng, d), B = unit_probe(B_reg, rng, d);
  if (A_reg.intersects(B_reg)) throw DomainError("lr_check: supports of A and B overlap");
  const Evolution evo(make_generator(mdl.phi, mdl.sites), cfg);
  const BoundContext ctx(mdl.phi, F);

  std::vector<std::pair<double, double>> times;
  const Reader tl = lr.at("times");
  for (std::size_t i = 0; i < tl.size(); ++i) {
    const Reader pair = tl.at(i);
    if (pair.size() != 2) pair.fail("each entry is [t, s]");
    times.emplace_back(pair.at(0).number(), pair.at(1).number());
  }
  std::vector<int> ms;
  if (lr.has("delta_ms"))
    for (std::size_t i = 0; i < lr.at("delta_ms").size(); ++i) ms.push_back(int(lr.at("delta_ms").at(i).integer()));

  bool pass = true;
  auto os = open_out(opt, "lr_check.csv", res);
  io::CsvWriter w(os, {"kind", "t", "s", "m", "distance", "measured", "bound", "log_margin", "satisfied"});
  json rows = json::array();
  for (auto [t, s] : times) {
    const LrSample smp = lr_check(evo, ctx, A, B, t, s);
    pass = pass && smp.check.satisfied;
    w.row({"commutator", t, s, -1, smp.distance, smp.check.measured, smp.check.bound, smp.check.margin, smp.check.satisfied});
    for (const DeltaRow& r : delta_decay_check(evo, ctx, A, A_reg, t, s, ms)) {
      pass = pass && r.check.satisfied;
      w.row({r.applicable ? "delta" : "delta_m0", t, s, r.m, double(r.m), r.check.measured, r.check.bound, r.check.margin,
             r.check.satisfied});
    }
  }
  res.report = {{"F", io::to_json(F)},
                {"c_f", io::to_json(ctx.cf)},
                {"i_phi", io::num(ctx.i_phi)},
                {"samples", times.size()},
                {"pass", pass}};
  res.exit_code = pass ? kPass : kAssertion;
  return res;
}

inline RunResult transform_check_cmd(const Reader& root, const RunOptions& opt) {
  RunResult res;
  const EvolveConfig cfg = evolve_config(root, opt);
  const io::Model mdl = model(root, opt);
  const Reader tc = root.at("transform");
  const double s = tc.number_or("s", 1.0);
  const double limit = tc.number_or("residual_max", 1e3 * cfg.tolerance);
  const std::uint64_t seed = opt.seed.value_or(tc.unsigned_or("seed", 2));
  RandomTwoLocalOptions ro;
  ro.time_dependent = tc.boolean_or("seed_time_dependent", true);
  const Interaction seed_phi = random_two_local(mdl.sites, seed, ro);
  auto base = std::make_shared<Evolution>(make_generator(mdl.phi, mdl.sites), cfg);
  const TransformedInteraction T(base, seed_phi, s);

  std::vector<double> times;
  const Reader tl = tc.at("times");
  for (std::size_t i = 0; i < tl.size(); ++i) times.push_back(tl.at(i).number());
  bool pass = true;
  double worst = 0;
  auto os = open_out(opt, "transform_check.csv", res);
  io::CsvWriter w(os, {"t", "residual", "limit", "pass"});
  for (double t : times) {
    const double r = psio_residual(T, t);
    worst = std::max(worst, r);
    pass = pass && r <= limit;
    w.row({t, r, limit, r <= limit});
  }
  res.report = {{"max_residual", io::num(worst)}, {"limit", limit}, {"seed", seed}, {"pass", pass}};
  res.exit_code = pass ? kPass : kAssertion;
  return res;
}

inline RunResult factorize_cmd(const Reader& root, const RunOptions& opt) {
  RunResult res;
  const EvolveConfig cfg = evolve_config(root, opt);
  const Reader sw = root.at("sandwich");
  const ConeSandwich sandwich{io::cone_from(sw.at("gamma1p")), io::cone_from(sw.at("gamma1")),
                              io::cone_from(sw.at("gamma2")), io::cone_from(sw.at("gamma2p"))};
  // zones for the zone-respecting generator are resolved on a generous box
  std::vector<Region> zones;
  {
    const LatticeConfig lat = lattice_config(root);
    const Region box = lat.box();
    const Region g1 = box.filter([&](Site s) { return sandwich.in_g1(s); });
    const Region g2 = box.filter([&](Site s) { return sandwich.in_g2(s); });
    zones = {g1, g2 - g1, box - g2};
  }
  const io::Model mdl = model(root, opt, zones);
  FactorizeOptions fo;
  if (root.has("factorize")) {
    const Reader f = root.at("factorize");
    fo.seed = f.unsigned_or("probe_seed", fo.seed);
    fo.probes_per_zone = int(f.integer_or("probes_per_zone", fo.probes_per_zone));
    fo.residual_tolerance = f.number_or("residual_tolerance", 0.0);
    fo.unitarity_tolerance = f.number_or("unitarity_tolerance", 0.0);
  }
  if (opt.seed) fo.seed = *opt.seed;
  const FactorizationCertificate cert = factorize(mdl.phi, sandwich, mdl.sites, cfg, fo);
  auto os = open_out(opt, "factorize.csv", res);
  io::CsvWriter w(os, {"quantity", "value", "tolerance", "pass"});
  auto line = [&](const char* q, double v, double tol) { w.row({q, v, tol, v <= tol}); };
  line("residual_ata", cert.residual_ata, cert.residual_tolerance);
  line("residual_www", cert.residual_www, cert.residual_tolerance);
  line("residual_ttt", cert.residual_ttt, cert.residual_tolerance);
  line("residual_quasifactor", cert.residual_quasifactor, cert.residual_tolerance);
  line("beta_support_defect", cert.beta_support_defect, cert.residual_tolerance);
  line("u_norm_defect", cert.u_norm_defect, cert.unitarity_tolerance);
  res.report = io::to_json(cert);
  res.exit_code = cert.valid ? kPass : kAssertion;
  res.message = std::string(cert.valid ? "PASS" : "FAIL") + " factorize: ata=" + io::CsvWriter::format(cert.residual_ata) +
                " www=" + io::CsvWriter::format(cert.residual_www) + " ttt=" + io::CsvWriter::format(cert.residual_ttt) +
                " quasifactor=" + io::CsvWriter::format(cert.residual_quasifactor);
  return res;
}

inline RunResult summability_cmd(const Reader& root, const RunOptions& opt) {
  RunResult res;
  const LatticeConfig lat = lattice_config(root);
  const Reader sc = root.at("summability");
  const FFunction F = sc.has("F") ? f_function(sc.at("F")) : FFunction(3.0, true, 2);
  const int K = int(sc.integer_or("shells", 8));
  const std::string mode = sc.string_or("mode", "theorem");
  ConePairConfig c;
  if (mode == "theorem") {
    const Cone g1 = io::cone_from(sc.at("gamma1")), g2 = io::cone_from(sc.at("gamma2"));
    c = theorem_config(g1, g2, sc.number_or("d_phi", 1.0), sc.number_or("c_count", 2.0), sc.number_or("M", 1.0),
                       sc.number_or("d1", 1.0), sc.number_or("d2p", 1.0));
  } else if (mode == "anan") {
    c = cone_pair(sc.at("cones"));
  } else {
    sc.at("mode").fail("expected theorem or anan");
  }
  c.validate();
  Interaction phi;
  if (root.has("interaction")) {
    phi = model(root, opt).phi;
  } else {
    const GeometryReport g = build_geometry(c);
    const double radius = g.shell_origin + (K + 1) * g.shell_width + c.d_phi;
    phi = nearest_neighbor(boundary_band(c, radius, c.d_phi), sc.number_or("coupling", 1.0));
  }
  const SummabilityCertificate cert = certify_anan(phi, c, lat, F, K);
  auto os = open_out(opt, "summability_shells.csv", res);
  io::write_shell_csv(os, cert);
  res.report = io::to_json(cert);
  res.report["F"] = io::to_json(F);
  res.exit_code = cert.converged ? kPass : kAssertion;
  res.message = std::string(cert.converged ? "PASS" : "FAIL") + " summability: total_upper=" +
                io::CsvWriter::format(cert.total_upper);
  return res;
}

inline RunResult geometry_cmd(const Reader& root, const RunOptions& opt) {
  RunResult res;
  const ConePairConfig c = cone_pair(root.at("cones"));
  const GeometryReport g = build_geometry(c);
  auto os = open_out(opt, "geometry.csv", res);
  io::CsvWriter w(os, {"n", "d_gamma1", "gamma", "outer_gap"});
  for (std::size_t i = 0; i < g.n_samples.size(); ++i)
    w.row({g.n_samples[i], g.d_gamma1_samples[i], g.gamma_samples[i], outer_gap(c, g.n_samples[i])});
  res.report = io::to_json(g);
  res.report["cones"] = io::to_json(c);
  return res;
}

inline RunResult gf_suite_cmd(const Reader& root, const RunOptions& opt) {
  RunResult res;
  const Reader gs = root.has("gf") ? root.at("gf") : Reader(json::object(), "gf");
  const FFunction F = gs.has("F") ? f_function(gs.at("F")) : FFunction(3.0, true, 2);
  const int m_lo = int(gs.integer_or("m_lo", 2)), m_hi = int(gs.integer_or("m_hi", 200));
  const int k_lo = int(gs.integer_or("k_lo", 2)), k_hi = int(gs.integer_or("k_hi", 50));
  const int m_sum = int(gs.integer_or("sum_to", 400));
  const GfDecayReport decay = gf_decay_check(F, m_lo, m_hi);
  {
    auto os = open_out(opt, "gf_decay.csv", res);
    io::CsvWriter w(os, {"m", "log_lhs", "log_rhs", "log_margin", "holds"});
    for (const auto& r : decay.rows) w.row({r.m, r.log_lhs, r.log_rhs, r.margin, r.holds});
  }
  // sum_{m=k}^{m_sum} G(m) upper enclosures against the closed form, in log space
  const GTable table(F, m_sum + 40);
  std::vector<double> log_hi(std::size_t(m_sum) + 2, -INFINITY);
  for (int m = m_sum; m >= 0; --m) log_hi[m] = quasiloc::detail::log_add_exp(log_hi[m + 1], table.at(m).log_upper());
  bool sums_ok = true;
  {
    auto os = open_out(opt, "gsum.csv", res);
    io::CsvWriter w(os, {"k", "log_direct_sum", "log_closed_form", "log_margin", "holds"});
    for (int k = k_lo; k <= k_hi; ++k) {
      const double rhs = gsum_bound_log(k, F);
      const bool ok = log_hi[k] <= rhs;
      sums_ok = sums_ok && ok;
      w.row({k, log_hi[k], rhs, rhs - log_hi[k], ok});
    }
  }
  res.report = {{"F", io::to_json(F)}, {"decay_all_hold", decay.all_hold}, {"gsum_all_hold", sums_ok}};
  res.exit_code = decay.all_hold && sums_ok ? kPass : kAssertion;
  return res;
}

}  // namespace detail

/// Runs one subcommand on a parsed config. Operational failures (bad config, domain errors,
/// infeasible geometry) give exit 1, failed inequalities or residuals give exit 2.
inline RunResult run(const std::string& subcommand, const json& config, const RunOptions& opt = {}) {
  RunResult res;
  try {
    const auto& subs = detail::subcommands();
    if (std::find(subs.begin(), subs.end(), subcommand) == subs.end())
      throw ConfigError("unknown subcommand '" + subcommand + "'");
    if (config.contains("subcommand") && config["subcommand"] != subcommand)
      throw ConfigError("subcommand: config is for '" + config["subcommand"].get<std::string>() + "'");
    const Reader root(config, "");
    if (subcommand == "lr-check") res = detail::lr_check_cmd(root, opt);
    else if (subcommand == "transform-check") res = detail::transform_check_cmd(root, opt);
    else if (subcommand == "factorize") res = detail::factorize_cmd(root, opt);
    else if (subcommand == "summability") res = detail::summability_cmd(root, opt);
    else if (subcommand == "geometry") res = detail::geometry_cmd(root, opt);
    else res = detail::gf_suite_cmd(root, opt);

    json resolved = config;
    resolved["subcommand"] = subcommand;
    if (opt.seed) resolved["seed_override"] = *opt.seed;
    if (opt.tol) resolved["tol_override"] = *opt.tol;
    json report = {{"subcommand", subcommand},
                   {"config", resolved},
                   {"result", res.report},
                   {"pass", res.exit_code == kPass},
                   {"csv", json::array()}};
    for (const auto& f : res.files) report["csv"].push_back(f.filename().string());
    const std::string name = subcommand + ".json";
    auto os = detail::open_out(opt, name, res);
    os << report.dump(2) << '\n';
    res.report = std::move(report);
    if (res.message.empty()) res.message = std::string(res.exit_code == kPass ? "PASS " : "FAIL ") + subcommand;
  } catch (const GeometryInfeasible& e) {
    res = {kOperational, std::string("geometry-infeasible: ") + e.what(), {}, {}};
  } catch (const ConfigError& e) {
    res = {kOperational, std::string("config error: ") + e.what(), {}, {}};
  } catch (const DomainError& e) {
    res = {kOperational, std::string("domain error: ") + e.what(), {}, {}};
  } catch (const std::exception& e) {
    res = {kOperational, std::string("error: ") + e.what(), {}, {}};
  }
  return res;
}

inline RunResult run_file(const std::string& subcommand, const std::filesystem::path& config_path, RunOptions opt = {}) {
  json cfg;
  try {
    cfg = load_config(config_path);
  } catch (const ConfigError& e) {
    return {kOperational, std::string("config error: ") + e.what(), {}, {}};
  }
  opt.base_dir = config_path.parent_path();
  return run(subcommand, cfg, opt);
}

}  // namespace quasiloc::cli
