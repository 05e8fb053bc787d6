#include <CLI11.hpp>
#include <iostream>

#include "quasiloc/cli.hpp"

int main(int argc, char** argv) {
  namespace qc = quasiloc::cli;
  CLI::App app{"quasiloc: finite-volume checks for quasi-local dynamics and cone factorization"};
  app.require_subcommand(1);

  std::string config;
  std::string out = "out";
  std::uint64_t seed = 0;
  double tol = 0;
  std::vector<CLI::App*> runs;
  for (const std::string& name : qc::detail::subcommands()) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " pipeline");
    sub->add_option("--config", config, "TOML experiment config")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory");
    sub->add_option("--seed", seed, "override the RNG seed");
    sub->add_option("--tol", tol, "override the integrator tolerance");
    runs.push_back(sub);
  }
  CLI::App* list = app.add_subcommand("list-generators", "print the interaction generator catalog");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : qc::kOperational;
  }

  if (list->parsed()) {
    std::cout << quasiloc::io::catalog_json().dump(2) << '\n';
    return 0;
  }
  for (CLI::App* sub : runs) {
    if (!sub->parsed()) continue;
    qc::RunOptions opt;
    opt.out_dir = out;
    if (sub->count("--seed")) opt.seed = seed;
    if (sub->count("--tol")) opt.tol = tol;
    const qc::RunResult res = qc::run_file(sub->get_name(), config, opt);
    (res.exit_code == qc::kOperational ? std::cerr : std::cout) << res.message << '\n';
    return res.exit_code;
  }
  return qc::kOperational;
}
