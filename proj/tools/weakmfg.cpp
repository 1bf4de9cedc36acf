#include <CLI11.hpp>

#include <cstdint>
#include <iostream>

#include "weakmfg/cli.hpp"

int main(int argc, char** argv) {
  using namespace weakmfg;
  CLI::App app{"Weak solutions of first-order mean field games: solve, check, nash, study"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  CommandOptions opt;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "Config file (YAML)")->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "Output directory (default $WEAKMFG_OUT/<command>)");
    sub->add_option("--seed", seed, "Override solver and game seeds");
    sub->add_option("--threads", threads, "Worker threads");
  };

  auto* solve = app.add_subcommand("solve", "Solve the discrete saddle problem and write fields and reports");
  solve->add_option("--problem", opt.problem, "Problem file (YAML)")->required()->check(CLI::ExistingFile);
  solve->add_flag("--binary", opt.binary, "Also write binary field dumps");
  common(solve);

  auto* check = app.add_subcommand("check", "Check a solve output directory against the weak-solution conditions");
  check->add_option("solution", opt.solution, "Solve output directory")->required();
  common(check);

  auto* nash = app.add_subcommand("nash", "Sample trajectories and estimate the N-player Nash gap");
  nash->add_option("solution", opt.solution, "Solve output directory")->required();
  common(nash);

  auto* study = app.add_subcommand("study", "Trend table along one axis");
  study->add_option("--problem", opt.problem, "Problem file (YAML)")->required()->check(CLI::ExistingFile);
  study->add_option("--axis", opt.axis, "grid | N | perturbation")
      ->required()
      ->check(CLI::IsMember({"grid", "N", "perturbation"}));
  common(study);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kUsage;
  }
  for (auto* sub : {solve, check, nash, study}) {
    if (sub->count_all() == 0) continue;
    if (sub->count("--seed") > 0) opt.seed = seed;
    if (sub->count("--threads") > 0) opt.threads = threads;
  }

  if (solve->parsed()) return cmd_solve(opt);
  if (check->parsed()) return cmd_check(opt);
  if (nash->parsed()) return cmd_nash(opt);
  return cmd_study(opt);
}
