// fit: command-line front end.
//
//   fit skeleton <deck.xml>
//   fit lint <deck.xml> [--max-iters N] [--fix|--no-fix] [--out-dir DIR]
//   fit fit <deck.xml> [--seed S] [--out-dir DIR] [--workers N]
//   fit simulate <deck.xml> --params params.json [--out trajectory.csv]
//   fit bench <case|all> [--dir DIR] [--seed S]

#include <CLI11.hpp>

#include <iostream>

#include "odefit/pipeline.hpp"

int main(int argc, char** argv) {
  using namespace odefit;
  CLI::App app{"ODE parameter calibration from XML problem decks"};
  app.require_subcommand(1);

  std::string deck;

  auto* skel = app.add_subcommand("skeleton", "write <stem>.model.txt beside the deck");
  skel->add_option("deck", deck, "problem deck")->required();

  LintOptions lint_opt;
  std::string lint_dir;
  auto* lint = app.add_subcommand("lint", "check a deck, optionally applying fixes in a loop");
  lint->add_option("deck", deck, "problem deck")->required();
  lint->add_option("--max-iters", lint_opt.max_iterations, "lint/fix iterations")->capture_default_str();
  lint->add_flag("--fix,!--no-fix", lint_opt.fix, "apply automatic fixes");
  lint->add_option("--out-dir", lint_dir, "where lint_report.json goes (default: deck directory)");

  FitOptions fit_opt;
  std::uint64_t seed = 0;
  std::size_t workers = 0;
  std::string fit_dir = ".";
  auto* fit = app.add_subcommand("fit", "run the two-stage calibration");
  fit->add_option("deck", deck, "problem deck")->required();
  auto* seed_opt = fit->add_option("--seed", seed, "swarm seed (overrides the deck)");
  fit->add_option("--out-dir", fit_dir, "artifact directory")->capture_default_str();
  auto* workers_opt = fit->add_option("--workers", workers, "fitness evaluation threads")->check(CLI::PositiveNumber);

  SimulateOptions sim_opt;
  std::string params, sim_out = "trajectory.csv";
  auto* sim = app.add_subcommand("simulate", "integrate once with given parameters");
  sim->add_option("deck", deck, "problem deck")->required();
  sim->add_option("--params", params, "params.json")->required();
  sim->add_option("--out", sim_out, "trajectory CSV")->capture_default_str();

  std::string bench_case, bench_dir = "benchmarks";
  std::uint64_t bench_seed = 0;
  auto* bench = app.add_subcommand("bench", "export a benchmark deck with its synthetic data");
  bench->add_option("case", bench_case, "case name or 'all'")->required();
  bench->add_option("--dir", bench_dir, "output root")->capture_default_str();
  auto* bench_seed_opt = bench->add_option("--seed", bench_seed, "noise seed (default: the case's seed)");

  CLI11_PARSE(app, argc, argv);

  if (*skel) return cli_skeleton(deck);
  if (*lint) {
    if (!lint_dir.empty()) lint_opt.out_dir = lint_dir;
    return cli_lint(deck, lint_opt);
  }
  if (*fit) {
    if (*seed_opt) fit_opt.seed = seed;
    if (*workers_opt) fit_opt.workers = workers;
    fit_opt.out_dir = fit_dir;
    return cli_fit(deck, fit_opt);
  }
  if (*sim) {
    sim_opt.params = params;
    sim_opt.out = sim_out;
    return cli_simulate(deck, sim_opt);
  }
  std::optional<std::uint64_t> s;
  if (*bench_seed_opt) s = bench_seed;
  if (bench_case == "all") {
    for (const auto& name : list_benchmarks())
      if (const int rc = cli_bench(name, bench_dir, s); rc != exit_code::ok) return rc;
    return exit_code::ok;
  }
  return cli_bench(bench_case, bench_dir, s);
}
