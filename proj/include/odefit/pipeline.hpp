#pragma once

// Command-line workflow: skeleton, lint, fit, simulate, plus benchmark export.
// Every entry point returns a process exit code and writes diagnostics to err.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "odefit/bench.hpp"
#include "odefit/deck.hpp"
#include "odefit/fit.hpp"
#include "odefit/lint.hpp"

namespace odefit {

namespace fs = std::filesystem;

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int lint = 1;
inline constexpr int missing_file = 2;
inline constexpr int parse = 3;
inline constexpr int infeasible = 4;
inline constexpr int bad_params = 5;
}  // namespace exit_code

/// Failure carrying the exit code it maps to.
class CliError : public std::runtime_error {
 public:
  CliError(int code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  int code() const noexcept { return code_; }

 private:
  int code_;
};

inline std::string read_text_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw CliError(exit_code::missing_file, "file not found: " + p.string());
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

/// Parses a deck file and loads its dataset relative to the deck's directory.
inline ProblemDeck load_deck_file(const fs::path& path, bool with_data = true) {
  const std::string text = read_text_file(path);
  ProblemDeck deck;
  try {
    deck = parse_deck(text);
  } catch (const DeckParseError& e) {
    throw CliError(exit_code::parse, path.string() + ": " + e.what());
  }
  if (with_data) load_dataset(deck, path.parent_path());
  return deck;
}

namespace detail {

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const CliError& e) {
    err << "error: " << e.what() << "\n";
    return e.code();
  } catch (const InfeasibleError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::infeasible;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::lint;
  }
}

inline bool wants(const ProblemDeck& d, std::string_view kind) {
  return std::find(d.outputs.begin(), d.outputs.end(), kind) != d.outputs.end();
}

}  // namespace detail

// ---------------------------------------------------------------- skeleton

/// Writes `<stem>.model.txt` beside the deck.
inline int cli_skeleton(const fs::path& deck_path, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    const auto deck = load_deck_file(deck_path, false);
    const fs::path target = deck_path.parent_path() / (deck_path.stem().string() + ".model.txt");
    const std::string text = generate_skeleton(deck);
    write_text_file(target, text);
    out << "wrote " << target.string() << " (" << count_fill_slots(text) << " slots to fill)\n";
    return exit_code::ok;
  });
}

// -------------------------------------------------------------------- lint

struct LintOptions {
  std::size_t max_iterations = 5;
  bool fix = true;
  std::optional<fs::path> out_dir;  // report location; defaults to the deck's directory
};

/// Runs the lint/fix loop. Exit 0 when the final report has no unresolved
/// critical finding, 1 otherwise. With fixes applied, writes
/// `<stem>.fixed.xml` (and a sorted dataset copy when rows were reordered).
inline int cli_lint(const fs::path& deck_path, const LintOptions& opt = {}, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    const auto deck = load_deck_file(deck_path);
    const auto loop = lint_loop(deck, opt.max_iterations, opt.fix);
    const fs::path dir = opt.out_dir.value_or(deck_path.parent_path());
    write_text_file(dir / "lint_report.json", lint_reports_to_json(loop.reports).dump(2) + "\n");
    out << lint_reports_to_text(loop.reports);

    if (opt.fix && !(loop.deck == deck)) {
      const fs::path base = deck_path.parent_path();
      if (loop.deck.dataset.path != deck.dataset.path && loop.deck.dataset.table) {
        fs::path p(loop.deck.dataset.path);
        if (p.is_relative()) p = base / p;
        write_text_file(p, to_csv(*loop.deck.dataset.table));
        out << "wrote " << p.string() << "\n";
      }
      const fs::path fixed = base / (deck_path.stem().string() + ".fixed.xml");
      write_text_file(fixed, serialize_deck(loop.deck));
      out << "wrote " << fixed.string() << "\n";
    }
    return loop.clean() ? exit_code::ok : exit_code::lint;
  });
}

// --------------------------------------------------------------------- fit

struct FitOptions {
  std::optional<std::uint64_t> seed;  // overrides the deck's swarm seed
  fs::path out_dir = ".";
  std::optional<std::size_t> workers;
};

inline nlohmann::ordered_json params_to_json(const ParamSpace& space, const std::vector<double>& theta) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto& b = space[i];
    j[b.name] = {{"value", theta[i]}, {"lower", b.lower}, {"upper", b.upper}, {"scale", to_string(b.scale)}};
  }
  return j;
}

inline std::string loss_history_to_csv(const std::vector<HistoryRow>& rows) {
  std::string s = "stage,iteration,loss\n";
  for (const auto& r : rows) s += r.stage + "," + std::to_string(r.iteration) + "," + format_double(r.loss) + "\n";
  return s;
}

inline nlohmann::ordered_json named(const std::vector<std::string>& names, const std::vector<double>& v) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < names.size(); ++i) j[names[i]] = v[i];
  return j;
}

inline nlohmann::ordered_json solver_to_json(const SolverConfig& s) {
  nlohmann::ordered_json j{{"method", to_string(s.method)}, {"rtol", s.rtol}, {"atol", s.atol}, {"t0", s.t0}};
  j["t1"] = s.t1 ? nlohmann::ordered_json(*s.t1) : nlohmann::ordered_json(nullptr);
  j["max_steps"] = s.max_steps;
  j["adaptive"] = s.adaptive;
  return j;
}

inline nlohmann::ordered_json optimizer_to_json(const OptimizerConfig& o) {
  return {{"pso",
           {{"swarm_size", o.pso.swarm_size},
            {"iterations", o.pso.iterations},
            {"w", o.pso.w},
            {"c1", o.pso.c1},
            {"c2", o.pso.c2},
            {"seed", o.pso.seed}}},
          {"lbfgs",
           {{"max_iterations", o.lbfgs.max_iterations},
            {"memory", o.lbfgs.memory},
            {"grad_tolerance", o.lbfgs.grad_tolerance},
            {"loss_rel_tolerance", o.lbfgs.loss_rel_tolerance}}}};
}

/// Lints (aborting on criticals), runs the two-stage fit and writes the
/// artifacts listed in the deck's outputs.
inline int cli_fit(const fs::path& deck_path, const FitOptions& opt = {}, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    auto deck = load_deck_file(deck_path);
    const auto report = lint_deck(deck);
    if (report.criticals() > 0) {
      err << lint_reports_to_text({report});
      err << "error: deck has critical lint findings; run `fit lint --fix` first\n";
      return exit_code::lint;
    }
    if (opt.seed) deck.optimizer.pso.seed = *opt.seed;

    const auto model = compile(deck);
    const auto data = bind_dataset(deck);
    const auto space = ParamSpace::from_deck(deck);
    out << "fitting " << deck.name << ": " << space.size() << " parameters, swarm " << deck.optimizer.pso.swarm_size
        << " x " << deck.optimizer.pso.iterations << ", seed " << deck.optimizer.pso.seed << "\n";
    const auto r = two_stage_fit(model, data, deck.loss, space, deck.solver, deck.optimizer,
                                 opt.workers.value_or(default_workers()));
    out << "pso loss " << format_double(r.loss_pso) << ", final loss " << format_double(r.loss_final) << " ("
        << r.refine_status << ")\n";

    const bool ok = r.trajectory.ok() && std::isfinite(r.loss_final);
    if (detail::wants(deck, "params"))
      write_text_file(opt.out_dir / "params.json", params_to_json(space, r.theta_final).dump(2) + "\n");
    if (detail::wants(deck, "loss_history"))
      write_text_file(opt.out_dir / "loss_history.csv", loss_history_to_csv(r.history));
    if (detail::wants(deck, "trajectory"))
      write_text_file(opt.out_dir / "trajectory.csv",
                      trajectory_to_csv(r.trajectory, model.state_names(), deck.dataset.time_column));
    if (detail::wants(deck, "report")) {
      nlohmann::ordered_json j;
      j["deck"] = deck.name;
      j["status"] = ok ? "success" : "failed";
      j["seed"] = deck.optimizer.pso.seed;
      j["theta_pso"] = named(r.names, r.theta_pso);
      j["theta_final"] = named(r.names, r.theta_final);
      j["loss_pso"] = r.loss_pso;
      j["loss_final"] = r.loss_final;
      j["refine_status"] = r.refine_status;
      j["lbfgs_iterations"] = r.lbfgs_history.empty() ? 0 : r.lbfgs_history.size() - 1;
      j["trajectory_status"] = to_string(r.trajectory.status);
      j["solver"] = solver_to_json(deck.solver);
      j["optimizer"] = optimizer_to_json(deck.optimizer);
      j["lint"] = lint_reports_to_json({report});
      j["timing_seconds"] = {{"pso", r.pso_seconds}, {"lbfgs", r.lbfgs_seconds}};
      write_text_file(opt.out_dir / "fit_report.json", j.dump(2) + "\n");
    }
    out << "wrote artifacts to " << opt.out_dir.string() << "\n";
    if (!ok) {
      err << "error: final trajectory did not integrate (" << to_string(r.trajectory.status) << ")\n";
      return exit_code::infeasible;
    }
    return exit_code::ok;
  });
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
  fs::path params;
  fs::path out = "trajectory.csv";
};

/// Reads parameter values from a params.json (either {"name": {"value": v}}
/// or {"name": v}); unknown names and out-of-bound values only warn.
inline std::vector<double> read_params(const fs::path& path, const ProblemDeck& deck, std::ostream& err) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw CliError(exit_code::parse, path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw CliError(exit_code::bad_params, "parameter file must hold a JSON object");
  std::vector<double> theta;
  for (const auto& p : deck.parameters) {
    if (!j.contains(p.name)) throw CliError(exit_code::bad_params, "missing parameter '" + p.name + "'");
    const auto& v = j[p.name];
    const auto& x = v.is_object() && v.contains("value") ? v["value"] : v;
    if (!x.is_number()) throw CliError(exit_code::bad_params, "parameter '" + p.name + "' is not a number");
    theta.push_back(x.get<double>());
    if (theta.back() < p.lower || theta.back() > p.upper)
      err << "warning: parameter '" << p.name << "' = " << format_double(theta.back()) << " lies outside ["
          << format_double(p.lower) << ", " << format_double(p.upper) << "]\n";
  }
  for (const auto& [name, _] : j.items())
    if (deck.parameter_index(name) < 0) err << "warning: ignoring unknown parameter '" << name << "'\n";
  return theta;
}

/// Integrates once at the data times with the given parameters.
inline int cli_simulate(const fs::path& deck_path, const SimulateOptions& opt, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    const auto deck = load_deck_file(deck_path);
    if (!deck.dataset.table) throw CliError(exit_code::missing_file, deck.dataset.load_error);
    const auto theta = read_params(opt.params, deck, err);
    const auto model = compile(deck);
    const auto data = bind_dataset(deck);
    const auto traj = integrate(model, theta, data.times, deck.solver);
    write_text_file(opt.out, trajectory_to_csv(traj, model.state_names(), deck.dataset.time_column));
    out << "wrote " << opt.out.string() << " (" << to_string(traj.status) << ")\n";
    if (!traj.ok()) err << "warning: integration stopped early: " << to_string(traj.status) << "\n";
    return exit_code::ok;
  });
}

// --------------------------------------------------------------- benchmarks

/// Writes `<dir>/<case>/<case>.xml` and its dataset CSV.
inline int cli_bench(const std::string& name, const fs::path& dir, std::optional<std::uint64_t> seed,
                     std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    const BenchmarkCase* c = nullptr;
    try {
      c = &get_benchmark(name);
    } catch (const std::exception& e) {
      throw CliError(exit_code::bad_params, e.what());
    }
    const auto deck = c->deck();
    const fs::path base = dir / c->name;
    write_text_file(base / c->deck_file, c->deck_xml);
    write_text_file(base / deck.dataset.path, generate_synthetic(*c, seed.value_or(c->seed)));
    out << "wrote " << (base / c->deck_file).string() << " and " << (base / deck.dataset.path).string() << "\n";
    return exit_code::ok;
  });
}

}  // namespace odefit
