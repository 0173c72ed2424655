#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qfl/cli.hpp"

namespace {

using namespace qfl;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

Provenance provenance_of(const std::string& s) {
  if (s == "analytic") return Provenance::analytic;
  if (s == "grid") return Provenance::grid;
  throw ConfigError("--provenance must be 'analytic' or 'grid'");
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
}

struct RunArgs {
  std::string scenario_path;
  std::string state, checks, grid, provenance, out;
  std::vector<double> times;
  std::optional<int> jobs;
};

int do_run(const RunArgs& a) {
  Scenario sc;
  if (!a.scenario_path.empty()) {
    sc = Scenario::load(a.scenario_path);
  } else if (a.state.empty()) {
    throw ConfigError("run needs a scenario file or --state");
  }
  if (!a.state.empty()) sc.state = a.state;
  if (!a.checks.empty()) sc.checks = split_list(a.checks);
  if (!a.grid.empty()) sc.grid = a.grid;
  if (!a.provenance.empty()) sc.provenance = provenance_of(a.provenance);
  if (!a.times.empty()) sc.times = a.times;
  if (!a.out.empty()) sc.output_dir = a.out;
  const RunResult r = run_scenario(sc, resolve_jobs(a.jobs));
  const auto& s = r.manifest["summary"];
  std::cout << s["passed"].get<std::size_t>() << "/" << s["total"].get<std::size_t>() << " passed";
  for (const auto& c : r.manifest["checks"])
    if (!c["passed"].get<bool>()) std::cout << "\n  FAIL " << c["equation_id"].get<std::string>() << " t=" << c["t"];
  std::cout << "\nmanifest: " << sc.output_dir << "/manifest.json\n";
  return r.passed ? kExitPass : kExitFail;
}

struct DumpArgs {
  std::string state, grid = "auto", provenance = "analytic", format = "csv", output, sign = "minus";
  double t = 0.0;
};

int do_field_dump(const DumpArgs& a) {
  const AnalyticState state = parse_state(a.state);
  const GridPtr grid = parse_grid_spec(a.grid, state);
  if (a.sign != "minus" && a.sign != "plus") throw ConfigError("--sign must be 'plus' or 'minus'");
  const FieldBundle fb =
      bundle(state, grid, a.t, provenance_of(a.provenance), {a.sign == "plus" ? Sign::plus : Sign::minus});
  if (a.format == "json") {
    emit(a.output, to_json(*grid, fb.columns(), fb.mask).dump(2) + "\n");
  } else if (a.format == "csv") {
    std::ostringstream os;
    write_csv(os, *grid, fb.columns(), fb.mask);
    emit(a.output, os.str());
  } else {
    throw ConfigError("--format must be 'csv' or 'json'");
  }
  return kExitPass;
}

struct TrajectoryArgs {
  std::string state, seed, velocity = "u_minus", output, spin_sign = "plus";
  double dt = 0.01, t0 = 0.0;
  int steps = 100;
  bool renormalize = false;
};

int do_trajectory(const TrajectoryArgs& a) {
  const AnalyticState state = parse_state(a.state);
  const auto parts = split_list(a.seed);
  if (parts.empty() || parts.size() > 3) throw ConfigError("--seed needs 1 to 3 comma-separated coordinates");
  Config seed{};
  for (std::size_t k = 0; k < parts.size(); ++k) seed[k] = parse_real(parts[k]);
  if (a.spin_sign != "minus" && a.spin_sign != "plus") throw ConfigError("--spin-sign must be 'plus' or 'minus'");
  TrajectoryOptions opt;
  opt.velocity = {a.spin_sign == "plus" ? Sign::plus : Sign::minus, a.renormalize};
  const Trajectory tr = integrate_trajectory(state, seed, parse_velocity_kind(a.velocity), a.dt, a.steps, a.t0, opt);
  std::ostringstream os;
  tr.write_csv(os);
  emit(a.output, os.str());
  std::cerr << tr.summary().dump() << "\n";
  return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qfl: quantum fluid residual checks, field dumps and trajectories"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run a scenario file (or a one-liner built from flags)");
  run_cmd->add_option("scenario", run.scenario_path, "Scenario JSON");
  run_cmd->add_option("--state", run.state, "State label, e.g. hydrogen_1s or box:k=2,L=pi");
  run_cmd->add_option("--check", run.checks, "Comma-separated equation ids");
  run_cmd->add_option("--grid", run.grid, "Grid spec, e.g. radial:n=400,r_min=1e-5,r_max=40");
  run_cmd->add_option("--provenance", run.provenance, "analytic or grid");
  run_cmd->add_option("--t", run.times, "Sample times")->delimiter(',');
  run_cmd->add_option("--out", run.out, "Output directory");
  run_cmd->add_option("--jobs", run.jobs, "Concurrent checks (capped by QFL_JOBS)");

  app.add_subcommand("list-checks", "List equation ids, labels and descriptions");

  DumpArgs dump;
  auto* dump_cmd = app.add_subcommand("field-dump", "Sample every field of a state on a grid");
  dump_cmd->add_option("--state", dump.state)->required();
  dump_cmd->add_option("--grid", dump.grid);
  dump_cmd->add_option("--at", dump.t, "Time");
  dump_cmd->add_option("--provenance", dump.provenance);
  dump_cmd->add_option("--sign", dump.sign, "Sign of u: minus or plus");
  dump_cmd->add_option("--format", dump.format, "csv or json");
  dump_cmd->add_option("--output,-o", dump.output, "File (default stdout)");

  TrajectoryArgs traj;
  auto* traj_cmd = app.add_subcommand("trajectory", "Integrate one streamline (CSV out, summary on stderr)");
  traj_cmd->add_option("--state", traj.state)->required();
  traj_cmd->add_option("--seed", traj.seed, "x[,y[,z]]")->required();
  traj_cmd->add_option("--velocity", traj.velocity, "u_minus, u_plus, v, u_spin or w_sum");
  traj_cmd->add_option("--dt", traj.dt);
  traj_cmd->add_option("--steps", traj.steps);
  traj_cmd->add_option("--t0", traj.t0);
  traj_cmd->add_option("--spin-sign", traj.spin_sign);
  traj_cmd->add_flag("--renormalize", traj.renormalize, "Rescale u_spin to |u_minus|");
  traj_cmd->add_option("--output,-o", traj.output, "File (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitPass : kExitConfig;
  }

  try {
    if (run_cmd->parsed()) return do_run(run);
    if (dump_cmd->parsed()) return do_field_dump(dump);
    if (traj_cmd->parsed()) return do_trajectory(traj);
    std::cout << list_checks_table();
    return kExitPass;
  } catch (const UnknownCheckError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUnknownId;
  } catch (const BudgetError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBudget;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFail;
  }
}
