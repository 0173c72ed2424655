#pragma once

// Scenario files, grid specs and the run manifest behind the `qfl` tool.

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qfl/dynamics.hpp"
#include "qfl/residuals.hpp"

namespace qfl {

/// Unreadable or invalid configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Requested resolution exceeds the point budget.
class BudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kPointBudget = std::size_t{1} << 27;

enum ExitCode : int { kExitPass = 0, kExitFail = 1, kExitUnknownId = 2, kExitConfig = 3, kExitBudget = 4 };

/// Grid specs:
///   "radial:n=400,r_min=1e-5,r_max=30"
///   "cartesian:n=41x41x41,lo=-5,hi=5"       (one body, rank from n)
///   "cartesian:n=81x81,lo=0,hi=pi,bodies=2" (two bodies, one dimension each)
///   "cartesian:n=128,lo=0,hi=2pi,periodic=1"
///   "auto" or "auto:n=N"                      (derived from the state's domain)
/// lo and hi take one value or one per axis separated by '/'.
GridPtr parse_grid_spec(const std::string& spec, const AnalyticState& state);
/// Same grammar as an object ({"kind": ..., ...}) or a spec string.
GridPtr grid_from_json(const nlohmann::json& j, const AnalyticState& state);
GridPtr default_grid(const AnalyticState& state, std::optional<int> n = std::nullopt);

/// A catalog label, or {"superpose": [{"coeff": "sqrt(0.5)", "state": "box:k=1"}, ...]}.
std::string state_label_from_json(const nlohmann::json& j);

struct TrajectoryRequest {
  Config seed{};
  VelocityKind kind = VelocityKind::u_minus;
  double dt = 0.01;
  int steps = 100;
  double t0 = 0.0;
  Sign spin_sign = Sign::plus;
  bool renormalize_spin = false;
};

struct Scenario {
  std::string state;
  nlohmann::json grid;  // null: default grid
  std::vector<std::string> checks;
  std::vector<double> times{0.0};
  Provenance provenance = Provenance::analytic;
  CheckOptions options;
  std::map<std::string, double> tolerances;
  std::vector<TrajectoryRequest> trajectories;
  std::optional<std::vector<double>> conservation_times;
  bool write_fields = true;
  std::string output_dir = "qfl-out";

  /// Throws ConfigError on unknown keys or malformed values.
  static Scenario from_json(const nlohmann::json& j);
  static Scenario load(const std::string& path);
  nlohmann::json to_json() const;
};

struct RunResult {
  nlohmann::json manifest;  // deterministic
  nlohmann::json timing;    // wall-clock sidecar
  bool passed = true;
};

/// Validates ids and the point budget up front, then runs every check at
/// every time (up to `jobs` at once), the trajectories and the conservation
/// experiment. With `write_outputs` the manifest, timing sidecar, residual
/// JSONs and CSVs go to scenario.output_dir.
RunResult run_scenario(const Scenario& scenario, int jobs = 1, bool write_outputs = true);

/// "id → Eq. (label)" then the description, one check per line in registry order.
std::string list_checks_table();

/// Thread count: `requested` (or the hardware count) capped by QFL_JOBS.
int resolve_jobs(std::optional<int> requested);

}  // namespace qfl
