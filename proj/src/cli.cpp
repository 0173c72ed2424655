#include "qfl/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "qfl/parallel.hpp"

namespace qfl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double real_of(const std::string& text, const std::string& what) {
  try {
    return parse_real(text);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

int int_of(const std::string& text, const std::string& what) {
  try {
    return parse_int(text);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

bool radially_symmetric(const AnalyticState& s) {
  if (!s.components().empty()) {
    for (const auto& c : s.components())
      if (!radially_symmetric(*c.state)) return false;
    return true;
  }
  const std::string& l = s.label();
  return l == "hydrogen_1s" || l == "hydrogen_2s" || l == "hydrogen_3s";
}

void check_budget(std::size_t points) {
  if (points > kPointBudget)
    throw BudgetError("grid of " + std::to_string(points) + " points exceeds the budget of 2^27");
}

GridPtr radial_grid(int n, double r_min, double r_max) {
  if (n < 5) throw ConfigError("radial grid needs n >= 5");
  if (!(r_min > 0.0) || !(r_max > r_min)) throw ConfigError("radial grid needs 0 < r_min < r_max");
  check_budget(static_cast<std::size_t>(n));
  return share(Grid::radial_log(n, r_min, r_max));
}

struct CartesianRequest {
  std::vector<int> n;
  std::vector<double> lo, hi;
  bool periodic = false;
  int bodies = 1;
};

GridPtr cartesian_grid(CartesianRequest r) {
  const std::size_t rank = r.n.size();
  if (rank == 0 || rank > 3) throw ConfigError("cartesian grid needs 1 to 3 axes");
  auto widen = [&](std::vector<double>& v, const char* name) {
    if (v.size() == 1) v.assign(rank, v[0]);
    if (v.size() != rank) throw ConfigError(std::string("cartesian grid: '") + name + "' must give 1 or " +
                                            std::to_string(rank) + " values");
  };
  widen(r.lo, "lo");
  widen(r.hi, "hi");
  std::size_t points = 1;
  for (std::size_t a = 0; a < rank; ++a) {
    if (r.n[a] < 5) throw ConfigError("cartesian grid needs at least 5 nodes per axis");
    if (!(r.hi[a] > r.lo[a])) throw ConfigError("cartesian grid needs lo < hi on every axis");
    points *= static_cast<std::size_t>(r.n[a]);
    check_budget(points);
  }
  std::vector<Axis> axes;
  for (std::size_t a = 0; a < rank; ++a)
    axes.push_back(r.periodic ? Axis::periodic(r.n[a], r.lo[a], r.hi[a]) : Axis::bounded(r.n[a], r.lo[a], r.hi[a]));
  if (r.bodies < 1 || rank % r.bodies != 0) throw ConfigError("cartesian grid: axes must split evenly over bodies");
  return share(Grid::cartesian(std::move(axes), r.bodies, static_cast<int>(rank) / r.bodies));
}

void require_match(const GridPtr& g, const AnalyticState& s) {
  const int dims = g->kind() == CoordinateKind::radial_log ? 3 : g->n_bodies() * g->dim_per_body();
  if (dims != s.config_dim() || (g->kind() != CoordinateKind::radial_log && g->n_bodies() != s.n_bodies()))
    throw ConfigError("grid does not match the configuration space of " + s.label());
  if (g->kind() == CoordinateKind::radial_log && !radially_symmetric(s))
    throw ConfigError("radial grids need a spherically symmetric state; " + s.label() + " is not");
}

std::map<std::string, std::string> key_values(const std::string& body, const std::string& what) {
  std::map<std::string, std::string> kv;
  if (body.empty()) return kv;
  for (const auto& item : split(body, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError(what + ": '" + item + "' lacks '='");
    kv[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return kv;
}

void reject_unknown(const std::map<std::string, std::string>& kv, const std::set<std::string>& allowed,
                    const std::string& what) {
  for (const auto& [k, v] : kv)
    if (!allowed.count(k)) throw ConfigError(what + ": unknown parameter '" + k + "'");
}

}  // namespace

GridPtr default_grid(const AnalyticState& state, std::optional<int> n) {
  if (radially_symmetric(state)) return radial_grid(n.value_or(400), 1e-5, 40.0);
  const StateDomain& d = state.domain();
  const int dims = state.config_dim();
  CartesianRequest r;
  r.bodies = state.n_bodies();
  r.periodic = d.periodic;
  const int per_axis = n.value_or(dims == 1 ? 201 : dims == 2 ? 81 : 41);
  for (int k = 0; k < dims; ++k) {
    auto [lo, hi] = d.extent.at(k);
    if (!std::isfinite(lo) || !std::isfinite(hi)) lo = -10.0, hi = 10.0;
    r.n.push_back(per_axis);
    r.lo.push_back(lo);
    r.hi.push_back(hi);
  }
  return cartesian_grid(r);
}

GridPtr parse_grid_spec(const std::string& spec, const AnalyticState& state) {
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const auto kv = key_values(colon == std::string::npos ? "" : spec.substr(colon + 1), "grid '" + spec + "'");
  const std::string what = "grid '" + spec + "'";
  GridPtr g;
  if (kind == "auto") {
    reject_unknown(kv, {"n"}, what);
    std::optional<int> n;
    if (kv.count("n")) n = int_of(kv.at("n"), what);
    g = default_grid(state, n);
  } else if (kind == "radial") {
    reject_unknown(kv, {"n", "r_min", "r_max"}, what);
    g = radial_grid(kv.count("n") ? int_of(kv.at("n"), what) : 400,
                    kv.count("r_min") ? real_of(kv.at("r_min"), what) : 1e-5,
                    kv.count("r_max") ? real_of(kv.at("r_max"), what) : 40.0);
  } else if (kind == "cartesian") {
    reject_unknown(kv, {"n", "lo", "hi", "periodic", "bodies"}, what);
    if (!kv.count("n") || !kv.count("lo") || !kv.count("hi")) throw ConfigError(what + ": needs n, lo and hi");
    CartesianRequest r;
    for (const auto& p : split(kv.at("n"), 'x')) r.n.push_back(int_of(p, what));
    for (const auto& p : split(kv.at("lo"), '/')) r.lo.push_back(real_of(p, what));
    for (const auto& p : split(kv.at("hi"), '/')) r.hi.push_back(real_of(p, what));
    r.periodic = kv.count("periodic") && int_of(kv.at("periodic"), what) != 0;
    r.bodies = kv.count("bodies") ? int_of(kv.at("bodies"), what) : 1;
    g = cartesian_grid(r);
  } else {
    throw ConfigError("unknown grid kind '" + kind + "' (expected radial, cartesian or auto)");
  }
  require_match(g, state);
  return g;
}

GridPtr grid_from_json(const json& j, const AnalyticState& state) {
  if (j.is_null()) return default_grid(state);
  if (j.is_string()) return parse_grid_spec(j.get<std::string>(), state);
  if (!j.is_object()) throw ConfigError("grid must be a spec string or an object");
  // Flatten the object into the spec grammar.
  std::ostringstream spec;
  std::string kind = j.value("kind", std::string("auto"));
  if (kind == "radial_log") kind = "radial";
  spec << kind;
  char sep = ':';
  for (const auto& [key, value] : j.items()) {
    if (key == "kind") continue;
    std::string text;
    if (value.is_array()) {
      for (std::size_t i = 0; i < value.size(); ++i) {
        const auto& v = value[i];
        text += (i ? (key == "n" ? "x" : "/") : "") + (v.is_string() ? v.get<std::string>() : v.dump());
      }
    } else if (value.is_boolean()) {
      text = value.get<bool>() ? "1" : "0";
    } else {
      text = value.is_string() ? value.get<std::string>() : value.dump();
    }
    spec << sep << key << '=' << text;
    sep = ',';
  }
  return parse_grid_spec(spec.str(), state);
}

std::string state_label_from_json(const json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_object() && j.contains("superpose") && j.size() == 1 && j["superpose"].is_array()) {
    std::string label = "superpose:";
    bool first = true;
    for (const auto& c : j["superpose"]) {
      if (!c.is_object() || !c.contains("coeff") || !c.contains("state"))
        throw ConfigError("superpose entries need 'coeff' and 'state'");
      const auto& coeff = c["coeff"];
      label += (first ? "" : "|") + (coeff.is_string() ? coeff.get<std::string>() : coeff.dump()) + "@" +
               state_label_from_json(c["state"]);
      first = false;
    }
    return label;
  }
  throw ConfigError("state must be a catalog label or {\"superpose\": [...]}");
}

// ---- scenario ----------------------------------------------------------------

namespace {

template <class T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("scenario field '" + key + "' has the wrong type");
  }
}

Sign sign_of(const std::string& s) {
  if (s == "minus") return Sign::minus;
  if (s == "plus") return Sign::plus;
  throw ConfigError("sign must be 'plus' or 'minus', not '" + s + "'");
}

Provenance provenance_of(const std::string& s) {
  if (s == "analytic") return Provenance::analytic;
  if (s == "grid") return Provenance::grid;
  throw ConfigError("provenance must be 'analytic' or 'grid', not '" + s + "'");
}

double finite_number(const json& v, const std::string& what) {
  double x;
  if (v.is_number())
    x = v.get<double>();
  else if (v.is_string())
    x = real_of(v.get<std::string>(), what);
  else
    throw ConfigError(what + " must be a number");
  if (!std::isfinite(x)) throw ConfigError(what + " must be finite");
  return x;
}

std::vector<double> number_list(const json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + " must be a list");
  std::vector<double> out;
  for (const auto& v : j) out.push_back(finite_number(v, what));
  return out;
}

}  // namespace

Scenario Scenario::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("scenario must be a JSON object");
  static const std::set<std::string> known{"state",   "grid",        "checks",       "times",
                                           "provenance", "options",  "tolerances",   "trajectories",
                                           "conservation", "write_fields", "output_dir"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ConfigError("unknown scenario field '" + k + "'");
  Scenario s;
  if (!j.contains("state")) throw ConfigError("scenario needs a 'state'");
  s.state = state_label_from_json(j["state"]);
  if (j.contains("grid")) s.grid = j["grid"];
  if (j.contains("checks")) s.checks = get_as<std::vector<std::string>>(j, "checks");
  if (j.contains("times")) s.times = number_list(j["times"], "times");
  if (j.contains("provenance")) s.provenance = provenance_of(get_as<std::string>(j, "provenance"));
  if (j.contains("options")) {
    const json& o = j["options"];
    if (!o.is_object()) throw ConfigError("options must be an object");
    for (const auto& [k, v] : o.items()) {
      if (k == "margin")
        s.options.margin = get_as<int>(o, k);
      else if (k == "sign")
        s.options.sign = sign_of(get_as<std::string>(o, k));
      else if (k == "split_a")
        s.options.split_a = finite_number(v, "options.split_a");
      else if (k == "energy")
        s.options.energy = finite_number(v, "options.energy");
      else if (k == "node_threshold")
        s.options.node_threshold = finite_number(v, "options.node_threshold");
      else if (k == "keep_pointwise")
        s.options.keep_pointwise = get_as<bool>(o, k);
      else
        throw ConfigError("unknown option '" + k + "'");
    }
    if (s.options.margin < 0) throw ConfigError("options.margin must be non-negative");
  }
  if (j.contains("tolerances")) {
    if (!j["tolerances"].is_object()) throw ConfigError("tolerances must be an object");
    for (const auto& [k, v] : j["tolerances"].items()) s.tolerances[k] = finite_number(v, "tolerances." + k);
  }
  if (j.contains("trajectories")) {
    if (!j["trajectories"].is_array()) throw ConfigError("trajectories must be a list");
    for (const auto& t : j["trajectories"]) {
      if (!t.is_object()) throw ConfigError("trajectory entries must be objects");
      TrajectoryRequest r;
      for (const auto& [k, v] : t.items()) {
        if (k == "seed") {
          const auto xs = number_list(v, "trajectory seed");
          if (xs.empty() || xs.size() > 3) throw ConfigError("trajectory seed needs 1 to 3 coordinates");
          for (std::size_t q = 0; q < xs.size(); ++q) r.seed[q] = xs[q];
        } else if (k == "velocity") {
          try {
            r.kind = parse_velocity_kind(get_as<std::string>(t, k));
          } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
          }
        } else if (k == "dt") {
          r.dt = finite_number(v, "trajectory dt");
        } else if (k == "steps") {
          r.steps = get_as<int>(t, k);
        } else if (k == "t0") {
          r.t0 = finite_number(v, "trajectory t0");
        } else if (k == "spin_sign") {
          r.spin_sign = sign_of(get_as<std::string>(t, k));
        } else if (k == "renormalize") {
          r.renormalize_spin = get_as<bool>(t, k);
        } else {
          throw ConfigError("unknown trajectory field '" + k + "'");
        }
      }
      if (!(r.dt > 0.0) || r.steps < 0) throw ConfigError("trajectory needs dt > 0 and steps >= 0");
      s.trajectories.push_back(r);
    }
  }
  if (j.contains("conservation")) {
    const json& c = j["conservation"];
    if (!c.is_object() || !c.contains("times") || c.size() != 1)
      throw ConfigError("conservation must be {\"times\": [...]}");
    s.conservation_times = number_list(c["times"], "conservation.times");
  }
  if (j.contains("write_fields")) s.write_fields = get_as<bool>(j, "write_fields");
  if (j.contains("output_dir")) s.output_dir = get_as<std::string>(j, "output_dir");
  return s;
}

Scenario Scenario::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read scenario file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("scenario file '" + path + "' is not valid JSON: " + e.what());
  }
  return from_json(j);
}

json Scenario::to_json() const {
  json j;
  j["state"] = state;
  j["grid"] = grid;
  j["checks"] = checks;
  j["times"] = times;
  j["provenance"] = qfl::to_string(provenance);
  json o;
  o["margin"] = options.margin;
  o["sign"] = qfl::to_string(options.sign);
  o["split_a"] = options.split_a;
  o["node_threshold"] = options.node_threshold;
  o["keep_pointwise"] = options.keep_pointwise;
  if (options.energy) o["energy"] = *options.energy;
  j["options"] = o;
  j["tolerances"] = tolerances;
  json trs = json::array();
  for (const auto& t : trajectories)
    trs.push_back({{"seed", {t.seed[0], t.seed[1], t.seed[2]}},
                   {"velocity", qfl::to_string(t.kind)},
                   {"dt", t.dt},
                   {"steps", t.steps},
                   {"t0", t.t0},
                   {"spin_sign", qfl::to_string(t.spin_sign)},
                   {"renormalize", t.renormalize_spin}});
  j["trajectories"] = trs;
  if (conservation_times) j["conservation"] = {{"times", *conservation_times}};
  j["write_fields"] = write_fields;
  return j;
}

// ---- run -----------------------------------------------------------------------

namespace {

std::string time_tag(std::size_t k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "t%03zu", k);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

json conservation_block(const AnalyticState& state, const GridPtr& grid, const std::vector<double>& times, int jobs,
                        ConservationSeries& series) {
  std::vector<AnalyticState> comps;
  std::vector<Cx> coeffs;
  if (state.components().empty()) {
    comps.push_back(state);
    coeffs.push_back(Cx(1.0));
  } else {
    for (const auto& c : state.components()) {
      comps.push_back(*c.state);
      coeffs.push_back(c.coeff);
    }
  }
  try {
    series = conservation_experiment(comps, coeffs, times, grid, jobs);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  double mean = 0.0, spread = 0.0, theta = 0.0;
  for (double e : series.E_S_avg) mean += e;
  mean /= static_cast<double>(std::max<std::size_t>(1, series.E_S_avg.size()));
  for (double e : series.E_S_avg) spread += (e - mean) * (e - mean);
  spread = std::sqrt(spread / static_cast<double>(std::max<std::size_t>(1, series.E_S_avg.size())));
  for (double e : series.E_theta_avg) theta = std::max(theta, std::abs(e));
  const double tol = 1e-8 * std::max(1.0, std::abs(mean));
  json j = series.to_json();
  j["E_S_avg_mean"] = mean;
  j["E_S_avg_stddev"] = spread;
  j["E_theta_avg_max_abs"] = theta;
  j["tolerance"] = tol;
  j["passed"] = spread < tol && theta < 1e-8 && std::abs(mean - series.expected_E_S) < tol && series.norm_ok();
  return j;
}

}  // namespace

RunResult run_scenario(const Scenario& sc, int jobs, bool write_outputs) {
  const auto started = std::chrono::system_clock::now();
  const auto t_start = std::chrono::steady_clock::now();

  AnalyticState state = [&] {
    try {
      return parse_state(sc.state);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("state: ") + e.what());
    }
  }();
  for (const auto& id : sc.checks) find_check(id);  // UnknownCheckError before any work
  for (const auto& [id, tol] : sc.tolerances) {
    find_check(id);
    if (!(tol > 0.0)) throw ConfigError("tolerance for " + id + " must be positive");
  }
  const GridPtr grid = grid_from_json(sc.grid, state);
  const fs::path out_dir(sc.output_dir);

  // Every (time, check) pair, in time-major order.
  struct Job {
    std::size_t time_index;
    std::string id;
  };
  std::vector<Job> work;
  for (std::size_t k = 0; k < sc.times.size(); ++k)
    for (const auto& id : sc.checks) work.push_back({k, id});
  std::vector<ResidualReport> reports(work.size());
  std::vector<std::string> errors(work.size());
  std::vector<double> seconds(work.size(), 0.0);
  parallel_for(work.size(), jobs, [&](std::size_t i) {
    const auto t0 = std::chrono::steady_clock::now();
    CheckOptions opt = sc.options;
    opt.provenance = sc.provenance;
    if (auto it = sc.tolerances.find(work[i].id); it != sc.tolerances.end()) opt.tolerance = it->second;
    try {
      reports[i] = run_check(work[i].id, state, grid, sc.times[work[i].time_index], opt);
    } catch (const std::invalid_argument& e) {
      // Check does not apply to this state (wrong body count, missing energy).
      errors[i] = e.what();
    } catch (const std::domain_error& e) {
      errors[i] = e.what();
    }
    seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });

  RunResult result;
  json& m = result.manifest;
  m["schema_version"] = "1";
  m["tool"] = "qfl";
  json scen = sc.to_json();
  m["scenario"] = scen;
  m["state"] = state.label();
  m["grid"] = grid->meta();
  m["provenance"] = to_string(sc.provenance);
  json checks = json::array();
  std::size_t passed = 0, failed = 0;
  for (std::size_t i = 0; i < work.size(); ++i) {
    const std::string file = "residuals/" + work[i].id + "_" + time_tag(work[i].time_index) + ".json";
    json entry;
    entry["equation_id"] = work[i].id;
    entry["label"] = find_check(work[i].id).label;
    entry["t"] = sc.times[work[i].time_index];
    if (!errors[i].empty()) {
      entry["passed"] = false;
      entry["error"] = errors[i];
      ++failed;
    } else {
      const ResidualReport& r = reports[i];
      entry["passed"] = r.passed;
      entry["residual_linf"] = r.residual_linf;
      entry["residual_l2"] = r.residual_l2;
      entry["tolerance"] = r.tolerance;
      entry["precondition_ok"] = r.precondition_ok;
      entry["file"] = file;
      (r.passed ? passed : failed)++;
      if (write_outputs) write_text(out_dir / file, r.to_json().dump(2) + "\n");
    }
    checks.push_back(entry);
  }

  if (write_outputs && sc.write_fields) {
    for (std::size_t k = 0; k < sc.times.size(); ++k) {
      const FieldBundle fb = bundle(state, grid, sc.times[k], sc.provenance, {sc.options.sign, sc.options.node_threshold});
      std::ostringstream csv;
      write_csv(csv, *grid, fb.columns(), fb.mask);
      write_text(out_dir / ("fields_" + time_tag(k) + ".csv"), csv.str());
    }
  }

  json trajectories = json::array();
  {
    std::vector<TrajectorySpec> specs;
    for (const auto& t : sc.trajectories) {
      TrajectorySpec s;
      s.seed = t.seed;
      s.kind = t.kind;
      s.dt = t.dt;
      s.steps = t.steps;
      s.t0 = t.t0;
      s.options.velocity = {t.spin_sign, t.renormalize_spin};
      s.options.node_threshold = sc.options.node_threshold;
      specs.push_back(s);
    }
    std::vector<Trajectory> trs;
    try {
      trs = integrate_trajectories(state, specs, jobs);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    for (std::size_t i = 0; i < trs.size(); ++i) {
      json s = trs[i].summary();
      const std::string file = "trajectories/trajectory_" + std::to_string(i) + ".csv";
      s["file"] = file;
      trajectories.push_back(s);
      if (write_outputs) {
        std::ostringstream csv;
        trs[i].write_csv(csv);
        write_text(out_dir / file, csv.str());
      }
    }
  }
  m["trajectories"] = trajectories;

  if (sc.conservation_times) {
    ConservationSeries series;
    json c = conservation_block(state, grid, *sc.conservation_times, jobs, series);
    c["file"] = "conservation.csv";
    (c["passed"].get<bool>() ? passed : failed)++;
    if (write_outputs) {
      std::ostringstream csv;
      series.write_csv(csv);
      write_text(out_dir / "conservation.csv", csv.str());
    }
    m["conservation"] = c;
  }

  m["checks"] = checks;
  m["summary"] = {{"total", passed + failed}, {"passed", passed}, {"failed", failed}};
  result.passed = failed == 0;
  m["passed"] = result.passed;

  const std::time_t stamp = std::chrono::system_clock::to_time_t(started);
  char iso[32];
  std::strftime(iso, sizeof iso, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&stamp));
  json& timing = result.timing;
  timing["started_utc"] = iso;
  timing["jobs"] = jobs;
  timing["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  json per = json::array();
  for (std::size_t i = 0; i < work.size(); ++i)
    per.push_back({{"equation_id", work[i].id}, {"t", sc.times[work[i].time_index]}, {"seconds", seconds[i]}});
  timing["checks"] = per;

  if (write_outputs) {
    write_text(out_dir / "manifest.json", m.dump(2) + "\n");
    write_text(out_dir / "timing.json", timing.dump(2) + "\n");
  }
  return result;
}

std::string list_checks_table() {
  std::vector<std::string> heads;
  std::size_t width = 0;
  for (const auto& c : check_registry()) {
    heads.push_back(c.id + " → Eq. (" + c.label + ")");
    width = std::max(width, heads.back().size());
  }
  std::ostringstream os;
  for (std::size_t i = 0; i < heads.size(); ++i)
    os << heads[i] << std::string(width - heads[i].size() + 2, ' ') << check_registry()[i].description << "\n";
  return os.str();
}

int resolve_jobs(std::optional<int> requested) {
  int jobs = requested.value_or(static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
  if (jobs < 1) throw ConfigError("--jobs must be at least 1");
  if (const char* env = std::getenv("QFL_JOBS"); env && *env) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (*end != '\0' || cap < 1) throw ConfigError(std::string("QFL_JOBS must be a positive integer, not '") + env + "'");
    jobs = std::min<long>(jobs, cap);
  }
  return jobs;
}

}  // namespace qfl
