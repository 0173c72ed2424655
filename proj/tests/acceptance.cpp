// Acceptance suite: one PASS/FAIL line per criterion. Reference values come
// from closed forms written out here, not from the library's own state data.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qfl/dynamics.hpp"
#include "qfl/residuals.hpp"

namespace {

using namespace qfl;
using Clock = std::chrono::steady_clock;

constexpr double kPi = 3.14159265358979323846;

struct Outcome {
  bool ok = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail << " [" << what << "]";
    }
  }
};

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", x);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Hydrogen ns densities up to normalisation, for |u| = |rho'| / (2 rho).
double hydrogen_u_speed(int n, double r) {
  if (n == 1) return 1.0;
  // rho ~ (2 - r)^2 exp(-r): rho'/rho = -2/(2 - r) - 1
  return 0.5 * std::abs(-2.0 / (2.0 - r) - 1.0);
}

double box_energy(int k, double L) { return k * k * kPi * kPi / (2.0 * L * L); }

GridPtr box_grid(int n, double lo, double hi) { return share(Grid::cartesian({Axis::bounded(n, lo, hi)})); }

// Least-squares slope of log(err) against log(h).
double fitted_order(const std::vector<double>& h, const std::vector<double>& err) {
  const double n = static_cast<double>(h.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double x = std::log(h[i]), y = std::log(err[i]);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// ---- 1 ------------------------------------------------------------------------

Outcome criterion1() {
  Outcome o;
  const auto t0 = Clock::now();
  const AnalyticState s = hydrogen_ns(1);
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> radius(0.01, 20.0), cosine(-1.0, 1.0), angle(0.0, 2 * kPi);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double r = radius(rng), c = cosine(rng), a = angle(rng), sn = std::sqrt(1 - c * c);
    const Config x{r * sn * std::cos(a), r * sn * std::sin(a), r * c};
    const PointFields f = point_fields(s, x, 0.0);
    const double speed = std::sqrt(f.u_minus[0] * f.u_minus[0] + f.u_minus[1] * f.u_minus[1] +
                                   f.u_minus[2] * f.u_minus[2]);
    worst = std::max(worst, std::abs(speed - 1.0));
  }
  const double dt = seconds_since(t0);
  o.require(worst < 1e-10, "max ||u|-1| = " + sci(worst));
  o.require(dt < 1.0, "took " + std::to_string(dt) + " s");
  o.detail << " max||u|-1|=" << sci(worst) << " time=" << dt << "s";
  return o;
}

// ---- 2 ------------------------------------------------------------------------

struct BernoulliResult {
  double analytic_linf = 0.0;
  std::vector<double> grid_linf;
  std::vector<double> ratios;
};

BernoulliResult bernoulli_study(const AnalyticState& s, double energy, double r_lo, double r_hi) {
  BernoulliResult out;
  CheckOptions a;
  a.energy = energy;
  out.analytic_linf = check_bernoulli(s, share(Grid::radial_log(400, 1e-4, 40.0)), 0.0, a).residual_linf;
  CheckOptions g = a;
  g.provenance = Provenance::grid;
  for (int n = 50, k = 0; k < 4; ++k, n = 2 * n - 1) {
    out.grid_linf.push_back(check_bernoulli(s, share(Grid::radial_log(n, r_lo, r_hi)), 0.0, g).residual_linf);
    if (k) out.ratios.push_back(out.grid_linf[k - 1] / out.grid_linf[k]);
  }
  return out;
}

bool bernoulli_ok(const BernoulliResult& r, Outcome& o, const std::string& name) {
  bool ok = r.analytic_linf < 1e-8;
  o.require(ok, name + " analytic linf " + sci(r.analytic_linf));
  for (double q : r.ratios) {
    o.require(q >= 3.5, name + " refinement ratio " + std::to_string(q));
    ok = ok && q >= 3.5;
  }
  o.detail << " " << name << ": analytic=" << sci(r.analytic_linf) << " ratios=";
  for (double q : r.ratios) o.detail << std::to_string(q).substr(0, 4) << " ";
  return ok;
}

struct Criterion2Input {
  AnalyticState s1, s2;
};

Outcome criterion2_on(const Criterion2Input& in, bool check_time) {
  Outcome o;
  const auto t0 = Clock::now();
  bernoulli_ok(bernoulli_study(in.s1, -0.5, 0.02, 8.0), o, "1s");
  // The 2s node sits at r = 2; the refinement window stays inside it.
  bernoulli_ok(bernoulli_study(in.s2, -0.125, 0.02, 1.5), o, "2s");
  const double dt = seconds_since(t0);
  if (check_time) o.require(dt < 10.0, "took " + std::to_string(dt) + " s");
  o.detail << "time=" << dt << "s";
  return o;
}

// ---- 3, 4 -----------------------------------------------------------------------

GridPtr hydrogen_grid() { return share(Grid::radial_log(600, 1e-5, 60.0)); }

Outcome criterion3() {
  Outcome o;
  auto probe = [&](const AnalyticState& s, const GridPtr& g, const std::string& name) {
    const ResidualReport r = check_ke_expectation(s, g, 0.0);
    const GlobalCheck* c = r.find("integral_P_u");
    const double v = c ? c->value : 1.0;
    o.require(c && std::abs(v) < 1e-8, name + " integral " + sci(v));
    o.detail << " " << name << "=" << sci(v);
  };
  probe(hydrogen_ns(1), hydrogen_grid(), "1s");
  probe(hydrogen_ns(2), hydrogen_grid(), "2s");
  for (int k = 1; k <= 3; ++k) probe(box_1d(k, kPi), box_grid(401, 0.0, kPi), "box" + std::to_string(k));
  return o;
}

Outcome criterion4() {
  Outcome o;
  auto probe = [&](const AnalyticState& s, const GridPtr& g, double expected, const std::string& name) {
    const ResidualReport r = check_ke_expectation(s, g, 0.0);
    const GlobalCheck* tr = r.find("T_from_R_lap_R");
    const GlobalCheck* tu = r.find("T_from_u");
    if (!tr || !tu) {
      o.require(false, name + " missing kinetic integrals");
      return;
    }
    const double rel = std::abs(tr->value - tu->value) / std::abs(expected);
    const double rel_expected = std::abs(tu->value - expected) / std::abs(expected);
    o.require(rel < 1e-6, name + " T_R vs T_u " + sci(rel));
    o.require(rel_expected < 1e-6, name + " T_u vs closed form " + sci(rel_expected));
    o.detail << " " << name << ": rel=" << sci(rel) << " vs_exact=" << sci(rel_expected);
  };
  probe(hydrogen_ns(1), hydrogen_grid(), 0.5, "1s");
  for (int k = 1; k <= 3; ++k)
    probe(box_1d(k, kPi), box_grid(401, 0.0, kPi), box_energy(k, kPi), "box" + std::to_string(k));
  return o;
}

// ---- 5 ------------------------------------------------------------------------

Outcome criterion5() {
  Outcome o;
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Cx c0(u(rng), u(rng)), c1(u(rng), u(rng));
  const double nrm = std::sqrt(std::norm(c0) + std::norm(c1));
  c0 /= nrm, c1 /= nrm;
  const AnalyticState mix = superpose({harmonic_1d(0, 1.0), harmonic_1d(1, 1.0)}, {c0, c1});
  const GridPtr line = box_grid(241, -6.0, 6.0);
  const GridPtr radial = share(Grid::radial_log(400, 1e-4, 40.0));
  struct Case {
    AnalyticState s;
    GridPtr g;
    std::string name;
  };
  const std::vector<Case> cases{{hydrogen_ns(1), radial, "1s"},
                                {hydrogen_ns(2), radial, "2s"},
                                {harmonic_1d(0, 1.0), line, "harmonic0"},
                                {mix, line, "two-mode"}};
  for (const auto& c : cases)
    for (double t : {0.0, 0.3}) {
      const double linf = check_quantum_potential(c.s, c.g, t).residual_linf;
      o.require(linf < 1e-10, c.name + " t=" + std::to_string(t) + " linf " + sci(linf));
      o.detail << " " << c.name << "@" << t << "=" << sci(linf);
    }
  return o;
}

// ---- 6 ------------------------------------------------------------------------

Outcome criterion6() {
  Outcome o;
  const double L = kPi, e1 = box_energy(1, L), e2 = box_energy(2, L);
  const std::vector<AnalyticState> comps{box_1d(1, L), box_1d(2, L)};
  const std::vector<Cx> coeffs{Cx(std::sqrt(0.5)), Cx(std::sqrt(0.5))};
  const double expected = 0.5 * e1 + 0.5 * e2;
  std::vector<double> times;
  for (int k = 0; k < 50; ++k) times.push_back(4 * kPi / (e2 - e1) * k / 49.0);
  const ConservationSeries cs = conservation_experiment(comps, coeffs, times, box_grid(401, 0.0, L));
  double mean = 0.0, sd = 0.0, theta = 0.0;
  for (double e : cs.E_S_avg) mean += e / cs.E_S_avg.size();
  for (double e : cs.E_S_avg) sd += (e - mean) * (e - mean) / cs.E_S_avg.size();
  sd = std::sqrt(sd);
  for (double e : cs.E_theta_avg) theta = std::max(theta, std::abs(e));
  o.require(std::abs(mean - 1.25) < 1e-8 && std::abs(expected - 1.25) < 1e-12, "mean E_S " + std::to_string(mean));
  o.require(sd < 1e-8, "std-dev " + sci(sd));
  o.require(theta < 1e-8, "max |E_theta| " + sci(theta));
  o.detail << " mean=" << mean << " sd=" << sci(sd) << " max|Etheta|=" << sci(theta);

  // Pointwise: finite-difference energy densities against
  // sum_ij conj(C_i phi_i) C_j eps_j phi_j exp(i (eps_i - eps_j) t), written out here.
  const AnalyticState s = superpose(comps, coeffs);
  const double t = 0.7;
  auto closed = [&](double x) {
    const double p1 = std::sqrt(2 / L) * std::sin(kPi * x / L), p2 = std::sqrt(2 / L) * std::sin(2 * kPi * x / L);
    const Cx a1 = coeffs[0] * std::exp(Cx(0, -e1 * t)) * p1, a2 = coeffs[1] * std::exp(Cx(0, -e2 * t)) * p2;
    return std::conj(a1 + a2) * (e1 * a1 + e2 * a2);
  };
  std::vector<double> hs, gaps;
  for (int n = 101; n <= 801; n = 2 * n - 1) {
    const GridPtr g = box_grid(n, 0.0, L);
    const ComplexField psi = sample_psi(s, g, t);
    const ComplexField lap = laplacian(psi, 0);
    double gap = 0.0, scale = 0.0;
    for (std::size_t p = 0; p < g->size(); ++p) {
      if (g->near_edge(p, 1)) continue;
      const Cx numeric = -0.5 * std::conj(psi[p]) * lap[p];
      const Cx exact = closed(g->point(p)[0]);
      gap = std::max(gap, std::abs(numeric - exact));
      scale = std::max(scale, std::abs(exact));
    }
    const double h = g->step();
    o.require(gap <= 10 * h * h * scale, "n=" + std::to_string(n) + " gap " + sci(gap) + " over O(h^2) budget");
    hs.push_back(h);
    gaps.push_back(gap);
  }
  const double order = fitted_order(hs, gaps);
  o.require(order >= 1.8, "closed-form order " + std::to_string(order));
  o.detail << " pointwise_order=" << order;
  return o;
}

// ---- 7 ------------------------------------------------------------------------

std::string box_superposition_label() { return "superpose:sqrt(0.5)@box:k=1,L=pi|sqrt(0.5)@box:k=2,L=pi"; }

// Interior window keeps away from the walls, where terms grow like 1/x.
double euler_order(const AnalyticState& s, Outcome& o) {
  CheckOptions g;
  g.provenance = Provenance::grid;
  std::vector<double> hs, errs;
  for (int n = 81; n <= 641; n = 2 * n - 1) {
    const GridPtr grid = box_grid(n, 0.5, kPi - 0.5);
    const ResidualReport r = check_euler_one_body(s, grid, kPi / 3, g);
    hs.push_back(grid->step());
    errs.push_back(r.residual_linf);
  }
  const double order = fitted_order(hs, errs);
  o.detail << " order=" << order << " finest=" << sci(errs.back());
  return order;
}

Outcome criterion7_on(const AnalyticState& superposition, bool check_time) {
  Outcome o;
  const auto t0 = Clock::now();
  const double order = euler_order(superposition, o);
  o.require(order >= 1.8, "fitted order " + std::to_string(order));
  const ResidualReport nb =
      check_euler_n_body(box_2body(1, 2, kPi), share(Grid::cartesian({Axis::bounded(41, 0.0, kPi),
                                                                       Axis::bounded(41, 0.0, kPi)},
                                                                      2, 1)),
                         0.4);
  const GlobalCheck* cross = nb.find("cross_terms");
  const double cv = cross ? cross->value : 1.0;
  o.require(cross && cv < 1e-10, "cross terms " + sci(cv));
  o.detail << " cross=" << sci(cv);
  const double dt = seconds_since(t0);
  if (check_time) o.require(dt < 60.0, "took " + std::to_string(dt) + " s");
  o.detail << " time=" << dt << "s";
  return o;
}

// ---- 8 ------------------------------------------------------------------------

Outcome criterion8() {
  Outcome o;
  for (int n : {1, 2}) {
    const AnalyticState s = hydrogen_ns(n);
    const double r0 = 1.0, speed = hydrogen_u_speed(n, r0), period = 2 * kPi * r0 / speed;
    const int steps = 2000;
    const Trajectory tr = integrate_trajectory(s, Config{r0, 0.0, 0.0}, VelocityKind::u_spin, period / steps, steps);
    double div = 0.0, drift = 0.0;
    for (std::size_t i = 0; i < tr.points.size(); ++i) {
      const Config& p = tr.points[i];
      div = std::max(div, std::abs(tr.div_mass_flux[i]));
      drift = std::max(drift, std::abs(std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) - r0));
    }
    const Config& end = tr.points.back();
    const double closure = std::hypot(end[0] - r0, end[1]);
    const std::string name = std::to_string(n) + "s";
    o.require(tr.termination == Termination::max_steps, name + " stopped early");
    o.require(div < 1e-8, name + " div " + sci(div));
    o.require(drift < 1e-8, name + " drift " + sci(drift));
    o.require(closure < 1e-6, name + " orbit does not close " + sci(closure));
    o.detail << " " << name << ": div=" << sci(div) << " drift=" << sci(drift) << " closure=" << sci(closure);
  }
  return o;
}

// ---- 9 ------------------------------------------------------------------------

GridPtr cube(int dim) {
  const int n = dim == 1 ? 61 : dim == 2 ? 25 : 11;
  std::vector<Axis> axes(dim, Axis::bounded(n, -2.0, 2.0));
  return share(Grid::cartesian(axes));
}

Outcome criterion9() {
  Outcome o;
  double worst_density = 0.0, worst_velocity = 0.0;
  for (unsigned seed = 1; seed <= 20; ++seed) {
    const int dim = 1 + static_cast<int>(seed % 3);
    const GridPtr g = cube(dim);
    const double a = check_density_identity(random_smooth_state(seed, dim, false), g, 0.0).residual_linf;
    const double b = check_velocity_identities(random_smooth_state(seed, dim, true), g, 0.0).residual_linf;
    o.require(a < 1e-10, "seed " + std::to_string(seed) + " density identity " + sci(a));
    o.require(b < 1e-10, "seed " + std::to_string(seed) + " velocity identities " + sci(b));
    worst_density = std::max(worst_density, a);
    worst_velocity = std::max(worst_velocity, b);
  }
  o.detail << " density=" << sci(worst_density) << " velocity=" << sci(worst_velocity);
  return o;
}

// ---- 10 -----------------------------------------------------------------------

Outcome criterion10() {
  Outcome o;
  const double delta = 1e-3;
  // Centred bumps keep the hydrogen states spherically symmetric.
  const Criterion2Input perturbed{perturb_density(hydrogen_ns(1), delta, Config{0, 0, 0}, 0.5),
                                  perturb_density(hydrogen_ns(2), delta, Config{0, 0, 0}, 0.5)};
  const Outcome c2 = criterion2_on(perturbed, false);
  o.require(!c2.ok, "criterion 2 still passes under perturbation");
  const AnalyticState sup = perturb_density(parse_state(box_superposition_label()), delta, Config{1.2, 0, 0}, 0.3);
  const Outcome c7 = criterion7_on(sup, false);
  o.require(!c7.ok, "criterion 7 still passes under perturbation");
  o.detail << " perturbed c2:" << c2.detail.str() << " | perturbed c7:" << c7.detail.str();
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, criterion1},
      {2, [] { return criterion2_on({hydrogen_ns(1), hydrogen_ns(2)}, true); }},
      {3, criterion3},
      {4, criterion4},
      {5, criterion5},
      {6, criterion6},
      {7, [] { return criterion7_on(parse_state(box_superposition_label()), true); }},
      {8, criterion8},
      {9, criterion9},
      {10, criterion10},
  };
  int failures = 0;
  for (const auto& [id, run] : criteria) {
    Outcome r;
    try {
      r = run();
    } catch (const std::exception& e) {
      r.ok = false;
      r.detail << " exception: " << e.what();
    }
    std::cout << (r.ok ? "PASS" : "FAIL") << " criterion " << id << ":" << r.detail.str() << std::endl;
    failures += r.ok ? 0 : 1;
  }
  return failures ? 1 : 0;
}
