#include "qfl/residuals.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace qfl {

// Atomic units: hbar = m = 1 factors are omitted below.

const GlobalCheck* ResidualReport::find(const std::string& name) const {
  for (const auto& c : global_checks)
    if (c.name == name) return &c;
  return nullptr;
}

nlohmann::json ResidualReport::to_json() const {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : global_checks) {
    nlohmann::json j{{"name", c.name}, {"value", c.value}, {"passed", c.passed}};
    j["expected"] = c.expected ? nlohmann::json(*c.expected) : nlohmann::json(nullptr);
    j["tolerance"] = c.tolerance ? nlohmann::json(*c.tolerance) : nlohmann::json(nullptr);
    j["informational"] = !c.tolerance.has_value();
    checks.push_back(std::move(j));
  }
  nlohmann::json out{{"equation_id", equation_id},
                     {"label", label},
                     {"state", state},
                     {"t", t},
                     {"provenance", to_string(provenance)},
                     {"norms", {{"residual_linf", residual_linf}, {"residual_l2", residual_l2}, {"points", points}}},
                     {"boundary_margin", boundary_margin},
                     {"scale", scale},
                     {"tolerance", tolerance},
                     {"precondition", {{"ok", precondition_ok}, {"detail", precondition}}},
                     {"global_checks", checks},
                     {"notes", notes},
                     {"grid_meta", grid_meta},
                     {"passed", passed}};
  return out;
}

namespace {

std::vector<std::uint8_t> keep_points(const Grid& grid, const Mask& mask, int edge_margin, int margin) {
  const std::size_t n = grid.size();
  std::vector<std::uint8_t> keep(n, 1);
  for (std::size_t i = 0; i < n; ++i)
    if (grid.near_edge(i, edge_margin)) keep[i] = 0;
  if (mask.empty()) return keep;
  const int rank = grid.rank();
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const auto c = grid.unravel(i);
    std::array<int, 3> lo{0, 0, 0}, hi{0, 0, 0};
    for (int a = 0; a < rank; ++a) lo[a] = -margin, hi[a] = margin;
    for (int a = lo[0]; a <= hi[0]; ++a)
      for (int b = lo[1]; b <= hi[1]; ++b)
        for (int e = lo[2]; e <= hi[2]; ++e) {
          std::array<int, 3> q{c[0] + a, c[1] + b, c[2] + e};
          bool inside = true;
          for (int ax = 0; ax < rank; ++ax) {
            const Axis& A = grid.axis(ax);
            if (q[ax] < 0 || q[ax] >= A.n) {
              if (A.topology != Topology::periodic) inside = false;
              q[ax] = (q[ax] % A.n + A.n) % A.n;
            }
          }
          if (inside) keep[grid.ravel(q)] = 0;
        }
  }
  return keep;
}

}  // namespace

std::vector<std::uint8_t> evaluation_points(const Grid& grid, const Mask& mask, int margin) {
  return keep_points(grid, mask, margin, margin);
}

namespace {

constexpr int kT = kTimeVar;
constexpr double kAnalyticTolerance = 1e-8;
constexpr double kGridBudget = 10.0;
// Absolute floor of the grid budget so that vanishing fields compare at rounding level.
constexpr double kRoundoff = 1e-10;
// Rounding allowance relative to the term scale; only matters where terms
// grow far beyond unity, such as next to a Coulomb centre.
constexpr double kRoundingUlps = 64.0;
constexpr double kEps = std::numeric_limits<double>::epsilon();

const std::string& label_of(const std::string& id) {
  static const std::string none;
  for (const auto& c : check_registry())
    if (c.id == id) return c.label;
  return none;
}

class Builder {
 public:
  Builder(std::string id, const AnalyticState* state, std::string state_label, const GridPtr& grid, double t,
          Provenance prov, const CheckOptions& opt, std::vector<std::uint8_t> eval)
      : grid_(grid), prov_(prov), opt_(opt), eval_(std::move(eval)) {
    (void)state;
    r_.equation_id = std::move(id);
    r_.label = label_of(r_.equation_id);
    r_.state = std::move(state_label);
    r_.t = t;
    r_.provenance = prov;
    r_.boundary_margin = opt.margin;
    r_.grid_meta = grid->meta();
    if (opt.keep_pointwise) field_ = ScalarField(grid, "");
  }

  bool evaluated(std::size_t i) const { return eval_[i] != 0; }
  std::size_t size() const { return eval_.size(); }
  double h() const { return grid_->step(); }
  bool analytic() const { return prov_ == Provenance::analytic; }
  double scale() const { return r_.scale; }

  void add(std::size_t i, double residual, double scale) {
    residual = std::isfinite(residual) ? std::abs(residual) : std::numeric_limits<double>::infinity();
    r_.residual_linf = std::max(r_.residual_linf, residual);
    sumsq_ += residual * residual;
    r_.scale = std::max(r_.scale, scale);
    ++r_.points;
    if (field_) (*field_)[i] = residual;
  }

  /// Default tolerance for a quantity of the given magnitude.
  double budget(double scale) const {
    return analytic() ? kAnalyticTolerance + kRoundingUlps * kEps * scale
                      : kGridBudget * h() * h() * scale + kRoundoff;
  }

  void check(std::string name, double value, double expected, double tol) {
    GlobalCheck c{std::move(name), value, expected, tol, std::abs(value - expected) <= tol};
    r_.global_checks.push_back(std::move(c));
  }
  void info(std::string name, double value, std::optional<double> expected = std::nullopt) {
    r_.global_checks.push_back({std::move(name), value, expected, std::nullopt, true});
  }
  void note(std::string s) { r_.notes.push_back(std::move(s)); }
  void fail_precondition(std::string why) {
    r_.precondition_ok = false;
    r_.precondition = std::move(why);
  }
  void precondition(std::string detail) { r_.precondition = std::move(detail); }

  ResidualReport finish() {
    r_.residual_l2 = r_.points ? std::sqrt(sumsq_ / static_cast<double>(r_.points)) : 0.0;
    r_.tolerance = opt_.tolerance ? *opt_.tolerance : budget(r_.scale);
    bool ok = r_.precondition_ok && r_.residual_linf <= r_.tolerance;
    for (const auto& c : r_.global_checks) ok = ok && c.passed;
    r_.passed = ok;
    if (field_) {
      field_->mask.assign(eval_.size(), 0);
      for (std::size_t i = 0; i < eval_.size(); ++i) field_->mask[i] = eval_[i] ? 0 : 1;
      r_.pointwise = std::move(field_);
    }
    return std::move(r_);
  }

 private:
  GridPtr grid_;
  Provenance prov_;
  CheckOptions opt_;
  std::vector<std::uint8_t> eval_;
  ResidualReport r_;
  double sumsq_ = 0.0;
  std::optional<ScalarField> field_;
};

// Everything a state-level check needs on one grid at one time.
struct Setup {
  const AnalyticState* state = nullptr;
  GridPtr grid;
  double t = 0.0;
  CheckOptions opt;
  int nb = 1, d = 1, n = 1;
  bool radial = false;
  ComplexField psi;
  Mask mask;
  std::vector<std::uint8_t> eval;
  // Grid provenance only.
  FieldBundle gb;
  std::vector<double> rho_t, S_t;
};

// `depth` is the number of nested grid derivatives a check takes of phase
// data; garbage from a masked node travels one cell per level.
Setup prepare(const AnalyticState& state, const GridPtr& grid, double t, const CheckOptions& opt, int depth = 0) {
  Setup s;
  s.state = &state;
  s.grid = grid;
  s.t = t;
  s.opt = opt;
  s.radial = grid->kind() == CoordinateKind::radial_log;
  s.nb = state.n_bodies();
  s.d = s.radial ? 3 : state.dim_per_body();
  s.n = s.nb * s.d;
  s.psi = sample_psi(state, grid, t);
  if (opt.provenance == Provenance::grid) {
    s.gb = bundle(state, grid, t, Provenance::grid, {opt.sign, opt.node_threshold});
    s.mask = s.gb.mask;
    s.rho_t.assign(grid->size(), 0.0);
    s.S_t.assign(grid->size(), 0.0);
    for (std::size_t i = 0; i < grid->size(); ++i) {
      const auto j = state.psi_jet<1>(grid->point(i), t);
      s.rho_t[i] = norm(j).d(kT);
      if (!s.mask.empty() && s.mask[i]) continue;
      s.S_t[i] = (j.d(kT) / j.value()).imag();
    }
  } else {
    s.mask = polar_decompose(s.psi, opt.node_threshold).mask;
  }
  const int mask_margin = opt.provenance == Provenance::grid ? std::max(opt.margin, depth) : opt.margin;
  s.eval = keep_points(*grid, s.mask, opt.margin, mask_margin);
  return s;
}

Builder builder(const std::string& id, const Setup& s) {
  return Builder(id, s.state, s.state->label(), s.grid, s.t, s.opt.provenance, s.opt, s.eval);
}

bool is_masked(const Setup& s, std::size_t i) { return !s.mask.empty() && s.mask[i]; }

// ---- finite differences on raw arrays (grid provenance) ---------------------

using Values = std::vector<double>;

// Masked samples at a singularity carry inf/NaN; they are a set of measure zero for the quadrature.
Values finite_part(Values v, const Setup& s) {
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i]) && !s.mask.empty() && s.mask[i]) v[i] = 0.0;
  return v;
}

Values D(const Setup& s, const Values& f, int k) {
  return gradient_component(ScalarField(s.grid, f), k / s.d, k % s.d).values;
}

Values Lap(const Setup& s, const Values& f, int body) { return laplacian(ScalarField(s.grid, f), body).values; }

Values comp(const VectorField& F, int c) {
  Values out(F.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = F.at(i, c);
  return out;
}

// u_minus and v component arrays by configuration coordinate.
Values u_of(const Setup& s, int k, double sign = 1.0) {
  Values u = comp(s.gb.u[k / s.d], k % s.d);
  const double flip = (s.opt.sign == Sign::minus ? 1.0 : -1.0) * sign;
  for (double& x : u) x *= flip;
  return u;
}
Values v_of(const Setup& s, int k) { return comp(s.gb.v[k / s.d], k % s.d); }

Values product(const Values& a, const Values& b) {
  Values out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

// Divergence over the coordinates of every body. On radial grids a sum of
// partials misses the curvature term, so the radial operator is used there.
Values Div(const Setup& s, const std::function<Values(int)>& component) {
  Values out(s.grid->size(), 0.0);
  for (int b = 0; b < s.nb; ++b) {
    VectorField F(s.grid, s.grid->vector_components());
    for (int c = 0; c < s.d; ++c) {
      const Values f = component(b * s.d + c);
      for (std::size_t i = 0; i < out.size(); ++i) F.at(i, c) = f[i];
    }
    const Values d = divergence(F, b).values;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += d[i];
  }
  return out;
}

/// P_v,j = -(1/2) d_j (rho v_j), the flux route. On radial grids the whole
/// divergence is carried by j = 0.
Values pv_flux(const Setup& s, int j) {
  Values f;
  if (s.radial)
    f = j == 0 ? Div(s, [&](int k) { return product(s.gb.rho.values, v_of(s, k)); }) : Values(s.grid->size(), 0.0);
  else
    f = D(s, product(s.gb.rho.values, v_of(s, j)), j);
  for (double& x : f) x *= -0.5;
  return f;
}

Values pu_of(const Setup& s, int b) { return s.gb.P_u[b].values; }

// ---- jets (analytic provenance) -----------------------------------------------

template <int O>
struct Local {
  CJet<O> psi;
  RJet<O> rho;
  int nb, d;

  Local(const Setup& s, std::size_t i)
      : psi(s.state->psi_jet<O>(s.grid->point(i), s.t)), rho(norm(psi)), nb(s.nb), d(s.d) {}

  RJet<O> u(int k) const { return -0.5 * rho.derivative(k) / rho; }
  RJet<O> v(int k) const { return imag(psi.derivative(k) / psi); }
  RJet<O> P_u(int b) const {
    RJet<O> p(0.0);
    for (int c = 0; c < d; ++c) p += rho.derivative(b * d + c).derivative(b * d + c);
    return -0.25 * p;
  }
  RJet<O> P_v() const { return 0.5 * rho.derivative(kT); }
  RJet<O> P_v_flux(int j) const { return -0.5 * (rho * v(j)).derivative(j); }
  RJet<O> sq(bool of_u) const {
    RJet<O> s(0.0);
    for (int k = 0; k < nb * d; ++k) {
      const RJet<O> w = of_u ? u(k) : v(k);
      s += w * w;
    }
    return s;
  }
};

double max_abs(std::initializer_list<double> xs) {
  double m = 0.0;
  for (double x : xs) m = std::max(m, std::abs(x));
  return m;
}

double real_eigen_violation(const Setup& s, std::size_t i) {
  if (s.opt.provenance == Provenance::grid) return std::sqrt(2.0 * s.gb.K_v[i]);
  const auto g = s.state->grad_psi(s.grid->point(i), s.t);
  const Cx p = s.psi[i];
  double m = 0.0;
  for (const Cx& c : g) m = std::max(m, std::abs((c / p).imag()));
  return m;
}

/// Empty when the state is a real eigenstate on the evaluated points.
std::string require_real_eigenstate(const Setup& s, const Builder& b, std::optional<double> energy) {
  if (!energy) return "state " + s.state->label() + " has no eigen-energy";
  double worst = 0.0;
  for (std::size_t i = 0; i < s.grid->size(); ++i)
    if (b.evaluated(i)) worst = std::max(worst, real_eigen_violation(s, i));
  if (worst > b.budget(1.0)) return "phase velocity is nonzero (max |v| = " + std::to_string(worst) + ")";
  return {};
}

double integral_scale(const Values& f, const Grid& g) {
  double m = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) m += std::abs(f[i]) * g.weights()[i];
  return m;
}

}  // namespace

// ---- bundle-level checks -----------------------------------------------------

ResidualReport check_bernoulli(const FieldBundle& fb, double energy, const CheckOptions& opt) {
  CheckOptions o = opt;
  o.provenance = fb.provenance;
  Builder b("bernoulli", nullptr, "", fb.grid, fb.t, fb.provenance, o, evaluation_points(*fb.grid, fb.mask, o.margin));
  const std::size_t n = fb.grid->size();
  double worst_v = 0.0, sum = 0.0, sumsq = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (b.evaluated(i)) worst_v = std::max(worst_v, std::sqrt(2.0 * fb.K_v[i]));
  if (worst_v > b.budget(1.0)) {
    b.fail_precondition("not a real eigenstate: max |v| = " + std::to_string(worst_v));
    return b.finish();
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!b.evaluated(i)) continue;
    double pu = 0.0;
    for (const auto& p : fb.P_u) pu += p[i] / fb.rho[i];
    const double lhs = fb.K_u[i] + pu + fb.U[i];
    b.add(i, lhs - energy, max_abs({fb.K_u[i], pu, fb.U[i], energy}));
    sum += lhs;
    sumsq += lhs * lhs;
    ++count;
  }
  if (count) {
    const double mean = sum / count;
    b.info("lhs_mean", mean, energy);
    b.info("lhs_spread", std::sqrt(std::max(0.0, sumsq / count - mean * mean)));
  }
  b.info("energy", energy);
  return b.finish();
}

ResidualReport check_hamilton_jacobi(const FieldBundle& fb, std::optional<double> energy, const CheckOptions& opt) {
  CheckOptions o = opt;
  o.provenance = fb.provenance;
  Builder b("hamilton_jacobi", nullptr, "", fb.grid, fb.t, fb.provenance, o,
            evaluation_points(*fb.grid, fb.mask, o.margin));
  double stationary = 0.0, stationary_scale = 0.0;
  for (std::size_t i = 0; i < fb.grid->size(); ++i) {
    if (!b.evaluated(i)) continue;
    double pu = 0.0;
    for (const auto& p : fb.P_u) pu += p[i] / fb.rho[i];
    const double space = fb.K_v[i] + fb.K_u[i] + pu + fb.U[i];
    // dS/dt = -E_S
    b.add(i, -fb.E_S[i] + space, max_abs({fb.E_S[i], fb.K_v[i], fb.K_u[i], pu, fb.U[i]}));
    if (energy) {
      stationary = std::max(stationary, std::abs(space - *energy));
      stationary_scale = std::max(stationary_scale, max_abs({fb.K_v[i], fb.K_u[i], pu, fb.U[i], *energy}));
    }
  }
  if (energy) b.check("stationary_form", stationary, 0.0, b.budget(stationary_scale));
  return b.finish();
}

namespace {

ResidualReport relabel(ResidualReport r, const AnalyticState& s) {
  r.state = s.label();
  return r;
}

}  // namespace

ResidualReport check_bernoulli(const AnalyticState& s, const GridPtr& g, double t, const CheckOptions& o) {
  const auto e = o.energy ? o.energy : s.energy();
  if (!e) throw std::invalid_argument("bernoulli: state " + s.label() + " has no eigen-energy (missing E)");
  return relabel(check_bernoulli(bundle(s, g, t, o.provenance, {o.sign, o.node_threshold}), *e, o), s);
}

ResidualReport check_hamilton_jacobi(const AnalyticState& s, const GridPtr& g, double t, const CheckOptions& o) {
  const auto e = o.energy ? o.energy : s.energy();
  return relabel(check_hamilton_jacobi(bundle(s, g, t, o.provenance, {o.sign, o.node_threshold}), e, o), s);
}

// ---- state-level checks ----------------------------------------------------

ResidualReport check_continuity(const AnalyticState& state, const GridPtr& grid, double t, const CheckOptions& opt) {
  Setup s = prepare(state, grid, t, opt);
  Builder b = builder("continuity", s);
  double expansion = 0.0, expansion_scale = 0.0;
  if (b.analytic()) {
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (!b.evaluated(i)) continue;
      const Local<3> L(s, i);
      double div = 0.0, alt = 0.0;
      for (int k = 0; k < s.n; ++k) {
        const auto v = L.v(k);
        div += (L.rho * v).d(k);
        alt += L.rho.d(k) * v.value() + L.rho.value() * v.d(k);
      }
      const double rt = L.rho.d(kT);
      b.add(i, rt + div, max_abs({rt, div}));
      expansion = std::max(expansion, std::abs(div - alt));
      expansion_scale = std::max(expansion_scale, max_abs({div, alt}));
    }
    b.check("expansion_form", expansion, 0.0, 1e-12 * std::max(1.0, expansion_scale));
    return b.finish();
  }
  const Values div = Div(s, [&](int k) { return product(s.gb.rho.values, v_of(s, k)); });
  const Values dv = Div(s, [&](int k) { return v_of(s, k); });
  Values alt(b.size(), 0.0);
  for (std::size_t i = 0; i < b.size(); ++i) alt[i] = s.gb.rho[i] * dv[i];
  for (int k = 0; k < s.n; ++k) {
    const Values v = v_of(s, k);
    const Values gr = D(s, s.gb.rho.values, k);
    for (std::size_t i = 0; i < b.size(); ++i) alt[i] += gr[i] * v[i];
  }
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!b.evaluated(i)) continue;
    b.add(i, s.rho_t[i] + div[i], max_abs({s.rho_t[i], div[i]}));
    expansion = std::max(expansion, std::abs(div[i] - alt[i]));
    expansion_scale = std::max(expansion_scale, max_abs({div[i], alt[i]}));
  }
  b.check("expansion_form", expansion, 0.0, b.budget(expansion_scale));
  return b.finish();
}

ResidualReport check_u_continuity(const AnalyticState& state, const GridPtr& grid, double t, const CheckOptions& opt) {
  Setup s = prepare(state, grid, t, opt);
  Builder b = builder("u_continuity", s);
  const double sg = opt.sign == Sign::plus ? 1.0 : -1.0;
  Values div(b.size(), 0.0), lap(b.size(), 0.0), pu(b.size(), 0.0);
  if (b.analytic()) {
    for (std::size_t i = 0; i < b.size(); ++i) {
      const Local<3> L(s, i);
      for (int k = 0; k < s.n; ++k) lap[i] += L.rho.d2(k, k);
      // At a node only the expanded form is finite.
      if (is_masked(s, i) || L.rho.value() == 0.0)
        div[i] = sg * 0.5 * lap[i];
      else
        for (int k = 0; k < s.n; ++k) div[i] += (L.rho * (-sg) * L.u(k)).d(k);
      for (int bb = 0; bb < s.nb; ++bb) pu[i] += L.P_u(bb).value();
    }
  } else {
    div = Div(s, [&](int k) { return product(s.gb.rho.values, u_of(s, k, -sg)); });
    for (int bb = 0; bb < s.nb; ++bb) {
      const Values l = Lap(s, s.gb.rho.values, bb);
      for (std::size_t i = 0; i < b.size(); ++i) {
        lap[i] += l[i];
        pu[i] += s.gb.P_u[bb][i];
      }
    }
  }
  double source = 0.0, source_scale = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!b.evaluated(i)) continue;
    b.add(i, div[i] - sg * 0.5 * lap[i], max_abs({div[i], 0.5 * lap[i]}));
    // div(rho u_minus) = +2 P_u; flips with the sign of u.
    source = std::max(source, std::abs(div[i] + sg * 2.0 * pu[i]));
    source_scale = std::max(source_scale, max_abs({div[i], 2.0 * pu[i]}));
  }
  b.check("source_equals_2P_u", source, 0.0, b.budget(source_scale));
  div = finite_part(std::move(div), s);
  const Integral total = integrate(div, *grid);
  b.check("integral_div_rho_u", total.value, 0.0, b.analytic() ? 1e-8 : b.budget(integral_scale(div, *grid)));
  for (const auto& w : total.warnings) b.note(w);
  return b.finish();
}

ResidualReport check_laplace_special(const AnalyticState& state, const GridPtr& grid, double t,
                                     const CheckOptions& opt) {
  Setup s = prepare(state, grid, t, opt);
  Builder b = builder("laplace_special", s);
  Values A(b.size(), 0.0), B(b.size(), 0.0), lapS(b.size(), 0.0), ratio(b.size(), 0.0);
  double a_scale = 0.0, b_scale = 0.0;
  if (b.analytic()) {
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (!b.evaluated(i)) continue;
      const Local<3> L(s, i);
      for (int k = 0; k < s.n; ++k) {
        const auto v = L.v(k);
        A[i] += L.rho.d(k) * v.value();
        lapS[i] += v.d(k);
        a_scale = std::max(a_scale, max_abs({L.rho.d(k), v.value()}));
      }
      B[i] = L.rho.d(kT);
      ratio[i] = B[i] / L.rho.value();
      b_scale = std::max(b_scale, L.rho.value());
    }
  } else {
    for (int k = 0; k < s.n; ++k) {
      const Values v = v_of(s, k);
      const Values gr = D(s, s.gb.rho.values, k);
      for (std::size_t i = 0; i < b.size(); ++i) {
        A[i] += gr[i] * v[i];
        if (b.evaluated(i)) a_scale = std::max(a_scale, max_abs({gr[i], v[i]}));
      }
    }
    lapS = Div(s, [&](int k) { return v_of(s, k); });
    for (std::size_t i = 0; i < b.size(); ++i) {
      B[i] = s.rho_t[i];
      ratio[i] = is_masked(s, i) ? 0.0 : B[i] / s.gb.rho[i];
      if (b.evaluated(i)) b_scale = std::max(b_scale, s.gb.rho[i]);
    }
  }
  double a_max = 0.0, b_max = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i)
    if (b.evaluated(i)) a_max = std::max(a_max, std::abs(A[i])), b_max = std::max(b_max, std::abs(B[i]));
  b.info("max_grad_rho_dot_grad_S", a_max);
  b.info("max_drho_dt", b_max);
  const bool orthogonal = a_max <= b.budget(std::max(1.0, a_scale * a_scale));
  const bool stationary = b_max <= b.budget(std::max(1.0, b_scale));
  if (!orthogonal) {
    b.fail_precondition("grad rho . grad S is not zero (max " + std::to_string(a_max) + ")");
    return b.finish();
  }
  b.precondition(stationary ? "case 2: grad rho . grad S = 0 and d rho/dt = 0" : "case 1: grad rho . grad S = 0");
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!b.evaluated(i)) continue;
    const double extra = stationary ? 0.0 : ratio[i];
    b.add(i, lapS[i] + extra, max_abs({lapS[i], extra}));
  }
  return b.finish();
}

ResidualReport check_euler_one_body(const AnalyticState& state, const GridPtr& grid, double t,
                                    const CheckOptions& opt) {
  if (state.n_bodies() != 1) throw std::invalid_argument("euler_one_body: state must have one body");
  Setup s = prepare(state, grid, t, opt);
  Builder b = builder("euler_one_body", s);
  const double a = opt.split_a, bw = 1.0 - a;
  const double a2 = 1.0 - a == a ? 0.25 : 1.0 - a;  // second split for the invariance check
  constexpr int kTerms = 8;
  // terms: rho dv/dt, d(rho u)/dt, rho grad v^2 / 2, rho grad u^2 / 2, grad P_v, div(rho u) u, grad P_u, rho grad U
  std::vector<std::array<Values, kTerms>> terms(s.n);
  for (auto& tk : terms)
    for (auto& v : tk) v.assign(b.size(), 0.0);

  if (b.analytic()) {
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (!b.evaluated(i)) continue;
      const Local<3> L(s, i);
      const auto U = s.state->potential_jet<3>(s.grid->point(i));
      const auto v2 = L.sq(false), u2 = L.sq(true), pv = L.P_v(), pu = L.P_u(0);
      double divru = 0.0;
      for (int k = 0; k < s.n; ++k) divru += (L.rho * L.u(k)).d(k);
      const double rho = L.rho.value();
      for (int k = 0; k < s.n; ++k) {
        const auto u = L.u(k);
        terms[k][0][i] = rho * L.v(k).d(kT);
        terms[k][1][i] = (L.rho * u).d(kT);
        terms[k][2][i] = 0.5 * rho * v2.d(k);
        terms[k][3][i] = 0.5 * rho * u2.d(k);
        terms[k][4][i] = pv.d(k);
        terms[k][5][i] = divru * u.value();
        terms[k][6][i] = pu.d(k);
        terms[k][7][i] = rho * U.d(k);
      }
    }
  } else {
    const Values& rho = s.gb.rho.values;
    Values v2(b.size(), 0.0), u2(b.size(), 0.0), pv(b.size());
    const Values divru = Div(s, [&](int k) { return product(rho, u_of(s, k)); });
    for (int k = 0; k < s.n; ++k) {
      const Values u = u_of(s, k), v = v_of(s, k);
      for (std::size_t i = 0; i < b.size(); ++i) {
        v2[i] += v[i] * v[i];
        u2[i] += u[i] * u[i];
      }
    }
    for (std::size_t i = 0; i < b.size(); ++i) pv[i] = 0.5 * s.rho_t[i];
    for (int k = 0; k < s.n; ++k) {
      const Values u = u_of(s, k);
      const Values dSt = D(s, s.S_t, k), drt = D(s, s.rho_t, k), dv2 = D(s, v2, k), du2 = D(s, u2, k),
                   dpv = D(s, pv, k), dpu = D(s, pu_of(s, 0), k), dU = D(s, s.gb.U.values, k);
      for (std::size_t i = 0; i < b.size(); ++i) {
        terms[k][0][i] = rho[i] * dSt[i];
        terms[k][1][i] = -0.5 * drt[i];
        terms[k][2][i] = 0.5 * rho[i] * dv2[i];
        terms[k][3][i] = 0.5 * rho[i] * du2[i];
        terms[k][4][i] = dpv[i];
        terms[k][5][i] = divru[i] * u[i];
        terms[k][6][i] = dpu[i];
        terms[k][7][i] = rho[i] * dU[i];
      }
    }
  }

  // Identity rho grad(P_u/rho) = div(rho u) u + grad P_u, computed independently.
  std::vector<Values> ident(s.n, Values(b.size(), 0.0));
  if (b.analytic()) {
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (!b.evaluated(i)) continue;
      const Local<3> L(s, i);
      const auto ratio = L.P_u(0) / L.rho;
      for (int k = 0; k < s.n; ++k) ident[k][i] = L.rho.value() * ratio.d(k);
    }
  } else {
    Values ratio(b.size(), 0.0);
    for (std::size_t i = 0; i < b.size(); ++i) ratio[i] = is_masked(s, i) ? 0.0 : s.gb.P_u[0][i] / s.gb.rho[i];
    for (int k = 0; k < s.n; ++k) {
      const Values dk = D(s, ratio, k);
      for (std::size_t i = 0; i < b.size(); ++i) ident[k][i] = s.gb.rho[i] * dk[i];
    }
  }

  double split_err = 0.0, split_inv = 0.0, id_err = 0.0, id_scale = 0.0, free_form = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!b.evaluated(i)) continue;
    double r2 = 0.0, scale = 0.0;
    for (int k = 0; k < s.n; ++k) {
      const auto& T = terms[k];
      double total = 0.0;
      for (int q = 0; q < kTerms; ++q) {
        total += T[q][i];
        scale = std::max(scale, std::abs(T[q][i]));
      }
      const double eq_u = T[1][i] + T[3][i] + T[5][i] + T[6][i] + a * T[7][i];
      const double eq_v = T[0][i] + T[2][i] + T[4][i] + bw * T[7][i];
      const double eq_u2 = T[1][i] + T[3][i] + T[5][i] + T[6][i] + a2 * T[7][i];
      const double eq_v2 = T[0][i] + T[2][i] + T[4][i] + (1.0 - a2) * T[7][i];
      split_err = std::max(split_err, std::abs(eq_u + eq_v - total));
      split_inv = std::max(split_inv, std::abs((eq_u + eq_v) - (eq_u2 + eq_v2)));
      id_err = std::max(id_err, std::abs(ident[k][i] - T[5][i] - T[6][i]));
      id_scale = std::max(id_scale, max_abs({ident[k][i], T[5][i], T[6][i]}));
      free_form = std::max(free_form, std::abs(T[3][i] + T[5][i] + T[6][i] + T[7][i]));
      r2 += total * total;
    }
    b.add(i, std::sqrt(r2), scale);
  }
  const double sc = std::max(1.0, b.scale());
  b.check("split_sum", split_err, 0.0, 1e-12 * sc);
  b.check("split_invariance", split_inv, 0.0, 1e-12 * sc);
  b.check("identity_rho_grad_Pu_over_rho", id_err, 0.0, b.budget(id_scale));
  b.info("stationary_form_max", free_form);
  return b.finish();
}

ResidualReport check_euler_n_body(const AnalyticState& state, const GridPtr& grid, double t, const CheckOptions& opt) {
  if (state.n_bodies() != 2 || state.dim_per_body() != 1)
    throw std::invalid_argument("euler_n_body: requires two one-dimensional bodies");
  Setup s = prepare(state, grid, t, opt, 3);
  Builder b = builder("euler_n_body", s);
  const std::size_t N = b.size();
  // Per body i: own terms, cross terms (j != i), the summed P_v gradient balance and the time derivative of P_u.
  std::array<Values, 2> total, cross, pv_balance, pu_dt_lhs, pu_dt_rhs, scale;
  for (int i = 0; i < 2; ++i)
    for (auto* v : {&total[i], &cross[i], &pv_balance[i], &pu_dt_lhs[i], &pu_dt_rhs[i], &scale[i]}) v->assign(N, 0.0);

  if (b.analytic()) {
    for (std::size_t p = 0; p < N; ++p) {
      if (!b.evaluated(p)) continue;
      const Local<3> L(s, p);
      const Local<4> L4(s, p);
      const auto U = s.state->potential_jet<3>(s.grid->point(p));
      const double rho = L.rho.value();
      for (int i = 0; i < 2; ++i) {
        const auto ui = L.u(i);
        const double own_t = rho * L.v(i).d(kT), drhou = (L.rho * ui).d(kT), body = rho * U.d(i);
        double sum = own_t + drhou + body, pv_sum = 0.0, rhs = 0.0, sc = max_abs({own_t, drhou, body});
        for (int j = 0; j < 2; ++j) {
          const auto vj = L.v(j), uj = L.u(j);
          const double a = 0.5 * rho * (vj * vj).d(i), bb = 0.5 * rho * (uj * uj).d(i), c = L.P_v_flux(j).d(i),
                       e = (L.rho * uj).d(j) * ui.value(), f = L.P_u(j).d(i);
          const double part = a + bb + c + e + f;
          sum += part;
          if (j != i) cross[i][p] += part;
          pv_sum += c;
          sc = std::max(sc, max_abs({a, bb, c, e, f}));
          rhs += -0.5 * L4.P_v_flux(j).d2(i, i);
        }
        MultiIndex m{};
        m[i] = 2;
        m[kT] = 1;
        total[i][p] = sum;
        scale[i][p] = sc;
        pv_balance[i][p] = pv_sum + drhou;
        pu_dt_lhs[i][p] = -0.25 * L4.rho.partial(m);
        pu_dt_rhs[i][p] = rhs;
      }
    }
  } else {
    const Values& rho = s.gb.rho.values;
    std::array<Values, 2> u{u_of(s, 0), u_of(s, 1)}, v{v_of(s, 0), v_of(s, 1)}, pv{pv_flux(s, 0), pv_flux(s, 1)};
    std::array<Values, 2> divru{D(s, product(rho, u[0]), 0), D(s, product(rho, u[1]), 1)};
    for (int i = 0; i < 2; ++i) {
      const Values dSt = D(s, s.S_t, i), drt = D(s, s.rho_t, i), dU = D(s, s.gb.U.values, i);
      const Values lrt = Lap(s, s.rho_t, i);
      for (std::size_t p = 0; p < N; ++p) {
        const double own_t = rho[p] * dSt[p], drhou = -0.5 * drt[p], body = rho[p] * dU[p];
        total[i][p] = own_t + drhou + body;
        pv_balance[i][p] = drhou;
        scale[i][p] = max_abs({own_t, drhou, body});
        pu_dt_lhs[i][p] = -0.25 * lrt[p];
      }
      for (int j = 0; j < 2; ++j) {
        const Values dv2 = D(s, product(v[j], v[j]), i), du2 = D(s, product(u[j], u[j]), i), dpv = D(s, pv[j], i),
                     dpu = D(s, pu_of(s, j), i), lpv = Lap(s, pv[j], i);
        for (std::size_t p = 0; p < N; ++p) {
          const double a = 0.5 * rho[p] * dv2[p], bb = 0.5 * rho[p] * du2[p], c = dpv[p], e = divru[j][p] * u[i][p],
                       f = dpu[p];
          const double part = a + bb + c + e + f;
          total[i][p] += part;
          if (j != i) cross[i][p] += part;
          pv_balance[i][p] += c;
          scale[i][p] = std::max(scale[i][p], max_abs({a, bb, c, e, f}));
          pu_dt_rhs[i][p] += -0.5 * lpv[p];
        }
      }
    }
  }

  double worst_cross = 0.0, worst_pv_balance = 0.0, worst_pu_dt = 0.0, scale_pu_dt = 0.0;
  for (std::size_t p = 0; p < N; ++p) {
    if (!b.evaluated(p)) continue;
    b.add(p, std::hypot(total[0][p], total[1][p]), std::max(scale[0][p], scale[1][p]));
    for (int i = 0; i < 2; ++i) {
      worst_cross = std::max(worst_cross, std::abs(cross[i][p]));
      worst_pv_balance = std::max(worst_pv_balance, std::abs(pv_balance[i][p]));
      worst_pu_dt = std::max(worst_pu_dt, std::abs(pu_dt_lhs[i][p] - pu_dt_rhs[i][p]));
      scale_pu_dt = std::max(scale_pu_dt, max_abs({pu_dt_lhs[i][p], pu_dt_rhs[i][p]}));
    }
  }
  const double sc = b.scale();
  b.check("pv_gradient_sum", worst_pv_balance, 0.0, b.budget(sc));
  b.check("pu_time_derivative", worst_pu_dt, 0.0, b.budget(scale_pu_dt));
  const bool separable = state.components().empty() && state.exact_solution();
  if (separable)
    b.check("cross_terms", worst_cross, 0.0, b.analytic() ? 1e-10 * std::max(1.0, sc) : b.budget(sc));
  else
    b.info("cross_terms", worst_cross);
  return b.finish();
}

ResidualReport check_pressure_gradient(const AnalyticState& state, const GridPtr& grid, double t,
                                       const CheckOptions& opt) {
  Setup s = prepare(state, grid, t, opt, 3);
  Builder b = builder("pressure_gradient", s);
  const std::size_t N = b.size();
  std::vector<Values> r(s.n, Values(N, 0.0)), sc(s.n, Values(N, 0.0));
  Values theta_gap(N, 0.0), theta_scale(N, 0.0);
  if (b.analytic()) {
    for (std::size_t p = 0; p < N; ++p) {
      if (!b.evaluated(p)) continue;
      const Local<3> L(s, p);
      RJet<3> pv(0.0);
      for (int j = 0; j < s.n; ++j) pv += L.P_v_flux(j);
      for (int k = 0; k < s.n; ++k) {
        const double g = pv.d(k), dt = (L.rho * L.u(k)).d(kT);
        r[k][p] = g + dt;
        sc[k][p] = max_abs({g, dt});
      }
      const double e_theta = 0.5 * L.rho.d(kT) / L.rho.value(), ratio = pv.value() / L.rho.value();
      theta_gap[p] = e_theta - ratio;
      theta_scale[p] = max_abs({e_theta, ratio});
    }
  } else {
    Values pv(N, 0.0);
    for (int j = 0; j < s.n; ++j) {
      const Values f = pv_flux(s, j);
      for (std::size_t p = 0; p < N; ++p) pv[p] += f[p];
    }
    for (int k = 0; k < s.n; ++k) {
      const Values g = D(s, pv, k), drt = D(s, s.rho_t, k);
      for (std::size_t p = 0; p < N; ++p) {
        r[k][p] = g[p] - 0.5 * drt[p];
        sc[k][p] = max_abs({g[p], 0.5 * drt[p]});
      }
    }
    for (std::size_t p = 0; p < N; ++p) {
      if (is_masked(s, p)) continue;
      const double e_theta = s.gb.E_theta[p], ratio = pv[p] / s.gb.rho[p];
      theta_gap[p] = e_theta - ratio;
      theta_scale[p] = max_abs({e_theta, ratio});
    }
  }
  double gap = 0.0, gap_scale = 0.0;
  for (std::size_t p = 0; p < N; ++p) {
    if (!b.evaluated(p)) continue;
    double r2 = 0.0, m = 0.0;
    for (int k = 0; k < s.n; ++k) r2 += r[k][p] * r[k][p], m = std::max(m, sc[k][p]);
    b.add(p, std::sqrt(r2), m);
    gap = std::max(gap, std::abs(theta_gap[p]));
    gap_scale = std::max(gap_scale, theta_scale[p]);
  }
  b.check("E_theta_equals_P_v_over_rho", gap, 0.0, b.budget(gap_scale));
  return b.finish();
}

ResidualReport check_energy_gradients(const AnalyticState& state, const GridPtr& grid, double t,
                                      const CheckOptions& opt) {
  Setup s = prepare(state, grid, t, opt, 3);
  Builder b = builder("energy_gradients", s);
  const std::size_t N = b.size();
  std::vector<Values> rS(s.n, Values(N, 0.0)), rT(s.n, Values(N, 0.0)), sc(s.n, Values(N, 0.0));
  if (b.analytic()) {
    for (std::size_t p = 0; p < N; ++p) {
      if (!b.evaluated(p)) continue;
      const Local<3> L(s, p);
      const RJet<3> kin = 0.5 * L.sq(false) + 0.5 * L.sq(true), U = s.state->potential_jet<3>(s.grid->point(p));
      RJet<3> comp(0.0);
      for (int bb = 0; bb < s.nb; ++bb) comp += L.P_u(bb) / L.rho;
      const RJet<3> es = kin + comp + U;
      RJet<3> pv(0.0);
      for (int j = 0; j < s.n; ++j) pv += L.P_v_flux(j);
      const RJet<3> et = pv / L.rho;
      for (int k = 0; k < s.n; ++k) {
        const double a = es.d(k), dv = L.v(k).d(kT), c = et.d(k), du = L.u(k).d(kT);
        rS[k][p] = a + dv;
        rT[k][p] = c + du;
        sc[k][p] = max_abs({kin.d(k), comp.d(k), U.d(k), dv, c, du});
      }
    }
  } else {
    Values kin(N, 0.0), comp_e(N, 0.0), pv(N, 0.0), et(N, 0.0), lnr_t(N, 0.0);
    for (int j = 0; j < s.n; ++j) {
      const Values f = pv_flux(s, j);
      for (std::size_t p = 0; p < N; ++p) pv[p] += f[p];
    }
    for (std::size_t p = 0; p < N; ++p) {
      if (is_masked(s, p)) continue;
      double pu = 0.0;
      for (int bb = 0; bb < s.nb; ++bb) pu += s.gb.P_u[bb][p] / s.gb.rho[p];
      kin[p] = s.gb.K_v[p] + s.gb.K_u[p];
      comp_e[p] = pu;
      et[p] = pv[p] / s.gb.rho[p];
      lnr_t[p] = s.rho_t[p] / s.gb.rho[p];
    }
    for (int k = 0; k < s.n; ++k) {
      const Values dk = D(s, kin, k), dc = D(s, comp_e, k), dU = D(s, s.gb.U.values, k), dv = D(s, s.S_t, k),
                   c = D(s, et, k), dl = D(s, lnr_t, k);
      for (std::size_t p = 0; p < N; ++p) {
        rS[k][p] = dk[p] + dc[p] + dU[p] + dv[p];
        rT[k][p] = c[p] - 0.5 * dl[p];
        sc[k][p] = max_abs({dk[p], dc[p], dU[p], dv[p], c[p], 0.5 * dl[p]});
      }
    }
  }
  double worst_S = 0.0, worst_T = 0.0;
  for (std::size_t p = 0; p < N; ++p) {
    if (!b.evaluated(p)) continue;
    double r2 = 0.0, m = 0.0;
    for (int k = 0; k < s.n; ++k) {
      r2 += rS[k][p] * rS[k][p] + rT[k][p] * rT[k][p];
      m = std::max(m, sc[k][p]);
      worst_S = std::max(worst_S, std::abs(rS[k][p]));
      worst_T = std::max(worst_T, std::abs(rT[k][p]));
    }
    b.add(p, std::sqrt(r2), m);
  }
  b.info("max_residual_E_S", worst_S);
  b.info("max_residual_E_theta", worst_T);
  return b.finish();
}

namespace {

// -R lap R / 2 (summed over bodies), rho K_u and P_u per body at every grid point.
struct KineticDensities {
  Values t_R, t_u;
  std::vector<Values> p_u;
  Values k_u_rho;  // rho K_u off nodes
};

KineticDensities kinetic_densities(const Setup& s, bool need_all_points) {
  const std::size_t N = s.grid->size();
  KineticDensities k;
  k.t_R.assign(N, 0.0);
  k.t_u.assign(N, 0.0);
  k.k_u_rho.assign(N, 0.0);
  k.p_u.assign(s.nb, Values(N, 0.0));
  if (s.opt.provenance == Provenance::analytic) {
    for (std::size_t p = 0; p < N; ++p) {
      if (!need_all_points && !s.eval[p]) continue;
      const Local<3> L(s, p);
      const Cx psi = L.psi.value();
      const double rho = L.rho.value();
      double lap_re = 0.0, grad2 = 0.0, flux2 = 0.0, grho2 = 0.0;
      for (int q = 0; q < s.n; ++q) {
        lap_re += (std::conj(psi) * L.psi.d2(q, q)).real();
        grad2 += std::norm(L.psi.d(q));
        const double f = (std::conj(psi) * L.psi.d(q)).imag();
        flux2 += f * f;
        grho2 += L.rho.d(q) * L.rho.d(q);
      }
      // R lap R = Re(Psi* lap Psi) + |Im(Psi* grad Psi)|^2 / rho, finite through nodes.
      k.t_R[p] = -0.5 * (lap_re + (rho > 0.0 ? flux2 / rho : 0.0));
      k.t_u[p] = rho > 0.0 ? grho2 / (8.0 * rho) : 0.5 * grad2;
      k.k_u_rho[p] = k.t_u[p];
      for (int bb = 0; bb < s.nb; ++bb) k.p_u[bb][p] = L.P_u(bb).value();
    }
    return k;
  }
  // Same node-safe forms on finite differences of Psi and rho; R = |Psi| has a
  // kink at a sign change of a real state, Psi does not.
  std::vector<Cx> lap(N, Cx(0.0));
  Values grad2(N, 0.0), flux2(N, 0.0), grho2(N, 0.0);
  for (int bb = 0; bb < s.nb; ++bb) {
    const ComplexField l = laplacian(s.psi, bb);
    const ComplexVectorField g = gradient(s.psi, bb);
    for (std::size_t p = 0; p < N; ++p) {
      lap[p] += l[p];
      for (int c = 0; c < g.components; ++c) {
        grad2[p] += std::norm(g.at(p, c));
        const double f = (std::conj(s.psi[p]) * g.at(p, c)).imag();
        flux2[p] += f * f;
      }
    }
    k.p_u[bb] = s.gb.P_u[bb].values;
  }
  for (int q = 0; q < s.n; ++q) {
    const Values g = D(s, s.gb.rho.values, q);
    for (std::size_t p = 0; p < N; ++p) grho2[p] += g[p] * g[p];
  }
  for (std::size_t p = 0; p < N; ++p) {
    const double rho = std::norm(s.psi[p]);
    const bool node = is_masked(s, p) || rho == 0.0;
    k.t_R[p] = -0.5 * ((std::conj(s.psi[p]) * lap[p]).real() + (node ? 0.0 : flux2[p] / rho));
    k.t_u[p] = node ? 0.5 * grad2[p] : grho2[p] / (8.0 * rho);
  }
  for (std::size_t p = 0; p < N; ++p) k.k_u_rho[p] = is_masked(s, p) ? 0.0 : s.gb.rho[p] * s.gb.K_u[p];
  return k;
}

void add_ke_integrand(Builder& b, const Setup& s, const KineticDensities& k) {
  for (std::size_t p = 0; p < b.size(); ++p) {
    if (!b.evaluated(p)) continue;
    double pu = 0.0, sc = max_abs({k.t_R[p], k.k_u_rho[p]});
    for (int bb = 0; bb < s.nb; ++bb) pu += k.p_u[bb][p], sc = std::max(sc, std::abs(k.p_u[bb][p]));
    b.add(p, k.t_R[p] - k.k_u_rho[p] - pu, sc);
  }
}

}  // namespace

ResidualReport check_ke_expectation(const AnalyticState& state, const GridPtr& grid, double t,
                                    const CheckOptions& opt) {
  Setup s = prepare(state, grid, t, opt);
  Builder b = builder("ke_expectation", s);
  const std::string why = require_real_eigenstate(s, b, opt.energy ? opt.energy : state.energy());
  if (!why.empty()) {
    b.fail_precondition(why);
    return b.finish();
  }
  KineticDensities k = kinetic_densities(s, true);
  add_ke_integrand(b, s, k);
  k.t_R = finite_part(std::move(k.t_R), s);
  k.t_u = finite_part(std::move(k.t_u), s);
  for (auto& p : k.p_u) p = finite_part(std::move(p), s);
  const Integral tr = integrate(k.t_R, *grid), tu = integrate(k.t_u, *grid);
  b.info("T_from_R_lap_R", tr.value);
  b.info("T_from_u", tu.value);
  const double tol = b.analytic() ? kAnalyticTolerance
                                  : b.budget(std::max(integral_scale(k.t_R, *grid), integral_scale(k.t_u, *grid)));
  b.check("T_difference", tr.value - tu.value, 0.0, tol);
  for (int bb = 0; bb < s.nb; ++bb) {
    const Integral pu = integrate(k.p_u[bb], *grid);
    b.check("integral_P_u" + (s.nb > 1 ? "_" + std::to_string(bb + 1) : std::string()), pu.value, 0.0,
            b.analytic() ? kAnalyticTolerance : b.budget(integral_scale(k.p_u[bb], *grid)));
    for (const auto& w : pu.warnings) b.note(w);
  }
  for (const auto& w : tr.warnings) b.note(w);
  return b.finish();
}

ResidualReport check_ke_integrand(const AnalyticState& state, const GridPtr& grid, double t, const CheckOptions& opt) {
  Setup s = prepare(state, grid, t, opt);
  Builder b = builder("ke_integrand", s);
  add_ke_integrand(b, s, kinetic_densities(s, false));
  return b.finish();
}

ResidualReport check_quantum_potential(const AnalyticState& state, const GridPtr& grid, double t,
                                       const CheckOptions& opt) {
  Setup s = prepare(state, grid, t, opt);
  Builder b = builder("quantum_potential", s);
  for (std::size_t p = 0; p < b.size(); ++p) {
    if (!b.evaluated(p)) continue;
    double q, ku = 0.0, pu = 0.0;
    if (b.analytic()) {
      const Local<3> L(s, p);
      const RJet<3> R = sqrt(L.rho);
      double lap = 0.0;
      for (int k = 0; k < s.n; ++k) {
        lap += R.d2(k, k);
        const double u = L.u(k).value();
        ku += 0.5 * u * u;
      }
      q = -0.5 * lap / R.value();
      for (int bb = 0; bb < s.nb; ++bb) pu += L.P_u(bb).value() / L.rho.value();
    } else {
      q = s.gb.Q[p];
      ku = s.gb.K_u[p];
      for (int bb = 0; bb < s.nb; ++bb) pu += s.gb.P_u[bb][p] / s.gb.rho[p];
    }
    b.add(p, q - ku - pu, max_abs({q, ku, pu}));
  }
  return b.finish();
}

ResidualReport check_kinetic_decomposition(const AnalyticState& state, const GridPtr& grid, double t,
                                           const CheckOptions& opt) {
  Setup s = prepare(state, grid, t, opt);
  Builder b = builder("kinetic_decomposition", s);
  std::vector<ComplexVectorField> dpsi;
  if (!b.analytic())
    for (int bb = 0; bb < s.nb; ++bb) dpsi.push_back(gradient(s.psi, bb));
  for (std::size_t p = 0; p < b.size(); ++p) {
    if (!b.evaluated(p)) continue;
    double mom2 = 0.0, kv = 0.0, ku = 0.0;
    if (b.analytic()) {
      const Local<3> L(s, p);
      for (int k = 0; k < s.n; ++k) {
        mom2 += std::norm(Cx(0.0, -1.0) * L.psi.d(k) / L.psi.value());
        const double v = L.v(k).value(), u = L.u(k).value();
        kv += 0.5 * v * v;
        ku += 0.5 * u * u;
      }
    } else {
      for (int k = 0; k < s.n; ++k) mom2 += std::norm(Cx(0.0, -1.0) * dpsi[k / s.d].at(p, k % s.d) / s.psi[p]);
      kv = s.gb.K_v[p];
      ku = s.gb.K_u[p];
    }
    b.add(p, 0.5 * mom2 - kv - ku, max_abs({0.5 * mom2, kv, ku}));
  }
  return b.finish();
}

ResidualReport check_velocity_identities(const AnalyticState& state, const GridPtr& grid, double t,
                                         const CheckOptions& opt) {
  Setup s = prepare(state, grid, t, opt);
  Builder b = builder("velocity_identities", s);
  const double sg = opt.sign == Sign::plus ? 1.0 : -1.0;
  std::vector<ComplexVectorField> dpsi;
  if (!b.analytic())
    for (int bb = 0; bb < s.nb; ++bb) dpsi.push_back(gradient(s.psi, bb));
  for (std::size_t p = 0; p < b.size(); ++p) {
    if (!b.evaluated(p)) continue;
    double r2 = 0.0, sc = 0.0;
    for (int k = 0; k < s.n; ++k) {
      double u, v;
      Cx g;
      if (b.analytic()) {
        const Local<1> L(s, p);
        const Cx psi = L.psi.value(), dk = L.psi.d(k);
        u = sg * 0.5 * L.rho.d(k) / L.rho.value();
        // grad S from the real and imaginary parts, the arctangent form.
        v = (psi.real() * dk.imag() - psi.imag() * dk.real()) / std::norm(psi);
        g = dk / psi;
      } else {
        u = comp(s.gb.u[k / s.d], k % s.d)[p];
        v = comp(s.gb.v[k / s.d], k % s.d)[p];
        g = dpsi[k / s.d].at(p, k % s.d) / s.psi[p];
      }
      const double du = u - sg * g.real(), dv = v - g.imag();
      r2 += du * du + dv * dv;
      sc = std::max(sc, max_abs({u, v, std::abs(g)}));
    }
    b.add(p, std::sqrt(r2), sc);
  }

  const PolarPair polar = polar_decompose(s.psi, opt.node_threshold);
  double flip = 0.0, dir_gap = 0.0, k_scale = 0.0;
  for (int bb = 0; bb < s.nb; ++bb) {
    const VectorField up = velocity_u(polar.rho, Sign::plus, bb), um = velocity_u(polar.rho, Sign::minus, bb);
    VectorField dir(grid, up.components);
    std::array<double, 3> n{1.0, 2.0, -2.0};
    double len = 0.0;
    for (int c = 0; c < up.components; ++c) len += n[c] * n[c];
    for (std::size_t p = 0; p < b.size(); ++p)
      for (int c = 0; c < up.components; ++c) dir.at(p, c) = n[c] / std::sqrt(len);
    const VectorField ud = velocity_u_directed(polar.rho, dir, bb);
    for (std::size_t p = 0; p < b.size(); ++p) {
      if (!b.evaluated(p)) continue;
      double kp = 0.0, kd = 0.0;
      for (int c = 0; c < up.components; ++c) {
        flip = std::max(flip, std::abs(up.at(p, c) + um.at(p, c)));
        kp += 0.5 * up.at(p, c) * up.at(p, c);
        kd += 0.5 * ud.at(p, c) * ud.at(p, c);
      }
      dir_gap = std::max(dir_gap, std::abs(kp - kd));
      k_scale = std::max(k_scale, kp);
    }
  }
  b.check("sign_relation", flip, 0.0, 0.0);
  b.check("direction_independence", dir_gap, 0.0, 1e-12 * std::max(1.0, k_scale));
  return b.finish();
}

ResidualReport check_density_identity(const AnalyticState& state, const GridPtr& grid, double t,
                                      const CheckOptions& opt) {
  Setup s = prepare(state, grid, t, opt);
  Builder b = builder("density_identity", s);
  const std::size_t N = b.size();
  Values lhs(N, 0.0), grad_term(N, 0.0), lap_term(N, 0.0);
  if (b.analytic()) {
    for (std::size_t p = 0; p < N; ++p) {
      if (!b.evaluated(p)) continue;
      const Local<3> L(s, p);
      const RJet<3> R = sqrt(L.rho);
      for (int k = 0; k < s.n; ++k) {
        lhs[p] += -0.5 * R.value() * R.d2(k, k);
        grad_term[p] += L.rho.d(k) * L.rho.d(k) / (8.0 * L.rho.value());
        lap_term[p] += -0.25 * L.rho.d2(k, k);
      }
    }
  } else {
    const Values& R = s.gb.R.values;
    const Values& rho = s.gb.rho.values;
    for (int bb = 0; bb < s.nb; ++bb) {
      const Values lR = Lap(s, R, bb), lr = Lap(s, rho, bb);
      for (std::size_t p = 0; p < N; ++p) {
        lhs[p] += -0.5 * R[p] * lR[p];
        lap_term[p] += -0.25 * lr[p];
      }
    }
    for (int k = 0; k < s.n; ++k) {
      const Values g = D(s, rho, k);
      for (std::size_t p = 0; p < N; ++p)
        if (!is_masked(s, p)) grad_term[p] += g[p] * g[p] / (8.0 * rho[p]);
    }
  }
  for (std::size_t p = 0; p < N; ++p)
    if (b.evaluated(p))
      b.add(p, lhs[p] - grad_term[p] - lap_term[p], max_abs({lhs[p], grad_term[p], lap_term[p]}));
  return b.finish();
}

ResidualReport check_pressure_complex(const AnalyticState& state, const GridPtr& grid, double t,
                                      const CheckOptions& opt) {
  Setup s = prepare(state, grid, t, opt);
  Builder b = builder("pressure_complex", s);
  const ComplexField pc = pressure_complex(state, grid, t, opt.provenance);
  for (std::size_t p = 0; p < b.size(); ++p) {
    if (!b.evaluated(p)) continue;
    double pu = 0.0, pv;
    if (b.analytic()) {
      const Local<3> L(s, p);
      for (int bb = 0; bb < s.nb; ++bb) pu += L.P_u(bb).value();
      pv = L.P_v().value();
    } else {
      for (int bb = 0; bb < s.nb; ++bb) pu += s.gb.P_u[bb][p];
      pv = 0.5 * s.rho_t[p];
    }
    b.add(p, std::abs(pc[p] - Cx(-pv, pu)), max_abs({std::abs(pc[p]), pu, pv}));
  }
  return b.finish();
}

ResidualReport check_energy_split(const AnalyticState& state, const GridPtr& grid, double t, const CheckOptions& opt) {
  Setup s = prepare(state, grid, t, opt);
  Builder b = builder("energy_split", s);
  ComplexField lap(grid, "");
  if (!b.analytic())
    for (int bb = 0; bb < s.nb; ++bb) {
      const ComplexField l = laplacian(s.psi, bb);
      for (std::size_t p = 0; p < b.size(); ++p) lap[p] += l[p];
    }
  double worst_S = 0.0, worst_T = 0.0;
  for (std::size_t p = 0; p < b.size(); ++p) {
    if (!b.evaluated(p)) continue;
    const Config x = grid->point(p);
    const Cx psi = s.psi[p];
    Cx l(0.0);
    if (b.analytic()) {
      const auto j = state.psi_jet<3>(x, t);
      for (int k = 0; k < s.n; ++k) l += j.d2(k, k);
    } else {
      l = lap[p];
    }
    const double rho = std::norm(psi), U = state.potential(x);
    const Cx kinetic = -0.5 * std::conj(psi) * l / rho;
    const Cx space = kinetic + U;
    const Cx time = Cx(0.0, 1.0) * std::conj(psi) * state.dpsi_dt(x, t) / rho;
    worst_S = std::max(worst_S, std::abs(space.real() - time.real()));
    worst_T = std::max(worst_T, std::abs(space.imag() - time.imag()));
    b.add(p, std::abs(space - time), max_abs({std::abs(time), std::abs(kinetic), U}));
  }
  b.info("max_gap_E_S", worst_S);
  b.info("max_gap_E_theta", worst_T);
  return b.finish();
}

ResidualReport check_conservation(const AnalyticState& state, const GridPtr& grid, double t,
                                  const CheckOptions& opt) {
  Setup s = prepare(state, grid, t, opt);
  Builder b = builder("conservation", s);
  std::vector<AnalyticState::Component> comps = state.components();
  if (comps.empty() && state.energy())
    comps.push_back({Cx(1.0), std::make_shared<const AnalyticState>(state)});
  if (comps.empty()) {
    b.fail_precondition("state " + state.label() + " is neither an eigenstate nor a superposition of eigenstates");
    return b.finish();
  }
  const std::size_t N = b.size();
  const double dt = grid->step();
  ComplexField before, after;
  if (!b.analytic()) {
    before = sample_psi(state, grid, t - dt);
    after = sample_psi(state, grid, t + dt);
  }
  Values es(N), et(N), rho(N);
  double expected = 0.0;
  for (const auto& c : comps) expected += std::norm(c.coeff) * *c.state->energy();
  for (std::size_t p = 0; p < N; ++p) {
    const Config x = grid->point(p);
    const Cx psi = s.psi[p];
    const Cx dpsi = b.analytic() ? state.dpsi_dt(x, t) : (after[p] - before[p]) / (2.0 * dt);
    const Cx numeric = Cx(0.0, 1.0) * std::conj(psi) * dpsi;
    es[p] = numeric.real();
    et[p] = numeric.imag();
    rho[p] = std::norm(psi);
    if (!b.evaluated(p)) continue;
    Cx closed(0.0);
    std::vector<Cx> phi(comps.size());
    for (std::size_t i = 0; i < comps.size(); ++i) phi[i] = comps[i].coeff * comps[i].state->psi(x, 0.0);
    for (std::size_t i = 0; i < comps.size(); ++i)
      for (std::size_t j = 0; j < comps.size(); ++j) {
        const double ei = *comps[i].state->energy(), ej = *comps[j].state->energy();
        closed += std::conj(phi[i]) * ej * phi[j] * std::exp(Cx(0.0, (ei - ej) * t));
      }
    b.add(p, std::abs(numeric - closed), max_abs({std::abs(numeric), std::abs(closed)}));
  }
  es = finite_part(std::move(es), s);
  et = finite_part(std::move(et), s);
  rho = finite_part(std::move(rho), s);
  const Integral ies = integrate(es, *grid), iet = integrate(et, *grid), irho = integrate(rho, *grid);
  b.check("E_S_average", ies.value, expected,
          b.analytic() ? kAnalyticTolerance : b.budget(integral_scale(es, *grid)));
  b.check("E_theta_average", iet.value, 0.0,
          b.analytic() ? kAnalyticTolerance : b.budget(integral_scale(es, *grid)));
  b.check("norm", irho.value, 1.0, kAnalyticTolerance);
  for (const auto& w : irho.warnings) b.note(w);
  return b.finish();
}

// ---- registry ------------------------------------------------------------------

const std::vector<CheckInfo>& check_registry() {
  static const std::vector<CheckInfo> registry = [] {
    auto wrap = [](ResidualReport (*f)(const AnalyticState&, const GridPtr&, double, const CheckOptions&)) {
      return CheckFn(f);
    };
    using F = ResidualReport (*)(const AnalyticState&, const GridPtr&, double, const CheckOptions&);
    return std::vector<CheckInfo>{
        {"bernoulli", "p2574", "compressible Bernoulli equation for real eigenstates",
         wrap(static_cast<F>(&check_bernoulli))},
        {"hamilton_jacobi", "p5522", "quantum Hamilton-Jacobi equation with two kinetic energies",
         wrap(static_cast<F>(&check_hamilton_jacobi))},
        {"continuity", "p4288", "continuity equation for rho and v", wrap(&check_continuity)},
        {"u_continuity", "p0258", "source term of the u flow: div(rho u) against the density Laplacian",
         wrap(&check_u_continuity)},
        {"laplace_special", "9904", "Laplace equation for S when grad rho . grad S = 0",
         wrap(&check_laplace_special)},
        {"euler_one_body", "8888b", "one-body Euler equation and its EQ_u / EQ_v split", wrap(&check_euler_one_body)},
        {"euler_n_body", "8888d", "two-body Euler equations with summed cross terms", wrap(&check_euler_n_body)},
        {"pressure_gradient", "5025", "grad P_v balances the time derivative of rho u", wrap(&check_pressure_gradient)},
        {"energy_gradients", "4887", "gradients of E_S and E_theta against dv/dt and du/dt",
         wrap(&check_energy_gradients)},
        {"ke_expectation", "4024", "kinetic energy from R lap R equals the u kinetic energy; P_u integrates to 0",
         wrap(&check_ke_expectation)},
        {"quantum_potential", "p5202", "Q = K_u + P_u / rho", wrap(&check_quantum_potential)},
        {"ke_integrand", "p2922", "-R lap R / 2 = rho (K_u + P_u / rho) pointwise", wrap(&check_ke_integrand)},
        {"kinetic_decomposition", "5208", "|complex momentum|^2 / 2 = K_v + K_u", wrap(&check_kinetic_decomposition)},
        {"velocity_identities", "p2880", "u and v as real and imaginary parts of grad Psi / Psi",
         wrap(&check_velocity_identities)},
        {"density_identity", "0000", "-phi lap phi / 2 = |grad rho|^2 / (8 rho) - lap rho / 4",
         wrap(&check_density_identity)},
        {"pressure_complex", "4007", "div of the complex momentum density equals -P_v + i P_u",
         wrap(&check_pressure_complex)},
        {"energy_split", "5830", "E_S + i E_theta from the time side equals Psi* H Psi / rho",
         wrap(&check_energy_split)},
        {"conservation", "2204", "space averages of E_S and E_theta for eigen-superpositions",
         wrap(&check_conservation)},
    };
  }();
  return registry;
}

const CheckInfo& find_check(const std::string& id) {
  for (const auto& c : check_registry())
    if (c.id == id) return c;
  throw UnknownCheckError(id);
}

ResidualReport run_check(const std::string& id, const AnalyticState& state, const GridPtr& grid, double t,
                         const CheckOptions& options) {
  return find_check(id).run(state, grid, t, options);
}

}  // namespace qfl
