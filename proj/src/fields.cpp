#include "qfl/fields.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace qfl {

const char* to_string(Sign s) { return s == Sign::plus ? "plus" : "minus"; }
const char* to_string(Provenance p) { return p == Provenance::analytic ? "analytic" : "grid"; }

namespace {

double sign_of(Sign s) { return s == Sign::plus ? 1.0 : -1.0; }

bool masked(const Mask& m, std::size_t i) { return !m.empty() && m[i] != 0; }

void check_body(const Grid& g, int body) {
  if (body < 0 || body >= g.n_bodies()) throw std::out_of_range("body index " + std::to_string(body) + " out of range");
}

}  // namespace

// ---- grid operators ----------------------------------------------------------

VectorField velocity_u(const ScalarField& rho, Sign sign, int body) {
  check_body(*rho.grid, body);
  VectorField out = gradient(rho, body);
  out.units = "a0/t0";
  const double f = sign_of(sign) * kHbar / (2.0 * kMass);
  for (std::size_t i = 0; i < out.size(); ++i)
    for (int c = 0; c < out.components; ++c)
      out.at(i, c) = out.masked(i) || rho[i] == 0.0 ? 0.0 : f * out.at(i, c) / rho[i];
  return out;
}

VectorField velocity_u_directed(const ScalarField& rho, const VectorField& s_hat, int body) {
  check_body(*rho.grid, body);
  const VectorField g = gradient(rho, body);
  if (s_hat.components != g.components || s_hat.size() != g.size())
    throw std::invalid_argument("velocity_u_directed: direction field shape does not match the gradient");
  VectorField out(rho.grid, g.components, "a0/t0");
  out.mask = merge_masks(rho.mask, s_hat.mask);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (out.masked(i)) continue;
    double norm2 = 0.0, grad2 = 0.0;
    for (int c = 0; c < g.components; ++c) {
      norm2 += s_hat.at(i, c) * s_hat.at(i, c);
      grad2 += g.at(i, c) * g.at(i, c);
    }
    if (std::abs(std::sqrt(norm2) - 1.0) > 1e-10)
      throw std::invalid_argument("velocity_u_directed: direction field is not unit length at point " +
                                  std::to_string(i));
    const double speed = rho[i] == 0.0 ? 0.0 : kHbar / (2.0 * kMass) * std::sqrt(grad2) / rho[i];
    for (int c = 0; c < g.components; ++c) out.at(i, c) = speed * s_hat.at(i, c);
  }
  return out;
}

VectorField velocity_v(const ScalarField& S, int body) {
  check_body(*S.grid, body);
  ScalarField phase = S;
  for (double& s : phase.values) s /= kHbar;
  VectorField out = gradient(phase, body, Differencing::phase);
  out.units = "a0/t0";
  for (std::size_t i = 0; i < out.size(); ++i)
    for (int c = 0; c < out.components; ++c) out.at(i, c) = out.masked(i) ? 0.0 : kHbar / kMass * out.at(i, c);
  return out;
}

VectorField velocity_spin(const ScalarField& rho, Sign sign, bool renormalize) {
  const Grid& g = *rho.grid;
  if (g.n_bodies() != 1 || g.vector_components() != 3)
    throw std::invalid_argument("velocity_spin: defined for one-body 3D states only");
  const VectorField ubar = velocity_u(rho, Sign::plus, 0);
  VectorField out(rho.grid, 3, "a0/t0");
  out.mask = rho.mask;
  // ubar x z-hat = (uy, -ux, 0); the (hbar/2m) grad rho / rho scale is already in ubar.
  const double s = sign_of(sign);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (out.masked(i)) continue;
    const double ux = ubar.at(i, 0), uy = ubar.at(i, 1), uz = ubar.at(i, 2);
    double fx = s * uy, fy = -s * ux;
    if (renormalize) {
      const double perp = std::hypot(ux, uy);
      const double full = std::sqrt(ux * ux + uy * uy + uz * uz);
      const double k = perp > 0.0 ? full / perp : 0.0;
      fx *= k;
      fy *= k;
    }
    out.at(i, 0) = fx;
    out.at(i, 1) = fy;
    out.at(i, 2) = 0.0;
  }
  return out;
}

ScalarField pressure_u(const ScalarField& rho, int body) {
  check_body(*rho.grid, body);
  ScalarField out = laplacian(rho, body);
  out.units = "Eh/a0^3";
  for (double& p : out.values) p *= -kHbar * kHbar / (4.0 * kMass);
  return out;
}

ScalarField pressure_v(const AnalyticState& state, const GridPtr& grid, double t) {
  ScalarField out(grid, "Eh/a0^3");
  for (std::size_t i = 0; i < grid->size(); ++i) {
    const auto j = state.psi_jet<1>(grid->point(i), t);
    out[i] = 0.5 * kHbar * kHbar * norm(j).d(kTimeVar);
  }
  return out;
}

ScalarField pressure_v(const ScalarField& rho_before, const ScalarField& rho_after, double dt) {
  if (rho_before.grid != rho_after.grid && rho_before.grid->meta() != rho_after.grid->meta())
    throw std::invalid_argument("pressure_v: density frames live on different grids");
  if (!(dt > 0.0)) throw std::invalid_argument("pressure_v: dt must be > 0");
  ScalarField out(rho_before.grid, "Eh/a0^3");
  out.mask = merge_masks(rho_before.mask, rho_after.mask);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = 0.5 * kHbar * kHbar * (rho_after[i] - rho_before[i]) / (2.0 * dt);
  return out;
}

ScalarField quantum_potential(const ScalarField& R) {
  const Grid& g = *R.grid;
  ScalarField out(R.grid, "Eh");
  out.mask = R.mask;
  for (int b = 0; b < g.n_bodies(); ++b) {
    const ScalarField lap = laplacian(R, b);
    for (std::size_t i = 0; i < g.size(); ++i) out[i] += lap[i];
  }
  for (std::size_t i = 0; i < g.size(); ++i)
    out[i] = out.masked(i) || R[i] == 0.0 ? 0.0 : -kHbar * kHbar / (2.0 * kMass) * out[i] / R[i];
  return out;
}

// ---- pointwise exact fields ------------------------------------------------

PointFields point_fields(const AnalyticState& state, const Config& x, double t) {
  const CJet<3> psi = state.psi_jet<3>(x, t);
  const RJet<3> rho = norm(psi);
  PointFields f;
  f.rho = rho.value();
  if (!(f.rho > 0.0)) throw std::domain_error("point_fields: configuration point is a node of " + state.label());
  const int nb = state.n_bodies(), d = state.dim_per_body(), n = state.config_dim();
  const RJet<3> R = sqrt(rho);
  const Cx p = psi.value();

  f.rho_t = rho.d(kTimeVar);
  f.S_t = kHbar * (psi.d(kTimeVar) / p).imag();
  f.U = state.potential(x);
  f.grad_rho.resize(n);
  f.u_minus.resize(n);
  f.v.resize(n);
  for (int k = 0; k < n; ++k) {
    f.grad_rho[k] = rho.d(k);
    f.u_minus[k] = -kHbar / (2.0 * kMass) * f.grad_rho[k] / f.rho;
    f.v[k] = kHbar / kMass * (psi.d(k) / p).imag();
    f.K_u += 0.5 * kMass * f.u_minus[k] * f.u_minus[k];
    f.K_v += 0.5 * kMass * f.v[k] * f.v[k];
  }
  f.lap_rho.assign(nb, 0.0);
  f.P_u.assign(nb, 0.0);
  double lap_R = 0.0;
  for (int b = 0; b < nb; ++b) {
    for (int c = 0; c < d; ++c) {
      const int k = b * d + c;
      f.lap_rho[b] += rho.d2(k, k);
      lap_R += R.d2(k, k);
    }
    f.P_u[b] = -kHbar * kHbar / (4.0 * kMass) * f.lap_rho[b];
  }
  f.P_v = 0.5 * kHbar * kHbar * f.rho_t;
  f.Q = -kHbar * kHbar / (2.0 * kMass) * lap_R / R.value();
  f.E_S = -f.S_t;
  f.E_theta = 0.5 * kHbar * f.rho_t / f.rho;
  return f;
}

std::vector<Cx> momentum_complex(const AnalyticState& state, const Config& x, double t) {
  const Cx p = state.psi(x, t);
  if (p == Cx(0.0)) throw std::domain_error("momentum_complex: configuration point is a node");
  auto g = state.grad_psi(x, t);
  for (Cx& c : g) c = Cx(0.0, -kHbar) * c / p;
  return g;
}

std::pair<double, double> energies_time_side(const AnalyticState& state, const Config& x, double t) {
  const Cx p = state.psi(x, t);
  if (p == Cx(0.0)) throw std::domain_error("energies_time_side: configuration point is a node");
  const Cx e = Cx(0.0, kHbar) * std::conj(p) * state.dpsi_dt(x, t) / std::norm(p);
  return {e.real(), e.imag()};
}

ComplexField pressure_complex(const AnalyticState& state, const GridPtr& grid, double t, Provenance provenance) {
  const Grid& g = *grid;
  ComplexField out(grid, "Eh/a0^3");
  if (provenance == Provenance::analytic) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto psi = state.psi_jet<3>(g.point(i), t);
      // div(Psi* (-i hbar grad Psi)) = -i hbar (|grad Psi|^2 + Psi* lap Psi)
      Cx acc(0.0);
      for (int k = 0; k < state.config_dim(); ++k)
        acc += std::norm(psi.d(k)) + std::conj(psi.value()) * psi.d2(k, k);
      out[i] = kHbar / (2.0 * kMass) * Cx(0.0, -kHbar) * acc;
    }
    return out;
  }
  const ComplexField psi = sample_psi(state, grid, t);
  for (int b = 0; b < g.n_bodies(); ++b) {
    ComplexVectorField flux = gradient(psi, b);
    for (std::size_t i = 0; i < g.size(); ++i)
      for (int c = 0; c < flux.components; ++c) flux.at(i, c) *= Cx(0.0, -kHbar) * std::conj(psi[i]);
    const ComplexField div = divergence(flux, b);
    for (std::size_t i = 0; i < g.size(); ++i) out[i] += kHbar / (2.0 * kMass) * div[i];
  }
  return out;
}

// ---- bundle ------------------------------------------------------------------

std::vector<Column> FieldBundle::columns() const {
  std::vector<Column> cols;
  auto add = [&](const std::vector<Column>& more) { cols.insert(cols.end(), more.begin(), more.end()); };
  const std::string uname = sign == Sign::minus ? "u_minus" : "u_plus";
  const bool multi = u.size() > 1;
  add(columns_of("rho", rho));
  add(columns_of("S", S));
  for (std::size_t b = 0; b < u.size(); ++b) {
    const std::string suffix = multi ? std::to_string(b + 1) : "";
    add(columns_of(uname + suffix, u[b]));
    add(columns_of("v" + suffix, v[b]));
    add(columns_of("P_u" + suffix, P_u[b]));
  }
  add(columns_of("P_v", P_v));
  add(columns_of("K_u", K_u));
  add(columns_of("K_v", K_v));
  add(columns_of("Q", Q));
  add(columns_of("E_S", E_S));
  add(columns_of("E_theta", E_theta));
  add(columns_of("theta", theta));
  add(columns_of("U", U));
  add(columns_of("u_dot_v", u_dot_v));
  return cols;
}

FieldBundle bundle(const AnalyticState& state, const GridPtr& grid, double t, Provenance provenance,
                   const BundleOptions& options) {
  const Grid& g = *grid;
  const std::size_t n = g.size();
  const int nb = g.n_bodies();
  const int nc = g.vector_components();
  const double us = options.sign == Sign::minus ? 1.0 : -1.0;

  FieldBundle fb;
  fb.grid = grid;
  fb.t = t;
  fb.provenance = provenance;
  fb.sign = options.sign;

  const ComplexField psi = sample_psi(state, grid, t);
  PolarPair polar = polar_decompose(psi, options.node_threshold);
  fb.mask = polar.mask;
  fb.rho = polar.rho;
  fb.R = polar.R;
  fb.S = polar.S;
  fb.U = ScalarField(grid, "Eh");
  fb.P_v = ScalarField(grid, "Eh/a0^3");
  fb.E_S = ScalarField(grid, "Eh");
  fb.E_theta = ScalarField(grid, "Eh");

  // Pointwise (non-differentiated) quantities are sampled exactly in both modes.
  std::vector<double> rho_t(n), S_t(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Config x = g.point(i);
    fb.U[i] = state.potential(x);
    if (masked(fb.mask, i)) continue;
    const auto j = state.psi_jet<1>(x, t);
    rho_t[i] = norm(j).d(kTimeVar);
    S_t[i] = kHbar * (j.d(kTimeVar) / j.value()).imag();
  }

  if (provenance == Provenance::analytic) {
    fb.u.assign(nb, VectorField(grid, nc, "a0/t0"));
    fb.v.assign(nb, VectorField(grid, nc, "a0/t0"));
    fb.P_u.assign(nb, ScalarField(grid, "Eh/a0^3"));
    fb.Q = ScalarField(grid, "Eh");
    const bool radial = g.kind() == CoordinateKind::radial_log;
    for (std::size_t i = 0; i < n; ++i) {
      if (masked(fb.mask, i)) continue;
      const PointFields f = point_fields(state, g.point(i), t);
      for (int b = 0; b < nb; ++b) {
        const int d = radial ? 3 : g.dim_per_body();
        for (int c = 0; c < d; ++c) {
          fb.u[b].at(i, c) = us * f.u_minus[b * d + c];
          fb.v[b].at(i, c) = f.v[b * d + c];
        }
        fb.P_u[b][i] = f.P_u[b];
      }
      fb.Q[i] = f.Q;
    }
  } else {
    for (int b = 0; b < nb; ++b) {
      fb.u.push_back(velocity_u(fb.rho, options.sign, b));
      fb.v.push_back(velocity_v(fb.S, b));
      fb.P_u.push_back(pressure_u(fb.rho, b));
    }
    fb.Q = quantum_potential(fb.R);
  }

  fb.K_u = ScalarField(grid, "Eh");
  fb.K_v = ScalarField(grid, "Eh");
  fb.theta = ScalarField(grid, "hbar");
  fb.u_dot_v = ScalarField(grid, "a0^2/t0^2");
  fb.rho_m = ScalarField(grid, "me/a0^3");
  for (std::size_t i = 0; i < n; ++i) {
    fb.rho_m[i] = kMass * fb.rho[i];
    if (masked(fb.mask, i)) continue;
    for (int b = 0; b < nb; ++b)
      for (int c = 0; c < nc; ++c) {
        const double uc = fb.u[b].at(i, c), vc = fb.v[b].at(i, c);
        fb.K_u[i] += 0.5 * kMass * uc * uc;
        fb.K_v[i] += 0.5 * kMass * vc * vc;
        fb.u_dot_v[i] += uc * vc;
      }
    fb.P_v[i] = 0.5 * kHbar * kHbar * rho_t[i];
    fb.E_S[i] = -S_t[i];
    fb.E_theta[i] = 0.5 * kHbar * rho_t[i] / fb.rho[i];
    fb.theta[i] = -us * 0.5 * kHbar * std::log(fb.rho[i]);
  }

  auto stamp = [&](auto& f) { f.mask = fb.mask; };
  for (auto* f : {&fb.rho, &fb.rho_m, &fb.R, &fb.S, &fb.U, &fb.P_v, &fb.K_u, &fb.K_v, &fb.Q, &fb.E_S, &fb.E_theta,
                  &fb.theta, &fb.u_dot_v})
    stamp(*f);
  for (auto& f : fb.u) stamp(f);
  for (auto& f : fb.v) stamp(f);
  for (auto& f : fb.P_u) stamp(f);
  return fb;
}

}  // namespace qfl
