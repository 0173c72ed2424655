#include "qfl/dynamics.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "qfl/parallel.hpp"

namespace qfl {

const char* to_string(VelocityKind k) {
  switch (k) {
    case VelocityKind::u_minus: return "u_minus";
    case VelocityKind::u_plus: return "u_plus";
    case VelocityKind::v: return "v";
    case VelocityKind::u_spin: return "u_spin";
    case VelocityKind::w_sum: return "w_sum";
  }
  return "?";
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::max_steps: return "max-steps";
    case Termination::left_domain: return "left-domain";
    case Termination::hit_node: return "hit-node";
  }
  return "?";
}

VelocityKind parse_velocity_kind(const std::string& name) {
  for (VelocityKind k : {VelocityKind::u_minus, VelocityKind::u_plus, VelocityKind::v, VelocityKind::u_spin,
                         VelocityKind::w_sum})
    if (name == to_string(k)) return k;
  throw std::invalid_argument("unknown velocity kind '" + name + "' (expected u_minus, u_plus, v, u_spin, w_sum)");
}

FlowSample flow_at(const AnalyticState& state, const Config& x, double t, VelocityKind kind,
                   const VelocityOptions& options) {
  const int n = state.config_dim();
  if (kind == VelocityKind::u_spin && (state.n_bodies() != 1 || n != 3))
    throw std::invalid_argument("u_spin is defined for one-body 3D states only");
  const CJet<3> psi = state.psi_jet<3>(x, t);
  const RJet<3> rho = norm(psi);
  if (!(rho.value() > 0.0)) throw std::domain_error("flow_at: configuration point is a node");

  std::array<RJet<3>, 3> u{}, v{}, vel{};
  for (int k = 0; k < n; ++k) {
    u[k] = -0.5 * kHbar / kMass * rho.derivative(k) / rho;
    v[k] = kHbar / kMass * imag(psi.derivative(k) / psi);
  }
  switch (kind) {
    case VelocityKind::u_minus: vel = u; break;
    case VelocityKind::u_plus:
      for (int k = 0; k < n; ++k) vel[k] = -u[k];
      break;
    case VelocityKind::v: vel = v; break;
    case VelocityKind::w_sum:
      for (int k = 0; k < n; ++k) vel[k] = u[k] + v[k];
      break;
    case VelocityKind::u_spin: {
      // u_plus x (s z-hat) with s = +-1 selecting the spin direction.
      const double s = options.spin_sign == Sign::plus ? 1.0 : -1.0;
      vel[0] = -s * u[1];
      vel[1] = s * u[0];
      vel[2] = RJet<3>(0.0);
      if (options.renormalize_spin) {
        const RJet<3> perp2 = u[0] * u[0] + u[1] * u[1];
        if (perp2.value() > 0.0) {
          const RJet<3> k = sqrt((perp2 + u[2] * u[2]) / perp2);
          vel[0] = vel[0] * k;
          vel[1] = vel[1] * k;
        }
      }
      break;
    }
  }

  FlowSample out;
  out.rho_m = kMass * rho.value();
  double speed2 = 0.0;
  for (int k = 0; k < n; ++k) {
    out.velocity[k] = vel[k].value();
    speed2 += out.velocity[k] * out.velocity[k];
    out.div_velocity += vel[k].d(k);
    out.div_mass_flux += kMass * (rho * vel[k]).d(k);
    out.u_dot_v += u[k].value() * v[k].value();
  }
  out.speed = std::sqrt(speed2);
  return out;
}

namespace {

bool finite(const Config& x) {
  return std::isfinite(x[0]) && std::isfinite(x[1]) && std::isfinite(x[2]);
}

// Wraps periodic coordinates; false when a bounded coordinate lies outside.
bool place_in_domain(const StateDomain& d, Config& x) {
  for (std::size_t k = 0; k < d.extent.size(); ++k) {
    const auto [lo, hi] = d.extent[k];
    if (d.periodic) {
      const double L = hi - lo;
      x[k] = lo + (x[k] - lo) - L * std::floor((x[k] - lo) / L);
    } else if (x[k] < lo || x[k] > hi) {
      return false;
    }
  }
  return true;
}

std::string coordinate_name(int k, int bodies, int dims) {
  static const char* axes[] = {"x", "y", "z"};
  if (bodies == 1) return axes[k];
  return std::string("x") + std::to_string(k / (dims / bodies) + 1);
}

void put(std::ostream& os, double v, bool comma = true) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  if (comma) os << ',';
  os << buf;
}

}  // namespace

Trajectory integrate_trajectory(const AnalyticState& state, const Config& seed, VelocityKind kind, double dt,
                                int n_steps, double t0, const TrajectoryOptions& options) {
  if (!(dt > 0.0)) throw std::invalid_argument("trajectory: dt must be positive");
  if (n_steps < 0) throw std::invalid_argument("trajectory: step count must be non-negative");
  const int n = state.config_dim();
  Config x = seed;
  for (int k = n; k < 3; ++k) x[k] = 0.0;
  if (!finite(x) || !place_in_domain(state.domain(), x))
    throw std::invalid_argument("trajectory: seed lies outside the domain of " + state.label());
  const double rho_seed = std::norm(state.psi(x, t0));
  if (!(rho_seed > 0.0)) throw std::invalid_argument("trajectory: seed lies on a node of " + state.label());
  const double floor = options.node_threshold * rho_seed;

  Trajectory tr;
  tr.seed = x;
  tr.velocity_kind = kind;
  tr.velocity_options = options.velocity;
  tr.dt = dt;
  tr.dims = n;
  tr.bodies = state.n_bodies();
  double max_uv = 0.0;
  auto record = [&](const Config& p, double t) {
    const FlowSample f = flow_at(state, p, t, kind, options.velocity);
    tr.times.push_back(t);
    tr.points.push_back(p);
    tr.speed.push_back(f.speed);
    tr.div_mass_flux.push_back(f.div_mass_flux);
    tr.rho_m.push_back(f.rho_m);
    max_uv = std::max(max_uv, std::abs(f.u_dot_v));
  };
  // Velocity at (p, t); false on a node or a non-finite value.
  auto velocity = [&](const Config& p, double t, Config& out) {
    try {
      const FlowSample f = flow_at(state, p, t, kind, options.velocity);
      if (f.rho_m / kMass < floor || !finite(f.velocity)) return false;
      out = f.velocity;
      return true;
    } catch (const std::domain_error&) {
      return false;
    }
  };

  record(x, t0);
  tr.termination = Termination::max_steps;
  for (int step = 0; step < n_steps; ++step) {
    const double t = t0 + step * dt;
    Config k1, k2, k3, k4, y;
    auto shifted = [&](const Config& k, double c) {
      Config p = x;
      for (int q = 0; q < n; ++q) p[q] += c * dt * k[q];
      return p;
    };
    if (!velocity(x, t, k1) || !velocity(shifted(k1, 0.5), t + 0.5 * dt, k2) ||
        !velocity(shifted(k2, 0.5), t + 0.5 * dt, k3) || !velocity(shifted(k3, 1.0), t + dt, k4)) {
      tr.termination = Termination::hit_node;
      break;
    }
    y = x;
    for (int q = 0; q < n; ++q) y[q] += dt / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]);
    if (!place_in_domain(state.domain(), y)) {
      tr.termination = Termination::left_domain;
      break;
    }
    const double t_next = t0 + (step + 1) * dt;
    if (!(std::norm(state.psi(y, t_next)) >= floor)) {
      tr.termination = Termination::hit_node;
      break;
    }
    x = y;
    record(x, t_next);
  }
  if (kind == VelocityKind::w_sum) {
    std::ostringstream note;
    note << "w = u + v carries K_u + K_v only where u.v = 0; max |u.v| along the path = " << max_uv;
    tr.notes.push_back(note.str());
  }
  return tr;
}

std::vector<Trajectory> integrate_trajectories(const AnalyticState& state, const std::vector<TrajectorySpec>& specs,
                                               int jobs) {
  std::vector<Trajectory> out(specs.size());
  parallel_for(specs.size(), jobs, [&](std::size_t i) {
    const auto& s = specs[i];
    out[i] = integrate_trajectory(state, s.seed, s.kind, s.dt, s.steps, s.t0, s.options);
  });
  return out;
}

void Trajectory::write_csv(std::ostream& os) const {
  os << "t[t0]";
  for (int k = 0; k < dims; ++k) os << ',' << coordinate_name(k, bodies, dims) << "[a0]";
  os << ",speed[a0/t0],div_mass_flux[me/(a0^3 t0)],rho_m[me/a0^3]\n";
  for (std::size_t i = 0; i < times.size(); ++i) {
    put(os, times[i], false);
    for (int k = 0; k < dims; ++k) put(os, points[i][k]);
    put(os, speed[i]);
    put(os, div_mass_flux[i]);
    put(os, rho_m[i]);
    os << '\n';
  }
}

nlohmann::json Trajectory::summary() const {
  nlohmann::json j;
  auto coords = [&](const Config& p) {
    nlohmann::json a = nlohmann::json::array();
    for (int k = 0; k < dims; ++k) a.push_back(p[k]);
    return a;
  };
  j["seed"] = coords(seed);
  j["velocity"] = to_string(velocity_kind);
  j["dt"] = dt;
  j["steps"] = points.empty() ? 0 : points.size() - 1;
  j["termination"] = to_string(termination);
  j["t_end"] = times.empty() ? 0.0 : times.back();
  j["end"] = points.empty() ? nlohmann::json::array() : coords(points.back());
  double div = 0.0;
  for (double d : div_mass_flux) div = std::max(div, std::abs(d));
  j["max_abs_div_mass_flux"] = div;
  j["notes"] = notes;
  return j;
}

MassFluxSeries mass_flux_along(const Trajectory& trajectory, const AnalyticState& state) {
  MassFluxSeries s;
  for (std::size_t i = 0; i < trajectory.points.size(); ++i) {
    const FlowSample f =
        flow_at(state, trajectory.points[i], trajectory.times[i], trajectory.velocity_kind, trajectory.velocity_options);
    s.times.push_back(trajectory.times[i]);
    s.div_velocity.push_back(f.div_velocity);
    s.div_mass_flux.push_back(f.div_mass_flux);
    s.rho_m.push_back(f.rho_m);
  }
  return s;
}

void MassFluxSeries::write_csv(std::ostream& os) const {
  os << "t[t0],div_velocity[1/t0],div_mass_flux[me/(a0^3 t0)],rho_m[me/a0^3]\n";
  for (std::size_t i = 0; i < times.size(); ++i) {
    put(os, times[i], false);
    put(os, div_velocity[i]);
    put(os, div_mass_flux[i]);
    put(os, rho_m[i]);
    os << '\n';
  }
}

// ---- conservation ------------------------------------------------------------

ComplexField closed_form_energy_density(const std::vector<AnalyticState>& components, const std::vector<Cx>& coeffs,
                                        const GridPtr& grid, double t) {
  if (components.size() != coeffs.size())
    throw std::invalid_argument("closed form: component and coefficient counts differ");
  ComplexField out(grid, "Eh/a0^3");
  std::vector<Cx> phi(components.size());
  for (std::size_t p = 0; p < grid->size(); ++p) {
    const Config x = grid->point(p);
    for (std::size_t i = 0; i < phi.size(); ++i) phi[i] = coeffs[i] * components[i].psi(x, 0.0);
    Cx acc(0.0);
    for (std::size_t i = 0; i < phi.size(); ++i)
      for (std::size_t j = 0; j < phi.size(); ++j) {
        const double ei = *components[i].energy(), ej = *components[j].energy();
        acc += std::conj(phi[i]) * ej * phi[j] * std::exp(Cx(0.0, (ei - ej) * t / kHbar));
      }
    out[p] = acc;
  }
  return out;
}

ConservationSeries conservation_experiment(const std::vector<AnalyticState>& components,
                                           const std::vector<Cx>& coeffs, const std::vector<double>& t_grid,
                                           const GridPtr& grid, int jobs) {
  if (components.empty() || components.size() != coeffs.size())
    throw std::invalid_argument("conservation: need matching, non-empty component and coefficient lists");
  double weight = 0.0;
  for (std::size_t i = 0; i < components.size(); ++i) {
    if (!components[i].energy())
      throw std::invalid_argument("conservation: component " + components[i].label() + " is not an eigenstate");
    weight += std::norm(coeffs[i]);
  }
  if (std::abs(weight - 1.0) > 1e-8) throw std::invalid_argument("conservation: sum of |C_i|^2 is not 1");
  for (double t : t_grid)
    if (!std::isfinite(t)) throw std::invalid_argument("conservation: non-finite sample time");

  // Gram matrix on the grid.
  std::vector<ComplexField> phi;
  for (const auto& c : components) phi.push_back(sample_psi(c, grid, 0.0));
  double gram = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i)
    for (std::size_t j = i; j < phi.size(); ++j) {
      std::vector<double> re(grid->size()), im(grid->size());
      for (std::size_t p = 0; p < grid->size(); ++p) {
        const Cx z = std::conj(phi[i][p]) * phi[j][p];
        re[p] = z.real();
        im[p] = z.imag();
      }
      const Cx g(integrate(re, *grid).value, integrate(im, *grid).value);
      gram = std::max(gram, std::abs(g - Cx(i == j ? 1.0 : 0.0)));
    }
  if (gram > 1e-8) {
    std::ostringstream msg;
    msg << "conservation: components are not orthonormal on the grid (Gram deviation " << gram << ")";
    throw std::invalid_argument(msg.str());
  }

  const AnalyticState state = superpose(components, coeffs);
  ConservationSeries s;
  for (std::size_t i = 0; i < components.size(); ++i) s.expected_E_S += std::norm(coeffs[i]) * *components[i].energy();
  const std::size_t T = t_grid.size();
  s.times = t_grid;
  s.E_S_avg.assign(T, 0.0);
  s.E_theta_avg.assign(T, 0.0);
  s.norm.assign(T, 0.0);
  s.closed_form_gap.assign(T, 0.0);
  parallel_for(T, jobs, [&](std::size_t k) {
    const double t = t_grid[k];
    const ComplexField closed = closed_form_energy_density(components, coeffs, grid, t);
    std::vector<double> es(grid->size()), et(grid->size()), rho(grid->size());
    double gap = 0.0;
    for (std::size_t p = 0; p < grid->size(); ++p) {
      const Config x = grid->point(p);
      const Cx psi = state.psi(x, t);
      // E_S rho + i E_theta rho = i hbar Psi* dPsi/dt, finite at nodes as well.
      const Cx e = Cx(0.0, kHbar) * std::conj(psi) * state.dpsi_dt(x, t);
      es[p] = e.real();
      et[p] = e.imag();
      rho[p] = std::norm(psi);
      gap = std::max(gap, std::abs(e - closed[p]));
    }
    s.E_S_avg[k] = integrate(es, *grid).value;
    s.E_theta_avg[k] = integrate(et, *grid).value;
    s.norm[k] = integrate(rho, *grid).value;
    s.closed_form_gap[k] = gap;
  });
  return s;
}

bool ConservationSeries::norm_ok() const {
  for (double n : norm)
    if (!(std::abs(n - 1.0) <= 1e-8)) return false;
  return true;
}

void ConservationSeries::write_csv(std::ostream& os) const {
  os << "t[t0],E_S_avg[Eh],E_theta_avg[Eh],norm[1],closed_form_gap[Eh/a0^3]\n";
  for (std::size_t i = 0; i < times.size(); ++i) {
    put(os, times[i], false);
    put(os, E_S_avg[i]);
    put(os, E_theta_avg[i]);
    put(os, norm[i]);
    put(os, closed_form_gap[i]);
    os << '\n';
  }
}

nlohmann::json ConservationSeries::to_json() const {
  return {{"times", times},         {"E_S_avg", E_S_avg},
          {"E_theta_avg", E_theta_avg}, {"norm", norm},
          {"closed_form_gap", closed_form_gap}, {"expected_E_S", expected_E_S},
          {"norm_ok", norm_ok()}};
}

}  // namespace qfl
