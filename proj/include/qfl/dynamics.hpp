#pragma once

// Streamlines of the velocity fields (fixed-step RK4 on exact velocities) and
// the space-averaged energy experiment for superpositions of eigenstates.

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "qfl/fields.hpp"

namespace qfl {

enum class VelocityKind { u_minus, u_plus, v, u_spin, w_sum };
enum class Termination { max_steps, left_domain, hit_node };

const char* to_string(VelocityKind k);
const char* to_string(Termination t);
/// Throws std::invalid_argument for an unknown name.
VelocityKind parse_velocity_kind(const std::string& name);

struct VelocityOptions {
  Sign spin_sign = Sign::plus;
  bool renormalize_spin = false;
};

/// Velocity and mass-flux diagnostics at one configuration point.
struct FlowSample {
  Config velocity{};
  double speed = 0.0;
  double div_velocity = 0.0;
  double div_mass_flux = 0.0;  // div(rho_m vel)
  double rho_m = 0.0;
  double u_dot_v = 0.0;
};

/// Throws std::domain_error at a node and std::invalid_argument when u_spin is
/// requested for anything but a one-body 3D state.
FlowSample flow_at(const AnalyticState& state, const Config& x, double t, VelocityKind kind,
                   const VelocityOptions& options = {});

struct TrajectoryOptions {
  VelocityOptions velocity;
  /// A step lands on a node when rho drops below this fraction of rho(seed).
  double node_threshold = kDefaultNodeThreshold;
};

struct Trajectory {
  Config seed{};
  VelocityKind velocity_kind = VelocityKind::u_minus;
  VelocityOptions velocity_options;
  double dt = 0.0;
  int dims = 0;
  int bodies = 1;
  std::vector<double> times;
  std::vector<Config> points;
  std::vector<double> speed;
  std::vector<double> div_mass_flux;
  std::vector<double> rho_m;
  Termination termination = Termination::max_steps;
  std::vector<std::string> notes;

  /// t, coordinates, speed, div(rho_m vel), rho_m.
  void write_csv(std::ostream& os) const;
  nlohmann::json summary() const;
};

/// Throws std::invalid_argument when dt <= 0, n_steps < 0 or the seed lies
/// on a node or outside the state's domain.
Trajectory integrate_trajectory(const AnalyticState& state, const Config& seed, VelocityKind kind, double dt,
                                int n_steps, double t0 = 0.0, const TrajectoryOptions& options = {});

struct TrajectorySpec {
  Config seed{};
  VelocityKind kind = VelocityKind::u_minus;
  double dt = 0.01;
  int steps = 100;
  double t0 = 0.0;
  TrajectoryOptions options;
};

/// Independent trajectories, returned in spec order.
std::vector<Trajectory> integrate_trajectories(const AnalyticState& state, const std::vector<TrajectorySpec>& specs,
                                               int jobs = 1);

struct MassFluxSeries {
  std::vector<double> times;
  std::vector<double> div_velocity;
  std::vector<double> div_mass_flux;
  std::vector<double> rho_m;

  void write_csv(std::ostream& os) const;
};

MassFluxSeries mass_flux_along(const Trajectory& trajectory, const AnalyticState& state);

struct ConservationSeries {
  std::vector<double> times;
  std::vector<double> E_S_avg;
  std::vector<double> E_theta_avg;
  std::vector<double> norm;
  /// Largest pointwise gap between the numeric E_S rho + i E_theta rho and the
  /// closed form, per time.
  std::vector<double> closed_form_gap;
  double expected_E_S = 0.0;

  /// Norm within 1e-8 of 1 at every sample.
  bool norm_ok() const;
  void write_csv(std::ostream& os) const;
  nlohmann::json to_json() const;
};

/// E_S rho + i E_theta rho = sum_ij conj(C_i phi_i) C_j eps_j phi_j exp(i (eps_i - eps_j) t).
ComplexField closed_form_energy_density(const std::vector<AnalyticState>& components, const std::vector<Cx>& coeffs,
                                        const GridPtr& grid, double t);

/// Throws std::invalid_argument for components without an energy, a
/// coefficient norm away from 1, or a Gram matrix further than 1e-8 from the
/// identity on `grid`.
ConservationSeries conservation_experiment(const std::vector<AnalyticState>& components,
                                           const std::vector<Cx>& coeffs, const std::vector<double>& t_grid,
                                           const GridPtr& grid, int jobs = 1);

}  // namespace qfl
