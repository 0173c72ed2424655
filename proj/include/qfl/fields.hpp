#pragma once

// Hydrodynamic fields of a wavefunction: velocities, pressures, energies and
// the quantum potential, from exact derivatives or from grid operators.

#include <utility>
#include <vector>

#include "qfl/grid.hpp"
#include "qfl/states.hpp"

namespace qfl {

enum class Sign { plus, minus };
enum class Provenance { analytic, grid };

const char* to_string(Sign s);
const char* to_string(Provenance p);

// ---- grid operators ----------------------------------------------------------

/// u = +-(hbar/2m) grad_i rho / rho. Masked cells hold 0.
VectorField velocity_u(const ScalarField& rho, Sign sign, int body);
/// Speed (hbar/2m)|grad rho|/rho pointed along a caller-supplied unit field.
VectorField velocity_u_directed(const ScalarField& rho, const VectorField& s_hat, int body);
/// v = grad_i S / m, differencing S modulo 2 pi hbar.
VectorField velocity_v(const ScalarField& S, int body);
/// (grad rho / (m rho)) x (+-hbar/2) z-hat, one-body 3D only. With
/// `renormalize` the speed is rescaled to |grad rho|/(2 m rho).
VectorField velocity_spin(const ScalarField& rho, Sign sign, bool renormalize = false);
/// P_u = -(hbar^2/4m) laplacian_i rho.
ScalarField pressure_u(const ScalarField& rho, int body);
/// P_v = (hbar^2/2) d rho/dt from the exact time derivative.
ScalarField pressure_v(const AnalyticState& state, const GridPtr& grid, double t);
/// P_v from two density frames at t - dt and t + dt.
ScalarField pressure_v(const ScalarField& rho_before, const ScalarField& rho_after, double dt);
/// Q = -(hbar^2/2m) sum_i laplacian_i R / R.
ScalarField quantum_potential(const ScalarField& R);

// ---- pointwise exact fields ------------------------------------------------

/// Every field at one configuration point from Taylor jets of Psi.
/// Vectors are indexed by configuration coordinate, per-body arrays by body.
struct PointFields {
  double rho = 0.0;
  double rho_t = 0.0;
  double S_t = 0.0;
  double U = 0.0;
  std::vector<double> grad_rho;
  std::vector<double> lap_rho;
  std::vector<double> u_minus;
  std::vector<double> v;
  std::vector<double> P_u;
  double P_v = 0.0;
  double Q = 0.0;
  double K_u = 0.0;
  double K_v = 0.0;
  double E_S = 0.0;
  double E_theta = 0.0;
};

/// Throws std::domain_error at a node (rho == 0).
PointFields point_fields(const AnalyticState& state, const Config& x, double t);

/// Psi* P Psi / (Psi* Psi) = m v + i m u_minus per configuration coordinate.
std::vector<Cx> momentum_complex(const AnalyticState& state, const Config& x, double t);

/// (E_S, E_theta) = (-dS/dt, (hbar/2) d ln rho/dt).
std::pair<double, double> energies_time_side(const AnalyticState& state, const Config& x, double t);

/// (hbar/2m) div(Psi* P Psi) = -P_v + i P_u, summed over bodies.
ComplexField pressure_complex(const AnalyticState& state, const GridPtr& grid, double t,
                              Provenance provenance = Provenance::grid);

// ---- bundle ------------------------------------------------------------------

struct BundleOptions {
  Sign sign = Sign::minus;
  double node_threshold = kDefaultNodeThreshold;
};

struct FieldBundle {
  GridPtr grid;
  double t = 0.0;
  Provenance provenance = Provenance::analytic;
  Sign sign = Sign::minus;
  Mask mask;

  ScalarField rho, rho_m, R, S, U;
  std::vector<VectorField> u;   // per body
  std::vector<VectorField> v;   // per body
  std::vector<ScalarField> P_u; // per body
  ScalarField P_v, K_u, K_v, Q, E_S, E_theta, theta;
  /// Sum over bodies of u_i . v_i; nonzero where K_u + K_v differs from the
  /// kinetic energy of u + v.
  ScalarField u_dot_v;

  std::vector<Column> columns() const;
};

FieldBundle bundle(const AnalyticState& state, const GridPtr& grid, double t,
                   Provenance provenance = Provenance::analytic, const BundleOptions& options = {});

}  // namespace qfl
