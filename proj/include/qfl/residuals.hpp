#pragma once

// Governing equations of the hydrodynamic picture evaluated as pointwise
// residual fields, plus integral identities as quadrature checks.
//
// Every check has two derivative provenances: `analytic` (Taylor jets of the
// closed-form state, tolerance 1e-8 absolute) and `grid` (finite differences
// of sampled fields, tolerance 10 h^2 times the largest term magnitude).

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qfl/fields.hpp"

namespace qfl {

struct CheckOptions {
  Provenance provenance = Provenance::analytic;
  int margin = 2;
  double node_threshold = kDefaultNodeThreshold;
  /// Overrides the default tolerance of the pointwise residual.
  std::optional<double> tolerance;
  /// Sign of u for the velocity checks; the Euler forms always use u_minus.
  Sign sign = Sign::minus;
  /// Body-force weight a of EQ_u (EQ_v takes b = 1 - a).
  double split_a = 0.5;
  /// Replaces the catalog energy in bernoulli / hamilton_jacobi.
  std::optional<double> energy;
  bool keep_pointwise = false;
};

struct GlobalCheck {
  std::string name;
  double value = 0.0;
  std::optional<double> expected;
  std::optional<double> tolerance;  // absent: informational only
  bool passed = true;
};

struct ResidualReport {
  std::string equation_id;
  std::string label;
  std::string state;
  double t = 0.0;
  Provenance provenance = Provenance::analytic;
  double residual_linf = 0.0;
  double residual_l2 = 0.0;  // root mean square over the evaluated points
  std::size_t points = 0;
  int boundary_margin = 2;
  double scale = 0.0;
  double tolerance = 0.0;
  bool precondition_ok = true;
  std::string precondition;
  std::vector<GlobalCheck> global_checks;
  std::vector<std::string> notes;
  nlohmann::json grid_meta;
  bool passed = false;
  std::optional<ScalarField> pointwise;

  const GlobalCheck* find(const std::string& name) const;
  nlohmann::json to_json() const;
};

class UnknownCheckError : public std::invalid_argument {
 public:
  explicit UnknownCheckError(const std::string& id) : std::invalid_argument("unknown equation_id '" + id + "'") {}
};

using CheckFn = std::function<ResidualReport(const AnalyticState&, const GridPtr&, double, const CheckOptions&)>;

struct CheckInfo {
  std::string id;
  std::string label;  // equation label shown by list-checks
  std::string description;
  CheckFn run;
};

/// All checks in listing order.
const std::vector<CheckInfo>& check_registry();
/// Throws UnknownCheckError.
const CheckInfo& find_check(const std::string& id);
ResidualReport run_check(const std::string& id, const AnalyticState& state, const GridPtr& grid, double t,
                         const CheckOptions& options = {});

// Bundle-level forms.
ResidualReport check_bernoulli(const FieldBundle& fb, double energy, const CheckOptions& options = {});
ResidualReport check_hamilton_jacobi(const FieldBundle& fb, std::optional<double> energy,
                                     const CheckOptions& options = {});

// State-level forms.
ResidualReport check_bernoulli(const AnalyticState& s, const GridPtr& g, double t, const CheckOptions& o = {});
ResidualReport check_hamilton_jacobi(const AnalyticState& s, const GridPtr& g, double t, const CheckOptions& o = {});
ResidualReport check_continuity(const AnalyticState& s, const GridPtr& g, double t, const CheckOptions& o = {});
ResidualReport check_u_continuity(const AnalyticState& s, const GridPtr& g, double t, const CheckOptions& o = {});
ResidualReport check_laplace_special(const AnalyticState& s, const GridPtr& g, double t, const CheckOptions& o = {});
ResidualReport check_euler_one_body(const AnalyticState& s, const GridPtr& g, double t, const CheckOptions& o = {});
ResidualReport check_euler_n_body(const AnalyticState& s, const GridPtr& g, double t, const CheckOptions& o = {});
ResidualReport check_pressure_gradient(const AnalyticState& s, const GridPtr& g, double t,
                                       const CheckOptions& o = {});
ResidualReport check_energy_gradients(const AnalyticState& s, const GridPtr& g, double t,
                                      const CheckOptions& o = {});
ResidualReport check_ke_expectation(const AnalyticState& s, const GridPtr& g, double t, const CheckOptions& o = {});
ResidualReport check_quantum_potential(const AnalyticState& s, const GridPtr& g, double t,
                                       const CheckOptions& o = {});
ResidualReport check_ke_integrand(const AnalyticState& s, const GridPtr& g, double t, const CheckOptions& o = {});
ResidualReport check_kinetic_decomposition(const AnalyticState& s, const GridPtr& g, double t,
                                           const CheckOptions& o = {});
ResidualReport check_velocity_identities(const AnalyticState& s, const GridPtr& g, double t,
                                         const CheckOptions& o = {});
ResidualReport check_density_identity(const AnalyticState& s, const GridPtr& g, double t,
                                      const CheckOptions& o = {});
ResidualReport check_pressure_complex(const AnalyticState& s, const GridPtr& g, double t,
                                      const CheckOptions& o = {});
ResidualReport check_energy_split(const AnalyticState& s, const GridPtr& g, double t, const CheckOptions& o = {});
ResidualReport check_conservation(const AnalyticState& s, const GridPtr& g, double t, const CheckOptions& o = {});

/// Evaluated points: unmasked, at least `margin` cells from bounded edges and
/// from masked cells.
std::vector<std::uint8_t> evaluation_points(const Grid& grid, const Mask& mask, int margin);

}  // namespace qfl
