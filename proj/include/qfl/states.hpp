#pragma once

// Closed-form quantum states with exact derivative evaluators, and the polar
// (amplitude/phase) decomposition of sampled wavefunctions.
//
// Atomic units throughout: hbar = m = e = 1.

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qfl/grid.hpp"
#include "qfl/jet.hpp"

namespace qfl {

inline constexpr double kHbar = 1.0;
inline constexpr double kMass = 1.0;

template <class S>
using Point = std::array<S, 3>;

/// Support of a state: one (lo, hi) pair per configuration coordinate.
struct StateDomain {
  std::string id;
  std::vector<std::pair<double, double>> extent;
  bool periodic = false;
};

class AnalyticState {
 public:
  struct Component {
    Cx coeff;
    std::shared_ptr<const AnalyticState> state;
  };

  /// Builds a state from kernels callable as `S kernel(const Point<S>&, const S& t)`
  /// for S in {Cx, CJet<1>, CJet<3>, CJet<4>}; `potential` ignores t.
  template <class Kernel, class Potential>
  static AnalyticState make(std::string label, int n_bodies, int dim_per_body, Kernel psi,
                            Potential potential, std::string potential_id, StateDomain domain,
                            std::optional<double> energy, bool exact_solution = true);

  const std::string& label() const { return label_; }
  int n_bodies() const { return n_bodies_; }
  int dim_per_body() const { return dim_per_body_; }
  int config_dim() const { return n_bodies_ * dim_per_body_; }
  /// Set for eigenstates: i dPsi/dt = E Psi.
  std::optional<double> energy() const { return energy_; }
  /// True when the state solves the time-dependent Schroedinger equation.
  bool exact_solution() const { return exact_; }
  const StateDomain& domain() const { return domain_; }
  const std::string& potential_id() const { return potential_id_; }
  const std::vector<Component>& components() const { return components_; }

  Cx psi(const Config& x, double t) const;
  /// d Psi / d x_k for every configuration coordinate k.
  std::vector<Cx> grad_psi(const Config& x, double t) const;
  /// Laplacian of Psi with respect to each body's coordinates.
  std::vector<Cx> lap_psi(const Config& x, double t) const;
  Cx dpsi_dt(const Config& x, double t) const;
  double potential(const Config& x) const;

  /// Taylor jet of Psi in (x0, x1, x2, t) about (x, t). Order in {1, 3, 4}.
  template <int Order>
  CJet<Order> psi_jet(const Config& x, double t) const;
  template <int Order>
  RJet<Order> potential_jet(const Config& x) const;

  /// Kernel-level evaluation, used when composing states.
  template <class S>
  S eval(const Point<S>& x, const S& t) const;
  template <class S>
  S eval_potential(const Point<S>& x) const;

  // Derived states share the kernels of their parents.
  friend AnalyticState superpose(const std::vector<AnalyticState>& states, const std::vector<Cx>& coeffs);
  friend AnalyticState perturb_density(const AnalyticState& base, double delta, const Config& center,
                                       double width);

 private:
  struct Kernels {
    std::function<Cx(const Point<Cx>&, const Cx&)> v;
    std::function<CJet<1>(const Point<CJet<1>>&, const CJet<1>&)> j1;
    std::function<CJet<3>(const Point<CJet<3>>&, const CJet<3>&)> j3;
    std::function<CJet<4>(const Point<CJet<4>>&, const CJet<4>&)> j4;
  };

  template <class K>
  static std::shared_ptr<const Kernels> erase(K k);

  template <int Order>
  Point<CJet<Order>> jet_point(const Config& x) const;

  std::string label_;
  int n_bodies_ = 1;
  int dim_per_body_ = 1;
  std::optional<double> energy_;
  bool exact_ = true;
  StateDomain domain_;
  std::string potential_id_;
  std::shared_ptr<const Kernels> psi_;
  std::shared_ptr<const Kernels> potential_;
  std::vector<Component> components_;
};

// ---- catalog -------------------------------------------------------------

/// Hydrogen ns eigenstate, n in {1, 2, 3}; U = -1/r, E = -1/(2 n^2).
AnalyticState hydrogen_ns(int n);
/// Hydrogen 2p, m = +1: (x + i y) e^{-r/2} / (8 sqrt(pi)), E = -1/8.
AnalyticState hydrogen_2p_plus();
/// Particle in a box [0, L]: sqrt(2/L) sin(k pi x / L), E = k^2 pi^2 / (2 L^2).
AnalyticState box_1d(int k, double length);
/// Harmonic oscillator eigenstate n in {0, 1, 2} with frequency omega.
AnalyticState harmonic_1d(int n, double omega);
/// Plane wave e^{i 2 pi k x / L} / sqrt(L) on a periodic ring of length L.
AnalyticState ring_1d(int k, double length);
/// Frozen test function (pi sigma^2)^{-1/4} e^{-(x-x0)^2/(2 sigma^2)} e^{i k x}.
/// Not a Schroedinger solution.
AnalyticState gaussian_packet(double x0, double sigma, double k);
/// Two 1D particles in the same box, product of modes k1 and k2.
AnalyticState box_2body(int k1, int k2, double length);

/// Psi = sum C_i Psi_i for eigen-components sharing domain and potential.
AnalyticState superpose(const std::vector<AnalyticState>& states, const std::vector<Cx>& coeffs);

/// rho -> rho (1 + delta g) with a gaussian bump g of the given width; keeps
/// the parent's energy so verifiers can be run against the corrupted state.
AnalyticState perturb_density(const AnalyticState& base, double delta, const Config& center, double width);

/// Random smooth frozen state (positive polynomial times gaussian, optional
/// polynomial phase) in `dim` dimensions, for identity checks.
AnalyticState random_smooth_state(unsigned seed, int dim, bool with_phase);

/// Parses a catalog label, e.g. "hydrogen_1s", "box:k=2,L=pi",
/// "superpose:0.7071@box:k=1,L=pi|0.7071i@box:k=2,L=pi".
AnalyticState parse_state(const std::string& label);

/// Literal arithmetic used by labels: numbers, pi, i, sqrt(), + - * / and
/// parentheses, e.g. "sqrt(0.5)i" or "2pi". Throws std::invalid_argument.
Cx parse_value(const std::string& text);
double parse_real(const std::string& text);
int parse_int(const std::string& text);

// ---- sampling and polar form -----------------------------------------------

ComplexField sample_psi(const AnalyticState& state, const GridPtr& grid, double t);

struct PolarPair {
  ScalarField rho;  // |Psi|^2
  ScalarField R;    // |Psi|
  ScalarField S;    // hbar * unwrapped phase; undefined (0) on the mask
  Mask mask;        // rho < node_threshold * max rho
  int regions = 0;  // connected unmasked regions, each unwrapped independently
  bool disconnected() const { return regions > 1; }
};

inline constexpr double kDefaultNodeThreshold = 1e-12;

/// Amplitude/phase split with S unwrapped by flood fill from the densest node.
PolarPair polar_decompose(const ComplexField& samples, double node_threshold = kDefaultNodeThreshold);

/// R e^{i S / hbar}; masked samples are zero.
ComplexField reconstruct(const PolarPair& polar);

// ---- template definitions --------------------------------------------------

template <class K>
std::shared_ptr<const AnalyticState::Kernels> AnalyticState::erase(K k) {
  auto out = std::make_shared<Kernels>();
  out->v = k;
  out->j1 = k;
  out->j3 = k;
  out->j4 = k;
  return out;
}

template <class Kernel, class Potential>
AnalyticState AnalyticState::make(std::string label, int n_bodies, int dim_per_body, Kernel psi,
                                  Potential potential, std::string potential_id, StateDomain domain,
                                  std::optional<double> energy, bool exact_solution) {
  AnalyticState s;
  s.label_ = std::move(label);
  s.n_bodies_ = n_bodies;
  s.dim_per_body_ = dim_per_body;
  s.energy_ = energy;
  s.exact_ = exact_solution;
  s.domain_ = std::move(domain);
  s.potential_id_ = std::move(potential_id);
  s.psi_ = erase(std::move(psi));
  s.potential_ = erase([potential](const auto& x, const auto&) { return potential(x); });
  return s;
}

template <class S>
S AnalyticState::eval(const Point<S>& x, const S& t) const {
  if constexpr (std::is_same_v<S, Cx>) {
    return psi_->v(x, t);
  } else if constexpr (S::kOrder == 1) {
    return psi_->j1(x, t);
  } else if constexpr (S::kOrder == 3) {
    return psi_->j3(x, t);
  } else {
    static_assert(S::kOrder == 4, "jets of order 1, 3 or 4 only");
    return psi_->j4(x, t);
  }
}

template <class S>
S AnalyticState::eval_potential(const Point<S>& x) const {
  const S t0(0.0);
  if constexpr (std::is_same_v<S, Cx>) {
    return potential_->v(x, t0);
  } else if constexpr (S::kOrder == 1) {
    return potential_->j1(x, t0);
  } else if constexpr (S::kOrder == 3) {
    return potential_->j3(x, t0);
  } else {
    return potential_->j4(x, t0);
  }
}

template <int Order>
Point<CJet<Order>> AnalyticState::jet_point(const Config& x) const {
  Point<CJet<Order>> p{CJet<Order>(0.0), CJet<Order>(0.0), CJet<Order>(0.0)};
  for (int k = 0; k < config_dim(); ++k) p[k] = CJet<Order>::variable(Cx(x[k], 0.0), k);
  return p;
}

template <int Order>
CJet<Order> AnalyticState::psi_jet(const Config& x, double t) const {
  return eval(jet_point<Order>(x), CJet<Order>::variable(Cx(t, 0.0), kTimeVar));
}

template <int Order>
RJet<Order> AnalyticState::potential_jet(const Config& x) const {
  return real(eval_potential(jet_point<Order>(x)));
}

}  // namespace qfl
