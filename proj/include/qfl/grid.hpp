#pragma once

// Structured grids over configuration space, finite-difference operators and
// quadrature.
//
// A grid covers the configuration space of n_bodies particles of
// dim_per_body dimensions each. Cartesian grids have one axis per
// configuration coordinate (body b owns axes [b*d, (b+1)*d)). Radial-log
// grids describe spherically symmetric one-body 3D fields sampled along the
// +x ray, with nodes uniform in s = ln r.

#include <array>
#include <complex>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace qfl {

using Cx = std::complex<double>;
using Config = std::array<double, 3>;

/// Stencil width of the second-order operators.
inline constexpr int kMinAxisPoints = 5;

enum class CoordinateKind { cartesian, radial_log };
enum class Topology { bounded, periodic };

struct Axis {
  int n = 0;
  double origin = 0.0;
  double spacing = 0.0;
  Topology topology = Topology::bounded;

  /// n nodes spanning [lo, hi] inclusive.
  static Axis bounded(int n, double lo, double hi);
  /// n nodes on the circle [lo, hi), hi identified with lo.
  static Axis periodic(int n, double lo, double hi);

  double coordinate(int i) const { return origin + spacing * i; }
  double upper() const;
};

class Grid {
 public:
  static Grid cartesian(std::vector<Axis> axes, int n_bodies, int dim_per_body);
  /// One body in `axes.size()` dimensions.
  static Grid cartesian(std::vector<Axis> axes);
  static Grid radial_log(int n, double r_min, double r_max);

  CoordinateKind kind() const { return kind_; }
  int rank() const { return static_cast<int>(axes_.size()); }
  const Axis& axis(int a) const { return axes_.at(a); }
  int n_bodies() const { return n_bodies_; }
  int dim_per_body() const { return dim_per_body_; }
  std::size_t size() const { return size_; }
  std::size_t stride(int a) const { return strides_.at(a); }

  std::array<int, 3> unravel(std::size_t idx) const;
  std::size_t ravel(const std::array<int, 3>& ijk) const;

  /// Configuration-space coordinates of node idx (unused slots are zero).
  Config point(std::size_t idx) const;
  /// Node radius; radial-log grids only.
  double radius(std::size_t idx) const { return radii_.at(idx); }
  /// Uniform step in ln r; radial-log grids only.
  double log_step() const { return log_step_; }

  /// Quadrature weights (trapezoid product rule, or 4 pi r^3 ds on
  /// radial-log grids).
  const std::vector<double>& weights() const { return weights_; }

  /// The step that halves under refinement (largest cartesian spacing, or the
  /// log step).
  double step() const;

  /// Axis carrying component `c` of body `body`.
  int axis_of(int body, int c) const;
  /// Number of vector components per body for a gradient on this grid.
  int vector_components() const { return kind_ == CoordinateKind::radial_log ? 3 : dim_per_body_; }

  /// Same extents with every step halved.
  Grid refined() const;

  /// True when idx lies within `margin` nodes of a bounded edge.
  bool near_edge(std::size_t idx, int margin) const;

  nlohmann::json meta() const;

 private:
  Grid() = default;
  void finalize();

  CoordinateKind kind_ = CoordinateKind::cartesian;
  std::vector<Axis> axes_;
  int n_bodies_ = 1;
  int dim_per_body_ = 1;
  std::size_t size_ = 0;
  std::array<std::size_t, 3> strides_{1, 1, 1};
  std::vector<double> weights_;
  std::vector<double> radii_;
  double log_step_ = 0.0;
};

using GridPtr = std::shared_ptr<const Grid>;

inline GridPtr share(Grid g) { return std::make_shared<const Grid>(std::move(g)); }

/// Nonzero entries mark excluded (nodal) samples; empty means no mask.
using Mask = std::vector<std::uint8_t>;

Mask merge_masks(const Mask& a, const Mask& b);

template <class T>
struct BasicScalarField {
  GridPtr grid;
  std::vector<T> values;
  std::string units;
  Mask mask;

  BasicScalarField() = default;
  BasicScalarField(GridPtr g, std::string u = "")
      : grid(std::move(g)), values(grid->size()), units(std::move(u)) {}
  BasicScalarField(GridPtr g, std::vector<T> v, std::string u = "", Mask m = {})
      : grid(std::move(g)), values(std::move(v)), units(std::move(u)), mask(std::move(m)) {
    if (values.size() != grid->size()) throw std::invalid_argument("field size does not match grid");
    if (!mask.empty() && mask.size() != grid->size())
      throw std::invalid_argument("mask size does not match grid");
  }

  std::size_t size() const { return values.size(); }
  bool masked(std::size_t i) const { return !mask.empty() && mask[i] != 0; }
  T& operator[](std::size_t i) { return values[i]; }
  const T& operator[](std::size_t i) const { return values[i]; }
};

template <class T>
struct BasicVectorField {
  GridPtr grid;
  int components = 0;
  std::vector<T> values;  // point-major: values[i * components + c]
  std::string units;
  Mask mask;

  BasicVectorField() = default;
  BasicVectorField(GridPtr g, int ncomp, std::string u = "")
      : grid(std::move(g)), components(ncomp), values(grid->size() * ncomp), units(std::move(u)) {}

  std::size_t size() const { return grid ? grid->size() : 0; }
  bool masked(std::size_t i) const { return !mask.empty() && mask[i] != 0; }
  T& at(std::size_t i, int c) { return values[i * components + c]; }
  const T& at(std::size_t i, int c) const { return values[i * components + c]; }

  BasicScalarField<T> component(int c) const;
};

using ScalarField = BasicScalarField<double>;
using ComplexField = BasicScalarField<Cx>;
using VectorField = BasicVectorField<double>;
using ComplexVectorField = BasicVectorField<Cx>;

/// How differences between neighbouring samples are formed. `phase` wraps
/// each difference into (-pi, pi], which differentiates an angle across
/// branch cuts.
enum class Differencing { plain, phase };

ScalarField gradient_component(const ScalarField& f, int body, int c,
                               Differencing mode = Differencing::plain);
VectorField gradient(const ScalarField& f, int body, Differencing mode = Differencing::plain);
ComplexVectorField gradient(const ComplexField& f, int body);
ScalarField laplacian(const ScalarField& f, int body);
ComplexField laplacian(const ComplexField& f, int body);
ScalarField divergence(const VectorField& F, int body);
ComplexField divergence(const ComplexVectorField& F, int body);

struct Integral {
  double value = 0.0;
  std::vector<std::string> warnings;
};

/// Quadrature over the grid. Masked samples contribute zero.
Integral integrate(const ScalarField& f);
Integral integrate(const std::vector<double>& values, const Grid& grid);

/// Named column for CSV / JSON export.
struct Column {
  std::string name;
  std::string units;
  const std::vector<double>* values = nullptr;
  int stride = 1;
  int offset = 0;
};

std::vector<Column> columns_of(const std::string& name, const ScalarField& f);
std::vector<Column> columns_of(const std::string& name, const VectorField& F);

/// CSV with a header row naming coordinates and `name[units]` per column.
/// Masked rows carry empty cells for masked columns.
void write_csv(std::ostream& os, const Grid& grid, const std::vector<Column>& columns,
               const Mask& mask = {});

/// Self-describing JSON envelope {schema, version, grid, columns[]}.
nlohmann::json to_json(const Grid& grid, const std::vector<Column>& columns, const Mask& mask = {});

}  // namespace qfl
