#include "qfl/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <sstream>

namespace qfl {

Axis Axis::bounded(int n, double lo, double hi) {
  if (n < kMinAxisPoints) throw std::invalid_argument("axis needs at least 5 nodes");
  if (!(hi > lo)) throw std::invalid_argument("axis extent must be positive");
  return {n, lo, (hi - lo) / (n - 1), Topology::bounded};
}

Axis Axis::periodic(int n, double lo, double hi) {
  if (n < kMinAxisPoints) throw std::invalid_argument("axis needs at least 5 nodes");
  if (!(hi > lo)) throw std::invalid_argument("axis extent must be positive");
  return {n, lo, (hi - lo) / n, Topology::periodic};
}

double Axis::upper() const {
  return topology == Topology::periodic ? origin + spacing * n : origin + spacing * (n - 1);
}

Grid Grid::cartesian(std::vector<Axis> axes, int n_bodies, int dim_per_body) {
  if (axes.empty() || axes.size() > 3) throw std::invalid_argument("cartesian grid needs 1-3 axes");
  if (n_bodies < 1 || dim_per_body < 1 ||
      static_cast<std::size_t>(n_bodies * dim_per_body) != axes.size())
    throw std::invalid_argument("axis count must equal n_bodies * dim_per_body");
  for (const auto& a : axes) {
    if (a.n < kMinAxisPoints) throw std::invalid_argument("axis needs at least 5 nodes");
    if (!(a.spacing > 0.0)) throw std::invalid_argument("axis spacing must be positive");
  }
  Grid g;
  g.kind_ = CoordinateKind::cartesian;
  g.axes_ = std::move(axes);
  g.n_bodies_ = n_bodies;
  g.dim_per_body_ = dim_per_body;
  g.finalize();
  return g;
}

Grid Grid::cartesian(std::vector<Axis> axes) {
  const int d = static_cast<int>(axes.size());
  return cartesian(std::move(axes), 1, d);
}

Grid Grid::radial_log(int n, double r_min, double r_max) {
  if (n < kMinAxisPoints) throw std::invalid_argument("radial grid needs at least 5 nodes");
  if (!(r_min > 0.0) || !(r_max > r_min)) throw std::invalid_argument("radial grid needs 0 < r_min < r_max");
  Grid g;
  g.kind_ = CoordinateKind::radial_log;
  g.log_step_ = std::log(r_max / r_min) / (n - 1);
  g.axes_ = {Axis{n, std::log(r_min), g.log_step_, Topology::bounded}};
  g.n_bodies_ = 1;
  g.dim_per_body_ = 3;
  g.finalize();
  return g;
}

void Grid::finalize() {
  size_ = 1;
  for (int a = rank() - 1; a >= 0; --a) {
    strides_[a] = size_;
    size_ *= static_cast<std::size_t>(axes_[a].n);
  }
  weights_.assign(size_, 1.0);
  if (kind_ == CoordinateKind::radial_log) {
    const int n = axes_[0].n;
    radii_.resize(n);
    for (int i = 0; i < n; ++i) {
      // Exact endpoints; interior nodes from the log step.
      radii_[i] = (i == n - 1) ? std::exp(axes_[0].origin) * std::exp(log_step_ * (n - 1))
                               : std::exp(axes_[0].coordinate(i));
      const double r = radii_[i];
      double w = 4.0 * std::numbers::pi * r * r * r * log_step_;
      if (i == 0 || i == n - 1) w *= 0.5;
      weights_[i] = w;
    }
    return;
  }
  for (std::size_t idx = 0; idx < size_; ++idx) {
    const auto ijk = unravel(idx);
    double w = 1.0;
    for (int a = 0; a < rank(); ++a) {
      const auto& ax = axes_[a];
      double wa = ax.spacing;
      if (ax.topology == Topology::bounded && (ijk[a] == 0 || ijk[a] == ax.n - 1)) wa *= 0.5;
      w *= wa;
    }
    weights_[idx] = w;
  }
}

std::array<int, 3> Grid::unravel(std::size_t idx) const {
  std::array<int, 3> ijk{0, 0, 0};
  for (int a = 0; a < rank(); ++a) {
    ijk[a] = static_cast<int>(idx / strides_[a]);
    idx %= strides_[a];
  }
  return ijk;
}

std::size_t Grid::ravel(const std::array<int, 3>& ijk) const {
  std::size_t idx = 0;
  for (int a = 0; a < rank(); ++a) idx += strides_[a] * static_cast<std::size_t>(ijk[a]);
  return idx;
}

Config Grid::point(std::size_t idx) const {
  Config x{0.0, 0.0, 0.0};
  if (kind_ == CoordinateKind::radial_log) {
    x[0] = radii_[idx];
    return x;
  }
  const auto ijk = unravel(idx);
  for (int a = 0; a < rank(); ++a) x[a] = axes_[a].coordinate(ijk[a]);
  return x;
}

double Grid::step() const {
  if (kind_ == CoordinateKind::radial_log) return log_step_;
  double h = 0.0;
  for (const auto& a : axes_) h = std::max(h, a.spacing);
  return h;
}

int Grid::axis_of(int body, int c) const {
  if (body < 0 || body >= n_bodies_) throw std::out_of_range("body index out of range");
  if (kind_ == CoordinateKind::radial_log) return 0;
  if (c < 0 || c >= dim_per_body_) throw std::out_of_range("component index out of range");
  return body * dim_per_body_ + c;
}

Grid Grid::refined() const {
  if (kind_ == CoordinateKind::radial_log)
    return radial_log(2 * axes_[0].n - 1, radii_.front(), radii_.back());
  std::vector<Axis> axes;
  for (const auto& a : axes_) {
    if (a.topology == Topology::periodic)
      axes.push_back(Axis::periodic(2 * a.n, a.origin, a.upper()));
    else
      axes.push_back(Axis::bounded(2 * a.n - 1, a.origin, a.upper()));
  }
  return cartesian(std::move(axes), n_bodies_, dim_per_body_);
}

bool Grid::near_edge(std::size_t idx, int margin) const {
  const auto ijk = unravel(idx);
  for (int a = 0; a < rank(); ++a) {
    if (axes_[a].topology == Topology::periodic) continue;
    if (ijk[a] < margin || ijk[a] > axes_[a].n - 1 - margin) return true;
  }
  return false;
}

nlohmann::json Grid::meta() const {
  nlohmann::json j;
  if (kind_ == CoordinateKind::radial_log) {
    j["kind"] = "radial_log";
    j["n"] = axes_[0].n;
    j["r_min"] = radii_.front();
    j["r_max"] = radii_.back();
    j["log_step"] = log_step_;
    return j;
  }
  j["kind"] = "cartesian";
  j["n_bodies"] = n_bodies_;
  j["dim_per_body"] = dim_per_body_;
  auto& axes = j["axes"] = nlohmann::json::array();
  for (const auto& a : axes_)
    axes.push_back({{"n", a.n},
                    {"lo", a.origin},
                    {"hi", a.upper()},
                    {"spacing", a.spacing},
                    {"periodic", a.topology == Topology::periodic}});
  return j;
}

Mask merge_masks(const Mask& a, const Mask& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  Mask m(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) m[i] = (a[i] || b[i]) ? 1 : 0;
  return m;
}

template <class T>
BasicScalarField<T> BasicVectorField<T>::component(int c) const {
  BasicScalarField<T> f(grid, units);
  for (std::size_t i = 0; i < size(); ++i) f.values[i] = at(i, c);
  f.mask = mask;
  return f;
}

template struct BasicVectorField<double>;
template struct BasicVectorField<Cx>;

namespace {

double wrap_phase(double d) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  d = std::remainder(d, two_pi);
  if (d <= -std::numbers::pi) d += two_pi;
  return d;
}

template <class T>
struct Differ {
  Differencing mode = Differencing::plain;
  T operator()(const T& from, const T& to) const {
    if constexpr (std::is_same_v<T, double>) {
      if (mode == Differencing::phase) return wrap_phase(to - from);
    }
    return to - from;
  }
};

// First derivative along one axis in index units (divide by spacing later).
template <class T>
std::vector<T> diff1(const std::vector<T>& v, const Grid& g, int axis, Differ<T> delta) {
  const auto& ax = g.axis(axis);
  const std::size_t s = g.stride(axis);
  const int n = ax.n;
  const bool periodic = ax.topology == Topology::periodic;
  std::vector<T> out(v.size());
  for (std::size_t idx = 0; idx < v.size(); ++idx) {
    const int i = static_cast<int>((idx / s) % static_cast<std::size_t>(n));
    const std::size_t base = idx - static_cast<std::size_t>(i) * s;
    auto at = [&](int j) -> const T& {
      if (periodic) j = ((j % n) + n) % n;
      return v[base + static_cast<std::size_t>(j) * s];
    };
    if (periodic || (i > 0 && i < n - 1)) {
      out[idx] = 0.5 * (delta(at(i - 1), at(i)) + delta(at(i), at(i + 1)));
    } else if (i == 0) {
      // (-3 f0 + 4 f1 - f2) / 2
      out[idx] = 0.5 * (3.0 * delta(at(0), at(1)) - delta(at(1), at(2)));
    } else {
      out[idx] = 0.5 * (3.0 * delta(at(n - 2), at(n - 1)) - delta(at(n - 3), at(n - 2)));
    }
  }
  return out;
}

template <class T>
std::vector<T> diff2(const std::vector<T>& v, const Grid& g, int axis, Differ<T> delta) {
  const auto& ax = g.axis(axis);
  const std::size_t s = g.stride(axis);
  const int n = ax.n;
  const bool periodic = ax.topology == Topology::periodic;
  std::vector<T> out(v.size());
  for (std::size_t idx = 0; idx < v.size(); ++idx) {
    const int i = static_cast<int>((idx / s) % static_cast<std::size_t>(n));
    const std::size_t base = idx - static_cast<std::size_t>(i) * s;
    auto at = [&](int j) -> const T& {
      if (periodic) j = ((j % n) + n) % n;
      return v[base + static_cast<std::size_t>(j) * s];
    };
    if (periodic || (i > 0 && i < n - 1)) {
      out[idx] = delta(at(i), at(i + 1)) - delta(at(i - 1), at(i));
    } else if (i == 0) {
      // 2 f0 - 5 f1 + 4 f2 - f3
      out[idx] = -2.0 * delta(at(0), at(1)) + 3.0 * delta(at(1), at(2)) - delta(at(2), at(3));
    } else {
      out[idx] = 2.0 * delta(at(n - 2), at(n - 1)) - 3.0 * delta(at(n - 3), at(n - 2)) +
                 delta(at(n - 4), at(n - 3));
    }
  }
  return out;
}

template <class T>
BasicScalarField<T> grad_component_impl(const BasicScalarField<T>& f, int body, int c,
                                        Differencing mode) {
  const Grid& g = *f.grid;
  BasicScalarField<T> out(f.grid, f.units);
  out.mask = f.mask;
  const int axis = g.axis_of(body, c);
  if (g.kind() == CoordinateKind::radial_log) {
    if (c != 0) return out;  // fields are sampled on the +x ray
    const auto ds = diff1(f.values, g, 0, Differ<T>{mode});
    for (std::size_t i = 0; i < g.size(); ++i) out.values[i] = ds[i] / (g.log_step() * g.radius(i));
    return out;
  }
  const auto d = diff1(f.values, g, axis, Differ<T>{mode});
  const double h = g.axis(axis).spacing;
  for (std::size_t i = 0; i < g.size(); ++i) out.values[i] = d[i] / h;
  return out;
}

template <class T>
BasicVectorField<T> gradient_impl(const BasicScalarField<T>& f, int body, Differencing mode) {
  const Grid& g = *f.grid;
  const int nc = g.vector_components();
  BasicVectorField<T> out(f.grid, nc, f.units);
  out.mask = f.mask;
  for (int c = 0; c < nc; ++c) {
    const auto comp = grad_component_impl(f, body, c, mode);
    for (std::size_t i = 0; i < g.size(); ++i) out.at(i, c) = comp.values[i];
  }
  return out;
}

template <class T>
BasicScalarField<T> laplacian_impl(const BasicScalarField<T>& f, int body) {
  const Grid& g = *f.grid;
  BasicScalarField<T> out(f.grid, f.units);
  out.mask = f.mask;
  if (g.kind() == CoordinateKind::radial_log) {
    g.axis_of(body, 0);
    const double h = g.log_step();
    const auto d1 = diff1(f.values, g, 0, Differ<T>{});
    const auto d2 = diff2(f.values, g, 0, Differ<T>{});
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double r = g.radius(i);
      out.values[i] = (d2[i] / (h * h) + d1[i] / h) / (r * r);
    }
    return out;
  }
  for (int c = 0; c < g.dim_per_body(); ++c) {
    const int axis = g.axis_of(body, c);
    const double h = g.axis(axis).spacing;
    const auto d2 = diff2(f.values, g, axis, Differ<T>{});
    for (std::size_t i = 0; i < g.size(); ++i) out.values[i] += d2[i] / (h * h);
  }
  return out;
}

template <class T>
BasicScalarField<T> divergence_impl(const BasicVectorField<T>& F, int body) {
  const Grid& g = *F.grid;
  if (F.components != g.vector_components())
    throw std::invalid_argument("vector field component count does not match grid");
  BasicScalarField<T> out(F.grid, F.units);
  out.mask = F.mask;
  if (g.kind() == CoordinateKind::radial_log) {
    g.axis_of(body, 0);
    std::vector<T> flux(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) flux[i] = F.at(i, 0) * (g.radius(i) * g.radius(i));
    const auto ds = diff1(flux, g, 0, Differ<T>{});
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double r = g.radius(i);
      out.values[i] = ds[i] / (g.log_step() * r * r * r);
    }
    return out;
  }
  for (int c = 0; c < g.dim_per_body(); ++c) {
    const int axis = g.axis_of(body, c);
    std::vector<T> comp(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) comp[i] = F.at(i, c);
    const auto d = diff1(comp, g, axis, Differ<T>{});
    const double h = g.axis(axis).spacing;
    for (std::size_t i = 0; i < g.size(); ++i) out.values[i] += d[i] / h;
  }
  return out;
}

}  // namespace

ScalarField gradient_component(const ScalarField& f, int body, int c, Differencing mode) {
  return grad_component_impl(f, body, c, mode);
}
VectorField gradient(const ScalarField& f, int body, Differencing mode) {
  return gradient_impl(f, body, mode);
}
ComplexVectorField gradient(const ComplexField& f, int body) {
  return gradient_impl(f, body, Differencing::plain);
}
ScalarField laplacian(const ScalarField& f, int body) { return laplacian_impl(f, body); }
ComplexField laplacian(const ComplexField& f, int body) { return laplacian_impl(f, body); }
ScalarField divergence(const VectorField& F, int body) { return divergence_impl(F, body); }
ComplexField divergence(const ComplexVectorField& F, int body) { return divergence_impl(F, body); }

Integral integrate(const std::vector<double>& values, const Grid& grid) {
  if (values.size() != grid.size()) throw std::invalid_argument("field size does not match grid");
  Integral result;
  // Neumaier-compensated sum in fixed index order.
  double sum = 0.0, comp = 0.0, peak = 0.0;
  const auto& w = grid.weights();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double term = values[i] * w[i];
    const double t = sum + term;
    if (std::abs(sum) >= std::abs(term))
      comp += (sum - t) + term;
    else
      comp += (term - t) + sum;
    sum = t;
    peak = std::max(peak, std::abs(values[i]));
  }
  result.value = sum + comp;

  // Truncation: the integrand must have decayed at bounded edges.
  double edge = 0.0;
  if (grid.kind() == CoordinateKind::radial_log) {
    edge = std::abs(values.back());
  } else {
    for (std::size_t i = 0; i < values.size(); ++i) {
      const auto ijk = grid.unravel(i);
      for (int a = 0; a < grid.rank(); ++a) {
        const auto& ax = grid.axis(a);
        if (ax.topology == Topology::bounded && (ijk[a] == 0 || ijk[a] == ax.n - 1))
          edge = std::max(edge, std::abs(values[i]));
      }
    }
  }
  if (peak > 0.0 && edge > 1e-10 * peak) {
    std::ostringstream msg;
    msg << "integrand has not decayed at the domain edge (edge/peak = " << edge / peak << ")";
    result.warnings.push_back(msg.str());
  }
  return result;
}

Integral integrate(const ScalarField& f) {
  if (f.mask.empty()) return integrate(f.values, *f.grid);
  std::vector<double> v = f.values;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (f.mask[i]) v[i] = 0.0;
  return integrate(v, *f.grid);
}

std::vector<Column> columns_of(const std::string& name, const ScalarField& f) {
  return {Column{name, f.units, &f.values, 1, 0}};
}

std::vector<Column> columns_of(const std::string& name, const VectorField& F) {
  static const char* suffix[] = {"_x", "_y", "_z"};
  std::vector<Column> cols;
  for (int c = 0; c < F.components; ++c) {
    const std::string label = F.components == 1 ? name : name + (c < 3 ? suffix[c] : "_" + std::to_string(c));
    cols.push_back(Column{label, F.units, &F.values, F.components, c});
  }
  return cols;
}

namespace {
std::vector<std::string> coordinate_names(const Grid& grid) {
  if (grid.kind() == CoordinateKind::radial_log) return {"r"};
  std::vector<std::string> names;
  static const char* xyz[] = {"x", "y", "z"};
  for (int b = 0; b < grid.n_bodies(); ++b)
    for (int c = 0; c < grid.dim_per_body(); ++c) {
      std::string n = xyz[c];
      if (grid.n_bodies() > 1) n += std::to_string(b + 1);
      names.push_back(n);
    }
  return names;
}
}  // namespace

void write_csv(std::ostream& os, const Grid& grid, const std::vector<Column>& columns, const Mask& mask) {
  const auto coords = coordinate_names(grid);
  bool first = true;
  for (const auto& c : coords) {
    os << (first ? "" : ",") << c;
    first = false;
  }
  for (const auto& col : columns) os << "," << col.name << "[" << col.units << "]";
  os << "\n";
  char buf[64];
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Config x = grid.point(i);
    for (std::size_t a = 0; a < coords.size(); ++a) {
      std::snprintf(buf, sizeof buf, "%.17g", x[a]);
      os << (a ? "," : "") << buf;
    }
    const bool masked = !mask.empty() && mask[i];
    for (const auto& col : columns) {
      os << ",";
      if (masked) continue;
      std::snprintf(buf, sizeof buf, "%.17g", (*col.values)[i * col.stride + col.offset]);
      os << buf;
    }
    os << "\n";
  }
}

nlohmann::json to_json(const Grid& grid, const std::vector<Column>& columns, const Mask& mask) {
  nlohmann::json j;
  j["schema"] = "qfl.field";
  j["version"] = "1";
  j["grid"] = grid.meta();
  auto& cols = j["columns"] = nlohmann::json::array();
  for (const auto& col : columns) {
    nlohmann::json values = nlohmann::json::array();
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (!mask.empty() && mask[i])
        values.push_back(nullptr);
      else
        values.push_back((*col.values)[i * col.stride + col.offset]);
    }
    cols.push_back({{"name", col.name}, {"units", col.units}, {"values", std::move(values)}});
  }
  return j;
}

}  // namespace qfl
