#include "qfl/states.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace qfl {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kInf = std::numeric_limits<double>::infinity();

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string num(Cx v) {
  if (v.imag() == 0.0) return num(v.real());
  if (v.real() == 0.0) return num(v.imag()) + "i";
  return num(v.real()) + (v.imag() < 0 ? "" : "+") + num(v.imag()) + "i";
}

StateDomain whole_space(int dim) {
  return {"R" + std::to_string(dim), std::vector<std::pair<double, double>>(dim, {-kInf, kInf}), false};
}

template <class S>
S radius(const Point<S>& p) {
  using std::sqrt;
  return sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
}

template <class S>
S phase_factor(double energy, const S& t) {
  using std::exp;
  return exp(Cx(0.0, -energy / kHbar) * t);
}

struct HydrogenS {
  int n;
  double energy;
  template <class S>
  S operator()(const Point<S>& p, const S& t) const {
    using std::exp;
    const S r = radius(p);
    S radial;
    if (n == 1) {
      radial = exp(-r) * (1.0 / std::sqrt(kPi));
    } else if (n == 2) {
      radial = (2.0 - r) * exp(-0.5 * r) * (1.0 / (4.0 * std::sqrt(2.0 * kPi)));
    } else {
      radial = (27.0 - 18.0 * r + 2.0 * r * r) * exp(-r / 3.0) * (1.0 / (81.0 * std::sqrt(3.0 * kPi)));
    }
    return radial * phase_factor(energy, t);
  }
};

struct Hydrogen2p {
  double energy;
  template <class S>
  S operator()(const Point<S>& p, const S& t) const {
    using std::exp;
    const S r = radius(p);
    return (p[0] + Cx(0.0, 1.0) * p[1]) * exp(-0.5 * r) * (1.0 / (8.0 * std::sqrt(kPi))) *
           phase_factor(energy, t);
  }
};

struct Coulomb {
  template <class S>
  S operator()(const Point<S>& p) const {
    return -1.0 / radius(p);
  }
};

struct Free {
  template <class S>
  S operator()(const Point<S>&) const {
    return S(0.0);
  }
};

struct BoxMode {
  int k;
  double length;
  double energy;
  int coord;
  template <class S>
  S operator()(const Point<S>& p, const S& t) const {
    using std::sin;
    return std::sqrt(2.0 / length) * sin(p[coord] * (k * kPi / length)) * phase_factor(energy, t);
  }
};

struct Harmonic {
  int n;
  double omega;
  double energy;
  template <class S>
  S operator()(const Point<S>& p, const S& t) const {
    using std::exp;
    const S xi = p[0] * std::sqrt(omega);
    const S g = exp(-0.5 * xi * xi) * std::pow(omega / kPi, 0.25);
    S poly(1.0);
    if (n == 1) poly = xi * std::sqrt(2.0);
    if (n == 2) poly = (2.0 * xi * xi - 1.0) * (1.0 / std::sqrt(2.0));
    return poly * g * phase_factor(energy, t);
  }
};

struct HarmonicWell {
  double omega;
  template <class S>
  S operator()(const Point<S>& p) const {
    return 0.5 * omega * omega * p[0] * p[0];
  }
};

struct PlaneWave {
  double wavenumber;
  double length;
  double energy;
  template <class S>
  S operator()(const Point<S>& p, const S& t) const {
    using std::exp;
    return exp(Cx(0.0, wavenumber) * p[0]) * (1.0 / std::sqrt(length)) * phase_factor(energy, t);
  }
};

struct Packet {
  double x0, sigma, k;
  template <class S>
  S operator()(const Point<S>& p, const S&) const {
    using std::exp;
    const S d = p[0] - x0;
    return std::pow(kPi * sigma * sigma, -0.25) * exp(-d * d / (2.0 * sigma * sigma) + Cx(0.0, k) * p[0]);
  }
};

struct BoxPair {
  BoxMode a, b;
  template <class S>
  S operator()(const Point<S>& p, const S& t) const {
    return a(p, t) * b(p, t);
  }
};

struct Superposition {
  std::vector<Cx> coeffs;
  std::vector<AnalyticState> states;
  template <class S>
  S operator()(const Point<S>& p, const S& t) const {
    S sum(0.0);
    for (std::size_t i = 0; i < states.size(); ++i) sum += coeffs[i] * states[i].eval(p, t);
    return sum;
  }
};

struct Perturbed {
  AnalyticState base;
  double delta;
  Config center;
  double width;
  template <class S>
  S operator()(const Point<S>& p, const S& t) const {
    using std::exp;
    using std::sqrt;
    S d2(0.0);
    for (int k = 0; k < base.config_dim(); ++k) {
      const S d = p[k] - center[k];
      d2 += d * d;
    }
    return base.eval(p, t) * sqrt(1.0 + delta * exp(-d2 / (width * width)));
  }
};

// Positive quadratic amplitude times a gaussian, with an optional quadratic
// phase. Frozen in time.
struct RandomSmooth {
  int dim;
  double c0;
  std::array<double, 3> lin{}, centre{}, alpha{}, phase_lin{};
  std::array<double, 6> phase_quad{};
  bool with_phase;
  template <class S>
  S operator()(const Point<S>& p, const S&) const {
    using std::exp;
    S l(0.3), g(0.0), ph(0.0);
    int q = 0;
    for (int k = 0; k < dim; ++k) {
      l += lin[k] * p[k];
      const S d = p[k] - centre[k];
      g += alpha[k] * d * d;
      ph += phase_lin[k] * p[k];
      for (int m = k; m < dim; ++m) ph += phase_quad[q++] * p[k] * p[m];
    }
    S out = (c0 + l * l) * exp(-g);
    if (with_phase) out = out * exp(Cx(0.0, 1.0) * ph);
    return out;
  }
};

}  // namespace

// ---- evaluators ------------------------------------------------------------

Cx AnalyticState::psi(const Config& x, double t) const {
  Point<Cx> p{Cx(0.0), Cx(0.0), Cx(0.0)};
  for (int k = 0; k < config_dim(); ++k) p[k] = x[k];
  return eval(p, Cx(t));
}

std::vector<Cx> AnalyticState::grad_psi(const Config& x, double t) const {
  const auto j = psi_jet<1>(x, t);
  std::vector<Cx> g(config_dim());
  for (int k = 0; k < config_dim(); ++k) g[k] = j.d(k);
  return g;
}

std::vector<Cx> AnalyticState::lap_psi(const Config& x, double t) const {
  const auto j = psi_jet<3>(x, t);
  std::vector<Cx> out(n_bodies_, Cx(0.0));
  for (int b = 0; b < n_bodies_; ++b)
    for (int c = 0; c < dim_per_body_; ++c) out[b] += j.d2(b * dim_per_body_ + c, b * dim_per_body_ + c);
  return out;
}

Cx AnalyticState::dpsi_dt(const Config& x, double t) const { return psi_jet<1>(x, t).d(kTimeVar); }

double AnalyticState::potential(const Config& x) const {
  Point<Cx> p{Cx(0.0), Cx(0.0), Cx(0.0)};
  for (int k = 0; k < config_dim(); ++k) p[k] = x[k];
  return eval_potential(p).real();
}

// ---- catalog -------------------------------------------------------------

AnalyticState hydrogen_ns(int n) {
  if (n < 1 || n > 3) throw std::invalid_argument("hydrogen_ns: n must be 1, 2 or 3 (got " + std::to_string(n) + ")");
  const double e = -1.0 / (2.0 * n * n);
  return AnalyticState::make("hydrogen_" + std::to_string(n) + "s", 1, 3, HydrogenS{n, e}, Coulomb{}, "coulomb",
                             whole_space(3), e);
}

AnalyticState hydrogen_2p_plus() {
  return AnalyticState::make("hydrogen_2p", 1, 3, Hydrogen2p{-0.125}, Coulomb{}, "coulomb", whole_space(3), -0.125);
}

AnalyticState box_1d(int k, double length) {
  if (k < 1) throw std::invalid_argument("box_1d: mode index k must be >= 1");
  if (!(length > 0.0)) throw std::invalid_argument("box_1d: length L must be > 0");
  const double e = k * k * kPi * kPi / (2.0 * length * length);
  return AnalyticState::make("box:k=" + std::to_string(k) + ",L=" + num(length), 1, 1, BoxMode{k, length, e, 0},
                             Free{}, "box", {"box:L=" + num(length), {{0.0, length}}, false}, e);
}

AnalyticState harmonic_1d(int n, double omega) {
  if (n < 0 || n > 2) throw std::invalid_argument("harmonic_1d: n must be 0, 1 or 2");
  if (!(omega > 0.0)) throw std::invalid_argument("harmonic_1d: omega must be > 0");
  const double e = omega * (n + 0.5);
  return AnalyticState::make("harmonic:n=" + std::to_string(n) + ",omega=" + num(omega), 1, 1,
                             Harmonic{n, omega, e}, HarmonicWell{omega}, "harmonic:omega=" + num(omega),
                             whole_space(1), e);
}

AnalyticState ring_1d(int k, double length) {
  if (!(length > 0.0)) throw std::invalid_argument("ring_1d: length L must be > 0");
  const double kw = 2.0 * kPi * k / length;
  const double e = 0.5 * kw * kw;
  return AnalyticState::make("ring:k=" + std::to_string(k) + ",L=" + num(length), 1, 1, PlaneWave{kw, length, e},
                             Free{}, "free", {"ring:L=" + num(length), {{0.0, length}}, true}, e);
}

AnalyticState gaussian_packet(double x0, double sigma, double k) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_packet: sigma must be > 0");
  return AnalyticState::make("packet:x0=" + num(x0) + ",sigma=" + num(sigma) + ",k=" + num(k), 1, 1,
                             Packet{x0, sigma, k}, Free{}, "free", whole_space(1), std::nullopt, false);
}

AnalyticState box_2body(int k1, int k2, double length) {
  if (k1 < 1 || k2 < 1) throw std::invalid_argument("box_2body: mode indices must be >= 1");
  if (!(length > 0.0)) throw std::invalid_argument("box_2body: length L must be > 0");
  const double s = kPi * kPi / (2.0 * length * length);
  const BoxMode a{k1, length, k1 * k1 * s, 0};
  const BoxMode b{k2, length, k2 * k2 * s, 1};
  return AnalyticState::make(
      "box2:k1=" + std::to_string(k1) + ",k2=" + std::to_string(k2) + ",L=" + num(length), 2, 1, BoxPair{a, b},
      Free{}, "box", {"box2:L=" + num(length), {{0.0, length}, {0.0, length}}, false}, a.energy + b.energy);
}

AnalyticState superpose(const std::vector<AnalyticState>& states, const std::vector<Cx>& coeffs) {
  if (states.empty()) throw std::invalid_argument("superpose: no components");
  if (states.size() != coeffs.size()) throw std::invalid_argument("superpose: states and coefficients differ in count");
  const AnalyticState& first = states.front();
  double weight = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto& s = states[i];
    if (s.domain().id != first.domain().id || s.n_bodies() != first.n_bodies() ||
        s.dim_per_body() != first.dim_per_body())
      throw std::invalid_argument("superpose: mismatched domains (" + s.label() + " vs " + first.label() + ")");
    if (s.potential_id() != first.potential_id())
      throw std::invalid_argument("superpose: mismatched potentials (" + s.label() + " vs " + first.label() + ")");
    if (!s.energy()) throw std::invalid_argument("superpose: component " + s.label() + " is not an eigenstate");
    weight += std::norm(coeffs[i]);
  }
  if (std::abs(weight - 1.0) > 1e-8)
    throw std::invalid_argument("superpose: coefficients not normalized (sum |C|^2 = " + num(weight) + ")");

  std::string label = "superpose:";
  std::optional<double> energy = first.energy();
  bool exact = true;
  AnalyticState out;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (i) label += "|";
    label += num(coeffs[i]) + "@" + states[i].label();
    if (energy && std::abs(*states[i].energy() - *energy) > 1e-14 * std::max(1.0, std::abs(*energy)))
      energy.reset();
    exact = exact && states[i].exact_solution();
    out.components_.push_back({coeffs[i], std::make_shared<const AnalyticState>(states[i])});
  }
  out.label_ = label;
  out.n_bodies_ = first.n_bodies();
  out.dim_per_body_ = first.dim_per_body();
  out.energy_ = energy;
  out.exact_ = exact;
  out.domain_ = first.domain();
  out.potential_id_ = first.potential_id();
  out.psi_ = AnalyticState::erase(Superposition{coeffs, states});
  out.potential_ = first.potential_;
  return out;
}

AnalyticState perturb_density(const AnalyticState& base, double delta, const Config& center, double width) {
  if (!(width > 0.0)) throw std::invalid_argument("perturb_density: width must be > 0");
  if (delta <= -1.0) throw std::invalid_argument("perturb_density: delta must exceed -1");
  AnalyticState out = base;
  out.label_ = "perturb:delta=" + num(delta) + ",width=" + num(width) + ",cx=" + num(center[0]) +
               ",cy=" + num(center[1]) + ",cz=" + num(center[2]) + "@" + base.label();
  out.exact_ = false;
  out.components_.clear();
  out.psi_ = AnalyticState::erase(Perturbed{base, delta, center, width});
  return out;
}

AnalyticState random_smooth_state(unsigned seed, int dim, bool with_phase) {
  if (dim < 1 || dim > 3) throw std::invalid_argument("random_smooth_state: dim must be 1..3");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  RandomSmooth k;
  k.dim = dim;
  k.with_phase = with_phase;
  k.c0 = 0.2 + 0.5 * (u(rng) + 1.0);
  for (int i = 0; i < dim; ++i) {
    k.lin[i] = u(rng);
    k.centre[i] = 0.5 * u(rng);
    k.alpha[i] = 0.4 + 0.3 * (u(rng) + 1.0);
    k.phase_lin[i] = 2.0 * u(rng);
  }
  for (auto& q : k.phase_quad) q = u(rng);
  std::vector<std::pair<double, double>> extent(dim, {-3.0, 3.0});
  return AnalyticState::make("random:seed=" + std::to_string(seed) + ",dim=" + std::to_string(dim) +
                                 ",phase=" + (with_phase ? "1" : "0"),
                             1, dim, k, Free{}, "free", {"R" + std::to_string(dim), extent, false}, std::nullopt,
                             false);
}

// ---- label parsing -----------------------------------------------------------

namespace {

// Complex-valued arithmetic on literals: numbers, pi, i, sqrt(), + - * / and
// parentheses. "2pi" and "0.5i" multiply implicitly.
class ValueParser {
 public:
  explicit ValueParser(std::string text) : s_(std::move(text)) {}

  Cx parse() {
    Cx v = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + s_.substr(pos_) + "'");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw std::invalid_argument("cannot parse value '" + s_ + "': " + why);
  }
  void skip() {
    while (pos_ < s_.size() && s_[pos_] == ' ') ++pos_;
  }
  bool eat(const std::string& tok) {
    skip();
    if (s_.compare(pos_, tok.size(), tok) == 0) {
      pos_ += tok.size();
      return true;
    }
    return false;
  }
  Cx expr() {
    Cx v = term();
    for (;;) {
      if (eat("+")) v += term();
      else if (eat("-")) v -= term();
      else return v;
    }
  }
  Cx term() {
    Cx v = unary();
    for (;;) {
      if (eat("*")) v *= unary();
      else if (eat("/")) v /= unary();
      else return v;
    }
  }
  Cx unary() {
    if (eat("-")) return -unary();
    if (eat("+")) return unary();
    return postfix(primary());
  }
  Cx postfix(Cx v) {
    for (;;) {
      if (eat("pi")) v *= kPi;
      else if (eat("i")) v *= Cx(0.0, 1.0);
      else return v;
    }
  }
  Cx primary() {
    skip();
    if (eat("(")) {
      Cx v = expr();
      if (!eat(")")) fail("missing ')'");
      return v;
    }
    if (eat("sqrt")) {
      if (!eat("(")) fail("expected '(' after sqrt");
      Cx v = expr();
      if (!eat(")")) fail("missing ')'");
      return std::sqrt(v);
    }
    if (eat("pi")) return kPi;
    if (eat("i")) return Cx(0.0, 1.0);
    const char* begin = s_.c_str() + pos_;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) fail("expected a number");
    pos_ += static_cast<std::size_t>(end - begin);
    return v;
  }

  std::string s_;
  std::size_t pos_ = 0;
};


struct Params {
  std::string family;
  std::vector<std::pair<std::string, std::string>> kv;
  std::vector<bool> used;

  std::optional<std::string> take(const std::string& key) {
    for (std::size_t i = 0; i < kv.size(); ++i)
      if (kv[i].first == key) {
        used[i] = true;
        return kv[i].second;
      }
    return std::nullopt;
  }
  std::string need(const std::string& key) {
    auto v = take(key);
    if (!v) throw std::invalid_argument("state '" + family + "' requires parameter '" + key + "'");
    return *v;
  }
  void finish() const {
    for (std::size_t i = 0; i < kv.size(); ++i)
      if (!used[i]) throw std::invalid_argument("state '" + family + "': unknown parameter '" + kv[i].first + "'");
  }
};

Params split_params(const std::string& label) {
  Params p;
  const auto colon = label.find(':');
  p.family = label.substr(0, colon);
  if (colon == std::string::npos) return p;
  std::string rest = label.substr(colon + 1);
  std::size_t start = 0;
  while (start <= rest.size()) {
    auto comma = rest.find(',', start);
    if (comma == std::string::npos) comma = rest.size();
    const std::string item = rest.substr(start, comma - start);
    if (!item.empty()) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("state parameter '" + item + "' lacks '='");
      p.kv.emplace_back(item.substr(0, eq), item.substr(eq + 1));
    }
    start = comma + 1;
  }
  p.used.assign(p.kv.size(), false);
  return p;
}

}  // namespace

Cx parse_value(const std::string& text) { return ValueParser(text).parse(); }

double parse_real(const std::string& text) {
  const Cx v = parse_value(text);
  if (v.imag() != 0.0) throw std::invalid_argument("value '" + text + "' must be real");
  return v.real();
}

int parse_int(const std::string& text) {
  const double v = parse_real(text);
  if (v != std::round(v)) throw std::invalid_argument("value '" + text + "' must be an integer");
  return static_cast<int>(v);
}

AnalyticState parse_state(const std::string& label) {
  if (label.rfind("superpose:", 0) == 0) {
    std::vector<AnalyticState> states;
    std::vector<Cx> coeffs;
    const std::string body = label.substr(10);
    std::size_t start = 0;
    while (start <= body.size()) {
      auto bar = body.find('|', start);
      if (bar == std::string::npos) bar = body.size();
      const std::string item = body.substr(start, bar - start);
      const auto at = item.find('@');
      if (at == std::string::npos) throw std::invalid_argument("superpose component '" + item + "' lacks '@'");
      coeffs.push_back(parse_value(item.substr(0, at)));
      states.push_back(parse_state(item.substr(at + 1)));
      start = bar + 1;
    }
    return superpose(states, coeffs);
  }
  if (label.rfind("perturb:", 0) == 0) {
    const auto at = label.find('@');
    if (at == std::string::npos) throw std::invalid_argument("perturb label lacks '@<state>'");
    Params p = split_params(label.substr(0, at));
    const AnalyticState base = parse_state(label.substr(at + 1));
    const double delta = parse_real(p.need("delta"));
    const double width = parse_real(p.take("width").value_or("1"));
    Config c{parse_real(p.take("cx").value_or("0")), parse_real(p.take("cy").value_or("0")),
             parse_real(p.take("cz").value_or("0"))};
    p.finish();
    return perturb_density(base, delta, c, width);
  }

  Params p = split_params(label);
  const std::string& f = p.family;
  AnalyticState out = [&]() -> AnalyticState {
    if (f == "hydrogen_1s") return hydrogen_ns(1);
    if (f == "hydrogen_2s") return hydrogen_ns(2);
    if (f == "hydrogen_3s") return hydrogen_ns(3);
    if (f == "hydrogen_2p") return hydrogen_2p_plus();
    if (f == "box") return box_1d(parse_int(p.need("k")), parse_real(p.take("L").value_or("pi")));
    if (f == "box2")
      return box_2body(parse_int(p.need("k1")), parse_int(p.need("k2")), parse_real(p.take("L").value_or("pi")));
    if (f == "harmonic") return harmonic_1d(parse_int(p.take("n").value_or("0")), parse_real(p.take("omega").value_or("1")));
    if (f == "ring") return ring_1d(parse_int(p.need("k")), parse_real(p.take("L").value_or("2pi")));
    if (f == "packet")
      return gaussian_packet(parse_real(p.take("x0").value_or("0")), parse_real(p.take("sigma").value_or("1")),
                             parse_real(p.take("k").value_or("0")));
    if (f == "random")
      return random_smooth_state(static_cast<unsigned>(parse_int(p.take("seed").value_or("0"))),
                                 parse_int(p.take("dim").value_or("1")), parse_int(p.take("phase").value_or("1")) != 0);
    throw std::invalid_argument("unknown state family '" + f + "'");
  }();
  p.finish();
  return out;
}

// ---- sampling and polar form -----------------------------------------------

namespace {

void require_compatible(const AnalyticState& state, const Grid& grid) {
  if (grid.kind() == CoordinateKind::radial_log) {
    if (state.n_bodies() != 1 || state.dim_per_body() != 3)
      throw std::invalid_argument("radial grids need a one-body 3D state (" + state.label() + ")");
    return;
  }
  if (grid.n_bodies() != state.n_bodies() || grid.dim_per_body() != state.dim_per_body())
    throw std::invalid_argument("grid configuration space does not match state " + state.label());
}

}  // namespace

namespace {

// Points where the potential or the first derivatives of Psi blow up (a Coulomb nucleus on a node).
bool singular_at(const AnalyticState& state, const Config& x, double t) {
  if (!std::isfinite(state.potential(x))) return true;
  const CJet<1> j = state.psi_jet<1>(x, t);
  for (int k = 0; k < CJet<1>::kSize; ++k)
    if (!std::isfinite(j.coeff(k).real()) || !std::isfinite(j.coeff(k).imag())) return true;
  return false;
}

}  // namespace

ComplexField sample_psi(const AnalyticState& state, const GridPtr& grid, double t) {
  require_compatible(state, *grid);
  ComplexField out(grid, "a0^-" + std::to_string(state.config_dim()) + "/2");
  for (std::size_t i = 0; i < grid->size(); ++i) {
    const Config x = grid->point(i);
    out[i] = state.psi(x, t);
    if (!singular_at(state, x, t)) continue;
    if (out.mask.empty()) out.mask.assign(grid->size(), 0);
    out.mask[i] = 1;
  }
  return out;
}

PolarPair polar_decompose(const ComplexField& samples, double node_threshold) {
  const GridPtr& grid = samples.grid;
  const std::size_t n = samples.size();
  PolarPair out;
  out.rho = ScalarField(grid, "density");
  out.R = ScalarField(grid, "amplitude");
  out.S = ScalarField(grid, "hbar");
  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out.rho[i] = std::norm(samples[i]);
    out.R[i] = std::abs(samples[i]);
    peak = std::max(peak, out.rho[i]);
  }
  if (!(peak > 0.0)) throw std::invalid_argument("polar_decompose: all samples are zero");

  out.mask.assign(n, 0);
  bool any_masked = false;
  for (std::size_t i = 0; i < n; ++i)
    if (out.rho[i] < node_threshold * peak || samples.masked(i)) {
      out.mask[i] = 1;
      any_masked = true;
    }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return out.rho[a] > out.rho[b]; });

  std::vector<std::uint8_t> seen(n, 0);
  std::deque<std::size_t> queue;
  const int rank = grid->rank();
  for (std::size_t seed : order) {
    if (seen[seed] || out.mask[seed]) continue;
    ++out.regions;
    seen[seed] = 1;
    out.S[seed] = kHbar * std::arg(samples[seed]);
    queue.push_back(seed);
    while (!queue.empty()) {
      const std::size_t i = queue.front();
      queue.pop_front();
      const auto ijk = grid->unravel(i);
      for (int a = 0; a < rank; ++a) {
        const Axis& ax = grid->axis(a);
        for (int step : {-1, 1}) {
          auto nb = ijk;
          nb[a] += step;
          if (nb[a] < 0 || nb[a] >= ax.n) {
            if (ax.topology != Topology::periodic) continue;
            nb[a] = (nb[a] + ax.n) % ax.n;
          }
          const std::size_t j = grid->ravel(nb);
          if (seen[j] || out.mask[j]) continue;
          seen[j] = 1;
          const double here = out.S[i] / kHbar;
          out.S[j] = kHbar * (here + std::remainder(std::arg(samples[j]) - here, 2.0 * kPi));
          queue.push_back(j);
        }
      }
    }
  }
  if (!any_masked) out.mask.clear();
  out.rho.mask = out.mask;
  out.R.mask = out.mask;
  out.S.mask = out.mask;
  return out;
}

ComplexField reconstruct(const PolarPair& polar) {
  ComplexField out(polar.R.grid, "");
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = (!polar.mask.empty() && polar.mask[i]) ? Cx(0.0) : polar.R[i] * std::exp(Cx(0.0, polar.S[i] / kHbar));
  out.mask = polar.mask;
  return out;
}

}  // namespace qfl
