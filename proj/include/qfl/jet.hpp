#pragma once

// Truncated multivariate Taylor arithmetic ("jets") in the four variables
// (x0, x1, x2, t). A Jet<T, Order> holds every Taylor coefficient of total
// degree <= Order, so composing closed-form expressions on jets yields exact
// mixed partial derivatives up to that order.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <type_traits>
#include <vector>

namespace qfl {

using Cx = std::complex<double>;

inline constexpr int kJetVars = 4;
inline constexpr int kTimeVar = 3;

using MultiIndex = std::array<int, kJetVars>;

namespace detail {

constexpr int binomial(int n, int k) {
  int r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

template <int Order>
struct MonomialTable {
  static constexpr int kSize = binomial(kJetVars + Order, kJetVars);
  static constexpr int kBase = Order + 1;
  static constexpr int kCodes = kBase * kBase * kBase * kBase;

  struct Product {
    std::uint8_t lhs, rhs, out;
  };

  std::array<MultiIndex, kSize> exponents{};
  std::array<int, kSize> degree{};
  std::array<double, kSize> factorial{};  // alpha! = prod alpha_v!
  std::array<int, kCodes> index_by_code{};
  // raised[k][v]: index of exponents[k] + e_v, or -1 if that exceeds Order.
  std::array<std::array<int, kJetVars>, kSize> raised{};
  std::vector<Product> products;

  static int code(const MultiIndex& a) {
    return ((a[0] * kBase + a[1]) * kBase + a[2]) * kBase + a[3];
  }

  MonomialTable() {
    index_by_code.fill(-1);
    int k = 0;
    for (int d = 0; d <= Order; ++d) {
      for (int a0 = d; a0 >= 0; --a0)
        for (int a1 = d - a0; a1 >= 0; --a1)
          for (int a2 = d - a0 - a1; a2 >= 0; --a2) {
            const MultiIndex a{a0, a1, a2, d - a0 - a1 - a2};
            exponents[k] = a;
            degree[k] = d;
            double f = 1.0;
            for (int v = 0; v < kJetVars; ++v)
              for (int j = 2; j <= a[v]; ++j) f *= j;
            factorial[k] = f;
            index_by_code[code(a)] = k;
            ++k;
          }
    }
    for (int i = 0; i < kSize; ++i)
      for (int v = 0; v < kJetVars; ++v) {
        MultiIndex a = exponents[i];
        ++a[v];
        raised[i][v] = degree[i] < Order ? index_by_code[code(a)] : -1;
      }
    for (int i = 0; i < kSize; ++i)
      for (int j = 0; j < kSize; ++j) {
        if (degree[i] + degree[j] > Order) continue;
        MultiIndex a = exponents[i];
        for (int v = 0; v < kJetVars; ++v) a[v] += exponents[j][v];
        products.push_back({static_cast<std::uint8_t>(i), static_cast<std::uint8_t>(j),
                            static_cast<std::uint8_t>(index_by_code[code(a)])});
      }
  }

  int index(const MultiIndex& a) const {
    int d = 0;
    for (int v : a) {
      if (v < 0) return -1;
      d += v;
    }
    return d > Order ? -1 : index_by_code[code(a)];
  }
};

template <int Order>
const MonomialTable<Order>& monomials() {
  static const MonomialTable<Order> table;
  return table;
}

inline Cx fast_mul(const Cx& a, const Cx& b) {
  return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}
inline double fast_mul(double a, double b) { return a * b; }

}  // namespace detail

template <class T, int Order>
class Jet {
  static_assert(Order >= 1 && Order <= 4);

 public:
  using value_type = T;
  static constexpr int kOrder = Order;
  static constexpr int kSize = detail::MonomialTable<Order>::kSize;

  Jet() { c_.fill(T{}); }
  Jet(T constant) {  // NOLINT: implicit promotion of constants is intended
    c_.fill(T{});
    c_[0] = constant;
  }
  template <class U>
    requires(std::is_arithmetic_v<U> && !std::is_same_v<U, T>)
  Jet(U constant) : Jet(T(static_cast<double>(constant))) {}  // NOLINT

  /// The independent variable `var` evaluated at `value`.
  static Jet variable(T value, int var) {
    Jet j(value);
    const MultiIndex e = unit(var);
    j.c_[detail::monomials<Order>().index(e)] = T(1.0);
    return j;
  }

  const T& value() const { return c_[0]; }
  const T& coeff(int k) const { return c_[k]; }
  T& coeff(int k) { return c_[k]; }

  /// Highest derivative order whose coefficients are exact. Differentiating a
  /// jet lowers it by one.
  int valid_order() const { return valid_; }

  /// Mixed partial derivative d^|a| / dx^a at the expansion point.
  T partial(const MultiIndex& a) const {
    const auto& tab = detail::monomials<Order>();
    const int k = tab.index(a);
    if (k < 0 || tab.degree[k] > valid_)
      throw std::logic_error("jet: requested derivative exceeds tracked order");
    return c_[k] * tab.factorial[k];
  }
  T d(int var) const { return partial(unit(var)); }
  T d2(int v1, int v2) const {
    MultiIndex a{};
    ++a[v1];
    ++a[v2];
    return partial(a);
  }

  /// The jet of d/dx_var of this function (one order less accurate).
  Jet derivative(int var) const {
    const auto& tab = detail::monomials<Order>();
    Jet out;
    for (int k = 0; k < kSize; ++k) {
      const int src = tab.raised[k][var];
      if (src >= 0) out.c_[k] = c_[src] * static_cast<double>(tab.exponents[k][var] + 1);
    }
    out.valid_ = valid_ - 1;
    return out;
  }

  Jet& operator+=(const Jet& o) {
    for (int k = 0; k < kSize; ++k) c_[k] += o.c_[k];
    valid_ = std::min(valid_, o.valid_);
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    for (int k = 0; k < kSize; ++k) c_[k] -= o.c_[k];
    valid_ = std::min(valid_, o.valid_);
    return *this;
  }
  Jet& operator*=(const T& s) {
    for (auto& x : c_) x *= s;
    return *this;
  }
  Jet operator-() const {
    Jet out = *this;
    for (auto& x : out.c_) x = -x;
    return out;
  }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet out;
    for (const auto& p : detail::monomials<Order>().products)
      out.c_[p.out] += detail::fast_mul(a.c_[p.lhs], b.c_[p.rhs]);
    out.valid_ = std::min(a.valid_, b.valid_);
    return out;
  }
  friend Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }

  friend Jet operator*(Jet a, const T& s) { return a *= s; }
  friend Jet operator*(const T& s, Jet a) { return a *= s; }
  friend Jet operator+(Jet a, const T& s) {
    a.c_[0] += s;
    return a;
  }
  friend Jet operator+(const T& s, Jet a) { return a + s; }
  friend Jet operator-(Jet a, const T& s) {
    a.c_[0] -= s;
    return a;
  }
  friend Jet operator-(const T& s, const Jet& a) { return (-a) + s; }
  friend Jet operator/(Jet a, const T& s) { return a *= T(1.0) / s; }
  friend Jet operator/(const T& s, const Jet& a) { return reciprocal(a) * s; }

  template <class U>
    requires(std::is_arithmetic_v<U> && !std::is_same_v<U, T>)
  friend Jet operator*(Jet a, U s) {
    return a *= T(static_cast<double>(s));
  }
  template <class U>
    requires(std::is_arithmetic_v<U> && !std::is_same_v<U, T>)
  friend Jet operator*(U s, Jet a) {
    return a *= T(static_cast<double>(s));
  }
  template <class U>
    requires(std::is_arithmetic_v<U> && !std::is_same_v<U, T>)
  friend Jet operator+(Jet a, U s) {
    return a + T(static_cast<double>(s));
  }
  template <class U>
    requires(std::is_arithmetic_v<U> && !std::is_same_v<U, T>)
  friend Jet operator+(U s, Jet a) {
    return a + T(static_cast<double>(s));
  }
  template <class U>
    requires(std::is_arithmetic_v<U> && !std::is_same_v<U, T>)
  friend Jet operator-(Jet a, U s) {
    return a - T(static_cast<double>(s));
  }
  template <class U>
    requires(std::is_arithmetic_v<U> && !std::is_same_v<U, T>)
  friend Jet operator-(U s, const Jet& a) {
    return T(static_cast<double>(s)) - a;
  }
  template <class U>
    requires(std::is_arithmetic_v<U> && !std::is_same_v<U, T>)
  friend Jet operator/(Jet a, U s) {
    return a / T(static_cast<double>(s));
  }
  template <class U>
    requires(std::is_arithmetic_v<U> && !std::is_same_v<U, T>)
  friend Jet operator/(U s, const Jet& a) {
    return T(static_cast<double>(s)) / a;
  }

  /// f(a) given f and its first Order derivatives at a.value().
  friend Jet compose(const Jet& a, const std::array<T, Order + 1>& f) {
    Jet h = a;
    h.c_[0] = T{};
    Jet out(f[0]);
    out.valid_ = a.valid_;
    Jet power = h;
    double fact = 1.0;
    for (int k = 1; k <= Order; ++k) {
      fact *= k;
      out += power * (f[k] / fact);
      if (k < Order) power = power * h;
    }
    return out;
  }

  friend Jet reciprocal(const Jet& a) {
    const T x = a.value();
    std::array<T, Order + 1> f;
    T p = T(1.0) / x;
    double sign = 1.0;
    double fact = 1.0;
    for (int k = 0; k <= Order; ++k) {
      if (k > 0) fact *= k;
      f[k] = sign * fact * p;
      p /= x;
      sign = -sign;
    }
    return compose(a, f);
  }
  friend Jet exp(const Jet& a) {
    std::array<T, Order + 1> f;
    f.fill(std::exp(a.value()));
    return compose(a, f);
  }
  friend Jet sin(const Jet& a) {
    const T s = std::sin(a.value()), c = std::cos(a.value());
    const std::array<T, 5> cyc{s, c, -s, -c, s};
    std::array<T, Order + 1> f;
    for (int k = 0; k <= Order; ++k) f[k] = cyc[k % 4];
    return compose(a, f);
  }
  friend Jet cos(const Jet& a) {
    const T s = std::sin(a.value()), c = std::cos(a.value());
    const std::array<T, 5> cyc{c, -s, -c, s, c};
    std::array<T, Order + 1> f;
    for (int k = 0; k <= Order; ++k) f[k] = cyc[k % 4];
    return compose(a, f);
  }
  friend Jet sqrt(const Jet& a) {
    const T x = a.value();
    std::array<T, Order + 1> f;
    T p = std::sqrt(x);
    double coef = 1.0;  // falling factorial of 1/2
    for (int k = 0; k <= Order; ++k) {
      f[k] = coef * p;
      coef *= (0.5 - k);
      p /= x;
    }
    return compose(a, f);
  }
  friend Jet log(const Jet& a) {
    const T x = a.value();
    std::array<T, Order + 1> f;
    f[0] = std::log(x);
    T p = T(1.0) / x;
    double coef = 1.0;
    for (int k = 1; k <= Order; ++k) {
      f[k] = coef * p;
      coef *= -static_cast<double>(k);
      p /= x;
    }
    return compose(a, f);
  }

  template <class U, int O>
  friend class Jet;

  /// Reinterpret coefficient storage (used by real/imag/conj helpers).
  std::array<T, kSize>& raw() { return c_; }
  const std::array<T, kSize>& raw() const { return c_; }
  void set_valid_order(int v) { valid_ = v; }

 private:
  static MultiIndex unit(int var) {
    MultiIndex e{};
    e[var] = 1;
    return e;
  }

  std::array<T, kSize> c_;
  int valid_ = Order;
};

template <int Order>
using RJet = Jet<double, Order>;
template <int Order>
using CJet = Jet<Cx, Order>;

template <int Order>
RJet<Order> real(const CJet<Order>& z) {
  RJet<Order> out;
  for (int k = 0; k < CJet<Order>::kSize; ++k) out.raw()[k] = z.raw()[k].real();
  out.set_valid_order(z.valid_order());
  return out;
}
template <int Order>
RJet<Order> imag(const CJet<Order>& z) {
  RJet<Order> out;
  for (int k = 0; k < CJet<Order>::kSize; ++k) out.raw()[k] = z.raw()[k].imag();
  out.set_valid_order(z.valid_order());
  return out;
}
template <int Order>
CJet<Order> conj(const CJet<Order>& z) {
  CJet<Order> out = z;
  for (auto& c : out.raw()) c = std::conj(c);
  return out;
}
template <int Order>
CJet<Order> to_complex(const RJet<Order>& x) {
  CJet<Order> out;
  for (int k = 0; k < RJet<Order>::kSize; ++k) out.raw()[k] = Cx(x.raw()[k], 0.0);
  out.set_valid_order(x.valid_order());
  return out;
}
/// |z|^2 as a real jet.
template <int Order>
RJet<Order> norm(const CJet<Order>& z) {
  const RJet<Order> re = real(z), im = imag(z);
  return re * re + im * im;
}

}  // namespace qfl
