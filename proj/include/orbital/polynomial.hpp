#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <map>
#include <span>
#include <type_traits>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "errors.hpp"

namespace orbital {

using Rational = boost::multiprecision::cpp_rational;

namespace detail {

template <class T>
struct is_complex : std::false_type {};
template <class T>
struct is_complex<std::complex<T>> : std::true_type {};

/// Converts a coefficient into the evaluation ring.
template <class To, class From>
To coefficient_cast(const From& c) {
  if constexpr (std::is_same_v<To, From>) {
    return c;
  } else if constexpr (std::is_same_v<From, Rational>) {
    if constexpr (is_complex<To>::value) {
      return To(static_cast<typename To::value_type>(c), 0);
    } else {
      return static_cast<To>(c);
    }
  } else {
    return To(c);
  }
}

template <class T>
bool is_zero(const T& c) {
  return c == T(0);
}

}  // namespace detail

/// Multivariate polynomial stored as a sparse map from exponent vector to
/// coefficient. Zero coefficients are never stored.
template <class Coeff>
class SparsePolynomial {
 public:
  using Exponent = std::vector<int>;
  using TermMap = std::map<Exponent, Coeff>;

  SparsePolynomial() = default;
  explicit SparsePolynomial(std::size_t variables) : variables_(variables) {}

  static SparsePolynomial constant(std::size_t variables, const Coeff& c) {
    SparsePolynomial p(variables);
    p.add_term(Exponent(variables, 0), c);
    return p;
  }

  static SparsePolynomial variable(std::size_t variables, std::size_t index) {
    if (index >= variables) throw ArgumentError("variable index out of range");
    Exponent e(variables, 0);
    e[index] = 1;
    SparsePolynomial p(variables);
    p.add_term(std::move(e), Coeff(1));
    return p;
  }

  /// sum_i coeffs[i] * x_i
  static SparsePolynomial linear_form(std::span<const Coeff> coeffs) {
    SparsePolynomial p(coeffs.size());
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
      Exponent e(coeffs.size(), 0);
      e[i] = 1;
      p.add_term(std::move(e), coeffs[i]);
    }
    return p;
  }

  std::size_t variables() const noexcept { return variables_; }
  const TermMap& terms() const noexcept { return terms_; }
  std::size_t size() const noexcept { return terms_.size(); }
  bool is_zero() const noexcept { return terms_.empty(); }

  void add_term(Exponent e, const Coeff& c) {
    if (e.size() != variables_) throw ArgumentError("exponent length does not match variable count");
    if (detail::is_zero(c)) return;
    auto [it, inserted] = terms_.try_emplace(std::move(e), c);
    if (!inserted) {
      it->second += c;
      if (detail::is_zero(it->second)) terms_.erase(it);
    }
  }

  Coeff coefficient(const Exponent& e) const {
    auto it = terms_.find(e);
    return it == terms_.end() ? Coeff(0) : it->second;
  }

  /// Total degree; -1 for the zero polynomial.
  int degree() const {
    int d = -1;
    for (const auto& [e, c] : terms_) d = std::max(d, total_degree(e));
    return d;
  }

  bool is_homogeneous() const {
    if (terms_.empty()) return true;
    const int d = total_degree(terms_.begin()->first);
    return std::all_of(terms_.begin(), terms_.end(),
                       [d](const auto& t) { return total_degree(t.first) == d; });
  }

  SparsePolynomial& operator+=(const SparsePolynomial& o) {
    check_compatible(o);
    for (const auto& [e, c] : o.terms_) add_term(e, c);
    return *this;
  }

  SparsePolynomial& operator-=(const SparsePolynomial& o) {
    check_compatible(o);
    for (const auto& [e, c] : o.terms_) add_term(e, -c);
    return *this;
  }

  SparsePolynomial& operator*=(const Coeff& s) {
    if (detail::is_zero(s)) {
      terms_.clear();
      return *this;
    }
    for (auto& [e, c] : terms_) c *= s;
    return *this;
  }

  friend SparsePolynomial operator+(SparsePolynomial a, const SparsePolynomial& b) { return a += b; }
  friend SparsePolynomial operator-(SparsePolynomial a, const SparsePolynomial& b) { return a -= b; }
  friend SparsePolynomial operator*(SparsePolynomial a, const Coeff& s) { return a *= s; }

  friend SparsePolynomial operator*(const SparsePolynomial& a, const SparsePolynomial& b) {
    a.check_compatible(b);
    SparsePolynomial out(a.variables_);
    Exponent e(a.variables_);
    for (const auto& [ea, ca] : a.terms_) {
      for (const auto& [eb, cb] : b.terms_) {
        for (std::size_t i = 0; i < e.size(); ++i) e[i] = ea[i] + eb[i];
        out.add_term(e, ca * cb);
      }
    }
    return out;
  }

  friend bool operator==(const SparsePolynomial& a, const SparsePolynomial& b) {
    return a.variables_ == b.variables_ && a.terms_ == b.terms_;
  }

  /// Partial derivative in variable `index`.
  SparsePolynomial derivative(std::size_t index) const {
    if (index >= variables_) throw ArgumentError("variable index out of range");
    SparsePolynomial out(variables_);
    for (const auto& [e, c] : terms_) {
      if (e[index] == 0) continue;
      Exponent d = e;
      d[index] -= 1;
      out.add_term(std::move(d), c * Coeff(e[index]));
    }
    return out;
  }

  /// Evaluates sum_beta c_beta x^beta in the ring T.
  template <class T>
  T evaluate(std::span<const T> x) const {
    if (x.size() != variables_) throw ArgumentError("evaluation point has wrong dimension");
    if (terms_.empty()) return T(0);
    const int max_power = max_exponent();
    // powers[i * (max_power + 1) + k] = x_i^k
    std::vector<T> powers(variables_ * static_cast<std::size_t>(max_power + 1), T(1));
    for (std::size_t i = 0; i < variables_; ++i) {
      for (int k = 1; k <= max_power; ++k) {
        powers[i * (max_power + 1) + k] = powers[i * (max_power + 1) + k - 1] * x[i];
      }
    }
    T sum(0);
    for (const auto& [e, c] : terms_) {
      T term = detail::coefficient_cast<T>(c);
      for (std::size_t i = 0; i < variables_; ++i) {
        if (e[i] != 0) term *= powers[i * (max_power + 1) + e[i]];
      }
      sum += term;
    }
    return sum;
  }

  /// Substitutes x = M^T y, i.e. x_j = sum_k M(k, j) y_k, where M is given as
  /// `rows` new variables by `variables()` old ones (row-major).
  template <class Out>
  SparsePolynomial<Out> substitute_linear(std::span<const Out> m, std::size_t rows) const {
    if (m.size() != rows * variables_) throw ArgumentError("substitution matrix has wrong shape");
    std::vector<SparsePolynomial<Out>> images;
    images.reserve(variables_);
    for (std::size_t j = 0; j < variables_; ++j) {
      std::vector<Out> column(rows);
      for (std::size_t k = 0; k < rows; ++k) column[k] = m[k * variables_ + j];
      images.push_back(SparsePolynomial<Out>::linear_form(column));
    }
    SparsePolynomial<Out> out(rows);
    for (const auto& [e, c] : terms_) {
      auto term = SparsePolynomial<Out>::constant(rows, detail::coefficient_cast<Out>(c));
      for (std::size_t j = 0; j < variables_; ++j) {
        for (int k = 0; k < e[j]; ++k) term = term * images[j];
      }
      out += term;
    }
    return out;
  }

 private:
  static int total_degree(const Exponent& e) {
    int d = 0;
    for (int k : e) d += k;
    return d;
  }

  int max_exponent() const {
    int m = 0;
    for (const auto& [e, c] : terms_) m = std::max(m, *std::max_element(e.begin(), e.end()));
    return m;
  }

  void check_compatible(const SparsePolynomial& o) const {
    if (o.variables_ != variables_) throw ArgumentError("polynomials live in different coordinate systems");
  }

  std::size_t variables_ = 0;
  TermMap terms_;
};

/// beta! = prod_i beta_i!
template <class Coeff>
Coeff multi_factorial(const std::vector<int>& beta) {
  Coeff f(1);
  for (int b : beta) {
    for (int k = 2; k <= b; ++k) f *= Coeff(k);
  }
  return f;
}

/// The differential-operator pairing p(d) q |_{x = 0}, computed in closed form
/// as sum_beta c_beta(p) c_beta(q) beta! / scale^{|beta|}. The coordinates are
/// assumed orthonormal for `scale` times the standard form. Complex
/// coefficients are paired bilinearly (no conjugation), as for the operator.
template <class Coeff>
Coeff bracket(const SparsePolynomial<Coeff>& p, const SparsePolynomial<Coeff>& q,
              const Coeff& scale = Coeff(1)) {
  if (p.variables() != q.variables()) throw ArgumentError("bracket of polynomials in different coordinates");
  Coeff sum(0);
  const auto& small = p.size() <= q.size() ? p.terms() : q.terms();
  const auto& large = p.size() <= q.size() ? q.terms() : p.terms();
  for (const auto& [e, c] : small) {
    auto it = large.find(e);
    if (it == large.end()) continue;
    Coeff term = c * it->second * multi_factorial<Coeff>(e);
    int degree = 0;
    for (int k : e) degree += k;
    for (int k = 0; k < degree; ++k) term /= scale;
    sum += term;
  }
  return sum;
}

/// Reference implementation of the pairing by literally applying p(d) to q
/// and reading off the constant term. Quadratic in the number of terms.
template <class Coeff>
Coeff bracket_by_differentiation(const SparsePolynomial<Coeff>& p, const SparsePolynomial<Coeff>& q) {
  if (p.variables() != q.variables()) throw ArgumentError("bracket of polynomials in different coordinates");
  Coeff sum(0);
  const std::vector<int> zero(p.variables(), 0);
  for (const auto& [e, c] : p.terms()) {
    SparsePolynomial<Coeff> d = q;
    for (std::size_t i = 0; i < e.size(); ++i) {
      for (int k = 0; k < e[i]; ++k) d = d.derivative(i);
    }
    sum += c * d.coefficient(zero);
  }
  return sum;
}

}  // namespace orbital
