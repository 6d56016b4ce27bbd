#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "rootsys.hpp"

namespace orbital {

using Complex = std::complex<double>;

/// A point of the complexified Cartan subalgebra in ambient coordinates.
struct CartanPoint {
  Eigen::VectorXcd coords;

  CartanPoint() = default;
  template <class Derived>
  explicit CartanPoint(const Eigen::MatrixBase<Derived>& c) : coords(c.template cast<Complex>()) {}
  CartanPoint(std::initializer_list<double> c) : coords(static_cast<Eigen::Index>(c.size())) {
    Eigen::Index i = 0;
    for (double x : c) coords[i++] = x;
  }

  Eigen::Index size() const { return coords.size(); }
  double scale() const { return coords.size() == 0 ? 0.0 : coords.cwiseAbs().maxCoeff(); }
};

/// A value represented as mantissa * exp(log_scale), for Weyl sums whose
/// exponents exceed double range.
struct ScaledValue {
  Complex mantissa{0.0, 0.0};
  double log_scale = 0.0;

  Complex value() const {
    if (mantissa == Complex(0.0, 0.0)) return mantissa;
    return mantissa * std::exp(log_scale);
  }
};

namespace detail {

/// Neumaier-compensated complex summation.
class CompensatedSum {
 public:
  void add(Complex x) {
    add_part(re_, re_c_, x.real());
    add_part(im_, im_c_, x.imag());
  }
  Complex value() const { return {re_ + re_c_, im_ + im_c_}; }

 private:
  static void add_part(double& sum, double& comp, double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  }
  double re_ = 0, re_c_ = 0, im_ = 0, im_c_ = 0;
};

}  // namespace detail

/// Checks length and (for A, G2) the sum-zero constraint.
inline void check_point(const RootData& rd, const CartanPoint& h, const char* label = "h") {
  if (h.size() != rd.ambient_dim()) {
    throw ArgumentError(std::string(label) + " has " + std::to_string(h.size()) + " coordinates, expected " +
                        std::to_string(rd.ambient_dim()));
  }
  if (rd.system.sum_zero() && std::abs(h.coords.sum()) > 1e-12 * std::max(1.0, h.scale())) {
    throw ArgumentError(std::string(label) + " does not lie in the sum-zero Cartan subspace");
  }
}

/// Orthogonal projection onto the Cartan subspace (removes the mean for A, G2).
inline CartanPoint project_to_cartan(const RootData& rd, Eigen::VectorXcd v) {
  if (v.size() != rd.ambient_dim()) throw ArgumentError("coordinate vector has the wrong length");
  if (rd.system.sum_zero()) v.array() -= v.mean();
  return CartanPoint(v);
}

/// alpha(h) for every positive root.
inline Eigen::VectorXcd root_values(const RootData& rd, const CartanPoint& h) {
  return rd.roots.cast<Complex>() * h.coords;
}

/// Pi(h) evaluated as the product of root values.
inline Complex discriminant_value(const RootData& rd, const CartanPoint& h) {
  const Eigen::VectorXcd v = root_values(rd, h);
  Complex p(1.0, 0.0);
  for (Eigen::Index i = 0; i < v.size(); ++i) p *= v[i];
  return p;
}

/// Throws DegenerateInputError naming the root closest to vanishing when
/// |Pi(h)| <= tolerance * scale^r.
inline void require_regular(const RootData& rd, const CartanPoint& h, const char* label = "h",
                            double tolerance = 1e-8) {
  const Eigen::VectorXcd v = root_values(rd, h);
  double magnitude = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) magnitude *= std::abs(v[i]);
  const double bound = tolerance * std::pow(h.scale(), rd.root_count());
  if (magnitude > bound && magnitude > 0.0) return;
  Eigen::Index worst = 0;
  v.cwiseAbs().minCoeff(&worst);
  const std::string name = root_name(rd.system.positive_roots[static_cast<std::size_t>(worst)]);
  throw DegenerateInputError(std::string(label) + " is not regular: it lies on (or near) the hyperplane of root " +
                                 name,
                             name);
}

/// w(h) for every Weyl element, in the order of `rd.weyl`.
inline std::vector<Eigen::VectorXcd> weyl_orbit(const RootData& rd, const CartanPoint& h) {
  std::vector<Eigen::VectorXcd> out;
  out.reserve(rd.weyl_order());
  for (const auto& m : rd.weyl_matrices) out.push_back(m.cast<Complex>() * h.coords);
  return out;
}

/// sum_w sign(w) exp(E_w) with the largest real exponent factored out. Terms
/// are accumulated in descending order of |Re E_w| with compensation.
/// `cancellation` receives |sum| / sum |terms|.
inline ScaledValue signed_exponential_sum(const RootData& rd, const std::vector<Complex>& exponents,
                                          double* cancellation = nullptr) {
  if (exponents.empty()) return {};
  double max_re = exponents.front().real();
  for (const auto& e : exponents) max_re = std::max(max_re, e.real());
  std::vector<std::size_t> order(exponents.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(exponents[a].real()) > std::abs(exponents[b].real());
  });
  detail::CompensatedSum sum;
  double total = 0.0;
  for (std::size_t i : order) {
    const Complex term = std::exp(exponents[i] - max_re);
    total += std::abs(term);
    sum.add(static_cast<double>(rd.weyl[i].sign) * term);
  }
  if (cancellation != nullptr) *cancellation = std::abs(sum.value()) / total;
  return {sum.value(), max_re};
}

namespace detail {

using Float50 = boost::multiprecision::cpp_bin_float_50;
using Float100 = boost::multiprecision::cpp_bin_float_100;

// Below this ratio of |sum| to sum |terms| the double result has lost more
// than three digits and is recomputed in extended precision.
inline constexpr double kCancellationLimit = 1e-3;

template <class Real>
Real to_real(const Rational& q) {
  return Real(boost::multiprecision::numerator(q)) / Real(boost::multiprecision::denominator(q));
}

template <class Real>
struct ExtComplex {
  Real re, im;
};

template <class Real>
std::vector<ExtComplex<Real>> to_ext(const Eigen::VectorXcd& v) {
  std::vector<ExtComplex<Real>> out;
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back({Real(v[i].real()), Real(v[i].imag())});
  return out;
}

template <class Real>
std::vector<ExtComplex<Real>> to_ext(const RationalVector& v) {
  std::vector<ExtComplex<Real>> out;
  for (const auto& q : v) out.push_back({to_real<Real>(q), Real(0)});
  return out;
}

/// sum_w sign(w) exp(scale <w x, y>) in extended precision, with the Weyl
/// matrices applied exactly as rationals converted to Real.
template <class Real, class XSource>
ScaledValue extended_alternating_sum(const RootData& rd, const XSource& x_source, const Eigen::VectorXcd& y_d,
                                     const Rational& scale, double* cancellation) {
  const auto x = to_ext<Real>(x_source);
  const auto y = to_ext<Real>(y_d);
  const Real c = to_real<Real>(scale);
  const int n = rd.ambient_dim();
  std::vector<ExtComplex<Real>> exponents;
  exponents.reserve(rd.weyl_order());
  for (const auto& w : rd.weyl) {
    ExtComplex<Real> e{Real(0), Real(0)};
    for (int i = 0; i < n; ++i) {
      ExtComplex<Real> wx{Real(0), Real(0)};
      for (int j = 0; j < n; ++j) {
        const Rational& m = w.matrix(i, j);
        if (m == 0) continue;
        const Real mr = to_real<Real>(m);
        wx.re += mr * x[j].re;
        wx.im += mr * x[j].im;
      }
      e.re += wx.re * y[i].re - wx.im * y[i].im;
      e.im += wx.re * y[i].im + wx.im * y[i].re;
    }
    exponents.push_back({c * e.re, c * e.im});
  }
  Real max_re = exponents.front().re;
  for (const auto& e : exponents) max_re = std::max(max_re, e.re);
  ExtComplex<Real> sum{Real(0), Real(0)};
  Real total(0);
  for (std::size_t k = 0; k < exponents.size(); ++k) {
    const Real mag = exp(exponents[k].re - max_re);
    total += mag;
    const Real sign(rd.weyl[k].sign);
    sum.re += sign * mag * cos(exponents[k].im);
    sum.im += sign * mag * sin(exponents[k].im);
  }
  *cancellation = static_cast<double>(sqrt(sum.re * sum.re + sum.im * sum.im) / total);
  return {Complex(static_cast<double>(sum.re), static_cast<double>(sum.im)), static_cast<double>(max_re)};
}

inline Eigen::VectorXcd to_complex(const Eigen::VectorXcd& v) { return v; }

inline Eigen::VectorXcd to_complex(const RationalVector& v) {
  Eigen::VectorXcd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = static_cast<double>(v[i]);
  return out;
}

/// sum_w sign(w) exp(scale <w x, y>), evaluated in double and redone at 50
/// then 100 digits when the alternating sum cancels.
template <class XSource>
ScaledValue alternating_sum(const RootData& rd, const XSource& x, const Eigen::VectorXcd& y, const Rational& scale) {
  const Eigen::VectorXcd xd = to_complex(x);
  const double cd = static_cast<double>(scale);
  std::vector<Complex> exponents;
  exponents.reserve(rd.weyl_order());
  for (const auto& m : rd.weyl_matrices) exponents.push_back(cd * (m.cast<Complex>() * xd).transpose() * y);
  double ratio = 1.0;
  ScaledValue s = signed_exponential_sum(rd, exponents, &ratio);
  if (ratio >= kCancellationLimit) return s;
  s = extended_alternating_sum<Float50>(rd, x, y, scale, &ratio);
  if (ratio >= 1e-30) return s;
  s = extended_alternating_sum<Float100>(rd, x, y, scale, &ratio);
  if (ratio >= 1e-80) return s;
  throw NumericalFailure("alternating Weyl sum cancels beyond 100-digit precision");
}

}  // namespace detail

/// sum_w sign(w) exp(<w(h1), h2>)
inline ScaledValue weyl_sum(const RootData& rd, const CartanPoint& h1, const CartanPoint& h2) {
  return detail::alternating_sum(rd, h1.coords, h2.coords, rd.system.form_scale);
}

/// Right-hand side of the Harish-Chandra formula divided by Pi(h1) Pi(h2),
/// i.e. the closed form of the orbital integral over G of
/// exp(<Ad_g h1, h2>), in scaled representation.
inline ScaledValue hc_rhs_scaled(const RootData& rd, const CartanPoint& h1, const CartanPoint& h2,
                                 double tolerance = 1e-8) {
  check_point(rd, h1, "h1");
  check_point(rd, h2, "h2");
  require_regular(rd, h1, "h1", tolerance);
  require_regular(rd, h2, "h2", tolerance);
  ScaledValue s = weyl_sum(rd, h1, h2);
  s.mantissa *= rd.normalization / (discriminant_value(rd, h1) * discriminant_value(rd, h2));
  return s;
}

inline Complex hc_rhs(const RootData& rd, const CartanPoint& h1, const CartanPoint& h2, double tolerance = 1e-8) {
  return hc_rhs_scaled(rd, h1, h2, tolerance).value();
}

/// The U(N) integral of exp(tr(A U B U^dagger)) for diagonal A, B with
/// strictly increasing eigenvalues `a`, `b`, via the determinant formula.
inline double hciz(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::Index n = a.size();
  if (n == 0 || b.size() != n) throw ArgumentError("eigenvalue vectors must be non-empty and of equal length");
  for (const auto* v : {&a, &b}) {
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      if ((*v)[i + 1] - (*v)[i] <= 1e-8) {
        const std::string name = "e" + std::to_string(i + 1) + " - e" + std::to_string(i + 2);
        throw DegenerateInputError(
            std::string(v == &a ? "a" : "b") + " must be strictly increasing with gaps > 1e-8 (root " + name + ")",
            name);
      }
    }
  }
  double log_const = 0.0;  // log prod_{p=1}^{N-1} p!
  for (Eigen::Index p = 1; p < n; ++p) log_const += std::lgamma(static_cast<double>(p) + 1.0);

  Eigen::MatrixXd m(n, n);
  double log_rows = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double row_max = a[i] * b[0];
    for (Eigen::Index j = 1; j < n; ++j) row_max = std::max(row_max, a[i] * b[j]);
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = std::exp(a[i] * b[j] - row_max);
    log_rows += row_max;
  }
  const double det = m.fullPivLu().determinant();
  double log_vandermonde = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) log_vandermonde += std::log(a[j] - a[i]) + std::log(b[j] - b[i]);
  return std::copysign(std::exp(log_const + log_rows + std::log(std::abs(det)) - log_vandermonde), det);
}

/// Highest weight in ambient (dual) coordinates; pairs with Cartan points by
/// the plain dot product.
struct Weight {
  RationalVector coords;
  bool dominant_integral = false;
};

/// <lambda, alpha_i^vee> for each simple root.
inline RationalVector dynkin_labels(const RootSystem& rs, const RationalVector& lambda) {
  RationalVector labels;
  for (const auto& a : rs.simple_roots) labels.push_back(2 * dot(lambda, a) / dot(a, a));
  return labels;
}

inline Weight make_weight(const RootSystem& rs, RationalVector coords) {
  if (static_cast<int>(coords.size()) != rs.ambient_dim) throw ArgumentError("weight has the wrong length");
  Weight w{std::move(coords), true};
  for (const auto& m : dynkin_labels(rs, w.coords)) {
    if (m < 0 || boost::multiprecision::denominator(m) != 1) w.dominant_integral = false;
  }
  return w;
}

/// sum_i m_i omega_i
inline Weight weight_from_dynkin(const RootSystem& rs, const std::vector<int>& labels) {
  if (static_cast<int>(labels.size()) != rs.rank) {
    throw ArgumentError("expected " + std::to_string(rs.rank) + " Dynkin labels");
  }
  const auto omega = fundamental_weights(rs);
  RationalVector coords(static_cast<std::size_t>(rs.ambient_dim));
  for (int i = 0; i < rs.rank; ++i)
    for (int d = 0; d < rs.ambient_dim; ++d) coords[d] += labels[i] * omega[i][d];
  return make_weight(rs, std::move(coords));
}

/// prod_alpha <lambda + rho, alpha> / <rho, alpha>, exactly.
inline Rational weyl_dimension(const RootSystem& rs, const Weight& lambda) {
  const auto rho = weyl_vector(rs);
  RationalVector shifted = lambda.coords;
  for (std::size_t d = 0; d < shifted.size(); ++d) shifted[d] += rho[d];
  Rational dim = 1;
  for (const auto& a : rs.positive_roots) dim *= dot(shifted, a) / dot(rho, a);
  return dim;
}

namespace detail {

/// e^z - 1 without cancellation for small |z|.
inline Complex expm1(Complex z) {
  const double s = std::sin(z.imag() / 2);
  return {std::expm1(z.real()) * std::cos(z.imag()) - 2.0 * s * s, std::exp(z.real()) * std::sin(z.imag())};
}

/// prod_alpha (e^{alpha(h)/2} - e^{-alpha(h)/2}) in scaled form.
inline ScaledValue weyl_denominator(const RootData& rd, const CartanPoint& h) {
  const Eigen::VectorXcd v = root_values(rd, h);
  ScaledValue d{Complex(1.0, 0.0), 0.0};
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const Complex z = v[i];
    Complex factor;
    if (z.real() >= 0) {
      factor = -std::exp(Complex(0.0, z.imag() / 2)) * expm1(-z);
      d.log_scale += z.real() / 2;
    } else {
      factor = std::exp(Complex(0.0, -z.imag() / 2)) * expm1(z);
      d.log_scale -= z.real() / 2;
    }
    if (std::abs(factor) <= 1e-8) {
      const std::string name = root_name(rd.system.positive_roots[static_cast<std::size_t>(i)]);
      throw DegenerateInputError("h is singular for the character: e^{alpha(h)} = 1 for root " + name, name);
    }
    d.mantissa *= factor;
  }
  return d;
}

inline void require_dominant(const Weight& lambda) {
  if (!lambda.dominant_integral) throw ArgumentError("highest weight must be dominant integral");
}

}  // namespace detail

/// Character of the irreducible representation with highest weight `lambda`
/// at exp(h), as the alternating Weyl sum over the Weyl denominator.
inline Complex weyl_character(const RootData& rd, const Weight& lambda, const CartanPoint& h) {
  detail::require_dominant(lambda);
  check_point(rd, h);
  const auto rho = weyl_vector(rd.system);
  RationalVector shifted = lambda.coords;
  for (std::size_t d = 0; d < shifted.size(); ++d) shifted[d] += rho[d];

  const ScaledValue den = detail::weyl_denominator(rd, h);
  const ScaledValue num = detail::alternating_sum(rd, shifted, h.coords, Rational(1));
  return num.mantissa / den.mantissa * std::exp(num.log_scale - den.log_scale);
}

/// Numerical limit of the character at s * direction as s -> 0, by Richardson
/// extrapolation of the O(s^2) error from s = 1e-2 and 5e-3. The direction
/// is rotated onto the imaginary axis so the evaluation stays on the torus.
inline double character_dimension_limit(const RootData& rd, const Weight& lambda, const CartanPoint& direction) {
  auto at = [&](double s) {
    return weyl_character(rd, lambda, CartanPoint(Eigen::VectorXcd(direction.coords * Complex(0.0, s)))).real();
  };
  return (4.0 * at(5e-3) - at(1e-2)) / 3.0;
}

/// Volume of the coadjoint orbit through h1 under the Liouville measure:
/// |W| Pi(h1) / [[Pi, Pi]]. `h1` must be real, regular, with Pi(h1) > 0.
inline double coadjoint_volume(const RootData& rd, const CartanPoint& h1, double tolerance = 1e-8) {
  check_point(rd, h1, "h1");
  require_regular(rd, h1, "h1", tolerance);
  const Complex pi = discriminant_value(rd, h1);
  if (h1.coords.imag().cwiseAbs().maxCoeff() > 0.0 || pi.real() <= 0.0) {
    throw ArgumentError("h1 must be real and lie in the fundamental chamber (Pi(h1) > 0)");
  }
  return static_cast<double>(rd.weyl_order()) * pi.real() / rd.pi_pi_value;
}

/// Character via the orbit-integral route: Pi(h) / (Weyl denominator) times
/// the Liouville volume of the orbit through lambda + rho times the orbital
/// integral, the latter taken from the closed form.
inline Complex kirillov_character(const RootData& rd, const Weight& lambda, const CartanPoint& h) {
  detail::require_dominant(lambda);
  check_point(rd, h);
  const auto rho = weyl_vector(rd.system);
  RationalVector shifted = lambda.coords;
  for (std::size_t d = 0; d < shifted.size(); ++d) shifted[d] += rho[d];
  // Dual of lambda + rho under the invariant form.
  const CartanPoint h1 = project_to_cartan(rd, detail::to_complex(shifted) / rd.form_scale);

  const double volume = coadjoint_volume(rd, h1);
  const ScaledValue integral = hc_rhs_scaled(rd, h1, h);
  const ScaledValue den = detail::weyl_denominator(rd, h);
  return discriminant_value(rd, h) * volume * integral.mantissa / den.mantissa *
         std::exp(integral.log_scale - den.log_scale);
}

inline nlohmann::json complex_json(Complex z) { return {{"re", z.real()}, {"im", z.imag()}}; }

inline nlohmann::json point_json(const CartanPoint& h) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    if (h.coords[i].imag() == 0.0) {
      out.push_back(h.coords[i].real());
    } else {
      out.push_back(complex_json(h.coords[i]));
    }
  }
  return out;
}

/// {inputs, value, method: "closed_form", formula}; `formula` is one of the
/// schema tokens "eq1" (orbital integral), "eq2" (U(N) determinant form),
/// "eq31" (character), "eq32" (orbit volume).
inline nlohmann::json closed_form_record(const std::string& formula, nlohmann::json inputs, Complex value) {
  return {{"inputs", std::move(inputs)}, {"value", complex_json(value)}, {"method", "closed_form"}, {"formula", formula}};
}

}  // namespace orbital
