#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <deque>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "polynomial.hpp"

namespace orbital {

using RationalVector = std::vector<Rational>;

enum class Family { A, B, C, D, G2 };

inline std::string to_string(Family f) {
  switch (f) {
    case Family::A: return "A";
    case Family::B: return "B";
    case Family::C: return "C";
    case Family::D: return "D";
    case Family::G2: return "G2";
  }
  return "?";
}

inline Family parse_family(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  if (s == "A") return Family::A;
  if (s == "B") return Family::B;
  if (s == "C") return Family::C;
  if (s == "D") return Family::D;
  if (s == "G2" || s == "G") return Family::G2;
  throw ConfigurationError("unknown root system family '" + s + "'");
}

/// Dense row-major matrix of exact rationals.
class ExactMatrix {
 public:
  ExactMatrix() = default;
  ExactMatrix(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows * cols)) {}

  static ExactMatrix identity(int n) {
    ExactMatrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1;
    return m;
  }

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  Rational& operator()(int i, int j) { return data_[static_cast<std::size_t>(i * cols_ + j)]; }
  const Rational& operator()(int i, int j) const { return data_[static_cast<std::size_t>(i * cols_ + j)]; }

  friend ExactMatrix operator*(const ExactMatrix& a, const ExactMatrix& b) {
    if (a.cols_ != b.rows_) throw ArgumentError("matrix shapes do not compose");
    ExactMatrix out(a.rows_, b.cols_);
    for (int i = 0; i < a.rows_; ++i) {
      for (int k = 0; k < a.cols_; ++k) {
        const Rational& aik = a(i, k);
        if (aik == 0) continue;
        for (int j = 0; j < b.cols_; ++j) out(i, j) += aik * b(k, j);
      }
    }
    return out;
  }

  RationalVector apply(const RationalVector& v) const {
    if (static_cast<int>(v.size()) != cols_) throw ArgumentError("vector length does not match matrix");
    RationalVector out(static_cast<std::size_t>(rows_));
    for (int i = 0; i < rows_; ++i) {
      for (int j = 0; j < cols_; ++j) out[i] += (*this)(i, j) * v[j];
    }
    return out;
  }

  ExactMatrix transpose() const {
    ExactMatrix t(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  /// Determinant by fraction-exact Gaussian elimination.
  Rational determinant() const {
    if (rows_ != cols_) throw ArgumentError("determinant of a non-square matrix");
    ExactMatrix m = *this;
    Rational det = 1;
    for (int c = 0; c < cols_; ++c) {
      int pivot = c;
      while (pivot < rows_ && m(pivot, c) == 0) ++pivot;
      if (pivot == rows_) return 0;
      if (pivot != c) {
        for (int j = 0; j < cols_; ++j) std::swap(m(pivot, j), m(c, j));
        det = -det;
      }
      det *= m(c, c);
      for (int r = c + 1; r < rows_; ++r) {
        if (m(r, c) == 0) continue;
        const Rational f = m(r, c) / m(c, c);
        for (int j = c; j < cols_; ++j) m(r, j) -= f * m(c, j);
      }
    }
    return det;
  }

  Eigen::MatrixXd to_double() const {
    Eigen::MatrixXd d(rows_, cols_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) d(i, j) = static_cast<double>((*this)(i, j));
    return d;
  }

  friend bool operator==(const ExactMatrix& a, const ExactMatrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }
  friend bool operator<(const ExactMatrix& a, const ExactMatrix& b) {
    if (a.rows_ != b.rows_) return a.rows_ < b.rows_;
    if (a.cols_ != b.cols_) return a.cols_ < b.cols_;
    return a.data_ < b.data_;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<Rational> data_;
};

inline Rational dot(const RationalVector& a, const RationalVector& b) {
  if (a.size() != b.size()) throw ArgumentError("dot product of vectors of different length");
  Rational s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline std::string format_rational(const Rational& q) {
  std::ostringstream os;
  os << q;
  return os.str();
}

/// "e1 - e2", "2e1 - e2 - e3", "e3"
inline std::string root_name(const RationalVector& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] == 0) continue;
    const bool negative = v[i] < 0;
    const Rational mag = negative ? Rational(-v[i]) : v[i];
    if (out.empty()) {
      if (negative) out += "-";
    } else {
      out += negative ? " - " : " + ";
    }
    if (mag != 1) out += format_rational(mag);
    out += "e" + std::to_string(i + 1);
  }
  return out.empty() ? "0" : out;
}

/// Root data for one simple family and rank, in ambient coordinates:
/// A_{N-1} lives in the sum-zero subspace of R^N, G2 in the sum-zero subspace
/// of R^3, and B/C/D in R^N. The invariant form is `form_scale` times the
/// standard dot product of ambient coordinates.
struct RootSystem {
  Family family = Family::A;
  int rank = 0;
  int ambient_dim = 0;
  std::vector<RationalVector> simple_roots;
  std::vector<RationalVector> positive_roots;
  Rational form_scale = 1;

  /// Whether Cartan points must satisfy sum(coords) == 0.
  bool sum_zero() const noexcept { return family == Family::A || family == Family::G2; }

  /// Orthogonal (unnormalized) basis of the Cartan subalgebra in ambient
  /// coordinates: Gram-Schmidt of e_i - e_{i+1} in index order for A and G2,
  /// the standard basis for B, C, D.
  std::vector<RationalVector> cartan_basis() const {
    std::vector<RationalVector> basis;
    if (!sum_zero()) {
      for (int i = 0; i < ambient_dim; ++i) {
        RationalVector e(static_cast<std::size_t>(ambient_dim));
        e[i] = 1;
        basis.push_back(std::move(e));
      }
      return basis;
    }
    for (int i = 0; i + 1 < ambient_dim; ++i) {
      RationalVector v(static_cast<std::size_t>(ambient_dim));
      v[i] = 1;
      v[i + 1] = -1;
      for (const auto& b : basis) {
        const Rational f = dot(v, b) / dot(b, b);
        for (int k = 0; k < ambient_dim; ++k) v[k] -= f * b[k];
      }
      basis.push_back(std::move(v));
    }
    return basis;
  }

  /// Gram matrix of the invariant form in the `cartan_basis` coordinates.
  ExactMatrix form_gram() const {
    const auto basis = cartan_basis();
    ExactMatrix g(rank, rank);
    for (int i = 0; i < rank; ++i)
      for (int j = 0; j < rank; ++j) g(i, j) = form_scale * dot(basis[i], basis[j]);
    return g;
  }

  /// Orthonormal basis (rows) of the Cartan subalgebra for the invariant
  /// form, in ambient coordinates.
  Eigen::MatrixXd orthonormal_basis() const {
    const auto basis = cartan_basis();
    Eigen::MatrixXd out(rank, ambient_dim);
    for (int i = 0; i < rank; ++i) {
      const double norm = std::sqrt(static_cast<double>(form_scale * dot(basis[i], basis[i])));
      for (int k = 0; k < ambient_dim; ++k) out(i, k) = static_cast<double>(basis[i][k]) / norm;
    }
    return out;
  }
};

inline int expected_positive_root_count(Family f, int n) {
  switch (f) {
    case Family::A: return n * (n + 1) / 2;
    case Family::B:
    case Family::C: return n * n;
    case Family::D: return n * (n - 1);
    case Family::G2: return 6;
  }
  return 0;
}

/// Builds exact root data. Supported: A_n (n >= 1), B_n and C_n (n >= 2),
/// D_n (n >= 3), G2 (rank 2).
inline RootSystem build_root_system(Family family, int rank, const Rational& form_scale = 1) {
  if (form_scale <= 0) throw ConfigurationError("form scale must be positive");
  RootSystem rs;
  rs.family = family;
  rs.rank = rank;
  rs.form_scale = form_scale;
  const auto bad = [&] {
    return ConfigurationError("unsupported root system " + to_string(family) + "_" + std::to_string(rank));
  };
  switch (family) {
    case Family::A: if (rank < 1) throw bad(); rs.ambient_dim = rank + 1; break;
    case Family::B:
    case Family::C: if (rank < 2) throw bad(); rs.ambient_dim = rank; break;
    case Family::D: if (rank < 3) throw bad(); rs.ambient_dim = rank; break;
    case Family::G2: if (rank != 2) throw bad(); rs.ambient_dim = 3; break;
  }
  const int n = rs.ambient_dim;
  const auto vec = [n](std::initializer_list<std::pair<int, int>> entries) {
    RationalVector v(static_cast<std::size_t>(n));
    for (auto [i, c] : entries) v[i] += c;
    return v;
  };

  if (family == Family::G2) {
    rs.simple_roots = {vec({{0, 1}, {1, -1}}), vec({{0, -2}, {1, 1}, {2, 1}})};
    rs.positive_roots = {vec({{0, 1}, {1, -1}}),          vec({{0, -2}, {1, 1}, {2, 1}}),
                         vec({{0, -1}, {2, 1}}),          vec({{1, -1}, {2, 1}}),
                         vec({{0, 1}, {1, -2}, {2, 1}}),  vec({{0, -1}, {1, -1}, {2, 2}})};
    return rs;
  }

  for (int i = 0; i + 1 < n; ++i) rs.simple_roots.push_back(vec({{i, 1}, {i + 1, -1}}));
  switch (family) {
    case Family::B: rs.simple_roots.push_back(vec({{n - 1, 1}})); break;
    case Family::C: rs.simple_roots.push_back(vec({{n - 1, 2}})); break;
    case Family::D: rs.simple_roots.push_back(vec({{n - 2, 1}, {n - 1, 1}})); break;
    default: break;
  }

  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      rs.positive_roots.push_back(vec({{i, 1}, {j, -1}}));
      if (family != Family::A) rs.positive_roots.push_back(vec({{i, 1}, {j, 1}}));
    }
  }
  if (family == Family::B)
    for (int i = 0; i < n; ++i) rs.positive_roots.push_back(vec({{i, 1}}));
  if (family == Family::C)
    for (int i = 0; i < n; ++i) rs.positive_roots.push_back(vec({{i, 2}}));
  return rs;
}

/// Expresses `v` (assumed to lie in the span of the simple roots) in the
/// simple-root basis by solving the Gram system exactly.
inline RationalVector simple_root_coefficients(const RootSystem& rs, const RationalVector& v) {
  const int r = rs.rank;
  ExactMatrix aug(r, r + 1);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < r; ++j) aug(i, j) = dot(rs.simple_roots[i], rs.simple_roots[j]);
    aug(i, r) = dot(rs.simple_roots[i], v);
  }
  for (int c = 0; c < r; ++c) {
    int p = c;
    while (aug(p, c) == 0) ++p;
    if (p != c)
      for (int j = 0; j <= r; ++j) std::swap(aug(p, j), aug(c, j));
    for (int row = 0; row < r; ++row) {
      if (row == c || aug(row, c) == 0) continue;
      const Rational f = aug(row, c) / aug(c, c);
      for (int j = c; j <= r; ++j) aug(row, j) -= f * aug(c, j);
    }
  }
  RationalVector coeffs(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) coeffs[i] = aug(i, r) / aug(i, i);
  return coeffs;
}

/// Orthogonal reflection through the hyperplane of `alpha`, in ambient
/// coordinates. Fixes the normal direction of the sum-zero subspace.
inline ExactMatrix reflection_matrix(const RationalVector& alpha) {
  const int n = static_cast<int>(alpha.size());
  const Rational norm2 = dot(alpha, alpha);
  ExactMatrix m = ExactMatrix::identity(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) -= 2 * alpha[i] * alpha[j] / norm2;
  return m;
}

struct WeylElement {
  ExactMatrix matrix;  // ambient coordinates
  int sign = 1;
  int word_length = 0;
};

/// All Weyl group elements by breadth-first closure over the simple
/// reflections. The identity comes first; BFS depth is the reduced length.
inline std::vector<WeylElement> generate_weyl_group(const RootSystem& rs, std::size_t max_elements = 10'000'000) {
  std::vector<ExactMatrix> generators;
  for (const auto& a : rs.simple_roots) generators.push_back(reflection_matrix(a));

  std::vector<WeylElement> elements;
  std::set<ExactMatrix> seen;
  std::deque<std::size_t> frontier;
  elements.push_back({ExactMatrix::identity(rs.ambient_dim), 1, 0});
  seen.insert(elements.front().matrix);
  frontier.push_back(0);
  while (!frontier.empty()) {
    const std::size_t idx = frontier.front();
    frontier.pop_front();
    for (const auto& s : generators) {
      ExactMatrix next = s * elements[idx].matrix;
      if (seen.count(next)) continue;
      if (elements.size() >= max_elements) {
        throw ResourceError("Weyl group closure exceeded " + std::to_string(max_elements) + " elements");
      }
      seen.insert(next);
      const int length = elements[idx].word_length + 1;
      elements.push_back({std::move(next), (length % 2 == 0) ? 1 : -1, length});
      frontier.push_back(elements.size() - 1);
    }
  }
  return elements;
}

inline std::size_t expected_weyl_order(Family f, int n) {
  std::size_t fact = 1;
  for (int k = 2; k <= n; ++k) fact *= static_cast<std::size_t>(k);
  switch (f) {
    case Family::A: return fact * static_cast<std::size_t>(n + 1);
    case Family::B:
    case Family::C: return fact << n;
    case Family::D: return fact << (n - 1);
    case Family::G2: return 12;
  }
  return 0;
}

/// Product of the positive-root linear forms, as a polynomial in the ambient
/// coordinates. For A and G2 every root lies in the sum-zero subspace, so the
/// polynomial is constant along the normal direction and its coefficients in
/// ambient coordinates determine the restriction to the Cartan.
inline SparsePolynomial<Rational> discriminant(const RootSystem& rs) {
  auto pi = SparsePolynomial<Rational>::constant(static_cast<std::size_t>(rs.ambient_dim), Rational(1));
  for (const auto& alpha : rs.positive_roots) pi = pi * SparsePolynomial<Rational>::linear_form(alpha);
  return pi;
}

/// Re-expresses a polynomial in ambient coordinates in the documented
/// orthonormal Cartan coordinates (see `RootSystem::orthonormal_basis`).
inline SparsePolynomial<double> to_orthonormal(const RootSystem& rs, const SparsePolynomial<Rational>& p) {
  const Eigen::MatrixXd basis = rs.orthonormal_basis();
  std::vector<double> m(static_cast<std::size_t>(basis.size()));
  for (int i = 0; i < basis.rows(); ++i)
    for (int j = 0; j < basis.cols(); ++j) m[static_cast<std::size_t>(i * basis.cols() + j)] = basis(i, j);
  return p.substitute_linear<double>(m, static_cast<std::size_t>(basis.rows()));
}

/// [[Pi, Pi]] for the invariant form of `rs`, exactly.
inline Rational pi_pi_norm(const RootSystem& rs) {
  const auto pi = discriminant(rs);
  return bracket(pi, pi, rs.form_scale);
}

inline Rational eval_poly(const SparsePolynomial<Rational>& p, const RationalVector& h) {
  return p.evaluate<Rational>(h);
}

inline std::complex<double> eval_poly(const SparsePolynomial<Rational>& p, const Eigen::VectorXcd& h) {
  return p.evaluate<std::complex<double>>(std::span<const std::complex<double>>(h.data(), static_cast<std::size_t>(h.size())));
}

/// Fundamental weights (dual basis to the simple coroots), in ambient
/// coordinates inside the Cartan subspace.
inline std::vector<RationalVector> fundamental_weights(const RootSystem& rs) {
  const int r = rs.rank;
  // Solve <omega_i, alpha_j^vee> = delta_ij with omega_i = sum_k x_ik alpha_k.
  ExactMatrix a(r, r);
  for (int j = 0; j < r; ++j) {
    const Rational n2 = dot(rs.simple_roots[j], rs.simple_roots[j]);
    for (int k = 0; k < r; ++k) a(j, k) = 2 * dot(rs.simple_roots[k], rs.simple_roots[j]) / n2;
  }
  std::vector<RationalVector> weights;
  for (int i = 0; i < r; ++i) {
    ExactMatrix aug(r, r + 1);
    for (int j = 0; j < r; ++j) {
      for (int k = 0; k < r; ++k) aug(j, k) = a(j, k);
      aug(j, r) = (i == j) ? 1 : 0;
    }
    for (int c = 0; c < r; ++c) {
      int p = c;
      while (aug(p, c) == 0) ++p;
      if (p != c)
        for (int j = 0; j <= r; ++j) std::swap(aug(p, j), aug(c, j));
      for (int row = 0; row < r; ++row) {
        if (row == c || aug(row, c) == 0) continue;
        const Rational f = aug(row, c) / aug(c, c);
        for (int j = c; j <= r; ++j) aug(row, j) -= f * aug(c, j);
      }
    }
    RationalVector w(static_cast<std::size_t>(rs.ambient_dim));
    for (int k = 0; k < r; ++k) {
      const Rational x = aug(k, r) / aug(k, k);
      for (int d = 0; d < rs.ambient_dim; ++d) w[d] += x * rs.simple_roots[k][d];
    }
    weights.push_back(std::move(w));
  }
  return weights;
}

/// rho = half the sum of the positive roots.
inline RationalVector weyl_vector(const RootSystem& rs) {
  RationalVector rho(static_cast<std::size_t>(rs.ambient_dim));
  for (const auto& a : rs.positive_roots)
    for (int d = 0; d < rs.ambient_dim; ++d) rho[d] += a[d] / 2;
  return rho;
}

/// Everything the numerical modules need about one root system, computed
/// once. Immutable after construction.
struct RootData {
  RootSystem system;
  std::vector<WeylElement> weyl;
  SparsePolynomial<Rational> pi;
  Rational pi_pi = 0;

  std::vector<Eigen::MatrixXd> weyl_matrices;  // ambient, double
  Eigen::MatrixXd roots;                       // r x ambient_dim
  Eigen::MatrixXd orthonormal_basis;           // rank x ambient_dim
  double pi_pi_value = 0;
  double normalization = 0;  // [[Pi, Pi]] / |W|
  double form_scale = 1;

  int rank() const noexcept { return system.rank; }
  int ambient_dim() const noexcept { return system.ambient_dim; }
  int root_count() const noexcept { return static_cast<int>(system.positive_roots.size()); }
  std::size_t weyl_order() const noexcept { return weyl.size(); }
  /// rank + 2 * (number of positive roots)
  int algebra_dim() const noexcept { return rank() + 2 * root_count(); }

  /// <x, y> for the invariant form on ambient coordinates (bilinear).
  template <class A, class B>
  auto form(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) const {
    return form_scale * (x.transpose() * y).value();
  }
};

inline RootData make_root_data(RootSystem rs) {
  RootData d;
  d.system = std::move(rs);
  d.weyl = generate_weyl_group(d.system);
  d.pi = discriminant(d.system);
  d.pi_pi = bracket(d.pi, d.pi, d.system.form_scale);
  for (const auto& w : d.weyl) d.weyl_matrices.push_back(w.matrix.to_double());
  const int r = d.root_count();
  d.roots.resize(r, d.system.ambient_dim);
  for (int i = 0; i < r; ++i)
    for (int k = 0; k < d.system.ambient_dim; ++k) d.roots(i, k) = static_cast<double>(d.system.positive_roots[i][k]);
  d.orthonormal_basis = d.system.orthonormal_basis();
  d.pi_pi_value = static_cast<double>(d.pi_pi);
  d.normalization = static_cast<double>(d.pi_pi / Rational(static_cast<long long>(d.weyl.size())));
  d.form_scale = static_cast<double>(d.system.form_scale);
  return d;
}

inline RootData make_root_data(Family family, int rank, const Rational& form_scale = 1) {
  return make_root_data(build_root_system(family, rank, form_scale));
}

inline nlohmann::json rational_to_json(const Rational& q) {
  using boost::multiprecision::denominator;
  using boost::multiprecision::numerator;
  if (denominator(q) == 1) return numerator(q).convert_to<long long>();
  return format_rational(q);
}

inline nlohmann::json vectors_to_json(const std::vector<RationalVector>& vs) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& v : vs) {
    nlohmann::json row = nlohmann::json::array();
    for (const auto& q : v) row.push_back(rational_to_json(q));
    out.push_back(std::move(row));
  }
  return out;
}

/// {family, rank, simple_roots, positive_roots, weyl_order}
inline nlohmann::json root_data_json(const RootSystem& rs, std::size_t weyl_order) {
  return {{"family", to_string(rs.family)},
          {"rank", rs.rank},
          {"simple_roots", vectors_to_json(rs.simple_roots)},
          {"positive_roots", vectors_to_json(rs.positive_roots)},
          {"weyl_order", weyl_order}};
}

}  // namespace orbital
