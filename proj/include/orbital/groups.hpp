#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <regex>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "closedform.hpp"
#include "errors.hpp"
#include "rng.hpp"
#include "rootsys.hpp"

namespace orbital {

enum class GroupFamily { SU, SO, USp };

inline std::string to_string(GroupFamily f) {
  switch (f) {
    case GroupFamily::SU: return "SU";
    case GroupFamily::SO: return "SO";
    case GroupFamily::USp: return "USp";
  }
  return "?";
}

/// A compact group with its matrix size, rank and (when supported) the
/// associated root system. SO(3), SO(4) and USp(2) have no supported root
/// system here and are available for sampling only.
struct CompactGroupSpec {
  GroupFamily family = GroupFamily::SU;
  int size = 2;
  int rank = 1;
  std::optional<Family> root_family;
  Rational form_scale = 1;

  std::string name() const { return to_string(family) + "(" + std::to_string(size) + ")"; }

  /// Real dimension of the group.
  int dimension() const {
    switch (family) {
      case GroupFamily::SU: return size * size - 1;
      case GroupFamily::SO: return size * (size - 1) / 2;
      case GroupFamily::USp: return rank * (2 * rank + 1);
    }
    return 0;
  }

  /// Number of Cartan coordinates expected by embed_cartan.
  int cartan_coordinates() const { return family == GroupFamily::SU ? size : rank; }

  RootData root_data() const {
    if (!root_family) throw ArgumentError(name() + " has no supported root system (sampling only)");
    return make_root_data(*root_family, rank, form_scale);
  }
};

inline CompactGroupSpec make_group_spec(GroupFamily family, int size, const Rational& form_scale = 1) {
  CompactGroupSpec s;
  s.family = family;
  s.size = size;
  s.form_scale = form_scale;
  switch (family) {
    case GroupFamily::SU:
      if (size < 2) throw ArgumentError("SU(N) requires N >= 2");
      s.rank = size - 1;
      s.root_family = Family::A;
      break;
    case GroupFamily::SO:
      if (size < 3) throw ArgumentError("SO(N) requires N >= 3");
      s.rank = size / 2;
      if (size % 2 == 1 && s.rank >= 2) s.root_family = Family::B;
      if (size % 2 == 0 && s.rank >= 3) s.root_family = Family::D;
      break;
    case GroupFamily::USp:
      if (size < 2 || size % 2 != 0) throw ArgumentError("USp(2n) requires an even size >= 2");
      s.rank = size / 2;
      if (s.rank >= 2) s.root_family = Family::C;
      break;
  }
  return s;
}

/// Parses "SU(3)", "SO(5)", "USp(4)" (case-insensitive family).
inline CompactGroupSpec parse_group_spec(const std::string& text) {
  static const std::regex re(R"(\s*(su|so|usp|sp)\s*\(\s*(\d+)\s*\)\s*)", std::regex::icase);
  std::smatch m;
  if (!std::regex_match(text, m, re)) throw ArgumentError("cannot parse group '" + text + "'");
  std::string fam = m[1].str();
  std::transform(fam.begin(), fam.end(), fam.begin(), [](unsigned char c) { return std::tolower(c); });
  const int size = std::stoi(m[2].str());
  if (fam == "su") return make_group_spec(GroupFamily::SU, size);
  if (fam == "so") return make_group_spec(GroupFamily::SO, size);
  return make_group_spec(GroupFamily::USp, size);
}

/// Group for a root system: A_n -> SU(n+1), B_n -> SO(2n+1), C_n -> USp(2n),
/// D_n -> SO(2n). G2 has no matrix model here.
inline CompactGroupSpec group_for_root_system(Family f, int rank, const Rational& form_scale = 1) {
  switch (f) {
    case Family::A: return make_group_spec(GroupFamily::SU, rank + 1, form_scale);
    case Family::B: return make_group_spec(GroupFamily::SO, 2 * rank + 1, form_scale);
    case Family::C: return make_group_spec(GroupFamily::USp, 2 * rank, form_scale);
    case Family::D: return make_group_spec(GroupFamily::SO, 2 * rank, form_scale);
    case Family::G2: break;
  }
  throw ArgumentError("G2 has no matrix realization; closed form only");
}

/// Standard symplectic form [[0, I], [-I, 0]].
inline Eigen::MatrixXcd symplectic_form(int n) {
  Eigen::MatrixXcd j = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
  j.topRightCorner(n, n).setIdentity();
  j.bottomLeftCorner(n, n) = -Eigen::MatrixXcd::Identity(n, n);
  return j;
}

struct GroupElement {
  GroupFamily family = GroupFamily::SU;
  Eigen::MatrixXcd matrix;  // real entries for SO
};

struct ElementDefects {
  double unitarity = 0;   // max |g^* g - I|
  double determinant = 0; // |det g - 1|
  double symplectic = 0;  // max |g^T J g - J|, USp only
  double realness = 0;    // max |Im g|, SO only
};

inline ElementDefects element_defects(const GroupElement& g) {
  const Eigen::Index n = g.matrix.rows();
  ElementDefects d;
  d.unitarity = (g.matrix.adjoint() * g.matrix - Eigen::MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff();
  d.determinant = std::abs(g.matrix.determinant() - 1.0);
  if (g.family == GroupFamily::USp) {
    const Eigen::MatrixXcd j = symplectic_form(static_cast<int>(n / 2));
    d.symplectic = (g.matrix.transpose() * j * g.matrix - j).cwiseAbs().maxCoeff();
  }
  if (g.family == GroupFamily::SO) d.realness = g.matrix.imag().cwiseAbs().maxCoeff();
  return d;
}

inline bool is_valid_element(const GroupElement& g) {
  const auto d = element_defects(g);
  return d.unitarity < 1e-12 && d.determinant < 1e-10 && d.symplectic < 1e-10 && d.realness == 0.0;
}

namespace detail {

/// Q from a QR factorization with the phases of diag(R) moved into Q, so Q
/// is Haar on U(n) (or O(n) for real input).
template <class Matrix>
Matrix haar_qr(const Matrix& z) {
  using Scalar = typename Matrix::Scalar;
  Eigen::HouseholderQR<Matrix> qr(z);
  Matrix q = qr.householderQ();
  const auto& r = qr.matrixQR();
  for (Eigen::Index k = 0; k < z.cols(); ++k) {
    const Scalar rkk = r(k, k);
    const double mag = std::abs(rkk);
    if (mag > 0) q.col(k) *= rkk / mag;
  }
  return q;
}

/// -J conj(v): the quaternionic structure commuting with USp(2n).
inline Eigen::VectorXcd quaternionic_partner(const Eigen::VectorXcd& v) {
  const Eigen::Index n = v.size() / 2;
  Eigen::VectorXcd out(v.size());
  out.head(n) = -v.tail(n).conjugate();
  out.tail(n) = v.head(n).conjugate();
  return out;
}

}  // namespace detail

/// One Haar-distributed element.
inline GroupElement haar_sample(const CompactGroupSpec& spec, CounterRng& rng) {
  const int n = spec.size;
  GroupElement g;
  g.family = spec.family;
  switch (spec.family) {
    case GroupFamily::SU: {
      Eigen::MatrixXcd z(n, n);
      for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i) z(i, j) = rng.complex_normal();
      g.matrix = detail::haar_qr(z);
      const std::complex<double> det = g.matrix.determinant();
      g.matrix.col(0) /= det;
      break;
    }
    case GroupFamily::SO: {
      Eigen::MatrixXd z(n, n);
      for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i) z(i, j) = rng.normal();
      Eigen::MatrixXd q = detail::haar_qr(z);
      if (q.determinant() < 0) q.col(0) *= -1.0;
      g.matrix = q.cast<std::complex<double>>();
      break;
    }
    case GroupFamily::USp: {
      // Quaternionic Gram-Schmidt: columns q_1..q_m followed by their
      // partners, each new Gaussian vector orthogonalized (twice) against
      // all previous columns and partners.
      const int m = n / 2;
      g.matrix.resize(n, n);
      for (int k = 0; k < m; ++k) {
        Eigen::VectorXcd v(n);
        double norm = 0;
        do {
          for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.complex_normal();
          for (int pass = 0; pass < 2; ++pass) {
            for (int j = 0; j < k; ++j) {
              v -= g.matrix.col(j).dot(v) * g.matrix.col(j);
              v -= g.matrix.col(m + j).dot(v) * g.matrix.col(m + j);
            }
          }
          norm = v.norm();
        } while (norm < 1e-8);
        v /= norm;
        g.matrix.col(k) = v;
        g.matrix.col(m + k) = detail::quaternionic_partner(v);
      }
      break;
    }
  }
  return g;
}

/// Trace-form constant c in pairing(X, Y) = c tr(XY), chosen so embedded
/// Cartan elements pair like their coordinates under the invariant form.
inline double pairing_constant(const CompactGroupSpec& spec) {
  const double s = static_cast<double>(spec.form_scale);
  return spec.family == GroupFamily::SU ? -s : -0.5 * s;
}

inline std::complex<double> pairing(const CompactGroupSpec& spec, const Eigen::MatrixXcd& x,
                                    const Eigen::MatrixXcd& y) {
  if (x.rows() != spec.size || x.cols() != spec.size || y.rows() != spec.size || y.cols() != spec.size) {
    throw ArgumentError("pairing: matrices must be " + std::to_string(spec.size) + " x " + std::to_string(spec.size));
  }
  return pairing_constant(spec) * (x.transpose().cwiseProduct(y)).sum();
}

/// Cartan coordinates to a matrix in the Lie algebra (complexified, linear
/// in the coordinates).
inline Eigen::MatrixXcd embed_cartan(const CompactGroupSpec& spec, const Eigen::VectorXcd& h) {
  if (h.size() != spec.cartan_coordinates()) {
    throw ArgumentError(spec.name() + " expects " + std::to_string(spec.cartan_coordinates()) +
                        " Cartan coordinates, got " + std::to_string(h.size()));
  }
  const std::complex<double> i(0.0, 1.0);
  Eigen::MatrixXcd x = Eigen::MatrixXcd::Zero(spec.size, spec.size);
  switch (spec.family) {
    case GroupFamily::SU:
      if (std::abs(h.sum()) > 1e-12 * std::max(1.0, h.cwiseAbs().maxCoeff())) {
        throw ArgumentError("SU Cartan coordinates must sum to zero");
      }
      x.diagonal() = i * h;
      break;
    case GroupFamily::SO:
      for (int k = 0; k < spec.rank; ++k) {
        x(2 * k, 2 * k + 1) = h[k];
        x(2 * k + 1, 2 * k) = -h[k];
      }
      break;
    case GroupFamily::USp:
      x.diagonal().head(spec.rank) = i * h;
      x.diagonal().tail(spec.rank) = -i * h;
      break;
  }
  return x;
}

inline Eigen::MatrixXcd embed_cartan(const CompactGroupSpec& spec, const CartanPoint& h) {
  return embed_cartan(spec, h.coords);
}

/// Coordinates of the D_3 point (theta_1, theta_2, theta_3) under the
/// isomorphism so(6) = su(4), as a sum-zero A_3 point. The map is an
/// isometry of the standard forms and sends positive roots to positive roots.
inline CartanPoint d3_to_a3(const CartanPoint& theta) {
  if (theta.size() != 3) throw ArgumentError("D_3 point must have 3 coordinates");
  const auto& t = theta.coords;
  Eigen::VectorXcd a(4);
  a << t[0] + t[1] + t[2], t[0] - t[1] - t[2], -t[0] + t[1] - t[2], -t[0] - t[1] + t[2];
  return CartanPoint(Eigen::VectorXcd(a / 2.0));
}

struct IntegralEstimate {
  std::complex<double> mean{0.0, 0.0};
  double std_error = 0.0;
  std::int64_t n_samples = 0;
  std::uint64_t seed = 0;
  double elapsed = 0.0;
};

namespace detail {

/// Running mean and sum of squared deviations (|x - mean|^2 for complex x).
struct Welford {
  std::int64_t n = 0;
  std::complex<double> mean{0.0, 0.0};
  double m2 = 0.0;

  void add(std::complex<double> x) {
    ++n;
    const std::complex<double> delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += std::real(std::conj(delta) * (x - mean));
  }

  /// Chan et al. pairwise combination.
  void merge(const Welford& o) {
    if (o.n == 0) return;
    if (n == 0) {
      *this = o;
      return;
    }
    const double na = static_cast<double>(n), nb = static_cast<double>(o.n);
    const std::complex<double> delta = o.mean - mean;
    mean += delta * (nb / (na + nb));
    m2 += o.m2 + std::norm(delta) * na * nb / (na + nb);
    n += o.n;
  }
};

inline constexpr std::int64_t kPartitionSize = std::int64_t{1} << 14;

}  // namespace detail

/// Worker count from an explicit request, else the ORBITAL_FORGE_THREADS
/// environment variable, else the hardware concurrency.
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("ORBITAL_FORGE_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v > 0) return v;
    } catch (const std::exception&) {
    }
    throw ConfigurationError(std::string("ORBITAL_FORGE_THREADS must be a positive integer, got '") + env + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Monte Carlo estimate of the integral over G of
/// exp((1/t) pairing(g H1 g^{-1}, H2)). Samples are split into fixed-size
/// partitions, each with its own counter-based stream, and merged in
/// partition order, so the result does not depend on `threads`.
inline IntegralEstimate mc_orbital_integral(const CompactGroupSpec& spec, const CartanPoint& h1,
                                            const CartanPoint& h2, double t, std::int64_t n, std::uint64_t seed,
                                            int threads = 0) {
  if (n < 1000) throw ArgumentError("mc_orbital_integral requires n >= 1000 samples");
  if (!(t > 0) || !std::isfinite(t)) throw ArgumentError("t must be positive and finite");
  const auto start = std::chrono::steady_clock::now();
  const Eigen::MatrixXcd x1 = embed_cartan(spec, h1);
  const Eigen::MatrixXcd x2 = embed_cartan(spec, h2) / t;
  const double c = pairing_constant(spec);

  const std::int64_t partitions = (n + detail::kPartitionSize - 1) / detail::kPartitionSize;
  std::vector<detail::Welford> partial(static_cast<std::size_t>(partitions));
  std::atomic<std::int64_t> next{0};
  auto work = [&] {
    Eigen::MatrixXcd conj;
    for (std::int64_t p = next++; p < partitions; p = next++) {
      CounterRng rng(seed, static_cast<std::uint64_t>(p));
      const std::int64_t begin = p * detail::kPartitionSize;
      const std::int64_t end = std::min(n, begin + detail::kPartitionSize);
      detail::Welford acc;
      for (std::int64_t k = begin; k < end; ++k) {
        const GroupElement g = haar_sample(spec, rng);
        conj.noalias() = g.matrix * x1 * g.matrix.adjoint();
        acc.add(std::exp(c * (conj.transpose().cwiseProduct(x2)).sum()));
      }
      partial[static_cast<std::size_t>(p)] = acc;
    }
  };
  const int workers = static_cast<int>(std::min<std::int64_t>(resolve_threads(threads), partitions));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  detail::Welford total;
  for (const auto& p : partial) total.merge(p);

  IntegralEstimate est;
  est.mean = total.mean;
  est.std_error = total.n > 1 ? std::sqrt(total.m2 / static_cast<double>(total.n - 1) / static_cast<double>(total.n)) : 0.0;
  est.n_samples = total.n;
  est.seed = seed;
  est.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return est;
}

inline nlohmann::json estimate_json(const CompactGroupSpec& spec, const CartanPoint& h1, const CartanPoint& h2,
                                    double t, const IntegralEstimate& est) {
  return {{"spec", spec.name()}, {"h1", point_json(h1)},         {"h2", point_json(h2)},
          {"t", t},              {"n", est.n_samples},            {"seed", est.seed},
          {"mean_re", est.mean.real()}, {"mean_im", est.mean.imag()}, {"stderr", est.std_error}};
}

}  // namespace orbital
