#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "closedform.hpp"
#include "errors.hpp"
#include "groups.hpp"
#include "rng.hpp"

namespace orbital {

/// Basis of the compact real form g0, orthonormal for the pairing. The
/// Cartan part spans the embedded Cartan subalgebra; the transverse part
/// spans its orthogonal complement, the tangent space of a regular orbit
/// through a Cartan element.
struct AlgebraBasis {
  std::vector<Eigen::MatrixXcd> cartan;
  std::vector<Eigen::MatrixXcd> transverse;

  std::size_t dimension() const { return cartan.size() + transverse.size(); }
  Eigen::MatrixXcd element(std::size_t k) const { return k < cartan.size() ? cartan[k] : transverse[k - cartan.size()]; }
};

namespace detail {

/// Orthogonal projection of a complex matrix onto g0.
inline Eigen::MatrixXcd project_to_algebra(const CompactGroupSpec& spec, const Eigen::MatrixXcd& x) {
  Eigen::MatrixXcd y = (x - x.adjoint()) / 2.0;
  switch (spec.family) {
    case GroupFamily::SU:
      y.diagonal().array() -= y.trace() / static_cast<double>(spec.size);
      break;
    case GroupFamily::SO:
      y = y.real().cast<std::complex<double>>();
      break;
    case GroupFamily::USp: {
      const Eigen::MatrixXcd j = symplectic_form(spec.rank);
      y = (y + j * y.transpose() * j) / 2.0;
      break;
    }
  }
  return y;
}

inline double real_pairing(const CompactGroupSpec& spec, const Eigen::MatrixXcd& x, const Eigen::MatrixXcd& y) {
  return pairing(spec, x, y).real();
}

}  // namespace detail

inline AlgebraBasis algebra_basis(const CompactGroupSpec& spec) {
  const int n = spec.size;
  const std::complex<double> i(0.0, 1.0);
  std::vector<Eigen::MatrixXcd> accepted;
  auto try_add = [&](Eigen::MatrixXcd x) {
    x = detail::project_to_algebra(spec, x);
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : accepted) x -= detail::real_pairing(spec, b, x) * b;
    const double norm2 = detail::real_pairing(spec, x, x);
    if (norm2 < 1e-16) return false;
    accepted.push_back(x / std::sqrt(norm2));
    return true;
  };

  AlgebraBasis basis;
  for (int k = 0; k < spec.rank; ++k) {
    Eigen::VectorXcd h = Eigen::VectorXcd::Zero(spec.cartan_coordinates());
    h[k] = 1.0;
    if (spec.family == GroupFamily::SU) h[k + 1] = -1.0;
    try_add(embed_cartan(spec, h));
  }
  basis.cartan = accepted;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      Eigen::MatrixXcd e = Eigen::MatrixXcd::Zero(n, n);
      e(a, b) = 1.0;
      e(b, a) = -1.0;
      try_add(e);
      e(a, b) = i;
      e(b, a) = i;
      try_add(e);
    }
    Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(n, n);
    d(a, a) = i;
    try_add(d);
  }
  if (static_cast<int>(accepted.size()) != spec.dimension()) {
    throw NumericalFailure("failed to build a basis of the Lie algebra of " + spec.name());
  }
  basis.transverse.assign(accepted.begin() + static_cast<std::ptrdiff_t>(basis.cartan.size()), accepted.end());
  return basis;
}

/// exp of an element of g0 via the eigen-decomposition of the Hermitian
/// matrix i * eta.
inline Eigen::MatrixXcd algebra_exp(const Eigen::MatrixXcd& eta) {
  const std::complex<double> i(0.0, 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(i * eta);
  const Eigen::VectorXcd phases = (-i * es.eigenvalues().cast<std::complex<double>>()).array().exp();
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

struct CriticalPoint {
  GroupElement group_element;
  Eigen::MatrixXcd point;  // Ad_g H1
  double value = 0;        // pairing(Ad_g H1, H2)
  std::optional<std::size_t> matched_weyl;
  int matched_sign = 0;
  double residual_gradient_norm = 0;
  int multiplicity = 1;  // converged starts in the cluster
};

struct CriticalSearch {
  std::vector<CriticalPoint> points;        // one per value cluster, ascending value
  std::vector<double> expected_values;      // <w(h1), h2> in Weyl-group order
  int n_starts = 0;
  int unconverged = 0;
  int spurious = 0;
  bool incomplete_cover = false;
};

struct SaddleOptions {
  int max_iterations = 500;
  double cluster_tolerance = 1e-6;
  double match_tolerance = 1e-6;
};

namespace detail {

inline void require_real(const CartanPoint& h, const char* label) {
  if (h.coords.imag().cwiseAbs().maxCoeff() != 0.0) {
    throw ArgumentError(std::string(label) + " must be real for the critical-point analysis");
  }
}

/// Coordinates of an element of g0 in an orthonormal family.
inline Eigen::VectorXd coordinates(const CompactGroupSpec& spec, const std::vector<Eigen::MatrixXcd>& family,
                                   const Eigen::MatrixXcd& x) {
  Eigen::VectorXd c(static_cast<Eigen::Index>(family.size()));
  for (std::size_t k = 0; k < family.size(); ++k) c[static_cast<Eigen::Index>(k)] = real_pairing(spec, family[k], x);
  return c;
}

/// Levenberg-Marquardt on the residual [Ad_g H1, H2], whose zeros are the
/// critical points of g -> pairing(Ad_g H1, H2); updates g <- exp(eta) g.
inline std::optional<CriticalPoint> refine_critical_point(const CompactGroupSpec& spec, const AlgebraBasis& basis,
                                                          GroupElement g, const Eigen::MatrixXcd& x1,
                                                          const Eigen::MatrixXcd& x2, double tolerance,
                                                          int max_iterations) {
  const std::size_t d = basis.dimension();
  const Eigen::Index m = static_cast<Eigen::Index>(basis.transverse.size());
  auto residual = [&](const Eigen::MatrixXcd& x) {
    return coordinates(spec, basis.transverse, x * x2 - x2 * x);
  };
  Eigen::MatrixXcd x = g.matrix * x1 * g.matrix.adjoint();
  Eigen::VectorXd r = residual(x);
  double lambda = 1e-3;
  for (int iter = 0; iter < max_iterations && r.norm() > tolerance; ++iter) {
    Eigen::MatrixXd jac(m, static_cast<Eigen::Index>(d));
    for (std::size_t k = 0; k < d; ++k) {
      const Eigen::MatrixXcd e = basis.element(k);
      const Eigen::MatrixXcd dx = e * x - x * e;
      jac.col(static_cast<Eigen::Index>(k)) = residual(dx);
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd jtr = jac.transpose() * r;
    bool improved = false;
    for (int attempt = 0; attempt < 30 && !improved; ++attempt) {
      Eigen::MatrixXd a = jtj;
      a.diagonal().array() += lambda * std::max(1.0, jtj.diagonal().maxCoeff());
      const Eigen::VectorXd delta = a.ldlt().solve(-jtr);
      Eigen::MatrixXcd eta = Eigen::MatrixXcd::Zero(spec.size, spec.size);
      for (std::size_t k = 0; k < d; ++k) eta += delta[static_cast<Eigen::Index>(k)] * basis.element(k);
      Eigen::MatrixXcd g_new = algebra_exp(eta) * g.matrix;
      if (spec.family == GroupFamily::SO) g_new = g_new.real().cast<std::complex<double>>();
      const Eigen::MatrixXcd x_new = g_new * x1 * g_new.adjoint();
      const Eigen::VectorXd r_new = residual(x_new);
      if (r_new.norm() < r.norm()) {
        g.matrix = g_new;
        x = x_new;
        r = r_new;
        lambda = std::max(lambda / 3.0, 1e-12);
        improved = true;
      } else {
        lambda *= 4.0;
      }
    }
    if (!improved) break;
  }
  if (!(r.norm() <= tolerance)) return std::nullopt;
  CriticalPoint cp;
  cp.group_element = g;
  cp.point = x;
  cp.value = real_pairing(spec, x, x2);
  cp.residual_gradient_norm = r.norm();
  return cp;
}

}  // namespace detail

/// Critical points of g -> pairing(Ad_g H1, H2) on G, found from
/// Haar-random starts, clustered by value and matched against the values
/// <w(h1), h2> over the Weyl group.
inline CriticalSearch find_critical_points(const CompactGroupSpec& spec, const CartanPoint& h1, const CartanPoint& h2,
                                           int n_starts, std::uint64_t seed, const SaddleOptions& options = {}) {
  const RootData rd = spec.root_data();
  check_point(rd, h1, "h1");
  check_point(rd, h2, "h2");
  detail::require_real(h1, "h1");
  detail::require_real(h2, "h2");
  require_regular(rd, h1, "h1");
  require_regular(rd, h2, "h2");
  const int minimum_starts = 20 * static_cast<int>(rd.weyl_order());
  if (n_starts < minimum_starts) {
    throw ArgumentError("n_starts must be at least 20 |W| = " + std::to_string(minimum_starts));
  }
  const AlgebraBasis basis = algebra_basis(spec);
  const Eigen::MatrixXcd x1 = embed_cartan(spec, h1);
  const Eigen::MatrixXcd x2 = embed_cartan(spec, h2);
  const double scale = std::max(1.0, h1.scale() * h2.scale());
  const double tolerance = 1e-12 * scale;

  CriticalSearch out;
  out.n_starts = n_starts;
  std::vector<Eigen::MatrixXcd> orbit;
  for (const auto& w : weyl_orbit(rd, h1)) {
    out.expected_values.push_back(rd.form(w, h2.coords).real());
    orbit.push_back(embed_cartan(spec, w));
  }

  std::vector<CriticalPoint> converged;
  for (int s = 0; s < n_starts; ++s) {
    CounterRng rng(seed, static_cast<std::uint64_t>(s));
    auto cp = detail::refine_critical_point(spec, basis, haar_sample(spec, rng), x1, x2, tolerance,
                                            options.max_iterations);
    if (cp) {
      converged.push_back(std::move(*cp));
    } else {
      ++out.unconverged;
    }
  }
  std::sort(converged.begin(), converged.end(),
            [](const CriticalPoint& a, const CriticalPoint& b) { return a.value < b.value; });

  for (std::size_t k = 0; k < converged.size();) {
    std::size_t end = k + 1;
    while (end < converged.size() && converged[end].value - converged[end - 1].value <= options.cluster_tolerance) {
      ++end;
    }
    std::size_t best = k;
    for (std::size_t j = k; j < end; ++j) {
      if (converged[j].residual_gradient_norm < converged[best].residual_gradient_norm) best = j;
    }
    CriticalPoint rep = converged[best];
    rep.multiplicity = static_cast<int>(end - k);

    double best_distance = std::numeric_limits<double>::infinity();
    for (std::size_t w = 0; w < orbit.size(); ++w) {
      if (std::abs(rep.value - out.expected_values[w]) > options.match_tolerance) continue;
      const double distance = (rep.point - orbit[w]).norm();
      if (distance < best_distance) {
        best_distance = distance;
        rep.matched_weyl = w;
        rep.matched_sign = rd.weyl[w].sign;
      }
    }
    if (!rep.matched_weyl) ++out.spurious;
    out.points.push_back(std::move(rep));
    k = end;
  }
  out.incomplete_cover = out.points.size() < rd.weyl_order();
  return out;
}

struct HessianCheck {
  double sqrt_det = 0;   // product over eigenvalue pairs of -H
  double predicted = 0;  // sign(w) Pi(h1) Pi(h2)
  double rel_error = 0;
  double extrapolated = 0;  // Richardson from steps h and h/2
  double extrapolated_rel_error = 0;
  double condition = 0;
  int measured_sign = 0;  // sign of sqrt_det / (Pi(h1) Pi(h2)), to compare with sign(w)
  std::vector<double> eigenvalues;  // of -H, ascending
};

namespace detail {

/// Finite-difference Hessian of x -> pairing(Ad_{exp(sum x_k B_k)} X, H2)
/// at x = 0 over the transverse basis B.
inline Eigen::MatrixXd transverse_hessian(const CompactGroupSpec& spec, const AlgebraBasis& basis,
                                          const Eigen::MatrixXcd& x, const Eigen::MatrixXcd& x2, double step) {
  const Eigen::Index m = static_cast<Eigen::Index>(basis.transverse.size());
  auto f = [&](const Eigen::VectorXd& c) {
    Eigen::MatrixXcd eta = Eigen::MatrixXcd::Zero(spec.size, spec.size);
    for (Eigen::Index k = 0; k < m; ++k)
      if (c[k] != 0.0) eta += c[k] * basis.transverse[static_cast<std::size_t>(k)];
    const Eigen::MatrixXcd g = algebra_exp(eta);
    return real_pairing(spec, g * x * g.adjoint(), x2);
  };
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m);
  const double f0 = f(zero);
  Eigen::MatrixXd h(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    Eigen::VectorXd e = zero;
    e[a] = step;
    h(a, a) = (f(e) - 2 * f0 + f(-e)) / (step * step);
    for (Eigen::Index b = a + 1; b < m; ++b) {
      Eigen::VectorXd pp = zero, pm = zero;
      pp[a] = step;
      pp[b] = step;
      pm[a] = step;
      pm[b] = -step;
      h(a, b) = h(b, a) = (f(pp) - f(pm) - f(-pm) + f(-pp)) / (4 * step * step);
    }
  }
  return h;
}

/// Pairs the eigenvalues of -H (each positive root contributes a repeated
/// eigenvalue alpha(w h1) alpha(h2)) and multiplies one per pair.
inline double paired_root_product(const Eigen::VectorXd& mu) {
  double product = 1.0;
  for (Eigen::Index k = 0; k + 1 < mu.size(); k += 2) {
    const double a = mu[k], b = mu[k + 1];
    if (std::abs(a - b) > 1e-3 * std::max(std::abs(a), std::abs(b))) {
      throw NumericalFailure("Hessian eigenvalues do not pair: " + std::to_string(a) + " vs " + std::to_string(b));
    }
    product *= (a + b) / 2;
  }
  return product;
}

}  // namespace detail

/// Compares sqrt(det(-H)) at a matched critical point with
/// sign(w) Pi(h1) Pi(h2). The sign is read from the paired eigenvalues of -H
/// (it is not taken from the match).
inline HessianCheck hessian_determinant_check(const CompactGroupSpec& spec, const CriticalPoint& cp,
                                              const CartanPoint& h1, const CartanPoint& h2, double step = 1e-4) {
  if (!cp.matched_weyl) throw ArgumentError("critical point is not matched to a Weyl element");
  const RootData rd = spec.root_data();
  const AlgebraBasis basis = algebra_basis(spec);
  const Eigen::MatrixXcd x2 = embed_cartan(spec, h2);

  auto evaluate = [&](double h, HessianCheck* record) {
    const Eigen::MatrixXd hess = detail::transverse_hessian(spec, basis, cp.point, x2, h);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(-hess);
    const Eigen::VectorXd mu = es.eigenvalues();
    const double largest = mu.cwiseAbs().maxCoeff();
    const double smallest = mu.cwiseAbs().minCoeff();
    const double condition = smallest > 0 ? largest / smallest : std::numeric_limits<double>::infinity();
    if (condition > 1e10) throw NumericalFailure("Hessian is ill-conditioned (condition number > 1e10)");
    if (record != nullptr) {
      record->condition = condition;
      record->eigenvalues.assign(mu.data(), mu.data() + mu.size());
    }
    return detail::paired_root_product(mu);
  };

  HessianCheck out;
  out.sqrt_det = evaluate(step, &out);
  const double half = evaluate(step / 2, nullptr);
  out.extrapolated = (4 * half - out.sqrt_det) / 3;
  const double pi_pi = discriminant_value(rd, h1).real() * discriminant_value(rd, h2).real();
  out.predicted = static_cast<double>(rd.weyl[*cp.matched_weyl].sign) * pi_pi;
  out.rel_error = std::abs(out.sqrt_det - out.predicted) / std::abs(out.predicted);
  out.extrapolated_rel_error = std::abs(out.extrapolated - out.predicted) / std::abs(out.predicted);
  out.measured_sign = out.sqrt_det / pi_pi > 0 ? 1 : -1;
  return out;
}

/// Leading stationary-phase term of the integral over G of
/// exp(-(1/t) <Ad_g h1, h2>), i.e. I(h1, -h2; t), with the normalization
/// constant folded in. Pi(-h2) = (-1)^r Pi(h2) supplies the sign.
inline Complex stationary_phase_estimate(const RootData& rd, const CartanPoint& h1, const CartanPoint& h2, double t) {
  if (!(t > 0) || !std::isfinite(t)) throw ArgumentError("t must be positive and finite");
  check_point(rd, h1, "h1");
  check_point(rd, h2, "h2");
  require_regular(rd, h1, "h1");
  require_regular(rd, h2, "h2");
  const int r = rd.root_count();
  const int transverse_dim = rd.algebra_dim() - rd.rank();
  const double constant = rd.normalization * std::pow(2 * std::numbers::pi, -transverse_dim / 2.0);
  std::vector<Complex> exponents;
  for (const auto& w : weyl_orbit(rd, h1)) exponents.push_back(-rd.form(w, h2.coords) / t);
  double ratio = 1.0;
  ScaledValue sum = signed_exponential_sum(rd, exponents, &ratio);
  if (ratio < detail::kCancellationLimit) {
    sum = detail::alternating_sum(rd, h1.coords, Eigen::VectorXcd(-h2.coords / t), rd.system.form_scale);
  }
  const Complex pi_pi = discriminant_value(rd, h1) * discriminant_value(rd, h2);
  const double sign = r % 2 == 0 ? 1.0 : -1.0;
  return sign * constant * std::pow(2 * std::numbers::pi * t, transverse_dim / 2.0) * sum.mantissa / pi_pi *
         std::exp(sum.log_scale);
}

inline nlohmann::json saddle_report_json(const CriticalSearch& search, const std::vector<HessianCheck>& checks) {
  nlohmann::json values = nlohmann::json::array(), signs = nlohmann::json::array(),
                 errors = nlohmann::json::array();
  for (const auto& p : search.points) {
    values.push_back(p.value);
    signs.push_back(p.matched_weyl ? nlohmann::json(p.matched_sign) : nlohmann::json(nullptr));
  }
  for (const auto& c : checks) errors.push_back(c.rel_error);
  return {{"critical_values", values},
          {"matched_weyl_signs", signs},
          {"hessian_rel_errors", errors},
          {"expected_values", search.expected_values},
          {"n_starts", search.n_starts},
          {"unconverged", search.unconverged},
          {"spurious", search.spurious},
          {"incomplete_cover", search.incomplete_cover}};
}

}  // namespace orbital
