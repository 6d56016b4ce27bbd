#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <nlohmann/json.hpp>

#include "closedform.hpp"
#include "errors.hpp"
#include "groups.hpp"
#include "rng.hpp"
#include "rootsys.hpp"

namespace orbital {

/// Gaussian heat kernel on the compact Lie algebra with base point x1.
struct HeatKernelParams {
  CompactGroupSpec spec;
  CartanPoint x1;
  double t = 1.0;
};

namespace detail {

inline void require_positive_time(double t, const char* label = "t") {
  if (!(t > 0.0) || !std::isfinite(t)) throw ArgumentError(std::string(label) + " must be positive and finite");
}

inline Eigen::VectorXd real_coords(const CartanPoint& h, const char* label) {
  if (h.coords.imag().cwiseAbs().maxCoeff() > 0.0) throw ArgumentError(std::string(label) + " must be real");
  return h.coords.real();
}

}  // namespace detail

/// (2 pi t)^(-dim/2) exp(-|x1 - x2|^2 / 2t) for algebra elements, with the
/// norm taken from the group pairing.
inline double heat_kernel_matrix(const CompactGroupSpec& spec, const Eigen::MatrixXcd& x1, const Eigen::MatrixXcd& x2,
                                 double t) {
  detail::require_positive_time(t);
  const Eigen::MatrixXcd d = x1 - x2;
  const double q = pairing(spec, d, d).real();
  return std::exp(-0.5 * spec.dimension() * std::log(2.0 * std::numbers::pi * t) - q / (2.0 * t));
}

inline double heat_kernel(const HeatKernelParams& p, const CartanPoint& x2) {
  detail::real_coords(p.x1, "x1");
  detail::real_coords(x2, "x2");
  return heat_kernel_matrix(p.spec, embed_cartan(p.spec, p.x1), embed_cartan(p.spec, x2), p.t);
}

/// Integral of the heat kernel over a `dim`-dimensional Euclidean space,
/// reduced to the radial integral.
inline double heat_kernel_total_mass(int dim, double t) {
  detail::require_positive_time(t);
  if (dim < 1) throw ArgumentError("dimension must be positive");
  const double d = dim;
  const double log_shell = std::log(2.0) + 0.5 * d * std::log(std::numbers::pi) - std::lgamma(0.5 * d);
  const double log_norm = -0.5 * d * std::log(2.0 * std::numbers::pi * t);
  auto radial = [&](double rho) {
    if (!(rho > 0.0)) return dim == 1 ? std::exp(log_shell + log_norm) : 0.0;
    return std::exp((d - 1.0) * std::log(rho) + log_shell + log_norm - rho * rho / (2.0 * t));
  };
  boost::math::quadrature::exp_sinh<double> integrator;
  return integrator.integrate(radial);
}

/// log of the G-average of K(Ad_g h1, h2; t), from the closed form of the
/// orbital integral. Inputs are real regular points.
inline double averaged_kernel_log(const RootData& rd, const CartanPoint& h1, const CartanPoint& h2, double t) {
  detail::require_positive_time(t);
  const Eigen::VectorXd x = detail::real_coords(h1, "h1");
  const Eigen::VectorXd y = detail::real_coords(h2, "h2");
  const ScaledValue s = hc_rhs_scaled(rd, h1, CartanPoint(y / t));
  const double m = s.mantissa.real();
  if (!(m > 0.0) || std::abs(s.mantissa.imag()) > 1e-10 * m) {
    throw NumericalFailure("orbital integral of a positive integrand evaluated to a non-positive value");
  }
  const double d = rd.algebra_dim();
  return -0.5 * d * std::log(2.0 * std::numbers::pi * t) - (rd.form(x, x) + rd.form(y, y)) / (2.0 * t) +
         std::log(m) + s.log_scale;
}

inline double averaged_kernel_closed(const RootData& rd, const CartanPoint& h1, const CartanPoint& h2, double t) {
  return std::exp(averaged_kernel_log(rd, h1, h2, t));
}

/// Monte Carlo average of heat_kernel(Ad_g h1, h2; t) over Haar-random g.
inline IntegralEstimate mc_averaged_kernel(const CompactGroupSpec& spec, const CartanPoint& h1, const CartanPoint& h2,
                                           double t, std::int64_t n_samples, std::uint64_t seed) {
  detail::require_positive_time(t);
  if (n_samples < 2) throw ArgumentError("need at least two samples");
  detail::real_coords(h1, "h1");
  detail::real_coords(h2, "h2");
  const Eigen::MatrixXcd x1 = embed_cartan(spec, h1);
  const Eigen::MatrixXcd x2 = embed_cartan(spec, h2);
  CounterRng rng(seed, 0);
  detail::Welford acc;
  for (std::int64_t k = 0; k < n_samples; ++k) {
    const Eigen::MatrixXcd& g = haar_sample(spec, rng).matrix;
    acc.add(heat_kernel_matrix(spec, g * x1 * g.adjoint(), x2, t));
  }
  IntegralEstimate e;
  e.mean = acc.mean;
  e.std_error = std::sqrt(acc.m2 / static_cast<double>(acc.n - 1) / static_cast<double>(acc.n));
  e.n_samples = acc.n;
  e.seed = seed;
  return e;
}

/// (2 pi)^((dim g - rank)/2) Pi(h1) Pi(h2) times the averaged kernel.
inline double v_function(const RootData& rd, const CartanPoint& h1, const CartanPoint& h2, double t) {
  const double log_k = averaged_kernel_log(rd, h1, h2, t);
  const double pp = discriminant_value(rd, h1).real() * discriminant_value(rd, h2).real();
  const double log_prefactor = 0.5 * (rd.algebra_dim() - rd.rank()) * std::log(2.0 * std::numbers::pi);
  return std::copysign(std::exp(log_prefactor + std::log(std::abs(pp)) + log_k), pp);
}

namespace detail {

/// sum_w sign(w) exp(-|w x - y|^2 / 2t) in extended precision with exact
/// Weyl matrices.
template <class Real>
ScaledValue extended_gaussian_sum(const RootData& rd, const Eigen::VectorXd& x_d, const Eigen::VectorXd& y_d,
                                  double t, double* cancellation) {
  const int n = rd.ambient_dim();
  const Real c = to_real<Real>(rd.system.form_scale) / (Real(2) * Real(t));
  std::vector<Real> exponents;
  exponents.reserve(rd.weyl_order());
  for (const auto& w : rd.weyl) {
    Real q(0);
    for (int i = 0; i < n; ++i) {
      Real wx(0);
      for (int j = 0; j < n; ++j) {
        const Rational& m = w.matrix(i, j);
        if (m != 0) wx += to_real<Real>(m) * Real(x_d[j]);
      }
      const Real diff = wx - Real(y_d[i]);
      q += diff * diff;
    }
    exponents.push_back(-c * q);
  }
  const Real max_e = *std::max_element(exponents.begin(), exponents.end());
  Real sum(0), total(0);
  for (std::size_t k = 0; k < exponents.size(); ++k) {
    const Real term = exp(exponents[k] - max_e);
    total += term;
    sum += Real(rd.weyl[k].sign) * term;
  }
  *cancellation = static_cast<double>(abs(sum) / total);
  return {Complex(static_cast<double>(sum), 0.0), static_cast<double>(max_e)};
}

inline ScaledValue gaussian_weyl_sum(const RootData& rd, const Eigen::VectorXd& x, const Eigen::VectorXd& y, double t) {
  std::vector<Complex> exponents;
  exponents.reserve(rd.weyl_order());
  for (const auto& m : rd.weyl_matrices) {
    const Eigen::VectorXd d = m * x - y;
    exponents.emplace_back(-rd.form(d, d) / (2.0 * t), 0.0);
  }
  double ratio = 1.0;
  ScaledValue s = signed_exponential_sum(rd, exponents, &ratio);
  if (ratio >= kCancellationLimit) return s;
  s = extended_gaussian_sum<Float50>(rd, x, y, t, &ratio);
  if (ratio >= 1e-30) return s;
  // Near a root hyperplane the sum tends to zero; the 100-digit value is
  // accurate in absolute terms even when it cancels completely.
  return extended_gaussian_sum<Float100>(rd, x, y, t, &ratio);
}

}  // namespace detail

/// C (2 pi t)^(-rank/2) sum_w sign(w) exp(-|w(h1) - h2|^2 / 2t), C = [[Pi,Pi]]/|W|:
/// the alternating sum of Cartan heat kernels centred on the Weyl orbit.
/// Defined everywhere, including on root hyperplanes.
inline double v_function_direct(const RootData& rd, const CartanPoint& h1, const CartanPoint& h2, double t) {
  detail::require_positive_time(t);
  check_point(rd, h1, "h1");
  check_point(rd, h2, "h2");
  const Eigen::VectorXd x = detail::real_coords(h1, "h1");
  const Eigen::VectorXd y = detail::real_coords(h2, "h2");
  const ScaledValue s = detail::gaussian_weyl_sum(rd, x, y, t);
  const double log_prefactor = std::log(rd.normalization) - 0.5 * rd.rank() * std::log(2.0 * std::numbers::pi * t);
  return s.mantissa.real() * std::exp(log_prefactor + s.log_scale);
}

/// Coordinates with respect to the orthonormal basis of the real Cartan
/// subspace (orthonormal for the invariant form).
inline Eigen::VectorXd to_cartan_coordinates(const RootData& rd, const Eigen::VectorXd& h) {
  return rd.form_scale * rd.orthonormal_basis * h;
}

inline CartanPoint from_cartan_coordinates(const RootData& rd, const Eigen::VectorXd& y) {
  return CartanPoint(Eigen::VectorXd(rd.orthonormal_basis.transpose() * y));
}

/// Weyl element w acting in orthonormal Cartan coordinates.
inline Eigen::MatrixXd weyl_in_cartan_coordinates(const RootData& rd, std::size_t w) {
  return rd.form_scale * rd.orthonormal_basis * rd.weyl_matrices[w] * rd.orthonormal_basis.transpose();
}

/// Evaluation grid in orthonormal Cartan coordinates. `points` nodes per axis
/// span each extent; h_step and t_step are the finite-difference steps.
struct GridSpec {
  int dims = 1;
  std::vector<std::pair<double, double>> extent;
  int points = 5;
  double h_step = 1e-2;
  double t_step = 1e-2;

  /// Stability bound of an explicit scheme with these steps.
  bool cfl_satisfied() const { return t_step <= 0.5 * h_step * h_step; }

  void validate() const {
    if (dims < 1 || static_cast<int>(extent.size()) != dims) throw ConfigurationError("grid extent must have dims axes");
    if (points < 1) throw ConfigurationError("grid needs at least one point per axis");
    if (!(h_step > 0.0) || !(t_step > 0.0)) throw ConfigurationError("grid steps must be positive");
    for (const auto& [lo, hi] : extent)
      if (!(hi >= lo)) throw ConfigurationError("grid extent has hi < lo");
  }

  std::vector<Eigen::VectorXd> nodes() const {
    validate();
    std::size_t total = 1;
    for (int i = 0; i < dims; ++i) total *= static_cast<std::size_t>(points);
    std::vector<Eigen::VectorXd> out;
    out.reserve(total);
    for (std::size_t k = 0; k < total; ++k) {
      Eigen::VectorXd y(dims);
      std::size_t rem = k;
      for (int i = 0; i < dims; ++i) {
        const int j = static_cast<int>(rem % static_cast<std::size_t>(points));
        rem /= static_cast<std::size_t>(points);
        const auto [lo, hi] = extent[static_cast<std::size_t>(i)];
        y[i] = points == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * j / (points - 1);
      }
      out.push_back(std::move(y));
    }
    return out;
  }
};

/// Grid centred on `center` with half-width `half_width` on every axis.
inline GridSpec grid_around(const Eigen::VectorXd& center, double half_width, int points, double h_step,
                            double t_step) {
  GridSpec g;
  g.dims = static_cast<int>(center.size());
  for (Eigen::Index i = 0; i < center.size(); ++i) g.extent.emplace_back(center[i] - half_width, center[i] + half_width);
  g.points = points;
  g.h_step = h_step;
  g.t_step = t_step;
  return g;
}

struct ResidualReport {
  std::string op;
  std::vector<double> steps;         // spatial step per level
  std::vector<double> time_steps;    // time step per level
  std::vector<double> max_residual;  // per level
  std::vector<double> relative_residual;
  double halving_ratio = 0.0;        // max_residual[0] / max_residual[1]
  double richardson_residual = 0.0;  // max |(4 r(h/2) - r(h)) / 3| over the grid
  bool cfl_satisfied = false;
  nlohmann::json extra = nlohmann::json::object();
};

namespace detail {

/// Every root keeps a strict sign on the box [lo - pad, hi + pad]; a linear
/// function does so iff it has one sign on all corners.
inline void require_box_regular(const RootData& rd, const GridSpec& grid, double pad, double margin) {
  const int d = grid.dims;
  for (int i = 0; i < rd.root_count(); ++i) {
    double lo = INFINITY, hi = -INFINITY;
    for (int c = 0; c < (1 << d); ++c) {
      Eigen::VectorXd y(d);
      for (int k = 0; k < d; ++k) {
        const auto [a, b] = grid.extent[static_cast<std::size_t>(k)];
        y[k] = (c >> k) & 1 ? b + pad : a - pad;
      }
      const double v = rd.roots.row(i).dot(rd.orthonormal_basis.transpose() * y);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (lo <= margin && hi >= -margin) {
      throw ConfigurationError("grid touches the root hyperplane " + root_name(rd.system.positive_roots[i]) + " = 0");
    }
  }
}

/// Central-difference stencil of a scalar field f(y, t) at one node.
struct Stencil {
  double center = 0.0;
  double dt = 0.0;                // (f(t+) - f(t-)) / 2 dt
  Eigen::VectorXd grad;           // central first differences
  double laplacian = 0.0;         // sum of central second differences
};

template <class Field>
Stencil stencil(const Field& f, const Eigen::VectorXd& y, double t, double h, double dt) {
  Stencil s;
  s.center = f(y, t);
  s.dt = (f(y, t + dt) - f(y, t - dt)) / (2.0 * dt);
  s.grad.resize(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    Eigen::VectorXd yp = y, ym = y;
    yp[i] += h;
    ym[i] -= h;
    const double fp = f(yp, t), fm = f(ym, t);
    s.grad[i] = (fp - fm) / (2.0 * h);
    s.laplacian += (fp - 2.0 * s.center + fm) / (h * h);
  }
  return s;
}

inline std::vector<double> level_scales(const std::vector<double>& scales) {
  if (scales.size() < 2) throw ConfigurationError("need at least two step levels");
  for (double s : scales)
    if (!(s > 0.0)) throw ConfigurationError("step scales must be positive");
  return scales;
}

inline double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline void finish_report(ResidualReport& r, const std::vector<std::vector<double>>& residuals) {
  for (const auto& level : residuals) r.max_residual.push_back(max_abs(level));
  r.halving_ratio = r.max_residual[0] / r.max_residual[1];
  double rich = 0.0;
  for (std::size_t k = 0; k < residuals[0].size(); ++k)
    rich = std::max(rich, std::abs((4.0 * residuals[1][k] - residuals[0][k]) / 3.0));
  r.richardson_residual = rich;
}

}  // namespace detail

/// Finite-difference residual of d/dt V - (1/2) Laplacian V on the Cartan
/// subspace, with V = V(h1, h2; t) as a function of (h2, t) on the grid.
/// Each entry of `scales` multiplies (h_step, t_step) to give one level.
///
/// The control field is the averaged kernel times the constant
/// Pi(h1) Pi(h2_center) and normalisation, so it has the magnitude of V but no
/// Pi(h2) factor; its residual does not vanish as the steps shrink.
inline ResidualReport radial_heat_residual(const RootData& rd, const CartanPoint& h1_fixed, const GridSpec& grid,
                                           double t0, const std::vector<double>& scales = {1.0, 0.5}) {
  detail::require_positive_time(t0, "t0");
  grid.validate();
  if (grid.dims != rd.rank()) throw ConfigurationError("grid dims must equal the rank");
  check_point(rd, h1_fixed, "h1");
  detail::real_coords(h1_fixed, "h1");
  require_regular(rd, h1_fixed, "h1");
  const auto levels = detail::level_scales(scales);
  const auto nodes = grid.nodes();

  Eigen::VectorXd center = Eigen::VectorXd::Zero(grid.dims);
  for (int i = 0; i < grid.dims; ++i) center[i] = 0.5 * (grid.extent[i].first + grid.extent[i].second);
  const double pi1 = discriminant_value(rd, h1_fixed).real();
  const double pi_c = discriminant_value(rd, from_cartan_coordinates(rd, center)).real();
  const double margin = 1e-9 * std::max(1.0, h1_fixed.scale());
  const double max_scale = *std::max_element(levels.begin(), levels.end());
  detail::require_box_regular(rd, grid, max_scale * grid.h_step, margin);
  for (double s : levels)
    if (t0 - s * grid.t_step <= 0.0) throw ConfigurationError("t_step too large for t0");

  auto v = [&](const Eigen::VectorXd& y, double t) { return v_function(rd, h1_fixed, from_cartan_coordinates(rd, y), t); };
  const double control_scale =
      std::exp(0.5 * (rd.algebra_dim() - rd.rank()) * std::log(2.0 * std::numbers::pi)) * pi1 * pi_c;
  auto control = [&](const Eigen::VectorXd& y, double t) {
    return control_scale * averaged_kernel_closed(rd, h1_fixed, from_cartan_coordinates(rd, y), t);
  };

  ResidualReport r;
  r.op = "radial_heat_residual";
  r.cfl_satisfied = grid.cfl_satisfied();
  std::vector<std::vector<double>> res;
  std::vector<double> control_max, control_rel;
  for (double s : levels) {
    const double h = s * grid.h_step, dt = s * grid.t_step;
    r.steps.push_back(h);
    r.time_steps.push_back(dt);
    std::vector<double> level, control_level;
    double field = 0.0, control_field = 0.0;
    for (const auto& y : nodes) {
      const auto sv = detail::stencil(v, y, t0, h, dt);
      level.push_back(sv.dt - 0.5 * sv.laplacian);
      field = std::max(field, std::abs(sv.center));
      const auto sc = detail::stencil(control, y, t0, h, dt);
      control_level.push_back(sc.dt - 0.5 * sc.laplacian);
      control_field = std::max(control_field, std::abs(sc.center));
    }
    r.relative_residual.push_back(detail::max_abs(level) / field);
    control_max.push_back(detail::max_abs(control_level));
    control_rel.push_back(control_max.back() / control_field);
    res.push_back(std::move(level));
  }
  detail::finish_report(r, res);
  r.extra["control_max_residual"] = control_max;
  r.extra["control_relative_residual"] = control_rel;
  r.extra["control_halving_ratio"] = control_max[0] / control_max[1];
  r.extra["control_to_v_ratio_finest"] = control_rel.back() / r.relative_residual.back();
  r.extra["t0"] = t0;
  return r;
}

/// Finite-difference check of the evolution equation for
/// W = N^-2 log Ktilde(sqrt(N) h1, sqrt(N) h2; t):
///   2 W_t = N^-3 (Lap Pi)/Pi + 2 N^-1 (grad Pi/Pi).grad W + N^-1 Lap W + N |grad W|^2
/// with Pi = Pi(h2) and derivatives in h2. (Lap Pi)/Pi and grad Pi/Pi are taken
/// from differences of log|Pi| as Lap log|Pi| + |grad log|Pi||^2 and
/// grad log|Pi|, so that the substitution W = S - N^-2 log|Pi| is an exact
/// rearrangement of the discrete residual. The S-form is
///   2 S_t = N |grad S|^2 - N^-3 |grad log Pi|^2 + N^-3 (Lap Pi)/Pi + N^-1 Lap W
/// whose last term is the one dropped in the large-N heuristic.
inline ResidualReport cm_pde_residual(const RootData& rd, const CartanPoint& h1, const GridSpec& grid, double t0,
                                      int n_scaling, const std::vector<double>& scales = {1.0, 0.5}) {
  detail::require_positive_time(t0, "t0");
  if (n_scaling < 1) throw ConfigurationError("n_scaling must be at least 1");
  grid.validate();
  if (grid.dims != rd.rank()) throw ConfigurationError("grid dims must equal the rank");
  check_point(rd, h1, "h1");
  const Eigen::VectorXd x1 = detail::real_coords(h1, "h1");
  require_regular(rd, h1, "h1");
  const auto levels = detail::level_scales(scales);
  const auto nodes = grid.nodes();
  const double margin = 1e-9 * std::max(1.0, h1.scale());
  for (double s : levels)
    if (t0 - s * grid.t_step <= 0.0) throw ConfigurationError("t_step too large for t0");
  const double max_scale = *std::max_element(levels.begin(), levels.end());
  detail::require_box_regular(rd, grid, max_scale * grid.h_step, margin);

  const double n = n_scaling;
  const double root_n = std::sqrt(n);
  const CartanPoint h1_scaled(Eigen::VectorXd(root_n * x1));
  auto w_field = [&](const Eigen::VectorXd& y, double t) {
    return averaged_kernel_log(rd, h1_scaled, from_cartan_coordinates(rd, root_n * y), t) / (n * n);
  };
  auto log_pi = [&](const Eigen::VectorXd& y, double) {
    return std::log(std::abs(discriminant_value(rd, from_cartan_coordinates(rd, y)).real()));
  };

  ResidualReport r;
  r.op = "cm_pde_residual";
  r.cfl_satisfied = grid.cfl_satisfied();
  std::vector<std::vector<double>> res22, res23;
  std::vector<double> max23, max23_truncated, max_dropped, max_harmonic, max_diff;
  for (double s : levels) {
    const double h = s * grid.h_step, dt = s * grid.t_step;
    r.steps.push_back(h);
    r.time_steps.push_back(dt);
    std::vector<double> l22, l23;
    double truncated = 0.0, dropped = 0.0, harmonic = 0.0, diff = 0.0;
    for (const auto& y : nodes) {
      const auto w = detail::stencil(w_field, y, t0, h, dt);
      const auto lp = detail::stencil(log_pi, y, t0, h, dt);
      // S = W + N^-2 log|Pi|, substituted in the discrete derivatives.
      detail::Stencil sf;
      sf.center = w.center + lp.center / (n * n);
      sf.dt = w.dt;
      sf.grad = w.grad + lp.grad / (n * n);
      sf.laplacian = w.laplacian + lp.laplacian / (n * n);
      const Eigen::VectorXd& g = lp.grad;
      const double lap_pi_over_pi = lp.laplacian + g.squaredNorm();
      const double rhs22 = lap_pi_over_pi / (n * n * n) + 2.0 / n * g.dot(w.grad) + w.laplacian / n +
                           n * w.grad.squaredNorm();
      const double r22 = 2.0 * w.dt - rhs22;

      const double dropped_term = (sf.laplacian - lp.laplacian / (n * n)) / n;
      const double hj = n * sf.grad.squaredNorm() - g.squaredNorm() / (n * n * n);
      const double harmonic_term = lap_pi_over_pi / (n * n * n);
      const double r23_truncated = 2.0 * sf.dt - hj;
      const double r23 = r23_truncated - harmonic_term - dropped_term;

      l22.push_back(r22);
      l23.push_back(r23);
      truncated = std::max(truncated, std::abs(r23_truncated));
      dropped = std::max(dropped, std::abs(dropped_term));
      harmonic = std::max(harmonic, std::abs(harmonic_term));
      diff = std::max(diff, std::abs(r22 - r23));
    }
    max23.push_back(detail::max_abs(l23));
    max23_truncated.push_back(truncated);
    max_dropped.push_back(dropped);
    max_harmonic.push_back(harmonic);
    max_diff.push_back(diff);
    r.relative_residual.push_back(detail::max_abs(l22));
    res22.push_back(std::move(l22));
    res23.push_back(std::move(l23));
  }
  detail::finish_report(r, res22);
  // W is a logarithm, so the absolute residual is already scale free.
  r.relative_residual = r.max_residual;
  r.extra["n_scaling"] = n_scaling;
  r.extra["t0"] = t0;
  r.extra["s_form_max_residual"] = max23;
  r.extra["s_form_truncated_max_residual"] = max23_truncated;
  r.extra["dropped_term_max"] = max_dropped;
  r.extra["harmonic_term_max"] = max_harmonic;
  r.extra["form_difference_max"] = max_diff;
  return r;
}

/// Smooth test function on the Cartan subspace, in orthonormal coordinates,
/// vanishing (numerically) outside the box [lower, upper].
struct TestFunction {
  std::string name;
  std::function<double(const Eigen::VectorXd&)> f;
  Eigen::VectorXd lower, upper;

  double operator()(const Eigen::VectorXd& y) const { return f(y); }
};

/// exp(-|y - c|^2 / 2 sigma^2), truncated at 10 sigma (below 2e-22).
inline TestFunction gaussian_bump(const Eigen::VectorXd& center, double sigma) {
  if (!(sigma > 0.0)) throw ArgumentError("sigma must be positive");
  TestFunction tf;
  tf.name = "gaussian";
  tf.lower = center.array() - 10.0 * sigma;
  tf.upper = center.array() + 10.0 * sigma;
  tf.f = [center, sigma](const Eigen::VectorXd& y) {
    return std::exp(-(y - center).squaredNorm() / (2.0 * sigma * sigma));
  };
  return tf;
}

/// exp(-1 / (1 - |y - c|^2 / R^2)) inside the ball of radius R, zero outside.
inline TestFunction compact_bump(const Eigen::VectorXd& center, double radius) {
  if (!(radius > 0.0)) throw ArgumentError("radius must be positive");
  TestFunction tf;
  tf.name = "compact";
  tf.lower = center.array() - radius;
  tf.upper = center.array() + radius;
  tf.f = [center, radius](const Eigen::VectorXd& y) {
    const double u = (y - center).squaredNorm() / (radius * radius);
    return u < 1.0 ? std::exp(-1.0 / (1.0 - u)) : 0.0;
  };
  return tf;
}

/// sum_w sign(w) f(w y); its box is the bounding box of the W-images.
inline TestFunction antisymmetrize(const RootData& rd, const TestFunction& base) {
  std::vector<Eigen::MatrixXd> mats;
  std::vector<double> signs;
  TestFunction tf;
  tf.name = "antisymmetrized_" + base.name;
  tf.lower = base.lower;
  tf.upper = base.upper;
  const Eigen::Index d = base.lower.size();
  for (std::size_t k = 0; k < rd.weyl_order(); ++k) {
    mats.push_back(weyl_in_cartan_coordinates(rd, k));
    signs.push_back(rd.weyl[k].sign);
    // w^-1 maps the box corners of the base support to the support of f(w .).
    const Eigen::MatrixXd inv = mats.back().transpose();
    for (Eigen::Index c = 0; c < (Eigen::Index{1} << d); ++c) {
      Eigen::VectorXd corner(d);
      for (Eigen::Index i = 0; i < d; ++i) corner[i] = (c >> i) & 1 ? base.upper[i] : base.lower[i];
      const Eigen::VectorXd img = inv * corner;
      tf.lower = tf.lower.cwiseMin(img);
      tf.upper = tf.upper.cwiseMax(img);
    }
  }
  tf.f = [mats, signs, f = base.f](const Eigen::VectorXd& y) {
    double s = 0.0;
    for (std::size_t k = 0; k < mats.size(); ++k) s += signs[k] * f(mats[k] * y);
    return s;
  };
  return tf;
}

struct QuadratureResult {
  double value = 0.0;
  int points_per_axis = 0;
  std::int64_t evaluations = 0;
};

/// Tensor-product trapezoid over [lower, upper], doubling the resolution from
/// an initial spacing of at most `initial_step` until successive estimates
/// differ by less than `tolerance`.
inline QuadratureResult trapezoid_refine(const std::function<double(const Eigen::VectorXd&)>& f,
                                         const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                         double initial_step, double tolerance = 1e-7,
                                         std::int64_t max_evaluations = 20'000'000) {
  const Eigen::Index d = lower.size();
  const double width = (upper - lower).maxCoeff();
  int intervals = std::max(8, static_cast<int>(std::ceil(width / initial_step)));
  QuadratureResult out;
  double previous = std::numeric_limits<double>::quiet_NaN();
  while (true) {
    std::int64_t total = 1;
    for (Eigen::Index i = 0; i < d; ++i) total *= intervals + 1;
    if (out.evaluations + total > max_evaluations) {
      throw ResolutionError("trapezoid quadrature did not reach tolerance within " +
                            std::to_string(max_evaluations) + " evaluations");
    }
    const Eigen::VectorXd step = (upper - lower) / intervals;
    detail::CompensatedSum sum;
    for (std::int64_t k = 0; k < total; ++k) {
      Eigen::VectorXd y(d);
      double weight = 1.0;
      std::int64_t rem = k;
      for (Eigen::Index i = 0; i < d; ++i) {
        const int j = static_cast<int>(rem % (intervals + 1));
        rem /= intervals + 1;
        y[i] = lower[i] + j * step[i];
        weight *= step[i] * ((j == 0 || j == intervals) ? 0.5 : 1.0);
      }
      sum.add(weight * f(y));
    }
    out.evaluations += total;
    const double value = sum.value().real();
    out.value = value;
    out.points_per_axis = intervals + 1;
    if (std::abs(value - previous) < tolerance) return out;
    previous = value;
    intervals *= 2;
  }
}

struct BoundaryLevel {
  double t = 0.0;
  double estimate = 0.0;
  double abs_error = 0.0;
  double rel_error = 0.0;
  int points_per_axis = 0;
};

struct BoundaryReport {
  std::string test_function;
  double target = 0.0;  // C sum_w sign(w) f(w(h1))
  std::vector<BoundaryLevel> levels;
};

/// Integrates V(h1, .; t) f over the Cartan subspace for each t and compares
/// with C sum_w sign(w) f(w(h1)). V is evaluated as the alternating Gaussian
/// sum, which is smooth across root hyperplanes.
inline BoundaryReport boundary_delta_check(const RootData& rd, const CartanPoint& h1, const TestFunction& test_fn,
                                           const std::vector<double>& t_sequence, double tolerance = 1e-7) {
  check_point(rd, h1, "h1");
  const Eigen::VectorXd x = detail::real_coords(h1, "h1");
  require_regular(rd, h1, "h1");
  if (test_fn.lower.size() != rd.rank()) throw ArgumentError("test function dimension must equal the rank");
  if (t_sequence.empty()) throw ArgumentError("t_sequence is empty");
  for (std::size_t k = 0; k < t_sequence.size(); ++k) {
    detail::require_positive_time(t_sequence[k], "t_sequence entry");
    if (k > 0 && !(t_sequence[k] < t_sequence[k - 1])) throw ArgumentError("t_sequence must be decreasing");
  }
  BoundaryReport rep;
  rep.test_function = test_fn.name;
  const Eigen::VectorXd y1 = to_cartan_coordinates(rd, x);
  detail::CompensatedSum target;
  for (std::size_t k = 0; k < rd.weyl_order(); ++k)
    target.add(rd.weyl[k].sign * test_fn(weyl_in_cartan_coordinates(rd, k) * y1));
  rep.target = rd.normalization * target.value().real();

  for (double t : t_sequence) {
    auto integrand = [&](const Eigen::VectorXd& y) {
      const double fy = test_fn(y);
      if (fy == 0.0) return 0.0;
      return fy * v_function_direct(rd, h1, from_cartan_coordinates(rd, y), t);
    };
    const auto q = trapezoid_refine(integrand, test_fn.lower, test_fn.upper, 0.5 * std::sqrt(t), tolerance);
    BoundaryLevel lv;
    lv.t = t;
    lv.estimate = q.value;
    lv.abs_error = std::abs(q.value - rep.target);
    lv.rel_error = rep.target == 0.0 ? lv.abs_error : lv.abs_error / std::abs(rep.target);
    lv.points_per_axis = q.points_per_axis;
    rep.levels.push_back(lv);
  }
  return rep;
}

struct SemigroupCheck {
  double convolved = 0.0;
  double direct = 0.0;
  double abs_error = 0.0;
};

/// Convolves V(h1, .; s) with the Cartan heat kernel for time t and compares
/// with V(h1, h2; s + t).
inline SemigroupCheck heat_semigroup_check(const RootData& rd, const CartanPoint& h1, const CartanPoint& h2, double s,
                                           double t, double tolerance = 1e-9) {
  detail::require_positive_time(s, "s");
  detail::require_positive_time(t);
  check_point(rd, h2, "h2");
  const Eigen::VectorXd y = to_cartan_coordinates(rd, detail::real_coords(h2, "h2"));
  const int n = rd.rank();
  const double log_norm = -0.5 * n * std::log(2.0 * std::numbers::pi * t);
  auto integrand = [&](const Eigen::VectorXd& z) {
    return std::exp(log_norm - (y - z).squaredNorm() / (2.0 * t)) *
           v_function_direct(rd, h1, from_cartan_coordinates(rd, z), s);
  };
  const double half = 12.0 * std::sqrt(t);
  const Eigen::VectorXd lower = y.array() - half, upper = y.array() + half;
  SemigroupCheck c;
  c.convolved = trapezoid_refine(integrand, lower, upper, 0.5 * std::sqrt(std::min(s, t)), tolerance).value;
  c.direct = v_function_direct(rd, h1, h2, s + t);
  c.abs_error = std::abs(c.convolved - c.direct);
  return c;
}

inline nlohmann::json residual_report_json(const ResidualReport& r) {
  nlohmann::json j;
  j["op"] = r.op;
  j["steps"] = r.steps;
  j["time_steps"] = r.time_steps;
  j["max_residual"] = r.max_residual;
  j["relative_residual"] = r.relative_residual;
  j["halving_ratio"] = r.halving_ratio;
  j["richardson_residual"] = r.richardson_residual;
  j["cfl_satisfied"] = r.cfl_satisfied;
  for (const auto& [k, v] : r.extra.items()) j[k] = v;
  return j;
}

inline nlohmann::json boundary_report_json(const BoundaryReport& r) {
  nlohmann::json j;
  j["op"] = "boundary_delta_check";
  j["test_function"] = r.test_function;
  j["target"] = r.target;
  j["levels"] = nlohmann::json::array();
  for (const auto& lv : r.levels) {
    j["levels"].push_back({{"t", lv.t},
                           {"estimate", lv.estimate},
                           {"abs_error", lv.abs_error},
                           {"rel_error", lv.rel_error},
                           {"points_per_axis", lv.points_per_axis}});
  }
  return j;
}

/// CSV dump of V(h1, h2; t) over the grid nodes: y_1..y_dims, V.
inline std::string v_grid_csv(const RootData& rd, const CartanPoint& h1, const GridSpec& grid, double t) {
  std::ostringstream out;
  out.precision(17);
  for (int i = 0; i < grid.dims; ++i) out << "y" << (i + 1) << ",";
  out << "V\n";
  for (const auto& y : grid.nodes()) {
    for (Eigen::Index i = 0; i < y.size(); ++i) out << y[i] << ",";
    out << v_function(rd, h1, from_cartan_coordinates(rd, y), t) << "\n";
  }
  return out.str();
}

}  // namespace orbital
