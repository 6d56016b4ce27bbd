#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "orbital/heatflow.hpp"

using namespace orbital;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// Regular point with all root values at least `gap` in absolute value.
CartanPoint random_regular(const RootData& rd, std::mt19937_64& gen, double gap = 0.3) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  while (true) {
    Eigen::VectorXd y(rd.rank());
    for (int i = 0; i < rd.rank(); ++i) y[i] = u(gen);
    CartanPoint h = from_cartan_coordinates(rd, y);
    if ((rd.roots * h.coords.real()).cwiseAbs().minCoeff() >= gap) return h;
  }
}

}  // namespace

TEST(HeatKernel, DiagonalValue) {
  const auto spec = make_group_spec(GroupFamily::SU, 3);
  HeatKernelParams p{spec, CartanPoint{0.5, -0.2, -0.3}, 0.7};
  EXPECT_NEAR(heat_kernel(p, p.x1), std::pow(2.0 * std::numbers::pi * 0.7, -4.0), 1e-15);
}

TEST(HeatKernel, MatchesFormOnCartan) {
  const auto spec = make_group_spec(GroupFamily::SO, 5, Rational(3, 2));
  const auto rd = make_root_data(Family::B, 2, Rational(3, 2));
  const CartanPoint x1{0.4, -1.1}, x2{0.9, 0.3};
  const double t = 0.6;
  const Eigen::VectorXd d = (x1.coords - x2.coords).real();
  const double expected = std::pow(2.0 * std::numbers::pi * t, -5.0) * std::exp(-1.5 * d.squaredNorm() / (2.0 * t));
  EXPECT_LT(rel(heat_kernel({spec, x1, t}, x2), expected), 1e-13);
  EXPECT_EQ(rd.algebra_dim(), spec.dimension());
}

TEST(HeatKernel, Symmetric) {
  const auto spec = make_group_spec(GroupFamily::USp, 4);
  const CartanPoint a{0.3, 1.2}, b{-0.8, 0.1};
  EXPECT_DOUBLE_EQ(heat_kernel({spec, a, 0.4}, b), heat_kernel({spec, b, 0.4}, a));
}

TEST(HeatKernel, TotalMassIsOne) {
  for (int dim : {1, 3, 8, 10, 21}) {
    for (double t : {0.05, 1.0, 7.0}) EXPECT_NEAR(heat_kernel_total_mass(dim, t), 1.0, 1e-3) << dim << " " << t;
  }
}

TEST(HeatKernel, RejectsNonPositiveTime) {
  const auto spec = make_group_spec(GroupFamily::SU, 2);
  EXPECT_THROW(heat_kernel({spec, CartanPoint{1, -1}, 0.0}, CartanPoint{1, -1}), ArgumentError);
  EXPECT_THROW(heat_kernel_total_mass(3, -1.0), ArgumentError);
}

TEST(AveragedKernel, MatchesMonteCarloSU2) {
  const auto spec = make_group_spec(GroupFamily::SU, 2);
  const auto rd = make_root_data(Family::A, 1);
  const CartanPoint h1{0.6, -0.6}, h2{0.4, -0.4};
  const double closed = averaged_kernel_closed(rd, h1, h2, 1.0);
  const auto mc = mc_averaged_kernel(spec, h1, h2, 1.0, 200000, 7);
  EXPECT_LT(std::abs(mc.mean.real() - closed), 3.0 * mc.std_error);
  EXPECT_LT(mc.std_error, 0.01 * closed);
}

TEST(AveragedKernel, MatchesMonteCarloSU3) {
  const auto spec = make_group_spec(GroupFamily::SU, 3);
  const auto rd = make_root_data(Family::A, 2);
  const CartanPoint h1{0.7, 0.1, -0.8}, h2{0.5, -0.1, -0.4};
  const double closed = averaged_kernel_closed(rd, h1, h2, 0.8);
  const auto mc = mc_averaged_kernel(spec, h1, h2, 0.8, 100000, 11);
  EXPECT_LT(std::abs(mc.mean.real() - closed), 3.0 * mc.std_error);
}

TEST(AveragedKernel, SymmetricInArguments) {
  const auto rd = make_root_data(Family::C, 3);
  const CartanPoint h1{0.3, 0.9, 1.6}, h2{-0.2, 0.5, 1.1};
  EXPECT_LT(rel(averaged_kernel_closed(rd, h1, h2, 0.5), averaged_kernel_closed(rd, h2, h1, 0.5)), 1e-12);
}

TEST(AveragedKernel, LargeTimeLimit) {
  const auto rd = make_root_data(Family::A, 2);
  const CartanPoint h1{1.0, 0.2, -1.2}, h2{0.4, 0.1, -0.5};
  const double t = 1e6;
  EXPECT_NEAR(averaged_kernel_closed(rd, h1, h2, t) / std::pow(2.0 * std::numbers::pi * t, -4.0), 1.0, 1e-5);
}

TEST(AveragedKernel, RejectsDegenerateAndComplex) {
  const auto rd = make_root_data(Family::A, 1);
  EXPECT_THROW(averaged_kernel_closed(rd, CartanPoint{0, 0}, CartanPoint{1, -1}, 1.0), DegenerateInputError);
  CartanPoint z{1, -1};
  z.coords[0] += Complex(0, 0.1);
  z.coords[1] -= Complex(0, 0.1);
  EXPECT_THROW(averaged_kernel_closed(rd, z, CartanPoint{1, -1}, 1.0), ArgumentError);
}

TEST(CartanCoordinates, RoundTripAndIsometry) {
  for (const auto& [f, n] : std::vector<std::pair<Family, int>>{{Family::A, 1}, {Family::A, 3}, {Family::G2, 2},
                                                                 {Family::B, 2}}) {
    const auto rd = make_root_data(f, n, Rational(5, 2));
    std::mt19937_64 gen(3);
    const CartanPoint h = random_regular(rd, gen);
    const Eigen::VectorXd x = h.coords.real();
    const Eigen::VectorXd y = to_cartan_coordinates(rd, x);
    EXPECT_NEAR((from_cartan_coordinates(rd, y).coords.real() - x).norm(), 0.0, 1e-12);
    EXPECT_NEAR(y.squaredNorm(), rd.form(x, x), 1e-12);
    for (std::size_t k = 0; k < rd.weyl_order(); ++k) {
      const Eigen::MatrixXd m = weyl_in_cartan_coordinates(rd, k);
      EXPECT_NEAR((m.transpose() * m - Eigen::MatrixXd::Identity(n, n)).norm(), 0.0, 1e-12);
      EXPECT_NEAR(m.determinant(), rd.weyl[k].sign, 1e-12);
    }
  }
}

TEST(VFunction, EqualsAlternatingGaussianSum) {
  for (int rank : {1, 2}) {
    const auto rd = make_root_data(Family::A, rank);
    std::mt19937_64 gen(100 + rank);
    std::uniform_real_distribution<double> tdist(0.3, 3.0);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      const CartanPoint h1 = random_regular(rd, gen), h2 = random_regular(rd, gen);
      const double t = tdist(gen);
      worst = std::max(worst, rel(v_function(rd, h1, h2, t), v_function_direct(rd, h1, h2, t)));
    }
    EXPECT_LT(worst, 1e-12) << "rank " << rank;
  }
}

TEST(VFunction, EqualsAlternatingGaussianSumOtherFamilies) {
  for (const auto& [f, n] : std::vector<std::pair<Family, int>>{{Family::B, 2}, {Family::C, 3}, {Family::D, 4},
                                                                 {Family::G2, 2}}) {
    const auto rd = make_root_data(f, n, Rational(2, 3));
    std::mt19937_64 gen(9);
    for (int k = 0; k < 10; ++k) {
      const CartanPoint h1 = random_regular(rd, gen), h2 = random_regular(rd, gen);
      EXPECT_LT(rel(v_function(rd, h1, h2, 0.7), v_function_direct(rd, h1, h2, 0.7)), 1e-12) << to_string(f) << n;
    }
  }
}

TEST(VFunction, SkewUnderWeylGroup) {
  const auto rd = make_root_data(Family::B, 2);
  const CartanPoint h1{0.4, 1.3}, h2{0.2, 0.9};
  const double v = v_function(rd, h1, h2, 0.9);
  for (std::size_t k = 0; k < rd.weyl_order(); ++k) {
    const CartanPoint wh1(Eigen::VectorXd(rd.weyl_matrices[k] * h1.coords.real()));
    EXPECT_LT(rel(v_function(rd, wh1, h2, 0.9), rd.weyl[k].sign * v), 1e-12);
  }
}

TEST(VFunction, PositiveInSameChamber) {
  const auto rd = make_root_data(Family::A, 3);
  const CartanPoint h1{1.5, 0.5, -0.5, -1.5}, h2{1.0, 0.6, -0.3, -1.3};
  for (double t : {1.0, 10.0, 100.0}) EXPECT_GT(v_function(rd, h1, h2, t), 0.0);
}

TEST(VFunction, DirectRouteVanishesOnWall) {
  const auto rd = make_root_data(Family::A, 1);
  EXPECT_EQ(v_function_direct(rd, CartanPoint{0.7, -0.7}, CartanPoint{0.0, 0.0}, 0.5), 0.0);
  EXPECT_THROW(v_function(rd, CartanPoint{0.7, -0.7}, CartanPoint{0.0, 0.0}, 0.5), DegenerateInputError);
}

TEST(RadialResidual, SecondOrderConvergenceSU2) {
  const auto rd = make_root_data(Family::A, 1);
  const CartanPoint h1{0.8, -0.8};
  const auto grid = grid_around(vec({1.2}), 0.4, 5, 1e-2, 1e-2);
  const auto r = radial_heat_residual(rd, h1, grid, 1.0);
  EXPECT_GE(r.halving_ratio, 3.5);
  EXPECT_LE(r.halving_ratio, 4.5);
  EXPECT_LT(r.richardson_residual, 0.05 * r.max_residual[1]);
  EXPECT_FALSE(r.cfl_satisfied);
  // The field without Pi(h2) does not solve the Cartan heat equation.
  EXPECT_GE(r.extra["control_to_v_ratio_finest"].get<double>(), 10.0);
  EXPECT_LT(r.extra["control_halving_ratio"].get<double>(), 1.5);
}

TEST(RadialResidual, SmallAtFineSteps) {
  const auto rd = make_root_data(Family::A, 1);
  const auto grid = grid_around(vec({1.0}), 0.5, 5, 1e-3, 1e-3);
  const auto r = radial_heat_residual(rd, CartanPoint{0.6, -0.6}, grid, 1.0);
  EXPECT_LT(r.max_residual[0], 1e-6);
}

TEST(RadialResidual, SecondOrderConvergenceRank2) {
  for (const auto& [f, n] : std::vector<std::pair<Family, int>>{{Family::A, 2}, {Family::B, 2}}) {
    const auto rd = make_root_data(f, n);
    std::mt19937_64 gen(21);
    const CartanPoint h1 = random_regular(rd, gen, 0.5);
    const CartanPoint c = random_regular(rd, gen, 0.8);
    const auto grid = grid_around(to_cartan_coordinates(rd, c.coords.real()), 0.1, 3, 2e-2, 2e-2);
    const auto r = radial_heat_residual(rd, h1, grid, 0.8);
    EXPECT_GE(r.halving_ratio, 3.5) << to_string(f);
    EXPECT_LE(r.halving_ratio, 4.5) << to_string(f);
    EXPECT_GE(r.extra["control_to_v_ratio_finest"].get<double>(), 10.0) << to_string(f);
  }
}

TEST(RadialResidual, GridTouchingWallRejected) {
  const auto rd = make_root_data(Family::A, 1);
  const auto grid = grid_around(vec({0.2}), 0.2, 5, 1e-2, 1e-2);
  try {
    radial_heat_residual(rd, CartanPoint{1, -1}, grid, 1.0);
    FAIL();
  } catch (const ConfigurationError& e) {
    EXPECT_NE(std::string(e.what()).find("e1 - e2"), std::string::npos);
  }
}

TEST(RadialResidual, BadConfiguration) {
  const auto rd = make_root_data(Family::A, 1);
  auto grid = grid_around(vec({1.0}), 0.2, 5, 1e-2, 1e-2);
  EXPECT_THROW(radial_heat_residual(rd, CartanPoint{1, -1}, grid, 1.0, {1.0}), ConfigurationError);
  EXPECT_THROW(radial_heat_residual(rd, CartanPoint{1, -1}, grid, 0.005), ConfigurationError);
  grid.h_step = -1;
  EXPECT_THROW(radial_heat_residual(rd, CartanPoint{1, -1}, grid, 1.0), ConfigurationError);
  const auto grid2 = grid_around(vec({1.0, 1.0}), 0.2, 5, 1e-2, 1e-2);
  EXPECT_THROW(radial_heat_residual(rd, CartanPoint{1, -1}, grid2, 1.0), ConfigurationError);
}

TEST(CmPde, SecondOrderConvergenceSU2) {
  const auto rd = make_root_data(Family::A, 1);
  const auto grid = grid_around(vec({1.1}), 0.3, 5, 1e-2, 1e-2);
  for (int n : {1, 2, 4}) {
    const auto r = cm_pde_residual(rd, CartanPoint{0.7, -0.7}, grid, 1.0, n);
    EXPECT_GE(r.halving_ratio, 3.5) << n;
    EXPECT_LE(r.halving_ratio, 4.5) << n;
    for (double d : r.extra["form_difference_max"]) EXPECT_LT(d, 1e-10);
    const auto dropped = r.extra["dropped_term_max"].get<std::vector<double>>();
    const auto truncated = r.extra["s_form_truncated_max_residual"].get<std::vector<double>>();
    // Without the dropped term the rearranged equation is not satisfied.
    EXPECT_GT(dropped.back(), 100.0 * r.max_residual.back());
    EXPECT_NEAR(truncated.back(), dropped.back(), 10.0 * r.max_residual.back() + 1e-9);
  }
}

TEST(CmPde, SecondOrderConvergenceSU3) {
  const auto rd = make_root_data(Family::A, 2);
  const CartanPoint h1{0.9, 0.1, -1.0}, c{0.8, -0.1, -0.7};
  const auto grid = grid_around(to_cartan_coordinates(rd, c.coords.real()), 0.1, 3, 2e-2, 2e-2);
  const auto r = cm_pde_residual(rd, h1, grid, 1.0, 3);
  EXPECT_GE(r.halving_ratio, 3.5);
  EXPECT_LE(r.halving_ratio, 4.5);
  for (double d : r.extra["form_difference_max"]) EXPECT_LT(d, 1e-10);
}

TEST(CmPde, InvariantUnderWeylReflectionOfGrid) {
  const auto rd = make_root_data(Family::A, 1);
  const auto a = cm_pde_residual(rd, CartanPoint{0.7, -0.7}, grid_around(vec({1.1}), 0.3, 5, 1e-2, 1e-2), 1.0, 2);
  const auto b = cm_pde_residual(rd, CartanPoint{0.7, -0.7}, grid_around(vec({-1.1}), 0.3, 5, 1e-2, 1e-2), 1.0, 2);
  for (std::size_t k = 0; k < a.max_residual.size(); ++k) EXPECT_LT(rel(a.max_residual[k], b.max_residual[k]), 1e-6);
}

TEST(CmPde, RejectsBadScaling) {
  const auto rd = make_root_data(Family::A, 1);
  EXPECT_THROW(cm_pde_residual(rd, CartanPoint{1, -1}, grid_around(vec({1.0}), 0.1, 3, 1e-2, 1e-2), 1.0, 0),
               ConfigurationError);
}

TEST(BoundaryDelta, GaussianBumpAtH1) {
  const auto rd = make_root_data(Family::A, 1);
  const CartanPoint h1{std::sqrt(2.0), -std::sqrt(2.0)};
  const Eigen::VectorXd y1 = to_cartan_coordinates(rd, h1.coords.real());
  ASSERT_NEAR(y1[0], 2.0, 1e-14);
  const auto tf = gaussian_bump(y1, 1.0);
  const auto rep = boundary_delta_check(rd, h1, tf, {1e-1, 1e-2, 1e-3});
  // C = 1 for A1; f(h1) - f(s h1) = 1 - exp(-8).
  EXPECT_NEAR(rep.target, 1.0 - std::exp(-8.0), 1e-14);
  EXPECT_LT(rep.levels.back().rel_error, 1e-3);
  EXPECT_LT(rep.levels[2].abs_error, rep.levels[1].abs_error);
  EXPECT_LT(rep.levels[1].abs_error, rep.levels[0].abs_error);
}

TEST(BoundaryDelta, CompactBumpAtH1) {
  const auto rd = make_root_data(Family::A, 1, Rational(2));
  const CartanPoint h1{1.0, -1.0};
  const Eigen::VectorXd y1 = to_cartan_coordinates(rd, h1.coords.real());
  const auto rep = boundary_delta_check(rd, h1, compact_bump(y1, 1.5), {1e-2, 1e-3});
  EXPECT_NEAR(rep.target, rd.normalization * std::exp(-1.0), 1e-14);
  EXPECT_LT(rep.levels.back().rel_error, 1e-3);
}

TEST(BoundaryDelta, NoMassAwayFromOrbit) {
  const auto rd = make_root_data(Family::A, 1);
  const CartanPoint h1{1.0, -1.0};
  const auto rep = boundary_delta_check(rd, h1, compact_bump(vec({4.0}), 1.0), {1e-2, 1e-3});
  EXPECT_EQ(rep.target, 0.0);
  EXPECT_LT(rep.levels.back().abs_error, 1e-6);
}

TEST(BoundaryDelta, AntisymmetrizedDoubles) {
  const auto rd = make_root_data(Family::A, 1);
  const CartanPoint h1{1.0, -1.0};
  const auto base = compact_bump(to_cartan_coordinates(rd, h1.coords.real()), 1.0);
  const auto anti = antisymmetrize(rd, base);
  const auto a = boundary_delta_check(rd, h1, base, {1e-2});
  const auto b = boundary_delta_check(rd, h1, anti, {1e-2});
  EXPECT_NEAR(b.target, 2.0 * a.target, 1e-14);
  EXPECT_LT(rel(b.levels[0].estimate, 2.0 * a.levels[0].estimate), 1e-6);
}

TEST(BoundaryDelta, RankTwo) {
  const auto rd = make_root_data(Family::A, 2);
  const CartanPoint h1{1.2, 0.1, -1.3};
  const auto tf = compact_bump(to_cartan_coordinates(rd, h1.coords.real()), 0.6);
  const auto rep = boundary_delta_check(rd, h1, tf, {2e-3});
  EXPECT_LT(rep.levels[0].rel_error, 2e-2);
}

TEST(BoundaryDelta, RejectsBadSequence) {
  const auto rd = make_root_data(Family::A, 1);
  const auto tf = compact_bump(vec({1.0}), 0.5);
  EXPECT_THROW(boundary_delta_check(rd, CartanPoint{1, -1}, tf, {1e-3, 1e-2}), ArgumentError);
  EXPECT_THROW(boundary_delta_check(rd, CartanPoint{1, -1}, tf, {}), ArgumentError);
}

TEST(Quadrature, ResolutionErrorWhenBudgetExhausted) {
  auto f = [](const Eigen::VectorXd& y) { return std::sin(1e4 * y[0]) * y[0]; };
  EXPECT_THROW(trapezoid_refine(f, vec({0.0}), vec({1.0}), 0.1, 1e-12, 5000), ResolutionError);
  EXPECT_TRUE((std::is_base_of_v<NumericalFailure, ResolutionError>));
}

TEST(Quadrature, GaussianIntegral) {
  auto f = [](const Eigen::VectorXd& y) { return std::exp(-0.5 * y.squaredNorm()); };
  const auto q = trapezoid_refine(f, vec({-12, -12}), vec({12, 12}), 1.0);
  EXPECT_NEAR(q.value, 2.0 * std::numbers::pi, 1e-7);
}

TEST(HeatSemigroup, RankOne) {
  const auto rd = make_root_data(Family::A, 1);
  const auto c = heat_semigroup_check(rd, CartanPoint{0.7, -0.7}, CartanPoint{0.2, -0.2}, 0.3, 0.2);
  EXPECT_LT(c.abs_error, 1e-6);
  EXPECT_GT(std::abs(c.direct), 1e-3);
}

TEST(HeatSemigroup, RankTwo) {
  const auto rd = make_root_data(Family::B, 2);
  const auto c = heat_semigroup_check(rd, CartanPoint{0.4, 1.1}, CartanPoint{0.3, 0.8}, 0.5, 0.3);
  EXPECT_LT(c.abs_error, 1e-6);
}

TEST(Output, ResidualJsonAndCsv) {
  const auto rd = make_root_data(Family::A, 1);
  const auto grid = grid_around(vec({1.0}), 0.2, 3, 1e-2, 1e-2);
  const auto j = residual_report_json(radial_heat_residual(rd, CartanPoint{1, -1}, grid, 1.0));
  for (const char* key : {"op", "steps", "max_residual", "halving_ratio"}) EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["op"], "radial_heat_residual");
  const std::string csv = v_grid_csv(rd, CartanPoint{1, -1}, grid, 1.0);
  EXPECT_EQ(csv.substr(0, 5), "y1,V\n");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  const auto b = boundary_report_json(boundary_delta_check(rd, CartanPoint{1, -1}, compact_bump(vec({1.4}), 0.5), {1e-2}));
  EXPECT_EQ(b["levels"].size(), 1u);
}

TEST(GridSpec, CflRecordAndNodes) {
  auto g = grid_around(vec({0.0, 1.0}), 1.0, 3, 1e-2, 4e-5);
  EXPECT_TRUE(g.cfl_satisfied());
  g.t_step = 1e-3;
  EXPECT_FALSE(g.cfl_satisfied());
  const auto nodes = g.nodes();
  ASSERT_EQ(nodes.size(), 9u);
  EXPECT_DOUBLE_EQ(nodes.front()[0], -1.0);
  EXPECT_DOUBLE_EQ(nodes.back()[1], 2.0);
}
