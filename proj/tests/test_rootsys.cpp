#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "orbital/rootsys.hpp"

using namespace orbital;

namespace {

RationalVector ints(std::initializer_list<int> xs) {
  RationalVector v;
  for (int x : xs) v.emplace_back(x);
  return v;
}

std::set<RationalVector> as_set(const std::vector<RationalVector>& vs) { return {vs.begin(), vs.end()}; }

// Lexicographically positive: first nonzero entry is positive.
bool lex_positive(const RationalVector& v) {
  for (const auto& x : v) {
    if (x != 0) return x > 0;
  }
  return false;
}

// Signed permutation matrices of size n; `even_only` keeps an even number of
// sign changes.
std::set<ExactMatrix> signed_permutations(int n, bool even_only) {
  std::set<ExactMatrix> out;
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  do {
    for (int mask = 0; mask < (1 << n); ++mask) {
      if (even_only && __builtin_popcount(mask) % 2 != 0) continue;
      ExactMatrix m(n, n);
      for (int i = 0; i < n; ++i) m(perm[i], i) = (mask >> i & 1) ? -1 : 1;
      out.insert(m);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

std::set<ExactMatrix> matrices_of(const std::vector<WeylElement>& w) {
  std::set<ExactMatrix> out;
  for (const auto& e : w) out.insert(e.matrix);
  return out;
}

RationalVector random_point(std::mt19937_64& rng, const RootSystem& rs) {
  std::uniform_int_distribution<int> num(-40, 40);
  std::uniform_int_distribution<int> den(1, 7);
  RationalVector h(static_cast<std::size_t>(rs.ambient_dim));
  for (auto& x : h) x = Rational(num(rng), den(rng));
  if (rs.sum_zero()) {
    Rational mean = std::accumulate(h.begin(), h.end(), Rational(0)) / rs.ambient_dim;
    for (auto& x : h) x -= mean;
  }
  return h;
}

}  // namespace

TEST(BuildRootSystem, A1) {
  auto rs = build_root_system(Family::A, 1);
  ASSERT_EQ(rs.positive_roots.size(), 1u);
  EXPECT_EQ(rs.positive_roots[0], ints({1, -1}));
  EXPECT_EQ(rs.ambient_dim, 2);
}

TEST(BuildRootSystem, B2MatchesEnumeration) {
  // Oracle: B_2 roots are the integer vectors of squared length 1 or 2.
  std::vector<RationalVector> expected;
  for (int a = -1; a <= 1; ++a)
    for (int b = -1; b <= 1; ++b) {
      RationalVector v = ints({a, b});
      const Rational n2 = dot(v, v);
      if ((n2 == 1 || n2 == 2) && lex_positive(v)) expected.push_back(v);
    }
  auto rs = build_root_system(Family::B, 2);
  EXPECT_EQ(rs.positive_roots.size(), 4u);
  EXPECT_EQ(as_set(rs.positive_roots), as_set(expected));
}

TEST(BuildRootSystem, G2MatchesEnumeration) {
  // Oracle: G2 roots are the sum-zero integer vectors of squared length 2 or 6.
  std::vector<RationalVector> all;
  for (int a = -2; a <= 2; ++a)
    for (int b = -2; b <= 2; ++b) {
      RationalVector v = ints({a, b, -a - b});
      const Rational n2 = dot(v, v);
      if (n2 == 2 || n2 == 6) all.push_back(v);
    }
  EXPECT_EQ(all.size(), 12u);
  auto rs = build_root_system(Family::G2, 2);
  EXPECT_EQ(rs.positive_roots.size(), 6u);
  std::set<RationalVector> both;
  for (const auto& a : rs.positive_roots) {
    both.insert(a);
    RationalVector neg = a;
    for (auto& x : neg) x = -x;
    both.insert(neg);
  }
  EXPECT_EQ(both, as_set(all));
}

TEST(BuildRootSystem, RejectsUnsupportedRanks) {
  EXPECT_THROW(build_root_system(Family::A, 0), ConfigurationError);
  EXPECT_THROW(build_root_system(Family::B, 1), ConfigurationError);
  EXPECT_THROW(build_root_system(Family::C, 1), ConfigurationError);
  EXPECT_THROW(build_root_system(Family::D, 2), ConfigurationError);
  EXPECT_THROW(build_root_system(Family::G2, 3), ConfigurationError);
  EXPECT_THROW(parse_family("E"), ConfigurationError);
}

TEST(BuildRootSystem, CountsAndSimpleRootExpansions) {
  for (Family f : {Family::A, Family::B, Family::C, Family::D, Family::G2}) {
    for (int n = 1; n <= 5; ++n) {
      RootSystem rs;
      try {
        rs = build_root_system(f, n);
      } catch (const ConfigurationError&) {
        continue;
      }
      EXPECT_EQ(static_cast<int>(rs.positive_roots.size()), expected_positive_root_count(f, n));
      EXPECT_EQ(static_cast<int>(rs.simple_roots.size()), n);
      for (const auto& a : rs.positive_roots) {
        for (const auto& c : simple_root_coefficients(rs, a)) {
          EXPECT_GE(c, 0) << to_string(f) << n << " " << root_name(a);
          EXPECT_EQ(boost::multiprecision::denominator(c), 1);
        }
      }
    }
  }
}

TEST(BuildRootSystem, FormGramIsSymmetricPositiveDefinite) {
  for (auto [f, n] : {std::pair{Family::A, 3}, {Family::B, 3}, {Family::G2, 2}, {Family::D, 4}}) {
    auto g = build_root_system(f, n).form_gram();
    EXPECT_EQ(g, g.transpose());
    // Leading principal minors.
    for (int k = 1; k <= g.rows(); ++k) {
      ExactMatrix minor(k, k);
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) minor(i, j) = g(i, j);
      EXPECT_GT(minor.determinant(), 0);
    }
  }
}

TEST(BuildRootSystem, OrthonormalBasisIsOrthonormalAndSumZero) {
  auto rs = build_root_system(Family::A, 3);
  Eigen::MatrixXd b = rs.orthonormal_basis();
  EXPECT_LT((b * b.transpose() - Eigen::MatrixXd::Identity(3, 3)).norm(), 1e-14);
  EXPECT_LT((b * Eigen::VectorXd::Ones(4)).norm(), 1e-14);
}

TEST(WeylGroup, A1) {
  auto w = generate_weyl_group(build_root_system(Family::A, 1));
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[0].sign, 1);
  EXPECT_EQ(w[0].matrix, ExactMatrix::identity(2));
  EXPECT_EQ(w[1].sign, -1);
}

TEST(WeylGroup, A2IsTheSymmetricGroup) {
  auto w = generate_weyl_group(build_root_system(Family::A, 2));
  EXPECT_EQ(w.size(), 6u);
  std::set<ExactMatrix> perms;
  for (const auto& m : signed_permutations(3, true)) {
    bool positive = true;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) positive = positive && m(i, j) >= 0;
    if (positive) perms.insert(m);
  }
  EXPECT_EQ(perms.size(), 6u);
  EXPECT_EQ(matrices_of(w), perms);
}

TEST(WeylGroup, B2AndD4AreSignedPermutations) {
  auto b2 = generate_weyl_group(build_root_system(Family::B, 2));
  EXPECT_EQ(b2.size(), 8u);
  EXPECT_EQ(matrices_of(b2), signed_permutations(2, false));
  auto d4 = generate_weyl_group(build_root_system(Family::D, 4));
  EXPECT_EQ(d4.size(), 192u);
  EXPECT_EQ(matrices_of(d4), signed_permutations(4, true));
}

TEST(WeylGroup, OrdersMatchFormulas) {
  for (int n = 1; n <= 5; ++n)
    EXPECT_EQ(generate_weyl_group(build_root_system(Family::A, n)).size(), expected_weyl_order(Family::A, n));
  for (int n = 2; n <= 4; ++n) {
    EXPECT_EQ(generate_weyl_group(build_root_system(Family::B, n)).size(), expected_weyl_order(Family::B, n));
    EXPECT_EQ(generate_weyl_group(build_root_system(Family::C, n)).size(), expected_weyl_order(Family::C, n));
  }
  for (int n = 3; n <= 4; ++n)
    EXPECT_EQ(generate_weyl_group(build_root_system(Family::D, n)).size(), expected_weyl_order(Family::D, n));
  EXPECT_EQ(generate_weyl_group(build_root_system(Family::G2, 2)).size(), 12u);
}

TEST(WeylGroup, SafetyBoundRaisesResourceError) {
  EXPECT_THROW(generate_weyl_group(build_root_system(Family::B, 3), 10), ResourceError);
}

TEST(WeylGroup, ElementInvariants) {
  for (auto [f, n] : {std::pair{Family::A, 3}, {Family::B, 3}, {Family::C, 2}, {Family::D, 3}, {Family::G2, 2}}) {
    auto rs = build_root_system(f, n, Rational(3));
    auto gram = ExactMatrix::identity(rs.ambient_dim);
    std::set<RationalVector> roots;
    for (const auto& a : rs.positive_roots) {
      roots.insert(a);
      RationalVector neg = a;
      for (auto& x : neg) x = -x;
      roots.insert(neg);
    }
    const auto basis = rs.cartan_basis();
    for (const auto& w : generate_weyl_group(rs)) {
      // Orthogonal for the (scaled) standard form.
      EXPECT_EQ(w.matrix.transpose() * gram * w.matrix, gram);
      // sign == det == (-1)^length; determinant on the Cartan basis too.
      EXPECT_EQ(w.matrix.determinant(), w.sign);
      EXPECT_EQ(w.sign, (w.word_length % 2 == 0) ? 1 : -1);
      ExactMatrix restricted(rs.rank, rs.rank);
      for (int j = 0; j < rs.rank; ++j) {
        const auto image = w.matrix.apply(basis[j]);
        for (int i = 0; i < rs.rank; ++i) restricted(i, j) = dot(image, basis[i]) / dot(basis[i], basis[i]);
      }
      EXPECT_EQ(restricted.determinant(), w.sign);
      // Permutes the root system.
      std::set<RationalVector> image;
      for (const auto& a : roots) image.insert(w.matrix.apply(a));
      EXPECT_EQ(image, roots);
    }
  }
}

TEST(WeylGroup, FormInvarianceOnRandomPoints) {
  std::mt19937_64 rng(5);
  for (auto [f, n] : {std::pair{Family::A, 2}, {Family::B, 3}, {Family::G2, 2}}) {
    auto rs = build_root_system(f, n);
    for (const auto& w : generate_weyl_group(rs)) {
      auto h = random_point(rng, rs);
      auto g = random_point(rng, rs);
      EXPECT_EQ(dot(w.matrix.apply(h), w.matrix.apply(g)), dot(h, g));
    }
  }
}

TEST(Discriminant, A1IsTheSingleRoot) {
  auto pi = discriminant(build_root_system(Family::A, 1));
  EXPECT_EQ(pi.degree(), 1);
  EXPECT_EQ(pi.coefficient({1, 0}), 1);
  EXPECT_EQ(pi.coefficient({0, 1}), -1);
  EXPECT_EQ(eval_poly(pi, ints({3, 3})), 0);
}

TEST(Discriminant, A2IsTheVandermonde) {
  // Oracle: (a1-a2)(a1-a3)(a2-a3) = sum_sigma sgn(sigma) a^{sigma(2,1,0)}.
  SparsePolynomial<Rational> vandermonde(3);
  std::vector<int> perm{0, 1, 2};
  do {
    int inversions = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j) inversions += perm[i] > perm[j];
    std::vector<int> e(3);
    for (int i = 0; i < 3; ++i) e[perm[i]] = 2 - i;
    vandermonde.add_term(e, inversions % 2 ? -1 : 1);
  } while (std::next_permutation(perm.begin(), perm.end()));
  auto pi = discriminant(build_root_system(Family::A, 2));
  EXPECT_EQ(pi, vandermonde);
  EXPECT_EQ(eval_poly(pi, ints({1, 0, -1})), 2);
  EXPECT_EQ(eval_poly(pi, ints({2, 1, -3})), 20);
}

TEST(Discriminant, DegreeEqualsRootCountAndPiIsHarmonic) {
  for (auto [f, n] : {std::pair{Family::A, 3}, {Family::B, 3}, {Family::C, 3}, {Family::D, 4}, {Family::G2, 2}}) {
    auto rs = build_root_system(f, n);
    auto pi = discriminant(rs);
    EXPECT_EQ(pi.degree(), static_cast<int>(rs.positive_roots.size()));
    EXPECT_TRUE(pi.is_homogeneous());
    SparsePolynomial<Rational> laplacian(pi.variables());
    for (std::size_t i = 0; i < pi.variables(); ++i) laplacian += pi.derivative(i).derivative(i);
    EXPECT_TRUE(laplacian.is_zero());
  }
}

TEST(Discriminant, SkewUnderTheWeylGroup) {
  std::mt19937_64 rng(7);
  for (auto [f, n] : {std::pair{Family::A, 1}, {Family::A, 2}, {Family::A, 3}, {Family::B, 2}, {Family::B, 3},
                      {Family::C, 2}, {Family::C, 3}, {Family::D, 3}, {Family::G2, 2}}) {
    auto rs = build_root_system(f, n);
    auto pi = discriminant(rs);
    for (const auto& w : generate_weyl_group(rs)) {
      for (int k = 0; k < 100; ++k) {
        auto h = random_point(rng, rs);
        ASSERT_EQ(eval_poly(pi, w.matrix.apply(h)), w.sign * eval_poly(pi, h)) << to_string(f) << n;
      }
    }
  }
}

TEST(PiPiNorm, A1) {
  auto rs = build_root_system(Family::A, 1);
  EXPECT_EQ(pi_pi_norm(rs), 2);
  // Pi = sqrt(2) t in the orthonormal coordinate t.
  auto pi_t = to_orthonormal(rs, discriminant(rs));
  ASSERT_EQ(pi_t.size(), 1u);
  EXPECT_NEAR(pi_t.coefficient({1}), std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(bracket(pi_t, pi_t), 2.0, 1e-14);
}

TEST(PiPiNorm, A2) {
  auto rs = build_root_system(Family::A, 2);
  EXPECT_EQ(pi_pi_norm(rs), 12);
  EXPECT_EQ(pi_pi_norm(rs) / 6, 2);
}

TEST(PiPiNorm, SuperfactorialForTypeA) {
  for (int N = 2; N <= 6; ++N) {
    auto d = make_root_data(Family::A, N - 1);
    Rational superfactorial = 1, fact = 1;
    for (int p = 1; p <= N - 1; ++p) {
      fact *= p;
      superfactorial *= fact;
    }
    EXPECT_EQ(d.pi_pi / static_cast<long long>(d.weyl_order()), superfactorial) << "N=" << N;
  }
}

TEST(PiPiNorm, OrthonormalCoordinatesGiveTheSameValue) {
  for (auto [f, n] : {std::pair{Family::A, 2}, {Family::A, 3}, {Family::B, 2}, {Family::D, 3}, {Family::G2, 2}}) {
    auto rs = build_root_system(f, n);
    auto exact = static_cast<double>(pi_pi_norm(rs));
    auto pi_t = to_orthonormal(rs, discriminant(rs));
    EXPECT_NEAR(bracket(pi_t, pi_t) / exact, 1.0, 1e-10) << to_string(f) << n;
  }
}

TEST(PiPiNorm, FormScalingLaw) {
  for (auto [f, n] : {std::pair{Family::A, 1}, {Family::A, 2}, {Family::A, 3}, {Family::B, 2}, {Family::C, 3},
                      {Family::D, 3}, {Family::G2, 2}}) {
    const auto base = pi_pi_norm(build_root_system(f, n));
    const int r = expected_positive_root_count(f, n);
    for (int c : {2, 4}) {
      Rational factor = 1;
      for (int k = 0; k < r; ++k) factor /= c;
      EXPECT_EQ(pi_pi_norm(build_root_system(f, n, Rational(c))), base * factor);
    }
  }
}

TEST(FundamentalWeights, PairWithCorootsToKronecker) {
  for (auto [f, n] : {std::pair{Family::A, 3}, {Family::B, 3}, {Family::C, 3}, {Family::D, 4}, {Family::G2, 2}}) {
    auto rs = build_root_system(f, n);
    auto omega = fundamental_weights(rs);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const auto& a = rs.simple_roots[j];
        EXPECT_EQ(2 * dot(omega[i], a) / dot(a, a), i == j ? 1 : 0);
      }
  }
}

TEST(RootDataJson, ExportsTheDocumentedFields) {
  auto d = make_root_data(Family::B, 2);
  auto j = root_data_json(d.system, d.weyl_order());
  EXPECT_EQ(j["family"], "B");
  EXPECT_EQ(j["rank"], 2);
  EXPECT_EQ(j["weyl_order"], 8);
  EXPECT_EQ(j["positive_roots"].size(), 4u);
  EXPECT_EQ(j["simple_roots"][1], nlohmann::json::array({0, 1}));
}
