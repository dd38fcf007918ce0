#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mfcir/experiments.hpp"
#include "mfcir/roughpath_checks.hpp"

using namespace mfcir;

namespace {

NoisePath linear_path(double horizon, std::size_t n) {
  const GridSpec grid(horizon, n);
  return NoisePath{grid, std::vector<double>(n, grid.dt())};
}

std::size_t count_within(const std::vector<double>& xs, double target, double tol) {
  std::size_t c = 0;
  for (double x : xs) c += std::abs(x - target) <= tol;
  return c;
}

}  // namespace

TEST(QuadraticVariation, SmoothPathVanishes) {
  for (std::size_t n : {16u, 256u, 4096u}) {
    const auto path = linear_path(1.0, n);
    EXPECT_NEAR(quadratic_variation(path), 1.0 / n, 1e-15);
  }
}

TEST(QuadraticVariation, BrownianAndMixedNearHorizon) {
  const GridSpec grid(1.0, 1 << 16);
  const auto seeds = derive_seeds(101, 100);
  const auto bm = qv_ensemble({HurstParam(0.75), 1.0, 0.0}, grid, seeds);
  const auto mixed = qv_ensemble({HurstParam(0.75), 1.0, 1.0}, grid, seeds);
  const auto fbm = qv_ensemble({HurstParam(0.75), 0.0, 1.0}, grid, seeds);
  EXPECT_GE(count_within(bm, 1.0, 0.05), 99u);
  EXPECT_GE(count_within(mixed, 1.0, 0.05), 99u);
  std::size_t small = 0;
  for (double q : fbm) small += q <= 0.01;
  EXPECT_GE(small, 99u);
}

TEST(QuadraticVariation, MedianErrorDecreasesWithN) {
  const auto seeds = derive_seeds(202, 100);
  double previous = INFINITY;
  for (std::size_t n : {1u << 10, 1u << 12, 1u << 14, 1u << 16}) {
    auto qv = qv_ensemble(MixedSpec{}, GridSpec(1.0, n), seeds);
    for (auto& q : qv) q = std::abs(q - 1.0);
    const double med = stats::median(qv);
    EXPECT_LT(med, previous) << "n=" << n;
    previous = med;
  }
}

TEST(DiscreteItoIterated, RefinementOneIsPlainQv) {
  const auto path = build_mixed(MixedSpec{}, GridSpec(1.0, 512), 4);
  const auto est = discrete_ito_iterated(path, 1);
  EXPECT_EQ(est.iterated_correction, 0.0);
  EXPECT_EQ(est.bracket_value, est.qv_sum);
  EXPECT_EQ(est.qv_sum, quadratic_variation(path));
  EXPECT_EQ(est.grid.steps(), 512u);
}

TEST(DiscreteItoIterated, CombinedEstimatorEqualsFineQv) {
  const std::size_t n_fine = 1 << 14, refinement = 1 << 8;
  const MixedPathBuilder builder(MixedSpec{}, GridSpec(1.0, n_fine));
  std::vector<double> brackets;
  for (std::uint64_t s : derive_seeds(303, 100)) {
    const auto fine = builder.build(s);
    const auto est = discrete_ito_iterated(fine, refinement);
    EXPECT_EQ(est.grid.steps(), 64u);
    const double fine_qv = quadratic_variation(fine);
    ASSERT_NEAR(est.bracket_value, fine_qv, 1e-11);
    EXPECT_EQ(est.qv_sum, quadratic_variation(aggregate(fine, 64)));
    brackets.push_back(est.bracket_value);
  }
  EXPECT_GE(count_within(brackets, 1.0, 0.05), 99u);
}

TEST(DiscreteItoIterated, SmoothPathBracketVanishes) {
  double previous = INFINITY;
  for (std::size_t r : {1u, 4u, 16u, 64u}) {
    const auto est = discrete_ito_iterated(linear_path(1.0, 4 * r), r);
    EXPECT_LT(est.bracket_value, previous);
    EXPECT_NEAR(est.bracket_value, 1.0 / (4.0 * r), 1e-14);
    previous = est.bracket_value;
  }
}

TEST(DiscreteItoIterated, RefinementMismatch) {
  const auto path = linear_path(1.0, 12);
  EXPECT_THROW(discrete_ito_iterated(path, 5), ConfigError);
  EXPECT_THROW(discrete_ito_iterated(path, 0), ConfigError);
  EXPECT_THROW(ito_formula_residual(path, 7), ConfigError);
}

TEST(ItoFormula, SquareIsExactOnLinearAndRandomPaths) {
  EXPECT_LE(ito_formula_residual(linear_path(1.0, 1000), 1), 1e-12);
  EXPECT_LE(ito_formula_residual(linear_path(1.0, 1000), 10), 1e-12);
  const GridSpec grid(1.0, 1 << 16);
  for (const MixedSpec spec : {MixedSpec{HurstParam(0.75), 1.0, 0.0}, MixedSpec{}}) {
    const auto path = build_mixed(spec, grid, 17);
    for (std::size_t r : {1u, 16u, 256u}) {
      const auto chk = ito_formula_check_square(path, r);
      EXPECT_LE(chk.relative_residual(), 1e-12);
      EXPECT_LE(chk.residual(), 1e-10);
    }
  }
}

TEST(ItoFormula, TelescopingIdentityFuzz) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> len(1, 200);
  std::uniform_real_distribution<double> ld(-3, 1);
  std::normal_distribution<double> nd;
  for (int c = 0; c < 10000; ++c) {
    const std::size_t n = len(rng);
    const double scale = std::pow(10.0, ld(rng));
    std::vector<double> inc(n);
    for (auto& x : inc) x = scale * nd(rng);
    const NoisePath path{GridSpec(1.0, n), inc};
    ASSERT_LE(ito_formula_check_square(path, 1).relative_residual(), 1e-9);
  }
}

TEST(ItoFormula, SineConverges) {
  const auto path = build_mixed(MixedSpec{}, GridSpec(1.0, 1 << 16), 23);
  auto check = [&](std::size_t r) {
    return ito_formula_check(
               path, r, [](double x) { return std::sin(x); }, [](double x) { return std::cos(x); },
               [](double x) { return -std::sin(x); })
        .residual();
  };
  EXPECT_LE(check(1), 1e-2);
  EXPECT_LE(check(4), 1e-2);
}
