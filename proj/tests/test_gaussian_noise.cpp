#include <gtest/gtest.h>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>
#include <limits>
#include <random>

#include "mfcir/gaussian_noise.hpp"
#include "mfcir/stats.hpp"

using namespace mfcir;

namespace {

using mp = boost::multiprecision::cpp_bin_float_50;

// 50-digit evaluation of the fBm covariance, independent of the double path.
double covariance_oracle(double h, double s, double t) {
  const mp two_h = mp(2) * mp(h);
  const mp S(s), T(t);
  return static_cast<double>(
      (pow(S, two_h) + pow(T, two_h) - pow(abs(T - S), two_h)) / mp(2));
}

bool all_finite(const std::vector<double>& xs) {
  for (double x : xs)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

TEST(FbmCovariance, BrownianCaseIsMin) { EXPECT_DOUBLE_EQ(fbm_covariance(HurstParam(0.5), 1, 2), 1.0); }

TEST(FbmCovariance, DiagonalIsPower) {
  EXPECT_NEAR(fbm_covariance(HurstParam(0.75), 2, 2), std::pow(2.0, 1.5), 1e-15);
  EXPECT_NEAR(fbm_covariance(HurstParam(0.75), 2, 2), 2.828427, 1e-6);
}

TEST(FbmCovariance, MatchesMultiprecisionOracle) {
  const double expected = covariance_oracle(0.75, 1.0, 2.0);
  EXPECT_NEAR(expected, std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(fbm_covariance(HurstParam(0.75), 1, 2), expected, 4e-16);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> hd(0.05, 0.95), td(0.0, 5.0);
  for (int i = 0; i < 200; ++i) {
    const double h = hd(rng), s = td(rng), t = td(rng);
    EXPECT_NEAR(fbm_covariance(HurstParam(h), s, t), covariance_oracle(h, s, t), 1e-13);
  }
}

TEST(FbmCovariance, SymmetryAndBrownianReduction) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> hd(0.01, 0.99), td(0.0, 100.0);
  for (int i = 0; i < 100000; ++i) {
    const HurstParam h(hd(rng));
    const double s = td(rng), t = td(rng);
    ASSERT_EQ(fbm_covariance(h, s, t), fbm_covariance(h, t, s));
    const double bm = fbm_covariance(HurstParam(0.5), s, t);
    ASSERT_LE(std::abs(bm - std::min(s, t)), std::numeric_limits<double>::epsilon() * (s + t));
  }
}

TEST(FbmCovariance, RejectsNegativeTimes) {
  EXPECT_THROW(fbm_covariance(HurstParam(0.7), -1.0, 1.0), DomainError);
}

TEST(HurstParam, Ranges) {
  EXPECT_THROW(HurstParam(0.0), DomainError);
  EXPECT_THROW(HurstParam(1.0), DomainError);
  EXPECT_NO_THROW(HurstParam(0.3));
  EXPECT_THROW(HurstParam::for_model(0.5), ConfigError);
  EXPECT_THROW(HurstParam::for_model(0.4), ConfigError);
  EXPECT_DOUBLE_EQ(HurstParam::for_model(0.75).value(), 0.75);
}

TEST(BrownianIncrements, DeterministicAndAnchored) {
  const GridSpec grid(1.0, 4);
  const auto a = sample_brownian_increments(grid, 123);
  const auto b = sample_brownian_increments(grid, 123);
  EXPECT_EQ(a.increments, b.increments);
  EXPECT_EQ(a.increments.size(), 4u);
  EXPECT_EQ(a.cumulative().front(), 0.0);
  EXPECT_NE(a.increments, sample_brownian_increments(grid, 124).increments);
}

TEST(BrownianIncrements, VarianceIsDt) {
  const std::size_t n = 100000;
  const GridSpec grid(0.01 * n, n);  // dt = 0.01
  const auto path = sample_brownian_increments(grid, 2024);
  ASSERT_TRUE(all_finite(path.increments));
  const double var = stats::variance(path.increments);
  const double se = 0.01 * std::sqrt(2.0 / n);
  EXPECT_NEAR(var, 0.01, 3 * se);
  EXPECT_NEAR(stats::mean(path.increments), 0.0, 3 * std::sqrt(0.01 / n));
}

TEST(CholeskyFbm, BrownianCaseHasMinCovariance) {
  const GridSpec grid(1.0, 8);
  const CholeskyFbm gen(HurstParam(0.5), grid);
  const std::size_t paths = 10000;
  std::vector<double> x(paths), y(paths), prod(paths);
  for (std::size_t i = 0; i < paths; ++i) {
    const auto p = gen.sample(derive_seed(5, i)).cumulative();
    x[i] = p[4];  // t = 1/2
    y[i] = p[8];  // t = 1
    prod[i] = x[i] * y[i];
  }
  const double cov = stats::covariance(x, y);
  const double se = std::sqrt(stats::variance(prod) / paths);
  EXPECT_NEAR(cov, 0.5, 3 * se);
  EXPECT_NEAR(stats::variance(y), 1.0, 3 * std::sqrt(2.0 / paths));
}

TEST(CholeskyFbm, TerminalVarianceAtHurst075) {
  const GridSpec grid(1.0, 256);
  const CholeskyFbm gen(HurstParam(0.75), grid);
  const std::size_t paths = 10000;
  std::vector<double> end(paths);
  for (std::size_t i = 0; i < paths; ++i) {
    const auto p = gen.sample(derive_seed(6, i));
    ASSERT_EQ(p.increments.size(), 256u);
    double s = 0.0;
    for (double d : p.increments) s += d;
    end[i] = s;
  }
  EXPECT_NEAR(stats::variance(end), 1.0, 3 * std::sqrt(2.0 / paths));
}

TEST(CholeskyFbm, DeterministicAndCapped) {
  const GridSpec grid(1.0, 32);
  EXPECT_EQ(sample_fbm_cholesky(HurstParam(0.7), grid, 9).increments,
            sample_fbm_cholesky(HurstParam(0.7), grid, 9).increments);
  try {
    CholeskyFbm(HurstParam(0.7), GridSpec(1.0, cholesky_size_cap + 1));
    FAIL() << "size cap not enforced";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("Davies-Harte"), std::string::npos);
  }
}

TEST(CholeskyFbm, ReportsFailingPivot) {
  // Near H = 1 the path covariance is numerically rank one.
  try {
    CholeskyFbm(HurstParam(1.0 - 1e-12), GridSpec(1.0, 64));
    FAIL() << "expected a factorization failure";
  } catch (const CholeskyError& e) {
    EXPECT_GE(e.pivot_index, 1u);
    EXPECT_LT(e.pivot_index, 64u);
  }
}

TEST(DaviesHarte, IncrementVarianceAndLagOneCovariance) {
  const std::size_t n = 1 << 14;
  const GridSpec grid(1.0, n);
  const DaviesHarteFbm gen(HurstParam(0.75), grid);
  const std::size_t paths = 10000;
  std::vector<double> sq(paths), lag(paths);
  for (std::size_t i = 0; i < paths; ++i) {
    const auto p = gen.sample(derive_seed(8, i));
    ASSERT_EQ(p.increments.size(), n);
    // Use a pair in the middle of the path.
    const double a = p.increments[n / 2], b = p.increments[n / 2 + 1];
    sq[i] = a * a;
    lag[i] = a * b;
  }
  const double dt = grid.dt();
  const double gamma0 = std::pow(dt, 1.5);
  const double gamma1 = 0.5 * std::pow(dt, 1.5) * (std::pow(2.0, 1.5) - 2.0);
  EXPECT_NEAR(gamma0, fgn_autocovariance(HurstParam(0.75), dt, 0), 1e-20);
  EXPECT_NEAR(gamma1, fgn_autocovariance(HurstParam(0.75), dt, 1), 1e-20);
  EXPECT_NEAR(stats::mean(sq), gamma0, 3 * std::sqrt(stats::variance(sq) / paths));
  EXPECT_NEAR(stats::mean(lag), gamma1, 3 * std::sqrt(stats::variance(lag) / paths));
}

TEST(DaviesHarte, BrownianCaseHasUncorrelatedIncrements) {
  const GridSpec grid(1.0, 64);
  const DaviesHarteFbm gen(HurstParam(0.5), grid);
  const std::size_t paths = 10000;
  std::vector<double> lag(paths);
  for (std::size_t i = 0; i < paths; ++i) {
    const auto p = gen.sample(derive_seed(10, i));
    lag[i] = p.increments[20] * p.increments[21];
  }
  EXPECT_NEAR(stats::mean(lag), 0.0, 3 * std::sqrt(stats::variance(lag) / paths));
}

TEST(DaviesHarte, TerminalVarianceMatchesPower) {
  std::uint64_t stream = 12;
  for (double h : {0.6, 0.75, 0.9}) {
    const GridSpec grid(2.0, 100);  // not a power of two
    const DaviesHarteFbm gen(HurstParam(h), grid);
    const std::size_t paths = 40000;
    std::vector<double> end(paths);
    ++stream;
    for (std::size_t i = 0; i < paths; ++i) {
      const auto p = gen.sample(derive_seed(stream, i));
      ASSERT_TRUE(all_finite(p.increments));
      end[i] = p.cumulative().back();
    }
    const double target = std::pow(2.0, 2 * h);
    EXPECT_NEAR(stats::variance(end), target, 3 * target * std::sqrt(2.0 / paths)) << "h=" << h;
  }
}

TEST(DaviesHarte, Deterministic) {
  const GridSpec grid(1.0, 128);
  EXPECT_EQ(sample_fbm_davies_harte(HurstParam(0.8), grid, 77).increments,
            sample_fbm_davies_harte(HurstParam(0.8), grid, 77).increments);
}

TEST(DaviesHarte, EigenvalueToleranceClampsOrRejects) {
  // First row (1, 2): eigenvalues 3 and -1.
  const std::vector<double> bad{1.0, 2.0};
  const auto eig = circulant_eigenvalues(bad);
  EXPECT_NEAR(eig[0], 3.0, 1e-15);
  EXPECT_NEAR(eig[1], -1.0, 1e-15);
  EXPECT_THROW(embedding_scales(eig), NumericalError);

  // Scale is sqrt(lambda / length).
  const std::vector<double> tiny{4.0, -1e-12};
  const auto scales = embedding_scales(tiny);
  EXPECT_EQ(scales[1], 0.0);
  EXPECT_DOUBLE_EQ(scales[0], std::sqrt(2.0));
  EXPECT_THROW(embedding_scales(std::vector<double>{4.0, -1e-7}), NumericalError);
}

TEST(FbmSampler, SelectsBySize) {
  EXPECT_TRUE(FbmSampler(HurstParam(0.75), GridSpec(1.0, 256)).uses_cholesky());
  EXPECT_FALSE(FbmSampler(HurstParam(0.75), GridSpec(1.0, 512)).uses_cholesky());
  EXPECT_FALSE(
      FbmSampler(HurstParam(0.75), GridSpec(1.0, 8), FbmMethod::davies_harte).uses_cholesky());
}

TEST(GaussianStream, StandardMoments) {
  GaussianStream g(99);
  const std::size_t n = 200000;
  std::vector<double> xs(n);
  for (auto& x : xs) x = g.normal();
  EXPECT_NEAR(stats::mean(xs), 0.0, 3 / std::sqrt(double(n)));
  EXPECT_NEAR(stats::variance(xs), 1.0, 3 * std::sqrt(2.0 / n));
}

TEST(DeriveSeed, DistinctStreams) {
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
  EXPECT_EQ(derive_seed(42, 7), derive_seed(42, 7));
}
