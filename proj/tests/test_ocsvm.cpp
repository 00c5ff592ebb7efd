#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "sentinel/ocsvm.hpp"
#include "sentinel/random.hpp"

using namespace sentinel;

namespace {

Eigen::MatrixXd random_points(Rng& rng, int n, int d, double lo = -2.0, double hi = 2.0) {
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(lo, hi);
  return x;
}

}  // namespace

TEST(Ocsvm, TwoIdenticalPointsSplitEvenly) {
  Eigen::MatrixXd x(2, 2);
  x << 1.0, 1.0, 1.0, 1.0;
  OcsvmParams p;
  p.nu = 1.0;
  auto m = fit_ocsvm(x, p);
  ASSERT_EQ(m.alphas.size(), 2);
  EXPECT_NEAR(m.alphas(0), 0.5, 1e-12);
  EXPECT_NEAR(m.alphas(1), 0.5, 1e-12);
}

TEST(Ocsvm, EightPointDualMatchesBruteForce) {
  Rng rng(11);
  for (int trial = 0; trial < 3; ++trial) {
    auto x = random_points(rng, 8, 2);
    const double gamma = 0.5;
    auto sol = solve_ocsvm_dual(x, 0.25, gamma);
    const double smo = ocsvm_dual_objective(sol.alpha, sol.gradient);
    const double brute = oracle::ocsvm_dual_min(oracle::gram(x, gamma), 0.5, 20);
    EXPECT_NEAR(smo, brute, 1e-3);
    EXPECT_LE(smo, brute + 1e-6);
  }
}

TEST(Ocsvm, SolutionFeasibleAndKkt) {
  Rng rng(12);
  auto x = random_points(rng, 60, 3);
  auto sol = solve_ocsvm_dual(x, 0.2, scale_gamma(x));
  EXPECT_NEAR(sol.alpha.sum(), 1.0, 1e-12);
  EXPECT_GE(sol.alpha.minCoeff(), 0.0);
  EXPECT_LE(sol.alpha.maxCoeff(), sol.upper * (1 + 1e-12));
  EXPECT_LE(ocsvm_kkt_residuals(sol).maxCoeff(), 1e-3);
  // The tracked gradient equals Q alpha.
  Eigen::VectorXd g = oracle::gram(x, scale_gamma(x)) * sol.alpha;
  EXPECT_LT((g - sol.gradient).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Ocsvm, NuBoundsTrainingOutliers) {
  Rng rng(13);
  for (double nu : {0.05, 0.1, 0.3}) {
    auto x = random_points(rng, 120, 2);
    OcsvmParams p;
    p.nu = nu;
    auto m = fit_ocsvm(x, p);
    int outliers = 0;
    for (int r = 0; r < x.rows(); ++r) outliers += m.decision(x.row(r).transpose()) < 0.0;
    EXPECT_LE(outliers / 120.0, nu + 2.0 / 120.0) << "nu=" << nu;
  }
}

TEST(Ocsvm, BoundedAlphasAtMostNuNAndFreeOnesOnBoundary) {
  Rng rng(18);
  for (double nu : {0.1, 0.25, 0.4}) {
    auto x = random_points(rng, 70, 2);
    OcsvmParams p;
    p.nu = nu;
    auto sol = solve_ocsvm_dual(x, nu, scale_gamma(x), p);
    int bounded = 0;
    for (Eigen::Index i = 0; i < sol.alpha.size(); ++i) {
      const double f = sol.gradient(i) - sol.rho;
      if (sol.alpha(i) >= sol.upper * (1 - 1e-12)) {
        ++bounded;
        EXPECT_LE(f, 1e-3);
      } else if (sol.alpha(i) > 1e-12 * sol.upper) {
        EXPECT_NEAR(f, 0.0, 1e-3);
      }
    }
    EXPECT_LE(bounded, nu * 70 + 1e-9);
  }
}

TEST(Ocsvm, ScoreMatchesHandKernelSum) {
  OcsvmModel m;
  m.support_vectors.resize(2, 2);
  m.support_vectors << 0.0, 0.0, 1.0, 2.0;
  m.alphas = Eigen::Vector2d(0.25, 0.75);
  m.gamma = 0.3;
  m.rho = 0.4;
  Eigen::Vector2d x(0.5, -1.0);
  const double k1 = std::exp(-0.3 * (0.25 + 1.0));
  const double k2 = std::exp(-0.3 * (0.25 + 9.0));
  EXPECT_NEAR(ocsvm_score(m, x), -(0.25 * k1 + 0.75 * k2 - 0.4), 1e-15);
}

TEST(Ocsvm, FarPointScoresRhoAndInteriorIsNegative) {
  Rng rng(14);
  // Bell-shaped cloud, densest at the origin.
  Eigen::MatrixXd x = random_points(rng, 60, 2, -1.0, 1.0) + random_points(rng, 60, 2, -1.0, 1.0) +
                      random_points(rng, 60, 2, -1.0, 1.0);
  auto m = fit_ocsvm(x);
  EXPECT_GT(m.rho, 0.0);
  EXPECT_NEAR(ocsvm_score(m, Eigen::Vector2d(1e3, -1e3)), m.rho, 1e-12);
  EXPECT_LT(ocsvm_score(m, Eigen::Vector2d(0.0, 0.0)), 0.0);
}

TEST(Ocsvm, SupportVectorsAreExactlyPositiveAlphas) {
  Rng rng(15);
  auto x = random_points(rng, 40, 2);
  OcsvmParams p;
  p.nu = 0.2;
  auto sol = solve_ocsvm_dual(x, p.nu, scale_gamma(x), p);
  auto m = fit_ocsvm(x, p);
  int positive = 0;
  for (Eigen::Index i = 0; i < sol.alpha.size(); ++i) positive += sol.alpha(i) > 1e-12 * sol.upper;
  EXPECT_EQ(m.support_vectors.rows(), positive);
  EXPECT_NEAR(m.alphas.sum(), 1.0, 1e-9);
  EXPECT_DOUBLE_EQ(m.rho, sol.rho);
}

TEST(Ocsvm, ScaleGammaFormula) {
  Eigen::MatrixXd x(4, 2);
  x << 0, 0, 2, 0, 0, 4, 2, 4;
  // Population variances 1 and 4, mean 2.5, d = 2.
  EXPECT_NEAR(scale_gamma(x), 1.0 / (2.0 * 2.5), 1e-15);
  EXPECT_NEAR(scale_gamma(Eigen::MatrixXd::Ones(3, 2)), 1.0 / (2.0 * 1e-8), 1.0);
}

TEST(Ocsvm, SmallCacheGivesSameAnswer) {
  Rng rng(16);
  auto x = random_points(rng, 50, 3);
  OcsvmParams big, tiny;
  tiny.cache_bytes = 1;
  auto a = solve_ocsvm_dual(x, 0.1, 0.7, big);
  auto b = solve_ocsvm_dual(x, 0.1, 0.7, tiny);
  EXPECT_EQ(a.iterations, b.iterations);
  EXPECT_LT((a.alpha - b.alpha).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Ocsvm, Errors) {
  auto kind = [](auto fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Config;
  };
  EXPECT_EQ(kind([] { fit_ocsvm(Eigen::MatrixXd::Zero(1, 2)); }), ErrorKind::InsufficientData);
  OcsvmParams p;
  p.nu = 0.0;
  EXPECT_THROW(fit_ocsvm(Eigen::MatrixXd::Random(5, 2), p), Error);
  OcsvmParams capped;
  capped.max_iterations = 1;
  capped.nu = 0.1;
  Rng rng(17);
  EXPECT_EQ(kind([&] { fit_ocsvm(random_points(rng, 40, 2), capped); }), ErrorKind::NonConvergence);
  auto m = fit_ocsvm(Eigen::MatrixXd::Random(5, 2));
  EXPECT_EQ(kind([&] { m.decision(Eigen::Vector3d(0, 0, 0)); }), ErrorKind::DimensionMismatch);
}
