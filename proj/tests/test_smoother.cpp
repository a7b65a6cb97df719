#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"

using namespace jmls;

TEST(CombineComponent, ProductOfGaussianAndLikelihood) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 1 + trial % 3;
    const auto f = fixtures::random_component(rng, n, std::log(0.4));
    const auto g = fixtures::random_component(rng, n, 0.0);
    // L(x) from a measurement-style component with L ⪰ 0.
    LikelihoodComponent lik{fixtures::uniform(rng, -1.0, 1.0), g.mean, g.cov.inverse()};
    if (trial % 2 == 0) {
      Matrix C = Matrix::Zero(1, n);
      C(0, 0) = 1.0;
      lik = measurement_correct(LikelihoodComponent::null(n), C, Vector::Zero(1), Matrix::Constant(1, 1, 0.3),
                                Vector::Constant(1, 0.5));
    }
    const auto out = combine_component(f, lik);
    for (int i = 0; i < 4; ++i) {
      Vector x(n);
      for (Eigen::Index d = 0; d < n; ++d) x(d) = fixtures::uniform(rng, -2.0, 2.0);
      const double lhs = out.log_weight + log_normal_pdf(x, out.mean, out.cov);
      const double rhs = f.log_weight + log_normal_pdf(x, f.mean, f.cov) + lik.log_eval(x);
      EXPECT_NEAR(lhs, rhs, 1e-10);
    }
  }
}

TEST(CombineComponent, NullLikelihoodIsIdentity) {
  std::mt19937_64 rng(2);
  const auto f = fixtures::random_component(rng, 3, std::log(0.2));
  const auto out = combine_component(f, LikelihoodComponent::null(3));
  EXPECT_NEAR(out.log_weight, f.log_weight, 1e-12);
  EXPECT_LT((out.mean - f.mean).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((out.cov - f.cov).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(RunSmoother, SingleModeEqualsRts) {
  const auto p = example1();
  const Dataset data = simulate_preset(p, 1);
  const auto res = run_smoother(p.model, p.prior, data, {1, 1, {}});
  const auto& c0 = p.prior.modes[0][0];
  const auto rts = rts_smoother(p.model.modes[0], c0.mean, c0.cov, data);
  for (std::size_t k = 0; k < data.size(); ++k) {
    ASSERT_EQ(res.smoothed[k].mixture.component_count(), 1u);
    const auto& c = res.smoothed[k].mixture.modes[0][0];
    EXPECT_NEAR(c.mean(0), rts.smoothed_mean[k](0), 1e-12);
    EXPECT_NEAR(c.cov(0, 0), rts.smoothed_cov[k](0, 0), 1e-12);
    EXPECT_NEAR(c.log_weight, 0.0, 1e-12);
  }
}

TEST(RunSmoother, LastStepEqualsFiltered) {
  const auto p = example2();
  const Dataset data = simulate_preset(p, 3);
  const auto res = run_smoother(p.model, p.prior, data, {4, 4, {}});
  const auto& last = res.smoothed.back().mixture;
  const auto& filt = res.forward.back().filtered;
  ASSERT_EQ(last.counts(), filt.counts());
  for (std::size_t z = 0; z < 2; ++z) {
    for (std::size_t i = 0; i < last.modes[z].size(); ++i) {
      EXPECT_EQ(last.modes[z][i].mean, filt.modes[z][i].mean);
      EXPECT_NEAR(last.modes[z][i].log_weight, filt.modes[z][i].log_weight, 1e-14);
    }
  }
}

TEST(RunSmoother, UnboundedMatchesEnumeration) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 4; ++trial) {
    const auto model = fixtures::random_scalar_model(rng, 2);
    const auto prior = fixtures::random_prior(rng, 2, 1, 1 + trial % 2);
    const Dataset data = fixtures::random_dataset(rng, model, prior, 6);
    const auto res = run_smoother(model, prior, data);
    const auto exact = enumerate_smoother(model, prior, data);
    const auto dist = fixtures::compare_smoothed(exact.smoothed, res.smoothed);
    EXPECT_LT(dist.l1, 1e-9);
    EXPECT_LT(dist.marginal, 1e-10);
  }
}

TEST(RunSmoother, TwoDimensionalMatchesEnumerationMoments) {
  const auto p = example3();
  const Dataset data = simulate_preset(p, 2, 6);
  const auto res = run_smoother(p.model, p.prior, data);
  const auto exact = enumerate_smoother(p.model, p.prior, data);
  for (std::size_t k = 0; k < data.size(); ++k) {
    for (std::size_t z = 0; z < 2; ++z) {
      EXPECT_NEAR(res.smoothed[k].mode_marginal[z], exact.smoothed[k].mode_marginal[z], 1e-10);
      if (exact.smoothed[k].mode_marginal[z] < 1e-12) continue;
      const Moments a = global_moments(exact.smoothed[k].mixture.modes[z]);
      const Moments b = global_moments(res.smoothed[k].mixture.modes[z]);
      EXPECT_LT(((a.mean - b.mean).array() / a.cov.diagonal().array().sqrt()).abs().maxCoeff(), 1e-7);
      EXPECT_LT(((a.cov - b.cov).diagonal().array() / a.cov.diagonal().array()).abs().maxCoeff(), 1e-7);
    }
  }
}

TEST(RunSmoother, MarginalsSumToOneAndCapsHold) {
  std::mt19937_64 rng(4);
  const auto model = fixtures::random_scalar_model(rng, 3);
  const auto prior = fixtures::random_prior(rng, 3, 1);
  const Dataset data = fixtures::random_dataset(rng, model, prior, 40);
  const auto res = run_smoother(model, prior, data, {3, 2, 2});
  for (const auto& st : res.smoothed) {
    double total = 0.0;
    for (double p : st.mode_marginal) total += p;
    EXPECT_NEAR(total, 1.0, 1e-12);
    for (std::size_t n : st.mixture.counts()) EXPECT_LE(n, 2u);
  }
}

TEST(RunSmoother, ThreadCountDoesNotChangeResult) {
  const auto p = example2();
  const Dataset data = simulate_preset(p, 5, 60);
  const auto one = run_smoother(p.model, p.prior, data, {4, 4, {}});
  SmootherOptions opts;
  opts.threads = 4;
  const auto four = run_smoother(p.model, p.prior, data, {4, 4, {}}, opts);
  for (std::size_t k = 0; k < data.size(); ++k) {
    const auto& a = one.smoothed[k].mixture;
    const auto& b = four.smoothed[k].mixture;
    ASSERT_EQ(a.counts(), b.counts());
    for (std::size_t z = 0; z < a.mode_count(); ++z) {
      for (std::size_t i = 0; i < a.modes[z].size(); ++i) {
        EXPECT_EQ(a.modes[z][i].log_weight, b.modes[z][i].log_weight);
        EXPECT_EQ(a.modes[z][i].mean, b.modes[z][i].mean);
        EXPECT_EQ(a.modes[z][i].cov, b.modes[z][i].cov);
      }
    }
  }
}

TEST(RunSmoother, SmoothingReducesVariance) {
  const auto p = example1();
  const Dataset data = simulate_preset(p, 7);
  const auto res = run_smoother(p.model, p.prior, data, {1, 1, {}});
  for (std::size_t k = 0; k < data.size(); ++k) {
    EXPECT_LE(res.smoothed[k].mixture.modes[0][0].cov(0, 0), res.forward[k].filtered.modes[0][0].cov(0, 0) + 1e-15);
  }
}

TEST(RunSmoother, RejectsZeroSmoothedCap) {
  const auto p = example2();
  EXPECT_THROW(run_smoother(p.model, p.prior, simulate_preset(p, 1, 4), {4, 4, 0}), InvalidArgument);
}
