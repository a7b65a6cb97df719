#pragma once

// Randomized invariant suites shared by the property runner and the
// acceptance binary.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "support.hpp"

namespace jmls::fixtures {

struct SuiteResult {
  std::string name;
  std::size_t cases = 0;
  std::size_t violations = 0;
  std::string first_violation;

  void fail(std::size_t index, const std::string& what) {
    if (violations++ == 0) first_violation = "case " + std::to_string(index) + ": " + what;
  }
};

namespace detail {

inline std::vector<GaussianComponent> random_components(std::mt19937_64& rng, Eigen::Index n, std::size_t count) {
  std::vector<GaussianComponent> comps;
  for (std::size_t i = 0; i < count; ++i) comps.push_back(random_component(rng, n, std::log(uniform(rng, 0.01, 1.0))));
  return comps;
}

inline double relative(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

inline double relative(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

inline Matrix random_orthonormal(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d) {
  Matrix M(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) M(i, j) = uniform(rng, -1.0, 1.0);
  }
  return Eigen::HouseholderQR<Matrix>(M).householderQ() * Matrix::Identity(n, d);
}

}  // namespace detail

/// reduce_mixture keeps total weight, mean and covariance for any cap.
inline SuiteResult mixture_moment_suite(std::size_t cases, std::uint64_t seed) {
  SuiteResult res{"mixture moments preserved by reduction", 0, 0, {}};
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < cases; ++i) {
    const auto n = static_cast<Eigen::Index>(1 + rng() % 3);
    const std::size_t count = 2 + rng() % 9;
    const std::size_t cap = 1 + rng() % count;
    const auto comps = detail::random_components(rng, n, count);
    const Moments before = global_moments(comps);
    const auto out = reduce_mixture(comps, cap);
    const Moments after = global_moments(out);
    ++res.cases;
    if (out.size() != std::min(cap, count)) res.fail(i, "component count " + std::to_string(out.size()));
    if (detail::relative(after.log_weight, before.log_weight) > 1e-12) res.fail(i, "total weight changed");
    if (detail::relative(Matrix(after.mean), Matrix(before.mean)) > 1e-10) res.fail(i, "mean changed");
    if (detail::relative(after.cov, before.cov) > 1e-10) res.fail(i, "covariance changed");
  }
  return res;
}

/// Filtered and smoothed weights sum to one and every covariance and
/// information matrix stays symmetric positive semidefinite, on random models.
inline std::pair<SuiteResult, SuiteResult> smoother_invariant_suites(std::size_t cases, std::uint64_t seed) {
  SuiteResult weights{"weights normalized", 0, 0, {}};
  SuiteResult psd{"covariances and information matrices PSD", 0, 0, {}};
  std::mt19937_64 rng(seed);
  auto check_cov = [&](std::size_t i, const Matrix& P, const char* what) {
    if (asymmetry(P) > 1e-12 * std::max(1.0, P.cwiseAbs().maxCoeff()) || !is_psd(P)) psd.fail(i, what);
  };
  for (std::size_t i = 0; i < cases; ++i) {
    const std::size_t m = 1 + rng() % 3;
    const auto model = random_scalar_model(rng, m);
    const auto prior = random_prior(rng, m, 1, 1 + rng() % 2);
    const Dataset data = random_dataset(rng, model, prior, 4 + rng() % 8);
    const SmootherCaps caps{1 + rng() % 4, 1 + rng() % 4, {}};
    const auto res = run_smoother(model, prior, data, caps);
    ++weights.cases;
    ++psd.cases;
    for (std::size_t k = 0; k < data.size(); ++k) {
      if (std::abs(std::exp(res.forward[k].filtered.total_log_weight()) - 1.0) > 1e-12) weights.fail(i, "filtered");
      if (std::abs(std::exp(res.smoothed[k].mixture.total_log_weight()) - 1.0) > 1e-12) weights.fail(i, "smoothed");
      double marg = 0.0;
      for (double p : res.smoothed[k].mode_marginal) marg += p;
      if (std::abs(marg - 1.0) > 1e-12) weights.fail(i, "mode marginal");
      for (const auto& mode : res.forward[k].filtered.modes) {
        for (const auto& c : mode) check_cov(i, c.cov, "filtered covariance");
      }
      for (const auto& mode : res.smoothed[k].mixture.modes) {
        for (const auto& c : mode) check_cov(i, c.cov, "smoothed covariance");
      }
      for (const auto* lik : {&res.backward[k].propagated, &res.backward[k].corrected}) {
        for (const auto& mode : lik->modes) {
          for (const auto& c : mode) check_cov(i, c.L, "likelihood information matrix");
        }
      }
    }
  }
  return {weights, psd};
}

/// reduce_likelihoods never leaves the range space of a group: merged
/// components keep rank, range(L) and s ∈ range(L).
inline SuiteResult range_space_suite(std::size_t cases, std::uint64_t seed) {
  SuiteResult res{"range space preserved by likelihood reduction", 0, 0, {}};
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < cases; ++i) {
    const auto n = static_cast<Eigen::Index>(2 + rng() % 3);
    const auto d = static_cast<Eigen::Index>(1 + rng() % static_cast<std::size_t>(n));
    const Matrix U = detail::random_orthonormal(rng, n, d);
    const std::size_t count = 2 + rng() % 7;
    std::vector<LikelihoodComponent> comps;
    for (std::size_t j = 0; j < count; ++j) {
      Matrix F(d, d);
      for (Eigen::Index a = 0; a < d; ++a) {
        for (Eigen::Index b = 0; b < d; ++b) F(a, b) = uniform(rng, -1.0, 1.0);
      }
      const Matrix S = F * F.transpose() + 0.2 * Matrix::Identity(d, d);
      Vector eta(d);
      for (Eigen::Index a = 0; a < d; ++a) eta(a) = uniform(rng, -2.0, 2.0);
      comps.push_back({uniform(rng, -1.0, 4.0), U * eta, U * S * U.transpose()});
    }
    const std::size_t cap = 1 + rng() % count;
    const auto out = reduce_likelihoods(comps, cap);
    ++res.cases;
    if (out.size() != cap) res.fail(i, "component count " + std::to_string(out.size()));
    const Matrix proj = U * U.transpose();
    for (const auto& c : out) {
      const double scale = std::max(1.0, c.L.cwiseAbs().maxCoeff());
      if ((c.L - proj * c.L * proj).cwiseAbs().maxCoeff() > 1e-9 * scale) res.fail(i, "L leaves range space");
      if ((c.s - proj * c.s).norm() > 1e-9 * std::max(1.0, c.s.norm())) res.fail(i, "s leaves range space");
      const auto f = try_range_space_factorize(c);
      if (!f || f->rank() != d) res.fail(i, "rank changed");
      else if (!same_range_space(f->U, U, 1e-7)) res.fail(i, "range changed");
    }
  }
  return res;
}

/// B(i, j) = B(j, i) ≥ 0, zero for identical components, and invariant to
/// a common rescaling of the weights up to that factor.
inline SuiteResult merge_bound_suite(std::size_t cases, std::uint64_t seed) {
  SuiteResult res{"merge bound symmetric and non-negative", 0, 0, {}};
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < cases; ++i) {
    const auto n = static_cast<Eigen::Index>(1 + rng() % 4);
    const auto a = random_component(rng, n, std::log(uniform(rng, 0.01, 1.0)));
    const auto b = random_component(rng, n, std::log(uniform(rng, 0.01, 1.0)));
    const double ab = kl_merge_bound(a, b);
    const double ba = kl_merge_bound(b, a);
    ++res.cases;
    if (std::abs(ab - ba) > 1e-12 * std::max(1.0, std::abs(ab))) res.fail(i, "asymmetric");
    if (ab < -1e-12) res.fail(i, "negative");
    if (std::abs(kl_merge_bound(a, a)) > 1e-12) res.fail(i, "non-zero for identical components");
    auto a2 = a, b2 = b;
    const double scale = uniform(rng, 0.1, 10.0);
    a2.log_weight += std::log(scale);
    b2.log_weight += std::log(scale);
    if (std::abs(kl_merge_bound(a2, b2) - scale * ab) > 1e-10 * std::max(1.0, scale * std::abs(ab))) {
      res.fail(i, "not homogeneous in the weights");
    }
  }
  return res;
}

inline std::vector<SuiteResult> run_property_suites(std::size_t cases = 1000, std::uint64_t seed = 20240611) {
  std::vector<SuiteResult> out;
  out.push_back(mixture_moment_suite(cases, seed));
  auto [weights, psd] = smoother_invariant_suites(cases, seed + 1);
  out.push_back(weights);
  out.push_back(psd);
  out.push_back(range_space_suite(cases, seed + 2));
  out.push_back(merge_bound_suite(cases, seed + 3));
  return out;
}

}  // namespace jmls::fixtures
