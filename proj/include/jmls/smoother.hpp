#pragma once

// Two-filter combination of forward filtered mixtures with backward
// propagated likelihoods, and the end-to-end smoother.

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <exception>
#include <optional>
#include <thread>
#include <vector>

#include "jmls/backward.hpp"
#include "jmls/forward.hpp"
#include "jmls/likelihood.hpp"
#include "jmls/mixture.hpp"
#include "jmls/model.hpp"

namespace jmls {

struct SmoothedState {
  std::size_t k = 0;  // zero-based time index
  GaussianMixture mixture;
  std::vector<double> mode_marginal;
};

namespace detail {

// Filtered-component quantities reused across every likelihood component.
struct PreparedGaussian {
  double log_weight = 0.0;
  Matrix precision;         // P⁻¹
  Vector info_mean;         // P⁻¹μ
  double mahalanobis = 0.0; // μᵀP⁻¹μ
  double logdet_cov = 0.0;  // ln|P|
};

inline PreparedGaussian prepare(const GaussianComponent& c) {
  const auto llt = cholesky(c.cov, "filtered covariance");
  PreparedGaussian p;
  p.log_weight = c.log_weight;
  p.precision = llt.solve(Matrix::Identity(c.dim(), c.dim()));
  p.info_mean = llt.solve(c.mean);
  p.mahalanobis = c.mean.dot(p.info_mean);
  p.logdet_cov = log_det(llt);
  return p;
}

inline GaussianComponent combine_prepared(const PreparedGaussian& f, const LikelihoodComponent& bif) {
  const Matrix info = symmetrize(f.precision + bif.L);
  const auto llt = cholesky(info, "combined information matrix");
  const Vector h = f.info_mean - bif.s;
  GaussianComponent out;
  out.mean = llt.solve(h);
  out.cov = symmetrize(llt.solve(Matrix::Identity(info.rows(), info.cols())));
  const double beta = h.dot(out.mean) - f.mahalanobis - bif.r;
  out.log_weight = f.log_weight + 0.5 * beta + 0.5 * (-log_det(llt) - f.logdet_cov);
  return out;
}

}  // namespace detail

/// w̄·N(x | μ̄, P̄) = w·N(x | μ, P)·L(x | r, s, L); the returned log-weight is
/// unnormalized.
inline GaussianComponent combine_component(const GaussianComponent& filtered, const LikelihoodComponent& bif) {
  if (filtered.dim() != bif.dim()) throw InvalidArgument("combine_component: dimension mismatch");
  return detail::combine_prepared(detail::prepare(filtered), bif);
}

/// Smoothed hybrid mixture at one step from the filtered mixture and the
/// propagated (pre-correction) backward likelihood at the same step.
inline SmoothedState smooth_step(const GaussianMixture& filtered, const LikelihoodMixture& propagated,
                                 std::size_t k = 0) {
  if (filtered.mode_count() != propagated.mode_count()) throw InvalidArgument("smooth_step: mode count mismatch");
  SmoothedState st;
  st.k = k;
  st.mixture = GaussianMixture(filtered.mode_count());
  for (std::size_t z = 0; z < filtered.mode_count(); ++z) {
    std::vector<detail::PreparedGaussian> prepared;
    prepared.reserve(filtered.modes[z].size());
    for (const auto& c : filtered.modes[z]) {
      if (c.log_weight != kNegInf) prepared.push_back(detail::prepare(c));
    }
    auto& dest = st.mixture.modes[z];
    dest.reserve(prepared.size() * propagated.modes[z].size());
    for (const auto& lik : propagated.modes[z]) {
      for (const auto& f : prepared) dest.push_back(detail::combine_prepared(f, lik));
    }
  }
  const double total = st.mixture.total_log_weight();
  if (!std::isfinite(total)) throw NumericalError("smooth_step: total smoothed weight underflowed");
  st.mixture.normalize();
  st.mode_marginal = st.mixture.mode_marginals();
  return st;
}

struct SmootherCaps {
  std::size_t forward = kUnbounded;
  std::size_t backward = kUnbounded;
  std::optional<std::size_t> smoothed;
};

struct SmootherOptions {
  RangeSpaceOptions range;
  unsigned threads = 1;
};

struct SmootherResult {
  std::vector<ForwardState> forward;
  std::vector<BackwardState> backward;
  std::vector<SmoothedState> smoothed;
  double forward_seconds = 0.0;
  double backward_seconds = 0.0;
  double combine_seconds = 0.0;
};

inline SmootherResult run_smoother(const JmlsModel& model, const HybridPrior& prior, const Dataset& data,
                                   const SmootherCaps& caps = {}, const SmootherOptions& opts = {}) {
  using Clock = std::chrono::steady_clock;
  auto seconds_since = [](Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
  };
  if (caps.smoothed && *caps.smoothed < 1) throw InvalidArgument("run_smoother: smoothed cap must be at least 1");

  SmootherResult res;
  auto t0 = Clock::now();
  res.forward = run_forward(model, prior, data, caps.forward);
  res.forward_seconds = seconds_since(t0);

  t0 = Clock::now();
  res.backward = run_backward(model, data, caps.backward, opts.range);
  res.backward_seconds = seconds_since(t0);

  t0 = Clock::now();
  const std::size_t N = data.size();
  res.smoothed.resize(N);
  auto work = [&](std::size_t k) {
    SmoothedState st;
    if (k + 1 == N) {
      // Empty future: the smoothed distribution is the filtered one.
      st.k = k;
      st.mixture = res.forward[k].filtered;
      st.mixture.normalize();
    } else {
      st = smooth_step(res.forward[k].filtered, res.backward[k].propagated, k);
    }
    if (caps.smoothed) {
      st.mixture = reduce_mixture(st.mixture, *caps.smoothed);
      st.mixture.normalize();
    }
    st.mode_marginal = st.mixture.mode_marginals();
    res.smoothed[k] = std::move(st);
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(opts.threads, static_cast<unsigned>(N)));
  if (threads == 1) {
    for (std::size_t k = 0; k < N; ++k) work(k);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    {
      std::vector<std::jthread> pool;
      for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
          try {
            for (std::size_t k = t; k < N; k += threads) work(k);
          } catch (...) {
            errors[t] = std::current_exception();
          }
        });
      }
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  res.combine_seconds = seconds_since(t0);
  return res;
}

}  // namespace jmls
