#pragma once

// Forward hybrid filter: per-component Kalman correction with global weight
// normalization, mode-coupled prediction, and per-mode KL reduction.

#include <cstddef>
#include <vector>

#include "jmls/linalg.hpp"
#include "jmls/mixture.hpp"
#include "jmls/model.hpp"

namespace jmls {

/// Filtered components whose log-weight falls this far below the step
/// maximum are dropped before reduction.
inline constexpr double kLogWeightFloor = 700.0;

struct ForwardState {
  std::size_t k = 0;  // zero-based time index
  GaussianMixture predicted;
  GaussianMixture filtered;
  std::vector<std::size_t> counts_before_reduction;
};

struct Innovation {
  Vector predicted_output;
  Matrix cov;
  Matrix gain;
};

inline Innovation innovation(const GaussianComponent& c, const ModeParams& mp, const Vector& u) {
  Innovation inn;
  inn.predicted_output = mp.C * c.mean + mp.D * u;
  inn.cov = symmetrize(mp.C * c.cov * mp.C.transpose() + mp.R);
  const auto llt = cholesky(inn.cov, "innovation covariance");
  inn.gain = llt.solve(mp.C * c.cov).transpose();
  return inn;
}

/// Measurement update of every component followed by normalization across
/// all modes and components.
inline GaussianMixture correct(const GaussianMixture& predicted, const JmlsModel& model, const Vector& u,
                               const Vector& y) {
  if (predicted.mode_count() != model.m()) throw InvalidArgument("correct: mode count mismatch");
  if (predicted.component_count() == 0) throw InvalidArgument("correct: empty predicted mixture");
  GaussianMixture out(model.m());
  double max_loglik = kNegInf;
  for (std::size_t z = 0; z < model.m(); ++z) {
    const auto& mp = model.modes[z];
    const auto n = model.n();
    for (const auto& c : predicted.modes[z]) {
      if (c.log_weight == kNegInf) continue;
      const Innovation inn = innovation(c, mp, u);
      const Matrix& K = inn.gain;
      const double loglik = log_normal_pdf(y, inn.predicted_output, inn.cov);
      max_loglik = std::max(max_loglik, loglik);

      const Matrix I_KC = Matrix::Identity(n, n) - K * mp.C;
      GaussianComponent f;
      f.log_weight = c.log_weight + loglik;
      f.mean = c.mean + K * (y - inn.predicted_output);
      f.cov = symmetrize(I_KC * c.cov * I_KC.transpose() + K * mp.R * K.transpose());
      out.modes[z].push_back(std::move(f));
    }
  }
  const double total = out.total_log_weight();
  if (!std::isfinite(total)) {
    throw NumericalError("correct: all component weights underflowed (max log-likelihood " +
                         std::to_string(max_loglik) + ")");
  }
  for (auto& mode : out.modes) {
    for (auto& c : mode) c.log_weight -= total;
  }
  return out;
}

/// Propagates every (source mode ℓ, component i) pair into every destination
/// mode with T(dest | ℓ) > 0. Per destination, components are laid out with
/// ℓ outer and i inner.
inline GaussianMixture predict(const GaussianMixture& filtered, const JmlsModel& model, const Vector& u) {
  const std::size_t m = model.m();
  GaussianMixture out(m);

  auto propagate = [&](const GaussianComponent& c, const ModeParams& dyn, double log_t) {
    GaussianComponent p;
    p.log_weight = c.log_weight + log_t;
    p.mean = dyn.A * c.mean + dyn.B * u;
    p.cov = symmetrize(dyn.A * c.cov * dyn.A.transpose() + dyn.Q);
    return p;
  };

  if (model.timing == Timing::SwitchAfterPrediction) {
    // Moments depend only on the source mode; propagate once per component.
    std::vector<std::vector<GaussianComponent>> moved(m);
    for (std::size_t l = 0; l < m; ++l) {
      for (const auto& c : filtered.modes[l]) moved[l].push_back(propagate(c, model.modes[l], 0.0));
    }
    for (std::size_t dest = 0; dest < m; ++dest) {
      for (std::size_t l = 0; l < m; ++l) {
        const double t = model.T(dest, l);
        if (t <= 0.0) continue;
        for (const auto& c : moved[l]) {
          GaussianComponent p = c;
          p.log_weight += std::log(t);
          out.modes[dest].push_back(std::move(p));
        }
      }
    }
    return out;
  }

  for (std::size_t dest = 0; dest < m; ++dest) {
    for (std::size_t l = 0; l < m; ++l) {
      const double t = model.T(dest, l);
      if (t <= 0.0) continue;
      for (const auto& c : filtered.modes[l]) out.modes[dest].push_back(propagate(c, model.modes[dest], std::log(t)));
    }
  }
  return out;
}

namespace detail {

inline void drop_negligible(GaussianMixture& mix, double floor) {
  double top = kNegInf;
  for (const auto& mode : mix.modes) {
    for (const auto& c : mode) top = std::max(top, c.log_weight);
  }
  for (auto& mode : mix.modes) {
    std::erase_if(mode, [&](const GaussianComponent& c) { return c.log_weight < top - floor; });
  }
}

}  // namespace detail

inline std::vector<ForwardState> run_forward(const JmlsModel& model, const HybridPrior& prior, const Dataset& data,
                                             std::size_t cap) {
  if (cap < 1) throw InvalidArgument("run_forward: cap must be at least 1");
  if (const auto rep = validate_model(model); !rep.ok()) throw InvalidArgument("run_forward: " + rep.summary());
  if (const auto rep = validate_prior(model, prior); !rep.ok()) throw InvalidArgument("run_forward: " + rep.summary());
  const std::size_t N = data.size();
  if (N == 0 || data.u.size() != N) throw InvalidArgument("run_forward: u and y must have equal, non-zero length");

  std::vector<ForwardState> states;
  states.reserve(N);
  GaussianMixture predicted(model.m());
  for (std::size_t z = 0; z < model.m(); ++z) {
    for (const auto& c : prior.modes[z]) {
      if (c.log_weight != kNegInf) predicted.modes[z].push_back(c);
    }
  }
  for (std::size_t k = 0; k < N; ++k) {
    ForwardState st;
    st.k = k;
    st.predicted = std::move(predicted);
    GaussianMixture filtered = correct(st.predicted, model, data.u[k], data.y[k]);
    st.counts_before_reduction = filtered.counts();
    detail::drop_negligible(filtered, kLogWeightFloor);
    st.filtered = cap == kUnbounded ? std::move(filtered) : reduce_mixture(filtered, cap);
    st.filtered.normalize();
    if (k + 1 < N) predicted = predict(st.filtered, model, data.u[model.transition_input(k)]);
    states.push_back(std::move(st));
  }
  return states;
}

}  // namespace jmls
