#pragma once

// Backward information filter over likelihood mixtures. `propagated` at k
// holds p(y_{k+1:N} | x_k, z_k); `corrected` holds p(y_{k:N} | x_k, z_k).

#include <cstddef>
#include <vector>

#include "jmls/likelihood.hpp"
#include "jmls/model.hpp"

namespace jmls {

struct BackwardState {
  std::size_t k = 0;  // zero-based time index
  LikelihoodMixture propagated;
  LikelihoodMixture corrected;
  std::vector<std::size_t> counts_before_reduction;
};

/// One null component per mode: the empty-future likelihood at k = N.
inline LikelihoodMixture null_likelihood(const JmlsModel& model) {
  LikelihoodMixture out(model.m());
  for (auto& mode : out.modes) mode.push_back(LikelihoodComponent::null(model.n()));
  return out;
}

/// For each mode z_k, each next mode ℓ with T(ℓ|z_k) > 0 and each corrected
/// component i of ℓ: propagate through the transition's dynamics and absorb
/// T(ℓ|z_k). Components are laid out with ℓ outer and i inner.
inline LikelihoodMixture propagate_step(const LikelihoodMixture& corrected_next, const JmlsModel& model,
                                        const Vector& u) {
  const std::size_t m = model.m();
  LikelihoodMixture out(m);
  for (std::size_t z = 0; z < m; ++z) {
    for (std::size_t l = 0; l < m; ++l) {
      const double t = model.T(l, z);
      if (t <= 0.0) continue;
      const auto& dyn = model.dynamics(z, l);
      const Vector b = dyn.B * u;
      for (const auto& c : corrected_next.modes[l]) {
        out.modes[z].push_back(apply_transition_constant(backward_propagate(c, dyn.A, b, dyn.Q), t));
      }
    }
  }
  return out;
}

inline LikelihoodMixture correct_step(const LikelihoodMixture& propagated, const JmlsModel& model, const Vector& u,
                                      const Vector& y) {
  LikelihoodMixture out(model.m());
  for (std::size_t z = 0; z < model.m(); ++z) {
    const auto& mp = model.modes[z];
    const Vector d = mp.D * u;
    for (const auto& c : propagated.modes[z]) out.modes[z].push_back(measurement_correct(c, mp.C, d, mp.R, y));
  }
  return out;
}

/// Runs the recursion from k = N down to 1. `cap` bounds each range-space
/// group of each mode after propagation.
inline std::vector<BackwardState> run_backward(const JmlsModel& model, const Dataset& data, std::size_t cap,
                                               const RangeSpaceOptions& opts = {}) {
  if (cap < 1) throw InvalidArgument("run_backward: cap must be at least 1");
  if (const auto rep = validate_model(model); !rep.ok()) throw InvalidArgument("run_backward: " + rep.summary());
  const std::size_t N = data.size();
  if (N == 0 || data.u.size() != N) throw InvalidArgument("run_backward: u and y must have equal, non-zero length");

  std::vector<BackwardState> states(N);
  {
    auto& last = states[N - 1];
    last.k = N - 1;
    last.propagated = null_likelihood(model);
    last.counts_before_reduction = last.propagated.counts();
    last.corrected = correct_step(last.propagated, model, data.u[N - 1], data.y[N - 1]);
  }
  for (std::size_t k = N - 1; k-- > 0;) {
    auto& st = states[k];
    st.k = k;
    LikelihoodMixture propagated = propagate_step(states[k + 1].corrected, model, data.u[model.transition_input(k)]);
    st.counts_before_reduction = propagated.counts();
    st.propagated = cap == kUnbounded ? std::move(propagated) : reduce_likelihoods(propagated, cap, opts);
    st.corrected = correct_step(st.propagated, model, data.u[k], data.y[k]);
  }
  return states;
}

}  // namespace jmls
