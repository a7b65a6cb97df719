#pragma once

// Shared fixtures for the test binaries: random models, and a quadrature
// recursion for backward likelihoods of scalar models.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "jmls/jmls.hpp"

namespace jmls::fixtures {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

struct ScalarRanges {
  double abs_a_lo = 0.3, abs_a_hi = 0.8;
  double q_lo = 0.05, q_hi = 0.5;
  double r_lo = 0.2, r_hi = 2.0;
  double c_lo = 0.5, c_hi = 1.2;
  double b_max = 0.5, d_max = 0.2;
  double t_lo = 0.1, t_hi = 0.9;
};

/// Random scalar model with m modes, both timing conventions possible.
inline JmlsModel random_scalar_model(std::mt19937_64& rng, std::size_t m, const ScalarRanges& g = {}) {
  JmlsModel model;
  for (std::size_t z = 0; z < m; ++z) {
    const double sign = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
    model.modes.push_back(detail::scalar_mode(sign * uniform(rng, g.abs_a_lo, g.abs_a_hi), uniform(rng, -g.b_max, g.b_max),
                                              uniform(rng, g.c_lo, g.c_hi), uniform(rng, -g.d_max, g.d_max),
                                              uniform(rng, g.q_lo, g.q_hi), uniform(rng, g.r_lo, g.r_hi)));
  }
  model.transition = Matrix(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t j = 0; j < m; ++j) {
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double v = m == 1 ? 1.0 : uniform(rng, g.t_lo, g.t_hi);
      model.transition(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      total += v;
    }
    model.transition.col(static_cast<Eigen::Index>(j)) /= total;
  }
  model.timing = uniform(rng, 0.0, 1.0) < 0.5 ? Timing::SwitchAfterPrediction : Timing::SwitchBeforePrediction;
  return model;
}

/// Random prior with `per_mode` components in each mode.
inline HybridPrior random_prior(std::mt19937_64& rng, std::size_t m, Eigen::Index n, std::size_t per_mode = 1) {
  HybridPrior prior(m);
  std::vector<double> w(m * per_mode);
  for (double& v : w) v = uniform(rng, 0.2, 1.0);
  double total = 0.0;
  for (double v : w) total += v;
  for (std::size_t z = 0; z < m; ++z) {
    for (std::size_t i = 0; i < per_mode; ++i) {
      Vector mean(n);
      for (Eigen::Index d = 0; d < n; ++d) mean(d) = uniform(rng, -1.0, 1.0);
      Matrix F(n, n);
      for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < n; ++c) F(r, c) = uniform(rng, -1.0, 1.0);
      }
      const Matrix cov = F * F.transpose() + Matrix::Identity(n, n) * uniform(rng, 0.3, 1.5);
      prior.modes[z].push_back(GaussianComponent::from_weight(w[z * per_mode + i] / total, mean, cov));
    }
  }
  return prior;
}

inline Dataset random_dataset(std::mt19937_64& rng, const JmlsModel& model, const HybridPrior& prior, std::size_t N) {
  InputSpec spec;
  const auto u = generate_inputs(spec, N, model.p(), rng());
  return simulate(model, prior, u, rng());
}

inline GaussianComponent random_component(std::mt19937_64& rng, Eigen::Index n, double log_weight) {
  Vector mean(n);
  for (Eigen::Index d = 0; d < n; ++d) mean(d) = uniform(rng, -2.0, 2.0);
  Matrix F(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) F(i, j) = uniform(rng, -1.0, 1.0);
  }
  return GaussianComponent::from_log_weight(log_weight, mean, F * F.transpose() + 0.1 * Matrix::Identity(n, n));
}

template <class F>
double integrate(F&& f, double lo, double hi, double* err = nullptr) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, hi, 25, 1e-14, err);
}

/// p(y_{k+1:N} | x_k, z_k) for scalar models by quadrature.
///
/// Node values of g_k(x, z) = N(y_k | C x + D u_k, R) · f_k(x, z) are built on
/// a uniform grid by the trapezoid rule, which is spectrally accurate for
/// the smooth, rapidly decaying integrands involved. f_k at an arbitrary
/// point is then an adaptive Gauss-Kronrod integral of the transition
/// kernel against the interpolation of g_{k+1} given by the same rule.
class BackwardQuadrature {
 public:
  BackwardQuadrature(const JmlsModel& model, const Dataset& data, double half_width = 25.0, double step = 0.02)
      : model_(model), data_(data), h_(step) {
    const auto count = static_cast<std::size_t>(std::round(2.0 * half_width / step)) + 1;
    x_.resize(count);
    for (std::size_t i = 0; i < count; ++i) x_[i] = -half_width + step * static_cast<double>(i);
    const std::size_t N = data.size();
    const std::size_t m = model.m();
    g_.assign(N, std::vector<std::vector<double>>(m, std::vector<double>(count, 0.0)));
    for (std::size_t z = 0; z < m; ++z) {
      for (std::size_t i = 0; i < count; ++i) g_[N - 1][z][i] = measurement(N - 1, z, x_[i]);
    }
    for (std::size_t k = N - 1; k-- > 0;) {
      for (std::size_t z = 0; z < m; ++z) {
        for (std::size_t i = 0; i < count; ++i) g_[k][z][i] = measurement(k, z, x_[i]) * nystrom(k, z, x_[i]);
      }
    }
  }

  /// f_k(x, z) with adaptive quadrature at the outermost level.
  double future_likelihood(std::size_t k, std::size_t z, double x) const {
    if (k + 1 == data_.size()) return 1.0;
    double total = 0.0;
    for (std::size_t l = 0; l < model_.m(); ++l) {
      const double t = model_.T(l, z);
      if (t <= 0.0) continue;
      const auto& dyn = model_.dynamics(z, l);
      const double mean = dyn.A(0, 0) * x + (dyn.B * data_.u[model_.transition_input(k)])(0);
      const double var = dyn.Q(0, 0);
      const double sd = std::sqrt(var);
      auto integrand = [&](double xn) {
        return normal_pdf_scalar(xn, mean, var) * measurement(k + 1, l, xn) * interior(k + 1, l, xn);
      };
      total += t * integrate(integrand, mean - 14.0 * sd, mean + 14.0 * sd);
    }
    return total;
  }

 private:
  double measurement(std::size_t k, std::size_t z, double x) const {
    const auto& mp = model_.modes[z];
    const double mean = mp.C(0, 0) * x + (mp.D * data_.u[k])(0);
    return normal_pdf_scalar(data_.y[k](0), mean, mp.R(0, 0));
  }

  // f_k at an arbitrary point from the node values of g_{k+1}.
  double nystrom(std::size_t k, std::size_t z, double x) const {
    double total = 0.0;
    for (std::size_t l = 0; l < model_.m(); ++l) {
      const double t = model_.T(l, z);
      if (t <= 0.0) continue;
      const auto& dyn = model_.dynamics(z, l);
      const double mean = dyn.A(0, 0) * x + (dyn.B * data_.u[model_.transition_input(k)])(0);
      const double var = dyn.Q(0, 0);
      const double reach = 12.0 * std::sqrt(var);
      const auto lo = static_cast<std::size_t>(std::max(0.0, std::floor((mean - reach - x_.front()) / h_)));
      const auto hi = static_cast<std::size_t>(
          std::clamp(std::ceil((mean + reach - x_.front()) / h_), 0.0, static_cast<double>(x_.size() - 1)));
      double acc = 0.0;
      for (std::size_t j = lo; j <= hi && j < x_.size(); ++j) acc += normal_pdf_scalar(x_[j], mean, var) * g_[k + 1][l][j];
      total += t * acc * h_;
    }
    return total;
  }

  // f_k(x, z) for k < N−1, else 1.
  double interior(std::size_t k, std::size_t z, double x) const {
    return k + 1 == data_.size() ? 1.0 : nystrom(k, z, x);
  }

  const JmlsModel& model_;
  const Dataset& data_;
  double h_;
  std::vector<double> x_;
  std::vector<std::vector<std::vector<double>>> g_;  // [k][mode][node]
};

/// Worst grid L1 and mode-marginal difference between two smoothed sequences.
struct SmoothedDistance {
  double l1 = 0.0;
  double marginal = 0.0;
};

inline SmoothedDistance compare_smoothed(const std::vector<SmoothedState>& reference,
                                         const std::vector<SmoothedState>& candidate, std::size_t points = 2001) {
  SmoothedDistance out;
  for (std::size_t k = 0; k < reference.size(); ++k) {
    const auto axes = default_axes(reference[k].mixture, points);
    out.l1 = std::max(out.l1, grid_l1(evaluate_grid(reference[k].mixture, axes), evaluate_grid(candidate[k].mixture, axes)));
    for (std::size_t z = 0; z < reference[k].mode_marginal.size(); ++z) {
      out.marginal = std::max(out.marginal, std::abs(reference[k].mode_marginal[z] - candidate[k].mode_marginal[z]));
    }
  }
  return out;
}

}  // namespace jmls::fixtures
