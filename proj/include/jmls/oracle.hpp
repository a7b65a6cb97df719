#pragma once

// Reference solutions used to certify the smoother: exact enumeration over
// mode sequences, the classical RTS smoother, density grids and divergences.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "jmls/linalg.hpp"
#include "jmls/mixture.hpp"
#include "jmls/model.hpp"
#include "jmls/smoother.hpp"

namespace jmls {

struct EnumerationResult {
  std::vector<SmoothedState> smoothed;
  std::vector<GaussianMixture> filtered;      // p(x_k, z_k | y_{1:k})
  std::vector<double> sequence_log_posterior;  // one entry per feasible (prior component, z_{1:N})
  std::vector<std::vector<std::size_t>> sequences;
};

struct RtsResult {
  std::vector<Vector> filtered_mean;
  std::vector<Matrix> filtered_cov;
  std::vector<Vector> smoothed_mean;
  std::vector<Matrix> smoothed_cov;
  double log_likelihood = 0.0;
};

namespace detail {

struct KalmanPath {
  std::vector<Vector> pred_mean, filt_mean;
  std::vector<Matrix> pred_cov, filt_cov, transition_A;
};

// Textbook Kalman update, kept separate from the forward module so the oracle
// stays an independent route.
inline double kalman_update(const Vector& mean, const Matrix& cov, const ModeParams& mp, const Vector& u,
                            const Vector& y, Vector& mean_out, Matrix& cov_out) {
  const Vector resid = y - mp.C * mean - mp.D * u;
  const Matrix S = symmetrize(mp.C * cov * mp.C.transpose() + mp.R);
  const Eigen::LDLT<Matrix> S_fact(S);
  const Matrix K = cov * mp.C.transpose() * S_fact.solve(Matrix::Identity(S.rows(), S.cols()));
  mean_out = mean + K * resid;
  cov_out = symmetrize(cov - K * mp.C * cov);
  const double logdet = S_fact.vectorD().array().log().sum();
  return -0.5 * (resid.dot(S_fact.solve(resid)) + logdet + static_cast<double>(y.size()) * kLog2Pi);
}

inline void rts_pass(const KalmanPath& path, std::vector<Vector>& mean, std::vector<Matrix>& cov) {
  const std::size_t N = path.filt_mean.size();
  mean.assign(N, Vector());
  cov.assign(N, Matrix());
  mean[N - 1] = path.filt_mean[N - 1];
  cov[N - 1] = path.filt_cov[N - 1];
  for (std::size_t k = N - 1; k-- > 0;) {
    const Matrix& A = path.transition_A[k];
    const Matrix& Pp = path.pred_cov[k + 1];
    const Matrix G = Eigen::FullPivLU<Matrix>(Pp).solve(A * path.filt_cov[k]).transpose();
    mean[k] = path.filt_mean[k] + G * (mean[k + 1] - path.pred_mean[k + 1]);
    cov[k] = symmetrize(path.filt_cov[k] + G * (cov[k + 1] - Pp) * G.transpose());
  }
}

}  // namespace detail

/// Kalman filter and Rauch-Tung-Striebel smoother for a single-mode model.
/// `timing` selects which input enters the transition k → k+1.
inline RtsResult rts_smoother(const ModeParams& mp, const Vector& prior_mean, const Matrix& prior_cov,
                              const Dataset& data, Timing timing = Timing::SwitchAfterPrediction) {
  const std::size_t N = data.size();
  if (N == 0) throw InvalidArgument("rts_smoother: empty dataset");
  detail::KalmanPath path;
  RtsResult res;
  Vector mean = prior_mean;
  Matrix cov = prior_cov;
  for (std::size_t k = 0; k < N; ++k) {
    path.pred_mean.push_back(mean);
    path.pred_cov.push_back(cov);
    Vector fm;
    Matrix fc;
    res.log_likelihood += detail::kalman_update(mean, cov, mp, data.u[k], data.y[k], fm, fc);
    path.filt_mean.push_back(fm);
    path.filt_cov.push_back(fc);
    path.transition_A.push_back(mp.A);
    if (k + 1 < N) {
      const Vector& u = data.u[timing == Timing::SwitchAfterPrediction ? k : k + 1];
      mean = mp.A * fm + mp.B * u;
      cov = symmetrize(mp.A * fc * mp.A.transpose() + mp.Q);
    }
  }
  res.filtered_mean = path.filt_mean;
  res.filtered_cov = path.filt_cov;
  detail::rts_pass(path, res.smoothed_mean, res.smoothed_cov);
  return res;
}

/// Exact smoothed and filtered hybrid distributions by conditioning on every
/// mode sequence with non-zero prior probability. Refuses when
/// m^N · (prior components) exceeds `max_sequences`.
inline EnumerationResult enumerate_smoother(const JmlsModel& model, const HybridPrior& prior, const Dataset& data,
                                            double max_sequences = 1e6) {
  if (const auto rep = validate_model(model); !rep.ok()) throw InvalidArgument("enumerate_smoother: " + rep.summary());
  if (const auto rep = validate_prior(model, prior); !rep.ok()) {
    throw InvalidArgument("enumerate_smoother: " + rep.summary());
  }
  const std::size_t N = data.size();
  const std::size_t m = model.m();
  if (N == 0) throw InvalidArgument("enumerate_smoother: empty dataset");
  const double work = std::pow(static_cast<double>(m), static_cast<double>(N)) *
                      static_cast<double>(prior.component_count());
  if (work > max_sequences) throw InvalidArgument("enumerate_smoother: sequence count exceeds guard");

  EnumerationResult res;
  res.filtered.assign(N, GaussianMixture(m));
  std::vector<std::vector<GaussianComponent>> smoothed_flat(N);
  std::vector<std::vector<std::size_t>> smoothed_mode(N);

  detail::KalmanPath path;
  path.pred_mean.resize(N);
  path.pred_cov.resize(N);
  path.filt_mean.resize(N);
  path.filt_cov.resize(N);
  path.transition_A.resize(N);
  std::vector<std::size_t> seq(N);

  std::vector<Vector> sm_mean;
  std::vector<Matrix> sm_cov;

  // Depth-first over sequences; log_joint = ln p(z_{1:k}, prior component, y_{1:k-1}).
  auto visit = [&](auto&& self, std::size_t k, double log_joint) -> void {
    const auto& mp = model.modes[seq[k]];
    const double loglik = detail::kalman_update(path.pred_mean[k], path.pred_cov[k], mp, data.u[k], data.y[k],
                                                path.filt_mean[k], path.filt_cov[k]);
    const double lj = log_joint + loglik;
    res.filtered[k].modes[seq[k]].push_back({lj, path.filt_mean[k], path.filt_cov[k]});
    if (k + 1 == N) {
      detail::rts_pass(path, sm_mean, sm_cov);
      for (std::size_t t = 0; t < N; ++t) {
        smoothed_flat[t].push_back({lj, sm_mean[t], sm_cov[t]});
        smoothed_mode[t].push_back(seq[t]);
      }
      res.sequence_log_posterior.push_back(lj);
      res.sequences.push_back(seq);
      return;
    }
    for (std::size_t next = 0; next < m; ++next) {
      const double t = model.T(next, seq[k]);
      if (t <= 0.0) continue;
      const auto& dyn = model.dynamics(seq[k], next);
      const Vector& u = data.u[model.transition_input(k)];
      path.transition_A[k] = dyn.A;
      path.pred_mean[k + 1] = dyn.A * path.filt_mean[k] + dyn.B * u;
      path.pred_cov[k + 1] = symmetrize(dyn.A * path.filt_cov[k] * dyn.A.transpose() + dyn.Q);
      seq[k + 1] = next;
      self(self, k + 1, lj + std::log(t));
    }
  };

  for (std::size_t z = 0; z < m; ++z) {
    for (const auto& c : prior.modes[z]) {
      if (c.log_weight == kNegInf) continue;
      seq[0] = z;
      path.pred_mean[0] = c.mean;
      path.pred_cov[0] = c.cov;
      visit(visit, 0, c.log_weight);
    }
  }

  const double evidence = log_sum_exp(res.sequence_log_posterior);
  for (double& lp : res.sequence_log_posterior) lp -= evidence;
  res.smoothed.resize(N);
  for (std::size_t t = 0; t < N; ++t) {
    auto& st = res.smoothed[t];
    st.k = t;
    st.mixture = GaussianMixture(m);
    for (std::size_t i = 0; i < smoothed_flat[t].size(); ++i) {
      auto c = std::move(smoothed_flat[t][i]);
      c.log_weight -= evidence;
      st.mixture.modes[smoothed_mode[t][i]].push_back(std::move(c));
    }
    st.mode_marginal = st.mixture.mode_marginals();
    res.filtered[t].normalize();
  }
  return res;
}

struct GridAxis {
  double min = 0.0;
  double max = 0.0;
  std::size_t count = 0;

  double step() const { return count > 1 ? (max - min) / static_cast<double>(count - 1) : 1.0; }
  double at(std::size_t i) const { return min + step() * static_cast<double>(i); }
  bool operator==(const GridAxis&) const = default;
};

/// Per-mode density tabulated on a uniform grid (first axis varies slowest).
struct DensityGrid {
  std::vector<GridAxis> axes;
  std::vector<std::vector<double>> values;  // [mode][point]

  double cell_volume() const {
    double v = 1.0;
    for (const auto& a : axes) v *= a.step();
    return v;
  }
  std::size_t point_count() const {
    std::size_t n = 1;
    for (const auto& a : axes) n *= a.count;
    return n;
  }
  std::vector<double> marginal() const {
    std::vector<double> out(point_count(), 0.0);
    for (const auto& mode : values) {
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += mode[i];
    }
    return out;
  }
  double integral() const {
    double acc = 0.0;
    for (const auto& mode : values) {
      for (double v : mode) acc += v;
    }
    return acc * cell_volume();
  }
};

/// Axes spanning mean ± half_width·σ of the mixture's global moments.
inline std::vector<GridAxis> default_axes(const GaussianMixture& mix, std::size_t points = 2001,
                                          double half_width = 8.0) {
  const Moments mom = global_moments(mix);
  std::vector<GridAxis> axes;
  for (Eigen::Index d = 0; d < mom.mean.size(); ++d) {
    const double sd = std::sqrt(mom.cov(d, d));
    axes.push_back({mom.mean(d) - half_width * sd, mom.mean(d) + half_width * sd, points});
  }
  return axes;
}

inline DensityGrid evaluate_grid(const GaussianMixture& mix, const std::vector<GridAxis>& axes) {
  const auto n = mix.dim();
  if (n > 2 || axes.size() > 2) throw InvalidArgument("evaluate_grid: grids beyond two dimensions are not supported");
  if (static_cast<std::size_t>(n) != axes.size()) throw InvalidArgument("evaluate_grid: axis count mismatch");
  DensityGrid grid;
  grid.axes = axes;
  grid.values.assign(mix.mode_count(), std::vector<double>(grid.point_count(), 0.0));
  for (std::size_t z = 0; z < mix.mode_count(); ++z) {
    auto& vals = grid.values[z];
    for (const auto& c : mix.modes[z]) {
      if (c.log_weight == kNegInf) continue;
      if (n == 1) {
        const auto& ax = axes[0];
        const double var = c.cov(0, 0);
        const double h = ax.step();
        const double log_norm = c.log_weight - 0.5 * (std::log(var) + kLog2Pi);
        // Walk outward from the grid point nearest the mean using
        // g(x ± h) = g(x)·exp(∓(x − μ)h/v − h²/2v), stopping once the
        // kernel underflows to zero.
        const double pos = std::clamp(std::round((c.mean(0) - ax.min) / h), 0.0, static_cast<double>(ax.count - 1));
        const auto start = static_cast<std::size_t>(pos);
        const double d0 = ax.at(start) - c.mean(0);
        const double g0 = std::exp(log_norm - 0.5 * d0 * d0 / var);
        const double decay = std::exp(-h * h / var);
        vals[start] += g0;
        double g = g0;
        double ratio = std::exp(-(d0 * h + 0.5 * h * h) / var);
        for (std::size_t i = start + 1; i < ax.count && g > 0.0; ++i) {
          g *= ratio;
          ratio *= decay;
          vals[i] += g;
        }
        g = g0;
        ratio = std::exp((d0 * h - 0.5 * h * h) / var);
        for (std::size_t i = start; i-- > 0 && g > 0.0;) {
          g *= ratio;
          ratio *= decay;
          vals[i] += g;
        }
      } else {
        const auto llt = cholesky(c.cov, "grid component covariance");
        const Matrix prec = llt.solve(Matrix::Identity(2, 2));
        const double log_norm = c.log_weight - 0.5 * (log_det(llt) + 2.0 * kLog2Pi);
        const auto& ax = axes[0];
        const auto& ay = axes[1];
        for (std::size_t i = 0; i < ax.count; ++i) {
          const double dx = ax.at(i) - c.mean(0);
          for (std::size_t j = 0; j < ay.count; ++j) {
            const double dy = ay.at(j) - c.mean(1);
            const double q = prec(0, 0) * dx * dx + 2.0 * prec(0, 1) * dx * dy + prec(1, 1) * dy * dy;
            vals[i * ay.count + j] += std::exp(log_norm - 0.5 * q);
          }
        }
      }
    }
  }
  return grid;
}

inline DensityGrid evaluate_grid(const SmoothedState& st, const std::vector<GridAxis>& axes) {
  return evaluate_grid(st.mixture, axes);
}

namespace detail {

inline void require_same_axes(const DensityGrid& p, const DensityGrid& q, const char* what) {
  if (p.axes != q.axes || p.values.size() != q.values.size()) {
    throw InvalidArgument(std::string(what) + ": grids have different axes or mode counts");
  }
}

}  // namespace detail

/// Hybrid KL divergence Σ_z ∫ p ln(p / max(q, floor)) on a common grid.
inline double grid_kl(const DensityGrid& p, const DensityGrid& q, double floor = 1e-300) {
  detail::require_same_axes(p, q, "grid_kl");
  if (!(floor > 0.0)) throw InvalidArgument("grid_kl: floor must be positive");
  double acc = 0.0;
  for (std::size_t z = 0; z < p.values.size(); ++z) {
    for (std::size_t i = 0; i < p.values[z].size(); ++i) {
      const double pv = p.values[z][i];
      if (pv > 0.0) acc += pv * std::log(pv / std::max(q.values[z][i], floor));
    }
  }
  return acc * p.cell_volume();
}

/// Σ_z ∫ |p − q| on a common grid.
inline double grid_l1(const DensityGrid& p, const DensityGrid& q) {
  detail::require_same_axes(p, q, "grid_l1");
  double acc = 0.0;
  for (std::size_t z = 0; z < p.values.size(); ++z) {
    for (std::size_t i = 0; i < p.values[z].size(); ++i) acc += std::abs(p.values[z][i] - q.values[z][i]);
  }
  return acc * p.cell_volume();
}

/// Largest pointwise difference of the mode-marginalized densities.
inline double grid_max_abs_diff(const DensityGrid& p, const DensityGrid& q) {
  detail::require_same_axes(p, q, "grid_max_abs_diff");
  const auto mp = p.marginal();
  const auto mq = q.marginal();
  double out = 0.0;
  for (std::size_t i = 0; i < mp.size(); ++i) out = std::max(out, std::abs(mp[i] - mq[i]));
  return out;
}

}  // namespace jmls
