#pragma once

// Moment-form Gaussian components and mixtures, moment-matched merging,
// greedy Kullback-Leibler bound reduction, and the entropy diagnostic.

#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "jmls/linalg.hpp"

namespace jmls {

/// Weighted Gaussian w·N(x | mean, cov). The weight is held as a log-weight.
struct GaussianComponent {
  double log_weight = kNegInf;
  Vector mean;
  Matrix cov;

  static GaussianComponent from_weight(double weight, Vector mean, Matrix cov) {
    return {std::log(weight), std::move(mean), symmetrize(cov)};
  }
  static GaussianComponent from_log_weight(double log_weight, Vector mean, Matrix cov) {
    return {log_weight, std::move(mean), symmetrize(cov)};
  }

  double weight() const { return std::exp(log_weight); }
  Eigen::Index dim() const { return mean.size(); }
};

/// Indexed Gaussian mixture: one list of components per discrete mode.
struct GaussianMixture {
  std::vector<std::vector<GaussianComponent>> modes;

  GaussianMixture() = default;
  explicit GaussianMixture(std::size_t mode_count) : modes(mode_count) {}

  std::size_t mode_count() const { return modes.size(); }

  Eigen::Index dim() const {
    for (const auto& mode : modes) {
      if (!mode.empty()) return mode.front().dim();
    }
    return 0;
  }

  std::size_t component_count() const {
    std::size_t n = 0;
    for (const auto& mode : modes) n += mode.size();
    return n;
  }

  std::vector<std::size_t> counts() const {
    std::vector<std::size_t> out;
    out.reserve(modes.size());
    for (const auto& mode : modes) out.push_back(mode.size());
    return out;
  }

  double total_log_weight() const {
    std::vector<double> lw;
    for (const auto& mode : modes) {
      for (const auto& c : mode) lw.push_back(c.log_weight);
    }
    return log_sum_exp(lw);
  }

  std::vector<double> mode_log_marginals() const {
    std::vector<double> out;
    out.reserve(modes.size());
    for (const auto& mode : modes) {
      std::vector<double> lw;
      lw.reserve(mode.size());
      for (const auto& c : mode) lw.push_back(c.log_weight);
      out.push_back(log_sum_exp(lw));
    }
    return out;
  }

  std::vector<double> mode_marginals() const {
    std::vector<double> out;
    const double total = total_log_weight();
    for (double lw : mode_log_marginals()) out.push_back(std::exp(lw - total));
    return out;
  }

  /// Rescales all weights so they sum to one; returns the log of the old total.
  double normalize() {
    const double total = total_log_weight();
    if (!std::isfinite(total)) throw NumericalError("cannot normalize a mixture with zero or non-finite total weight");
    for (auto& mode : modes) {
      for (auto& c : mode) c.log_weight -= total;
    }
    return total;
  }

  std::vector<GaussianComponent> flattened() const {
    std::vector<GaussianComponent> out;
    for (const auto& mode : modes) out.insert(out.end(), mode.begin(), mode.end());
    return out;
  }
};

struct Moments {
  double log_weight = kNegInf;
  Vector mean;
  Matrix cov;
};

/// Zeroth, first and second moments of a set of weighted components, with the
/// mean and covariance normalized by the total weight.
inline Moments global_moments(std::span<const GaussianComponent> comps) {
  Moments m;
  if (comps.empty()) return m;
  std::vector<double> lw;
  for (const auto& c : comps) lw.push_back(c.log_weight);
  m.log_weight = log_sum_exp(lw);
  const auto n = comps.front().dim();
  m.mean = Vector::Zero(n);
  for (const auto& c : comps) m.mean += std::exp(c.log_weight - m.log_weight) * c.mean;
  m.cov = Matrix::Zero(n, n);
  for (const auto& c : comps) {
    const Vector d = c.mean - m.mean;
    m.cov += std::exp(c.log_weight - m.log_weight) * (c.cov + d * d.transpose());
  }
  m.cov = symmetrize(m.cov);
  return m;
}

inline Moments global_moments(const GaussianMixture& mix) {
  const auto flat = mix.flattened();
  return global_moments(flat);
}

inline GaussianComponent moment_match_merge(const GaussianComponent& a, const GaussianComponent& b) {
  if (a.dim() != b.dim()) throw InvalidArgument("moment_match_merge: dimension mismatch");
  if (a.log_weight == kNegInf && b.log_weight == kNegInf) {
    throw InvalidArgument("moment_match_merge: both weights are zero");
  }
  const double lw = log_add_exp(a.log_weight, b.log_weight);
  const double va = std::exp(a.log_weight - lw);
  const double vb = std::exp(b.log_weight - lw);
  const Vector d = a.mean - b.mean;
  GaussianComponent out;
  out.log_weight = lw;
  out.mean = va * a.mean + vb * b.mean;
  out.cov = symmetrize(va * a.cov + vb * b.cov + va * vb * d * d.transpose());
  return out;
}

namespace detail {

// Bound with weights expressed relative to exp(log_scale); a positive rescaling
// leaves the pair ordering unchanged.
inline double scaled_merge_bound(const GaussianComponent& a, double logdet_a, const GaussianComponent& b,
                                 double logdet_b, double log_scale) {
  const GaussianComponent merged = moment_match_merge(a, b);
  const double logdet_ab = log_det_spd(merged.cov, "merged covariance");
  const double wa = std::exp(a.log_weight - log_scale);
  const double wb = std::exp(b.log_weight - log_scale);
  return 0.5 * ((wa + wb) * logdet_ab - wa * logdet_a - wb * logdet_b);
}

}  // namespace detail

/// Upper bound on the mixture KL divergence incurred by merging a and b.
inline double kl_merge_bound(const GaussianComponent& a, const GaussianComponent& b) {
  if (a.dim() != b.dim()) throw InvalidArgument("kl_merge_bound: dimension mismatch");
  return detail::scaled_merge_bound(a, log_det_spd(a.cov, "component covariance"), b,
                                    log_det_spd(b.cov, "component covariance"), 0.0);
}

/// Greedy pairwise reduction: while more than `cap` components remain, merge
/// the pair with the smallest bound. Ties go to the lexicographically lowest
/// (i, j) in input order; the merged component takes the slot of i.
inline std::vector<GaussianComponent> reduce_mixture(std::span<const GaussianComponent> components,
                                                     std::size_t cap) {
  if (cap < 1) throw InvalidArgument("reduce_mixture: cap must be at least 1");
  if (components.empty()) throw InvalidArgument("reduce_mixture: empty input");

  std::vector<GaussianComponent> comps;
  comps.reserve(components.size());
  for (const auto& c : components) {
    if (c.log_weight != kNegInf) comps.push_back(c);
  }
  if (comps.empty()) throw InvalidArgument("reduce_mixture: all weights are zero");
  if (comps.size() <= cap) return comps;

  const std::size_t m = comps.size();
  double log_scale = kNegInf;
  for (const auto& c : comps) log_scale = std::max(log_scale, c.log_weight);

  std::vector<double> logdet(m);
  for (std::size_t i = 0; i < m; ++i) logdet[i] = log_det_spd(comps[i].cov, "component covariance");

  std::vector<bool> alive(m, true);
  std::vector<double> table(m * m, 0.0);
  auto bound = [&](std::size_t i, std::size_t j) -> double& { return table[i * m + j]; };
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      bound(i, j) = detail::scaled_merge_bound(comps[i], logdet[i], comps[j], logdet[j], log_scale);
    }
  }

  std::size_t remaining = m;
  while (remaining > cap) {
    std::size_t bi = m, bj = m;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
      if (!alive[i]) continue;
      for (std::size_t j = i + 1; j < m; ++j) {
        if (!alive[j]) continue;
        if (bi == m || bound(i, j) < best) {
          best = bound(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    comps[bi] = moment_match_merge(comps[bi], comps[bj]);
    logdet[bi] = log_det_spd(comps[bi].cov, "merged covariance");
    alive[bj] = false;
    --remaining;
    for (std::size_t k = 0; k < m; ++k) {
      if (!alive[k] || k == bi) continue;
      const auto [lo, hi] = std::minmax(bi, k);
      bound(lo, hi) = detail::scaled_merge_bound(comps[lo], logdet[lo], comps[hi], logdet[hi], log_scale);
    }
  }

  std::vector<GaussianComponent> out;
  out.reserve(cap);
  for (std::size_t i = 0; i < m; ++i) {
    if (alive[i]) out.push_back(std::move(comps[i]));
  }
  return out;
}

/// Per-mode reduction of an indexed mixture.
inline GaussianMixture reduce_mixture(const GaussianMixture& mix, std::size_t cap) {
  GaussianMixture out(mix.mode_count());
  for (std::size_t z = 0; z < mix.mode_count(); ++z) {
    if (mix.modes[z].empty()) continue;
    bool any = false;
    for (const auto& c : mix.modes[z]) any = any || c.log_weight != kNegInf;
    if (!any) continue;
    out.modes[z] = reduce_mixture(mix.modes[z], cap);
  }
  return out;
}

/// Density of a scalar mixture, summed over every mode and component.
inline double scalar_mixture_density(const GaussianMixture& mix, double x) {
  double acc = 0.0;
  for (const auto& mode : mix.modes) {
    for (const auto& c : mode) {
      acc += std::exp(c.log_weight) * normal_pdf_scalar(x, c.mean(0), c.cov(0, 0));
    }
  }
  return acc;
}

/// Δh(p, q) = ∫ p ln p − q ln q dx for scalar mixtures, by adaptive
/// Gauss-Kronrod quadrature over ±10 combined standard deviations.
inline double differential_entropy_delta(const GaussianMixture& p, const GaussianMixture& q) {
  if (p.dim() != 1 || q.dim() != 1) throw InvalidArgument("differential_entropy_delta: scalar mixtures only");
  for (const GaussianMixture* mix : {&p, &q}) {
    if (std::abs(std::exp(mix->total_log_weight()) - 1.0) > 1e-9) {
      throw InvalidArgument("differential_entropy_delta: mixture is not normalized");
    }
  }
  const Moments mp = global_moments(p);
  const Moments mq = global_moments(q);
  const double lo = std::min(mp.mean(0) - 10.0 * std::sqrt(mp.cov(0, 0)), mq.mean(0) - 10.0 * std::sqrt(mq.cov(0, 0)));
  const double hi = std::max(mp.mean(0) + 10.0 * std::sqrt(mp.cov(0, 0)), mq.mean(0) + 10.0 * std::sqrt(mq.cov(0, 0)));

  auto plogp = [](double v) { return v > 0.0 ? v * std::log(v) : 0.0; };
  auto integrand = [&](double x) {
    return plogp(scalar_mixture_density(p, x)) - plogp(scalar_mixture_density(q, x));
  };
  double err = 0.0;
  const double value =
      boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, lo, hi, 20, 1e-12, &err);
  if (err > 1e-6) throw NumericalError("differential_entropy_delta: quadrature did not converge");
  return value;
}

}  // namespace jmls
