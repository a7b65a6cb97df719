#pragma once

// Information-form likelihood components
//   L(x | r, s, L) = exp(-½ (r + 2 xᵀs + xᵀ L x)),
// the backward-propagation and measurement-correction kernels, and the
// range-space reduction that merges components sharing range(L).

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "jmls/linalg.hpp"

namespace jmls {

struct LikelihoodComponent {
  double r = 0.0;
  Vector s;
  Matrix L;

  static LikelihoodComponent null(Eigen::Index n) { return {0.0, Vector::Zero(n), Matrix::Zero(n, n)}; }

  Eigen::Index dim() const { return s.size(); }

  double log_eval(const Vector& x) const { return -0.5 * (r + 2.0 * x.dot(s) + x.dot(L * x)); }
};

struct LikelihoodMixture {
  std::vector<std::vector<LikelihoodComponent>> modes;

  LikelihoodMixture() = default;
  explicit LikelihoodMixture(std::size_t mode_count) : modes(mode_count) {}

  std::size_t mode_count() const { return modes.size(); }

  std::size_t component_count() const {
    std::size_t n = 0;
    for (const auto& mode : modes) n += mode.size();
    return n;
  }

  std::vector<std::size_t> counts() const {
    std::vector<std::size_t> out;
    for (const auto& mode : modes) out.push_back(mode.size());
    return out;
  }

  /// ln Σ_j L(x | r_j, s_j, L_j) over the components of mode z.
  double log_eval(const Vector& x, std::size_t z) const {
    std::vector<double> terms;
    terms.reserve(modes[z].size());
    for (const auto& c : modes[z]) terms.push_back(c.log_eval(x));
    return log_sum_exp(terms);
  }
};

/// Φ = (I + L̄Q)⁻¹L̄, Β = I − QΦ, Ψ = QΦQ − Q. Β need not be symmetric.
struct BackpropKernel {
  Matrix Phi;
  Matrix Beta;
  Matrix Psi;

  static BackpropKernel compute(const Matrix& L_next, const Matrix& Q) {
    const auto n = Q.rows();
    const Matrix I = Matrix::Identity(n, n);
    BackpropKernel k;
    k.Phi = symmetrize(Eigen::PartialPivLU<Matrix>(I + L_next * Q).solve(L_next));
    k.Beta = I - Q * k.Phi;
    k.Psi = symmetrize(Q * k.Phi * Q - Q);
    return k;
  }
};

/// ∫ N(x⁺ | A x + b, Q) L(x⁺ | comp) dx⁺ expressed as L(x | r, s, L).
inline LikelihoodComponent backward_propagate(const LikelihoodComponent& comp, const Matrix& A, const Vector& b,
                                              const Matrix& Q) {
  const auto n = comp.dim();
  if (A.rows() != n || A.cols() != n || b.size() != n || Q.rows() != n || Q.cols() != n) {
    throw InvalidArgument("backward_propagate: dimension mismatch");
  }
  cholesky(Q, "process covariance Q");
  const BackpropKernel k = BackpropKernel::compute(comp.L, Q);
  const SignedLogDet beta_det = signed_log_det(k.Beta);
  if (beta_det.sign <= 0) {
    throw NumericalError("backward_propagate: det(I - QΦ) is not positive");
  }
  LikelihoodComponent out;
  out.L = symmetrize(A.transpose() * k.Phi * A);
  out.s = A.transpose() * (k.Phi * b + k.Beta.transpose() * comp.s);
  out.r = comp.r - beta_det.log_abs + comp.s.dot(k.Psi * comp.s) + 2.0 * comp.s.dot(k.Beta * b) + b.dot(k.Phi * b);
  return out;
}

/// Absorbs a transition probability: L(x | r − 2 ln T, s, L) = T · L(x | r, s, L).
inline LikelihoodComponent apply_transition_constant(LikelihoodComponent comp, double T) {
  if (!(T > 0.0) || T > 1.0) throw InvalidArgument("apply_transition_constant: T must lie in (0, 1]");
  comp.r -= 2.0 * std::log(T);
  return comp;
}

/// Multiplies a component by N(y | C x + d, R).
inline LikelihoodComponent measurement_correct(const LikelihoodComponent& comp, const Matrix& C, const Vector& d,
                                               const Matrix& R, const Vector& y) {
  if (C.cols() != comp.dim() || C.rows() != y.size() || d.size() != y.size() || R.rows() != y.size()) {
    throw InvalidArgument("measurement_correct: dimension mismatch");
  }
  const auto llt = cholesky(R, "measurement covariance R");
  const Vector zeta = d - y;
  const Matrix RinvC = llt.solve(C);
  const Vector Rinv_zeta = llt.solve(zeta);
  LikelihoodComponent out;
  out.L = symmetrize(comp.L + C.transpose() * RinvC);
  out.s = comp.s + C.transpose() * Rinv_zeta;
  out.r = comp.r + zeta.dot(Rinv_zeta) + log_det(llt) + static_cast<double>(y.size()) * kLog2Pi;
  return out;
}

/// p(y_N | x_N) for one mode: the measurement correction of the null component.
inline LikelihoodComponent init_terminal(const Matrix& C, const Matrix& D, const Matrix& R, const Vector& u,
                                         const Vector& y) {
  return measurement_correct(LikelihoodComponent::null(C.cols()), C, D * u, R, y);
}

struct RangeSpaceOptions {
  double rank_tol = 1e-9;   // singular values ≤ rank_tol·σ_max are treated as zero
  double angle_tol = 1e-7;  // radians, largest principal angle for "same range"
  double range_tol = 1e-8;  // relative residual allowed for s ∈ range(L)
};

/// Component restricted to range(L) = span(U):
///   L(x | r, s, L) = L(Uᵀx | r, η, Σ),  s = Uη,  L = UΣUᵀ.
struct RangeSpaceForm {
  Matrix U;       // n×d orthonormal
  Matrix Sigma;   // d×d positive definite
  Vector eta;     // d
  double log_alpha = 0.0;
  double r = 0.0;

  Eigen::Index rank() const { return U.cols(); }
};

namespace detail {

// ln α with α = exp(-½ (r − ηᵀΣ⁻¹η − ln|2πΣ⁻¹|)).
inline double range_log_alpha(double r, const Vector& eta, const Matrix& Sigma) {
  const auto llt = cholesky(Sigma, "reduced information matrix");
  const double d = static_cast<double>(eta.size());
  return -0.5 * (r - eta.dot(llt.solve(eta)) - d * kLog2Pi + log_det(llt));
}

inline Matrix range_basis(const Matrix& L, double rank_tol) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(L));
  const Vector& ev = es.eigenvalues();  // ascending
  const double top = ev.size() ? ev(ev.size() - 1) : 0.0;
  if (!(top > 0.0)) return Matrix(L.rows(), 0);
  Eigen::Index d = 0;
  for (Eigen::Index i = ev.size() - 1; i >= 0 && ev(i) > rank_tol * top; --i) ++d;
  return es.eigenvectors().rightCols(d).rowwise().reverse();
}

}  // namespace detail

/// Non-throwing factorization; empty when L = 0 or s lies outside range(L).
inline std::optional<RangeSpaceForm> try_range_space_factorize(const LikelihoodComponent& comp,
                                                               const RangeSpaceOptions& opts = {}) {
  RangeSpaceForm f;
  f.U = detail::range_basis(comp.L, opts.rank_tol);
  if (f.U.cols() == 0) return std::nullopt;
  f.eta = f.U.transpose() * comp.s;
  const double residual = (comp.s - f.U * f.eta).norm();
  if (residual > opts.range_tol * comp.s.norm()) return std::nullopt;
  f.Sigma = symmetrize(f.U.transpose() * comp.L * f.U);
  f.r = comp.r;
  f.log_alpha = detail::range_log_alpha(f.r, f.eta, f.Sigma);
  return f;
}

inline RangeSpaceForm range_space_factorize(const LikelihoodComponent& comp, const RangeSpaceOptions& opts = {}) {
  const Matrix U = detail::range_basis(comp.L, opts.rank_tol);
  if (U.cols() == 0) throw InvalidArgument("range_space_factorize: information matrix is zero");
  auto f = try_range_space_factorize(comp, opts);
  if (!f) throw InvalidArgument("range_space_factorize: information vector lies outside range(L)");
  return *f;
}

/// Equal rank and every principal angle between span(U_a) and span(U_b) at
/// most angle_tol. The largest angle is read off as sin θ = ‖(I − U_aU_aᵀ)U_b‖₂.
inline bool same_range_space(const Matrix& Ua, const Matrix& Ub, double angle_tol) {
  if (Ua.cols() != Ub.cols() || Ua.rows() != Ub.rows()) return false;
  if (Ua.cols() == 0) return true;
  const Matrix residual = Ub - Ua * (Ua.transpose() * Ub);
  const double sin_max = Eigen::JacobiSVD<Matrix>(residual).singularValues()(0);
  return sin_max <= std::sin(angle_tol);
}

inline bool same_range_space(const RangeSpaceForm& a, const RangeSpaceForm& b, double angle_tol) {
  return same_range_space(a.U, b.U, angle_tol);
}

namespace detail {

// Group member expressed in the group's common basis.
struct ReducedMember {
  std::size_t source = 0;  // index into the input
  bool merged = false;
  double log_alpha = 0.0;
  double r = 0.0;
  Vector eta;
  Matrix Sigma;
  double logdet_sigma = 0.0;
};

inline ReducedMember merge_reduced(const ReducedMember& a, const ReducedMember& b) {
  const double log_alpha = log_add_exp(a.log_alpha, b.log_alpha);
  const double va = std::exp(a.log_alpha - log_alpha);
  const double vb = std::exp(b.log_alpha - log_alpha);
  const auto llt_a = cholesky(a.Sigma, "reduced information matrix");
  const auto llt_b = cholesky(b.Sigma, "reduced information matrix");
  const auto d = a.Sigma.rows();
  const Matrix I = Matrix::Identity(d, d);
  const Matrix Sa_inv = llt_a.solve(I);
  const Matrix Sb_inv = llt_b.solve(I);
  const Vector mu_a = Sa_inv * a.eta;
  const Vector mu_b = Sb_inv * b.eta;
  const Vector diff = mu_a - mu_b;
  const Matrix S_inv = symmetrize(va * Sa_inv + vb * Sb_inv + va * vb * diff * diff.transpose());
  const auto llt_inv = cholesky(S_inv, "merged reduced covariance");

  ReducedMember out;
  out.source = a.source;
  out.merged = true;
  out.log_alpha = log_alpha;
  out.Sigma = symmetrize(llt_inv.solve(I));
  out.eta = out.Sigma * (va * mu_a + vb * mu_b);
  // r = ηᵀΣ⁻¹η − 2 ln(α_i + α_j) + ln|2πΣ⁻¹|
  out.r = out.eta.dot(S_inv * out.eta) - 2.0 * log_alpha + static_cast<double>(d) * kLog2Pi + log_det(llt_inv);
  out.logdet_sigma = -log_det(llt_inv);
  return out;
}

// B̄(i,j) = (α_i+α_j) ln|Σ_ij⁻¹| + α_i ln|Σ_i| + α_j ln|Σ_j|, with α scaled by exp(-log_scale).
inline double reduced_merge_bound(const ReducedMember& a, const ReducedMember& b, double log_scale) {
  const ReducedMember m = merge_reduced(a, b);
  const double aa = std::exp(a.log_alpha - log_scale);
  const double ab = std::exp(b.log_alpha - log_scale);
  return (aa + ab) * (-m.logdet_sigma) + aa * a.logdet_sigma + ab * b.logdet_sigma;
}

inline std::vector<ReducedMember> reduce_group(std::vector<ReducedMember> members, std::size_t cap) {
  const std::size_t m = members.size();
  double log_scale = kNegInf;
  for (const auto& mem : members) log_scale = std::max(log_scale, mem.log_alpha);
  if (log_scale == kNegInf || !std::isfinite(log_scale)) {
    throw NumericalError("reduce_likelihoods: scale factors vanish within a range-space group");
  }
  std::vector<bool> alive(m, true);
  std::vector<double> table(m * m, 0.0);
  auto bound = [&](std::size_t i, std::size_t j) -> double& { return table[i * m + j]; };
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) bound(i, j) = reduced_merge_bound(members[i], members[j], log_scale);
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
    members[bi] = merge_reduced(members[bi], members[bj]);
    alive[bj] = false;
    --remaining;
    for (std::size_t k = 0; k < m; ++k) {
      if (!alive[k] || k == bi) continue;
      const auto [lo, hi] = std::minmax(bi, k);
      bound(lo, hi) = reduced_merge_bound(members[lo], members[hi], log_scale);
    }
  }
  std::vector<ReducedMember> out;
  for (std::size_t i = 0; i < m; ++i) {
    if (alive[i]) out.push_back(std::move(members[i]));
  }
  return out;
}

}  // namespace detail

/// Range-space likelihood reduction. Components are grouped by range(L);
/// components that cannot be factorized form singleton groups and pass
/// through untouched. Each group with more than `cap` members is merged
/// greedily in the basis of its first member, then mapped back.
inline std::vector<LikelihoodComponent> reduce_likelihoods(std::span<const LikelihoodComponent> comps,
                                                           std::size_t cap, const RangeSpaceOptions& opts = {}) {
  if (cap < 1) throw InvalidArgument("reduce_likelihoods: cap must be at least 1");
  if (comps.empty()) throw InvalidArgument("reduce_likelihoods: empty input");

  struct Group {
    std::optional<Matrix> basis;  // empty for pass-through singletons
    std::vector<std::size_t> members;
  };
  std::vector<Group> groups;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    auto f = try_range_space_factorize(comps[i], opts);
    if (!f) {
      groups.push_back({std::nullopt, {i}});
      continue;
    }
    bool placed = false;
    for (auto& g : groups) {
      if (g.basis && same_range_space(*g.basis, f->U, opts.angle_tol)) {
        g.members.push_back(i);
        placed = true;
        break;
      }
    }
    if (!placed) groups.push_back({f->U, {i}});
  }

  std::vector<LikelihoodComponent> out;
  out.reserve(comps.size());
  for (const auto& g : groups) {
    if (!g.basis || g.members.size() <= cap) {
      for (std::size_t i : g.members) out.push_back(comps[i]);
      continue;
    }
    const Matrix& U = *g.basis;
    std::vector<detail::ReducedMember> members;
    members.reserve(g.members.size());
    for (std::size_t i : g.members) {
      detail::ReducedMember mem;
      mem.source = i;
      mem.r = comps[i].r;
      mem.eta = U.transpose() * comps[i].s;
      mem.Sigma = symmetrize(U.transpose() * comps[i].L * U);
      mem.log_alpha = detail::range_log_alpha(mem.r, mem.eta, mem.Sigma);
      mem.logdet_sigma = log_det_spd(mem.Sigma, "reduced information matrix");
      members.push_back(std::move(mem));
    }
    for (const auto& mem : detail::reduce_group(std::move(members), cap)) {
      if (!mem.merged) {
        out.push_back(comps[mem.source]);
        continue;
      }
      LikelihoodComponent c;
      c.r = mem.r;
      c.s = U * mem.eta;
      c.L = symmetrize(U * mem.Sigma * U.transpose());
      out.push_back(std::move(c));
    }
  }
  return out;
}

inline LikelihoodMixture reduce_likelihoods(const LikelihoodMixture& mix, std::size_t cap,
                                            const RangeSpaceOptions& opts = {}) {
  LikelihoodMixture out(mix.mode_count());
  for (std::size_t z = 0; z < mix.mode_count(); ++z) {
    if (!mix.modes[z].empty()) out.modes[z] = reduce_likelihoods(mix.modes[z], cap, opts);
  }
  return out;
}

}  // namespace jmls
