#pragma once

// Jump Markov linear system description, validation, simulation and the
// mass-spring-damper discretization used by the fault example.

#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "jmls/linalg.hpp"
#include "jmls/mixture.hpp"

namespace jmls {

/// System matrices of one mode:
///   x⁺ = A x + B u + v,  v ~ N(0, Q)
///   y  = C x + D u + e,  e ~ N(0, R)
struct ModeParams {
  Matrix A, B, C, D, Q, R;

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index p() const { return B.cols(); }
  Eigen::Index q() const { return C.rows(); }
};

/// Which mode drives the transition x_k → x_{k+1}.
///  - SwitchAfterPrediction:  x_{k+1} = A(z_k) x_k + B(z_k) u_k + v_k, then z_k → z_{k+1}.
///  - SwitchBeforePrediction: z_k → z_{k+1} first, then
///                            x_{k+1} = A(z_{k+1}) x_k + B(z_{k+1}) u_{k+1} + v_k.
enum class Timing { SwitchAfterPrediction, SwitchBeforePrediction };

inline std::string_view to_string(Timing t) {
  return t == Timing::SwitchAfterPrediction ? "switch-after-prediction" : "switch-before-prediction";
}

inline Timing timing_from_string(std::string_view s) {
  if (s == "switch-after-prediction") return Timing::SwitchAfterPrediction;
  if (s == "switch-before-prediction") return Timing::SwitchBeforePrediction;
  throw InvalidArgument("unknown timing convention: " + std::string(s));
}

struct JmlsModel {
  std::vector<ModeParams> modes;
  /// transition(i, j) = P(z_{k+1} = i | z_k = j); columns sum to one.
  Matrix transition;
  Timing timing = Timing::SwitchAfterPrediction;

  std::size_t m() const { return modes.size(); }
  Eigen::Index n() const { return modes.empty() ? 0 : modes.front().n(); }
  Eigen::Index p() const { return modes.empty() ? 0 : modes.front().p(); }
  Eigen::Index q() const { return modes.empty() ? 0 : modes.front().q(); }

  double T(std::size_t to, std::size_t from) const {
    return transition(static_cast<Eigen::Index>(to), static_cast<Eigen::Index>(from));
  }

  /// Parameters that propagate the state along a from → to mode transition.
  const ModeParams& dynamics(std::size_t from, std::size_t to) const {
    return timing == Timing::SwitchAfterPrediction ? modes[from] : modes[to];
  }

  /// Zero-based time index of the input entering the transition k → k+1.
  std::size_t transition_input(std::size_t k) const {
    return timing == Timing::SwitchAfterPrediction ? k : k + 1;
  }
};

/// p(x_1, z_1) as an indexed mixture.
using HybridPrior = GaussianMixture;

struct Truth {
  std::vector<Vector> x;
  std::vector<std::size_t> z;  // zero-based mode indices
};

struct Dataset {
  std::vector<Vector> u;
  std::vector<Vector> y;
  std::optional<Truth> truth;

  std::size_t size() const { return y.size(); }
};

struct ValidationReport {
  std::vector<std::string> issues;

  bool ok() const { return issues.empty(); }
  std::string summary() const {
    if (ok()) return "pass";
    std::ostringstream os;
    for (const auto& s : issues) os << s << '\n';
    return os.str();
  }
};

inline ValidationReport validate_model(const JmlsModel& model) {
  ValidationReport rep;
  const auto m = model.m();
  if (m == 0) {
    rep.issues.emplace_back("model has no modes");
    return rep;
  }
  const auto n = model.n(), p = model.p(), q = model.q();
  auto check_dims = [&](std::size_t z, const char* name, const Matrix& mat, Eigen::Index r, Eigen::Index c) {
    if (mat.rows() != r || mat.cols() != c) {
      std::ostringstream os;
      os << "mode " << z + 1 << ": " << name << " is " << mat.rows() << "x" << mat.cols() << ", expected " << r
         << "x" << c;
      rep.issues.push_back(os.str());
      return false;
    }
    return true;
  };
  for (std::size_t z = 0; z < m; ++z) {
    const auto& mp = model.modes[z];
    check_dims(z, "A", mp.A, n, n);
    check_dims(z, "B", mp.B, n, p);
    check_dims(z, "C", mp.C, q, n);
    check_dims(z, "D", mp.D, q, p);
    for (auto [name, cov, dim] : {std::tuple{"Q", &mp.Q, n}, std::tuple{"R", &mp.R, q}}) {
      if (!check_dims(z, name, *cov, dim, dim)) continue;
      const double scale = std::max(1.0, cov->cwiseAbs().maxCoeff());
      if (asymmetry(*cov) > 1e-12 * scale) {
        rep.issues.push_back("mode " + std::to_string(z + 1) + ": " + name + " is not symmetric");
      } else if (!is_positive_definite(*cov)) {
        rep.issues.push_back("mode " + std::to_string(z + 1) + ": " + name + " is not positive definite");
      }
    }
  }
  const auto mi = static_cast<Eigen::Index>(m);
  if (model.transition.rows() != mi || model.transition.cols() != mi) {
    rep.issues.push_back("transition matrix must be " + std::to_string(m) + "x" + std::to_string(m));
    return rep;
  }
  for (Eigen::Index j = 0; j < mi; ++j) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < mi; ++i) {
      const double t = model.transition(i, j);
      if (!(t >= 0.0 && t <= 1.0)) {
        rep.issues.push_back("transition T(" + std::to_string(i + 1) + "|" + std::to_string(j + 1) +
                             ") outside [0, 1]");
      }
      sum += t;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
      std::ostringstream os;
      os.precision(17);
      os << "transition column " << j + 1 << " sums to " << sum << ", expected 1";
      rep.issues.push_back(os.str());
    }
  }
  return rep;
}

inline ValidationReport validate_prior(const JmlsModel& model, const HybridPrior& prior) {
  ValidationReport rep;
  if (prior.mode_count() != model.m()) {
    rep.issues.push_back("prior has " + std::to_string(prior.mode_count()) + " modes, model has " +
                         std::to_string(model.m()));
    return rep;
  }
  for (std::size_t z = 0; z < prior.mode_count(); ++z) {
    for (const auto& c : prior.modes[z]) {
      if (c.mean.size() != model.n() || c.cov.rows() != model.n() || c.cov.cols() != model.n()) {
        rep.issues.push_back("prior component of mode " + std::to_string(z + 1) + " has wrong dimension");
      } else if (c.log_weight != kNegInf && !is_positive_definite(c.cov)) {
        rep.issues.push_back("prior covariance of mode " + std::to_string(z + 1) + " is not positive definite");
      }
    }
  }
  if (prior.component_count() == 0 || std::abs(std::exp(prior.total_log_weight()) - 1.0) > 1e-10) {
    rep.issues.emplace_back("prior weights do not sum to 1");
  }
  return rep;
}

namespace detail {

inline Vector draw_gaussian(std::mt19937_64& rng, const Vector& mean, const Matrix& cov) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  return mean + cholesky(cov, "sampling covariance").matrixL() * z;
}

inline std::size_t draw_index(std::mt19937_64& rng, const std::vector<double>& probs) {
  std::discrete_distribution<std::size_t> dist(probs.begin(), probs.end());
  return dist(rng);
}

}  // namespace detail

/// Draws a trajectory of length u.size(), recording the true states and modes.
inline Dataset simulate(const JmlsModel& model, const HybridPrior& prior, const std::vector<Vector>& u,
                        std::uint64_t seed) {
  if (const auto rep = validate_model(model); !rep.ok()) throw InvalidArgument("simulate: " + rep.summary());
  if (const auto rep = validate_prior(model, prior); !rep.ok()) throw InvalidArgument("simulate: " + rep.summary());
  if (u.empty()) throw InvalidArgument("simulate: empty input sequence");

  std::mt19937_64 rng(seed);
  const std::size_t N = u.size();

  std::vector<double> prior_probs;
  std::vector<std::pair<std::size_t, const GaussianComponent*>> prior_index;
  for (std::size_t z = 0; z < prior.mode_count(); ++z) {
    for (const auto& c : prior.modes[z]) {
      prior_probs.push_back(c.weight());
      prior_index.emplace_back(z, &c);
    }
  }
  const auto [z1, comp] = prior_index[detail::draw_index(rng, prior_probs)];

  Dataset data;
  data.u = u;
  Truth truth;
  std::size_t z = z1;
  Vector x = detail::draw_gaussian(rng, comp->mean, comp->cov);
  auto column = [&](std::size_t from) {
    std::vector<double> probs(model.m());
    for (std::size_t i = 0; i < model.m(); ++i) probs[i] = model.T(i, from);
    return probs;
  };
  for (std::size_t k = 0; k < N; ++k) {
    const auto& mp = model.modes[z];
    truth.x.push_back(x);
    truth.z.push_back(z);
    data.y.push_back(detail::draw_gaussian(rng, mp.C * x + mp.D * u[k], mp.R));
    if (k + 1 == N) break;
    const std::size_t next = detail::draw_index(rng, column(z));
    const auto& dyn = model.dynamics(z, next);
    const Vector& uk = u[model.transition_input(k)];
    x = detail::draw_gaussian(rng, dyn.A * x + dyn.B * uk, dyn.Q);
    z = next;
  }
  data.truth = std::move(truth);
  return data;
}

struct DiscreteDynamics {
  Matrix A;
  Matrix B;
};

/// Zero-order-hold discretization of m ẍ + b ẋ + k x = F with state
/// (position, velocity). `input_hold`, when set, applies the force only for
/// the first `input_hold` seconds of each period (0 < hold ≤ Ts).
inline DiscreteDynamics discretize_msd(double mass, double damping, double spring, double Ts,
                                       std::optional<double> input_hold = std::nullopt) {
  if (!(mass > 0.0)) throw InvalidArgument("discretize_msd: mass must be positive");
  if (!(Ts > 0.0)) throw InvalidArgument("discretize_msd: sample period must be positive");
  const double hold = input_hold.value_or(Ts);
  if (!(hold > 0.0) || hold > Ts) throw InvalidArgument("discretize_msd: input hold must lie in (0, Ts]");

  Matrix Ac(2, 2);
  Ac << 0.0, 1.0, -spring / mass, -damping / mass;
  Matrix Bc(2, 1);
  Bc << 0.0, 1.0 / mass;

  // exp([[Ac, Bc], [0, 0]] τ) = [[e^{Ac τ}, ∫₀^τ e^{Ac s} ds Bc], [0, I]]
  Matrix M = Matrix::Zero(3, 3);
  M.topLeftCorner(2, 2) = Ac;
  M.topRightCorner(2, 1) = Bc;
  const Matrix phi_hold = (M * hold).exp();

  DiscreteDynamics out;
  out.A = (Ac * Ts).exp();
  out.B = phi_hold.topRightCorner(2, 1);
  if (hold < Ts) out.B = (Ac * (Ts - hold)).exp() * out.B;
  return out;
}

}  // namespace jmls
