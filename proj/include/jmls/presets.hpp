#pragma once

// Built-in models, priors and input generators for the worked examples.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "jmls/mixture.hpp"
#include "jmls/model.hpp"

namespace jmls {

enum class InputKind { GaussianIid, Constant, Sinusoid };

/// gaussian-iid: u_k ~ N(mean, stddev²) per entry
/// constant:     u_k = value
/// sinusoid:     u_k = amplitude · sin(rate · k), k = 1, 2, ...
struct InputSpec {
  InputKind kind = InputKind::GaussianIid;
  double mean = 0.0;
  double stddev = 1.0;
  double value = 0.0;
  double amplitude = 1.0;
  double rate = 1.0;
};

inline InputKind input_kind_from_string(std::string_view s) {
  if (s == "gaussian-iid") return InputKind::GaussianIid;
  if (s == "constant") return InputKind::Constant;
  if (s == "sinusoid") return InputKind::Sinusoid;
  throw InvalidArgument("unknown input generator: " + std::string(s));
}

inline std::string_view to_string(InputKind k) {
  switch (k) {
    case InputKind::GaussianIid: return "gaussian-iid";
    case InputKind::Constant: return "constant";
    case InputKind::Sinusoid: return "sinusoid";
  }
  return "unknown";
}

inline std::vector<Vector> generate_inputs(const InputSpec& spec, std::size_t N, Eigen::Index p, std::uint64_t seed) {
  if (N == 0) throw InvalidArgument("generate_inputs: N must be at least 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(spec.mean, spec.stddev);
  std::vector<Vector> u(N, Vector(p));
  for (std::size_t k = 0; k < N; ++k) {
    for (Eigen::Index i = 0; i < p; ++i) {
      switch (spec.kind) {
        case InputKind::GaussianIid: u[k](i) = normal(rng); break;
        case InputKind::Constant: u[k](i) = spec.value; break;
        case InputKind::Sinusoid: u[k](i) = spec.amplitude * std::sin(spec.rate * static_cast<double>(k + 1)); break;
      }
    }
  }
  return u;
}

/// Seed used for noise and mode draws, derived from the run seed so that
/// inputs and noise come from separate streams.
inline std::uint64_t noise_seed(std::uint64_t seed) { return seed ^ 0x9E3779B97F4A7C15ULL; }

struct Preset {
  std::string name;
  JmlsModel model;
  HybridPrior prior;
  InputSpec input;
  std::size_t N = 0;
};

namespace detail {

inline Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

inline ModeParams scalar_mode(double A, double B, double C, double D, double Q, double R) {
  return {scalar(A), scalar(B), scalar(C), scalar(D), scalar(Q), scalar(R)};
}

}  // namespace detail

inline Preset example1() {
  Preset p;
  p.name = "example1";
  p.model.modes = {detail::scalar_mode(0.9, 0.1, 0.9, 0.05, 0.45, 0.5)};
  p.model.transition = Matrix::Ones(1, 1);
  p.prior = GaussianMixture(1);
  p.prior.modes[0].push_back(GaussianComponent::from_weight(1.0, Vector::Zero(1), Matrix::Identity(1, 1)));
  p.input = {InputKind::GaussianIid, 0.0, 1.0};
  p.N = 13;
  return p;
}

inline Preset example2() {
  Preset p;
  p.name = "example2";
  p.model.modes = {detail::scalar_mode(0.9, 0.1, 0.9, 0.05, 0.45, 0.5),
                   detail::scalar_mode(0.9, 0.12, 0.85, 0.05, 0.01, 1.5)};
  p.model.transition = Matrix(2, 2);
  p.model.transition << 0.6, 0.4, 0.4, 0.6;
  p.model.timing = Timing::SwitchBeforePrediction;
  p.prior = GaussianMixture(2);
  for (auto& mode : p.prior.modes) {
    mode.push_back(GaussianComponent::from_weight(0.5, Vector::Zero(1), Matrix::Identity(1, 1)));
  }
  p.input.kind = InputKind::Constant;
  p.input.value = 1.0;
  p.N = 15;
  return p;
}

/// Sampling period, sensor and noise levels of the mass-spring-damper fault
/// example.
struct MsdSettings {
  double Ts = 0.01;
  std::optional<double> input_hold;
  double position_noise = 1e-4;
  double process_noise_position = 1e-6;
  double process_noise_velocity = 1e-4;
  double fault_prior = 0.01;
  double prior_variance = 0.01;
};

inline Preset example3(const MsdSettings& s = {}) {
  Preset p;
  p.name = "example3";
  Matrix C(1, 2);
  C << 1.0, 0.0;
  Matrix Q = Matrix::Zero(2, 2);
  Q(0, 0) = s.process_noise_position;
  Q(1, 1) = s.process_noise_velocity;
  for (const auto& [mass, damping, spring] : {std::tuple{8.0, 12.0, 10.0}, std::tuple{8.0, 0.0, 0.0}}) {
    const auto dyn = discretize_msd(mass, damping, spring, s.Ts, s.input_hold);
    p.model.modes.push_back({dyn.A, dyn.B, C, Matrix::Zero(1, 1), Q, detail::scalar(s.position_noise)});
  }
  p.model.transition = Matrix(2, 2);
  p.model.transition << 0.99, 0.0, 0.01, 1.0;
  p.prior = GaussianMixture(2);
  const Matrix P0 = s.prior_variance * Matrix::Identity(2, 2);
  p.prior.modes[0].push_back(GaussianComponent::from_weight(1.0 - s.fault_prior, Vector::Zero(2), P0));
  p.prior.modes[1].push_back(GaussianComponent::from_weight(s.fault_prior, Vector::Zero(2), P0));
  p.input.kind = InputKind::Sinusoid;
  p.input.amplitude = 2000.0;
  p.input.rate = 1.0 / (20.0 * std::numbers::pi);
  p.N = 10;
  return p;
}

inline Preset preset_by_name(std::string_view name) {
  if (name == "example1") return example1();
  if (name == "example2") return example2();
  if (name == "example3") return example3();
  throw InvalidArgument("unknown preset: " + std::string(name));
}

/// Simulated dataset for a preset: inputs from `seed`, noise from a derived stream.
inline Dataset simulate_preset(const Preset& p, std::uint64_t seed, std::size_t N = 0) {
  const std::size_t steps = N ? N : p.N;
  const auto u = generate_inputs(p.input, steps, p.model.p(), seed);
  return simulate(p.model, p.prior, u, noise_seed(seed));
}

/// Three-component scalar mixture whose KL reduction to two components
/// lowers the differential entropy.
inline GaussianMixture entropy_counterexample() {
  GaussianMixture mix(1);
  auto add = [&](double w, double mu, double P) {
    mix.modes[0].push_back(GaussianComponent::from_weight(w, Vector::Constant(1, mu), Matrix::Constant(1, 1, P)));
  };
  add(0.25, -0.9, 1.0);
  add(0.25, 0.9, 1.0);
  add(0.5, 0.0, 0.1);
  return mix;
}

}  // namespace jmls
