#pragma once

#include <random>
#include <span>
#include <vector>

#include "dse/params.hpp"
#include "dse/tape.hpp"

namespace dse {

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kTanhEps = 1e-6;

// --- categorical (softmax) head ---

std::vector<double> softmax(std::span<const double> logits);
double categorical_log_prob(std::span<const double> logits, int action);
int sample_categorical(std::span<const double> logits, std::mt19937_64& rng);

/// log pi(action) = logits[action] - logsumexp(logits), on the tape.
Var categorical_log_prob_taped(Tape& tape, std::span<const Var> logits, int action);

struct CategoricalSample {
  int action;
  Var log_prob;
};
/// Samples from softmax over the logits' current values and returns the
/// taped log-probability of the drawn action.
CategoricalSample categorical_head(Tape& tape, std::span<const Var> logits,
                                   std::mt19937_64& rng);

// --- squashed diagonal Gaussian head ---
//
// u = mean + exp(log_std) * noise, action = tanh(u),
// log_prob = sum_k [ logN(u_k; mean_k, sigma_k) - log(1 - tanh(u_k)^2 + eps) ].
// log_std is clamped to [kLogStdMin, kLogStdMax] inside every entry point.

struct GaussianTanhSample {
  std::vector<double> action;
  std::vector<double> presquash;  // u, stored so losses can rebuild log pi exactly
  std::vector<double> noise;
  double log_prob;
};

GaussianTanhSample gaussian_tanh_head(std::span<const double> mean,
                                      std::span<const double> log_std,
                                      std::span<const double> noise);

GaussianTanhSample sample_gaussian_tanh(std::span<const double> mean,
                                        std::span<const double> log_std,
                                        std::mt19937_64& rng);

/// Reparameterized taped sample: action and log_prob both depend on the
/// mean/log_std nodes, so gradients flow through the action path.
struct TapedGaussianTanh {
  std::vector<Var> action;
  Var log_prob;
};
TapedGaussianTanh gaussian_tanh_head_taped(Tape& tape, std::span<const Var> mean,
                                           std::span<const Var> log_std,
                                           std::span<const double> noise);

/// Score-function variant: log pi of a fixed, already-drawn presquash value.
/// The action is constant; gradients flow only through mean/log_std.
Var gaussian_tanh_log_prob_taped(Tape& tape, std::span<const Var> mean,
                                 std::span<const Var> log_std,
                                 std::span<const double> presquash);

double gaussian_tanh_log_prob(std::span<const double> mean,
                              std::span<const double> log_std,
                              std::span<const double> presquash);

}  // namespace dse
