#include "dse/heads.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace dse {
namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * log(2 * pi)

double clamp_log_std(double v) { return std::clamp(v, kLogStdMin, kLogStdMax); }

}  // namespace

std::vector<double> softmax(std::span<const double> logits) {
  double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp(logits[k] - m);
    total += out[k];
  }
  for (double& p : out) p /= total;
  return out;
}

double categorical_log_prob(std::span<const double> logits, int action) {
  double m = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double l : logits) total += std::exp(l - m);
  return logits[action] - (m + std::log(total));
}

int sample_categorical(std::span<const double> logits, std::mt19937_64& rng) {
  std::vector<double> probs = softmax(logits);
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (size_t k = 0; k + 1 < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(probs.size()) - 1;
}

Var categorical_log_prob_taped(Tape& tape, std::span<const Var> logits, int action) {
  Var lse = tape.logsumexp(logits);
  return tape.sub(logits[action], lse);
}

CategoricalSample categorical_head(Tape& tape, std::span<const Var> logits,
                                   std::mt19937_64& rng) {
  std::vector<double> vals(logits.size());
  for (size_t k = 0; k < logits.size(); ++k) vals[k] = tape.val(logits[k]);
  int a = sample_categorical(vals, rng);
  return {a, categorical_log_prob_taped(tape, logits, a)};
}

GaussianTanhSample gaussian_tanh_head(std::span<const double> mean,
                                      std::span<const double> log_std,
                                      std::span<const double> noise) {
  assert(mean.size() == log_std.size() && mean.size() == noise.size());
  GaussianTanhSample out;
  out.action.resize(mean.size());
  out.presquash.resize(mean.size());
  out.noise.assign(noise.begin(), noise.end());
  out.log_prob = 0.0;
  for (size_t k = 0; k < mean.size(); ++k) {
    double ls = clamp_log_std(log_std[k]);
    double u = mean[k] + std::exp(ls) * noise[k];
    double a = std::tanh(u);
    out.presquash[k] = u;
    out.action[k] = a;
    out.log_prob += -0.5 * noise[k] * noise[k] - ls - kHalfLog2Pi -
                    std::log(1.0 - a * a + kTanhEps);
  }
  return out;
}

GaussianTanhSample sample_gaussian_tanh(std::span<const double> mean,
                                        std::span<const double> log_std,
                                        std::mt19937_64& rng) {
  std::vector<double> noise(mean.size());
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& n : noise) n = normal(rng);
  return gaussian_tanh_head(mean, log_std, noise);
}

TapedGaussianTanh gaussian_tanh_head_taped(Tape& tape, std::span<const Var> mean,
                                           std::span<const Var> log_std,
                                           std::span<const double> noise) {
  assert(mean.size() == log_std.size() && mean.size() == noise.size());
  TapedGaussianTanh out;
  out.action.reserve(mean.size());
  std::vector<Var> terms;
  terms.reserve(2 * mean.size());
  std::vector<double> coeffs;
  coeffs.reserve(2 * mean.size());
  double constant = 0.0;
  for (size_t k = 0; k < mean.size(); ++k) {
    Var ls = tape.clamp(log_std[k], kLogStdMin, kLogStdMax);
    Var sigma = tape.exp(ls);
    Var u = tape.add(mean[k], tape.mul_const(sigma, noise[k]));
    Var a = tape.tanh(u);
    out.action.push_back(a);
    // log(1 - a^2 + eps), taped through a so the squash correction
    // contributes to d log_prob / d (mean, log_std).
    Var sq_term = tape.log(tape.add_const(tape.neg(tape.square(a)), 1.0 + kTanhEps));
    terms.push_back(ls);
    coeffs.push_back(-1.0);
    terms.push_back(sq_term);
    coeffs.push_back(-1.0);
    constant += -0.5 * noise[k] * noise[k] - kHalfLog2Pi;
  }
  out.log_prob = tape.add_const(tape.weighted_sum(terms, coeffs), constant);
  return out;
}

Var gaussian_tanh_log_prob_taped(Tape& tape, std::span<const Var> mean,
                                 std::span<const Var> log_std,
                                 std::span<const double> presquash) {
  assert(mean.size() == log_std.size() && mean.size() == presquash.size());
  std::vector<Var> terms;
  terms.reserve(2 * mean.size());
  std::vector<double> coeffs;
  coeffs.reserve(2 * mean.size());
  double constant = 0.0;
  for (size_t k = 0; k < mean.size(); ++k) {
    Var ls = tape.clamp(log_std[k], kLogStdMin, kLogStdMax);
    // z = (u - mean) / sigma with u held fixed.
    Var diff = tape.add_const(tape.neg(mean[k]), presquash[k]);
    Var z = tape.mul(diff, tape.exp(tape.neg(ls)));
    terms.push_back(tape.square(z));
    coeffs.push_back(-0.5);
    terms.push_back(ls);
    coeffs.push_back(-1.0);
    double a = std::tanh(presquash[k]);
    constant += -kHalfLog2Pi - std::log(1.0 - a * a + kTanhEps);
  }
  return tape.add_const(tape.weighted_sum(terms, coeffs), constant);
}

double gaussian_tanh_log_prob(std::span<const double> mean,
                              std::span<const double> log_std,
                              std::span<const double> presquash) {
  double lp = 0.0;
  for (size_t k = 0; k < mean.size(); ++k) {
    double ls = clamp_log_std(log_std[k]);
    double z = (presquash[k] - mean[k]) * std::exp(-ls);
    double a = std::tanh(presquash[k]);
    lp += -0.5 * z * z - ls - kHalfLog2Pi - std::log(1.0 - a * a + kTanhEps);
  }
  return lp;
}

}  // namespace dse
