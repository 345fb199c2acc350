#pragma once

#include <random>
#include <span>
#include <vector>

#include "dse/params.hpp"
#include "dse/tape.hpp"

namespace dse {

/// Per-index diagonal Gaussians q(latent | index) with a standard-normal
/// prior shared by every index. Parameters are stored as one flat
/// ParamVector: row r holds [mean_0..mean_{d-1}, log_std_0..log_std_{d-1}].
struct VariationalEmbedding {
  int index_count = 0;
  int latent_dim = 0;
  ParamVector params;

  void init(int indices, int dim, std::mt19937_64& rng);
  /// Reset one row to the prior (zero mean, zero log-std).
  void reset_row_to_prior(int index);

  std::size_t row_offset(int index) const {
    return static_cast<std::size_t>(index) * 2 * latent_dim;
  }
  std::span<const double> mean(int index) const {
    return {params.values.data() + row_offset(index),
            static_cast<std::size_t>(latent_dim)};
  }
  std::span<const double> log_std(int index) const {
    return {params.values.data() + row_offset(index) + latent_dim,
            static_cast<std::size_t>(latent_dim)};
  }

  /// latent = mean + exp(log_std) * noise, plain values.
  std::vector<double> sample(int index, std::span<const double> noise) const;

  /// Same, on the tape: differentiable w.r.t. this row's mean and log_std.
  std::vector<Var> sample_taped(Tape& tape, const BoundParams& bound, int index,
                                std::span<const double> noise) const;

  /// KL(q(.|index) || N(0, I)) = sum_k 0.5 (mu^2 + sigma^2 - 1 - log sigma^2).
  double kl_to_prior(int index) const;
  Var kl_to_prior_taped(Tape& tape, const BoundParams& bound, int index) const;

  /// log q(latent|index) - log p(latent) for a fixed latent value.
  double log_density_ratio(int index, std::span<const double> latent) const;
  Var log_density_ratio_taped(Tape& tape, const BoundParams& bound, int index,
                              std::span<const double> latent) const;
  /// Variant with the latent itself on the tape (reparameterized draws):
  /// gradients flow through both the density parameters and the latent.
  Var log_density_ratio_taped(Tape& tape, const BoundParams& bound, int index,
                              std::span<const Var> latent) const;

  /// Posterior over indices given a latent: prior[i] * q(latent|i),
  /// normalized. If every term underflows to zero the prior is returned and
  /// a warning is printed once per call site's stream (stderr).
  std::vector<double> bayes_posterior(std::span<const double> latent,
                                      std::span<const double> index_prior) const;
};

inline constexpr double kEmbeddingInitMeanStd = 0.1;
inline constexpr double kEmbeddingInitStd = 0.5;  // log_std starts at log(0.5)

}  // namespace dse
