#include "dse/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace dse {
namespace {

void check_index(const VariationalEmbedding& e, int index) {
  if (index < 0 || index >= e.index_count)
    throw std::out_of_range("embedding index out of range");
}

}  // namespace

void VariationalEmbedding::init(int indices, int dim, std::mt19937_64& rng) {
  index_count = indices;
  latent_dim = dim;
  params.resize(static_cast<std::size_t>(indices) * 2 * dim);
  params.shapes.assign(static_cast<std::size_t>(indices), {2 * dim, 1});
  std::normal_distribution<double> mean_init(0.0, kEmbeddingInitMeanStd);
  const double ls0 = std::log(kEmbeddingInitStd);
  for (int r = 0; r < indices; ++r) {
    double* row = params.values.data() + row_offset(r);
    for (int k = 0; k < dim; ++k) row[k] = mean_init(rng);
    for (int k = 0; k < dim; ++k) row[dim + k] = ls0;
  }
}

void VariationalEmbedding::reset_row_to_prior(int index) {
  check_index(*this, index);
  double* row = params.values.data() + row_offset(index);
  for (int k = 0; k < 2 * latent_dim; ++k) row[k] = 0.0;
}

std::vector<double> VariationalEmbedding::sample(
    int index, std::span<const double> noise) const {
  check_index(*this, index);
  auto mu = mean(index);
  auto ls = log_std(index);
  std::vector<double> out(latent_dim);
  for (int k = 0; k < latent_dim; ++k) out[k] = mu[k] + std::exp(ls[k]) * noise[k];
  return out;
}

std::vector<Var> VariationalEmbedding::sample_taped(
    Tape& tape, const BoundParams& bound, int index,
    std::span<const double> noise) const {
  check_index(*this, index);
  const std::size_t base = row_offset(index);
  std::vector<Var> out;
  out.reserve(latent_dim);
  for (int k = 0; k < latent_dim; ++k) {
    Var mu = bound.var(base + k);
    Var sigma = tape.exp(bound.var(base + latent_dim + k));
    out.push_back(tape.add(mu, tape.mul_const(sigma, noise[k])));
  }
  return out;
}

double VariationalEmbedding::kl_to_prior(int index) const {
  check_index(*this, index);
  auto mu = mean(index);
  auto ls = log_std(index);
  double kl = 0.0;
  for (int k = 0; k < latent_dim; ++k) {
    kl += 0.5 * (mu[k] * mu[k] + std::exp(2.0 * ls[k]) - 1.0 - 2.0 * ls[k]);
  }
  return kl;
}

Var VariationalEmbedding::kl_to_prior_taped(Tape& tape, const BoundParams& bound,
                                            int index) const {
  check_index(*this, index);
  const std::size_t base = row_offset(index);
  std::vector<Var> terms;
  std::vector<double> coeffs;
  terms.reserve(3 * latent_dim);
  coeffs.reserve(3 * latent_dim);
  for (int k = 0; k < latent_dim; ++k) {
    Var mu = bound.var(base + k);
    Var ls = bound.var(base + latent_dim + k);
    terms.push_back(tape.square(mu));
    coeffs.push_back(0.5);
    terms.push_back(tape.exp(tape.mul_const(ls, 2.0)));  // sigma^2
    coeffs.push_back(0.5);
    terms.push_back(ls);
    coeffs.push_back(-1.0);
  }
  return tape.add_const(tape.weighted_sum(terms, coeffs), -0.5 * latent_dim);
}

double VariationalEmbedding::log_density_ratio(
    int index, std::span<const double> latent) const {
  check_index(*this, index);
  auto mu = mean(index);
  auto ls = log_std(index);
  double out = 0.0;
  for (int k = 0; k < latent_dim; ++k) {
    const double z = (latent[k] - mu[k]) * std::exp(-ls[k]);
    out += -ls[k] - 0.5 * z * z + 0.5 * latent[k] * latent[k];
  }
  return out;
}

Var VariationalEmbedding::log_density_ratio_taped(
    Tape& tape, const BoundParams& bound, int index,
    std::span<const double> latent) const {
  check_index(*this, index);
  const std::size_t base = row_offset(index);
  std::vector<Var> terms;
  std::vector<double> coeffs;
  double constant = 0.0;
  for (int k = 0; k < latent_dim; ++k) {
    Var mu = bound.var(base + k);
    Var ls = bound.var(base + latent_dim + k);
    Var diff = tape.add_const(tape.neg(mu), latent[k]);
    Var z = tape.mul(diff, tape.exp(tape.neg(ls)));
    terms.push_back(tape.square(z));
    coeffs.push_back(-0.5);
    terms.push_back(ls);
    coeffs.push_back(-1.0);
    constant += 0.5 * latent[k] * latent[k];
  }
  return tape.add_const(tape.weighted_sum(terms, coeffs), constant);
}

Var VariationalEmbedding::log_density_ratio_taped(
    Tape& tape, const BoundParams& bound, int index,
    std::span<const Var> latent) const {
  check_index(*this, index);
  const std::size_t base = row_offset(index);
  std::vector<Var> terms;
  std::vector<double> coeffs;
  for (int k = 0; k < latent_dim; ++k) {
    Var mu = bound.var(base + k);
    Var ls = bound.var(base + latent_dim + k);
    Var z = tape.mul(tape.sub(latent[k], mu), tape.exp(tape.neg(ls)));
    terms.push_back(tape.square(z));
    coeffs.push_back(-0.5);
    terms.push_back(ls);
    coeffs.push_back(-1.0);
    terms.push_back(tape.square(latent[k]));
    coeffs.push_back(0.5);
  }
  return tape.weighted_sum(terms, coeffs);
}

std::vector<double> VariationalEmbedding::bayes_posterior(
    std::span<const double> latent, std::span<const double> index_prior) const {
  // log(prior_i) + log q(latent|i), up to the shared -d/2 log(2 pi).
  std::vector<double> logj(index_count);
  for (int i = 0; i < index_count; ++i) {
    auto mu = mean(i);
    auto ls = log_std(i);
    double lq = 0.0;
    for (int k = 0; k < latent_dim; ++k) {
      const double z = (latent[k] - mu[k]) * std::exp(-ls[k]);
      lq += -ls[k] - 0.5 * z * z;
    }
    logj[i] = index_prior[i] > 0.0 ? std::log(index_prior[i]) + lq
                                   : -std::numeric_limits<double>::infinity();
  }
  double m = logj[0];
  for (double v : logj) m = std::max(m, v);
  if (!std::isfinite(m)) {
    std::fprintf(stderr,
                 "warning: index posterior underflowed; returning the prior\n");
    return {index_prior.begin(), index_prior.end()};
  }
  std::vector<double> post(index_count);
  double total = 0.0;
  for (int i = 0; i < index_count; ++i) {
    post[i] = std::exp(logj[i] - m);
    total += post[i];
  }
  for (double& p : post) p /= total;
  return post;
}

}  // namespace dse
