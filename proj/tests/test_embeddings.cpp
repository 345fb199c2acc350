#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "dse/embeddings.hpp"
#include "dse/params.hpp"
#include "dse/tape.hpp"

using namespace dse;

namespace {
// Rows set by hand so every expectation below is a closed-form number.
VariationalEmbedding hand_embedding() {
  VariationalEmbedding emb;
  std::mt19937_64 rng(1);
  emb.init(2, 2, rng);
  // row 0: mean (1, -0.5), log_std (0, log 2)
  emb.params.values = {1.0, -0.5, 0.0, std::log(2.0),
                       // row 1: mean (0, 0), log_std (log 0.5, 0)
                       0.0, 0.0, std::log(0.5), 0.0};
  return emb;
}
}  // namespace

TEST_CASE("embeddings: layout and initialization") {
  std::mt19937_64 rng(42);
  VariationalEmbedding emb;
  emb.init(3, 4, rng);
  CHECK(emb.index_count == 3);
  CHECK(emb.latent_dim == 4);
  CHECK(emb.params.size() == 3u * 2u * 4u);
  for (int r = 0; r < 3; ++r) {
    for (double ls : emb.log_std(r))
      CHECK(ls == doctest::Approx(std::log(kEmbeddingInitStd)));
    for (double m : emb.mean(r)) CHECK(std::abs(m) < 1.0);  // small jitter
  }
  // Same seed, same table.
  std::mt19937_64 rng2(42);
  VariationalEmbedding emb2;
  emb2.init(3, 4, rng2);
  CHECK(emb.params.values == emb2.params.values);

  emb.reset_row_to_prior(1);
  for (double m : emb.mean(1)) CHECK(m == 0.0);
  for (double ls : emb.log_std(1)) CHECK(ls == 0.0);
  CHECK(emb.mean(0)[0] == emb2.mean(0)[0]);  // other rows untouched
}

TEST_CASE("embeddings: sample is mean plus scaled noise") {
  auto emb = hand_embedding();
  std::vector<double> noise{0.25, -1.0};
  auto x = emb.sample(0, noise);
  REQUIRE(x.size() == 2);
  CHECK(x[0] == doctest::Approx(1.0 + 1.0 * 0.25));
  CHECK(x[1] == doctest::Approx(-0.5 + 2.0 * -1.0));

  Tape tape;
  auto bound = bind(tape, emb.params);
  auto xt = emb.sample_taped(tape, bound, 0, noise);
  REQUIRE(xt.size() == 2);
  CHECK(tape.val(xt[0]) == doctest::Approx(x[0]));
  CHECK(tape.val(xt[1]) == doctest::Approx(x[1]));
}

TEST_CASE("embeddings: KL to the standard-normal prior") {
  auto emb = hand_embedding();
  // Unit-variance dim with mean 1 contributes exactly 0.5.
  emb.params.values = {1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  emb.latent_dim = 2;
  CHECK(emb.kl_to_prior(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(emb.kl_to_prior(1) == doctest::Approx(0.0).epsilon(1e-12));

  // General closed form per dim: 0.5 (mu^2 + s^2 - 1) - log s.
  auto emb2 = hand_embedding();
  double expect = 0.0;
  for (int k = 0; k < 2; ++k) {
    double mu = emb2.mean(0)[k];
    double s = std::exp(emb2.log_std(0)[k]);
    expect += 0.5 * (mu * mu + s * s - 1.0) - std::log(s);
  }
  CHECK(emb2.kl_to_prior(0) == doctest::Approx(expect).epsilon(1e-12));

  Tape tape;
  auto bound = bind(tape, emb2.params);
  CHECK(tape.val(emb2.kl_to_prior_taped(tape, bound, 0)) ==
        doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("embeddings: log density ratio against the prior") {
  VariationalEmbedding emb;
  std::mt19937_64 rng(3);
  emb.init(1, 1, rng);
  emb.params.values = {0.0, std::log(0.5)};  // q = N(0, 0.25), prior N(0, 1)
  std::vector<double> at_zero{0.0};
  // Ratio of normalizers only: log(1/0.5) = log 2.
  CHECK(emb.log_density_ratio(0, at_zero) ==
        doctest::Approx(0.6931471805599453).epsilon(1e-12));

  // At a general point: -0.5((x-mu)/s)^2 - log s + 0.5 x^2.
  std::vector<double> at{0.7};
  double expect = -0.5 * (0.7 / 0.5) * (0.7 / 0.5) - std::log(0.5) + 0.5 * 0.7 * 0.7;
  CHECK(emb.log_density_ratio(0, at) == doctest::Approx(expect).epsilon(1e-12));

  Tape tape;
  auto bound = bind(tape, emb.params);
  CHECK(tape.val(emb.log_density_ratio_taped(tape, bound, 0, at)) ==
        doctest::Approx(expect).epsilon(1e-12));

  // Reparameterized variant agrees in value with the fixed-latent one.
  std::vector<double> noise{0.7 / 0.5};  // sample() lands exactly on 0.7
  auto latent = emb.sample_taped(tape, bound, 0, noise);
  CHECK(tape.val(emb.log_density_ratio_taped(tape, bound, 0,
                                             std::span<const Var>(latent))) ==
        doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("embeddings: posterior over indices") {
  VariationalEmbedding emb;
  std::mt19937_64 rng(5);
  emb.init(2, 1, rng);
  emb.params.values = {1.0, 0.0, -1.0, 0.0};  // N(1,1) and N(-1,1)
  std::vector<double> prior{0.5, 0.5};
  std::vector<double> at{1.0};
  auto post = emb.bayes_posterior(at, prior);
  REQUIRE(post.size() == 2);
  // Likelihood ratio e^0 : e^-2  ->  posterior 1/(1+e^-2).
  CHECK(post[0] == doctest::Approx(0.8807970779778823).epsilon(1e-12));
  CHECK(post[0] + post[1] == doctest::Approx(1.0).epsilon(1e-12));

  // A lopsided prior tilts the posterior accordingly.
  std::vector<double> prior2{0.9, 0.1};
  auto post2 = emb.bayes_posterior(at, prior2);
  double odds = (0.9 * 1.0) / (0.1 * std::exp(-2.0));
  CHECK(post2[0] == doctest::Approx(odds / (1.0 + odds)).epsilon(1e-12));
}
