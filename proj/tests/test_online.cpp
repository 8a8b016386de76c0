#include <cmath>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "dplda/corpus.hpp"
#include "dplda/online.hpp"

using namespace dplda;

namespace {

Corpus synth(int docs, int vocab = 10, int len = 12, uint64_t seed = 3) {
  SynthSpec spec;
  spec.topics = 2;
  spec.vocab_size = vocab;
  spec.docs = docs;
  spec.doc_len = len;
  return synth_corpus(spec, RngStream(seed)).corpus;
}

std::vector<PerturbedBatch> make_batches(const Corpus& c, int n_batches, int batch_size,
                                         double f, uint64_t seed) {
  RngStream root(seed);
  std::vector<PerturbedBatch> out;
  const auto bins = to_binary(c);
  for (int l = 0; l < n_batches; ++l) {
    std::vector<BinaryDoc> part(bins.begin() + static_cast<long>(l) * batch_size,
                                bins.begin() + static_cast<long>(l + 1) * batch_size);
    out.push_back(perturb_docs(part, f, root.derive("perturb").derive(static_cast<uint64_t>(l))));
  }
  return out;
}

}  // namespace

TEST_CASE("prior mean recursion on the worked numbers") {
  CHECK(update_mu(10.0, 14.0, 160.0, 160.0) == doctest::Approx(12.0));
  CHECK(update_mu(10.0, 10.0, 320.0, 160.0) == doctest::Approx(20.0));
  CHECK_THROWS_AS(update_mu(1.0, 1.0, 0.0, 160.0), std::invalid_argument);
  CHECK_THROWS_AS(update_mu(1.0, 1.0, 160.0, 0.0), std::invalid_argument);
}

TEST_CASE("prior update folds weighted counts into beta") {
  TopicPrior prior = TopicPrior::uniform_prior(0.01);
  Matrix counts(2, 2);
  counts(0, 0) = 4.0;
  counts(0, 1) = 0.0;
  counts(1, 0) = 2.0;
  counts(1, 1) = 6.0;
  update_beta(prior, 0.5, counts);
  REQUIRE_FALSE(prior.uniform());
  CHECK(prior.values(0, 0) == doctest::Approx(2.01));
  CHECK(prior.values(0, 1) == doctest::Approx(0.01));
  CHECK(prior.values(1, 1) == doctest::Approx(3.01));
  CHECK(prior.row_sum(0, 2) == doctest::Approx(2.02));

  TopicPrior untouched = TopicPrior::uniform_prior(0.01);
  update_beta(untouched, 0.0, counts);
  CHECK(untouched.uniform());

  Matrix wrong(3, 2, 1.0);
  CHECK_THROWS_AS(update_beta(prior, 0.5, wrong), std::invalid_argument);
  CHECK_THROWS_AS(update_beta(prior, -0.1, counts), std::invalid_argument);
}

TEST_CASE("posterior weight on the prior mean") {
  CHECK(bayes_weight(160.0, 0.5, 100.0) == doctest::Approx(120.0 / 220.0));
  CHECK(bayes_weight(160.0, 0.5, 100.0) == doctest::Approx(0.5455).epsilon(1e-3));
  CHECK_THROWS_AS(bayes_weight(0.0, 0.5, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(bayes_weight(10.0, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(bayes_weight(10.0, 0.5, 0.0), std::invalid_argument);
}

TEST_CASE("denoising blends the prior mean with the moment estimate") {
  CHECK(bayes_denoise(0.4, 20.0, 10.0) == doctest::Approx(14.0));
  CHECK(bayes_denoise(0.0, 20.0, 10.0) == doctest::Approx(10.0));
  CHECK(bayes_denoise(1.0, 20.0, 10.0) == doctest::Approx(20.0));
  CHECK_THROWS_AS(bayes_denoise(1.5, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("denoised variance shrinks by the squared moment weight") {
  // estimator_variance(0.5, 100, 50) is the worked 100
  CHECK(bayes_variance(0.4, 0.5, 100.0, 50.0) == doctest::Approx(36.0));
  CHECK(bayes_variance(1.0, 0.5, 100.0, 50.0) == doctest::Approx(0.0));
}

TEST_CASE("empirical variance of the denoised estimate matches the formula") {
  const double f = 0.5;
  const int M = 100;
  const double N_t = 50.0;
  const double omega = 0.4;
  const double mu = N_t;  // a calibrated prior mean
  RngStream r(67);
  const int trials = 10000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < trials; ++i) {
    long n_t = 0;
    for (int m = 0; m < M; ++m) {
      const int held = r.uniform01() < N_t / M ? 1 : 0;
      n_t += rr_flip(held, f, r);
    }
    const double est =
        bayes_denoise(omega, mu, estimate_count(static_cast<double>(n_t), f, M));
    s += est;
    s2 += est * est;
  }
  const double mean = s / trials;
  const double var = s2 / trials - mean * mean;
  CHECK(mean == doctest::Approx(N_t).epsilon(0.02));
  CHECK(var == doctest::Approx(bayes_variance(omega, f, M, N_t)).epsilon(0.1));
}

TEST_CASE("a uniform matrix prior samples exactly like the scalar prior") {
  Corpus c = synth(12, 6, 8);
  SamplerState scalar = init_state(c, 3, 1.0, TopicPrior::uniform_prior(0.25), RngStream(4));
  TopicPrior mat = TopicPrior::uniform_prior(0.25);
  mat.materialize(3, 6);
  SamplerState matrix = init_state(c, 3, 1.0, mat, RngStream(4));
  for (int m = 0; m < 3; ++m) {
    const auto a = olda_conditional(scalar, m, 2);
    const auto b = olda_conditional(matrix, m, 2);
    REQUIRE(a.size() == b.size());
    for (size_t k = 0; k < a.size(); ++k)
      CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-12));
  }
}

TEST_CASE("with zero counts the estimate reproduces the prior rows") {
  Matrix rows(1, 2);
  rows(0, 0) = 1.0;
  rows(0, 1) = 3.0;
  SamplerState st;
  st.K = 1;
  st.V = 2;
  st.alpha = 1.0;
  st.beta = TopicPrior::matrix_prior(rows);
  st.docs = {};
  st.z = {};
  st.rebuild_counts();
  const Matrix phi = olda_estimate(st);
  CHECK(phi(0, 0) == doctest::Approx(0.25));
  CHECK(phi(0, 1) == doctest::Approx(0.75));
}

TEST_CASE("a lopsided prior row dominates the conditional") {
  Matrix rows(2, 2);
  rows(0, 0) = 10.0;
  rows(0, 1) = 0.01;
  rows(1, 0) = 0.01;
  rows(1, 1) = 10.0;
  SamplerState st;
  st.K = 2;
  st.V = 2;
  st.alpha = 1.0;
  st.beta = TopicPrior::matrix_prior(rows);
  st.docs = {{0}};
  st.doc_ids = {1};
  st.z = {{0}};
  st.n_kt = Matrix(2, 2);  // current token already removed
  st.n_mk = Matrix(1, 2);
  st.n_k = {0.0, 0.0};
  const auto p = olda_conditional(st, 0, 0);
  CHECK(p[0] > 0.99);
  const auto q = olda_conditional(st, 0, 1);
  CHECK(q[1] > 0.99);
}

TEST_CASE("online pipeline produces one model and one metrics row per batch") {
  Corpus c = synth(100, 10, 12, 51);
  Corpus prior;
  prior.vocab = c.vocab;
  prior.docs.assign(c.docs.begin(), c.docs.end() - 60);
  Corpus stream;
  stream.vocab = c.vocab;
  stream.docs.assign(c.docs.end() - 60, c.docs.end());
  Corpus test = synth(20, 10, 12, 99);

  auto batches = make_batches(stream, 3, 20, 0.4, 7);
  OnlineConfig cfg;
  cfg.train.topics = 2;
  cfg.train.alpha = 0.5;
  cfg.train.beta = 0.1;
  cfg.train.iters = 8;
  cfg.lambda = 0.5;
  cfg.omega = 0.4;
  cfg.fold_in_sweeps = 5;

  OnlineResult r = run_olp(&prior, batches, c.vocab, cfg, &test, 11);
  REQUIRE(r.models.size() == 3);
  REQUIRE(r.metrics.size() == 3);
  for (int l = 0; l < 3; ++l) {
    CHECK(r.metrics[l].batch == l + 1);
    CHECK(r.metrics[l].batch_size == 20);
    CHECK(r.metrics[l].eps_word == doctest::Approx(rr_eps_word(0.4)));
    CHECK(r.metrics[l].perplexity > 1.0);
    CHECK(r.metrics[l].perplexity < 50.0);
    for (int k = 0; k < 2; ++k)
      CHECK(r.models[l].phi.row_sum(k) == doctest::Approx(1.0));
  }
  CHECK(r.report.mechanism == "olp");
  CHECK(r.report.total_epsilon == doctest::Approx(rr_eps_word(0.4)));
  REQUIRE(r.report.per_iteration.size() == 3);

  OnlineResult again = run_olp(&prior, batches, c.vocab, cfg, &test, 11);
  for (int l = 0; l < 3; ++l) CHECK(again.models[l].phi == r.models[l].phi);

  OnlineResult cold = run_olp(nullptr, batches, c.vocab, cfg, &test, 11);
  REQUIRE(cold.models.size() == 3);
  CHECK_FALSE(cold.models[0].phi == r.models[0].phi);

  OnlineResult untested = run_olp(&prior, batches, c.vocab, cfg, nullptr, 11);
  CHECK(std::isnan(untested.metrics[0].perplexity));
  CHECK(untested.models.back().phi == r.models.back().phi);
}

TEST_CASE("online pipeline validates its inputs") {
  Corpus c = synth(20, 8, 10);
  OnlineConfig cfg;
  cfg.train.topics = 2;
  CHECK_THROWS_AS(run_olp(nullptr, {}, c.vocab, cfg, nullptr, 1), std::invalid_argument);

  Corpus wrong = synth(10, 5, 6);
  auto batches = make_batches(c, 1, 20, 0.5, 3);
  CHECK_THROWS_AS(run_olp(&wrong, batches, c.vocab, cfg, nullptr, 1),
                  std::invalid_argument);
}
