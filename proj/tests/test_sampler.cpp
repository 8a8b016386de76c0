#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "dplda/corpus.hpp"
#include "dplda/sampler.hpp"
#include "test_util.hpp"

using namespace dplda;

namespace {

SamplerState two_topic_state() {
  // K=2, V=2, alpha=1, beta=0.01; one 3-token document with the current
  // token already removed from the ledger: n_kt=[[2,1],[0,1]], n_mk=[1,1]
  SamplerState st;
  st.K = 2;
  st.V = 2;
  st.alpha = 1.0;
  st.beta = TopicPrior::uniform_prior(0.01);
  st.docs = {{0, 0, 1}};
  st.doc_ids = {1};
  st.z = {{0, 0, 1}};
  st.n_kt = Matrix(2, 2);
  st.n_kt(0, 0) = 2.0;
  st.n_kt(0, 1) = 1.0;
  st.n_kt(1, 0) = 0.0;
  st.n_kt(1, 1) = 1.0;
  st.n_mk = Matrix(1, 2);
  st.n_mk(0, 0) = 1.0;
  st.n_mk(0, 1) = 1.0;
  st.n_k = {3.0, 1.0};
  return st;
}

Corpus small_synth(int docs = 30, int vocab = 8, int len = 10, uint64_t seed = 3) {
  SynthSpec spec;
  spec.topics = 2;
  spec.vocab_size = vocab;
  spec.docs = docs;
  spec.doc_len = len;
  return synth_corpus(spec, RngStream(seed)).corpus;
}

bool counts_match_assignments(SamplerState st) {
  const Matrix kt = st.n_kt;
  const Matrix mk = st.n_mk;
  const std::vector<double> kk = st.n_k;
  st.rebuild_counts();
  return kt == st.n_kt && mk == st.n_mk && kk == st.n_k;
}

}  // namespace

TEST_CASE("conditional distribution on the worked two-topic ledger") {
  SamplerState st = two_topic_state();
  const std::vector<double> p = conditional_distribution(st, 0, 0);
  REQUIRE(p.size() == 2);
  const double m0 = (2.01 / 3.02) * (2.0 / 4.0);
  const double m1 = (0.01 / 1.02) * (2.0 / 4.0);
  CHECK(p[0] == doctest::Approx(m0 / (m0 + m1)).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(m1 / (m0 + m1)).epsilon(1e-12));
  CHECK(p[0] == doctest::Approx(0.985).epsilon(1e-3));
  CHECK(p[1] == doctest::Approx(0.015).epsilon(5e-2));
  CHECK(p[0] + p[1] == doctest::Approx(1.0));
}

TEST_CASE("conditional distribution rejects nonpositive mass") {
  SamplerState st = two_topic_state();
  st.n_kt(1, 0) = -0.5;  // a noisy ledger can go negative
  CHECK_THROWS_AS(conditional_distribution(st, 0, 0), std::domain_error);
  st = two_topic_state();
  CHECK_THROWS_AS(conditional_distribution(st, 2, 0), std::invalid_argument);
  CHECK_THROWS_AS(conditional_distribution(st, 0, 5), std::invalid_argument);
}

TEST_CASE("init_state builds a consistent ledger") {
  Corpus c = small_synth();
  SamplerState st = init_state(c, 4, 0.7, TopicPrior::uniform_prior(0.05), RngStream(9));
  CHECK(st.K == 4);
  CHECK(st.V == c.vocab_size());
  REQUIRE(st.num_docs() == c.num_docs());
  for (int m = 0; m < st.num_docs(); ++m) {
    REQUIRE(st.z[m].size() == st.docs[m].size());
    for (int32_t k : st.z[m]) {
      REQUIRE(k >= 0);
      REQUIRE(k < 4);
    }
    CHECK(st.n_mk.row_sum(m) == doctest::Approx(static_cast<double>(st.docs[m].size())));
  }
  CHECK(counts_match_assignments(st));
  double total = 0.0;
  for (double v : st.n_k) total += v;
  CHECK(total == doctest::Approx(static_cast<double>(c.total_tokens())));

  CHECK_THROWS_AS(init_state(c, 0, 1.0, TopicPrior::uniform_prior(0.1), RngStream(1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(init_state(c, 2, 0.0, TopicPrior::uniform_prior(0.1), RngStream(1)),
                  std::invalid_argument);
}

TEST_CASE("sweep keeps the ledger consistent and never degenerates on clean counts") {
  Corpus c = small_synth();
  SamplerState st = init_state(c, 3, 1.0, TopicPrior::uniform_prior(0.01), RngStream(4));
  RngStream sw = RngStream(8).derive("sweep");
  for (int i = 0; i < 5; ++i) sweep(st, sw);
  CHECK(st.degeneracy_events == 0);
  CHECK(counts_match_assignments(st));
}

TEST_CASE("clip and floor guards are inactive on integral counts") {
  Corpus c = small_synth(20, 6, 8, 11);
  SamplerState a = init_state(c, 3, 1.0, TopicPrior::uniform_prior(0.01), RngStream(2));
  SamplerState b = init_state(c, 3, 1.0, TopicPrior::uniform_prior(0.01), RngStream(2));
  RngStream ra = RngStream(5).derive("sweep");
  RngStream rb = RngStream(5).derive("sweep");
  SweepOptions clipped;
  clipped.clip = 1e9;  // larger than any count, so capping never fires
  for (int i = 0; i < 4; ++i) {
    sweep(a, ra);
    sweep(b, rb, clipped);
  }
  CHECK(a.n_kt == b.n_kt);
  CHECK(a.z == b.z);
}

TEST_CASE("estimate_phi on the worked row") {
  SamplerState st;
  st.K = 1;
  st.V = 2;
  st.alpha = 1.0;
  st.beta = TopicPrior::uniform_prior(0.01);
  st.docs = {{0, 0, 0, 1}};
  st.doc_ids = {1};
  st.z = {{0, 0, 0, 0}};
  st.rebuild_counts();
  const Matrix phi = estimate_phi(st);
  CHECK(phi(0, 0) == doctest::Approx(3.01 / 4.02).epsilon(1e-12));
  CHECK(phi(0, 1) == doctest::Approx(1.01 / 4.02).epsilon(1e-12));
  CHECK(phi(0, 0) == doctest::Approx(0.7488).epsilon(1e-3));
}

TEST_CASE("estimate_phi rows stay stochastic on a perturbed ledger") {
  SamplerState st = two_topic_state();
  st.n_kt(0, 0) = -4.0;
  st.n_kt(0, 1) = 0.2;
  const Matrix phi = estimate_phi(st);
  for (int k = 0; k < 2; ++k) {
    CHECK(phi.row_sum(k) == doctest::Approx(1.0));
    for (int t = 0; t < 2; ++t) CHECK(phi(k, t) > 0.0);
  }
}

TEST_CASE("fold_in picks out the generating topic") {
  const double e = 1e-3;
  Matrix phi(2, 2);
  phi(0, 0) = 1.0 - e;
  phi(0, 1) = e;
  phi(1, 0) = e;
  phi(1, 1) = 1.0 - e;
  std::vector<int32_t> doc(50, 0);  // all tokens from topic 0
  const std::vector<double> theta = fold_in_theta(phi, doc, 1.0, 20, RngStream(6));
  REQUIRE(theta.size() == 2);
  CHECK(theta[0] + theta[1] == doctest::Approx(1.0));
  CHECK(theta[0] >= 0.9);
}

TEST_CASE("fold_in of an empty document is the flat prior") {
  Matrix phi(2, 3, 1.0 / 3.0);
  const std::vector<double> theta = fold_in_theta(phi, {}, 1.0, 10, RngStream(1));
  CHECK(theta[0] == doctest::Approx(0.5));
  CHECK(theta[1] == doctest::Approx(0.5));
}

TEST_CASE("train_cgs is deterministic and reports no mechanism") {
  Corpus c = small_synth();
  TrainConfig cfg;
  cfg.topics = 3;
  cfg.alpha = 0.5;
  cfg.beta = 0.1;
  cfg.iters = 15;
  TrainResult a = train_cgs(c, cfg, 42);
  TrainResult b = train_cgs(c, cfg, 42);
  CHECK(a.model.phi == b.model.phi);
  CHECK(a.final_counts == b.final_counts);
  CHECK(a.report.mechanism == "none");
  CHECK(a.report.total_epsilon == 0.0);
  CHECK(a.degeneracy_events == 0);
  CHECK(a.model.iters == 15);
  for (int k = 0; k < 3; ++k) CHECK(a.model.phi.row_sum(k) == doctest::Approx(1.0));

  TrainResult other = train_cgs(c, cfg, 43);
  CHECK_FALSE(a.model.phi == other.model.phi);

  // the final ledger is exact: every entry is a whole count
  for (size_t i = 0; i < a.final_counts.size(); ++i) {
    const double v = a.final_counts.data()[i];
    CHECK(v == std::floor(v));
    CHECK(v >= 0.0);
  }
}

TEST_CASE("topic prior row sums: scalar form is a single product") {
  TopicPrior p = TopicPrior::uniform_prior(0.1);
  CHECK(p.uniform());
  CHECK(p.at(3, 7) == 0.1);
  CHECK(p.row_sum(0, 7) == 7.0 * 0.1);
  p.materialize(2, 3);
  CHECK_FALSE(p.uniform());
  CHECK(p.values(1, 2) == 0.1);
  CHECK(p.row_sum(1, 3) == doctest::Approx(0.3));
  CHECK_THROWS_AS(TopicPrior::uniform_prior(0.0), std::invalid_argument);
  Matrix bad(1, 2);
  bad(0, 0) = 1.0;
  bad(0, 1) = 0.0;
  CHECK_THROWS_AS(TopicPrior::matrix_prior(bad), std::invalid_argument);
}

TEST_CASE("model CSV round trip is exact") {
  Matrix m(2, 3);
  m(0, 0) = 1.0 / 3.0;
  m(0, 1) = 0.123456789012345678;
  m(0, 2) = 1e-300;
  m(1, 0) = 0.0;
  m(1, 1) = 1.0;
  m(1, 2) = 0.7488;
  const std::string p = test_path("model_rt.csv");
  save_model_csv(m, p);
  CHECK(load_model_csv(p) == m);
}

TEST_CASE("model binary round trip is exact") {
  Matrix m(3, 2);
  m(0, 0) = -0.0;
  m(0, 1) = 2.2250738585072014e-308;
  m(1, 0) = 1.0 / 3.0;
  m(1, 1) = 1e308;
  m(2, 0) = 5e-324;
  m(2, 1) = 0.25;
  const std::string p = test_path("model_rt.bin");
  save_model_bin(m, p);
  CHECK(load_model_bin(p) == m);
}

TEST_CASE("model loaders reject malformed files") {
  CHECK_THROWS_AS(load_model_csv(test_path("missing.csv")), std::runtime_error);
  const std::string ragged = write_file("ragged.csv", "1,2\n3\n");
  CHECK_THROWS_AS(load_model_csv(ragged), std::runtime_error);
  const std::string junk = write_file("junk.csv", "1,spam\n");
  CHECK_THROWS_AS(load_model_csv(junk), std::runtime_error);
  const std::string notbin = write_file("junk.bin", "NOTAMODEL");
  CHECK_THROWS_AS(load_model_bin(notbin), std::runtime_error);
}
