#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "dplda/corpus.hpp"
#include "dplda/matrix.hpp"
#include "dplda/privacy.hpp"
#include "dplda/rng.hpp"

namespace dplda {

// Topic-word prior: either one symmetric scalar or a full K x V matrix (the
// online trainer folds earlier batches into the prior). The scalar form is
// kept distinct so that row sums are V*beta computed as a single product,
// not a summation loop; the two differ in the last ulp and the scalar form
// is the reference behaviour.
struct TopicPrior {
  double scalar = 0.01;
  Matrix values;                  // empty => uniform scalar prior
  std::vector<double> row_sums;   // cached, matrix form only

  bool uniform() const { return values.rows() == 0; }
  double at(int k, int t) const { return uniform() ? scalar : values(k, t); }
  double row_sum(int k, int V) const {
    return uniform() ? static_cast<double>(V) * scalar : row_sums[static_cast<size_t>(k)];
  }

  static TopicPrior uniform_prior(double beta);
  static TopicPrior matrix_prior(Matrix values);
  // promote to matrix form (no-op if already a matrix)
  void materialize(int K, int V);
  void refresh_row_sums();
};

// Full collapsed-sampler state. Counts are doubles: the central-DP trainer
// perturbs this ledger in place, every other trainer keeps it integral.
struct SamplerState {
  int K = 0;
  int V = 0;
  double alpha = 1.0;
  TopicPrior beta;

  std::vector<std::vector<int32_t>> docs;  // token word ids per document
  std::vector<int> doc_ids;
  std::vector<std::vector<int32_t>> z;     // topic assignment per token

  Matrix n_kt;                // K x V topic-word counts
  Matrix n_mk;                // M x K document-topic counts
  std::vector<double> n_k;    // per-topic totals (row sums of n_kt)

  int64_t degeneracy_events = 0;  // tokens that fell back to uniform sampling

  int num_docs() const { return static_cast<int>(docs.size()); }
  // recompute n_kt / n_mk / n_k from z (used after sweeps ran against a
  // noisy working copy of the counts)
  void rebuild_counts();
};

struct TopicModel {
  Matrix phi;          // K x V, rows sum to 1
  double alpha = 1.0;
  double beta = 0.01;
  int iters = 0;

  int K() const { return phi.rows(); }
  int V() const { return phi.cols(); }
};

// Observation hooks used by the inference-attack harness and the trace
// writer. released_nkt is the adversary-visible topic-word matrix as
// published at the start of the iteration (noisy for private trainers, the
// exact counts otherwise). The reference points at the live matrix, which
// the sweep keeps mutating; sinks that need the published values must copy
// them during iteration_start.
class TraceSink {
 public:
  virtual ~TraceSink() = default;
  virtual void iteration_start(int iter, const Matrix& released_nkt) {(void)iter; (void)released_nkt;}
  virtual void token_sampled(int iter, int doc, int pos, int topic) {(void)iter; (void)doc; (void)pos; (void)topic;}
  virtual void degeneracy(int iter) { (void)iter; }
  virtual void iteration_end(int iter) { (void)iter; }
};

// Uniform random topic assignments and the count matrices they imply.
SamplerState init_state(const Corpus& corpus, int K, double alpha, TopicPrior beta,
                        RngStream rng);

// Normalized sampling distribution for one token of word t in document m,
// with that token's assignment already removed from all counts:
//   p(k) ∝ (n_kt + beta_kt)/(n_k + sum_t beta_kt) * (n_mk + alpha)/(N_m - 1 + K*alpha)
// Throws std::domain_error if any unnormalized mass is nonpositive (only
// possible with perturbed counts).
std::vector<double> conditional_distribution(const SamplerState& state, int m, int t);

struct SweepOptions {
  // topic-word counts are capped at clip inside the sampling numerator
  double clip = std::numeric_limits<double>::infinity();
  TraceSink* sink = nullptr;
  int iter = 0;
};

// One full collapsed Gibbs sweep, documents in order, tokens in order.
// Robust against perturbed counts: the sampling numerator is floored at
// beta/2, nonpositive masses contribute nothing, and a token whose whole
// mass vector degenerates is sampled uniformly (counted in the state).
// On clean counts every guard is an exact no-op.
void sweep(SamplerState& state, RngStream& rng, const SweepOptions& opt = {});

// Row-normalized point estimate phi_kt = (n_kt + beta_kt) / sum_t (n_kt +
// beta_kt), with the same beta/2 numerator floor so rows stay stochastic
// even on perturbed ledgers.
Matrix estimate_phi(const SamplerState& state);

// Folds one held-out document into a frozen model: Gibbs on the document's
// assignments only, p(k) ∝ phi_kt * (n_mk + alpha), then the smoothed
// mixture estimate theta_k = (n_mk + alpha)/(|doc| + K*alpha).
std::vector<double> fold_in_theta(const Matrix& phi, const std::vector<int32_t>& tokens,
                                  double alpha, int n_sweeps, RngStream rng);

struct TrainConfig {
  int topics = 50;
  double alpha = 1.0;
  double beta = 0.01;
  int iters = 100;
};

struct TrainResult {
  TopicModel model;
  PrivacyReport report;
  Matrix final_counts;   // exact topic-word ledger after the last iteration
  int64_t degeneracy_events = 0;
};

// Non-private collapsed Gibbs training.
TrainResult train_cgs(const Corpus& corpus, const TrainConfig& cfg, uint64_t seed,
                      TraceSink* sink = nullptr);

// Model (topic-word matrix) serialization. CSV: K headerless rows of V
// full-precision values. Binary: magic "DPLDA1", then K and V as 64-bit
// little-endian integers, then K*V row-major IEEE doubles, little-endian.
void save_model_csv(const Matrix& phi, const std::string& path);
Matrix load_model_csv(const std::string& path);
void save_model_bin(const Matrix& phi, const std::string& path);
Matrix load_model_bin(const std::string& path);

}  // namespace dplda
