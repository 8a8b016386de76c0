#pragma once

#include <vector>

#include "dplda/corpus.hpp"
#include "dplda/lplda.hpp"
#include "dplda/sampler.hpp"

namespace dplda {

struct OnlineConfig {
  TrainConfig train;        // per-phase sampler settings (also the initial prior model)
  double lambda = 0.5;      // how strongly earlier batch counts feed the prior
  double omega = 0.4;       // fixed denoising weight ...
  double sigma2 = -1.0;     // ... or, if > 0, weight derived from this prior variance
  int fold_in_sweeps = 20;  // held-out evaluation
};

// Prior-mean recursion across batches:
//   mu_l = (mu_{l-1} + eta_{l-1}) / 2 * size_l / size_{l-1}
double update_mu(double mu_prev, double eta_prev, double size_l, double size_prev);

// Folds the previous phase's topic-word counts into the prior:
//   beta_l = beta_{l-1} + lambda * counts.
// lambda == 0 keeps the prior untouched (classic per-batch training).
void update_beta(TopicPrior& prior, double lambda, const Matrix& counts);

// Posterior weight on the prior mean for batch size M and flip parameter f,
// given prior variance sigma2:
//   omega = M*f*(2-f) / (M*f*(2-f) + 4*sigma2*(1-f)^2)
double bayes_weight(double M, double f, double sigma2);

// Shrinks the moment estimate toward the prior mean: omega*mu + (1-omega)*moment.
double bayes_denoise(double omega, double mu, double moment);

// Variance of the denoised estimate: (1-omega)^2 * estimator_variance(f, M, N_t).
double bayes_variance(double omega, double f, double M, double N_t);

// The matrix-prior sampler operations are shared with the core sampler; these
// names exist so call sites read like the model they implement.
inline std::vector<double> olda_conditional(const SamplerState& state, int m, int t) {
  return conditional_distribution(state, m, t);
}
inline Matrix olda_estimate(const SamplerState& state) { return estimate_phi(state); }

struct BatchMetrics {
  int batch = 0;            // 1-based batch index
  int batch_size = 0;
  double perplexity = 0.0;  // NaN when no test corpus was supplied
  double eps_word = 0.0;
  double elapsed_ms = 0.0;
};

struct OnlineResult {
  std::vector<TopicModel> models;  // model after each batch
  std::vector<BatchMetrics> metrics;
  PrivacyReport report;
};

// The full online pipeline: optionally trains an initial model on a clean
// prior corpus, then for each perturbed batch updates the prior mean,
// reconstructs the batch against denoised per-word targets, folds the
// previous counts into the topic-word prior, and trains. Batches must share
// the vocabulary; test (if given) is scored after every batch.
OnlineResult run_olp(const Corpus* prior, const std::vector<PerturbedBatch>& batches,
                     const Vocabulary& vocab, const OnlineConfig& cfg,
                     const Corpus* test, uint64_t seed);

}  // namespace dplda
