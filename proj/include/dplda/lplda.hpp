#pragma once

#include <string>
#include <vector>

#include "dplda/corpus.hpp"
#include "dplda/sampler.hpp"

namespace dplda {

// What the server receives from a set of clients: presence vectors with
// every bit passed through randomized response with the same f.
struct PerturbedBatch {
  double f = 0.5;
  std::vector<BinaryDoc> docs;

  int size() const { return static_cast<int>(docs.size()); }
};

// Client-side encoding: one randomized-response pass over a presence vector.
BinaryDoc perturb_document(const BinaryDoc& doc, double f, RngStream& rng);

// Perturbs every document; document i uses the derived stream rng.derive(i),
// so the output is independent of batch size and order of processing.
PerturbedBatch perturb_docs(const std::vector<BinaryDoc>& docs, double f, RngStream rng);

// Unbiased count estimate from n_t observed set bits among M vectors:
//   N_hat = (2*n_t - f*M) / (2*(1-f))
double estimate_count(double n_t, double f, double M);

// Variance of that estimate when each of M users holds the word
// independently with probability N_t/M:
//   (2-f)*f*M / (4*(1-f)^2) + (M-N_t)*N_t/M
double estimator_variance(double f, double M, double N_t);

// Server-side reconstruction: per word, move the observed bit count toward
// the target by flipping a uniformly chosen set of documents, then emit one
// token per remaining set bit. Infeasible corrections are capped at the
// number of eligible documents. Document count never changes (documents may
// come out empty). Default targets are the moment estimates.
Corpus reconstruct(const PerturbedBatch& batch, const Vocabulary& vocab, RngStream rng);

// Same, but the per-word targets are supplied by the caller (the online
// trainer passes denoised estimates). targets.size() must equal vocab size.
Corpus reconstruct_with_targets(const PerturbedBatch& batch, const Vocabulary& vocab,
                                const std::vector<double>& targets, RngStream rng);

// Reconstruction followed by plain collapsed Gibbs training. The report
// carries the per-word and per-document randomized-response budgets.
TrainResult train_lp(const PerturbedBatch& batch, const Vocabulary& vocab,
                     const TrainConfig& cfg, uint64_t seed);

// JSON-lines batch files: one record per document,
//   {"doc_id": .., "f": .., "bits": "<base64, LSB-first packed bits>"}
// All records must agree on f; pad bits beyond V must be zero.
void save_batch(const PerturbedBatch& batch, const std::string& path);
PerturbedBatch load_batch(const std::string& path, int vocab_size);

// Loads a sequence of batches: either a directory of *.jsonl files (sorted by
// name) or one stream where a line containing a "batch_end" key closes the
// current batch (a trailing unterminated batch still counts).
std::vector<PerturbedBatch> load_batches(const std::string& path, int vocab_size);

}  // namespace dplda
