#pragma once

#include <iosfwd>
#include <utility>
#include <vector>

#include "dplda/sampler.hpp"

namespace dplda {

// Hybrid trainer: each iteration samples against a noisy snapshot of the
// topic-word counts (fresh Laplace(2/eps_l) per entry) with the snapshot
// values capped at clip inside the sampling numerator. Document-topic counts
// stay exact. The exact ledger is kept clean and re-derived from the
// assignments after every iteration; with accumulate_noise the noise is
// instead written into the ledger itself and compounds across iterations
// (the literal reading of the update rule).
struct HdpConfig {
  TrainConfig train;
  double eps_l = 1.0;  // per-iteration Laplace budget; +inf disables noise
  double clip = 10.0;  // count cap C; +inf disables clipping
  bool accumulate_noise = false;
};

// Central-DP baseline: Laplace(1/eps) added once to both count matrices
// before the first sweep, then plain collapsed Gibbs on the perturbed
// ledger.
struct CdpConfig {
  TrainConfig train;
  double eps = 1.0;  // the whole budget for train_cdp, per iteration for train_cdp_plus
};

TrainResult train_hdp(const Corpus& corpus, const HdpConfig& cfg, uint64_t seed,
                      TraceSink* sink = nullptr);
TrainResult train_cdp(const Corpus& corpus, const CdpConfig& cfg, uint64_t seed,
                      TraceSink* sink = nullptr);
// Fresh Laplace(1/eps) snapshots of both matrices every iteration; the exact
// ledger stays clean. Total budget grows linearly with iterations.
TrainResult train_cdp_plus(const Corpus& corpus, const CdpConfig& cfg, uint64_t seed,
                           TraceSink* sink = nullptr);

// Writes one JSON line per iteration: {"iter": i, "digest": "<fnv1a64 of the
// released matrix>", "targets": [topics sampled this iteration for the
// registered (doc, position) pairs]}. With full=true the released matrix is
// embedded verbatim under "n_kt" instead of the digest.
class TraceWriter : public TraceSink {
 public:
  TraceWriter(std::ostream& out, bool full,
              std::vector<std::pair<int, int>> targets = {});
  void iteration_start(int iter, const Matrix& released_nkt) override;
  void token_sampled(int iter, int doc, int pos, int topic) override;
  void degeneracy(int iter) override;
  void iteration_end(int iter) override;

 private:
  std::ostream& out_;
  bool full_;
  std::vector<std::pair<int, int>> targets_;
  Matrix snapshot_;
  bool has_snapshot_ = false;
  std::vector<int> topics_;
  long degeneracies_ = 0;
};

}  // namespace dplda
