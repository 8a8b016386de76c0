#pragma once

#include <string>
#include <vector>

#include "dplda/corpus.hpp"
#include "dplda/hdp.hpp"
#include "dplda/sampler.hpp"

namespace dplda {

// What an adversary watching the released per-iteration statistics learns
// about one token: for every iteration, the topic the token was assigned and
// the released (noisy or exact) topic-word row for that topic.
struct AttackRecord {
  int topic = -1;
  std::vector<double> row;  // released n_kt row of that topic, length V
};

struct AttackTrace {
  int target_doc = -1;  // index into the training corpus
  int target_pos = -1;  // token position inside that document
  int true_word = -1;
  std::vector<AttackRecord> records;  // one per iteration
};

// Word posterior from the trace. Each iteration contributes the log of the
// released row, normalized over the vocabulary; entries are floored before
// the log so zero or negative noisy counts stay usable. The result is the
// softmax over accumulated scores. Uniform rows give the uniform posterior.
std::vector<double> infer_word(const AttackTrace& trace, int vocab_size,
                               double floor = 1e-3);

enum class AttackTrainer { cgs, hdp, cdp_plus };

struct AttackConfig {
  AttackTrainer trainer = AttackTrainer::cgs;
  TrainConfig train;
  double eps_l = 1.0;  // hdp noise budget per iteration
  double clip = 10.0;  // hdp count cap
  double eps = 1.0;    // cdp_plus per-iteration budget
  int target_doc = -1;  // -1 selects the last document
  int target_pos = -1;  // -1 selects the last token of the target document
};

struct AttackResult {
  AttackTrace trace;
  // posterior probability of the true word after iterations 1..T
  std::vector<double> accuracy;
  std::vector<uint8_t> argmax_correct;
  PrivacyReport report;  // the attacked trainer's budget, for the record
};

// Trains with the chosen trainer while recording the adversary's view of the
// target token, then scores the word-inference attack after every iteration.
AttackResult run_attack(const Corpus& corpus, const AttackConfig& cfg, uint64_t seed);

// CSV: iteration,attack_accuracy,argmax_correct (iterations 1-based)
void write_attack_csv(const AttackResult& result, const std::string& path);

}  // namespace dplda
