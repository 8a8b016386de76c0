#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dplda/rng.hpp"

namespace dplda {

// One draw from Laplace(0, b) via inverse CDF on an open-interval uniform,
// so the log argument never hits 0 and the sample is always finite.
double laplace_sample(double b, RngStream& rng);

// Randomized response on one bit: keep with probability 1-f, otherwise
// resample uniformly (so a flip to each value has probability f/2).
int rr_flip(int bit, double f, RngStream& rng);

// Per-word privacy loss of the above: ln((1 - f/2) / (f/2)), f in (0, 1].
double rr_eps_word(double f);

// Inverse of rr_eps_word: the randomization probability that yields a given
// per-word epsilon.
double rr_f_for_eps(double eps_word);

// Privacy loss inherent in releasing one conditional-sampling step when one
// occurrence of word t is replaced by word t': 2 * max_k |ln((n_k^{t'} + beta)
// / (n_k^t + beta))| over the per-topic count pairs (n_k^{t'}, n_k^t).
double inherent_eps_replaced(const std::vector<std::pair<double, double>>& counts,
                             double beta);

// Loss through the other words' sampling factors: 2 * ln(1 + 1/beta).
double inherent_eps_related(double beta);

// Per-iteration inherent loss for one replaced word occurrence:
//   2 * [ ln(max_count/beta + 1) + (max_word_total + replaced_word_total - 1)
//         * ln(1 + 1/beta) ]
// where max_count is the largest topic-word count of any candidate
// replacement word, max_word_total the largest corpus total among candidate
// replacement words, and replaced_word_total the corpus total of the
// replaced word itself (>= 1).
double inherent_eps_iteration(double max_count, double max_word_total,
                              double replaced_word_total, double beta);

// Total over a run: worst word's summed per-iteration losses. Outer index is
// the word, inner the iteration. Empty input yields 0.
double inherent_eps_total(const std::vector<std::vector<double>>& per_word);

// Inherent per-iteration loss once topic-word counts are clipped at C:
// 2 * ln(C/beta + 1).
double clipped_inherent_eps(double C, double beta);

struct PrivacyReport {
  std::string mechanism;                  // "none", "hdp", "cdp", "cdp_plus", "lp", "olp"
  std::map<std::string, double> params;   // mechanism knobs, echoed for the record
  std::vector<double> per_iteration;      // per-iteration epsilon, empty if N/A
  double total_epsilon = 0.0;

  std::string to_json() const;
  static PrivacyReport from_json(const std::string& text);
};

}  // namespace dplda
