#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dplda/corpus.hpp"
#include "dplda/sampler.hpp"

namespace dplda {

// Held-out perplexity: every test document is folded into the frozen model
// (document m uses the derived stream rng.derive(m)), then
//   per = exp( - sum_m sum_i ln( sum_k theta_mk * phi_k,w_i ) / sum_m |d_m| ).
// A uniform model scores exactly V. Throws if the test corpus has no tokens
// or a token likelihood is not positive.
double perplexity(const TopicModel& model, const Corpus& test, int fold_in_sweeps,
                  RngStream rng);

// A declarative experiment grid: one dataset, one trainer, one swept knob,
// several seeds. Kept as raw JSON text; see README for the schema.
struct SweepPlan {
  std::string json_text;
};

SweepPlan load_plan(const std::string& path);

struct SweepCell {
  std::string x_name;
  double x_value = 0.0;
  uint64_t seed = 0;
  double perplexity = 0.0;
  double total_epsilon = 0.0;
  double elapsed_ms = 0.0;
  bool failed = false;
  std::string error;
};

struct SweepRow {
  std::string x_name;
  double x_value = 0.0;
  std::string metric;
  double mean = 0.0;
  double stddev = 0.0;
  int n_seeds = 0;
};

struct SweepResult {
  std::vector<SweepCell> cells;
  std::vector<SweepRow> rows;
};

// Runs the grid, cells in parallel up to `workers` threads (values below 1
// clamp to 1). Failed cells are recorded and skipped in aggregation; the
// aggregate is deterministic and independent of scheduling. An empty value
// list yields an empty result.
SweepResult run_sweep(const SweepPlan& plan, int workers);

// results.csv: x_name,x_value,metric,mean,std,n_seeds
void write_sweep_csv(const SweepResult& result, const std::string& path);
// results.json: plan echo plus rows and per-cell records
void write_sweep_json(const SweepResult& result, const SweepPlan& plan,
                      const std::string& path);

}  // namespace dplda
