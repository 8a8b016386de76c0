#include "dplda/attack.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace dplda {

std::vector<double> infer_word(const AttackTrace& trace, int vocab_size, double floor) {
  if (vocab_size < 1) throw std::invalid_argument("infer_word: vocab_size must be >= 1");
  if (!(floor > 0.0)) throw std::invalid_argument("infer_word: floor must be > 0");
  const size_t V = static_cast<size_t>(vocab_size);
  std::vector<double> score(V, 0.0);
  for (const auto& rec : trace.records) {
    if (rec.row.size() != V)
      throw std::invalid_argument("infer_word: record row length mismatch");
    double row_sum = 0.0;
    for (double v : rec.row) row_sum += std::max(v, floor);
    const double log_den = std::log(row_sum);
    for (size_t t = 0; t < V; ++t)
      score[t] += std::log(std::max(rec.row[t], floor)) - log_den;
  }
  // softmax, stabilized
  const double m = *std::max_element(score.begin(), score.end());
  double z = 0.0;
  for (double s : score) z += std::exp(s - m);
  std::vector<double> post(V);
  for (size_t t = 0; t < V; ++t) post[t] = std::exp(score[t] - m) / z;
  return post;
}

namespace {

class AttackSink : public TraceSink {
 public:
  AttackSink(AttackTrace* trace, int V) : trace_(trace), V_(V) {}

  void iteration_start(int, const Matrix& released_nkt) override {
    // the live matrix keeps changing during the sweep; the adversary only
    // sees the values published here
    snapshot_ = released_nkt;
  }
  void token_sampled(int, int doc, int pos, int topic) override {
    if (doc != trace_->target_doc || pos != trace_->target_pos) return;
    AttackRecord rec;
    rec.topic = topic;
    rec.row.assign(snapshot_.row(topic), snapshot_.row(topic) + V_);
    trace_->records.push_back(std::move(rec));
  }

 private:
  AttackTrace* trace_;
  int V_;
  Matrix snapshot_;
};

}  // namespace

AttackResult run_attack(const Corpus& corpus, const AttackConfig& cfg, uint64_t seed) {
  if (corpus.docs.empty()) throw std::invalid_argument("run_attack: empty corpus");
  const int V = corpus.vocab_size();

  AttackResult out;
  AttackTrace& trace = out.trace;
  trace.target_doc =
      cfg.target_doc < 0 ? corpus.num_docs() - 1 : cfg.target_doc;
  if (trace.target_doc >= corpus.num_docs())
    throw std::invalid_argument("run_attack: target document out of range");
  const auto& tokens = corpus.docs[static_cast<size_t>(trace.target_doc)].tokens;
  if (tokens.empty()) throw std::invalid_argument("run_attack: target document is empty");
  trace.target_pos = cfg.target_pos < 0 ? static_cast<int>(tokens.size()) - 1 : cfg.target_pos;
  if (trace.target_pos >= static_cast<int>(tokens.size()))
    throw std::invalid_argument("run_attack: target position out of range");
  trace.true_word = tokens[static_cast<size_t>(trace.target_pos)];

  AttackSink sink(&trace, V);
  TrainResult tr;
  switch (cfg.trainer) {
    case AttackTrainer::cgs:
      tr = train_cgs(corpus, cfg.train, seed, &sink);
      break;
    case AttackTrainer::hdp: {
      HdpConfig hc;
      hc.train = cfg.train;
      hc.eps_l = cfg.eps_l;
      hc.clip = cfg.clip;
      tr = train_hdp(corpus, hc, seed, &sink);
      break;
    }
    case AttackTrainer::cdp_plus: {
      CdpConfig cc;
      cc.train = cfg.train;
      cc.eps = cfg.eps;
      tr = train_cdp_plus(corpus, cc, seed, &sink);
      break;
    }
  }
  out.report = tr.report;

  // score the attack after each iteration prefix
  const size_t T = trace.records.size();
  std::vector<double> score(static_cast<size_t>(V), 0.0);
  out.accuracy.reserve(T);
  out.argmax_correct.reserve(T);
  const double floor = 1e-3;
  for (size_t i = 0; i < T; ++i) {
    const auto& rec = trace.records[i];
    double row_sum = 0.0;
    for (double v : rec.row) row_sum += std::max(v, floor);
    const double log_den = std::log(row_sum);
    for (int t = 0; t < V; ++t)
      score[static_cast<size_t>(t)] +=
          std::log(std::max(rec.row[static_cast<size_t>(t)], floor)) - log_den;

    const double m = *std::max_element(score.begin(), score.end());
    double z = 0.0;
    int argmax = 0;
    for (int t = 0; t < V; ++t) {
      z += std::exp(score[static_cast<size_t>(t)] - m);
      if (score[static_cast<size_t>(t)] > score[static_cast<size_t>(argmax)]) argmax = t;
    }
    out.accuracy.push_back(std::exp(score[static_cast<size_t>(trace.true_word)] - m) / z);
    out.argmax_correct.push_back(argmax == trace.true_word ? 1 : 0);
  }
  return out;
}

void write_attack_csv(const AttackResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "iteration,attack_accuracy,argmax_correct\n";
  char buf[40];
  for (size_t i = 0; i < result.accuracy.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", result.accuracy[i]);
    out << (i + 1) << ',' << buf << ',' << int{result.argmax_correct[i]} << '\n';
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace dplda
