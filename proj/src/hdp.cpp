#include "dplda/hdp.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

namespace dplda {

namespace {

void add_laplace(Matrix& m, double b, RngStream& rng) {
  for (size_t i = 0; i < m.size(); ++i) m.data()[i] += laplace_sample(b, rng);
}

void refresh_topic_totals(const Matrix& n_kt, std::vector<double>& n_k) {
  n_k.resize(static_cast<size_t>(n_kt.rows()));
  for (int k = 0; k < n_kt.rows(); ++k) n_k[static_cast<size_t>(k)] = n_kt.row_sum(k);
}

}  // namespace

TrainResult train_hdp(const Corpus& corpus, const HdpConfig& cfg, uint64_t seed,
                      TraceSink* sink) {
  if (!(cfg.eps_l > 0.0)) throw std::invalid_argument("train_hdp: eps_l must be > 0");
  if (!(cfg.clip > 0.0)) throw std::invalid_argument("train_hdp: clip must be > 0");
  if (cfg.train.iters < 0) throw std::invalid_argument("train_hdp: iters must be >= 0");

  RngStream root(seed);
  SamplerState st = init_state(corpus, cfg.train.topics, cfg.train.alpha,
                               TopicPrior::uniform_prior(cfg.train.beta),
                               root.derive("init"));
  RngStream sw = root.derive("sweep");
  RngStream noise = root.derive("noise");
  const bool noisy = std::isfinite(cfg.eps_l);
  const double b = 2.0 / cfg.eps_l;

  for (int iter = 0; iter < cfg.train.iters; ++iter) {
    // the iteration's released statistic: exact counts plus fresh noise
    if (noisy) add_laplace(st.n_kt, b, noise);
    refresh_topic_totals(st.n_kt, st.n_k);
    if (sink) sink->iteration_start(iter, st.n_kt);

    SweepOptions opt;
    opt.clip = cfg.clip;
    opt.sink = sink;
    opt.iter = iter;
    sweep(st, sw, opt);
    if (sink) sink->iteration_end(iter);

    // drop the noise again unless the ledger is deliberately contaminated
    if (noisy && !cfg.accumulate_noise) st.rebuild_counts();
  }
  if (noisy && cfg.accumulate_noise) {
    // the contaminated ledger is what this mode trains on; totals only
    refresh_topic_totals(st.n_kt, st.n_k);
  }

  const double eps_i = clipped_inherent_eps(cfg.clip, cfg.train.beta);
  const double eps_iter = cfg.eps_l + eps_i;

  TrainResult r;
  r.model.phi = estimate_phi(st);
  r.model.alpha = cfg.train.alpha;
  r.model.beta = cfg.train.beta;
  r.model.iters = cfg.train.iters;
  r.report.mechanism = "hdp";
  r.report.params["eps_l"] = cfg.eps_l;
  r.report.params["eps_i"] = eps_i;
  r.report.params["clip"] = cfg.clip;
  r.report.params["beta"] = cfg.train.beta;
  r.report.params["iters"] = cfg.train.iters;
  r.report.per_iteration.assign(static_cast<size_t>(cfg.train.iters), eps_iter);
  r.report.total_epsilon = static_cast<double>(cfg.train.iters) * (cfg.eps_l + eps_i);
  r.final_counts = st.n_kt;
  r.degeneracy_events = st.degeneracy_events;
  return r;
}

TrainResult train_cdp(const Corpus& corpus, const CdpConfig& cfg, uint64_t seed,
                      TraceSink* sink) {
  if (!(cfg.eps > 0.0) || !std::isfinite(cfg.eps))
    throw std::invalid_argument("train_cdp: eps must be positive and finite");
  if (cfg.train.iters < 0) throw std::invalid_argument("train_cdp: iters must be >= 0");

  RngStream root(seed);
  SamplerState st = init_state(corpus, cfg.train.topics, cfg.train.alpha,
                               TopicPrior::uniform_prior(cfg.train.beta),
                               root.derive("init"));
  RngStream sw = root.derive("sweep");
  RngStream noise = root.derive("noise");

  // one-shot perturbation of the whole ledger, topic-word then doc-topic
  add_laplace(st.n_kt, 1.0 / cfg.eps, noise);
  add_laplace(st.n_mk, 1.0 / cfg.eps, noise);
  refresh_topic_totals(st.n_kt, st.n_k);

  for (int iter = 0; iter < cfg.train.iters; ++iter) {
    if (sink) sink->iteration_start(iter, st.n_kt);
    SweepOptions opt;
    opt.sink = sink;
    opt.iter = iter;
    sweep(st, sw, opt);
    if (sink) sink->iteration_end(iter);
  }

  TrainResult r;
  r.model.phi = estimate_phi(st);
  r.model.alpha = cfg.train.alpha;
  r.model.beta = cfg.train.beta;
  r.model.iters = cfg.train.iters;
  r.report.mechanism = "cdp";
  r.report.params["eps"] = cfg.eps;
  r.report.params["beta"] = cfg.train.beta;
  r.report.params["iters"] = cfg.train.iters;
  r.report.total_epsilon = cfg.eps;
  r.final_counts = st.n_kt;
  r.degeneracy_events = st.degeneracy_events;
  return r;
}

TrainResult train_cdp_plus(const Corpus& corpus, const CdpConfig& cfg, uint64_t seed,
                           TraceSink* sink) {
  if (!(cfg.eps > 0.0) || !std::isfinite(cfg.eps))
    throw std::invalid_argument("train_cdp_plus: eps must be positive and finite");
  if (cfg.train.iters < 0) throw std::invalid_argument("train_cdp_plus: iters must be >= 0");

  RngStream root(seed);
  SamplerState st = init_state(corpus, cfg.train.topics, cfg.train.alpha,
                               TopicPrior::uniform_prior(cfg.train.beta),
                               root.derive("init"));
  RngStream sw = root.derive("sweep");
  RngStream noise = root.derive("noise");
  const double b = 1.0 / cfg.eps;

  for (int iter = 0; iter < cfg.train.iters; ++iter) {
    // fresh noisy snapshots of both matrices; sampling runs entirely against
    // them and the clean ledger is recovered from the assignments after
    add_laplace(st.n_kt, b, noise);
    add_laplace(st.n_mk, b, noise);
    refresh_topic_totals(st.n_kt, st.n_k);
    if (sink) sink->iteration_start(iter, st.n_kt);

    SweepOptions opt;
    opt.sink = sink;
    opt.iter = iter;
    sweep(st, sw, opt);
    if (sink) sink->iteration_end(iter);

    st.rebuild_counts();
  }

  TrainResult r;
  r.model.phi = estimate_phi(st);
  r.model.alpha = cfg.train.alpha;
  r.model.beta = cfg.train.beta;
  r.model.iters = cfg.train.iters;
  r.report.mechanism = "cdp_plus";
  r.report.params["eps_iteration"] = cfg.eps;
  r.report.params["beta"] = cfg.train.beta;
  r.report.params["iters"] = cfg.train.iters;
  r.report.per_iteration.assign(static_cast<size_t>(cfg.train.iters), cfg.eps);
  r.report.total_epsilon = static_cast<double>(cfg.train.iters) * cfg.eps;
  r.final_counts = st.n_kt;
  r.degeneracy_events = st.degeneracy_events;
  return r;
}

namespace {

uint64_t fnv1a_bytes(const void* data, size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = 0xCBF29CE484222325ULL;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

TraceWriter::TraceWriter(std::ostream& out, bool full,
                         std::vector<std::pair<int, int>> targets)
    : out_(out), full_(full), targets_(std::move(targets)) {}

void TraceWriter::iteration_start(int, const Matrix& released_nkt) {
  // copy the published matrix before the sweep starts rewriting it
  snapshot_ = released_nkt;
  has_snapshot_ = true;
  topics_.clear();
  degeneracies_ = 0;
}

void TraceWriter::token_sampled(int, int doc, int pos, int topic) {
  for (const auto& [td, tp] : targets_)
    if (td == doc && tp == pos) {
      topics_.push_back(topic);
      return;
    }
}

void TraceWriter::degeneracy(int) { ++degeneracies_; }

void TraceWriter::iteration_end(int iter) {
  nlohmann::json j;
  j["iter"] = iter;
  if (full_ && has_snapshot_) {
    auto rows = nlohmann::json::array();
    for (int k = 0; k < snapshot_.rows(); ++k) {
      auto row = nlohmann::json::array();
      for (int t = 0; t < snapshot_.cols(); ++t) row.push_back(snapshot_(k, t));
      rows.push_back(std::move(row));
    }
    j["n_kt"] = std::move(rows);
  } else if (has_snapshot_) {
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(
                      fnv1a_bytes(snapshot_.data(), snapshot_.size() * sizeof(double))));
    j["digest"] = hex;
  }
  j["targets"] = topics_;
  if (degeneracies_ > 0) j["degeneracies"] = degeneracies_;
  out_ << j.dump() << '\n';
  has_snapshot_ = false;
}

}  // namespace dplda
