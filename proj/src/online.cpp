#include "dplda/online.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dplda/eval.hpp"

namespace dplda {

double update_mu(double mu_prev, double eta_prev, double size_l, double size_prev) {
  if (!(size_l > 0.0) || !(size_prev > 0.0))
    throw std::invalid_argument("update_mu: batch sizes must be > 0");
  return (mu_prev + eta_prev) / 2.0 * (size_l / size_prev);
}

void update_beta(TopicPrior& prior, double lambda, const Matrix& counts) {
  if (lambda < 0.0) throw std::invalid_argument("update_beta: lambda must be >= 0");
  if (lambda == 0.0) return;
  prior.materialize(counts.rows(), counts.cols());
  if (prior.values.rows() != counts.rows() || prior.values.cols() != counts.cols())
    throw std::invalid_argument("update_beta: count matrix shape mismatch");
  for (size_t i = 0; i < counts.size(); ++i)
    prior.values.data()[i] += lambda * counts.data()[i];
  prior.refresh_row_sums();
}

double bayes_weight(double M, double f, double sigma2) {
  if (!(M > 0.0)) throw std::invalid_argument("bayes_weight: M must be > 0");
  if (!(f > 0.0 && f < 1.0)) throw std::invalid_argument("bayes_weight: f must be in (0,1)");
  if (!(sigma2 > 0.0)) throw std::invalid_argument("bayes_weight: sigma2 must be > 0");
  const double a = M * f * (2.0 - f);
  return a / (a + 4.0 * sigma2 * (1.0 - f) * (1.0 - f));
}

double bayes_denoise(double omega, double mu, double moment) {
  if (!(omega >= 0.0 && omega <= 1.0))
    throw std::invalid_argument("bayes_denoise: omega must be in [0,1]");
  return omega * mu + (1.0 - omega) * moment;
}

double bayes_variance(double omega, double f, double M, double N_t) {
  if (!(omega >= 0.0 && omega <= 1.0))
    throw std::invalid_argument("bayes_variance: omega must be in [0,1]");
  return (1.0 - omega) * (1.0 - omega) * estimator_variance(f, M, N_t);
}

OnlineResult run_olp(const Corpus* prior, const std::vector<PerturbedBatch>& batches,
                     const Vocabulary& vocab, const OnlineConfig& cfg,
                     const Corpus* test, uint64_t seed) {
  if (batches.empty()) throw std::invalid_argument("run_olp: no batches");
  const int V = vocab.size();
  const int K = cfg.train.topics;

  RngStream root(seed);
  std::vector<double> mu(static_cast<size_t>(V), 0.0);
  std::vector<double> eta(static_cast<size_t>(V), 0.0);
  Matrix prev_counts(K, V);
  double prev_size = 0.0;
  TopicPrior beta_l = TopicPrior::uniform_prior(cfg.train.beta);

  OnlineResult out;
  out.report.mechanism = "olp";
  out.report.params["lambda"] = cfg.lambda;
  if (cfg.sigma2 > 0.0)
    out.report.params["sigma2"] = cfg.sigma2;
  else
    out.report.params["omega"] = cfg.omega;
  out.report.params["iters_per_batch"] = cfg.train.iters;
  out.report.params["batches"] = static_cast<double>(batches.size());

  if (prior && prior->num_docs() > 0) {
    if (prior->vocab_size() != V)
      throw std::invalid_argument("run_olp: prior corpus vocabulary mismatch");
    TrainResult r0 = train_cgs(*prior, cfg.train, root.derive("prior").key());
    prev_counts = r0.final_counts;
    prev_size = static_cast<double>(prior->num_docs());
    // the initial prior mean and record are the word totals of the prior fit
    for (int t = 0; t < V; ++t) {
      double s = 0.0;
      for (int k = 0; k < K; ++k) s += prev_counts(k, t);
      mu[static_cast<size_t>(t)] = eta[static_cast<size_t>(t)] = s;
    }
  }

  for (size_t l = 0; l < batches.size(); ++l) {
    const auto t0 = std::chrono::steady_clock::now();
    const PerturbedBatch& batch = batches[l];
    const int M = batch.size();
    if (M < 1) throw std::invalid_argument("run_olp: empty batch");

    const double size_prev = prev_size > 0.0 ? prev_size : static_cast<double>(M);
    for (int t = 0; t < V; ++t)
      mu[static_cast<size_t>(t)] = update_mu(mu[static_cast<size_t>(t)],
                                             eta[static_cast<size_t>(t)],
                                             static_cast<double>(M), size_prev);

    const double omega =
        cfg.sigma2 > 0.0 ? bayes_weight(static_cast<double>(M), batch.f, cfg.sigma2)
                         : cfg.omega;

    std::vector<double> targets(static_cast<size_t>(V));
    for (int t = 0; t < V; ++t) {
      long n_t = 0;
      for (const auto& d : batch.docs) n_t += d.bits[static_cast<size_t>(t)];
      const double moment =
          estimate_count(static_cast<double>(n_t), batch.f, static_cast<double>(M));
      targets[static_cast<size_t>(t)] = bayes_denoise(omega, mu[static_cast<size_t>(t)], moment);
    }

    const Corpus recon = reconstruct_with_targets(
        batch, vocab, targets, root.derive("reconstruct").derive(l));

    // the record the next prior mean is built from; keep it a feasible count
    for (int t = 0; t < V; ++t) {
      double e = targets[static_cast<size_t>(t)];
      if (e < 0.0) e = 0.0;
      if (e > M) e = static_cast<double>(M);
      eta[static_cast<size_t>(t)] = e;
    }

    update_beta(beta_l, cfg.lambda, prev_counts);

    SamplerState st = init_state(recon, K, cfg.train.alpha, beta_l,
                                 root.derive("init").derive(l));
    RngStream sw = root.derive("sweep").derive(l);
    for (int iter = 0; iter < cfg.train.iters; ++iter) sweep(st, sw);

    TopicModel model;
    model.phi = olda_estimate(st);
    model.alpha = cfg.train.alpha;
    model.beta = cfg.train.beta;
    model.iters = cfg.train.iters;

    prev_counts = st.n_kt;
    prev_size = static_cast<double>(M);

    BatchMetrics bm;
    bm.batch = static_cast<int>(l) + 1;
    bm.batch_size = M;
    bm.eps_word = rr_eps_word(batch.f);
    bm.perplexity = std::numeric_limits<double>::quiet_NaN();
    if (test)
      bm.perplexity =
          perplexity(model, *test, cfg.fold_in_sweeps, root.derive("eval").derive(l));
    bm.elapsed_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    out.report.per_iteration.push_back(bm.eps_word);
    if (bm.eps_word > out.report.total_epsilon) out.report.total_epsilon = bm.eps_word;
    out.metrics.push_back(bm);
    out.models.push_back(std::move(model));
  }
  return out;
}

}  // namespace dplda
