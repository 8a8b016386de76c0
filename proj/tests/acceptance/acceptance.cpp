// End-to-end acceptance checks. Each criterion prints one [PASS]/[FAIL] line;
// the exit code is the number of failed criteria. Formula checks are verified
// against independent re-evaluations, statistical checks against Monte-Carlo
// runs with pinned seeds, and trend checks against desk-scale training runs.
//
// The trend and attack criteria use the UCI KOS corpus when
// DPLDA_KOS_DOCWORD / DPLDA_KOS_VOCAB point at it; otherwise they fall back
// to a synthetic corpus with a similar repeat profile. The determinism
// criterion drives the command-line binary named by DPLDA_CLI.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dplda/attack.hpp"
#include "dplda/corpus.hpp"
#include "dplda/eval.hpp"
#include "dplda/hdp.hpp"
#include "dplda/lplda.hpp"
#include "dplda/online.hpp"
#include "dplda/privacy.hpp"
#include "dplda/rng.hpp"
#include "dplda/sampler.hpp"

namespace fs = std::filesystem;
using namespace dplda;

namespace {

int g_failures = 0;

void report(int idx, const char* title, bool ok, const std::string& detail) {
  std::printf("[%s] %d. %s: %s\n", ok ? "PASS" : "FAIL", idx, title, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

bool close_rel(double a, double b, double tol) {
  const double scale = std::max({std::fabs(a), std::fabs(b), 1.0});
  return std::fabs(a - b) <= tol * scale;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// ---------------------------------------------------------------------------
// 1. accountant formulas against independent re-evaluations

bool criterion1(std::string& detail) {
  bool ok = true;

  const double clipped = clipped_inherent_eps(10.0, 0.01);
  const double clipped_ref = 2.0 * std::log(1001.0);
  if (std::fabs(clipped - clipped_ref) > 1e-12) {
    ok = false;
    detail += "clipped(10,0.01)=" + fmt(clipped) + " want " + fmt(clipped_ref) + "; ";
  }

  // reported budget of the hybrid trainer must be exactly T*(eps_l + eps_i)
  SynthSpec spec;
  spec.topics = 3;
  spec.vocab_size = 12;
  spec.docs = 30;
  spec.doc_len = 10;
  const Corpus small = synth_corpus(spec, RngStream(3)).corpus;
  HdpConfig hcfg;
  hcfg.train.topics = 3;
  hcfg.train.iters = 4;
  hcfg.train.beta = 0.01;
  hcfg.eps_l = 2.0;
  hcfg.clip = 10.0;
  const TrainResult hr = train_hdp(small, hcfg, 7);
  const double want =
      static_cast<double>(hcfg.train.iters) * (hcfg.eps_l + clipped_inherent_eps(10.0, 0.01));
  if (hr.report.total_epsilon != want) {
    ok = false;
    detail += "trainer budget " + fmt(hr.report.total_epsilon) + " != " + fmt(want) + "; ";
  }

  // randomized per-iteration and total losses vs a long-double re-evaluation
  RngStream r(101);
  int bad = 0;
  for (int trial = 0; trial < 25; ++trial) {
    const long double beta = 0.05L + static_cast<long double>(r.uniform01()) * 1.95L;
    const long double max_count = static_cast<long double>(r.below(50));
    const long double max_total = static_cast<long double>(1 + r.below(400));
    const long double replaced_total = static_cast<long double>(1 + r.below(400));
    const long double ref =
        2.0L * (std::log(static_cast<double>(max_count / beta + 1.0L)) +
                (max_total + replaced_total - 1.0L) *
                    std::log(static_cast<double>(1.0L + 1.0L / beta)));
    const double got = inherent_eps_iteration(
        static_cast<double>(max_count), static_cast<double>(max_total),
        static_cast<double>(replaced_total), static_cast<double>(beta));
    if (!close_rel(got, static_cast<double>(ref), 1e-12)) ++bad;

    std::vector<std::vector<double>> per_word;
    long double best = 0.0L;
    const uint64_t words = 1 + r.below(5);
    for (uint64_t w = 0; w < words; ++w) {
      std::vector<double> its;
      long double sum = 0.0L;
      const uint64_t iters = 1 + r.below(6);
      for (uint64_t i = 0; i < iters; ++i) {
        const double v = inherent_eps_iteration(static_cast<double>(r.below(20)),
                                                static_cast<double>(1 + r.below(50)),
                                                static_cast<double>(1 + r.below(50)),
                                                0.1 + r.uniform01());
        its.push_back(v);
        sum += static_cast<long double>(v);
      }
      best = std::max(best, sum);
      per_word.push_back(std::move(its));
    }
    if (!close_rel(inherent_eps_total(per_word), static_cast<double>(best), 1e-12)) ++bad;
  }
  if (bad > 0) {
    ok = false;
    detail += std::to_string(bad) + " of 50 randomized formula checks off; ";
  }
  if (ok)
    detail = "clipped=" + fmt(clipped) + ", trainer budget exact, 50 randomized checks within 1e-12";
  return ok;
}

// ---------------------------------------------------------------------------
// 2. conditional sampler against a brute-force evaluation

bool criterion2(std::string& detail) {
  RngStream r(211);
  int checked = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 120; ++trial) {
    const int K = static_cast<int>(1 + r.below(4));
    const int V = static_cast<int>(1 + r.below(6));
    const double alpha = 0.1 + r.uniform01() * 1.9;
    const double beta = 0.05 + r.uniform01() * 1.5;

    Corpus c;
    for (int t = 0; t < V; ++t) c.vocab.terms.push_back("w" + std::to_string(t));
    const int M = static_cast<int>(1 + r.below(4));
    for (int m = 0; m < M; ++m) {
      Document d;
      d.doc_id = m + 1;
      const int len = static_cast<int>(1 + r.below(8));
      for (int i = 0; i < len; ++i)
        d.tokens.push_back(static_cast<int32_t>(r.below(static_cast<uint64_t>(V))));
      c.docs.push_back(std::move(d));
    }

    SamplerState st =
        init_state(c, K, alpha, TopicPrior::uniform_prior(beta), r.derive(static_cast<uint64_t>(trial)));

    const int m = static_cast<int>(r.below(static_cast<uint64_t>(M)));
    const int pos = static_cast<int>(r.below(st.docs[static_cast<size_t>(m)].size()));
    const int t = st.docs[static_cast<size_t>(m)][static_cast<size_t>(pos)];
    const int k_old = st.z[static_cast<size_t>(m)][static_cast<size_t>(pos)];
    st.n_kt(k_old, t) -= 1.0;
    st.n_mk(m, k_old) -= 1.0;
    st.n_k[static_cast<size_t>(k_old)] -= 1.0;

    long double num[4];
    long double total = 0.0L;
    long double doc_total = 0.0L;
    for (int k = 0; k < K; ++k) doc_total += static_cast<long double>(st.n_mk(m, k));
    for (int k = 0; k < K; ++k) {
      const long double word =
          (static_cast<long double>(st.n_kt(k, t)) + beta) /
          (static_cast<long double>(st.n_k[static_cast<size_t>(k)]) + V * static_cast<long double>(beta));
      const long double doc = (static_cast<long double>(st.n_mk(m, k)) + alpha) /
                              (doc_total + K * static_cast<long double>(alpha));
      num[k] = word * doc;
      total += num[k];
    }

    const std::vector<double> got = conditional_distribution(st, m, t);
    const std::vector<double> alias = olda_conditional(st, m, t);
    for (int k = 0; k < K; ++k) {
      const double ref = static_cast<double>(num[k] / total);
      worst = std::max(worst, std::fabs(got[static_cast<size_t>(k)] - ref));
      if (std::fabs(got[static_cast<size_t>(k)] - ref) > 1e-12) {
        detail = "state " + std::to_string(trial) + " topic " + std::to_string(k) + ": got " +
                 fmt(got[static_cast<size_t>(k)]) + " want " + fmt(ref);
        return false;
      }
      if (alias[static_cast<size_t>(k)] != got[static_cast<size_t>(k)]) {
        detail = "scalar-prior alias diverges on state " + std::to_string(trial);
        return false;
      }
    }
    ++checked;
  }
  detail = std::to_string(checked) + " random states, max |diff| " + fmt(worst);
  return true;
}

// ---------------------------------------------------------------------------
// 3. randomized-response transition frequencies

bool criterion3(std::string& detail) {
  if (std::fabs(rr_eps_word(0.5) - std::log(3.0)) > 1e-12) {
    detail = "eps_word(0.5)=" + fmt(rr_eps_word(0.5)) + " want ln 3";
    return false;
  }
  RngStream r(307);
  const int n = 100000;
  for (double f : {0.2, 0.5, 0.8}) {
    for (int bit : {1, 0}) {
      int kept = 0;
      for (int i = 0; i < n; ++i) kept += rr_flip(bit, f, r) == bit ? 1 : 0;
      const double p = 1.0 - f / 2.0;
      const double freq = static_cast<double>(kept) / n;
      const double sigma = std::sqrt(p * (1.0 - p) / n);
      if (std::fabs(freq - p) > 3.0 * sigma) {
        detail = "f=" + fmt(f) + " bit=" + std::to_string(bit) + ": keep freq " + fmt(freq) +
                 " vs " + fmt(p) + " (3 sigma " + fmt(3.0 * sigma) + ")";
        return false;
      }
    }
  }
  detail = "keep frequencies within 3 sigma for f in {0.2,0.5,0.8}, 1e5 trials each";
  return true;
}

// ---------------------------------------------------------------------------
// 4. moment and shrinkage estimator laws

bool criterion4(std::string& detail) {
  const int M = 1000;
  const int trials = 20000;
  double worst_bias = 0.0, worst_var = 0.0;
  RngStream root(401);

  for (double f : {0.2, 0.5}) {
    for (double N_t : {100.0, 500.0, 900.0}) {
      RngStream r = root.derive("moment").derive(static_cast<uint64_t>(f * 10)).derive(
          static_cast<uint64_t>(N_t));
      double s = 0.0, s2 = 0.0;
      for (int i = 0; i < trials; ++i) {
        long n_t = 0;
        for (int m = 0; m < M; ++m) {
          const int held = r.uniform01() < N_t / M ? 1 : 0;
          n_t += rr_flip(held, f, r);
        }
        const double est = estimate_count(static_cast<double>(n_t), f, M);
        s += est;
        s2 += est * est;
      }
      const double mean = s / trials;
      const double var = s2 / trials - mean * mean;
      const double var_ref = estimator_variance(f, M, N_t);
      const double se = std::sqrt(var_ref / trials);
      worst_bias = std::max(worst_bias, std::fabs(mean - N_t) / se);
      worst_var = std::max(worst_var, std::fabs(var / var_ref - 1.0));
      if (std::fabs(mean - N_t) > 3.0 * se) {
        detail = "moment bias at f=" + fmt(f) + " N_t=" + fmt(N_t) + ": mean " + fmt(mean);
        return false;
      }
      if (std::fabs(var / var_ref - 1.0) > 0.10) {
        detail = "moment variance at f=" + fmt(f) + " N_t=" + fmt(N_t) + ": " + fmt(var) +
                 " vs " + fmt(var_ref);
        return false;
      }
    }
  }

  for (double f : {0.2, 0.5}) {
    for (double omega : {0.2, 0.4, 0.8}) {
      const double N_t = 500.0;
      RngStream r = root.derive("bayes").derive(static_cast<uint64_t>(f * 10)).derive(
          static_cast<uint64_t>(omega * 10));
      double s = 0.0, s2 = 0.0;
      for (int i = 0; i < trials; ++i) {
        long n_t = 0;
        for (int m = 0; m < M; ++m) {
          const int held = r.uniform01() < N_t / M ? 1 : 0;
          n_t += rr_flip(held, f, r);
        }
        const double est =
            bayes_denoise(omega, N_t, estimate_count(static_cast<double>(n_t), f, M));
        s += est;
        s2 += est * est;
      }
      const double mean = s / trials;
      const double var = s2 / trials - mean * mean;
      const double var_ref = bayes_variance(omega, f, M, N_t);
      worst_var = std::max(worst_var, std::fabs(var / var_ref - 1.0));
      if (std::fabs(var / var_ref - 1.0) > 0.10) {
        detail = "shrunk variance at f=" + fmt(f) + " omega=" + fmt(omega) + ": " + fmt(var) +
                 " vs " + fmt(var_ref);
        return false;
      }
    }
  }
  detail = "worst bias " + fmt(worst_bias) + " se, worst variance error " +
           fmt(worst_var * 100.0) + "%";
  return true;
}

// ---------------------------------------------------------------------------
// 5. Gaussian approximation of the flipped-count likelihood

long double lchoose(long double n, long double k) {
  return std::lgammal(n + 1.0L) - std::lgammal(k + 1.0L) - std::lgammal(n - k + 1.0L);
}

bool criterion5(std::string& detail) {
  const int M = 200;
  const double f = 0.5;
  const long double p1 = 1.0L - f / 2.0L;
  const long double p0 = f / 2.0L;
  double worst = 0.0;
  for (double N_t : {40.0, 100.0, 160.0}) {
    const long double ones = static_cast<long double>(N_t);
    const long double zeros = static_cast<long double>(M) - ones;
    const double mu = static_cast<double>(ones * p1 + zeros * p0);
    const double var = M * static_cast<double>(p0 * p1);

    long double tv = 0.0L;
    for (int n = 0; n <= M; ++n) {
      long double pmf = 0.0L;
      const int lo = std::max(0, n - static_cast<int>(zeros));
      const int hi = std::min(static_cast<int>(ones), n);
      for (int a = lo; a <= hi; ++a) {
        const long double la = lchoose(ones, a) + a * std::log(static_cast<double>(p1)) +
                               (ones - a) * std::log(static_cast<double>(1.0L - p1));
        const long double lb = lchoose(zeros, n - a) +
                               (n - a) * std::log(static_cast<double>(p0)) +
                               (zeros - (n - a)) * std::log(static_cast<double>(1.0L - p0));
        pmf += std::exp(static_cast<double>(la + lb));
      }
      const double g = std::exp(-(n - mu) * (n - mu) / (2.0 * var)) /
                       std::sqrt(2.0 * M_PI * var);
      tv += std::fabs(pmf - static_cast<long double>(g));
    }
    const double tvd = static_cast<double>(tv) / 2.0;
    worst = std::max(worst, tvd);
    if (tvd > 0.05) {
      detail = "TV at N_t=" + fmt(N_t) + " is " + fmt(tvd);
      return false;
    }
  }
  detail = "max total variation " + fmt(worst) + " over N_t in {40,100,160}";
  return true;
}

// ---------------------------------------------------------------------------
// 6. plain training recovers a synthetic model

bool criterion6(std::string& detail) {
  SynthSpec spec;
  spec.topics = 2;
  spec.vocab_size = 20;
  spec.docs = 260;
  spec.doc_len = 50;
  spec.alpha = 0.5;
  spec.beta = 0.1;
  const SynthResult gen = synth_corpus(spec, RngStream(31));
  const auto parts = split_corpus(gen.corpus, 200, RngStream(33));
  const Corpus& train = parts.first;
  const Corpus& test = parts.second;

  TopicModel truth;
  truth.phi = gen.phi;
  truth.alpha = spec.alpha;
  const double per_true = perplexity(truth, test, 20, RngStream(35));

  TrainConfig cfg;
  cfg.topics = 2;
  cfg.alpha = 0.5;
  cfg.beta = 0.1;
  cfg.iters = 200;
  std::vector<double> pers;
  for (uint64_t seed : {41u, 42u, 43u}) {
    const TrainResult tr = train_cgs(train, cfg, seed);
    pers.push_back(perplexity(tr.model, test, 20, RngStream(seed).derive("eval")));
  }
  const double per_fit = mean_of(pers);
  detail = "generator " + fmt(per_true) + ", fits {" + fmt(pers[0]) + ", " + fmt(pers[1]) +
           ", " + fmt(pers[2]) + "}, mean " + fmt(per_fit);
  return std::fabs(per_fit - per_true) <= 0.15 * per_true;
}

// ---------------------------------------------------------------------------
// 7/8. desk-scale corpus: UCI KOS when supplied, else a synthetic stand-in

struct DeskCorpus {
  Corpus train;
  Corpus test;
  std::string label;
};

DeskCorpus desk_corpus() {
  DeskCorpus out;
  const char* docword = std::getenv("DPLDA_KOS_DOCWORD");
  const char* vocab = std::getenv("DPLDA_KOS_VOCAB");
  if (docword && vocab && *docword && *vocab) {
    const Corpus kos = load_uci(docword, vocab, 1000);
    const auto parts = split_corpus(kos, kos.num_docs() - 500, RngStream(13));
    out.train = parts.first;
    out.test = parts.second;
    out.label = "kos";
    return out;
  }
  SynthSpec spec;
  spec.topics = 50;
  spec.vocab_size = 4000;
  spec.docs = 2600;
  spec.doc_len = 100;
  spec.alpha = 0.1;
  spec.beta = 0.01;
  const Corpus c = synth_corpus(spec, RngStream(7)).corpus;
  const auto parts = split_corpus(c, 2100, RngStream(13));
  out.train = parts.first;
  out.test = parts.second;
  out.label = "synthetic stand-in";
  return out;
}

bool criterion7(const DeskCorpus& d, std::string& detail) {
  const std::vector<uint64_t> seeds = {11, 12, 13};
  TrainConfig cfg;
  cfg.topics = 50;
  cfg.alpha = 0.5;
  cfg.beta = 0.01;
  cfg.iters = 100;
  const int fold_in = 20;
  bool ok = true;

  std::vector<double> cgs;
  for (uint64_t s : seeds) {
    const TrainResult tr = train_cgs(d.train, cfg, s);
    cgs.push_back(perplexity(tr.model, d.test, fold_in, RngStream(s).derive("eval")));
  }
  const double per_cgs = mean_of(cgs);

  const auto bins = to_binary(d.train);
  std::vector<double> lp_means;
  for (double eps : {1.0, 2.0, 4.0, 8.0}) {
    const double f = rr_f_for_eps(eps);
    std::vector<double> pers;
    for (uint64_t s : seeds) {
      const PerturbedBatch batch = perturb_docs(bins, f, RngStream(s).derive("perturb"));
      const TrainResult tr = train_lp(batch, d.train.vocab, cfg, s);
      pers.push_back(perplexity(tr.model, d.test, fold_in, RngStream(s).derive("eval")));
    }
    lp_means.push_back(mean_of(pers));
  }
  std::string curve = "lp means {";
  for (size_t i = 0; i < lp_means.size(); ++i)
    curve += (i ? ", " : "") + fmt(lp_means[i]);
  curve += "} vs cgs " + fmt(per_cgs);
  for (size_t i = 1; i < lp_means.size(); ++i)
    if (!(lp_means[i] < lp_means[i - 1])) {
      ok = false;
      detail += "lp curve not strictly decreasing; ";
    }
  if (std::fabs(lp_means.back() - per_cgs) > 0.15 * per_cgs) {
    ok = false;
    detail += "lp at eps=8 not within 15% of cgs; ";
  }

  // both trainers smooth with beta = 1 and the clip pins the per-iteration
  // inherent loss at 10, the setting the utility comparison is reported under
  TrainConfig pcfg = cfg;
  pcfg.beta = 1.0;
  std::vector<double> hdp, cdpp;
  for (uint64_t s : seeds) {
    HdpConfig hcfg;
    hcfg.train = pcfg;
    hcfg.eps_l = 1.0;
    hcfg.clip = pcfg.beta * (std::exp(5.0) - 1.0);
    const TrainResult h = train_hdp(d.train, hcfg, s);
    hdp.push_back(perplexity(h.model, d.test, fold_in, RngStream(s).derive("eval")));
    CdpConfig ccfg;
    ccfg.train = pcfg;
    ccfg.eps = 1.0;
    const TrainResult c = train_cdp_plus(d.train, ccfg, s);
    cdpp.push_back(perplexity(c.model, d.test, fold_in, RngStream(s).derive("eval")));
  }
  const double per_hdp = mean_of(hdp);
  const double per_cdpp = mean_of(cdpp);
  if (!(per_hdp <= 1.05 * per_cdpp)) {
    ok = false;
    detail += "hybrid " + fmt(per_hdp) + " worse than 1.05x central " + fmt(per_cdpp) + "; ";
  }

  // online: 500 prior documents, ten batches of 160
  Corpus prior;
  prior.vocab = d.train.vocab;
  prior.docs.assign(d.train.docs.begin(), d.train.docs.begin() + 500);
  const double f = rr_f_for_eps(4.0);
  std::vector<double> with2, with10;
  std::vector<std::vector<double>> with_means(10), cold_means(10);
  for (uint64_t s : seeds) {
    std::vector<PerturbedBatch> batches;
    for (int l = 0; l < 10; ++l) {
      const auto begin = d.train.docs.begin() + 500 + static_cast<long>(l) * 160;
      Corpus slice;
      slice.vocab = d.train.vocab;
      slice.docs.assign(begin, begin + 160);
      batches.push_back(perturb_docs(
          to_binary(slice), f,
          RngStream(s).derive("batch").derive(static_cast<uint64_t>(l))));
    }
    OnlineConfig ocfg;
    ocfg.train = cfg;
    ocfg.lambda = 0.5;
    ocfg.omega = 0.4;
    ocfg.fold_in_sweeps = fold_in;
    const OnlineResult warm = run_olp(&prior, batches, d.train.vocab, ocfg, &d.test, s);
    const OnlineResult cold = run_olp(nullptr, batches, d.train.vocab, ocfg, &d.test, s);
    with2.push_back(warm.metrics[1].perplexity);
    with10.push_back(warm.metrics[9].perplexity);
    for (int l = 0; l < 10; ++l) {
      with_means[static_cast<size_t>(l)].push_back(warm.metrics[static_cast<size_t>(l)].perplexity);
      cold_means[static_cast<size_t>(l)].push_back(cold.metrics[static_cast<size_t>(l)].perplexity);
    }
  }
  if (!(mean_of(with10) < mean_of(with2))) {
    ok = false;
    detail += "online batch 10 (" + fmt(mean_of(with10)) + ") not below batch 2 (" +
              fmt(mean_of(with2)) + "); ";
  }
  for (int l = 0; l < 10; ++l)
    if (!(mean_of(with_means[static_cast<size_t>(l)]) <
          mean_of(cold_means[static_cast<size_t>(l)]))) {
      ok = false;
      detail += "prior run loses at batch " + std::to_string(l + 1) + "; ";
      break;
    }

  detail += curve + "; hybrid " + fmt(per_hdp) + " vs central " + fmt(per_cdpp) +
            "; online batch2 " + fmt(mean_of(with2)) + " -> batch10 " + fmt(mean_of(with10)) +
            " [" + d.label + "]";
  return ok;
}

bool criterion8(const DeskCorpus& d, std::string& detail) {
  // 500 documents; the adversary targets the last token of the last one
  Corpus small;
  if (d.label == "kos") {
    small.vocab = d.train.vocab;
    small.docs.assign(d.train.docs.begin(), d.train.docs.begin() + 500);
  } else {
    SynthSpec spec;
    spec.topics = 50;
    spec.vocab_size = 1000;
    spec.docs = 500;
    spec.doc_len = 100;
    spec.alpha = 0.3;
    spec.beta = 0.2;
    small = synth_corpus(spec, RngStream(21)).corpus;
  }
  const int V = small.vocab_size();

  AttackConfig cfg;
  cfg.train.topics = 50;
  cfg.train.alpha = 1.0;
  cfg.train.beta = 0.01;
  cfg.train.iters = 100;

  cfg.trainer = AttackTrainer::cgs;
  const AttackResult plain = run_attack(small, cfg, 57);

  // the defense caps the word factor and smooths it with a larger beta,
  // leaving 2 ln 1.1 of inherent loss per iteration
  cfg.trainer = AttackTrainer::hdp;
  cfg.train.beta = 1.0;
  cfg.eps_l = 1.0;
  cfg.clip = 0.1;
  const double eps_i = clipped_inherent_eps(cfg.clip, cfg.train.beta);
  const AttackResult noisy = run_attack(small, cfg, 57);

  const double uniform = 1.0 / V;
  bool ok = true;
  if (!(plain.accuracy.back() > 10.0 * uniform)) {
    ok = false;
    detail += "plain accuracy " + fmt(plain.accuracy.back()) + " not above 10/V; ";
  }
  double worst = 0.0;
  for (double a : noisy.accuracy) worst = std::max(worst, a);
  if (!(worst < 5.0 * uniform)) {
    ok = false;
    detail += "noisy accuracy peaks at " + fmt(worst) + " >= 5/V; ";
  }
  if (!(eps_i <= 10.0)) {
    ok = false;
    detail += "per-iteration inherent loss " + fmt(eps_i) + " above 10; ";
  }
  detail += "plain end " + fmt(plain.accuracy.back()) + ", noisy peak " + fmt(worst) +
            ", 5/V=" + fmt(5.0 * uniform) + ", eps_i=" + fmt(eps_i) + " [" + d.label + "]";
  return ok;
}

// ---------------------------------------------------------------------------
// 9. the command-line binary reruns bit-identically from its manifests

bool run_cli(const std::string& cli, const std::string& args) {
  const std::string cmd = "\"" + cli + "\" " + args + " >/dev/null 2>&1";
  return std::system(cmd.c_str()) == 0;
}

bool slurp(const fs::path& p, std::string& out) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return true;
}

bool same_file(const fs::path& a, const fs::path& b, std::string& why) {
  std::string sa, sb;
  if (!slurp(a, sa) || !slurp(b, sb)) {
    why = "missing " + a.filename().string();
    return false;
  }
  if (sa != sb) {
    why = a.filename().string() + " differs";
    return false;
  }
  return true;
}

std::string drop_last_column(const std::string& csv) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    const size_t cut = line.rfind(',');
    out << (cut == std::string::npos ? line : line.substr(0, cut)) << '\n';
  }
  return out.str();
}

bool criterion9(std::string& detail) {
  const char* cli_env = std::getenv("DPLDA_CLI");
  if (!cli_env || !*cli_env) {
    detail = "DPLDA_CLI is not set";
    return false;
  }
  const std::string cli = cli_env;
  const fs::path w = fs::temp_directory_path() / "dplda_accept_cli";
  std::error_code ec;
  fs::remove_all(w, ec);
  fs::create_directories(w);
  const auto p = [&](const char* name) { return (w / name).string(); };

  if (!run_cli(cli, "synth --topics 4 --vocab-size 30 --docs 360 --doc-len 20 --seed 5 --out " +
                        p("synth")) ||
      !run_cli(cli, "ingest --docword " + p("synth") + "/docword.txt --vocab " + p("synth") +
                        "/vocab.txt --top-v 30 --n-train 240 --seed 3 --out " + p("corpus")) ||
      !run_cli(cli, "perturb --corpus " + p("corpus") + " --use train --f 0.5 --batch-size 80 "
                    "--seed 21 --out " + p("batches"))) {
    detail = "corpus preparation commands failed";
    return false;
  }

  struct Job {
    std::string name;
    std::string args;
    std::vector<std::string> exact;   // byte-identical files
    std::vector<std::string> masked;  // csv files compared without the last column
  };
  const std::vector<Job> jobs = {
      {"train-cgs",
       "train --corpus " + p("corpus") + " --use train --variant cgs --topics 4 --iters 12 "
       "--seed 9",
       {"model.csv", "model.bin", "privacy.json"},
       {}},
      {"train-hdp",
       "train --corpus " + p("corpus") + " --use train --variant hdp --eps-l 1 --clip 10 "
       "--topics 4 --iters 8 --trace digest --seed 9",
       {"model.csv", "model.bin", "privacy.json", "trace.jsonl"},
       {}},
      {"train-lp",
       "train --variant lp --batch " + p("batches") + "/batch_000.jsonl --vocab " + p("corpus") +
       "/vocab.txt --topics 4 --iters 10 --seed 9",
       {"model.csv", "model.bin", "privacy.json"},
       {}},
      {"attack",
       "attack --corpus " + p("corpus") + " --use train --trainer hdp --topics 4 --iters 10 "
       "--eps-l 1 --clip 5 --seed 13",
       {"curve.csv", "privacy.json"},
       {}},
      {"online",
       "online --prior-docword " + p("corpus") + "/train.docword.txt --prior-vocab " + p("corpus") +
       "/vocab.txt --batches " + p("batches") + " --test-docword " + p("corpus") +
       "/test.docword.txt --test-vocab " + p("corpus") + "/vocab.txt --topics 4 --iters 6 "
       "--seed 25",
       {"model.csv", "model.bin", "model_001.csv", "model_002.csv", "model_003.csv",
        "privacy.json"},
       {"metrics.csv"}},
  };

  for (const Job& job : jobs) {
    const fs::path d1 = w / (job.name + "-1");
    const fs::path d2 = w / (job.name + "-2");
    if (!run_cli(cli, job.args + " --out " + d1.string())) {
      detail = job.name + ": first run failed";
      return false;
    }
    const std::string rerun = job.args.substr(0, job.args.find(' ')) + " --config " +
                              (d1 / "manifest.json").string() + " --out " + d2.string();
    if (!run_cli(cli, rerun)) {
      detail = job.name + ": rerun from manifest failed";
      return false;
    }
    std::string why;
    for (const std::string& f : job.exact)
      if (!same_file(d1 / f, d2 / f, why)) {
        detail = job.name + ": " + why;
        return false;
      }
    for (const std::string& f : job.masked) {
      std::string a, b;
      if (!slurp(d1 / f, a) || !slurp(d2 / f, b)) {
        detail = job.name + ": missing " + f;
        return false;
      }
      if (drop_last_column(a) != drop_last_column(b)) {
        detail = job.name + ": " + f + " differs beyond timing";
        return false;
      }
    }
  }
  detail = "5 commands rerun bit-identically from their manifests";
  return true;
}

}  // namespace

int main() {
  std::string d;

  d.clear();
  report(1, "accountant formulas", criterion1(d), d);

  d.clear();
  report(2, "conditional sampler vs brute force", criterion2(d), d);

  d.clear();
  report(3, "randomized-response frequencies", criterion3(d), d);

  d.clear();
  report(4, "estimator bias and variance", criterion4(d), d);

  d.clear();
  report(5, "Gaussian likelihood approximation", criterion5(d), d);

  d.clear();
  report(6, "synthetic model recovery", criterion6(d), d);

  const DeskCorpus desk = desk_corpus();

  d.clear();
  report(7, "perplexity trends across mechanisms", criterion7(desk, d), d);

  d.clear();
  report(8, "attack resistance", criterion8(desk, d), d);

  d.clear();
  report(9, "command-line determinism", criterion9(d), d);

  if (g_failures == 0)
    std::printf("all 9 criteria passed\n");
  else
    std::printf("%d of 9 criteria FAILED\n", g_failures);
  return g_failures;
}
