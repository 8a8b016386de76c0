#include "dplda/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "dplda/hdp.hpp"
#include "dplda/lplda.hpp"
#include "dplda/online.hpp"

namespace dplda {

double perplexity(const TopicModel& model, const Corpus& test, int fold_in_sweeps,
                  RngStream rng) {
  if (model.K() < 1) throw std::invalid_argument("perplexity: empty model");
  if (test.vocab_size() != model.V())
    throw std::invalid_argument("perplexity: vocabulary size mismatch");
  if (test.total_tokens() == 0)
    throw std::invalid_argument("perplexity: test corpus has no tokens");

  double ll = 0.0;
  int64_t n = 0;
  const int K = model.K();
  for (size_t m = 0; m < test.docs.size(); ++m) {
    const auto& tokens = test.docs[m].tokens;
    const std::vector<double> theta = fold_in_theta(
        model.phi, tokens, model.alpha, fold_in_sweeps, rng.derive(static_cast<uint64_t>(m)));
    for (int32_t t : tokens) {
      double p = 0.0;
      for (int k = 0; k < K; ++k) p += theta[static_cast<size_t>(k)] * model.phi(k, t);
      if (!(p > 0.0))
        throw std::domain_error("perplexity: token likelihood is not positive");
      ll += std::log(p);
      ++n;
    }
  }
  return std::exp(-ll / static_cast<double>(n));
}

SweepPlan load_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  SweepPlan plan;
  plan.json_text.assign(std::istreambuf_iterator<char>(in),
                        std::istreambuf_iterator<char>());
  return plan;
}

namespace {

using nlohmann::json;

TrainConfig train_config_from(const json& trainer) {
  TrainConfig cfg;
  cfg.topics = trainer.value("topics", 50);
  cfg.alpha = trainer.value("alpha", 1.0);
  cfg.beta = trainer.value("beta", 0.01);
  cfg.iters = trainer.value("iters", 100);
  return cfg;
}

double flip_prob_from(const json& trainer) {
  if (trainer.contains("f")) return trainer.at("f").get<double>();
  if (trainer.contains("eps_word"))
    return rr_f_for_eps(trainer.at("eps_word").get<double>());
  throw std::invalid_argument("sweep: trainer needs 'f' or 'eps_word'");
}

struct PlanData {
  Corpus train;
  Corpus test;
  bool have_test = false;
};

PlanData build_dataset(const json& plan) {
  if (!plan.contains("dataset")) throw std::invalid_argument("sweep: missing 'dataset'");
  const json& ds = plan.at("dataset");
  Corpus full;
  if (ds.contains("synthetic")) {
    const json& sy = ds.at("synthetic");
    SynthSpec spec;
    spec.topics = sy.value("topics", spec.topics);
    spec.vocab_size = sy.value("vocab_size", spec.vocab_size);
    spec.docs = sy.value("docs", spec.docs);
    spec.doc_len = sy.value("doc_len", spec.doc_len);
    spec.alpha = sy.value("alpha", spec.alpha);
    spec.beta = sy.value("beta", spec.beta);
    full = synth_corpus(spec, RngStream(sy.value("seed", 1))).corpus;
  } else {
    full = load_uci(ds.at("docword").get<std::string>(), ds.at("vocab").get<std::string>(),
                    ds.value("top_v", 1000));
  }
  PlanData data;
  if (ds.contains("n_train")) {
    const int n_train = ds.at("n_train").get<int>();
    RngStream split_rng(ds.value("split_seed", 1));
    auto [train, test] = split_corpus(full, n_train, split_rng);
    data.train = std::move(train);
    data.test = std::move(test);
    data.have_test = true;
  } else {
    data.train = std::move(full);
  }
  return data;
}

struct CellRun {
  double perplexity = 0.0;
  double total_epsilon = 0.0;
};

CellRun run_cell(const PlanData& data, const json& trainer, uint64_t seed,
                 int fold_in_sweeps) {
  const std::string variant = trainer.value("variant", "cgs");
  const TrainConfig cfg = train_config_from(trainer);
  CellRun out;

  TopicModel model;
  PrivacyReport report;
  bool scored = false;

  if (variant == "cgs") {
    TrainResult r = train_cgs(data.train, cfg, seed);
    model = std::move(r.model);
    report = std::move(r.report);
  } else if (variant == "hdp") {
    HdpConfig hc;
    hc.train = cfg;
    hc.eps_l = trainer.value("eps_l", 1.0);
    hc.clip = trainer.value("clip", 10.0);
    hc.accumulate_noise = trainer.value("accumulate_noise", false);
    TrainResult r = train_hdp(data.train, hc, seed);
    model = std::move(r.model);
    report = std::move(r.report);
  } else if (variant == "cdp" || variant == "cdp_plus") {
    CdpConfig cc;
    cc.train = cfg;
    cc.eps = trainer.value("eps", 1.0);
    TrainResult r = variant == "cdp" ? train_cdp(data.train, cc, seed)
                                     : train_cdp_plus(data.train, cc, seed);
    model = std::move(r.model);
    report = std::move(r.report);
  } else if (variant == "lp") {
    const double f = flip_prob_from(trainer);
    const PerturbedBatch batch =
        perturb_docs(to_binary(data.train), f, RngStream(seed).derive("perturb"));
    TrainResult r = train_lp(batch, data.train.vocab, cfg, seed);
    model = std::move(r.model);
    report = std::move(r.report);
  } else if (variant == "olp") {
    const double f = flip_prob_from(trainer);
    const int prior_size = trainer.value("prior_size", 0);
    const int batch_size = trainer.at("batch_size").get<int>();
    int n_batches = trainer.value("n_batches", 0);
    if (batch_size < 1) throw std::invalid_argument("sweep: batch_size must be >= 1");
    const int M = data.train.num_docs();
    if (prior_size < 0 || prior_size >= M)
      throw std::invalid_argument("sweep: prior_size out of range");
    const int avail = (M - prior_size) / batch_size;
    if (n_batches <= 0 || n_batches > avail) n_batches = avail;
    if (n_batches < 1) throw std::invalid_argument("sweep: not enough documents for a batch");

    Corpus prior;
    prior.vocab = data.train.vocab;
    prior.docs.assign(data.train.docs.begin(), data.train.docs.begin() + prior_size);

    RngStream perturb_rng = RngStream(seed).derive("perturb");
    std::vector<PerturbedBatch> batches;
    for (int l = 0; l < n_batches; ++l) {
      Corpus part;
      part.vocab = data.train.vocab;
      const auto begin = data.train.docs.begin() + prior_size + static_cast<long>(l) * batch_size;
      part.docs.assign(begin, begin + batch_size);
      batches.push_back(perturb_docs(to_binary(part), f,
                                     perturb_rng.derive(static_cast<uint64_t>(l))));
    }

    OnlineConfig ocfg;
    ocfg.train = cfg;
    ocfg.lambda = trainer.value("lambda", 0.5);
    ocfg.omega = trainer.value("omega", 0.4);
    ocfg.sigma2 = trainer.value("sigma2", -1.0);
    ocfg.fold_in_sweeps = fold_in_sweeps;
    OnlineResult r = run_olp(prior_size > 0 ? &prior : nullptr, batches,
                             data.train.vocab, ocfg,
                             data.have_test ? &data.test : nullptr, seed);
    report = std::move(r.report);
    model = std::move(r.models.back());
    if (data.have_test) {
      out.perplexity = r.metrics.back().perplexity;
      scored = true;
    }
  } else {
    throw std::invalid_argument("sweep: unknown variant '" + variant + "'");
  }

  if (!scored && data.have_test)
    out.perplexity =
        perplexity(model, data.test, fold_in_sweeps, RngStream(seed).derive("eval"));
  else if (!scored)
    out.perplexity = std::numeric_limits<double>::quiet_NaN();
  out.total_epsilon = report.total_epsilon;
  return out;
}

}  // namespace

SweepResult run_sweep(const SweepPlan& plan, int workers) {
  json root;
  try {
    root = json::parse(plan.json_text);
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("sweep: plan is not valid JSON: ") + e.what());
  }
  if (!root.contains("trainer")) throw std::invalid_argument("sweep: missing 'trainer'");
  const json trainer_base = root.at("trainer");

  std::string x_name = "none";
  std::vector<double> x_values{0.0};
  bool have_x = false;
  if (root.contains("x")) {
    const json& x = root.at("x");
    x_name = x.at("name").get<std::string>();
    x_values = x.at("values").get<std::vector<double>>();
    have_x = true;
  }
  std::vector<uint64_t> seeds = {1};
  if (root.contains("seeds")) seeds = root.at("seeds").get<std::vector<uint64_t>>();
  if (seeds.empty()) throw std::invalid_argument("sweep: 'seeds' must not be empty");
  const int fold_in_sweeps =
      root.contains("eval") ? root.at("eval").value("fold_in_sweeps", 20) : 20;

  SweepResult result;
  if (x_values.empty()) return result;

  const PlanData data = build_dataset(root);

  // flatten the grid
  for (double xv : x_values)
    for (uint64_t s : seeds) {
      SweepCell cell;
      cell.x_name = x_name;
      cell.x_value = xv;
      cell.seed = s;
      result.cells.push_back(std::move(cell));
    }

  if (workers < 1) workers = 1;
  workers = std::min<int>(workers, static_cast<int>(result.cells.size()));
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= result.cells.size()) return;
      SweepCell& cell = result.cells[i];
      const auto t0 = std::chrono::steady_clock::now();
      try {
        json trainer = trainer_base;
        if (have_x) trainer[cell.x_name] = cell.x_value;
        const CellRun run = run_cell(data, trainer, cell.seed, fold_in_sweeps);
        cell.perplexity = run.perplexity;
        cell.total_epsilon = run.total_epsilon;
      } catch (const std::exception& e) {
        cell.failed = true;
        cell.error = e.what();
      }
      cell.elapsed_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  // aggregate per x value, plan order
  for (size_t xi = 0; xi < x_values.size(); ++xi) {
    for (const char* metric : {"perplexity", "total_epsilon"}) {
      std::vector<double> vals;
      for (const SweepCell& cell : result.cells) {
        if (cell.failed || cell.x_value != x_values[xi] ||
            cell.x_name != x_name)
          continue;
        const double v =
            metric == std::string("perplexity") ? cell.perplexity : cell.total_epsilon;
        if (std::isfinite(v)) vals.push_back(v);
      }
      SweepRow row;
      row.x_name = x_name;
      row.x_value = x_values[xi];
      row.metric = metric;
      row.n_seeds = static_cast<int>(vals.size());
      if (!vals.empty()) {
        double s = 0.0;
        for (double v : vals) s += v;
        row.mean = s / static_cast<double>(vals.size());
        if (vals.size() > 1) {
          double q = 0.0;
          for (double v : vals) q += (v - row.mean) * (v - row.mean);
          row.stddev = std::sqrt(q / static_cast<double>(vals.size() - 1));
        }
      }
      result.rows.push_back(std::move(row));
    }
  }
  return result;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_sweep_csv(const SweepResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "x_name,x_value,metric,mean,std,n_seeds\n";
  for (const auto& row : result.rows)
    out << row.x_name << ',' << fmt(row.x_value) << ',' << row.metric << ','
        << fmt(row.mean) << ',' << fmt(row.stddev) << ',' << row.n_seeds << '\n';
  if (!out) throw std::runtime_error(path + ": write failed");
}

void write_sweep_json(const SweepResult& result, const SweepPlan& plan,
                      const std::string& path) {
  json j;
  j["plan"] = json::parse(plan.json_text);
  auto rows = json::array();
  for (const auto& row : result.rows)
    rows.push_back({{"x_name", row.x_name},
                    {"x_value", row.x_value},
                    {"metric", row.metric},
                    {"mean", row.mean},
                    {"std", row.stddev},
                    {"n_seeds", row.n_seeds}});
  j["rows"] = std::move(rows);
  auto cells = json::array();
  for (const auto& cell : result.cells) {
    json c = {{"x_name", cell.x_name}, {"x_value", cell.x_value},
              {"seed", cell.seed},     {"elapsed_ms", cell.elapsed_ms},
              {"failed", cell.failed}};
    if (cell.failed)
      c["error"] = cell.error;
    else {
      if (std::isfinite(cell.perplexity)) c["perplexity"] = cell.perplexity;
      c["total_epsilon"] = std::isfinite(cell.total_epsilon)
                               ? json(cell.total_epsilon)
                               : json("inf");
    }
    cells.push_back(std::move(c));
  }
  j["cells"] = std::move(cells);
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace dplda
