#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dplda/attack.hpp"
#include "dplda/corpus.hpp"
#include "dplda/eval.hpp"
#include "dplda/hdp.hpp"
#include "dplda/lplda.hpp"
#include "dplda/online.hpp"
#include "dplda/sampler.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dplda;

namespace {

constexpr const char* kVersion = "0.1.0";

// Configuration problems exit with 1, runtime failures with 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  try {
    return json::parse(in);
  } catch (const std::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// Binds CLI options to JSON config keys. Precedence: explicit flag > value
// from --config file > built-in default. The file may be a previous run's
// manifest; its "config" object is used then.
class ConfigBinder {
 public:
  explicit ConfigBinder(CLI::App* cmd) : cmd_(cmd) {
    cmd->add_option("--config", config_path_,
                    "JSON config file (a previous run's manifest works too)");
  }

  template <typename T>
  CLI::Option* add(const std::string& flag, const std::string& key, T& var,
                   const std::string& help) {
    CLI::Option* o = cmd_->add_option(flag, var, help);
    known_.insert(key);
    loaders_.push_back([o, key, &var](const json& j) {
      if (o->count() == 0 && j.contains(key)) {
        try {
          var = j.at(key).get<T>();
        } catch (const std::exception&) {
          throw ConfigError("config key '" + key + "' has the wrong type");
        }
      }
    });
    writers_.push_back([key, &var](json& j) { j[key] = var; });
    return o;
  }

  CLI::Option* add_flag(const std::string& flag, const std::string& key, bool& var,
                        const std::string& help) {
    CLI::Option* o = cmd_->add_flag(flag, var, help);
    known_.insert(key);
    loaders_.push_back([o, key, &var](const json& j) {
      if (o->count() == 0 && j.contains(key)) var = j.at(key).get<bool>();
    });
    writers_.push_back([key, &var](json& j) { j[key] = var; });
    return o;
  }

  // call once after CLI11 parsing; returns the fully resolved config
  json resolve() {
    if (!config_path_.empty()) {
      json file = read_json_file(config_path_);
      if (file.is_object() && file.contains("command") && file.contains("config"))
        file = file.at("config");
      if (!file.is_object()) throw ConfigError(config_path_ + ": config must be an object");
      for (const auto& [k, v] : file.items())
        if (!known_.count(k))
          throw ConfigError(config_path_ + ": unknown config key '" + k + "'");
      for (const auto& fn : loaders_) fn(file);
    }
    json resolved = json::object();
    for (const auto& fn : writers_) fn(resolved);
    return resolved;
  }

 private:
  CLI::App* cmd_;
  std::string config_path_;
  std::set<std::string> known_;
  std::vector<std::function<void(const json&)>> loaders_;
  std::vector<std::function<void(json&)>> writers_;
};

void write_manifest(const fs::path& out_dir, const std::string& command,
                    const json& config, double wall_ms, const json& outputs) {
  json m;
  m["command"] = command;
  m["config"] = config;
  m["version"] = kVersion;
  m["wall_time_ms"] = wall_ms;
  m["outputs"] = outputs;
  std::ofstream out(out_dir / "manifest.json");
  if (!out) throw std::runtime_error((out_dir / "manifest.json").string() + ": cannot write");
  out << m.dump(2) << '\n';
}

fs::path ensure_out_dir(const std::string& out) {
  if (out.empty()) throw ConfigError("--out is required");
  fs::path p(out);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw std::runtime_error(out + ": cannot create directory: " + ec.message());
  return p;
}

// Shared corpus selection: either a directory produced by `ingest` or a raw
// UCI docword/vocab pair.
struct CorpusOpts {
  std::string corpus_dir;
  std::string docword;
  std::string vocab;
  int top_v = 1000;
  std::string use = "train";

  void bind(ConfigBinder& cfg, const std::string& default_use) {
    use = default_use;
    cfg.add("--corpus", "corpus", corpus_dir, "directory written by `dplda ingest`");
    cfg.add("--docword", "docword", docword, "UCI bag-of-words file");
    cfg.add("--vocab", "vocab", vocab, "vocabulary file, one term per line");
    cfg.add("--top-v", "top_v", top_v, "keep the top_v most frequent terms");
    cfg.add("--use", "use", use, "which shard of an ingested corpus: train|test|all");
  }

  Corpus load() const {
    if (!corpus_dir.empty()) {
      const fs::path dir(corpus_dir);
      const std::string vpath = (dir / "vocab.txt").string();
      auto shard = [&](const char* name) {
        return load_uci((dir / name).string(), vpath, std::numeric_limits<int>::max());
      };
      if (use == "train") return shard("train.docword.txt");
      if (use == "test") return shard("test.docword.txt");
      if (use == "all") {
        Corpus train = shard("train.docword.txt");
        Corpus test = shard("test.docword.txt");
        for (auto& d : test.docs) train.docs.push_back(std::move(d));
        return train;
      }
      throw ConfigError("--use must be train, test or all");
    }
    if (docword.empty() || vocab.empty())
      throw ConfigError("need either --corpus or both --docword and --vocab");
    return load_uci(docword, vocab, top_v);
  }
};

void save_model_pair(const Matrix& phi, const fs::path& dir) {
  save_model_csv(phi, (dir / "model.csv").string());
  save_model_bin(phi, (dir / "model.bin").string());
}

void save_report(const PrivacyReport& report, const fs::path& dir) {
  std::ofstream out(dir / "privacy.json");
  if (!out) throw std::runtime_error((dir / "privacy.json").string() + ": cannot write");
  out << report.to_json();
}

double fmt_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
      .count();
}

int cmd_synth(CLI::App& app) {
  auto* cmd = app.add_subcommand("synth", "generate a synthetic corpus from the LDA model");
  auto cfg = std::make_shared<ConfigBinder>(cmd);
  auto spec = std::make_shared<SynthSpec>();
  auto seed = std::make_shared<uint64_t>(1);
  auto out = std::make_shared<std::string>();
  cfg->add("--topics", "topics", spec->topics, "generating topic count");
  cfg->add("--vocab-size", "vocab_size", spec->vocab_size, "vocabulary size");
  cfg->add("--docs", "docs", spec->docs, "number of documents");
  cfg->add("--doc-len", "doc_len", spec->doc_len, "tokens per document");
  cfg->add("--alpha", "alpha", spec->alpha, "document-topic concentration");
  cfg->add("--beta", "beta", spec->beta, "topic-word concentration");
  cfg->add("--seed", "seed", *seed, "run seed");
  cmd->add_option("--out", *out, "output directory")->required();

  cmd->callback([=]() {
    const auto t0 = std::chrono::steady_clock::now();
    const json config = cfg->resolve();
    const fs::path dir = ensure_out_dir(*out);
    SynthResult r = synth_corpus(*spec, RngStream(*seed));
    save_uci(r.corpus, (dir / "docword.txt").string(), (dir / "vocab.txt").string());
    save_model_csv(r.phi, (dir / "true_phi.csv").string());
    json outputs = {{"docword", "docword.txt"},
                    {"vocab", "vocab.txt"},
                    {"true_phi", "true_phi.csv"}};
    write_manifest(dir, "synth", config, fmt_ms(t0), outputs);
  });
  return 0;
}

int cmd_ingest(CLI::App& app) {
  auto* cmd = app.add_subcommand("ingest", "load, truncate and split a UCI corpus");
  auto cfg = std::make_shared<ConfigBinder>(cmd);
  auto docword = std::make_shared<std::string>();
  auto vocab = std::make_shared<std::string>();
  auto top_v = std::make_shared<int>(1000);
  auto n_train = std::make_shared<int>(3000);
  auto seed = std::make_shared<uint64_t>(1);
  auto out = std::make_shared<std::string>();
  cfg->add("--docword", "docword", *docword, "UCI bag-of-words file");
  cfg->add("--vocab", "vocab", *vocab, "vocabulary file");
  cfg->add("--top-v", "top_v", *top_v, "keep the top_v most frequent terms");
  cfg->add("--n-train", "n_train", *n_train, "documents in the training split");
  cfg->add("--seed", "seed", *seed, "split shuffle seed");
  cmd->add_option("--out", *out, "output directory")->required();

  cmd->callback([=]() {
    const auto t0 = std::chrono::steady_clock::now();
    const json config = cfg->resolve();
    if (docword->empty() || vocab->empty()) throw ConfigError("--docword and --vocab are required");
    const fs::path dir = ensure_out_dir(*out);
    Corpus corpus = load_uci(*docword, *vocab, *top_v);
    auto [train, test] = split_corpus(corpus, *n_train, RngStream(*seed).derive("split"));
    save_uci(train, (dir / "train.docword.txt").string(), (dir / "vocab.txt").string());
    // the vocab file is shared; writing it twice keeps save_uci simple
    save_uci(test, (dir / "test.docword.txt").string(), (dir / "vocab.txt").string());
    json stats = {{"docs", corpus.num_docs()},
                  {"train_docs", train.num_docs()},
                  {"test_docs", test.num_docs()},
                  {"vocab", corpus.vocab_size()},
                  {"total_tokens", corpus.total_tokens()},
                  {"train_tokens", train.total_tokens()},
                  {"test_tokens", test.total_tokens()}};
    {
      std::ofstream sout(dir / "stats.json");
      sout << stats.dump(2) << '\n';
    }
    json outputs = {{"train", "train.docword.txt"},
                    {"test", "test.docword.txt"},
                    {"vocab", "vocab.txt"},
                    {"stats", "stats.json"}};
    write_manifest(dir, "ingest", config, fmt_ms(t0), outputs);
  });
  return 0;
}

int cmd_train(CLI::App& app) {
  auto* cmd = app.add_subcommand("train", "train a topic model");
  auto cfg = std::make_shared<ConfigBinder>(cmd);
  auto corpus_opts = std::make_shared<CorpusOpts>();
  corpus_opts->bind(*cfg, "train");
  auto variant = std::make_shared<std::string>("cgs");
  auto train_cfg = std::make_shared<TrainConfig>();
  auto eps_l = std::make_shared<double>(1.0);
  auto clip = std::make_shared<double>(10.0);
  auto accumulate = std::make_shared<bool>(false);
  auto eps = std::make_shared<double>(1.0);
  auto batch_path = std::make_shared<std::string>();
  auto seed = std::make_shared<uint64_t>(1);
  auto out = std::make_shared<std::string>();
  auto trace_mode = std::make_shared<std::string>("none");
  cfg->add("--variant", "variant", *variant, "cgs | hdp | cdp | cdp_plus | lp");
  cfg->add("--topics", "topics", train_cfg->topics, "number of topics");
  cfg->add("--alpha", "alpha", train_cfg->alpha, "document-topic smoothing");
  cfg->add("--beta", "beta", train_cfg->beta, "topic-word smoothing");
  cfg->add("--iters", "iters", train_cfg->iters, "Gibbs iterations");
  cfg->add("--eps-l", "eps_l", *eps_l, "hdp: per-iteration Laplace budget");
  cfg->add("--clip", "clip", *clip, "hdp: topic-word count cap");
  cfg->add_flag("--accumulate-noise", "accumulate_noise", *accumulate,
                "hdp: write noise into the ledger instead of fresh snapshots");
  cfg->add("--eps", "eps", *eps, "cdp / cdp_plus budget");
  cfg->add("--batch", "batch", *batch_path, "lp: perturbed batch file");
  cfg->add("--trace", "trace", *trace_mode,
           "write trace.jsonl: none | digest | full");
  cfg->add("--seed", "seed", *seed, "run seed");
  cmd->add_option("--out", *out, "output directory")->required();

  cmd->callback([=]() {
    const auto t0 = std::chrono::steady_clock::now();
    const json config = cfg->resolve();
    const fs::path dir = ensure_out_dir(*out);

    std::ofstream trace_out;
    std::unique_ptr<TraceWriter> tracer;
    if (*trace_mode != "none") {
      if (*trace_mode != "digest" && *trace_mode != "full")
        throw ConfigError("--trace must be none, digest or full");
      trace_out.open(dir / "trace.jsonl");
      tracer = std::make_unique<TraceWriter>(trace_out, *trace_mode == "full");
    }

    TrainResult r;
    if (*variant == "lp") {
      if (batch_path->empty()) throw ConfigError("lp variant needs --batch");
      if (corpus_opts->vocab.empty() && corpus_opts->corpus_dir.empty())
        throw ConfigError("lp variant needs --vocab or --corpus for the vocabulary");
      std::string vpath = corpus_opts->vocab;
      if (vpath.empty()) vpath = (fs::path(corpus_opts->corpus_dir) / "vocab.txt").string();
      Vocabulary vocab = load_vocab(vpath);
      PerturbedBatch batch = load_batch(*batch_path, vocab.size());
      r = train_lp(batch, vocab, *train_cfg, *seed);
    } else {
      Corpus corpus = corpus_opts->load();
      if (*variant == "cgs") {
        r = train_cgs(corpus, *train_cfg, *seed, tracer.get());
      } else if (*variant == "hdp") {
        HdpConfig hc{*train_cfg, *eps_l, *clip, *accumulate};
        r = train_hdp(corpus, hc, *seed, tracer.get());
      } else if (*variant == "cdp") {
        CdpConfig cc{*train_cfg, *eps};
        r = train_cdp(corpus, cc, *seed, tracer.get());
      } else if (*variant == "cdp_plus") {
        CdpConfig cc{*train_cfg, *eps};
        r = train_cdp_plus(corpus, cc, *seed, tracer.get());
      } else {
        throw ConfigError("unknown variant '" + *variant + "'");
      }
    }

    save_model_pair(r.model.phi, dir);
    save_report(r.report, dir);
    json outputs = {{"model_csv", "model.csv"},
                    {"model_bin", "model.bin"},
                    {"privacy", "privacy.json"},
                    {"degeneracy_events", r.degeneracy_events}};
    if (tracer) outputs["trace"] = "trace.jsonl";
    write_manifest(dir, "train", config, fmt_ms(t0), outputs);
  });
  return 0;
}

int cmd_perturb(CLI::App& app) {
  auto* cmd = app.add_subcommand("perturb", "randomized-response encode documents");
  auto cfg = std::make_shared<ConfigBinder>(cmd);
  auto corpus_opts = std::make_shared<CorpusOpts>();
  corpus_opts->bind(*cfg, "train");
  auto f = std::make_shared<double>(-1.0);
  auto eps_word = std::make_shared<double>(-1.0);
  auto batch_size = std::make_shared<int>(0);
  auto seed = std::make_shared<uint64_t>(1);
  auto out = std::make_shared<std::string>();
  cfg->add("--f", "f", *f, "flip probability in (0,1)");
  cfg->add("--eps-word", "eps_word", *eps_word, "per-word budget; sets f = 2/(e^eps+1)");
  cfg->add("--batch-size", "batch_size", *batch_size,
           "if > 0, write numbered files of this many documents");
  cfg->add("--seed", "seed", *seed, "run seed");
  cmd->add_option("--out", *out, "output directory")->required();

  cmd->callback([=]() {
    const auto t0 = std::chrono::steady_clock::now();
    const json config = cfg->resolve();
    if (*f > 0.0 && *eps_word > 0.0) throw ConfigError("give either --f or --eps-word, not both");
    double flip = *f;
    if (flip <= 0.0) {
      if (*eps_word <= 0.0) throw ConfigError("need --f or --eps-word");
      flip = rr_f_for_eps(*eps_word);
    }
    const fs::path dir = ensure_out_dir(*out);
    Corpus corpus = corpus_opts->load();
    const std::vector<BinaryDoc> bins = to_binary(corpus);
    json outputs = json::object();
    RngStream root(*seed);
    if (*batch_size > 0) {
      const int n = static_cast<int>(bins.size());
      int l = 0;
      json names = json::array();
      for (int start = 0; start < n; start += *batch_size, ++l) {
        const int stop = std::min(n, start + *batch_size);
        std::vector<BinaryDoc> part(bins.begin() + start, bins.begin() + stop);
        PerturbedBatch batch =
            perturb_docs(part, flip, root.derive("perturb").derive(static_cast<uint64_t>(l)));
        char name[32];
        std::snprintf(name, sizeof name, "batch_%03d.jsonl", l);
        save_batch(batch, (dir / name).string());
        names.push_back(name);
      }
      outputs["batches"] = names;
    } else {
      PerturbedBatch batch = perturb_docs(bins, flip, root.derive("perturb"));
      save_batch(batch, (dir / "batch.jsonl").string());
      outputs["batch"] = "batch.jsonl";
    }
    outputs["f"] = flip;
    outputs["eps_word"] = rr_eps_word(flip);
    write_manifest(dir, "perturb", config, fmt_ms(t0), outputs);
  });
  return 0;
}

int cmd_reconstruct(CLI::App& app) {
  auto* cmd = app.add_subcommand("reconstruct",
                                 "rebuild a trainable corpus from a perturbed batch");
  auto cfg = std::make_shared<ConfigBinder>(cmd);
  auto batch_path = std::make_shared<std::string>();
  auto vocab_path = std::make_shared<std::string>();
  auto seed = std::make_shared<uint64_t>(1);
  auto out = std::make_shared<std::string>();
  cfg->add("--batch", "batch", *batch_path, "perturbed batch file");
  cfg->add("--vocab", "vocab", *vocab_path, "vocabulary file");
  cfg->add("--seed", "seed", *seed, "run seed");
  cmd->add_option("--out", *out, "output directory")->required();

  cmd->callback([=]() {
    const auto t0 = std::chrono::steady_clock::now();
    const json config = cfg->resolve();
    if (batch_path->empty() || vocab_path->empty())
      throw ConfigError("--batch and --vocab are required");
    const fs::path dir = ensure_out_dir(*out);
    Vocabulary vocab = load_vocab(*vocab_path);
    PerturbedBatch batch = load_batch(*batch_path, vocab.size());
    Corpus recon = reconstruct(batch, vocab, RngStream(*seed).derive("reconstruct"));
    save_uci(recon, (dir / "docword.txt").string(), (dir / "vocab.txt").string());
    json outputs = {{"docword", "docword.txt"}, {"vocab", "vocab.txt"}};
    write_manifest(dir, "reconstruct", config, fmt_ms(t0), outputs);
  });
  return 0;
}

int cmd_online(CLI::App& app) {
  auto* cmd = app.add_subcommand("online", "train over a stream of perturbed batches");
  auto cfg = std::make_shared<ConfigBinder>(cmd);
  auto prior_docword = std::make_shared<std::string>();
  auto prior_vocab = std::make_shared<std::string>();
  auto batches_path = std::make_shared<std::string>();
  auto test_docword = std::make_shared<std::string>();
  auto test_vocab = std::make_shared<std::string>();
  auto ocfg = std::make_shared<OnlineConfig>();
  auto seed = std::make_shared<uint64_t>(1);
  auto out = std::make_shared<std::string>();
  cfg->add("--prior-docword", "prior_docword", *prior_docword,
           "clean prior corpus (optional)");
  cfg->add("--prior-vocab", "prior_vocab", *prior_vocab, "vocabulary file");
  cfg->add("--batches", "batches", *batches_path,
           "directory of batch_*.jsonl files or one concatenated stream");
  cfg->add("--test-docword", "test_docword", *test_docword,
           "held-out corpus for per-batch perplexity (optional)");
  cfg->add("--test-vocab", "test_vocab", *test_vocab, "held-out vocabulary file");
  cfg->add("--topics", "topics", ocfg->train.topics, "number of topics");
  cfg->add("--alpha", "alpha", ocfg->train.alpha, "document-topic smoothing");
  cfg->add("--beta", "beta", ocfg->train.beta, "initial topic-word smoothing");
  cfg->add("--iters", "iters", ocfg->train.iters, "Gibbs iterations per phase");
  cfg->add("--lambda", "lambda", ocfg->lambda, "prior carry-over weight");
  cfg->add("--omega", "omega", ocfg->omega, "denoising weight on the prior mean");
  cfg->add("--sigma2", "sigma2", ocfg->sigma2,
           "if > 0, derive omega from this prior variance instead");
  cfg->add("--fold-in-sweeps", "fold_in_sweeps", ocfg->fold_in_sweeps,
           "sweeps when folding in held-out documents");
  cfg->add("--seed", "seed", *seed, "run seed");
  cmd->add_option("--out", *out, "output directory")->required();

  cmd->callback([=]() {
    const auto t0 = std::chrono::steady_clock::now();
    const json config = cfg->resolve();
    if (batches_path->empty()) throw ConfigError("--batches is required");
    if (prior_vocab->empty()) throw ConfigError("--prior-vocab is required");
    const fs::path dir = ensure_out_dir(*out);

    Vocabulary vocab = load_vocab(*prior_vocab);
    Corpus prior;
    bool have_prior = false;
    if (!prior_docword->empty()) {
      prior = load_uci(*prior_docword, *prior_vocab, std::numeric_limits<int>::max());
      have_prior = true;
    }
    Corpus test;
    bool have_test = false;
    if (!test_docword->empty()) {
      const std::string tv = test_vocab->empty() ? *prior_vocab : *test_vocab;
      test = load_uci(*test_docword, tv, std::numeric_limits<int>::max());
      have_test = true;
    }
    std::vector<PerturbedBatch> batches = load_batches(*batches_path, vocab.size());

    OnlineResult r = run_olp(have_prior ? &prior : nullptr, batches, vocab, *ocfg,
                             have_test ? &test : nullptr, *seed);

    json models = json::array();
    for (size_t l = 0; l < r.models.size(); ++l) {
      char name[32];
      std::snprintf(name, sizeof name, "model_%03zu.csv", l + 1);
      save_model_csv(r.models[l].phi, (dir / name).string());
      models.push_back(name);
    }
    save_model_pair(r.models.back().phi, dir);
    save_report(r.report, dir);
    {
      std::ofstream mout(dir / "metrics.csv");
      mout << "l,batch_size,perplexity,epsilon_word,elapsed_ms\n";
      char buf[40];
      for (const auto& bm : r.metrics) {
        mout << bm.batch << ',' << bm.batch_size << ',';
        std::snprintf(buf, sizeof buf, "%.17g", bm.perplexity);
        mout << buf << ',';
        std::snprintf(buf, sizeof buf, "%.17g", bm.eps_word);
        mout << buf << ',';
        std::snprintf(buf, sizeof buf, "%.3f", bm.elapsed_ms);
        mout << buf << '\n';
      }
    }
    json outputs = {{"models", models},
                    {"model_csv", "model.csv"},
                    {"model_bin", "model.bin"},
                    {"metrics", "metrics.csv"},
                    {"privacy", "privacy.json"}};
    write_manifest(dir, "online", config, fmt_ms(t0), outputs);
  });
  return 0;
}

int cmd_attack(CLI::App& app) {
  auto* cmd = app.add_subcommand("attack", "run the word-inference attack on a trainer");
  auto cfg = std::make_shared<ConfigBinder>(cmd);
  auto corpus_opts = std::make_shared<CorpusOpts>();
  corpus_opts->bind(*cfg, "train");
  auto acfg = std::make_shared<AttackConfig>();
  auto trainer = std::make_shared<std::string>("cgs");
  auto seed = std::make_shared<uint64_t>(1);
  auto out = std::make_shared<std::string>();
  cfg->add("--trainer", "trainer", *trainer, "cgs | hdp | cdp_plus");
  cfg->add("--topics", "topics", acfg->train.topics, "number of topics");
  cfg->add("--alpha", "alpha", acfg->train.alpha, "document-topic smoothing");
  cfg->add("--beta", "beta", acfg->train.beta, "topic-word smoothing");
  cfg->add("--iters", "iters", acfg->train.iters, "Gibbs iterations");
  cfg->add("--eps-l", "eps_l", acfg->eps_l, "hdp: per-iteration Laplace budget");
  cfg->add("--clip", "clip", acfg->clip, "hdp: topic-word count cap");
  cfg->add("--eps", "eps", acfg->eps, "cdp_plus: per-iteration budget");
  cfg->add("--target-doc", "target_doc", acfg->target_doc,
           "document index (-1: last document)");
  cfg->add("--target-pos", "target_pos", acfg->target_pos,
           "token position (-1: last token)");
  cfg->add("--seed", "seed", *seed, "run seed");
  cmd->add_option("--out", *out, "output directory")->required();

  cmd->callback([=]() {
    const auto t0 = std::chrono::steady_clock::now();
    const json config = cfg->resolve();
    if (*trainer == "cgs")
      acfg->trainer = AttackTrainer::cgs;
    else if (*trainer == "hdp")
      acfg->trainer = AttackTrainer::hdp;
    else if (*trainer == "cdp_plus")
      acfg->trainer = AttackTrainer::cdp_plus;
    else
      throw ConfigError("unknown trainer '" + *trainer + "'");
    const fs::path dir = ensure_out_dir(*out);
    Corpus corpus = corpus_opts->load();
    AttackResult r = run_attack(corpus, *acfg, *seed);
    write_attack_csv(r, (dir / "curve.csv").string());
    save_report(r.report, dir);
    json outputs = {{"curve", "curve.csv"},
                    {"privacy", "privacy.json"},
                    {"target_doc", r.trace.target_doc},
                    {"target_pos", r.trace.target_pos},
                    {"true_word", r.trace.true_word},
                    {"final_accuracy", r.accuracy.empty() ? 0.0 : r.accuracy.back()}};
    write_manifest(dir, "attack", config, fmt_ms(t0), outputs);
  });
  return 0;
}

int cmd_eval(CLI::App& app) {
  auto* cmd = app.add_subcommand("eval", "held-out perplexity of a saved model");
  auto cfg = std::make_shared<ConfigBinder>(cmd);
  auto corpus_opts = std::make_shared<CorpusOpts>();
  corpus_opts->bind(*cfg, "test");
  auto model_path = std::make_shared<std::string>();
  auto alpha = std::make_shared<double>(1.0);
  auto sweeps = std::make_shared<int>(20);
  auto seed = std::make_shared<uint64_t>(1);
  auto out = std::make_shared<std::string>();
  cfg->add("--model", "model", *model_path, "model file (.csv or .bin)");
  cfg->add("--alpha", "alpha", *alpha, "fold-in smoothing");
  cfg->add("--fold-in-sweeps", "fold_in_sweeps", *sweeps, "fold-in Gibbs sweeps");
  cfg->add("--seed", "seed", *seed, "run seed");
  cmd->add_option("--out", *out, "output directory (optional)");

  cmd->callback([=]() {
    const auto t0 = std::chrono::steady_clock::now();
    const json config = cfg->resolve();
    if (model_path->empty()) throw ConfigError("--model is required");
    TopicModel model;
    model.phi = model_path->size() > 4 &&
                        model_path->compare(model_path->size() - 4, 4, ".bin") == 0
                    ? load_model_bin(*model_path)
                    : load_model_csv(*model_path);
    model.alpha = *alpha;
    Corpus test = corpus_opts->load();
    const double per = perplexity(model, test, *sweeps, RngStream(*seed).derive("eval"));
    std::printf("perplexity %.6f\n", per);
    if (!out->empty()) {
      const fs::path dir = ensure_out_dir(*out);
      {
        std::ofstream eout(dir / "eval.json");
        json e = {{"perplexity", per},
                  {"docs", test.num_docs()},
                  {"tokens", test.total_tokens()}};
        eout << e.dump(2) << '\n';
      }
      write_manifest(dir, "eval", config, fmt_ms(t0), json{{"eval", "eval.json"}});
    }
  });
  return 0;
}

int cmd_sweep(CLI::App& app) {
  auto* cmd = app.add_subcommand("sweep", "run a declarative experiment grid");
  auto plan_path = std::make_shared<std::string>();
  auto workers = std::make_shared<int>(0);
  auto out = std::make_shared<std::string>();
  cmd->add_option("--plan", *plan_path, "experiment plan (JSON)")->required();
  cmd->add_option("--workers", *workers,
                  "parallel cells (default: DPLDA_WORKERS or all cores)");
  cmd->add_option("--out", *out, "output directory")->required();

  cmd->callback([=]() {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path dir = ensure_out_dir(*out);
    int w = *workers;
    if (w <= 0) {
      if (const char* env = std::getenv("DPLDA_WORKERS"))
        w = std::atoi(env);
      if (w <= 0) w = static_cast<int>(std::thread::hardware_concurrency());
      if (w <= 0) w = 1;
    }
    SweepPlan plan = load_plan(*plan_path);
    SweepResult result;
    try {
      result = run_sweep(plan, w);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    write_sweep_csv(result, (dir / "results.csv").string());
    write_sweep_json(result, plan, (dir / "results.json").string());
    int failed = 0;
    for (const auto& cell : result.cells) failed += cell.failed ? 1 : 0;
    json config = {{"plan", *plan_path}, {"workers", w}};
    json outputs = {{"results_csv", "results.csv"},
                    {"results_json", "results.json"},
                    {"cells", result.cells.size()},
                    {"failed_cells", failed}};
    write_manifest(dir, "sweep", config, fmt_ms(t0), outputs);
    if (failed > 0)
      std::fprintf(stderr, "warning: %d of %zu cells failed (see results.json)\n", failed,
                   result.cells.size());
  });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"collapsed Gibbs LDA training under differential privacy"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  cmd_synth(app);
  cmd_ingest(app);
  cmd_train(app);
  cmd_perturb(app);
  cmd_reconstruct(app);
  cmd_online(app);
  cmd_attack(app);
  cmd_eval(app);
  cmd_sweep(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
