#include <cstring>
#include <optional>
#include <stdexcept>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dplda/attack.hpp"
#include "dplda/corpus.hpp"
#include "dplda/eval.hpp"
#include "dplda/hdp.hpp"
#include "dplda/lplda.hpp"
#include "dplda/online.hpp"
#include "dplda/privacy.hpp"
#include "dplda/sampler.hpp"

namespace py = pybind11;
using namespace dplda;

namespace {

py::array_t<double> mat_to_np(const Matrix& m) {
  py::array_t<double> a({static_cast<py::ssize_t>(m.rows()),
                         static_cast<py::ssize_t>(m.cols())});
  std::memcpy(a.mutable_data(), m.data(), sizeof(double) * m.size());
  return a;
}

Matrix np_to_mat(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D array");
  Matrix m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::memcpy(m.data(), a.data(), sizeof(double) * m.size());
  return m;
}

py::dict report_to_dict(const PrivacyReport& r) {
  py::dict d;
  d["mechanism"] = r.mechanism;
  py::dict params;
  for (const auto& [k, v] : r.params) params[py::str(k)] = v;
  d["params"] = params;
  d["per_iteration"] = r.per_iteration;
  d["total_epsilon"] = r.total_epsilon;
  return d;
}

py::dict train_to_dict(const TrainResult& r) {
  py::dict d;
  d["phi"] = mat_to_np(r.model.phi);
  d["alpha"] = r.model.alpha;
  d["beta"] = r.model.beta;
  d["iters"] = r.model.iters;
  d["report"] = report_to_dict(r.report);
  d["degeneracy_events"] = r.degeneracy_events;
  return d;
}

Vocabulary vocab_from(const std::vector<std::string>& terms) {
  Vocabulary v;
  v.terms = terms;
  return v;
}

TrainConfig config_from(int topics, double alpha, double beta, int iters) {
  TrainConfig cfg;
  cfg.topics = topics;
  cfg.alpha = alpha;
  cfg.beta = beta;
  cfg.iters = iters;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_dplda, m) {
  m.doc() = "collapsed Gibbs LDA training under differential privacy";

  py::class_<Corpus>(m, "Corpus")
      .def(py::init<>())
      .def_property_readonly("terms",
                             [](const Corpus& c) { return c.vocab.terms; })
      .def_property_readonly("num_docs", &Corpus::num_docs)
      .def_property_readonly("vocab_size", &Corpus::vocab_size)
      .def_property_readonly("total_tokens", &Corpus::total_tokens)
      .def("tokens",
           [](const Corpus& c, int m_) {
             if (m_ < 0 || m_ >= c.num_docs())
               throw std::out_of_range("document index out of range");
             return c.docs[static_cast<size_t>(m_)].tokens;
           },
           py::arg("doc"))
      .def("doc_id",
           [](const Corpus& c, int m_) {
             if (m_ < 0 || m_ >= c.num_docs())
               throw std::out_of_range("document index out of range");
             return c.docs[static_cast<size_t>(m_)].doc_id;
           },
           py::arg("doc"))
      .def("__repr__", [](const Corpus& c) {
        return "<Corpus docs=" + std::to_string(c.num_docs()) +
               " vocab=" + std::to_string(c.vocab_size()) +
               " tokens=" + std::to_string(c.total_tokens()) + ">";
      });

  m.def(
      "make_corpus",
      [](const std::vector<std::string>& terms,
         const std::vector<std::vector<int32_t>>& docs,
         std::optional<std::vector<int>> doc_ids) {
        Corpus c;
        c.vocab = vocab_from(terms);
        const int V = c.vocab.size();
        if (doc_ids && doc_ids->size() != docs.size())
          throw std::invalid_argument("doc_ids length must match docs");
        for (size_t i = 0; i < docs.size(); ++i) {
          Document d;
          d.doc_id = doc_ids ? (*doc_ids)[i] : static_cast<int>(i) + 1;
          for (int32_t t : docs[i])
            if (t < 0 || t >= V)
              throw std::invalid_argument("token id out of vocabulary range");
          d.tokens = docs[i];
          c.docs.push_back(std::move(d));
        }
        return c;
      },
      py::arg("terms"), py::arg("docs"), py::arg("doc_ids") = py::none(),
      "Build a corpus from a term list and per-document token-id lists.");

  m.def("load_uci", &load_uci, py::arg("docword"), py::arg("vocab"),
        py::arg("top_v") = 1000);
  m.def("save_uci", &save_uci, py::arg("corpus"), py::arg("docword"), py::arg("vocab"));
  m.def(
      "split_corpus",
      [](const Corpus& c, int n_train, uint64_t seed) {
        auto [train, test] = split_corpus(c, n_train, RngStream(seed).derive("split"));
        return py::make_tuple(std::move(train), std::move(test));
      },
      py::arg("corpus"), py::arg("n_train"), py::arg("seed") = 1);
  m.def(
      "synth_corpus",
      [](int topics, int vocab_size, int docs, int doc_len, double alpha, double beta,
         uint64_t seed) {
        SynthSpec spec;
        spec.topics = topics;
        spec.vocab_size = vocab_size;
        spec.docs = docs;
        spec.doc_len = doc_len;
        spec.alpha = alpha;
        spec.beta = beta;
        SynthResult r = synth_corpus(spec, RngStream(seed));
        py::dict d;
        d["corpus"] = std::move(r.corpus);
        d["phi"] = mat_to_np(r.phi);
        d["theta"] = mat_to_np(r.theta);
        return d;
      },
      py::arg("topics") = 2, py::arg("vocab_size") = 20, py::arg("docs") = 200,
      py::arg("doc_len") = 50, py::arg("alpha") = 0.5, py::arg("beta") = 0.1,
      py::arg("seed") = 1);

  m.def(
      "train_cgs",
      [](const Corpus& corpus, int topics, double alpha, double beta, int iters,
         uint64_t seed) {
        return train_to_dict(train_cgs(corpus, config_from(topics, alpha, beta, iters), seed));
      },
      py::arg("corpus"), py::arg("topics") = 50, py::arg("alpha") = 1.0,
      py::arg("beta") = 0.01, py::arg("iters") = 100, py::arg("seed") = 1);
  m.def(
      "train_hdp",
      [](const Corpus& corpus, int topics, double alpha, double beta, int iters,
         double eps_l, double clip, bool accumulate_noise, uint64_t seed) {
        HdpConfig hc;
        hc.train = config_from(topics, alpha, beta, iters);
        hc.eps_l = eps_l;
        hc.clip = clip;
        hc.accumulate_noise = accumulate_noise;
        return train_to_dict(train_hdp(corpus, hc, seed));
      },
      py::arg("corpus"), py::arg("topics") = 50, py::arg("alpha") = 1.0,
      py::arg("beta") = 0.01, py::arg("iters") = 100, py::arg("eps_l") = 1.0,
      py::arg("clip") = 10.0, py::arg("accumulate_noise") = false, py::arg("seed") = 1);
  m.def(
      "train_cdp",
      [](const Corpus& corpus, int topics, double alpha, double beta, int iters,
         double eps, uint64_t seed) {
        CdpConfig cc;
        cc.train = config_from(topics, alpha, beta, iters);
        cc.eps = eps;
        return train_to_dict(train_cdp(corpus, cc, seed));
      },
      py::arg("corpus"), py::arg("topics") = 50, py::arg("alpha") = 1.0,
      py::arg("beta") = 0.01, py::arg("iters") = 100, py::arg("eps") = 1.0,
      py::arg("seed") = 1);
  m.def(
      "train_cdp_plus",
      [](const Corpus& corpus, int topics, double alpha, double beta, int iters,
         double eps, uint64_t seed) {
        CdpConfig cc;
        cc.train = config_from(topics, alpha, beta, iters);
        cc.eps = eps;
        return train_to_dict(train_cdp_plus(corpus, cc, seed));
      },
      py::arg("corpus"), py::arg("topics") = 50, py::arg("alpha") = 1.0,
      py::arg("beta") = 0.01, py::arg("iters") = 100, py::arg("eps") = 1.0,
      py::arg("seed") = 1);

  py::class_<PerturbedBatch>(m, "PerturbedBatch")
      .def_readonly("f", &PerturbedBatch::f)
      .def_property_readonly("size", &PerturbedBatch::size)
      .def("bits",
           [](const PerturbedBatch& b, int i) {
             if (i < 0 || i >= b.size()) throw std::out_of_range("document index out of range");
             return b.docs[static_cast<size_t>(i)].bits;
           },
           py::arg("doc"))
      .def("doc_id",
           [](const PerturbedBatch& b, int i) {
             if (i < 0 || i >= b.size()) throw std::out_of_range("document index out of range");
             return b.docs[static_cast<size_t>(i)].doc_id;
           },
           py::arg("doc"))
      .def("__repr__", [](const PerturbedBatch& b) {
        return "<PerturbedBatch docs=" + std::to_string(b.size()) +
               " f=" + std::to_string(b.f) + ">";
      });

  m.def(
      "perturb_corpus",
      [](const Corpus& corpus, double f, uint64_t seed) {
        return perturb_docs(to_binary(corpus), f, RngStream(seed).derive("perturb"));
      },
      py::arg("corpus"), py::arg("f"), py::arg("seed") = 1,
      "Randomized-response encode every document's presence vector.");
  m.def(
      "reconstruct",
      [](const PerturbedBatch& batch, const std::vector<std::string>& terms,
         uint64_t seed) {
        return reconstruct(batch, vocab_from(terms), RngStream(seed).derive("reconstruct"));
      },
      py::arg("batch"), py::arg("terms"), py::arg("seed") = 1);
  m.def(
      "train_lp",
      [](const PerturbedBatch& batch, const std::vector<std::string>& terms, int topics,
         double alpha, double beta, int iters, uint64_t seed) {
        return train_to_dict(
            train_lp(batch, vocab_from(terms), config_from(topics, alpha, beta, iters), seed));
      },
      py::arg("batch"), py::arg("terms"), py::arg("topics") = 50, py::arg("alpha") = 1.0,
      py::arg("beta") = 0.01, py::arg("iters") = 100, py::arg("seed") = 1);
  m.def("save_batch", &save_batch, py::arg("batch"), py::arg("path"));
  m.def("load_batch", &load_batch, py::arg("path"), py::arg("vocab_size"));
  m.def("load_batches", &load_batches, py::arg("path"), py::arg("vocab_size"));

  m.def(
      "run_olp",
      [](const std::vector<PerturbedBatch>& batches, const std::vector<std::string>& terms,
         std::optional<Corpus> prior, std::optional<Corpus> test, int topics, double alpha,
         double beta, int iters, double lam, double omega, double sigma2,
         int fold_in_sweeps, uint64_t seed) {
        OnlineConfig cfg;
        cfg.train = config_from(topics, alpha, beta, iters);
        cfg.lambda = lam;
        cfg.omega = omega;
        cfg.sigma2 = sigma2;
        cfg.fold_in_sweeps = fold_in_sweeps;
        OnlineResult r = run_olp(prior ? &*prior : nullptr, batches, vocab_from(terms), cfg,
                                 test ? &*test : nullptr, seed);
        py::dict d;
        py::list models;
        for (const auto& tm : r.models) models.append(mat_to_np(tm.phi));
        d["models"] = models;
        py::list metrics;
        for (const auto& bm : r.metrics) {
          py::dict e;
          e["batch"] = bm.batch;
          e["batch_size"] = bm.batch_size;
          e["perplexity"] = bm.perplexity;
          e["eps_word"] = bm.eps_word;
          e["elapsed_ms"] = bm.elapsed_ms;
          metrics.append(e);
        }
        d["metrics"] = metrics;
        d["report"] = report_to_dict(r.report);
        return d;
      },
      py::arg("batches"), py::arg("terms"), py::arg("prior") = py::none(),
      py::arg("test") = py::none(), py::arg("topics") = 50, py::arg("alpha") = 1.0,
      py::arg("beta") = 0.01, py::arg("iters") = 100, py::arg("lam") = 0.5,
      py::arg("omega") = 0.4, py::arg("sigma2") = -1.0, py::arg("fold_in_sweeps") = 20,
      py::arg("seed") = 1,
      "Online training over perturbed batches; lam is the prior carry-over weight.");

  m.def(
      "run_attack",
      [](const Corpus& corpus, const std::string& trainer, int topics, double alpha,
         double beta, int iters, double eps_l, double clip, double eps, int target_doc,
         int target_pos, uint64_t seed) {
        AttackConfig cfg;
        if (trainer == "cgs")
          cfg.trainer = AttackTrainer::cgs;
        else if (trainer == "hdp")
          cfg.trainer = AttackTrainer::hdp;
        else if (trainer == "cdp_plus")
          cfg.trainer = AttackTrainer::cdp_plus;
        else
          throw std::invalid_argument("trainer must be cgs, hdp or cdp_plus");
        cfg.train = config_from(topics, alpha, beta, iters);
        cfg.eps_l = eps_l;
        cfg.clip = clip;
        cfg.eps = eps;
        cfg.target_doc = target_doc;
        cfg.target_pos = target_pos;
        AttackResult r = run_attack(corpus, cfg, seed);
        py::dict d;
        d["true_word"] = r.trace.true_word;
        d["target_doc"] = r.trace.target_doc;
        d["target_pos"] = r.trace.target_pos;
        d["accuracy"] = r.accuracy;
        d["argmax_correct"] = r.argmax_correct;
        d["report"] = report_to_dict(r.report);
        return d;
      },
      py::arg("corpus"), py::arg("trainer") = "cgs", py::arg("topics") = 50,
      py::arg("alpha") = 1.0, py::arg("beta") = 0.01, py::arg("iters") = 100,
      py::arg("eps_l") = 1.0, py::arg("clip") = 10.0, py::arg("eps") = 1.0,
      py::arg("target_doc") = -1, py::arg("target_pos") = -1, py::arg("seed") = 1);

  m.def(
      "perplexity",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& phi,
         const Corpus& test, double alpha, int fold_in_sweeps, uint64_t seed) {
        TopicModel model;
        model.phi = np_to_mat(phi);
        model.alpha = alpha;
        return perplexity(model, test, fold_in_sweeps, RngStream(seed).derive("eval"));
      },
      py::arg("phi"), py::arg("test"), py::arg("alpha") = 1.0,
      py::arg("fold_in_sweeps") = 20, py::arg("seed") = 1);

  m.def("save_model_csv",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& phi,
           const std::string& path) { save_model_csv(np_to_mat(phi), path); },
        py::arg("phi"), py::arg("path"));
  m.def("load_model_csv",
        [](const std::string& path) { return mat_to_np(load_model_csv(path)); },
        py::arg("path"));
  m.def("save_model_bin",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& phi,
           const std::string& path) { save_model_bin(np_to_mat(phi), path); },
        py::arg("phi"), py::arg("path"));
  m.def("load_model_bin",
        [](const std::string& path) { return mat_to_np(load_model_bin(path)); },
        py::arg("path"));

  m.def("rr_eps_word", &rr_eps_word, py::arg("f"));
  m.def("rr_f_for_eps", &rr_f_for_eps, py::arg("eps_word"));
  m.def("inherent_eps_replaced", &inherent_eps_replaced, py::arg("counts"), py::arg("beta"));
  m.def("inherent_eps_related", &inherent_eps_related, py::arg("beta"));
  m.def("inherent_eps_iteration", &inherent_eps_iteration, py::arg("max_count"),
        py::arg("max_word_total"), py::arg("replaced_word_total"), py::arg("beta"));
  m.def("inherent_eps_total", &inherent_eps_total, py::arg("per_word"));
  m.def("clipped_inherent_eps", &clipped_inherent_eps, py::arg("clip"), py::arg("beta"));
  m.def("estimate_count", &estimate_count, py::arg("n_t"), py::arg("f"), py::arg("M"));
  m.def("estimator_variance", &estimator_variance, py::arg("f"), py::arg("M"), py::arg("N_t"));
  m.def("update_mu", &update_mu, py::arg("mu_prev"), py::arg("eta_prev"),
        py::arg("size_l"), py::arg("size_prev"));
  m.def("bayes_weight", &bayes_weight, py::arg("M"), py::arg("f"), py::arg("sigma2"));
  m.def("bayes_denoise", &bayes_denoise, py::arg("omega"), py::arg("mu"), py::arg("moment"));
  m.def("bayes_variance", &bayes_variance, py::arg("omega"), py::arg("f"), py::arg("M"),
        py::arg("N_t"));

  m.attr("__version__") = "0.1.0";
}
