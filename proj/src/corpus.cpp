#include "dplda/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dplda {

namespace {

[[noreturn]] void fail_at(const std::string& path, long line, const std::string& msg) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + msg);
}

long parse_count_line(const std::string& path, std::ifstream& in, long& lineno,
                      const char* what) {
  std::string line;
  if (!std::getline(in, line)) fail_at(path, lineno, std::string("missing ") + what);
  ++lineno;
  try {
    size_t pos = 0;
    long v = std::stol(line, &pos);
    while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
    if (pos != line.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    fail_at(path, lineno, std::string("bad ") + what + ": '" + line + "'");
  }
}

}  // namespace

Vocabulary load_vocab(const std::string& path) {
  std::ifstream vin(path);
  if (!vin) throw std::runtime_error(path + ": cannot open");
  Vocabulary vocab;
  for (std::string line; std::getline(vin, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    vocab.terms.push_back(line);
  }
  if (vocab.terms.empty()) throw std::runtime_error(path + ": empty vocabulary file");
  return vocab;
}

Corpus load_uci(const std::string& docword_path, const std::string& vocab_path, int top_v) {
  if (top_v < 1) throw std::invalid_argument("load_uci: top_v must be >= 1");

  std::vector<std::string> terms = load_vocab(vocab_path).terms;

  std::ifstream in(docword_path);
  if (!in) throw std::runtime_error(docword_path + ": cannot open");
  long lineno = 0;
  const long D = parse_count_line(docword_path, in, lineno, "document count header");
  const long W = parse_count_line(docword_path, in, lineno, "vocabulary count header");
  const long NNZ = parse_count_line(docword_path, in, lineno, "nonzero count header");
  if (D < 1) fail_at(docword_path, lineno, "document count must be >= 1");
  if (W < 1) fail_at(docword_path, lineno, "vocabulary count must be >= 1");
  if (NNZ < 0) fail_at(docword_path, lineno, "nonzero count must be >= 0");
  if (static_cast<long>(terms.size()) < W)
    throw std::runtime_error(vocab_path + ": has " + std::to_string(terms.size()) +
                             " terms but docword header declares " + std::to_string(W));

  struct Triple {
    long doc, word, count;
  };
  std::vector<Triple> triples;
  triples.reserve(static_cast<size_t>(NNZ));
  std::vector<int64_t> word_total(static_cast<size_t>(W), 0);

  std::string line;
  long seen = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    long d, w, c;
    if (std::sscanf(line.c_str(), "%ld %ld %ld", &d, &w, &c) != 3)
      fail_at(docword_path, lineno, "expected 'docID wordID count', got '" + line + "'");
    if (d < 1 || d > D) fail_at(docword_path, lineno, "docID out of range");
    if (w < 1 || w > W) fail_at(docword_path, lineno, "wordID out of range");
    if (c < 1) fail_at(docword_path, lineno, "count must be >= 1");
    triples.push_back({d, w, c});
    word_total[static_cast<size_t>(w - 1)] += c;
    ++seen;
  }
  if (seen != NNZ)
    fail_at(docword_path, lineno,
            "header declares " + std::to_string(NNZ) + " entries, file has " +
                std::to_string(seen));

  // pick the top_v terms by total count, ties toward the lower original id
  const int keep = static_cast<int>(std::min<long>(top_v, W));
  std::vector<int> order(static_cast<size_t>(W));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (word_total[a] != word_total[b]) return word_total[a] > word_total[b];
    return a < b;
  });
  order.resize(static_cast<size_t>(keep));
  std::sort(order.begin(), order.end());  // retained terms keep original order

  std::vector<int32_t> remap(static_cast<size_t>(W), -1);
  Corpus corpus;
  corpus.vocab.terms.reserve(order.size());
  for (size_t i = 0; i < order.size(); ++i) {
    remap[static_cast<size_t>(order[i])] = static_cast<int32_t>(i);
    corpus.vocab.terms.push_back(terms[static_cast<size_t>(order[i])]);
  }

  // expand triples to token lists, file order preserved within a document
  std::map<long, Document> docs;
  for (const auto& t : triples) {
    const int32_t nw = remap[static_cast<size_t>(t.word - 1)];
    if (nw < 0) continue;
    Document& doc = docs[t.doc];
    doc.doc_id = static_cast<int>(t.doc);
    for (long i = 0; i < t.count; ++i) doc.tokens.push_back(nw);
  }
  corpus.docs.reserve(docs.size());
  for (auto& [id, doc] : docs)
    if (!doc.tokens.empty()) corpus.docs.push_back(std::move(doc));
  if (corpus.docs.empty())
    throw std::runtime_error(docword_path + ": no non-empty documents after truncation");
  return corpus;
}

void save_uci(const Corpus& corpus, const std::string& docword_path,
              const std::string& vocab_path) {
  {
    std::ofstream vout(vocab_path);
    if (!vout) throw std::runtime_error(vocab_path + ": cannot open for writing");
    for (const auto& t : corpus.vocab.terms) vout << t << '\n';
  }
  // count (doc, word) pairs; emit docs in stored order with 1-based ids
  int64_t nnz = 0;
  std::vector<std::map<int32_t, long>> bags(corpus.docs.size());
  for (size_t m = 0; m < corpus.docs.size(); ++m) {
    for (int32_t t : corpus.docs[m].tokens) ++bags[m][t];
    nnz += static_cast<int64_t>(bags[m].size());
  }
  std::ofstream out(docword_path);
  if (!out) throw std::runtime_error(docword_path + ": cannot open for writing");
  out << corpus.docs.size() << '\n' << corpus.vocab.size() << '\n' << nnz << '\n';
  for (size_t m = 0; m < corpus.docs.size(); ++m)
    for (const auto& [w, c] : bags[m]) out << (m + 1) << ' ' << (w + 1) << ' ' << c << '\n';
}

std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, int n_train, RngStream rng) {
  const int M = corpus.num_docs();
  if (n_train < 1 || n_train >= M)
    throw std::invalid_argument("split_corpus: n_train must be in [1, num_docs)");
  std::vector<int> perm(static_cast<size_t>(M));
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = M - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.below(static_cast<uint64_t>(i) + 1));
    std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]);
  }
  Corpus train, test;
  train.vocab = corpus.vocab;
  test.vocab = corpus.vocab;
  for (int i = 0; i < M; ++i) {
    const Document& d = corpus.docs[static_cast<size_t>(perm[static_cast<size_t>(i)])];
    (i < n_train ? train : test).docs.push_back(d);
  }
  return {std::move(train), std::move(test)};
}

std::vector<BinaryDoc> to_binary(const Corpus& corpus) {
  const int V = corpus.vocab_size();
  std::vector<BinaryDoc> out;
  out.reserve(corpus.docs.size());
  for (const auto& d : corpus.docs) {
    BinaryDoc b;
    b.doc_id = d.doc_id;
    b.bits.assign(static_cast<size_t>(V), 0);
    for (int32_t t : d.tokens) b.bits[static_cast<size_t>(t)] = 1;
    out.push_back(std::move(b));
  }
  return out;
}

SynthResult synth_corpus(const SynthSpec& spec, RngStream rng) {
  if (spec.topics < 1 || spec.vocab_size < 2 || spec.docs < 1 || spec.doc_len < 1)
    throw std::invalid_argument("synth_corpus: bad shape");
  if (!(spec.alpha > 0.0) || !(spec.beta > 0.0))
    throw std::invalid_argument("synth_corpus: alpha and beta must be > 0");

  const int K = spec.topics, V = spec.vocab_size, M = spec.docs;
  SynthResult r;
  r.phi = Matrix(K, V);
  r.theta = Matrix(M, K);

  RngStream phi_rng = rng.derive("phi");
  for (int k = 0; k < K; ++k) {
    double s = 0.0;
    for (int t = 0; t < V; ++t) s += (r.phi(k, t) = phi_rng.gamma(spec.beta));
    for (int t = 0; t < V; ++t) r.phi(k, t) /= s;
  }

  RngStream doc_rng = rng.derive("docs");
  r.corpus.vocab.terms.reserve(static_cast<size_t>(V));
  for (int t = 0; t < V; ++t) r.corpus.vocab.terms.push_back("w" + std::to_string(t));
  r.corpus.docs.reserve(static_cast<size_t>(M));
  for (int m = 0; m < M; ++m) {
    RngStream dr = doc_rng.derive(static_cast<uint64_t>(m));
    double s = 0.0;
    for (int k = 0; k < K; ++k) s += (r.theta(m, k) = dr.gamma(spec.alpha));
    for (int k = 0; k < K; ++k) r.theta(m, k) /= s;

    Document doc;
    doc.doc_id = m + 1;
    doc.tokens.reserve(static_cast<size_t>(spec.doc_len));
    for (int i = 0; i < spec.doc_len; ++i) {
      double u = dr.uniform01();
      int k = 0;
      for (double acc = 0.0; k < K - 1; ++k) {
        acc += r.theta(m, k);
        if (u < acc) break;
      }
      u = dr.uniform01();
      int t = 0;
      for (double acc = 0.0; t < V - 1; ++t) {
        acc += r.phi(k, t);
        if (u < acc) break;
      }
      doc.tokens.push_back(static_cast<int32_t>(t));
    }
    r.corpus.docs.push_back(std::move(doc));
  }
  return r;
}

}  // namespace dplda
