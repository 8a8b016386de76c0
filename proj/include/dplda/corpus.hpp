#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dplda/matrix.hpp"
#include "dplda/rng.hpp"

namespace dplda {

struct Vocabulary {
  std::vector<std::string> terms;
  int size() const { return static_cast<int>(terms.size()); }
};

struct Document {
  int doc_id = 0;                // id from the source file (1-based for UCI input)
  std::vector<int32_t> tokens;   // word ids in [0, V)
};

// One-hot presence vector for a document; bits[t] is 1 iff word t occurs.
struct BinaryDoc {
  int doc_id = 0;
  std::vector<uint8_t> bits;
};

struct Corpus {
  Vocabulary vocab;
  std::vector<Document> docs;

  int vocab_size() const { return vocab.size(); }
  int num_docs() const { return static_cast<int>(docs.size()); }
  int64_t total_tokens() const {
    int64_t n = 0;
    for (const auto& d : docs) n += static_cast<int64_t>(d.tokens.size());
    return n;
  }
};

// Reads a one-term-per-line vocabulary file (trailing \r stripped).
Vocabulary load_vocab(const std::string& path);

// Reads the UCI bag-of-words pair (docword + one-term-per-line vocab file).
// The docword header is three lines: D, W, NNZ; each following line is
// "docID wordID count" with 1-based ids. The vocabulary is truncated to the
// top_v terms with the highest total count (ties broken toward the lower
// original word id); retained terms keep their original relative order.
// Tokens of dropped terms disappear, a triple with count c expands to c
// consecutive tokens, and documents left empty are dropped.
// Malformed input throws std::runtime_error carrying "path:line".
Corpus load_uci(const std::string& docword_path, const std::string& vocab_path, int top_v);

// Writes a corpus back out in the same pair of formats.
void save_uci(const Corpus& corpus, const std::string& docword_path,
              const std::string& vocab_path);

// Deterministic shuffled split: permutes documents with the given stream and
// takes the first n_train as the training half. Both halves share the vocab.
std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, int n_train, RngStream rng);

// Presence encoding used by the local-privacy pipeline.
std::vector<BinaryDoc> to_binary(const Corpus& corpus);

struct SynthSpec {
  int topics = 2;
  int vocab_size = 20;
  int docs = 200;
  int doc_len = 50;
  double alpha = 0.5;  // document-topic Dirichlet
  double beta = 0.1;   // topic-word Dirichlet
};

struct SynthResult {
  Corpus corpus;
  Matrix phi;    // generating topic-word distributions, topics x vocab
  Matrix theta;  // generating doc-topic mixtures, docs x topics
};

// Samples a corpus from the generative model: phi_k ~ Dir(beta),
// theta_m ~ Dir(alpha), then each token draws a topic and a word.
SynthResult synth_corpus(const SynthSpec& spec, RngStream rng);

}  // namespace dplda
