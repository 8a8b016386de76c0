#include "dplda/lplda.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace dplda {

BinaryDoc perturb_document(const BinaryDoc& doc, double f, RngStream& rng) {
  BinaryDoc out;
  out.doc_id = doc.doc_id;
  out.bits.resize(doc.bits.size());
  for (size_t t = 0; t < doc.bits.size(); ++t)
    out.bits[t] = static_cast<uint8_t>(rr_flip(doc.bits[t], f, rng));
  return out;
}

PerturbedBatch perturb_docs(const std::vector<BinaryDoc>& docs, double f, RngStream rng) {
  if (!(f > 0.0 && f < 1.0))
    throw std::invalid_argument("perturb_docs: f must be in (0,1)");
  PerturbedBatch batch;
  batch.f = f;
  batch.docs.reserve(docs.size());
  for (size_t i = 0; i < docs.size(); ++i) {
    RngStream dr = rng.derive(static_cast<uint64_t>(i));
    batch.docs.push_back(perturb_document(docs[i], f, dr));
  }
  return batch;
}

double estimate_count(double n_t, double f, double M) {
  if (!(f > 0.0 && f < 1.0))
    throw std::invalid_argument("estimate_count: f must be in (0,1)");
  if (!(M > 0.0)) throw std::invalid_argument("estimate_count: M must be > 0");
  return (2.0 * n_t - f * M) / (2.0 * (1.0 - f));
}

double estimator_variance(double f, double M, double N_t) {
  if (!(f > 0.0 && f < 1.0))
    throw std::invalid_argument("estimator_variance: f must be in (0,1)");
  if (!(M > 0.0)) throw std::invalid_argument("estimator_variance: M must be > 0");
  if (N_t < 0.0 || N_t > M)
    throw std::invalid_argument("estimator_variance: N_t must be in [0, M]");
  return (2.0 - f) * f * M / (4.0 * (1.0 - f) * (1.0 - f)) + (M - N_t) * N_t / M;
}

namespace {

Corpus rebuild_corpus(const PerturbedBatch& batch, const Vocabulary& vocab,
                      const std::vector<double>& targets, RngStream& rng) {
  const int V = vocab.size();
  const int M = batch.size();
  if (static_cast<int>(targets.size()) != V)
    throw std::invalid_argument("reconstruct: targets size must match vocabulary");
  for (const auto& d : batch.docs)
    if (static_cast<int>(d.bits.size()) != V)
      throw std::invalid_argument("reconstruct: document bit length must match vocabulary");

  // working copy of the bit matrix
  std::vector<std::vector<uint8_t>> bits;
  bits.reserve(batch.docs.size());
  for (const auto& d : batch.docs) bits.push_back(d.bits);

  std::vector<int> candidates;
  for (int t = 0; t < V; ++t) {
    long n_t = 0;
    for (int m = 0; m < M; ++m) n_t += bits[static_cast<size_t>(m)][static_cast<size_t>(t)];

    double target = targets[static_cast<size_t>(t)];
    if (target < 0.0) target = 0.0;
    if (target > M) target = static_cast<double>(M);
    // ties round to even, like the rest of the IEEE default environment
    const long want = static_cast<long>(std::nearbyint(target));
    long delta = want - n_t;
    if (delta == 0) continue;

    const uint8_t from = delta > 0 ? 0 : 1;
    candidates.clear();
    for (int m = 0; m < M; ++m)
      if (bits[static_cast<size_t>(m)][static_cast<size_t>(t)] == from)
        candidates.push_back(m);
    long flips = std::min<long>(std::labs(delta), static_cast<long>(candidates.size()));
    // uniform sample without replacement: partial Fisher-Yates
    for (long i = 0; i < flips; ++i) {
      const size_t j =
          static_cast<size_t>(i) + rng.below(candidates.size() - static_cast<size_t>(i));
      std::swap(candidates[static_cast<size_t>(i)], candidates[j]);
      bits[static_cast<size_t>(candidates[static_cast<size_t>(i)])][static_cast<size_t>(t)] ^= 1;
    }
  }

  Corpus out;
  out.vocab = vocab;
  out.docs.reserve(batch.docs.size());
  for (int m = 0; m < M; ++m) {
    Document d;
    d.doc_id = batch.docs[static_cast<size_t>(m)].doc_id;
    for (int t = 0; t < V; ++t)
      if (bits[static_cast<size_t>(m)][static_cast<size_t>(t)]) d.tokens.push_back(t);
    out.docs.push_back(std::move(d));
  }
  return out;
}

}  // namespace

Corpus reconstruct(const PerturbedBatch& batch, const Vocabulary& vocab, RngStream rng) {
  const int V = vocab.size();
  const int M = batch.size();
  std::vector<double> targets(static_cast<size_t>(V));
  for (int t = 0; t < V; ++t) {
    long n_t = 0;
    for (const auto& d : batch.docs) n_t += d.bits[static_cast<size_t>(t)];
    targets[static_cast<size_t>(t)] =
        estimate_count(static_cast<double>(n_t), batch.f, static_cast<double>(M));
  }
  return rebuild_corpus(batch, vocab, targets, rng);
}

Corpus reconstruct_with_targets(const PerturbedBatch& batch, const Vocabulary& vocab,
                                const std::vector<double>& targets, RngStream rng) {
  return rebuild_corpus(batch, vocab, targets, rng);
}

TrainResult train_lp(const PerturbedBatch& batch, const Vocabulary& vocab,
                     const TrainConfig& cfg, uint64_t seed) {
  RngStream root(seed);
  const Corpus recon = reconstruct(batch, vocab, root.derive("reconstruct"));
  TrainResult r = train_cgs(recon, cfg, root.derive("train").key());
  const double eps_word = rr_eps_word(batch.f);
  r.report.mechanism = "lp";
  r.report.params["f"] = batch.f;
  r.report.params["eps_word"] = eps_word;
  r.report.params["eps_document"] = static_cast<double>(vocab.size()) * eps_word;
  r.report.params["docs"] = batch.size();
  r.report.total_epsilon = eps_word;
  return r;
}

namespace {

constexpr char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string b64_encode(const std::vector<uint8_t>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    const uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kB64[(v >> 18) & 63];
    out += kB64[(v >> 12) & 63];
    out += kB64[(v >> 6) & 63];
    out += kB64[v & 63];
  }
  if (i + 1 == bytes.size()) {
    const uint32_t v = bytes[i] << 16;
    out += kB64[(v >> 18) & 63];
    out += kB64[(v >> 12) & 63];
    out += "==";
  } else if (i + 2 == bytes.size()) {
    const uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out += kB64[(v >> 18) & 63];
    out += kB64[(v >> 12) & 63];
    out += kB64[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::vector<uint8_t> b64_decode(const std::string& text) {
  int8_t lut[256];
  std::fill(std::begin(lut), std::end(lut), int8_t{-1});
  for (int i = 0; i < 64; ++i) lut[static_cast<unsigned char>(kB64[i])] = static_cast<int8_t>(i);
  std::vector<uint8_t> out;
  uint32_t acc = 0;
  int nbits = 0;
  for (char c : text) {
    if (c == '=') break;
    const int8_t v = lut[static_cast<unsigned char>(c)];
    if (v < 0) throw std::runtime_error("bad base64 character");
    acc = (acc << 6) | static_cast<uint32_t>(v);
    nbits += 6;
    if (nbits >= 8) {
      nbits -= 8;
      out.push_back(static_cast<uint8_t>((acc >> nbits) & 0xFF));
    }
  }
  return out;
}

std::vector<uint8_t> pack_bits(const std::vector<uint8_t>& bits) {
  std::vector<uint8_t> bytes((bits.size() + 7) / 8, 0);
  for (size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) bytes[i / 8] |= static_cast<uint8_t>(1u << (i % 8));
  return bytes;
}

std::vector<uint8_t> unpack_bits(const std::vector<uint8_t>& bytes, int nbits) {
  std::vector<uint8_t> bits(static_cast<size_t>(nbits), 0);
  for (int i = 0; i < nbits; ++i)
    bits[static_cast<size_t>(i)] = (bytes[static_cast<size_t>(i) / 8] >> (i % 8)) & 1;
  return bits;
}

}  // namespace

void save_batch(const PerturbedBatch& batch, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  for (const auto& d : batch.docs) {
    nlohmann::json j;
    j["doc_id"] = d.doc_id;
    j["f"] = batch.f;
    j["bits"] = b64_encode(pack_bits(d.bits));
    out << j.dump() << '\n';
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

namespace {

void append_record(PerturbedBatch& batch, const nlohmann::json& j, const std::string& path,
                   long lineno, int vocab_size) {
  const size_t need_bytes = (static_cast<size_t>(vocab_size) + 7) / 8;
  BinaryDoc d;
  d.doc_id = j.at("doc_id").get<int>();
  const double f = j.at("f").get<double>();
  if (batch.f < 0.0)
    batch.f = f;
  else if (f != batch.f)
    throw std::runtime_error(path + ":" + std::to_string(lineno) +
                             ": inconsistent f across records");
  const auto bytes = b64_decode(j.at("bits").get<std::string>());
  if (bytes.size() != need_bytes)
    throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected " +
                             std::to_string(need_bytes) + " packed bytes, got " +
                             std::to_string(bytes.size()));
  for (size_t i = static_cast<size_t>(vocab_size); i < bytes.size() * 8; ++i)
    if ((bytes[i / 8] >> (i % 8)) & 1)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": nonzero padding bits");
  d.bits = unpack_bits(bytes, vocab_size);
  batch.docs.push_back(std::move(d));
}

nlohmann::json parse_line(const std::string& line, const std::string& path, long lineno) {
  try {
    return nlohmann::json::parse(line);
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
  }
}

}  // namespace

PerturbedBatch load_batch(const std::string& path, int vocab_size) {
  if (vocab_size < 1) throw std::invalid_argument("load_batch: vocab_size must be >= 1");
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  PerturbedBatch batch;
  batch.f = -1.0;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    append_record(batch, parse_line(line, path, lineno), path, lineno, vocab_size);
  }
  if (batch.docs.empty()) throw std::runtime_error(path + ": empty batch file");
  return batch;
}

std::vector<PerturbedBatch> load_batches(const std::string& path, int vocab_size) {
  if (vocab_size < 1) throw std::invalid_argument("load_batches: vocab_size must be >= 1");
  std::vector<PerturbedBatch> out;
  if (std::filesystem::is_directory(path)) {
    std::vector<std::string> files;
    for (const auto& entry : std::filesystem::directory_iterator(path))
      if (entry.is_regular_file() && entry.path().extension() == ".jsonl")
        files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error(path + ": no .jsonl batch files");
    out.reserve(files.size());
    for (const auto& f : files) out.push_back(load_batch(f, vocab_size));
    return out;
  }
  // single stream: records accumulate into a batch until a line with a
  // "batch_end" key closes it
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  PerturbedBatch cur;
  cur.f = -1.0;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j = parse_line(line, path, lineno);
    if (j.contains("batch_end")) {
      if (cur.docs.empty())
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": empty batch");
      out.push_back(std::move(cur));
      cur = PerturbedBatch{};
      cur.f = -1.0;
      continue;
    }
    append_record(cur, j, path, lineno, vocab_size);
  }
  if (!cur.docs.empty()) out.push_back(std::move(cur));
  if (out.empty()) throw std::runtime_error(path + ": no batches");
  return out;
}

}  // namespace dplda
