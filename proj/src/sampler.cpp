#include "dplda/sampler.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dplda {

TopicPrior TopicPrior::uniform_prior(double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("TopicPrior: beta must be > 0");
  TopicPrior p;
  p.scalar = beta;
  return p;
}

TopicPrior TopicPrior::matrix_prior(Matrix values) {
  TopicPrior p;
  p.values = std::move(values);
  p.refresh_row_sums();
  for (size_t i = 0; i < p.values.size(); ++i)
    if (!(p.values.data()[i] > 0.0))
      throw std::invalid_argument("TopicPrior: all entries must be > 0");
  return p;
}

void TopicPrior::materialize(int K, int V) {
  if (!uniform()) return;
  values = Matrix(K, V, scalar);
  refresh_row_sums();
}

void TopicPrior::refresh_row_sums() {
  row_sums.resize(static_cast<size_t>(values.rows()));
  for (int k = 0; k < values.rows(); ++k) row_sums[static_cast<size_t>(k)] = values.row_sum(k);
}

void SamplerState::rebuild_counts() {
  n_kt = Matrix(K, V);
  n_mk = Matrix(num_docs(), K);
  n_k.assign(static_cast<size_t>(K), 0.0);
  for (size_t m = 0; m < docs.size(); ++m) {
    for (size_t j = 0; j < docs[m].size(); ++j) {
      const int t = docs[m][j];
      const int k = z[m][j];
      n_kt(k, t) += 1.0;
      n_mk(static_cast<int>(m), k) += 1.0;
      n_k[static_cast<size_t>(k)] += 1.0;
    }
  }
}

SamplerState init_state(const Corpus& corpus, int K, double alpha, TopicPrior beta,
                        RngStream rng) {
  if (K < 1) throw std::invalid_argument("init_state: K must be >= 1");
  if (!(alpha > 0.0)) throw std::invalid_argument("init_state: alpha must be > 0");
  if (!beta.uniform() &&
      (beta.values.rows() != K || beta.values.cols() != corpus.vocab_size()))
    throw std::invalid_argument("init_state: prior matrix shape must be K x V");

  SamplerState st;
  st.K = K;
  st.V = corpus.vocab_size();
  st.alpha = alpha;
  st.beta = std::move(beta);
  st.docs.reserve(corpus.docs.size());
  st.doc_ids.reserve(corpus.docs.size());
  for (const auto& d : corpus.docs) {
    st.docs.push_back(d.tokens);
    st.doc_ids.push_back(d.doc_id);
  }
  st.z.resize(st.docs.size());
  for (size_t m = 0; m < st.docs.size(); ++m) {
    st.z[m].resize(st.docs[m].size());
    for (size_t j = 0; j < st.docs[m].size(); ++j)
      st.z[m][j] = static_cast<int32_t>(rng.below(static_cast<uint64_t>(K)));
  }
  st.rebuild_counts();
  return st;
}

std::vector<double> conditional_distribution(const SamplerState& state, int m, int t) {
  const int K = state.K;
  if (m < 0 || m >= state.num_docs())
    throw std::invalid_argument("conditional_distribution: bad document index");
  if (t < 0 || t >= state.V)
    throw std::invalid_argument("conditional_distribution: bad word id");

  double doc_total = 0.0;
  for (int k = 0; k < K; ++k) doc_total += state.n_mk(m, k);
  const double doc_den = doc_total + static_cast<double>(K) * state.alpha;

  std::vector<double> p(static_cast<size_t>(K));
  double total = 0.0;
  for (int k = 0; k < K; ++k) {
    const double num = state.n_kt(k, t) + state.beta.at(k, t);
    const double den = state.n_k[static_cast<size_t>(k)] + state.beta.row_sum(k, state.V);
    const double doc = (state.n_mk(m, k) + state.alpha) / doc_den;
    const double mass = num / den * doc;
    if (!(mass > 0.0) || !std::isfinite(mass))
      throw std::domain_error("conditional_distribution: nonpositive sampling mass");
    p[static_cast<size_t>(k)] = mass;
    total += mass;
  }
  for (double& v : p) v /= total;
  return p;
}

void sweep(SamplerState& state, RngStream& rng, const SweepOptions& opt) {
  const int K = state.K;
  const int V = state.V;
  const double alpha = state.alpha;
  const TopicPrior& beta = state.beta;
  std::vector<double> mass(static_cast<size_t>(K));

  // denominators only change for the two touched topics per token; keep the
  // prior row sums at hand
  std::vector<double> prior_row(static_cast<size_t>(K));
  for (int k = 0; k < K; ++k) prior_row[static_cast<size_t>(k)] = beta.row_sum(k, V);

  for (int m = 0; m < state.num_docs(); ++m) {
    const auto& tokens = state.docs[static_cast<size_t>(m)];
    auto& zm = state.z[static_cast<size_t>(m)];
    double* nm = state.n_mk.row(m);
    for (size_t j = 0; j < tokens.size(); ++j) {
      const int t = tokens[j];
      const int k_old = zm[j];
      state.n_kt(k_old, t) -= 1.0;
      nm[k_old] -= 1.0;
      state.n_k[static_cast<size_t>(k_old)] -= 1.0;

      double total = 0.0;
      for (int k = 0; k < K; ++k) {
        const double den = state.n_k[static_cast<size_t>(k)] + prior_row[static_cast<size_t>(k)];
        double v = 0.0;
        if (den > 0.0) {
          const double bkt = beta.at(k, t);
          double c = state.n_kt(k, t);
          if (c > opt.clip) c = opt.clip;
          double num = c + bkt;
          const double floor = bkt * 0.5;
          if (num < floor) num = floor;
          v = num / den * (nm[k] + alpha);
          if (!(v > 0.0)) v = 0.0;
        }
        mass[static_cast<size_t>(k)] = v;
        total += v;
      }

      int k_new;
      if (total > 0.0 && std::isfinite(total)) {
        const double u = rng.uniform01() * total;
        k_new = K - 1;
        double acc = 0.0;
        for (int k = 0; k < K; ++k) {
          acc += mass[static_cast<size_t>(k)];
          if (u < acc) {
            k_new = k;
            break;
          }
        }
      } else {
        k_new = static_cast<int>(rng.below(static_cast<uint64_t>(K)));
        ++state.degeneracy_events;
        if (opt.sink) opt.sink->degeneracy(opt.iter);
      }

      state.n_kt(k_new, t) += 1.0;
      nm[k_new] += 1.0;
      state.n_k[static_cast<size_t>(k_new)] += 1.0;
      zm[j] = static_cast<int32_t>(k_new);
      if (opt.sink) opt.sink->token_sampled(opt.iter, m, static_cast<int>(j), k_new);
    }
  }
}

Matrix estimate_phi(const SamplerState& state) {
  Matrix phi(state.K, state.V);
  for (int k = 0; k < state.K; ++k) {
    double s = 0.0;
    for (int t = 0; t < state.V; ++t) {
      const double bkt = state.beta.at(k, t);
      double num = state.n_kt(k, t) + bkt;
      const double floor = bkt * 0.5;
      if (num < floor) num = floor;
      phi(k, t) = num;
      s += num;
    }
    for (int t = 0; t < state.V; ++t) phi(k, t) /= s;
  }
  return phi;
}

std::vector<double> fold_in_theta(const Matrix& phi, const std::vector<int32_t>& tokens,
                                  double alpha, int n_sweeps, RngStream rng) {
  const int K = phi.rows();
  if (K < 1) throw std::invalid_argument("fold_in_theta: empty model");
  if (!(alpha > 0.0)) throw std::invalid_argument("fold_in_theta: alpha must be > 0");

  std::vector<double> nm(static_cast<size_t>(K), 0.0);
  std::vector<int32_t> z(tokens.size());
  for (size_t j = 0; j < tokens.size(); ++j) {
    z[j] = static_cast<int32_t>(rng.below(static_cast<uint64_t>(K)));
    nm[static_cast<size_t>(z[j])] += 1.0;
  }

  std::vector<double> mass(static_cast<size_t>(K));
  for (int s = 0; s < n_sweeps; ++s) {
    for (size_t j = 0; j < tokens.size(); ++j) {
      const int t = tokens[j];
      nm[static_cast<size_t>(z[j])] -= 1.0;
      double total = 0.0;
      for (int k = 0; k < K; ++k) {
        double v = phi(k, t) * (nm[static_cast<size_t>(k)] + alpha);
        if (!(v > 0.0)) v = 0.0;
        mass[static_cast<size_t>(k)] = v;
        total += v;
      }
      int k_new;
      if (total > 0.0 && std::isfinite(total)) {
        const double u = rng.uniform01() * total;
        k_new = K - 1;
        double acc = 0.0;
        for (int k = 0; k < K; ++k) {
          acc += mass[static_cast<size_t>(k)];
          if (u < acc) {
            k_new = k;
            break;
          }
        }
      } else {
        k_new = static_cast<int>(rng.below(static_cast<uint64_t>(K)));
      }
      nm[static_cast<size_t>(k_new)] += 1.0;
      z[j] = static_cast<int32_t>(k_new);
    }
  }

  std::vector<double> theta(static_cast<size_t>(K));
  const double den = static_cast<double>(tokens.size()) + static_cast<double>(K) * alpha;
  for (int k = 0; k < K; ++k) theta[static_cast<size_t>(k)] = (nm[static_cast<size_t>(k)] + alpha) / den;
  return theta;
}

TrainResult train_cgs(const Corpus& corpus, const TrainConfig& cfg, uint64_t seed,
                      TraceSink* sink) {
  if (cfg.iters < 0) throw std::invalid_argument("train_cgs: iters must be >= 0");
  RngStream root(seed);
  SamplerState st = init_state(corpus, cfg.topics, cfg.alpha,
                               TopicPrior::uniform_prior(cfg.beta), root.derive("init"));
  RngStream sw = root.derive("sweep");
  for (int iter = 0; iter < cfg.iters; ++iter) {
    if (sink) sink->iteration_start(iter, st.n_kt);
    SweepOptions opt;
    opt.sink = sink;
    opt.iter = iter;
    sweep(st, sw, opt);
    if (sink) sink->iteration_end(iter);
  }
  TrainResult r;
  r.model.phi = estimate_phi(st);
  r.model.alpha = cfg.alpha;
  r.model.beta = cfg.beta;
  r.model.iters = cfg.iters;
  r.report.mechanism = "none";
  r.report.total_epsilon = 0.0;
  r.final_counts = st.n_kt;
  r.degeneracy_events = st.degeneracy_events;
  return r;
}

void save_model_csv(const Matrix& phi, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  char buf[40];
  for (int k = 0; k < phi.rows(); ++k) {
    for (int t = 0; t < phi.cols(); ++t) {
      std::snprintf(buf, sizeof buf, "%.17g", phi(k, t));
      if (t) out << ',';
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

Matrix load_model_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::vector<std::vector<double>> rows;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad value '" +
                                 cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error(path + ": empty model file");
  Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
  for (size_t k = 0; k < rows.size(); ++k)
    for (size_t t = 0; t < rows[k].size(); ++t) m(static_cast<int>(k), static_cast<int>(t)) = rows[k][t];
  return m;
}

namespace {

constexpr char kMagic[6] = {'D', 'P', 'L', 'D', 'A', '1'};

void put_u64le(std::ofstream& out, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 8);
}

uint64_t get_u64le(std::ifstream& in, const std::string& path) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8))
    throw std::runtime_error(path + ": truncated header");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void save_model_bin(const Matrix& phi, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out.write(kMagic, sizeof kMagic);
  put_u64le(out, static_cast<uint64_t>(phi.rows()));
  put_u64le(out, static_cast<uint64_t>(phi.cols()));
  for (size_t i = 0; i < phi.size(); ++i) {
    uint64_t bits;
    static_assert(sizeof bits == sizeof(double));
    std::memcpy(&bits, &phi.data()[i], 8);
    put_u64le(out, bits);
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

Matrix load_model_bin(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  char magic[6];
  if (!in.read(magic, 6) || std::memcmp(magic, kMagic, 6) != 0)
    throw std::runtime_error(path + ": not a model file (bad magic)");
  const uint64_t K = get_u64le(in, path);
  const uint64_t V = get_u64le(in, path);
  if (K == 0 || V == 0 || K > (1u << 24) || V > (1u << 24))
    throw std::runtime_error(path + ": implausible model shape");
  Matrix m(static_cast<int>(K), static_cast<int>(V));
  for (size_t i = 0; i < m.size(); ++i) {
    std::ifstream& s = in;
    uint64_t bits = get_u64le(s, path);
    std::memcpy(&m.data()[i], &bits, 8);
  }
  return m;
}

}  // namespace dplda
