#include "dplda/privacy.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace dplda {

double laplace_sample(double b, RngStream& rng) {
  if (!(b > 0.0)) throw std::invalid_argument("laplace_sample: scale must be > 0");
  const double u = rng.uniform_open() - 0.5;
  const double s = u < 0.0 ? -1.0 : 1.0;
  return -b * s * std::log(1.0 - 2.0 * std::fabs(u));
}

int rr_flip(int bit, double f, RngStream& rng) {
  if (bit != 0 && bit != 1) throw std::invalid_argument("rr_flip: bit must be 0 or 1");
  if (!(f >= 0.0 && f <= 1.0)) throw std::invalid_argument("rr_flip: f must be in [0,1]");
  if (rng.uniform01() < f) return rng.next() & 1 ? 1 : 0;
  return bit;
}

double rr_eps_word(double f) {
  if (!(f > 0.0 && f <= 1.0)) throw std::invalid_argument("rr_eps_word: f must be in (0,1]");
  return std::log((1.0 - f / 2.0) / (f / 2.0));
}

double rr_f_for_eps(double eps_word) {
  if (!(eps_word >= 0.0)) throw std::invalid_argument("rr_f_for_eps: eps must be >= 0");
  return 2.0 / (std::exp(eps_word) + 1.0);
}

double inherent_eps_replaced(const std::vector<std::pair<double, double>>& counts,
                             double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("inherent_eps_replaced: beta must be > 0");
  if (counts.empty())
    throw std::invalid_argument("inherent_eps_replaced: need at least one topic");
  double worst = 0.0;
  for (const auto& [after, before] : counts) {
    if (after < 0.0 || before < 0.0)
      throw std::invalid_argument("inherent_eps_replaced: counts must be >= 0");
    const double r = std::fabs(std::log((after + beta) / (before + beta)));
    if (r > worst) worst = r;
  }
  return 2.0 * worst;
}

double inherent_eps_related(double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("inherent_eps_related: beta must be > 0");
  return 2.0 * std::log(1.0 + 1.0 / beta);
}

double inherent_eps_iteration(double max_count, double max_word_total,
                              double replaced_word_total, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("inherent_eps_iteration: beta must be > 0");
  if (max_count < 0.0 || max_word_total < 0.0)
    throw std::invalid_argument("inherent_eps_iteration: counts must be >= 0");
  if (replaced_word_total < 1.0)
    throw std::invalid_argument(
        "inherent_eps_iteration: replaced word must occur at least once");
  return 2.0 * (std::log(max_count / beta + 1.0) +
                (max_word_total + replaced_word_total - 1.0) * std::log(1.0 + 1.0 / beta));
}

double inherent_eps_total(const std::vector<std::vector<double>>& per_word) {
  double worst = 0.0;
  for (const auto& iters : per_word) {
    double s = 0.0;
    for (double e : iters) s += e;
    if (s > worst) worst = s;
  }
  return worst;
}

double clipped_inherent_eps(double C, double beta) {
  if (!(C > 0.0)) throw std::invalid_argument("clipped_inherent_eps: C must be > 0");
  if (!(beta > 0.0)) throw std::invalid_argument("clipped_inherent_eps: beta must be > 0");
  return 2.0 * std::log(C / beta + 1.0);
}

namespace {

// JSON has no inf; report unbounded losses as a string marker
nlohmann::json eps_value(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : "-inf";
}

}  // namespace

std::string PrivacyReport::to_json() const {
  nlohmann::json j;
  j["mechanism"] = mechanism;
  nlohmann::json p = nlohmann::json::object();
  for (const auto& [k, v] : params) p[k] = eps_value(v);
  j["params"] = p;
  nlohmann::json per = nlohmann::json::array();
  for (double e : per_iteration) per.push_back(eps_value(e));
  j["per_iteration"] = per;
  j["total_epsilon"] = eps_value(total_epsilon);
  return j.dump(2) + "\n";
}

namespace {

double eps_from(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw std::runtime_error("PrivacyReport: bad epsilon value '" + s + "'");
  }
  return j.get<double>();
}

}  // namespace

PrivacyReport PrivacyReport::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  PrivacyReport r;
  r.mechanism = j.at("mechanism").get<std::string>();
  for (const auto& [k, v] : j.at("params").items()) r.params[k] = eps_from(v);
  for (const auto& v : j.at("per_iteration")) r.per_iteration.push_back(eps_from(v));
  r.total_epsilon = eps_from(j.at("total_epsilon"));
  return r;
}

}  // namespace dplda
