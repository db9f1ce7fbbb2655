#include "aepo/policy.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "aepo/errors.hpp"

namespace aepo::policy {

namespace {

// softmax(values / temperature) with max subtraction.
std::vector<double> tempered_softmax(const std::vector<double>& values,
                                     double temperature) {
  std::vector<double> probs(values.size());
  const double top = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    probs[i] = std::exp((values[i] - top) / temperature);
    sum += probs[i];
  }
  for (auto& p : probs) p /= sum;
  return probs;
}

// log(sum exp(z_i)) over the subset `live` of z (1/temperature pre-applied).
double logsumexp_subset(const std::vector<double>& z,
                        const std::vector<int>& live) {
  double top = -std::numeric_limits<double>::infinity();
  for (const int j : live) top = std::max(top, z[static_cast<std::size_t>(j)]);
  double sum = 0.0;
  for (const int j : live) {
    sum += std::exp(z[static_cast<std::size_t>(j)] - top);
  }
  return top + std::log(sum);
}

int count_support(const PolicyParams& params, std::size_t m) {
  return static_cast<int>(std::min(params.u.size(), m));
}

void check_params(const PolicyParams& params, const env::Task& task) {
  if (params.w.size() != task.instruction.size()) {
    throw DimensionError("w has " + std::to_string(params.w.size()) +
                         " weights but the task features have " +
                         std::to_string(task.instruction.size()) + " dims");
  }
  if (params.u.empty() || params.u.size() != params.v.size()) {
    throw DimensionError("count head needs matching non-empty u and v");
  }
}

void check_rollout(const Rollout& rollout, std::size_t m, int support) {
  const std::size_t n = rollout.element_ranks.size();
  if (n == 0 || static_cast<int>(n) != rollout.n) {
    throw InfeasibleRollout("rollout count does not match its selections");
  }
  const int cap = rollout.forced_n ? static_cast<int>(m) : support;
  if (rollout.n > cap) {
    throw InfeasibleRollout("rollout count outside the policy support");
  }
  std::vector<bool> seen(m, false);
  for (const int j : rollout.element_ranks) {
    if (j < 0 || j >= static_cast<int>(m) || seen[static_cast<std::size_t>(j)]) {
      throw InfeasibleRollout("rollout selections must be distinct elements");
    }
    seen[static_cast<std::size_t>(j)] = true;
  }
  if (!(rollout.temperature > 0.0)) {
    throw InfeasibleRollout("rollout temperature must be positive");
  }
}

std::vector<double> count_logits(const PolicyParams& params, int support,
                                 double entropy) {
  std::vector<double> logits(static_cast<std::size_t>(support));
  for (int i = 0; i < support; ++i) {
    logits[static_cast<std::size_t>(i)] =
        params.u[static_cast<std::size_t>(i)] +
        params.v[static_cast<std::size_t>(i)] * entropy;
  }
  return logits;
}

}  // namespace

PolicyParams default_init(int feature_dim, int n_max) {
  PolicyParams p;
  p.w.assign(static_cast<std::size_t>(feature_dim), 1.0);
  p.u.assign(static_cast<std::size_t>(n_max), 0.0);
  p.v.assign(static_cast<std::size_t>(n_max), 0.0);
  return p;
}

std::vector<double> element_scores(const PolicyParams& params,
                                   const env::Task& task) {
  check_params(params, task);
  const std::size_t d = params.w.size();
  std::vector<double> scores(task.elements.size(), 0.0);
  for (std::size_t j = 0; j < task.elements.size(); ++j) {
    const auto& f = task.elements[j].feature;
    if (f.size() != d) {
      throw DimensionError("element feature dim mismatch");
    }
    double s = 0.0;
    for (std::size_t t = 0; t < d; ++t) {
      s += params.w[t] * task.instruction[t] * f[t];
    }
    scores[j] = s;
  }
  return scores;
}

double score_entropy(const std::vector<double>& scores, double temperature) {
  assert(temperature > 0.0);
  const auto probs = tempered_softmax(scores, temperature);
  double h = 0.0;
  for (const double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

std::vector<double> count_distribution(const PolicyParams& params,
                                       const std::vector<double>& scores,
                                       double temperature) {
  if (params.u.empty() || params.u.size() != params.v.size()) {
    throw DimensionError("count head needs matching non-empty u and v");
  }
  const int support = count_support(params, scores.size());
  const double h = score_entropy(scores, temperature);
  return tempered_softmax(count_logits(params, support, h), 1.0);
}

int sample_count(const PolicyParams& params, const std::vector<double>& scores,
                 double temperature, rng::Engine& rng) {
  return rng::next_categorical(
             rng, count_distribution(params, scores, temperature)) +
         1;
}

Rollout sample_rollout(const PolicyParams& params, const env::Task& task,
                       double temperature, rng::Engine& rng,
                       std::optional<int> forced_n) {
  assert(temperature > 0.0);
  const auto scores = element_scores(params, task);
  const int m = static_cast<int>(scores.size());

  Rollout rollout;
  rollout.temperature = temperature;
  if (forced_n.has_value()) {
    if (*forced_n < 1 || *forced_n > m) {
      throw InfeasibleRollout("forced count outside [1, M]");
    }
    rollout.forced_n = true;
    rollout.n = *forced_n;
  } else {
    rollout.n = sample_count(params, scores, temperature, rng);
  }

  // Sequential softmax sampling without replacement.
  std::vector<int> live(scores.size());
  std::iota(live.begin(), live.end(), 0);
  std::vector<double> live_scores = scores;
  for (int step = 0; step < rollout.n; ++step) {
    const auto probs = tempered_softmax(live_scores, temperature);
    const int pick = rng::next_categorical(rng, probs);
    rollout.element_ranks.push_back(live[static_cast<std::size_t>(pick)]);
    live.erase(live.begin() + pick);
    live_scores.erase(live_scores.begin() + pick);
  }

  rollout.candidates.reserve(rollout.element_ranks.size());
  for (const int j : rollout.element_ranks) {
    rollout.candidates.push_back(
        geometry::bbox_center(task.elements[static_cast<std::size_t>(j)].bbox));
  }
  rollout.response = protocol::serialize_response({"", rollout.candidates});
  rollout.logp = log_prob(params, task, rollout);
  return rollout;
}

double log_prob(const PolicyParams& params, const env::Task& task,
                const Rollout& rollout) {
  const auto scores = element_scores(params, task);
  const std::size_t m = scores.size();
  const int support = count_support(params, m);
  check_rollout(rollout, m, support);

  const double t = rollout.temperature;
  double logp = 0.0;
  if (!rollout.forced_n) {
    const double h = score_entropy(scores, t);
    const auto logits = count_logits(params, support, h);
    std::vector<int> all(logits.size());
    std::iota(all.begin(), all.end(), 0);
    logp += logits[static_cast<std::size_t>(rollout.n - 1)] -
            logsumexp_subset(logits, all);
  }

  std::vector<double> z(m);
  for (std::size_t j = 0; j < m; ++j) z[j] = scores[j] / t;
  std::vector<int> live(m);
  std::iota(live.begin(), live.end(), 0);
  for (const int a : rollout.element_ranks) {
    logp += z[static_cast<std::size_t>(a)] - logsumexp_subset(z, live);
    live.erase(std::find(live.begin(), live.end(), a));
  }
  return logp;
}

PolicyParams grad_log_prob(const PolicyParams& params, const env::Task& task,
                           const Rollout& rollout) {
  const auto scores = element_scores(params, task);
  const std::size_t m = scores.size();
  const std::size_t d = params.w.size();
  const int support = count_support(params, m);
  check_rollout(rollout, m, support);
  const double t = rollout.temperature;

  PolicyParams grad;
  grad.w.assign(d, 0.0);
  grad.u.assign(params.u.size(), 0.0);
  grad.v.assign(params.v.size(), 0.0);

  // phi_{j,t} = instruction_t * feature_{j,t}; d score_j / d w_t = phi_{j,t}.
  const auto phi = [&](std::size_t j, std::size_t dim) {
    return task.instruction[dim] * task.elements[j].feature[dim];
  };

  if (!rollout.forced_n) {
    const auto q = tempered_softmax(scores, t);
    double h = 0.0;
    for (const double p : q) {
      if (p > 0.0) h -= p * std::log(p);
    }
    const auto probs = tempered_softmax(count_logits(params, support, h), 1.0);

    // d logP(N) / d l_n is the usual softmax residual; v picks up an extra
    // factor H, and the path through H itself flows back into w.
    double dh_weight = rollout.n <= support
                           ? params.v[static_cast<std::size_t>(rollout.n - 1)]
                           : 0.0;
    for (int i = 0; i < support; ++i) {
      const double residual =
          (i == rollout.n - 1 ? 1.0 : 0.0) - probs[static_cast<std::size_t>(i)];
      grad.u[static_cast<std::size_t>(i)] += residual;
      grad.v[static_cast<std::size_t>(i)] += residual * h;
      dh_weight -= probs[static_cast<std::size_t>(i)] *
                   params.v[static_cast<std::size_t>(i)];
    }
    // dH/dz_j = -q_j (ln q_j + H), with z = scores / temperature.
    for (std::size_t j = 0; j < m; ++j) {
      if (q[j] <= 0.0) continue;
      const double dh_dz = -q[j] * (std::log(q[j]) + h);
      const double coef = dh_weight * dh_dz / t;
      for (std::size_t dim = 0; dim < d; ++dim) {
        grad.w[dim] += coef * phi(j, dim);
      }
    }
  }

  // Selection terms: each draw contributes softmax residuals over the
  // elements still in play.
  std::vector<double> live_scores = scores;
  std::vector<int> live(m);
  std::iota(live.begin(), live.end(), 0);
  for (const int a : rollout.element_ranks) {
    const auto p = tempered_softmax(live_scores, t);
    for (std::size_t idx = 0; idx < live.size(); ++idx) {
      const std::size_t j = static_cast<std::size_t>(live[idx]);
      const double residual = (live[idx] == a ? 1.0 : 0.0) - p[idx];
      const double coef = residual / t;
      for (std::size_t dim = 0; dim < d; ++dim) {
        grad.w[dim] += coef * phi(j, dim);
      }
    }
    const auto it = std::find(live.begin(), live.end(), a);
    const auto offset = it - live.begin();
    live.erase(it);
    live_scores.erase(live_scores.begin() + offset);
  }
  return grad;
}

geometry::Point greedy_first_answer(const PolicyParams& params,
                                    const env::Task& task) {
  const auto scores = element_scores(params, task);
  const std::size_t best = static_cast<std::size_t>(
      std::max_element(scores.begin(), scores.end()) - scores.begin());
  return geometry::bbox_center(task.elements[best].bbox);
}

std::string params_to_json(const PolicyParams& params) {
  const nlohmann::json j = {
      {"w", params.w}, {"u", params.u}, {"v", params.v}};
  return j.dump();
}

PolicyParams params_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw SchemaError("params: invalid JSON");
  }
  for (const auto& key : {"w", "u", "v"}) {
    if (!j.contains(key)) {
      throw SchemaError(std::string("params: missing key '") + key + "'");
    }
  }
  if (j.size() != 3) throw SchemaError("params: unexpected extra keys");
  PolicyParams p;
  try {
    p.w = j.at("w").get<std::vector<double>>();
    p.u = j.at("u").get<std::vector<double>>();
    p.v = j.at("v").get<std::vector<double>>();
  } catch (const nlohmann::json::exception&) {
    throw SchemaError("params: w, u, v must be arrays of numbers");
  }
  if (p.w.empty() || p.u.empty() || p.u.size() != p.v.size()) {
    throw SchemaError("params: bad shapes");
  }
  return p;
}

void save_params(const std::string& path, const PolicyParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << params_to_json(params) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

PolicyParams load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return params_from_json(text);
}

}  // namespace aepo::policy
