#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aepo/env.hpp"
#include "aepo/protocol.hpp"
#include "aepo/rng.hpp"

// Linear-scorer policy over screen elements.
//
//   score_j = sum_t w_t * (instruction_t * feature_{j,t})
//
// A rollout draws an answer count N from a softmax over logits
// l_n = u_n + v_n * H, where H is the entropy of the tempered score softmax
// (so v couples "how many answers" to "how unsure the scorer is"), then picks
// N distinct elements by sequential softmax sampling without replacement and
// answers with their box centers, in draw order.
namespace aepo::policy {

struct PolicyParams {
  std::vector<double> w;  // feature weights, one per feature dim
  std::vector<double> u;  // count-head logits, one per possible count
  std::vector<double> v;  // count-head entropy couplings, same length as u
};

PolicyParams default_init(int feature_dim, int n_max);

struct Rollout {
  int n = 0;
  std::vector<int> element_ranks;  // chosen element indices, in draw order
  protocol::CandidateSet candidates;
  std::string response;
  double logp = 0.0;
  double temperature = 1.0;
  // True when the count was imposed (single-answer baselines); the count head
  // then contributes neither probability mass nor gradient.
  bool forced_n = false;
};

// Throws DimensionError when params don't match the task's feature dim.
std::vector<double> element_scores(const PolicyParams& params,
                                   const env::Task& task);

// Entropy of softmax(scores / temperature), in nats.
double score_entropy(const std::vector<double>& scores, double temperature);

// P(N = n) for n = 1..min(n_max, M); the support is clamped to the number of
// scored elements and renormalized.
std::vector<double> count_distribution(const PolicyParams& params,
                                       const std::vector<double>& scores,
                                       double temperature);

int sample_count(const PolicyParams& params, const std::vector<double>& scores,
                 double temperature, rng::Engine& rng);

Rollout sample_rollout(const PolicyParams& params, const env::Task& task,
                       double temperature, rng::Engine& rng,
                       std::optional<int> forced_n = std::nullopt);

// Exact log-probability of a recorded rollout under params. Throws
// InfeasibleRollout on malformed rollouts (repeated or out-of-range indices,
// count outside the support).
double log_prob(const PolicyParams& params, const env::Task& task,
                const Rollout& rollout);

// Analytic gradient of log_prob with respect to (w, u, v), returned in the
// same shapes.
PolicyParams grad_log_prob(const PolicyParams& params, const env::Task& task,
                           const Rollout& rollout);

// Deterministic decode: center of the highest-scoring element (lowest index
// wins ties).
geometry::Point greedy_first_answer(const PolicyParams& params,
                                    const env::Task& task);

// JSON round trip: {"w":[...],"u":[...],"v":[...]} at full precision.
std::string params_to_json(const PolicyParams& params);
PolicyParams params_from_json(const std::string& text);
void save_params(const std::string& path, const PolicyParams& params);
PolicyParams load_params(const std::string& path);

}  // namespace aepo::policy
