#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aepo/env.hpp"
#include "aepo/policy.hpp"

namespace aepo::metrics {

// Fraction of tasks whose greedy first answer hits the target. Deterministic.
// Throws EmptyDataset when tasks is empty.
double accuracy(const policy::PolicyParams& params,
                const std::vector<env::Task>& tasks);

struct ExplorationStats {
  double success_rate = 0.0;  // any answer of the sampled rollout hit
  double avg_n = 0.0;
  // Hit rate of the first answer of the same rollouts; never exceeds
  // success_rate since the first answer is a member of the candidate set.
  double first_answer_accuracy = 0.0;
};

// One stochastic rollout per task. Per-task streams are derived from one
// draw of rng, so results don't depend on evaluation order.
ExplorationStats exploration_success_rate(const policy::PolicyParams& params,
                                          const std::vector<env::Task>& tasks,
                                          double temperature,
                                          rng::Engine& rng);

// k independent single-answer rollouts per task; success when any hits. The
// attempts for smaller k are a prefix of those for larger k, so the metric is
// exactly non-decreasing in k at a fixed rng state.
double pass_at_k(const policy::PolicyParams& params,
                 const std::vector<env::Task>& tasks, int k,
                 double temperature, rng::Engine& rng);

// Greedy accuracy per difficulty label; labels without tasks are absent.
std::map<env::DifficultyLabel, double> difficulty_breakdown(
    const policy::PolicyParams& params,
    const std::vector<std::pair<env::Task, env::DifficultyLabel>>& labeled);

// Mean and sample standard deviation (n-1) of experiment(seed) over seeds.
// Throws TooFewRuns for fewer than two seeds.
std::pair<double, double> multi_run_sigma(
    const std::function<double(std::uint64_t)>& experiment,
    const std::vector<std::uint64_t>& seeds);

struct AdaptiveRow {
  std::string name;
  double accuracy = 0.0;
  double avg_n = 0.0;
};

// Greedy accuracy and sampled answer count per named dataset; shows whether
// the policy spends more answers where it is less accurate.
std::vector<AdaptiveRow> adaptive_n_correlation(
    const policy::PolicyParams& params,
    const std::vector<std::pair<std::string, std::vector<env::Task>>>& datasets,
    double temperature, rng::Engine& rng);

struct EvalReport {
  int schema = 1;
  int runs = 0;
  double accuracy = 0.0;
  std::optional<double> sigma;  // std of accuracy across runs; absent for 1 run
  double expl_success = 0.0;
  double avg_n = 0.0;
  std::map<std::string, double> per_difficulty;
  std::map<int, double> pass_at_k;

  std::string to_json() const;
  std::string to_csv() const;  // one header line + one row
};

}  // namespace aepo::metrics
