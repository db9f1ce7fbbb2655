#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aepo/env.hpp"
#include "aepo/policy.hpp"
#include "aepo/reward.hpp"

// Policy-gradient training with a per-group leave-one-out baseline: each task
// gets G rollouts, rollout i is weighted by its reward minus the mean reward
// of the other G-1, and parameters move by gradient ascent on the weighted
// log-probabilities.
namespace aepo::trainer {

enum class Mode { aepo, naive };

struct TrainConfig {
  double learning_rate = 0.05;
  int group_size = 8;  // G, rollouts per task
  int batch_size = 32;
  int epochs = 3;
  double temperature = 1.0;
  int n_max = 8;
  double eps_rel = 1e-3;
  std::uint64_t seed = 1;
  Mode mode = Mode::aepo;
  double grad_clip = 0.0;  // L2 clip on the step direction; 0 disables
  // Reward shaping hooks for ablations; defaults are the full method.
  bool collinear_penalty = true;
  reward::SuccessRule success_rule = reward::SuccessRule::aer;
  reward::FailureRule failure_rule = reward::FailureRule::inverse_n;
};

void validate(const TrainConfig& cfg);

reward::ShapingOptions shaping_options(const TrainConfig& cfg);

struct RolloutGroup {
  env::Task task;
  std::vector<policy::Rollout> rollouts;
  std::vector<double> rewards;
  std::vector<double> advantages;
};

// advantage_i = reward_i - mean(rewards of the others). Throws GroupTooSmall
// for fewer than two rewards. The result always sums to zero.
std::vector<double> rloo_advantages(const std::vector<double>& rewards);

// G rollouts of one task plus rewards and advantages. In naive mode the
// count is forced to 1 and the reward is format + (hit ? +1 : -1); in aepo
// mode the full shaping applies to the serialized response.
RolloutGroup evaluate_group(const policy::PolicyParams& params,
                            const env::Task& task, const TrainConfig& cfg,
                            rng::Engine& rng);

// One ascent step over a batch of groups; throws NonFiniteGradient (naming
// the offending group) if any contribution is non-finite.
void policy_gradient_step(policy::PolicyParams& params,
                          const std::vector<RolloutGroup>& groups,
                          const TrainConfig& cfg);

// Drops tasks the base policy already solves: 8 single-answer draws at
// temperature 1; a task is excluded only when all 8 hit the target.
std::vector<env::Task> filter_dataset(const std::vector<env::Task>& tasks,
                                      const policy::PolicyParams& base,
                                      const TrainConfig& cfg,
                                      rng::Engine& rng);

struct TrainStepRow {
  int step = 0;
  int epoch = 0;
  double mean_reward = 0.0;
  double mean_abs_adv = 0.0;
  double expl_success = 0.0;  // rollouts with any correct answer
  double mean_n = 0.0;
};

struct TrainingLog {
  std::vector<TrainStepRow> rows;
  // Exploration success is only meaningful for multi-answer training; the
  // naive baseline's CSV omits the column.
  bool has_expl_success = true;
  std::string to_csv() const;
};

struct TrainResult {
  policy::PolicyParams params;
  TrainingLog log;
};

// Filters once with the initial params, then runs cfg.epochs passes of
// shuffled batches. Throws EmptyAfterFilter when nothing survives the filter.
// Deterministic for a fixed (cfg, dataset, init).
TrainResult train(const TrainConfig& cfg, const std::vector<env::Task>& dataset,
                  const policy::PolicyParams& init);

}  // namespace aepo::trainer
