#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aepo/env.hpp"
#include "aepo/trainer.hpp"

namespace aepo::cli {

struct DatasetSettings {
  int count = 2000;
  std::uint64_t seed = 7;
};

struct EvalSettings {
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  double temperature = 1.0;
  std::vector<int> pass_k_values{1, 2, 4};
  std::uint64_t label_seed = 1234;
  int label_trials = 16;
};

// One experiment document: environment, training, dataset and evaluation
// settings plus the output directory. Loaded from JSON; unknown keys are
// rejected and every field is range-checked on load.
struct ExperimentConfig {
  env::EnvConfig env;
  trainer::TrainConfig train;
  DatasetSettings dataset;
  EvalSettings eval;
  std::string output_dir = "out";
};

ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Reward/rollout variants for the ablation study. Every variant is plain
// configuration of the trainer; no separate training code paths exist.
enum class AblationVariant {
  full,
  no_multi_answer,  // single-answer rollouts, hit/miss reward
  no_aer,           // multi-answer but flat +1/-1 accuracy
  no_rank_factor,   // success pays 1/sqrt(N) regardless of rank
  no_collinear,     // collinear override disabled
};

const std::vector<AblationVariant>& all_ablation_variants();
const char* ablation_variant_name(AblationVariant variant);
trainer::TrainConfig apply_variant(trainer::TrainConfig cfg,
                                   AblationVariant variant);

}  // namespace aepo::cli
