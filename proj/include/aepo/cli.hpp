#pragma once

#include <optional>
#include <string>
#include <vector>

#include "aepo/config.hpp"

namespace aepo::cli {

// Command bodies. Each throws on failure (see errors.hpp); run_cli maps
// exceptions to process exit codes. All outputs are deterministic: rerunning
// a command with the same config and inputs produces byte-identical files.
void cmd_generate(const ExperimentConfig& cfg, const std::string& out_dir);

void cmd_train(const ExperimentConfig& cfg, const std::string& tasks_path,
               const std::string& out_dir,
               const std::optional<std::string>& init_params_path = {});

void cmd_eval(const ExperimentConfig& cfg, const std::string& params_path,
              const std::string& tasks_path, const std::string& out_dir,
              const std::optional<std::string>& base_params_path = {});

void cmd_ablate(const ExperimentConfig& cfg, const std::string& tasks_path,
                const std::optional<std::string>& eval_tasks_path,
                const std::string& out_dir);

void cmd_reward_curve(const std::vector<int>& n_values, int k_max,
                      const std::string& out_dir);

void cmd_replay(const ExperimentConfig& cfg, const std::string& tasks_path,
                const std::string& responses_path, const std::string& out_dir);

// Exit codes: 0 success, 2 I/O failure, 3 dataset empty after filtering,
// 4 numeric failure, 5 schema violation or input-count mismatch.
int run_cli(int argc, const char* const* argv);

}  // namespace aepo::cli
