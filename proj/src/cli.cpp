#include "aepo/cli.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aepo/errors.hpp"
#include "aepo/metrics.hpp"
#include "aepo/parallel.hpp"
#include "aepo/policy.hpp"
#include "aepo/reward.hpp"
#include "aepo/rng.hpp"
#include "aepo/text.hpp"

namespace aepo::cli {
namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kLabelSalt = 0x6c61626cULL;  // difficulty labeling
constexpr std::uint64_t kExplSalt = 0x65766578ULL;   // eval exploration runs
constexpr std::uint64_t kPassSalt = 0x65767061ULL;   // eval pass@k runs

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create output directory " + dir + ": " +
                  ec.message());
  }
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << content;
  out.flush();
  if (!out) throw IoError("failed to write: " + path);
}

std::vector<env::Task> read_tasks_checked(const std::string& path) {
  std::vector<env::Task> tasks = env::read_tasks_jsonl(path);
  if (tasks.empty()) throw EmptyDataset("no tasks in " + path);
  return tasks;
}

int feature_dim_of(const std::vector<env::Task>& tasks) {
  return static_cast<int>(tasks.front().instruction.size());
}

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// Labels every task by sampling single answers from the base policy; each
// task reads from its own stream so labels don't depend on dataset order.
std::vector<std::pair<env::Task, env::DifficultyLabel>> label_tasks(
    const std::vector<env::Task>& tasks, const policy::PolicyParams& base,
    std::uint64_t label_seed, int trials) {
  auto sampler = [&base](const env::Task& t, rng::Engine& g) {
    return policy::sample_rollout(base, t, 1.0, g, 1).candidates.front();
  };
  std::vector<std::pair<env::Task, env::DifficultyLabel>> labeled(tasks.size());
  par::parallel_for(tasks.size(), [&](std::size_t i) {
    rng::Engine g = rng::make_engine(label_seed, kLabelSalt, i);
    labeled[i] = {tasks[i],
                  env::label_difficulty(tasks[i], sampler, trials, g)};
  });
  return labeled;
}

}  // namespace

void cmd_generate(const ExperimentConfig& cfg, const std::string& out_dir) {
  ensure_dir(out_dir);
  const std::vector<env::Task> tasks =
      env::generate_dataset(cfg.dataset.seed, cfg.dataset.count, cfg.env);
  const std::string path = out_dir + "/tasks.jsonl";
  env::write_tasks_jsonl(path, tasks);
  int traps = 0;
  for (const env::Task& task : tasks) {
    if (task.trap_gap > 0.0) ++traps;
  }
  const double trap_fraction =
      static_cast<double>(traps) / static_cast<double>(tasks.size());
  std::cout << "wrote " << tasks.size() << " tasks to " << path
            << " (trap fraction " << text::format_double(trap_fraction)
            << ")\n";
}

void cmd_train(const ExperimentConfig& cfg, const std::string& tasks_path,
               const std::string& out_dir,
               const std::optional<std::string>& init_params_path) {
  ensure_dir(out_dir);
  const std::vector<env::Task> tasks = read_tasks_checked(tasks_path);
  const policy::PolicyParams init =
      init_params_path
          ? policy::load_params(*init_params_path)
          : policy::default_init(feature_dim_of(tasks), cfg.train.n_max);
  const trainer::TrainResult result = trainer::train(cfg.train, tasks, init);

  const std::string params_path = out_dir + "/params.json";
  const std::string log_path = out_dir + "/training_log.csv";
  policy::save_params(params_path, result.params);
  write_text_file(log_path, result.log.to_csv());

  const std::size_t steps = result.log.rows.size();
  const double final_reward =
      steps == 0 ? 0.0 : result.log.rows.back().mean_reward;
  std::cout << "trained " << steps << " steps, final mean reward "
            << text::format_double(final_reward) << "\n"
            << "wrote " << params_path << "\n"
            << "wrote " << log_path << "\n";
}

void cmd_eval(const ExperimentConfig& cfg, const std::string& params_path,
              const std::string& tasks_path, const std::string& out_dir,
              const std::optional<std::string>& base_params_path) {
  ensure_dir(out_dir);
  const std::vector<env::Task> tasks = read_tasks_checked(tasks_path);
  const policy::PolicyParams params = policy::load_params(params_path);
  const policy::PolicyParams base =
      base_params_path
          ? policy::load_params(*base_params_path)
          : policy::default_init(feature_dim_of(tasks), cfg.train.n_max);

  metrics::EvalReport report;
  report.runs = static_cast<int>(cfg.eval.seeds.size());
  report.accuracy = metrics::accuracy(params, tasks);

  // Greedy decoding is seed-independent, so the spread across runs is zero by
  // construction; the field still goes through the shared sigma path so a
  // single-run report omits it.
  if (cfg.eval.seeds.size() >= 2) {
    report.sigma = metrics::multi_run_sigma(
                       [&](std::uint64_t) {
                         return metrics::accuracy(params, tasks);
                       },
                       cfg.eval.seeds)
                       .second;
  }

  double expl_sum = 0.0;
  double n_sum = 0.0;
  for (std::uint64_t seed : cfg.eval.seeds) {
    rng::Engine g = rng::make_engine(seed, kExplSalt);
    const metrics::ExplorationStats stats = metrics::exploration_success_rate(
        params, tasks, cfg.eval.temperature, g);
    expl_sum += stats.success_rate;
    n_sum += stats.avg_n;
  }
  report.expl_success = expl_sum / static_cast<double>(cfg.eval.seeds.size());
  report.avg_n = n_sum / static_cast<double>(cfg.eval.seeds.size());

  for (int k : cfg.eval.pass_k_values) {
    double sum = 0.0;
    for (std::uint64_t seed : cfg.eval.seeds) {
      // Fresh engine per (seed, k) with one salt: every k sees the same
      // attempt streams, which keeps pass@k exactly non-decreasing in k.
      rng::Engine g = rng::make_engine(seed, kPassSalt);
      sum += metrics::pass_at_k(params, tasks, k, cfg.eval.temperature, g);
    }
    report.pass_at_k[k] = sum / static_cast<double>(cfg.eval.seeds.size());
  }

  const auto labeled =
      label_tasks(tasks, base, cfg.eval.label_seed, cfg.eval.label_trials);
  for (const auto& [label, acc] : metrics::difficulty_breakdown(params,
                                                                labeled)) {
    report.per_difficulty[env::difficulty_name(label)] = acc;
  }

  int prev_k = 0;
  double prev_v = -1.0;
  for (const auto& [k, v] : report.pass_at_k) {
    if (k > prev_k && v + 1e-12 < prev_v) {
      throw std::logic_error("report invariant violated: pass@" +
                             std::to_string(k) + " decreased");
    }
    prev_k = k;
    prev_v = v;
  }

  const std::string json_path = out_dir + "/report.json";
  const std::string csv_path = out_dir + "/report.csv";
  write_text_file(json_path, report.to_json());
  write_text_file(csv_path, report.to_csv());
  std::cout << "accuracy " << text::format_double(report.accuracy)
            << ", exploration success "
            << text::format_double(report.expl_success) << ", avg answers "
            << text::format_double(report.avg_n) << "\n"
            << "wrote " << json_path << "\n"
            << "wrote " << csv_path << "\n";
}

void cmd_ablate(const ExperimentConfig& cfg, const std::string& tasks_path,
                const std::optional<std::string>& eval_tasks_path,
                const std::string& out_dir) {
  ensure_dir(out_dir);
  const std::vector<env::Task> tasks = read_tasks_checked(tasks_path);
  const std::vector<env::Task> eval_tasks =
      eval_tasks_path ? read_tasks_checked(*eval_tasks_path) : tasks;
  const policy::PolicyParams init =
      policy::default_init(feature_dim_of(tasks), cfg.train.n_max);

  std::string csv = "variant,accuracy,expl_success,avg_n\n";
  for (AblationVariant variant : all_ablation_variants()) {
    std::vector<double> acc;
    std::vector<double> expl;
    std::vector<double> avg_n;
    for (std::uint64_t seed : cfg.eval.seeds) {
      trainer::TrainConfig train_cfg = apply_variant(cfg.train, variant);
      train_cfg.seed = seed;
      const trainer::TrainResult result =
          trainer::train(train_cfg, tasks, init);
      acc.push_back(metrics::accuracy(result.params, eval_tasks));
      rng::Engine g = rng::make_engine(seed, kExplSalt);
      const metrics::ExplorationStats stats =
          metrics::exploration_success_rate(result.params, eval_tasks,
                                            cfg.eval.temperature, g);
      expl.push_back(stats.success_rate);
      avg_n.push_back(stats.avg_n);
    }
    csv += ablation_variant_name(variant);
    csv += ',';
    csv += text::format_double(median(acc));
    csv += ',';
    csv += text::format_double(median(expl));
    csv += ',';
    csv += text::format_double(median(avg_n));
    csv += '\n';
  }

  const std::string path = out_dir + "/ablation.csv";
  write_text_file(path, csv);
  std::cout << csv << "wrote " << path << "\n";
}

void cmd_reward_curve(const std::vector<int>& n_values, int k_max,
                      const std::string& out_dir) {
  ensure_dir(out_dir);
  const std::vector<reward::RewardCurveRow> rows =
      reward::reward_curve(n_values, k_max);
  const std::string path = out_dir + "/reward_curve.csv";
  write_text_file(path, reward::reward_curve_csv(rows));
  std::cout << "wrote " << path << "\n";
}

void cmd_replay(const ExperimentConfig& cfg, const std::string& tasks_path,
                const std::string& responses_path,
                const std::string& out_dir) {
  ensure_dir(out_dir);
  const std::vector<env::Task> tasks = read_tasks_checked(tasks_path);

  std::ifstream in(responses_path);
  if (!in) throw IoError("cannot open responses file: " + responses_path);
  std::vector<std::string> responses;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || j.size() != 1 ||
        !j.contains("response") || !j["response"].is_string()) {
      throw SchemaError(responses_path + ":" + std::to_string(line_no) +
                        ": expected {\"response\": string}");
    }
    responses.push_back(j["response"].get<std::string>());
  }
  if (in.bad()) throw IoError("failed to read: " + responses_path);

  if (responses.size() != tasks.size()) {
    throw SchemaError("count mismatch: " + std::to_string(tasks.size()) +
                      " tasks but " + std::to_string(responses.size()) +
                      " responses");
  }

  const reward::ShapingOptions opts = trainer::shaping_options(cfg.train);
  std::string out;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const env::Task& task = tasks[i];
    const reward::RewardBreakdown b = reward::total_reward(
        responses[i],
        task.elements[static_cast<std::size_t>(task.target)].bbox, opts);
    nlohmann::json j;
    j["format"] = b.format;
    j["accuracy"] = b.accuracy;
    j["total"] = b.total;
    j["collinear"] = b.collinear;
    j["rank"] = b.rank ? nlohmann::json(*b.rank) : nlohmann::json(nullptr);
    j["n"] = b.n;
    j["success"] = b.success;
    out += j.dump();
    out += '\n';
  }

  const std::string path = out_dir + "/rewards.jsonl";
  write_text_file(path, out);
  std::cout << "scored " << tasks.size() << " responses\n"
            << "wrote " << path << "\n";
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"aepo-lab: adaptive-exploration policy training on synthetic "
               "GUI grounding tasks"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  std::uint64_t seed_override = 0;
  std::string tasks_path;
  std::string eval_tasks_path;
  std::string params_path;
  std::string base_params_path;
  std::string init_params_path;
  std::string responses_path;
  std::vector<int> curve_n_values{1, 2, 3, 4, 6, 8};
  int curve_k_max = 8;

  std::vector<CLI::Option*> seed_opts;
  auto add_common = [&](CLI::App* cmd, bool config_required) {
    CLI::Option* config_opt =
        cmd->add_option("--config", config_path, "experiment config (JSON)");
    if (config_required) config_opt->required();
    seed_opts.push_back(cmd->add_option(
        "--seed", seed_override, "override dataset/train/eval seeds"));
    cmd->add_option("--out", out_override, "output directory");
    return cmd;
  };

  CLI::App* gen = add_common(
      app.add_subcommand("generate", "sample a task dataset (tasks.jsonl)"),
      true);
  CLI::App* train = add_common(
      app.add_subcommand("train",
                         "train a policy (params.json, training_log.csv)"),
      true);
  train->add_option("--tasks", tasks_path, "task dataset (JSONL)");
  train->add_option("--init-params", init_params_path,
                    "starting parameters (JSON)");
  CLI::App* eval = add_common(
      app.add_subcommand("eval", "evaluate a policy (report.json, report.csv)"),
      true);
  eval->add_option("--tasks", tasks_path, "task dataset (JSONL)");
  eval->add_option("--params", params_path, "policy parameters (JSON)");
  eval->add_option("--base-params", base_params_path,
                   "base policy for difficulty labels (JSON)");
  CLI::App* ablate = add_common(
      app.add_subcommand("ablate",
                         "train and evaluate all reward variants "
                         "(ablation.csv)"),
      true);
  ablate->add_option("--tasks", tasks_path, "training task dataset (JSONL)");
  ablate->add_option("--eval-tasks", eval_tasks_path,
                     "held-out evaluation dataset (JSONL)");
  CLI::App* curve = add_common(
      app.add_subcommand("reward-curve",
                         "tabulate the accuracy reward (reward_curve.csv)"),
      false);
  curve->add_option("--n-values", curve_n_values, "answer counts to tabulate");
  curve->add_option("--k-max", curve_k_max, "largest rank to tabulate");
  CLI::App* replay = add_common(
      app.add_subcommand("replay",
                         "score recorded responses against a task dataset "
                         "(rewards.jsonl)"),
      true);
  replay->add_option("--tasks", tasks_path, "task dataset (JSONL)");
  replay->add_option("--responses", responses_path,
                     "JSONL file of {\"response\": string} lines")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    const bool seed_set =
        std::any_of(seed_opts.begin(), seed_opts.end(),
                    [](const CLI::Option* opt) { return opt->count() > 0; });
    if (seed_set) {
      cfg.dataset.seed = seed_override;
      cfg.train.seed = seed_override;
      cfg.eval.seeds = {seed_override};
    }
    const std::string out_dir =
        out_override.empty() ? cfg.output_dir : out_override;
    if (tasks_path.empty()) tasks_path = out_dir + "/tasks.jsonl";
    if (params_path.empty()) params_path = out_dir + "/params.json";

    if (app.got_subcommand(gen)) {
      cmd_generate(cfg, out_dir);
    } else if (app.got_subcommand(train)) {
      cmd_train(cfg, tasks_path, out_dir,
                init_params_path.empty()
                    ? std::nullopt
                    : std::optional<std::string>(init_params_path));
    } else if (app.got_subcommand(eval)) {
      cmd_eval(cfg, params_path, tasks_path, out_dir,
               base_params_path.empty()
                   ? std::nullopt
                   : std::optional<std::string>(base_params_path));
    } else if (app.got_subcommand(ablate)) {
      cmd_ablate(cfg, tasks_path,
                 eval_tasks_path.empty()
                     ? std::nullopt
                     : std::optional<std::string>(eval_tasks_path),
                 out_dir);
    } else if (app.got_subcommand(curve)) {
      cmd_reward_curve(curve_n_values, curve_k_max, out_dir);
    } else if (app.got_subcommand(replay)) {
      cmd_replay(cfg, tasks_path, responses_path, out_dir);
    }
    return 0;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const EmptyAfterFilter& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const NonFiniteGradient& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  } catch (const EmptyDataset& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  } catch (const GroupTooSmall& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  } catch (const TooFewRuns& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace aepo::cli
