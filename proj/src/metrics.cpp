#include "aepo/metrics.hpp"

#include <cmath>

#include <json.hpp>

#include "aepo/errors.hpp"
#include "aepo/parallel.hpp"
#include "aepo/text.hpp"

namespace aepo::metrics {

namespace {

constexpr std::uint64_t kSaltExplore = 0x6578706cull;
constexpr std::uint64_t kSaltPass = 0x70617373ull;

const geometry::BBox& target_box(const env::Task& task) {
  return task.elements[static_cast<std::size_t>(task.target)].bbox;
}

}  // namespace

double accuracy(const policy::PolicyParams& params,
                const std::vector<env::Task>& tasks) {
  if (tasks.empty()) throw EmptyDataset("accuracy needs at least one task");
  std::vector<char> hits(tasks.size(), 0);
  par::parallel_for(tasks.size(), [&](std::size_t i) {
    const auto p = policy::greedy_first_answer(params, tasks[i]);
    hits[i] = geometry::point_in_bbox(p, target_box(tasks[i])) ? 1 : 0;
  });
  double sum = 0.0;
  for (const char h : hits) sum += h;
  return sum / static_cast<double>(tasks.size());
}

ExplorationStats exploration_success_rate(const policy::PolicyParams& params,
                                          const std::vector<env::Task>& tasks,
                                          double temperature,
                                          rng::Engine& rng) {
  if (tasks.empty()) throw EmptyDataset("exploration needs at least one task");
  const std::uint64_t base = rng();
  std::vector<char> any(tasks.size(), 0);
  std::vector<char> first(tasks.size(), 0);
  std::vector<int> counts(tasks.size(), 0);
  par::parallel_for(tasks.size(), [&](std::size_t i) {
    rng::Engine engine = rng::make_engine(base, kSaltExplore, i);
    const auto rollout =
        policy::sample_rollout(params, tasks[i], temperature, engine);
    const auto& box = target_box(tasks[i]);
    counts[i] = rollout.n;
    first[i] =
        geometry::point_in_bbox(rollout.candidates.front(), box) ? 1 : 0;
    for (const auto& p : rollout.candidates) {
      if (geometry::point_in_bbox(p, box)) {
        any[i] = 1;
        break;
      }
    }
  });
  ExplorationStats stats;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    stats.success_rate += any[i];
    stats.first_answer_accuracy += first[i];
    stats.avg_n += counts[i];
  }
  const double inv = 1.0 / static_cast<double>(tasks.size());
  stats.success_rate *= inv;
  stats.first_answer_accuracy *= inv;
  stats.avg_n *= inv;
  // A first-answer hit is an any-answer hit on the same rollout, so this
  // holds exactly; a violation means the aggregation above is broken.
  if (stats.first_answer_accuracy > stats.success_rate) {
    throw std::logic_error("exploration stats: first-answer accuracy above "
                           "any-answer success rate");
  }
  return stats;
}

double pass_at_k(const policy::PolicyParams& params,
                 const std::vector<env::Task>& tasks, int k,
                 double temperature, rng::Engine& rng) {
  if (tasks.empty()) throw EmptyDataset("pass@k needs at least one task");
  if (k < 1) throw ConfigError("pass@k needs k >= 1");
  const std::uint64_t base = rng();
  std::vector<char> solved(tasks.size(), 0);
  par::parallel_for(tasks.size(), [&](std::size_t i) {
    const auto& box = target_box(tasks[i]);
    // One stream per attempt: attempt a is identical for every k >= a.
    for (int a = 0; a < k; ++a) {
      rng::Engine engine =
          rng::make_engine(base, kSaltPass, i, static_cast<std::uint64_t>(a));
      const auto rollout =
          policy::sample_rollout(params, tasks[i], temperature, engine, 1);
      if (geometry::point_in_bbox(rollout.candidates.front(), box)) {
        solved[i] = 1;
        break;
      }
    }
  });
  double sum = 0.0;
  for (const char s : solved) sum += s;
  return sum / static_cast<double>(tasks.size());
}

std::map<env::DifficultyLabel, double> difficulty_breakdown(
    const policy::PolicyParams& params,
    const std::vector<std::pair<env::Task, env::DifficultyLabel>>& labeled) {
  if (labeled.empty()) throw EmptyDataset("breakdown needs at least one task");
  std::map<env::DifficultyLabel, std::pair<double, double>> acc;  // hits, count
  for (const auto& [task, label] : labeled) {
    const auto p = policy::greedy_first_answer(params, task);
    auto& slot = acc[label];
    slot.first += geometry::point_in_bbox(p, target_box(task)) ? 1.0 : 0.0;
    slot.second += 1.0;
  }
  std::map<env::DifficultyLabel, double> out;
  for (const auto& [label, slot] : acc) {
    out[label] = slot.first / slot.second;
  }
  return out;
}

std::pair<double, double> multi_run_sigma(
    const std::function<double(std::uint64_t)>& experiment,
    const std::vector<std::uint64_t>& seeds) {
  if (seeds.size() < 2) throw TooFewRuns("need at least two runs for sigma");
  std::vector<double> values;
  values.reserve(seeds.size());
  for (const auto seed : seeds) values.push_back(experiment(seed));
  double mean = 0.0;
  for (const double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  bool constant = true;
  for (const double v : values) constant = constant && v == values.front();
  // Identical runs have sigma exactly 0; skip the subtraction, whose
  // rounding would otherwise leave ~1e-16 of noise in reports.
  if (constant) return {values.front(), 0.0};
  double ss = 0.0;
  for (const double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

std::vector<AdaptiveRow> adaptive_n_correlation(
    const policy::PolicyParams& params,
    const std::vector<std::pair<std::string, std::vector<env::Task>>>& datasets,
    double temperature, rng::Engine& rng) {
  std::vector<AdaptiveRow> rows;
  rows.reserve(datasets.size());
  for (const auto& [name, tasks] : datasets) {
    AdaptiveRow row;
    row.name = name;
    row.accuracy = accuracy(params, tasks);
    row.avg_n =
        exploration_success_rate(params, tasks, temperature, rng).avg_n;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string EvalReport::to_json() const {
  nlohmann::json j{
      {"schema", schema},
      {"runs", runs},
      {"accuracy", accuracy},
      {"expl_success", expl_success},
      {"avg_n", avg_n},
      {"per_difficulty", per_difficulty},
      {"pass_at_k", nlohmann::json::object()},
  };
  if (sigma.has_value()) j["sigma"] = *sigma;
  for (const auto& [k, v] : pass_at_k) {
    j["pass_at_k"][text::format_int(k)] = v;
  }
  return j.dump();
}

std::string EvalReport::to_csv() const {
  std::string header = "schema,runs,accuracy,sigma,expl_success,avg_n";
  std::string row = text::format_int(schema);
  row += ',';
  row += text::format_int(runs);
  row += ',';
  row += text::format_double(accuracy);
  row += ',';
  if (sigma.has_value()) row += text::format_double(*sigma);
  row += ',';
  row += text::format_double(expl_success);
  row += ',';
  row += text::format_double(avg_n);
  for (const char* name : {"easy", "middle", "hard"}) {
    header += ",acc_";
    header += name;
    row += ',';
    const auto it = per_difficulty.find(name);
    if (it != per_difficulty.end()) row += text::format_double(it->second);
  }
  for (const auto& [k, v] : pass_at_k) {
    header += ",pass_at_" + text::format_int(k);
    row += ',';
    row += text::format_double(v);
  }
  return header + "\n" + row + "\n";
}

}  // namespace aepo::metrics
