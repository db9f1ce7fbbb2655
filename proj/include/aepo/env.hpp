#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aepo/errors.hpp"
#include "aepo/geometry.hpp"
#include "aepo/rng.hpp"

// Synthetic grounding tasks: a screen of non-overlapping elements, each with
// a feature vector, plus an instruction vector correlated with the target's
// feature. The feature space is split in two: the low "signal" dims carry the
// instruction correlation, the remaining "bait" dims are only ever used to
// inflate a trap distractor's similarity. A linear scorer can therefore solve
// every trap by discounting the bait dims, but a policy that trusts raw
// similarity starts out confidently wrong on trap tasks.
namespace aepo::env {

struct Element {
  geometry::BBox bbox;
  std::vector<double> feature;
};

enum class Layout { grid, row };

struct Task {
  double width = 0.0;
  double height = 0.0;
  std::vector<Element> elements;
  std::vector<double> instruction;
  int target = 0;
  Layout layout = Layout::grid;
  // Margin by which the trap distractor beats the target in base similarity;
  // 0 means the task has no trap.
  double trap_gap = 0.0;
};

struct EnvConfig {
  double width = 1280.0;
  double height = 800.0;
  int elements = 6;       // M, elements per screen
  int feature_dim = 8;    // d
  double row_prob = 0.4;  // chance of a single-row layout (collinear centers)
  double trap_prob = 0.4;
  double trap_gap = 10.0;         // similarity margin of the trap distractor
  double trap_gap_jitter = 0.4;   // applied gap ~ trap_gap * (1 + U[0,1]*jitter)
  double target_margin = 8.0;     // margin of the target over distractors
  double margin_jitter = 0.3;     // applied ~ target_margin * (1 + U[-1,1]*jitter)
};

// Throws ConfigError on out-of-range fields.
void validate(const EnvConfig& cfg);

// dot(instruction, feature of element j); the "confidence" a similarity
// scorer assigns before any learning.
double base_similarity(const Task& task, int j);

Task generate_task(rng::Engine& rng, const EnvConfig& cfg);

// Each task is drawn from its own stream derived from (seed, index), so
// dataset[i] does not depend on count and generation parallelizes cleanly.
std::vector<Task> generate_dataset(std::uint64_t seed, int count,
                                   const EnvConfig& cfg);

enum class DifficultyLabel { easy, middle, hard };

const char* difficulty_name(DifficultyLabel label);

// Labels a task by sampling `trials` single answers from a policy callable
// (signature: geometry::Point(const Task&, rng::Engine&)): every trial a hit
// -> easy, none -> hard, otherwise middle.
template <class Sampler>
DifficultyLabel label_difficulty(const Task& task, Sampler&& sample_answer,
                                 int trials, rng::Engine& rng) {
  int hits = 0;
  for (int t = 0; t < trials; ++t) {
    const geometry::Point p = sample_answer(task, rng);
    if (geometry::point_in_bbox(p, task.elements[static_cast<std::size_t>(
                                       task.target)].bbox)) {
      ++hits;
    }
  }
  if (hits == trials) return DifficultyLabel::easy;
  if (hits == 0) return DifficultyLabel::hard;
  return DifficultyLabel::middle;
}

// JSONL round trip. Coordinates and features survive bit-exactly.
std::string task_to_json_line(const Task& task);
Task task_from_json_line(const std::string& line);
void write_tasks_jsonl(const std::string& path, const std::vector<Task>& tasks);
std::vector<Task> read_tasks_jsonl(const std::string& path);

}  // namespace aepo::env
