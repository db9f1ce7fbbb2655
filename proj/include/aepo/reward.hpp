#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aepo/geometry.hpp"
#include "aepo/protocol.hpp"

// Scoring of one response against the ground-truth box. The total is
// format + accuracy, where format is 0/1 and accuracy for a parsed set of N
// answers is
//
//   1/sqrt(N*k)  when the first hit is at 1-based rank k,
//   -1/N         when no answer hits,
//   -1           when the answer points are collinear (checked before the
//                rank search, so a collinear set is penalized even if it
//                covers the target).
//
// A response that fails to parse scores 0 everywhere. The success value
// decreases in both N and k, so exploration is paid for and early correct
// answers are worth more; the failure value softens with N, so a wrong
// wide guess costs less than a wrong confident one.
namespace aepo::reward {

using geometry::BBox;
using geometry::Point;
using protocol::CandidateSet;

struct RewardBreakdown {
  int format = 0;
  double accuracy = 0.0;
  double total = 0.0;
  bool collinear = false;
  std::optional<int> rank;  // 1-based rank of the first hit
  int n = 0;                // answers in the parsed set (0 if parsing failed)
  bool success = false;
};

// Ablation hooks; the default options reproduce the shaping described above.
enum class SuccessRule {
  aer,          // 1/sqrt(N*k)
  ignore_rank,  // 1/sqrt(N)
  flat_one,     // 1
};

enum class FailureRule {
  inverse_n,       // -1/N
  flat_minus_one,  // -1
};

struct ShapingOptions {
  int n_max = 8;
  double eps_rel = 1e-3;
  bool collinear_penalty = true;
  SuccessRule success_rule = SuccessRule::aer;
  FailureRule failure_rule = FailureRule::inverse_n;
};

std::optional<int> find_first_correct_rank(const CandidateSet& candidates,
                                           const BBox& target);

// Accuracy term alone, without the collinear override.
double aer_accuracy(const CandidateSet& candidates, const BBox& target);

RewardBreakdown total_reward(std::string_view response, const BBox& target,
                             const ShapingOptions& opts);
RewardBreakdown total_reward(std::string_view response, const BBox& target,
                             int n_max = 8, double eps_rel = 1e-3);

// Single-answer baseline: +1 on a hit, -1 otherwise.
double naive_reward(const Point& p, const BBox& target);

// Tabulated accuracy values: for each N one failure row with k = 0 and value
// -1/N, then success rows for k = 1..min(k_max, N).
struct RewardCurveRow {
  int n = 0;
  int k = 0;
  double reward = 0.0;
};

std::vector<RewardCurveRow> reward_curve(const std::vector<int>& n_values,
                                         int k_max);

// CSV with header "N,k,reward".
std::string reward_curve_csv(const std::vector<RewardCurveRow>& rows);

}  // namespace aepo::reward
