#include "aepo/reward.hpp"

#include <cassert>
#include <cmath>

#include "aepo/text.hpp"

namespace aepo::reward {

std::optional<int> find_first_correct_rank(const CandidateSet& candidates,
                                           const BBox& target) {
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (geometry::point_in_bbox(candidates[i], target)) {
      return static_cast<int>(i) + 1;
    }
  }
  return std::nullopt;
}

double aer_accuracy(const CandidateSet& candidates, const BBox& target) {
  assert(!candidates.empty());
  const double n = static_cast<double>(candidates.size());
  if (const auto k = find_first_correct_rank(candidates, target)) {
    return 1.0 / std::sqrt(n * static_cast<double>(*k));
  }
  return -1.0 / n;
}

RewardBreakdown total_reward(std::string_view response, const BBox& target,
                             const ShapingOptions& opts) {
  RewardBreakdown out;
  const auto parsed = protocol::parse_response(response, opts.n_max);
  if (!parsed.ok()) return out;

  out.format = 1;
  const CandidateSet& pts = parsed.response.points;
  out.n = static_cast<int>(pts.size());
  const double n = static_cast<double>(out.n);

  if (opts.collinear_penalty &&
      geometry::is_collinear_set(pts, opts.eps_rel)) {
    out.collinear = true;
    out.accuracy = -1.0;
  } else if (const auto k = find_first_correct_rank(pts, target)) {
    out.rank = k;
    out.success = true;
    switch (opts.success_rule) {
      case SuccessRule::aer:
        out.accuracy = 1.0 / std::sqrt(n * static_cast<double>(*k));
        break;
      case SuccessRule::ignore_rank:
        out.accuracy = 1.0 / std::sqrt(n);
        break;
      case SuccessRule::flat_one:
        out.accuracy = 1.0;
        break;
    }
  } else {
    switch (opts.failure_rule) {
      case FailureRule::inverse_n:
        out.accuracy = -1.0 / n;
        break;
      case FailureRule::flat_minus_one:
        out.accuracy = -1.0;
        break;
    }
  }
  out.total = static_cast<double>(out.format) + out.accuracy;
  return out;
}

RewardBreakdown total_reward(std::string_view response, const BBox& target,
                             int n_max, double eps_rel) {
  ShapingOptions opts;
  opts.n_max = n_max;
  opts.eps_rel = eps_rel;
  return total_reward(response, target, opts);
}

double naive_reward(const Point& p, const BBox& target) {
  return geometry::point_in_bbox(p, target) ? 1.0 : -1.0;
}

std::vector<RewardCurveRow> reward_curve(const std::vector<int>& n_values,
                                         int k_max) {
  assert(k_max >= 1);
  std::vector<RewardCurveRow> rows;
  for (const int n : n_values) {
    assert(n >= 1);
    const double nn = static_cast<double>(n);
    rows.push_back({n, 0, -1.0 / nn});
    for (int k = 1; k <= std::min(k_max, n); ++k) {
      rows.push_back({n, k, 1.0 / std::sqrt(nn * static_cast<double>(k))});
    }
  }
  return rows;
}

std::string reward_curve_csv(const std::vector<RewardCurveRow>& rows) {
  std::string out = "N,k,reward\n";
  for (const auto& r : rows) {
    out += text::format_int(r.n);
    out += ',';
    out += text::format_int(r.k);
    out += ',';
    out += text::format_double(r.reward);
    out += '\n';
  }
  return out;
}

}  // namespace aepo::reward
