#include "aepo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "aepo/parallel.hpp"
#include "aepo/text.hpp"

namespace aepo::trainer {

namespace {

constexpr int kFilterRollouts = 8;
constexpr double kFilterTemperature = 1.0;

// Salts for derived rng streams.
constexpr std::uint64_t kSaltShuffle = 0x73687566ull;
constexpr std::uint64_t kSaltGroup = 0x67726f75ull;

bool any_hit(const policy::Rollout& rollout, const env::Task& task) {
  const auto& box =
      task.elements[static_cast<std::size_t>(task.target)].bbox;
  for (const auto& p : rollout.candidates) {
    if (geometry::point_in_bbox(p, box)) return true;
  }
  return false;
}

void axpy(std::vector<double>& acc, const std::vector<double>& x,
          double scale) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += scale * x[i];
}

bool all_finite(const std::vector<double>& v) {
  for (const double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (cfg.group_size < 2) throw GroupTooSmall("group_size must be >= 2");
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(cfg.temperature > 0.0)) throw ConfigError("temperature must be > 0");
  if (cfg.n_max < 1) throw ConfigError("n_max must be >= 1");
  if (!(cfg.eps_rel > 0.0)) throw ConfigError("eps_rel must be > 0");
  if (cfg.grad_clip < 0.0) throw ConfigError("grad_clip must be >= 0");
}

reward::ShapingOptions shaping_options(const TrainConfig& cfg) {
  reward::ShapingOptions opts;
  opts.n_max = cfg.n_max;
  opts.eps_rel = cfg.eps_rel;
  opts.collinear_penalty = cfg.collinear_penalty;
  opts.success_rule = cfg.success_rule;
  opts.failure_rule = cfg.failure_rule;
  return opts;
}

std::vector<double> rloo_advantages(const std::vector<double>& rewards) {
  const std::size_t g = rewards.size();
  if (g < 2) throw GroupTooSmall("need at least 2 rewards for a baseline");
  double sum = 0.0;
  for (const double r : rewards) sum += r;
  std::vector<double> adv(g);
  for (std::size_t i = 0; i < g; ++i) {
    adv[i] = rewards[i] - (sum - rewards[i]) / static_cast<double>(g - 1);
  }
  // Zero-sum and the scaled-residual identity hold by algebra; keep them
  // checked since everything downstream relies on them.
  double adv_sum = 0.0;
  const double scale = static_cast<double>(g) / static_cast<double>(g - 1);
  const double mean = sum / static_cast<double>(g);
  for (std::size_t i = 0; i < g; ++i) {
    adv_sum += adv[i];
    if (std::abs(adv[i] - scale * (rewards[i] - mean)) > 1e-9) {
      throw std::logic_error("leave-one-out identity violated");
    }
  }
  if (std::abs(adv_sum) > 1e-9 * std::max(1.0, std::abs(sum))) {
    throw std::logic_error("advantages do not sum to zero");
  }
  return adv;
}

RolloutGroup evaluate_group(const policy::PolicyParams& params,
                            const env::Task& task, const TrainConfig& cfg,
                            rng::Engine& rng) {
  if (cfg.group_size < 2) throw GroupTooSmall("group_size must be >= 2");
  const auto shaping = shaping_options(cfg);
  const auto& target_box =
      task.elements[static_cast<std::size_t>(task.target)].bbox;

  RolloutGroup group;
  group.task = task;
  group.rollouts.reserve(static_cast<std::size_t>(cfg.group_size));
  group.rewards.reserve(static_cast<std::size_t>(cfg.group_size));
  for (int i = 0; i < cfg.group_size; ++i) {
    if (cfg.mode == Mode::naive) {
      auto rollout =
          policy::sample_rollout(params, task, cfg.temperature, rng, 1);
      const double fmt = protocol::format_reward(rollout.response, cfg.n_max);
      group.rewards.push_back(
          fmt + reward::naive_reward(rollout.candidates.front(), target_box));
      group.rollouts.push_back(std::move(rollout));
    } else {
      auto rollout = policy::sample_rollout(params, task, cfg.temperature, rng);
      group.rewards.push_back(
          reward::total_reward(rollout.response, target_box, shaping).total);
      group.rollouts.push_back(std::move(rollout));
    }
  }
  group.advantages = rloo_advantages(group.rewards);
  return group;
}

void policy_gradient_step(policy::PolicyParams& params,
                          const std::vector<RolloutGroup>& groups,
                          const TrainConfig& cfg) {
  if (groups.empty()) return;
  policy::PolicyParams acc;
  acc.w.assign(params.w.size(), 0.0);
  acc.u.assign(params.u.size(), 0.0);
  acc.v.assign(params.v.size(), 0.0);

  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& group = groups[gi];
    policy::PolicyParams gacc;
    gacc.w.assign(params.w.size(), 0.0);
    gacc.u.assign(params.u.size(), 0.0);
    gacc.v.assign(params.v.size(), 0.0);
    for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
      const auto g =
          policy::grad_log_prob(params, group.task, group.rollouts[i]);
      axpy(gacc.w, g.w, group.advantages[i]);
      axpy(gacc.u, g.u, group.advantages[i]);
      axpy(gacc.v, g.v, group.advantages[i]);
    }
    const double inv_g = 1.0 / static_cast<double>(group.rollouts.size());
    if (!all_finite(gacc.w) || !all_finite(gacc.u) || !all_finite(gacc.v)) {
      throw NonFiniteGradient("non-finite gradient in group " +
                              std::to_string(gi));
    }
    axpy(acc.w, gacc.w, inv_g / static_cast<double>(groups.size()));
    axpy(acc.u, gacc.u, inv_g / static_cast<double>(groups.size()));
    axpy(acc.v, gacc.v, inv_g / static_cast<double>(groups.size()));
  }

  if (cfg.grad_clip > 0.0) {
    double norm2 = 0.0;
    for (const double x : acc.w) norm2 += x * x;
    for (const double x : acc.u) norm2 += x * x;
    for (const double x : acc.v) norm2 += x * x;
    const double norm = std::sqrt(norm2);
    if (norm > cfg.grad_clip) {
      const double scale = cfg.grad_clip / norm;
      for (auto& x : acc.w) x *= scale;
      for (auto& x : acc.u) x *= scale;
      for (auto& x : acc.v) x *= scale;
    }
  }

  axpy(params.w, acc.w, cfg.learning_rate);
  axpy(params.u, acc.u, cfg.learning_rate);
  axpy(params.v, acc.v, cfg.learning_rate);
  if (!all_finite(params.w) || !all_finite(params.u) ||
      !all_finite(params.v)) {
    throw NonFiniteGradient("parameters left finite range after update");
  }
}

std::vector<env::Task> filter_dataset(const std::vector<env::Task>& tasks,
                                      const policy::PolicyParams& base,
                                      const TrainConfig& cfg,
                                      rng::Engine& rng) {
  validate(cfg);
  const std::uint64_t stream_base = rng();
  std::vector<char> keep(tasks.size(), 0);
  par::parallel_for(tasks.size(), [&](std::size_t i) {
    rng::Engine engine = rng::make_engine(stream_base, 0x66696c74ull, i);
    const auto& task = tasks[i];
    const auto& box =
        task.elements[static_cast<std::size_t>(task.target)].bbox;
    for (int r = 0; r < kFilterRollouts; ++r) {
      const auto rollout =
          policy::sample_rollout(base, task, kFilterTemperature, engine, 1);
      if (!geometry::point_in_bbox(rollout.candidates.front(), box)) {
        keep[i] = 1;
        break;
      }
    }
  });
  std::vector<env::Task> kept;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (keep[i]) kept.push_back(tasks[i]);
  }
  return kept;
}

std::string TrainingLog::to_csv() const {
  std::string out = has_expl_success
                        ? "step,epoch,mean_reward,mean_abs_adv,expl_success,mean_n\n"
                        : "step,epoch,mean_reward,mean_abs_adv,mean_n\n";
  for (const auto& r : rows) {
    out += text::format_int(r.step);
    out += ',';
    out += text::format_int(r.epoch);
    out += ',';
    out += text::format_double(r.mean_reward);
    out += ',';
    out += text::format_double(r.mean_abs_adv);
    out += ',';
    if (has_expl_success) {
      out += text::format_double(r.expl_success);
      out += ',';
    }
    out += text::format_double(r.mean_n);
    out += '\n';
  }
  return out;
}

TrainResult train(const TrainConfig& cfg, const std::vector<env::Task>& dataset,
                  const policy::PolicyParams& init) {
  validate(cfg);
  rng::Engine filter_rng = rng::make_engine(cfg.seed, 0x66626173ull);
  const auto kept = filter_dataset(dataset, init, cfg, filter_rng);
  if (kept.empty()) {
    throw EmptyAfterFilter("no tasks left after filtering");
  }

  TrainResult result;
  result.params = init;
  result.log.has_expl_success = cfg.mode == Mode::aepo;

  int step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<int> order(kept.size());
    std::iota(order.begin(), order.end(), 0);
    rng::Engine shuffle_rng = rng::make_engine(
        cfg.seed, kSaltShuffle, static_cast<std::uint64_t>(epoch));
    rng::shuffle(order, shuffle_rng);

    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(
          order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<RolloutGroup> groups(stop - start);
      par::parallel_for(stop - start, [&](std::size_t slot) {
        rng::Engine group_rng =
            rng::make_engine(cfg.seed, kSaltGroup,
                             static_cast<std::uint64_t>(step),
                             static_cast<std::uint64_t>(slot));
        groups[slot] = evaluate_group(
            result.params, kept[static_cast<std::size_t>(order[start + slot])],
            cfg, group_rng);
      });

      TrainStepRow row;
      row.step = step;
      row.epoch = epoch;
      std::size_t rollouts = 0;
      for (const auto& group : groups) {
        for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
          row.mean_reward += group.rewards[i];
          row.mean_abs_adv += std::abs(group.advantages[i]);
          row.expl_success += any_hit(group.rollouts[i], group.task) ? 1.0 : 0.0;
          row.mean_n += group.rollouts[i].n;
          ++rollouts;
        }
      }
      const double inv = 1.0 / static_cast<double>(rollouts);
      row.mean_reward *= inv;
      row.mean_abs_adv *= inv;
      row.expl_success *= inv;
      row.mean_n *= inv;
      result.log.rows.push_back(row);

      policy_gradient_step(result.params, groups, cfg);
      ++step;
    }
  }
  return result;
}

}  // namespace aepo::trainer
