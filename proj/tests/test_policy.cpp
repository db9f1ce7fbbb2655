#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "aepo/env.hpp"
#include "aepo/errors.hpp"
#include "aepo/policy.hpp"
#include "aepo/protocol.hpp"
#include "aepo/rng.hpp"

using namespace aepo;
using policy::PolicyParams;
using policy::Rollout;

namespace {

// A screen with hand-picked features; boxes are disjoint 8x8 squares in a
// strip so candidate coordinates are easy to predict.
env::Task make_task(std::vector<std::vector<double>> features,
                    std::vector<double> instruction) {
  env::Task t;
  t.width = 400.0;
  t.height = 100.0;
  t.instruction = std::move(instruction);
  for (std::size_t i = 0; i < features.size(); ++i) {
    env::Element e;
    const double x0 = 10.0 + 20.0 * static_cast<double>(i);
    e.bbox = {x0, 10.0, x0 + 8.0, 18.0};
    e.feature = features[i];
    t.elements.push_back(std::move(e));
  }
  return t;
}

PolicyParams random_params(int dim, int n_max, rng::Engine& g) {
  PolicyParams p = policy::default_init(dim, n_max);
  for (double& x : p.w) x = 1.0 + 0.3 * rng::next_gaussian(g);
  for (double& x : p.u) x = 0.3 * rng::next_gaussian(g);
  for (double& x : p.v) x = 0.3 * rng::next_gaussian(g);
  return p;
}

// Enumerates every feasible rollout (count + ordered selection) of a small
// task and applies fn to it.
void for_each_rollout(int m, int support,
                      const std::function<void(Rollout&)>& fn) {
  std::vector<int> seq;
  std::function<void(int)> rec = [&](int n) {
    if (static_cast<int>(seq.size()) == n) {
      Rollout r;
      r.n = n;
      r.element_ranks = seq;
      fn(r);
      return;
    }
    for (int j = 0; j < m; ++j) {
      bool used = false;
      for (int s : seq) used = used || s == j;
      if (used) continue;
      seq.push_back(j);
      rec(n);
      seq.pop_back();
    }
  };
  for (int n = 1; n <= support; ++n) rec(n);
}

}  // namespace

TEST_CASE("default_init shapes") {
  const PolicyParams p = policy::default_init(8, 5);
  REQUIRE(p.w.size() == 8);
  REQUIRE(p.u.size() == 5);
  REQUIRE(p.v.size() == 5);
  for (double x : p.w) CHECK(x == 1.0);
  for (double x : p.u) CHECK(x == 0.0);
  for (double x : p.v) CHECK(x == 0.0);
}

TEST_CASE("element_scores is the weighted instruction-feature product") {
  const env::Task t = make_task({{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}},
                                {1.0, 2.0});
  PolicyParams p = policy::default_init(2, 4);
  p.w = {0.5, 0.25};
  const auto s = policy::element_scores(p, t);
  REQUIRE(s.size() == 3);
  CHECK(s[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s[2] == doctest::Approx(1.0).epsilon(1e-15));

  PolicyParams bad = p;
  bad.w = {1.0, 2.0, 3.0};
  CHECK_THROWS_AS(policy::element_scores(bad, t), DimensionError);
}

TEST_CASE("score_entropy matches closed forms") {
  CHECK(policy::score_entropy({3.0, 3.0, 3.0}, 1.0) ==
        doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(policy::score_entropy({0.0, 40.0}, 1.0) ==
        doctest::Approx(0.0).epsilon(1e-10));
  // Shifting all scores changes nothing; scaling the temperature to match a
  // score scaling changes nothing either.
  const double h1 = policy::score_entropy({0.1, 0.9, -0.4}, 0.7);
  const double h2 = policy::score_entropy({5.1, 5.9, 4.6}, 0.7);
  const double h3 = policy::score_entropy({0.2, 1.8, -0.8}, 1.4);
  CHECK(h1 == doctest::Approx(h2).epsilon(1e-12));
  CHECK(h1 == doctest::Approx(h3).epsilon(1e-12));
}

TEST_CASE("count_distribution: uniform head, explicit logits, support clamp") {
  const env::Task t = make_task(
      {{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}, {0.5, 0.5}, {0.2, 0.1}},
      {1.0, 2.0});
  PolicyParams p = policy::default_init(2, 4);
  const auto scores = policy::element_scores(p, t);

  // Zero logits: uniform over 1..4.
  auto d = policy::count_distribution(p, scores, 1.0);
  REQUIRE(d.size() == 4);
  for (double q : d) CHECK(q == doctest::Approx(0.25).epsilon(1e-12));

  // Explicit logits: softmax([0, ln2, ln4, 0]) with v = 0.
  p.u = {0.0, std::log(2.0), std::log(4.0), 0.0};
  d = policy::count_distribution(p, scores, 1.0);
  CHECK(d[0] == doctest::Approx(1.0 / 8.0).epsilon(1e-12));
  CHECK(d[1] == doctest::Approx(2.0 / 8.0).epsilon(1e-12));
  CHECK(d[2] == doctest::Approx(4.0 / 8.0).epsilon(1e-12));
  CHECK(d[3] == doctest::Approx(1.0 / 8.0).epsilon(1e-12));

  // Fewer elements than n_max: the support is clamped and renormalized.
  const env::Task small = make_task({{1.0, 0.0}, {0.0, 1.0}}, {1.0, 2.0});
  PolicyParams p2 = policy::default_init(2, 4);
  const auto d2 =
      policy::count_distribution(p2, policy::element_scores(p2, small), 1.0);
  REQUIRE(d2.size() == 2);
  CHECK(d2[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(d2[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("entropy coupling shifts the count head as designed") {
  // v puts weight on larger counts scaled by the score entropy, so a flat
  // score profile (high entropy) must ask for more answers than a peaked one.
  PolicyParams p = policy::default_init(2, 4);
  p.v = {0.0, 0.0, 0.0, 2.0};
  const env::Task flat = make_task({{1.0, 0.0}, {0.0, 1.0}, {0.5, 0.5},
                                    {0.4, 0.3}},
                                   {1.0, 1.0});
  const env::Task peaked = make_task({{10.0, 0.0}, {0.0, 0.1}, {0.05, 0.05},
                                      {0.04, 0.03}},
                                     {1.0, 1.0});
  const auto d_flat =
      policy::count_distribution(p, policy::element_scores(p, flat), 1.0);
  const auto d_peaked =
      policy::count_distribution(p, policy::element_scores(p, peaked), 1.0);
  CHECK(d_flat[3] > d_peaked[3]);
  CHECK(d_flat[3] > 0.5);  // H ~ ln 4 pushes logit 4 near 2*1.38
}

TEST_CASE("sample_count frequencies follow the distribution") {
  const env::Task t = make_task(
      {{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}, {0.5, 0.5}}, {1.0, 2.0});
  PolicyParams p = policy::default_init(2, 3);
  p.u = {std::log(1.0), std::log(2.0), std::log(5.0)};
  const auto scores = policy::element_scores(p, t);
  const auto d = policy::count_distribution(p, scores, 1.0);

  rng::Engine g = rng::make_engine(404);
  std::vector<int> counts(3, 0);
  const int trials = 40000;
  for (int i = 0; i < trials; ++i) {
    const int n = policy::sample_count(p, scores, 1.0, g);
    REQUIRE(n >= 1);
    REQUIRE(n <= 3);
    ++counts[static_cast<std::size_t>(n - 1)];
  }
  for (int n = 0; n < 3; ++n) {
    CHECK(std::abs(counts[static_cast<std::size_t>(n)] / double(trials) -
                   d[static_cast<std::size_t>(n)]) < 0.01);
  }
}

TEST_CASE("selection sampling matches the sequential softmax closed form") {
  // Four identical features: every ordered pair is equally likely, so a
  // forced two-answer rollout lands on each of the 12 pairs with p = 1/12.
  const env::Task t = make_task(
      {{1.0, 0.0}, {1.0, 0.0}, {1.0, 0.0}, {1.0, 0.0}}, {1.0, 0.0});
  const PolicyParams p = policy::default_init(2, 4);
  rng::Engine g = rng::make_engine(505);
  std::map<std::pair<int, int>, int> freq;
  const int trials = 60000;
  for (int i = 0; i < trials; ++i) {
    const Rollout r = policy::sample_rollout(p, t, 1.0, g, 2);
    REQUIRE(r.n == 2);
    REQUIRE(r.element_ranks.size() == 2);
    CHECK(r.element_ranks[0] != r.element_ranks[1]);
    ++freq[{r.element_ranks[0], r.element_ranks[1]}];
  }
  CHECK(freq.size() == 12);
  for (const auto& [pair, count] : freq) {
    CHECK(std::abs(count / double(trials) - 1.0 / 12.0) < 0.008);
  }
}

TEST_CASE("rollouts carry a faithful response and exact logp") {
  env::EnvConfig cfg;
  rng::Engine task_g = rng::make_engine(606);
  rng::Engine g = rng::make_engine(607);
  for (int i = 0; i < 50; ++i) {
    const env::Task t = env::generate_task(task_g, cfg);
    PolicyParams p = random_params(8, 8, g);
    const Rollout r = policy::sample_rollout(p, t, 0.8, g);
    CHECK(r.n >= 1);
    CHECK(r.n <= 6);
    CHECK(static_cast<int>(r.element_ranks.size()) == r.n);
    CHECK(r.temperature == 0.8);
    CHECK_FALSE(r.forced_n);

    // The serialized response parses back to the candidate centers.
    const auto parsed = protocol::parse_response(r.response);
    REQUIRE(parsed.ok());
    REQUIRE(parsed.response.points.size() == r.candidates.size());
    for (std::size_t a = 0; a < r.candidates.size(); ++a) {
      const auto center = geometry::bbox_center(
          t.elements[static_cast<std::size_t>(r.element_ranks[a])].bbox);
      CHECK(parsed.response.points[a].x == center.x);
      CHECK(parsed.response.points[a].y == center.y);
    }

    // The stored logp is literally log_prob of the stored rollout.
    CHECK(r.logp == policy::log_prob(p, t, r));
  }
}

TEST_CASE("log_prob closed form on the uniform case") {
  const env::Task t = make_task(
      {{1.0, 0.0}, {1.0, 0.0}, {1.0, 0.0}, {1.0, 0.0}}, {1.0, 0.0});
  const PolicyParams p = policy::default_init(2, 4);

  Rollout r;
  r.n = 1;
  r.element_ranks = {2};
  // P = P(N=1) * P(pick 2) = 1/4 * 1/4.
  CHECK(policy::log_prob(p, t, r) ==
        doctest::Approx(std::log(1.0 / 16.0)).epsilon(1e-12));

  // A forced count contributes no probability mass.
  r.forced_n = true;
  CHECK(policy::log_prob(p, t, r) ==
        doctest::Approx(std::log(1.0 / 4.0)).epsilon(1e-12));

  // Two draws without replacement: 1/4 * (1/4) * (1/3).
  Rollout r2;
  r2.n = 2;
  r2.element_ranks = {0, 3};
  CHECK(policy::log_prob(p, t, r2) ==
        doctest::Approx(std::log(0.25 * 0.25 / 3.0)).epsilon(1e-12));
}

TEST_CASE("rollout probabilities sum to one") {
  rng::Engine g = rng::make_engine(708);
  for (int rep = 0; rep < 10; ++rep) {
    const env::Task t = make_task({{0.9, 0.1}, {-0.3, 0.8}, {0.4, 0.4}},
                                  {1.1, -0.7});
    const PolicyParams p = random_params(2, 3, g);
    const double temperature = 0.5 + rng::next_unit(g);
    double total = 0.0;
    for_each_rollout(3, 3, [&](Rollout& r) {
      r.temperature = temperature;
      total += std::exp(policy::log_prob(p, t, r));
    });
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("infeasible rollouts are rejected") {
  const env::Task t = make_task({{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}},
                                {1.0, 2.0});
  const PolicyParams p = policy::default_init(2, 2);

  const auto reject = [&](Rollout r) {
    CHECK_THROWS_AS(policy::log_prob(p, t, r), InfeasibleRollout);
  };
  Rollout r;
  r.n = 2;
  r.element_ranks = {0, 0};
  reject(r);  // repeated index
  r.element_ranks = {0, 5};
  reject(r);  // out of range
  r.element_ranks = {0};
  reject(r);  // count mismatch
  r.n = 3;
  r.element_ranks = {0, 1, 2};
  reject(r);  // beyond the count support (n_max 2) without forcing
  r.n = 1;
  r.element_ranks = {0};
  r.temperature = 0.0;
  reject(r);  // bad temperature

  rng::Engine g = rng::make_engine(1);
  CHECK_THROWS_AS(policy::sample_rollout(p, t, 1.0, g, 4),
                  InfeasibleRollout);  // forced beyond element count
}

TEST_CASE("analytic gradient matches finite differences") {
  env::EnvConfig cfg;
  rng::Engine task_g = rng::make_engine(909);
  rng::Engine g = rng::make_engine(910);
  const double h = 1e-5;
  int instances = 0;

  for (int i = 0; i < 40; ++i) {
    const env::Task t = env::generate_task(task_g, cfg);
    const PolicyParams p = random_params(8, 6, g);
    const double temperature = 0.6 + 0.8 * rng::next_unit(g);
    // Half free rollouts, half forced single answers (the naive path).
    const Rollout r =
        (i % 2 == 0)
            ? policy::sample_rollout(p, t, temperature, g)
            : policy::sample_rollout(p, t, temperature, g, 1);
    const PolicyParams grad = policy::grad_log_prob(p, t, r);

    const auto fd_check = [&](std::vector<double> PolicyParams::*field,
                              std::size_t idx, double analytic) {
      PolicyParams lo = p;
      PolicyParams hi = p;
      (lo.*field)[idx] -= h;
      (hi.*field)[idx] += h;
      const double fd =
          (policy::log_prob(hi, t, r) - policy::log_prob(lo, t, r)) /
          (2.0 * h);
      const double err =
          std::abs(fd - analytic) / std::max(1.0, std::abs(analytic));
      CHECK(err < 1e-5);
    };

    for (std::size_t d = 0; d < p.w.size(); ++d) {
      fd_check(&PolicyParams::w, d, grad.w[d]);
    }
    for (std::size_t n = 0; n < p.u.size(); ++n) {
      fd_check(&PolicyParams::u, n, grad.u[n]);
      fd_check(&PolicyParams::v, n, grad.v[n]);
    }
    ++instances;
  }
  CHECK(instances == 40);
}

TEST_CASE("count-head gradient properties") {
  env::EnvConfig cfg;
  rng::Engine task_g = rng::make_engine(111);
  rng::Engine g = rng::make_engine(112);
  const env::Task t = env::generate_task(task_g, cfg);
  const PolicyParams p = random_params(8, 6, g);

  // Free rollout: residuals against the count distribution sum to zero.
  const Rollout r = policy::sample_rollout(p, t, 1.0, g);
  const PolicyParams grad = policy::grad_log_prob(p, t, r);
  double u_sum = 0.0;
  double v_sum = 0.0;
  for (double x : grad.u) u_sum += x;
  for (double x : grad.v) v_sum += x;
  CHECK(std::abs(u_sum) < 1e-12);
  CHECK(std::abs(v_sum) < 1e-12);

  // Forced rollout: the count head contributed nothing, so its gradient
  // vanishes identically.
  const Rollout forced = policy::sample_rollout(p, t, 1.0, g, 1);
  const PolicyParams fgrad = policy::grad_log_prob(p, t, forced);
  for (double x : fgrad.u) CHECK(x == 0.0);
  for (double x : fgrad.v) CHECK(x == 0.0);
}

TEST_CASE("greedy decode picks the best element, lowest index on ties") {
  const env::Task t = make_task(
      {{0.2, 0.0}, {0.9, 0.0}, {0.9, 0.0}, {0.5, 0.0}}, {1.0, 0.0});
  const PolicyParams p = policy::default_init(2, 4);
  const geometry::Point a = policy::greedy_first_answer(p, t);
  const geometry::Point expect = geometry::bbox_center(t.elements[1].bbox);
  CHECK(a.x == expect.x);
  CHECK(a.y == expect.y);
}

TEST_CASE("params JSON round trip and schema enforcement") {
  rng::Engine g = rng::make_engine(121);
  const PolicyParams p = random_params(8, 6, g);
  const std::string text = policy::params_to_json(p);
  const PolicyParams q = policy::params_from_json(text);
  CHECK(q.w == p.w);
  CHECK(q.u == p.u);
  CHECK(q.v == p.v);

  CHECK_THROWS_AS(policy::params_from_json("nope"), SchemaError);
  CHECK_THROWS_AS(policy::params_from_json("{\"w\":[1],\"u\":[0]}"),
                  SchemaError);  // missing v
  CHECK_THROWS_AS(
      policy::params_from_json(
          "{\"w\":[1],\"u\":[0],\"v\":[0],\"extra\":1}"),
      SchemaError);
  CHECK_THROWS_AS(
      policy::params_from_json("{\"w\":1,\"u\":[0],\"v\":[0]}"),
      SchemaError);
  CHECK_THROWS_AS(
      policy::params_from_json("{\"w\":[1],\"u\":[0],\"v\":[0,1]}"),
      SchemaError);  // u and v must have one logit per count

  const std::string path = "aepo_policy_test_params.json";
  policy::save_params(path, p);
  const PolicyParams r = policy::load_params(path);
  CHECK(r.w == p.w);
  std::remove(path.c_str());
  CHECK_THROWS_AS(policy::load_params("missing_params.json"), IoError);
}
