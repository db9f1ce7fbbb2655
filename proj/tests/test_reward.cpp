#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "aepo/reward.hpp"

using aepo::geometry::BBox;
using aepo::reward::aer_accuracy;
using aepo::reward::FailureRule;
using aepo::reward::find_first_correct_rank;
using aepo::reward::naive_reward;
using aepo::reward::reward_curve;
using aepo::reward::reward_curve_csv;
using aepo::reward::RewardBreakdown;
using aepo::reward::ShapingOptions;
using aepo::reward::SuccessRule;
using aepo::reward::total_reward;

namespace {

// Everything below scores against this box; (150,150) is inside, (500,500)
// and (60,60) are not.
const BBox kTarget{100.0, 100.0, 200.0, 200.0};

std::string wrap(const std::string& payload) {
  return "<think>t</think><answer>" + payload + "</answer>";
}

}  // namespace

TEST_CASE("success value satisfies r^2 * N * k = 1") {
  for (int n = 1; n <= 8; ++n) {
    for (int k = 1; k <= n; ++k) {
      // Build n candidates whose first hit is at rank k: misses at (0,0),
      // a hit at position k-1, then misses far away.
      aepo::reward::CandidateSet pts;
      for (int i = 0; i < n; ++i) {
        // Spiral the misses so no accidental collinearity or hits occur.
        pts.push_back({500.0 + 10.0 * i, 500.0 + 7.0 * i * i});
      }
      pts[static_cast<std::size_t>(k - 1)] = {150.0, 150.0};
      const auto rank = find_first_correct_rank(pts, kTarget);
      REQUIRE(rank.has_value());
      CHECK(*rank == k);
      const double r = aer_accuracy(pts, kTarget);
      CHECK(r * r * n * k == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(r == doctest::Approx(1.0 / std::sqrt(double(n) * k)).epsilon(1e-12));
    }
  }
}

TEST_CASE("success value decreases in N and in k; failure softens with N") {
  for (int n = 1; n < 8; ++n) {
    CHECK(1.0 / std::sqrt(double(n)) > 1.0 / std::sqrt(double(n + 1)));
  }
  aepo::reward::CandidateSet misses;
  double prev_fail = -2.0;
  for (int n = 1; n <= 8; ++n) {
    misses.push_back({500.0 + 10.0 * n, 500.0 + 7.0 * n * n});
    const double fail = aer_accuracy(misses, kTarget);
    CHECK(fail == doctest::Approx(-1.0 / n).epsilon(1e-12));
    CHECK(fail > prev_fail);  // more exploration, gentler failure
    prev_fail = fail;
  }
}

TEST_CASE("breakdown golden table") {
  const ShapingOptions defaults;

  struct Case {
    const char* name;
    std::string response;
    int format;
    double accuracy;
    bool collinear;
    int rank;  // 0 = absent
    int n;
    bool success;
  };
  const double s2 = 1.0 / std::sqrt(2.0);
  const std::vector<Case> table = {
      {"unparseable", "garbage", 0, 0.0, false, 0, 0, false},
      {"empty set", wrap("[]"), 0, 0.0, false, 0, 0, false},
      {"nine answers", wrap("[[1,2],[1,2],[1,2],[1,2],[1,2],[1,2],[1,2],[1,2],[1,2]]"),
       0, 0.0, false, 0, 0, false},
      {"single hit", wrap("[[150,150]]"), 1, 1.0, false, 1, 1, true},
      {"single edge hit", wrap("[[100,200]]"), 1, 1.0, false, 1, 1, true},
      {"single miss", wrap("[[60,60]]"), 1, -1.0, false, 0, 1, false},
      {"pair, hit first", wrap("[[150,150],[500,510]]"), 1, s2, false, 1, 2,
       true},
      {"pair, hit second", wrap("[[500,510],[150,150]]"), 1, 0.5, false, 2, 2,
       true},
      {"pair, both hit", wrap("[[150,150],[160,160]]"), 1, s2, false, 1, 2,
       true},
      {"four, hit third", wrap("[[500,510],[600,525],[150,150],[700,620]]"), 1,
       1.0 / std::sqrt(12.0), false, 3, 4, true},
      {"three misses", wrap("[[500,510],[600,525],[700,470]]"), 1,
       -1.0 / 3.0, false, 0, 3, false},
      {"collinear misses", wrap("[[300,300],[400,400],[500,500]]"), 1, -1.0,
       false /* set below */, 0, 3, false},
  };

  for (const Case& c : table) {
    CAPTURE(c.name);
    const RewardBreakdown b = total_reward(c.response, kTarget, defaults);
    CHECK(b.format == c.format);
    CHECK(b.accuracy == doctest::Approx(c.accuracy).epsilon(1e-12));
    CHECK(b.total ==
          doctest::Approx(double(c.format) + c.accuracy).epsilon(1e-12));
    CHECK(b.n == c.n);
    CHECK(b.success == c.success);
    if (c.rank == 0) {
      CHECK_FALSE(b.rank.has_value());
    } else {
      REQUIRE(b.rank.has_value());
      CHECK(*b.rank == c.rank);
    }
  }
}

TEST_CASE("collinear answers are penalized even when one hits the target") {
  // (150,150) is inside the box, but the three answers sit on one line.
  const std::string resp = wrap("[[150,150],[300,300],[450,450]]");
  const RewardBreakdown b = total_reward(resp, kTarget);
  CHECK(b.format == 1);
  CHECK(b.collinear);
  CHECK(b.accuracy == -1.0);
  CHECK(b.total == 0.0);
  CHECK_FALSE(b.success);
  CHECK_FALSE(b.rank.has_value());

  // Same response with the override disabled scores as a rank-1 hit.
  ShapingOptions no_penalty;
  no_penalty.collinear_penalty = false;
  const RewardBreakdown b2 = total_reward(resp, kTarget, no_penalty);
  CHECK_FALSE(b2.collinear);
  CHECK(b2.success);
  CHECK(b2.accuracy == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-12));
}

TEST_CASE("collinear flag reflects eps_rel") {
  const std::string near_line = wrap("[[0,0],[100,100.0001],[200,200]]");
  CHECK(total_reward(near_line, kTarget).collinear);
  ShapingOptions tight;
  tight.eps_rel = 1e-12;
  CHECK_FALSE(total_reward(near_line, kTarget, tight).collinear);
}

TEST_CASE("ablation success and failure rules") {
  const std::string hit_third = wrap("[[500,510],[600,525],[150,150],[700,620]]");
  const std::string misses = wrap("[[500,510],[600,525],[700,470]]");

  ShapingOptions opts;
  opts.success_rule = SuccessRule::ignore_rank;
  CHECK(total_reward(hit_third, kTarget, opts).accuracy ==
        doctest::Approx(0.5).epsilon(1e-12));  // 1/sqrt(4), rank ignored

  opts.success_rule = SuccessRule::flat_one;
  CHECK(total_reward(hit_third, kTarget, opts).accuracy == 1.0);

  opts = ShapingOptions{};
  opts.failure_rule = FailureRule::flat_minus_one;
  CHECK(total_reward(misses, kTarget, opts).accuracy == -1.0);
}

TEST_CASE("n_max flows through to the parser") {
  const std::string three = wrap("[[1,2],[3,4],[5,7]]");
  ShapingOptions opts;
  opts.n_max = 2;
  CHECK(total_reward(three, kTarget, opts).format == 0);
  opts.n_max = 3;
  CHECK(total_reward(three, kTarget, opts).format == 1);
}

TEST_CASE("single-answer baseline reward") {
  CHECK(naive_reward({150, 150}, kTarget) == 1.0);
  CHECK(naive_reward({100, 100}, kTarget) == 1.0);  // edge
  CHECK(naive_reward({60, 60}, kTarget) == -1.0);
}

TEST_CASE("reward curve rows and CSV") {
  const auto rows = reward_curve({1, 2, 4}, 3);
  // Per N: one k=0 failure row plus min(k_max, N) success rows.
  REQUIRE(rows.size() == 2 + 3 + 4);

  CHECK(rows[0].n == 1);
  CHECK(rows[0].k == 0);
  CHECK(rows[0].reward == -1.0);
  CHECK(rows[1].k == 1);
  CHECK(rows[1].reward == 1.0);

  CHECK(rows[2].n == 2);
  CHECK(rows[2].reward == -0.5);
  CHECK(rows[3].reward == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(rows[4].reward == 0.5);

  CHECK(rows[5].n == 4);
  CHECK(rows[5].reward == -0.25);
  CHECK(rows[6].reward == 0.5);
  CHECK(rows[8].k == 3);
  CHECK(rows[8].reward == doctest::Approx(1.0 / std::sqrt(12.0)));

  const std::string csv = reward_curve_csv(reward_curve({2}, 2));
  CHECK(csv ==
        "N,k,reward\n"
        "2,0,-0.5\n"
        "2,1,0.7071067811865475\n"
        "2,2,0.5\n");
}
