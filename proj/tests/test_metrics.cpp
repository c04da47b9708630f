#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "selfgoal/agents.hpp"
#include "selfgoal/errors.hpp"
#include "selfgoal/metrics.hpp"
#include "selfgoal/rng.hpp"

using namespace selfgoal;

TEST_CASE("score_s1 boundaries and validation") {
    std::vector<std::vector<double>> zeros(5, std::vector<double>(20, 0.0));
    CHECK(score_s1(zeros, 100.0) == doctest::Approx(0.0));
    std::vector<std::vector<double>> full(5, std::vector<double>(20, 100.0));
    CHECK(score_s1(full, 100.0) == doctest::Approx(100.0));
    // Scale: endowment 50, mean 25 -> 50 on the 0-100 scale.
    std::vector<std::vector<double>> half(2, std::vector<double>(3, 25.0));
    CHECK(score_s1(half, 50.0) == doctest::Approx(50.0));
    CHECK_THROWS_AS(score_s1({}, 100.0), std::invalid_argument);
    CHECK_THROWS_AS(score_s1({{150.0}}, 100.0), std::invalid_argument);
}

TEST_CASE("score_s2 boundaries and level-1 population") {
    std::vector<std::vector<double>> zeros(5, std::vector<double>(20, 0.0));
    CHECK(score_s2(zeros) == doctest::Approx(100.0));
    std::vector<std::vector<double>> hundred(5, std::vector<double>(20, 100.0));
    CHECK(score_s2(hundred) == doctest::Approx(0.0));
    std::vector<std::vector<double>> level1(5, std::vector<double>(20, level_k_value(1)));
    CHECK(score_s2(level1) == doctest::Approx(66.67).epsilon(0.0002));
    CHECK_THROWS_AS(score_s2({}), std::invalid_argument);
}

TEST_CASE("score_s4 per-session mean gap") {
    CHECK(score_s4({{8.0, 2.0}}) == doctest::Approx(6.0));
    CHECK(score_s4({{8.0, 2.0}, {5.0, 5.0}}) == doctest::Approx(3.0));
    CHECK(score_s4({{0.0, 0.0}, {0.0, 0.0}}) == doctest::Approx(0.0));
    CHECK_THROWS_AS(score_s4({}), std::invalid_argument);
}

TEST_CASE("normal inverse cdf") {
    CHECK(normal_icdf(0.975) == doctest::Approx(1.959963985).epsilon(1e-8));
    CHECK(normal_icdf(0.5) == doctest::Approx(0.0));
    CHECK(normal_cdf(normal_icdf(0.123)) == doctest::Approx(0.123).epsilon(1e-12));
    CHECK_THROWS_AS(normal_icdf(0.0), std::invalid_argument);
}

TEST_CASE("draw margin from draw probability") {
    TrueSkillParams p;
    // probit(0.55) * sqrt(2) * beta
    CHECK(p.draw_margin() ==
          doctest::Approx(normal_icdf(0.55) * std::sqrt(2.0) * p.beta).epsilon(1e-12));
    CHECK(p.draw_margin() > 0.0);
}

TEST_CASE("two-player update: symmetry, direction, sigma contraction") {
    TrueSkillParams params;
    std::vector<Rating> before{{}, {}};

    SUBCASE("win") {
        auto after = trueskill_update(before, std::vector<int>{1, 2}, params);
        CHECK(after[0].mu > 25.0);
        CHECK(after[1].mu < 25.0);
        CHECK(after[0].mu - 25.0 == doctest::Approx(25.0 - after[1].mu).epsilon(1e-12));
        CHECK(after[0].sigma < before[0].sigma);
        CHECK(after[1].sigma < before[1].sigma);
    }
    SUBCASE("draw leaves equal means in place") {
        auto after = trueskill_update(before, std::vector<int>{1, 1}, params);
        CHECK(after[0].mu == doctest::Approx(25.0).epsilon(1e-12));
        CHECK(after[1].mu == doctest::Approx(25.0).epsilon(1e-12));
        CHECK(after[0].sigma < before[0].sigma);
    }
    SUBCASE("validation") {
        CHECK_THROWS_AS(trueskill_update(before, std::vector<int>{1}, params),
                        std::invalid_argument);
        MatchResult bad{{"a", "b"}, {1}};
        CHECK_THROWS_AS(trueskill_update(before, bad, params), std::invalid_argument);
    }
}

TEST_CASE("oracle self-consistency and symmetry") {
    TrueSkillParams params;
    Rating a{27.0, 6.0}, b{22.0, 4.0};

    auto coarse = trueskill_oracle_2p(a, b, +1, params, 200);
    auto fine = trueskill_oracle_2p(a, b, +1, params, 400);
    CHECK(std::abs(coarse.first.mu - fine.first.mu) < 1e-4);
    CHECK(std::abs(coarse.first.sigma - fine.first.sigma) < 1e-4);
    CHECK(std::abs(coarse.second.mu - fine.second.mu) < 1e-4);

    auto swapped = trueskill_oracle_2p(b, a, -1, params, 200);
    CHECK(swapped.first.mu == doctest::Approx(coarse.second.mu).epsilon(1e-10));
    CHECK(swapped.second.mu == doctest::Approx(coarse.first.mu).epsilon(1e-10));
}

TEST_CASE("small beta upset pulls the winner's mean strongly upward") {
    TrueSkillParams params;
    params.beta = 0.1;
    params.gamma = 0.0;
    Rating weak{20.0, 5.0}, strong{30.0, 5.0};
    auto post = trueskill_oracle_2p(weak, strong, +1, params, 400);
    CHECK(post.first.mu > weak.mu + 2.0);
    CHECK(post.second.mu < strong.mu - 2.0);
}

TEST_CASE("update matches the integration oracle") {
    TrueSkillParams params;

    SUBCASE("default ratings, win") {
        auto upd = trueskill_update({Rating{}, Rating{}}, std::vector<int>{1, 2}, params);
        auto orc = trueskill_oracle_2p(Rating{}, Rating{}, +1, params, 400);
        CHECK(std::abs(upd[0].mu - orc.first.mu) < 1e-3);
        CHECK(std::abs(upd[0].sigma - orc.first.sigma) < 1e-3);
        CHECK(std::abs(upd[1].mu - orc.second.mu) < 1e-3);
        CHECK(std::abs(upd[1].sigma - orc.second.sigma) < 1e-3);
    }
    SUBCASE("randomized ratings and outcomes") {
        Rng rng(20240611);
        for (int i = 0; i < 12; ++i) {
            Rating a{rng.uniform(15.0, 35.0), rng.uniform(2.0, 10.0)};
            Rating b{rng.uniform(15.0, 35.0), rng.uniform(2.0, 10.0)};
            const int outcome = static_cast<int>(rng.below(3)) - 1;
            std::vector<int> ranks = outcome > 0   ? std::vector<int>{1, 2}
                                     : outcome < 0 ? std::vector<int>{2, 1}
                                                   : std::vector<int>{1, 1};
            auto upd = trueskill_update({a, b}, ranks, params);
            auto orc = trueskill_oracle_2p(a, b, outcome, params, 400);
            CAPTURE(i);
            CHECK(std::abs(upd[0].mu - orc.first.mu) < 1e-3);
            CHECK(std::abs(upd[0].sigma - orc.first.sigma) < 1e-3);
            CHECK(std::abs(upd[1].mu - orc.second.mu) < 1e-3);
            CHECK(std::abs(upd[1].sigma - orc.second.sigma) < 1e-3);
        }
    }
}

TEST_CASE("multiplayer update: permutation equivariance and monotonicity") {
    TrueSkillParams params;
    std::vector<Rating> ratings{{28, 7}, {25, 8}, {22, 5}, {24, 6}};
    std::vector<int> ranks{2, 1, 4, 2};

    auto out = trueskill_update(ratings, ranks, params);
    // Permute participants (reverse) together with ranks.
    std::vector<Rating> rratings(ratings.rbegin(), ratings.rend());
    std::vector<int> rranks(ranks.rbegin(), ranks.rend());
    auto rout = trueskill_update(rratings, rranks, params);
    for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(out[i].mu == doctest::Approx(rout[out.size() - 1 - i].mu).epsilon(1e-12));
        CHECK(out[i].sigma == doctest::Approx(rout[out.size() - 1 - i].sigma).epsilon(1e-12));
    }
    // Sigma never increases.
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i].sigma <= ratings[i].sigma);
}

TEST_CASE("leaderboard") {
    SUBCASE("empty history keeps defaults in stable input order") {
        auto rows = leaderboard({"c", "a", "b"}, {});
        REQUIRE(rows.size() == 3);
        CHECK(rows[0].label == "c");
        CHECK(rows[1].label == "a");
        CHECK(rows[2].label == "b");
        CHECK(rows[0].rating.mu == doctest::Approx(25.0));
        CHECK(rows[0].conservative == doctest::Approx(0.0));
    }
    SUBCASE("dominant agent tops a 20-match round robin") {
        std::vector<std::string> labels{"dom", "w1", "w2", "w3"};
        std::vector<MatchResult> history;
        Rng rng(5);
        for (int m = 0; m < 20; ++m) {
            MatchResult r;
            r.participants = labels;
            r.ranks = {1, 2, 3, 4};
            // Shuffle the weak agents' relative order; dom always first.
            std::vector<int> tail{2, 3, 4};
            rng.shuffle(tail);
            for (int i = 0; i < 3; ++i) r.ranks[static_cast<std::size_t>(i) + 1] = tail[static_cast<std::size_t>(i)];
            history.push_back(std::move(r));
        }
        auto rows = leaderboard(labels, history);
        CHECK(rows[0].label == "dom");
        CHECK(rows[0].rating.mu > 25.0);
    }
    SUBCASE("unknown label") {
        MatchResult r{{"a", "zzz"}, {1, 2}};
        CHECK_THROWS_AS(leaderboard({"a", "b"}, {r}), NotFoundError);
    }
}
