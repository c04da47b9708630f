#pragma once

#include <string>
#include <utility>
#include <vector>

namespace selfgoal {

// --- Game scores (S1, S2, S4) --------------------------------------------------

/// Mean contribution over an N x T matrix, reported on the 0-100 scale
/// (entries divided by the endowment, times 100). Lower is better.
double score_s1(const std::vector<std::vector<double>>& contributions, double endowment);

/// 100 minus the mean chosen number over an N x T matrix. Higher is better.
double score_s2(const std::vector<std::vector<double>>& choices);

/// Mean absolute per-session profit gap |P_Alice - P_Bob|. Lower is better.
double score_s4(const std::vector<std::pair<double, double>>& session_profits);

// --- TrueSkill rating engine ----------------------------------------------------

/// Gaussian skill belief.
struct Rating {
    double mu = 25.0;
    double sigma = 25.0 / 3.0;
};

struct TrueSkillParams {
    double beta = 25.0 / 6.0;     // performance std
    double gamma = 25.0 / 300.0;  // dynamics std, added as variance per match
    double draw_probability = 0.10;

    /// Draw margin epsilon for two single-player teams.
    double draw_margin() const;
    void validate() const;
};

struct MatchResult {
    std::vector<std::string> participants;
    std::vector<int> ranks;  // 1 = winner; equal ranks = draw
};

/// Gaussian density filtering update for a free-for-all match of single-player
/// teams: dynamics variance is added once per player, then adjacent rank pairs
/// are processed in rank order with truncated-Gaussian moment matching.
std::vector<Rating> trueskill_update(const std::vector<Rating>& ratings,
                                     const std::vector<int>& ranks,
                                     const TrueSkillParams& params = {});

/// Convenience overload checking the MatchResult invariants.
std::vector<Rating> trueskill_update(const std::vector<Rating>& ratings,
                                     const MatchResult& result,
                                     const TrueSkillParams& params = {});

/// Exact two-player posterior via dense 2-D numerical integration, then
/// Gaussian projection. outcome: +1 first player wins, 0 draw, -1 second wins.
/// Slow; used to verify trueskill_update.
std::pair<Rating, Rating> trueskill_oracle_2p(const Rating& a, const Rating& b, int outcome,
                                              const TrueSkillParams& params = {},
                                              int grid_n = 400);

struct LeaderboardRow {
    std::string label;
    Rating rating;
    double conservative = 0.0;  // mu - 3 sigma
};

/// Folds trueskill_update over the match history in order and sorts by the
/// conservative score, descending (stable). Every participant label in the
/// history must appear in `labels`.
std::vector<LeaderboardRow> leaderboard(const std::vector<std::string>& labels,
                                        const std::vector<MatchResult>& history,
                                        const TrueSkillParams& params = {});

// --- Gaussian helpers -------------------------------------------------------------

double normal_pdf(double x);
double normal_cdf(double x);
double normal_icdf(double p);

}  // namespace selfgoal
