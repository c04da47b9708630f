#include "selfgoal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "selfgoal/errors.hpp"

namespace selfgoal {

namespace {
constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kInvSqrt2Pi = 0.3989422804014327;
}  // namespace

double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

// Acklam's rational approximation, polished with one Halley step against
// std::erfc. Accurate to ~1e-15 over (0,1).
double normal_icdf(double p) {
    if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("normal_icdf: p must be in (0,1)");
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1 - plow;
    double x;
    if (p < plow) {
        double q = std::sqrt(-2 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    } else if (p <= phigh) {
        double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
    } else {
        double q = std::sqrt(-2 * std::log(1 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    const double e = normal_cdf(x) - p;
    const double u = e * std::sqrt(2 * 3.14159265358979323846) * std::exp(x * x / 2);
    x = x - u / (1 + x * u / 2);
    return x;
}

// --- Scores ---------------------------------------------------------------------

double score_s1(const std::vector<std::vector<double>>& contributions, double endowment) {
    if (endowment <= 0.0) throw std::invalid_argument("score_s1: endowment must be > 0");
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& row : contributions) {
        for (double c : row) {
            if (c < -1e-9 || c > endowment + 1e-9)
                throw std::invalid_argument("score_s1: contribution out of [0, E]");
            sum += c;
            ++n;
        }
    }
    if (n == 0) throw std::invalid_argument("score_s1: empty matrix");
    return (sum / static_cast<double>(n)) * (100.0 / endowment);
}

double score_s2(const std::vector<std::vector<double>>& choices) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& row : choices) {
        for (double c : row) {
            if (c < -1e-9 || c > 100.0 + 1e-9)
                throw std::invalid_argument("score_s2: choice out of [0, 100]");
            sum += c;
            ++n;
        }
    }
    if (n == 0) throw std::invalid_argument("score_s2: empty matrix");
    return 100.0 - sum / static_cast<double>(n);
}

double score_s4(const std::vector<std::pair<double, double>>& session_profits) {
    if (session_profits.empty()) throw std::invalid_argument("score_s4: no sessions");
    double sum = 0.0;
    for (const auto& [a, b] : session_profits) sum += std::abs(a - b);
    return sum / static_cast<double>(session_profits.size());
}

// --- TrueSkill ---------------------------------------------------------------------

void TrueSkillParams::validate() const {
    if (beta <= 0.0) throw std::invalid_argument("TrueSkillParams: beta must be > 0");
    if (gamma < 0.0) throw std::invalid_argument("TrueSkillParams: gamma must be >= 0");
    if (draw_probability < 0.0 || draw_probability >= 1.0)
        throw std::invalid_argument("TrueSkillParams: draw_probability must be in [0,1)");
}

double TrueSkillParams::draw_margin() const {
    if (draw_probability <= 0.0) return 0.0;
    return normal_icdf((draw_probability + 1.0) / 2.0) * kSqrt2 * beta;
}

namespace {

// Truncated-Gaussian moment-matching corrections (win and draw cases).
double v_win(double t, double eps) {
    const double x = t - eps;
    const double denom = normal_cdf(x);
    if (denom < 1e-300) return -x;  // asymptotic limit of pdf/cdf
    return normal_pdf(x) / denom;
}

double w_win(double t, double eps) {
    const double v = v_win(t, eps);
    return v * (v + t - eps);
}

double v_draw(double t, double eps) {
    const double ad = std::abs(t);
    const double a = eps - ad, b = -eps - ad;
    const double denom = normal_cdf(a) - normal_cdf(b);
    double v;
    if (denom < 1e-300)
        v = a;
    else
        v = (normal_pdf(b) - normal_pdf(a)) / denom;
    return t < 0.0 ? -v : v;
}

double w_draw(double t, double eps) {
    const double ad = std::abs(t);
    const double a = eps - ad, b = -eps - ad;
    const double denom = normal_cdf(a) - normal_cdf(b);
    if (denom < 1e-300) return 1.0;
    const double v = v_draw(ad, eps);
    return v * v + (a * normal_pdf(a) - b * normal_pdf(b)) / denom;
}

struct Belief {
    double mu;
    double var;
};

// One adjacent pair update: hi is the better-ranked player (or the listed-first
// one on a draw).
void pair_update(Belief& hi, Belief& lo, bool draw, const TrueSkillParams& p) {
    const double c2 = hi.var + lo.var + 2.0 * p.beta * p.beta;
    const double c = std::sqrt(c2);
    const double t = (hi.mu - lo.mu) / c;
    const double eps = p.draw_margin() / c;
    double v, w;
    if (draw) {
        v = v_draw(t, eps);
        w = w_draw(t, eps);
    } else {
        v = v_win(t, eps);
        w = w_win(t, eps);
    }
    hi.mu += hi.var / c * v;
    lo.mu -= lo.var / c * v;
    hi.var *= std::max(1.0 - hi.var / c2 * w, 1e-12);
    lo.var *= std::max(1.0 - lo.var / c2 * w, 1e-12);
}

}  // namespace

std::vector<Rating> trueskill_update(const std::vector<Rating>& ratings,
                                     const std::vector<int>& ranks,
                                     const TrueSkillParams& params) {
    params.validate();
    if (ratings.size() != ranks.size())
        throw std::invalid_argument("trueskill_update: ratings/ranks size mismatch");
    if (ratings.empty()) throw std::invalid_argument("trueskill_update: empty match");
    for (int r : ranks)
        if (r < 1) throw std::invalid_argument("trueskill_update: ranks must be >= 1");

    std::vector<Belief> beliefs(ratings.size());
    for (std::size_t i = 0; i < ratings.size(); ++i) {
        beliefs[i].mu = ratings[i].mu;
        beliefs[i].var = ratings[i].sigma * ratings[i].sigma + params.gamma * params.gamma;
    }

    // Canonical processing order: rank, then rating, so the chained pair
    // updates do not depend on the listing order of tied players.
    std::vector<std::size_t> order(ratings.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (ranks[a] != ranks[b]) return ranks[a] < ranks[b];
        if (ratings[a].mu != ratings[b].mu) return ratings[a].mu > ratings[b].mu;
        return ratings[a].sigma < ratings[b].sigma;
    });

    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        const std::size_t hi = order[i], lo = order[i + 1];
        pair_update(beliefs[hi], beliefs[lo], ranks[hi] == ranks[lo], params);
    }

    std::vector<Rating> out(ratings.size());
    for (std::size_t i = 0; i < ratings.size(); ++i) {
        out[i].mu = beliefs[i].mu;
        out[i].sigma = std::sqrt(beliefs[i].var);
    }
    return out;
}

std::vector<Rating> trueskill_update(const std::vector<Rating>& ratings,
                                     const MatchResult& result, const TrueSkillParams& params) {
    if (result.participants.size() != result.ranks.size())
        throw std::invalid_argument("trueskill_update: participants/ranks size mismatch");
    if (result.participants.size() != ratings.size())
        throw std::invalid_argument("trueskill_update: ratings/participants size mismatch");
    return trueskill_update(ratings, result.ranks, params);
}

std::pair<Rating, Rating> trueskill_oracle_2p(const Rating& a, const Rating& b, int outcome,
                                              const TrueSkillParams& params, int grid_n) {
    params.validate();
    const double eps = params.draw_margin();
    const double sb = kSqrt2 * params.beta;  // std of p1 - p2 given skills

    const double va = a.sigma * a.sigma + params.gamma * params.gamma;
    const double vb = b.sigma * b.sigma + params.gamma * params.gamma;
    const double sa = std::sqrt(va), sbv = std::sqrt(vb);

    auto likelihood = [&](double s1, double s2) {
        const double d = s1 - s2;
        if (outcome > 0) return normal_cdf((d - eps) / sb);
        if (outcome < 0) return normal_cdf((-d - eps) / sb);
        return normal_cdf((eps - d) / sb) - normal_cdf((-eps - d) / sb);
    };

    // Simpson weights over [mu - 8 std, mu + 8 std] on each axis.
    const int n = grid_n % 2 == 0 ? grid_n : grid_n + 1;
    const double lo1 = a.mu - 8.0 * sa, hi1 = a.mu + 8.0 * sa;
    const double lo2 = b.mu - 8.0 * sbv, hi2 = b.mu + 8.0 * sbv;
    const double h1 = (hi1 - lo1) / n, h2 = (hi2 - lo2) / n;

    auto simpson_w = [n](int i) { return i == 0 || i == n ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0); };

    double z = 0.0, m1 = 0.0, m2 = 0.0, q1 = 0.0, q2 = 0.0;
    std::vector<double> prior2(static_cast<std::size_t>(n) + 1);
    for (int j = 0; j <= n; ++j) {
        const double s2 = lo2 + h2 * j;
        prior2[static_cast<std::size_t>(j)] = normal_pdf((s2 - b.mu) / sbv) / sbv;
    }
    for (int i = 0; i <= n; ++i) {
        const double s1 = lo1 + h1 * i;
        const double p1 = normal_pdf((s1 - a.mu) / sa) / sa;
        const double wi = simpson_w(i);
        for (int j = 0; j <= n; ++j) {
            const double s2 = lo2 + h2 * j;
            const double f = p1 * prior2[static_cast<std::size_t>(j)] * likelihood(s1, s2) *
                             wi * simpson_w(j);
            z += f;
            m1 += f * s1;
            m2 += f * s2;
            q1 += f * s1 * s1;
            q2 += f * s2 * s2;
        }
    }
    m1 /= z;
    m2 /= z;
    q1 = q1 / z - m1 * m1;
    q2 = q2 / z - m2 * m2;

    Rating ra{m1, std::sqrt(std::max(q1, 1e-12))};
    Rating rb{m2, std::sqrt(std::max(q2, 1e-12))};
    return {ra, rb};
}

std::vector<LeaderboardRow> leaderboard(const std::vector<std::string>& labels,
                                        const std::vector<MatchResult>& history,
                                        const TrueSkillParams& params) {
    std::vector<LeaderboardRow> rows;
    rows.reserve(labels.size());
    for (const auto& l : labels) rows.push_back({l, Rating{}, 0.0});

    auto index_of = [&](const std::string& label) -> std::size_t {
        for (std::size_t i = 0; i < rows.size(); ++i)
            if (rows[i].label == label) return i;
        throw NotFoundError("leaderboard: unknown participant label: " + label);
    };

    for (const auto& match : history) {
        if (match.participants.size() != match.ranks.size())
            throw std::invalid_argument("leaderboard: participants/ranks size mismatch");
        std::vector<Rating> in;
        std::vector<std::size_t> idx;
        in.reserve(match.participants.size());
        for (const auto& p : match.participants) {
            idx.push_back(index_of(p));
            in.push_back(rows[idx.back()].rating);
        }
        auto out = trueskill_update(in, match.ranks, params);
        for (std::size_t i = 0; i < idx.size(); ++i) rows[idx[i]].rating = out[i];
    }
    for (auto& r : rows) r.conservative = r.rating.mu - 3.0 * r.rating.sigma;
    std::stable_sort(rows.begin(), rows.end(), [](const LeaderboardRow& x, const LeaderboardRow& y) {
        return x.conservative > y.conservative;
    });
    return rows;
}

}  // namespace selfgoal
