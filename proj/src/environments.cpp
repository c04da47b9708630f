#include "selfgoal/environments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <regex>
#include <sstream>
#include <stdexcept>

#include "selfgoal/errors.hpp"
#include "selfgoal/rng.hpp"

namespace selfgoal {

using nlohmann::json;

std::string env_kind_name(EnvKind k) {
    switch (k) {
        case EnvKind::public_goods: return "public_goods";
        case EnvKind::guess_two_thirds: return "guess_two_thirds";
        case EnvKind::auction: return "auction";
        case EnvKind::bargaining: return "bargaining";
    }
    return "public_goods";
}

EnvKind env_kind_from_name(const std::string& s) {
    if (s == "public_goods") return EnvKind::public_goods;
    if (s == "guess_two_thirds") return EnvKind::guess_two_thirds;
    if (s == "auction") return EnvKind::auction;
    if (s == "bargaining") return EnvKind::bargaining;
    throw ConfigError("unknown environment kind: " + s);
}

namespace {

std::vector<double> default_item_values() {
    std::vector<double> v;
    for (double value = 2000.0; value <= 10000.0; value += 2000.0)
        for (int copy = 0; copy < 3; ++copy) v.push_back(value);
    return v;
}

// Integral values print without decimals, otherwise two places.
std::string fmt_num(double v) {
    if (std::abs(v - std::round(v)) < 1e-9) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.0f", v);
        return buf;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string fmt_money(double v) { return "$" + fmt_num(v); }

constexpr const char* kItemNames[3] = {"books", "hats", "balls"};

}  // namespace

EnvSpec EnvSpec::defaults(EnvKind kind) {
    EnvSpec s;
    s.kind = kind;
    switch (kind) {
        case EnvKind::public_goods:
        case EnvKind::guess_two_thirds:
            s.n_players = 5;
            s.repeats = 20;
            break;
        case EnvKind::auction:
            s.n_players = 4;
            s.repeats = 10;
            s.auction.item_values = default_item_values();
            break;
        case EnvKind::bargaining:
            s.n_players = 2;
            s.repeats = 50;
            break;
    }
    return s;
}

void EnvSpec::validate() const {
    if (n_players < 2) throw ConfigError("env: n_players must be >= 2");
    if (repeats < 1) throw ConfigError("env: repeats must be >= 1");
    switch (kind) {
        case EnvKind::public_goods:
            if (pg.multiplier < 1.0 || pg.multiplier > n_players)
                throw ConfigError("public_goods: multiplier must satisfy 1 <= R <= N");
            if (pg.endowment <= 0) throw ConfigError("public_goods: endowment must be > 0");
            break;
        case EnvKind::guess_two_thirds:
            break;
        case EnvKind::auction:
            if (auction.budget <= 0) throw ConfigError("auction: budget must be > 0");
            if (auction.min_increment <= 0) throw ConfigError("auction: min_increment must be > 0");
            if (auction.item_values.empty()) throw ConfigError("auction: no items");
            break;
        case EnvKind::bargaining:
            if (n_players != 2) throw ConfigError("bargaining: exactly 2 players");
            if (bargain.round_cap < 1) throw ConfigError("bargaining: round_cap must be >= 1");
            break;
    }
}

json EnvSpec::to_json() const {
    json j{{"kind", env_kind_name(kind)},
           {"n_players", n_players},
           {"repeats", repeats},
           {"seed", seed}};
    switch (kind) {
        case EnvKind::public_goods:
            j["params"] = {{"multiplier", pg.multiplier}, {"endowment", pg.endowment}};
            break;
        case EnvKind::guess_two_thirds:
            j["params"] = json::object();
            break;
        case EnvKind::auction:
            j["params"] = {{"item_values", auction.item_values},
                           {"budget", auction.budget},
                           {"min_increment", auction.min_increment},
                           {"starting_price_fraction", auction.starting_price_fraction},
                           {"estimate_noise", auction.estimate_noise}};
            break;
        case EnvKind::bargaining:
            j["params"] = {{"round_cap", bargain.round_cap}};
            break;
    }
    return j;
}

EnvSpec EnvSpec::from_json(const json& j) {
    EnvSpec s = defaults(env_kind_from_name(j.at("kind").get<std::string>()));
    s.n_players = j.value("n_players", s.n_players);
    s.repeats = j.value("repeats", s.repeats);
    s.seed = j.value("seed", s.seed);
    const json p = j.value("params", json::object());
    switch (s.kind) {
        case EnvKind::public_goods:
            s.pg.multiplier = p.value("multiplier", s.pg.multiplier);
            s.pg.endowment = p.value("endowment", s.pg.endowment);
            break;
        case EnvKind::guess_two_thirds:
            break;
        case EnvKind::auction:
            if (p.contains("item_values"))
                s.auction.item_values = p["item_values"].get<std::vector<double>>();
            s.auction.budget = p.value("budget", s.auction.budget);
            s.auction.min_increment = p.value("min_increment", s.auction.min_increment);
            s.auction.starting_price_fraction =
                p.value("starting_price_fraction", s.auction.starting_price_fraction);
            s.auction.estimate_noise = p.value("estimate_noise", s.auction.estimate_noise);
            break;
        case EnvKind::bargaining:
            s.bargain.round_cap = p.value("round_cap", s.bargain.round_cap);
            break;
    }
    s.validate();
    return s;
}

// --- Pure accounting ----------------------------------------------------------

std::vector<double> pg_payoffs(const std::vector<double>& contributions, double R, int N,
                               double E, std::vector<std::string>* warnings) {
    if (static_cast<int>(contributions.size()) != N)
        throw std::invalid_argument("pg_payoffs: need exactly N contributions");
    std::vector<double> c = contributions;
    for (std::size_t i = 0; i < c.size(); ++i) {
        double clamped = std::clamp(c[i], 0.0, E);
        if (clamped != c[i]) {
            if (warnings)
                warnings->push_back("player " + std::to_string(i) + " contribution " +
                                    fmt_num(c[i]) + " clamped to " + fmt_num(clamped));
            c[i] = clamped;
        }
    }
    const double pot = std::accumulate(c.begin(), c.end(), 0.0);
    const double share = R * pot / N;
    std::vector<double> payoffs(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) payoffs[i] = (E - c[i]) + share;
    return payoffs;
}

double pg_best_response(const std::vector<double>& opponent_contribs, double R, int N, double E) {
    const int limit = static_cast<int>(std::floor(E));
    double best_payoff = -1.0;
    int best_c = 0;
    for (int c = 0; c <= limit; ++c) {
        const double pot =
            std::accumulate(opponent_contribs.begin(), opponent_contribs.end(), 0.0) + c;
        const double payoff = (E - c) + R * pot / N;
        if (payoff > best_payoff + 1e-12) {
            best_payoff = payoff;
            best_c = c;
        }
    }
    return best_c;
}

G23Result g23_winners(const std::vector<double>& choices) {
    if (choices.empty()) throw std::invalid_argument("g23_winners: empty choices");
    G23Result r;
    r.clamped_choices.reserve(choices.size());
    for (double c : choices) r.clamped_choices.push_back(std::clamp(c, 0.0, 100.0));
    const double mean =
        std::accumulate(r.clamped_choices.begin(), r.clamped_choices.end(), 0.0) /
        static_cast<double>(r.clamped_choices.size());
    r.target = mean * 2.0 / 3.0;
    double best = -1.0;
    for (double c : r.clamped_choices) {
        const double d = std::abs(c - r.target);
        if (best < 0.0 || d < best) best = d;
    }
    for (std::size_t i = 0; i < r.clamped_choices.size(); ++i)
        if (std::abs(r.clamped_choices[i] - r.target) == best)
            r.winners.push_back(static_cast<int>(i));
    return r;
}

BargainSession BargainSession::generate(std::uint64_t seed) {
    Rng rng(seed);
    BargainSession s;
    while (true) {
        for (auto& c : s.pool) c = 1 + rng.below_int(4);
        bool ok = true;
        for (int agent = 0; agent < 2 && ok; ++agent) {
            bool found = false;
            for (int tries = 0; tries < 1000 && !found; ++tries) {
                std::array<int, 3> v{};
                int total = 0;
                for (int t = 0; t < 3; ++t) {
                    v[static_cast<std::size_t>(t)] = rng.below_int(11);
                    total += s.pool[static_cast<std::size_t>(t)] * v[static_cast<std::size_t>(t)];
                }
                if (total == 10) {
                    s.values[static_cast<std::size_t>(agent)] = v;
                    found = true;
                }
            }
            ok = found;
        }
        if (ok) return s;
    }
}

// --- Action grammar ----------------------------------------------------------

namespace {

std::string lowercase(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

// Removes thousands separators so "$5,000" parses as one number.
std::string strip_digit_commas(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == ',' && i > 0 && i + 1 < s.size() &&
            std::isdigit(static_cast<unsigned char>(s[i - 1])) &&
            std::isdigit(static_cast<unsigned char>(s[i + 1])))
            continue;
        out.push_back(s[i]);
    }
    return out;
}

std::optional<double> last_number(const std::string& reply) {
    static const std::regex num_re(R"([-+]?(\d+(\.\d+)?|\.\d+))");
    const std::string cleaned = strip_digit_commas(reply);
    std::optional<double> out;
    for (auto it = std::sregex_iterator(cleaned.begin(), cleaned.end(), num_re);
         it != std::sregex_iterator(); ++it)
        out = std::stod(it->str());
    return out;
}

std::optional<int> last_labeled_count(const std::string& lower, const char* name) {
    const std::regex re(std::string(name) + R"(s?\s*[:=]\s*(\d+))");
    std::optional<int> out;
    for (auto it = std::sregex_iterator(lower.begin(), lower.end(), re);
         it != std::sregex_iterator(); ++it)
        out = std::stoi((*it)[1].str());
    return out;
}

}  // namespace

std::optional<json> parse_action(const EnvSpec& spec, const std::string& reply) {
    switch (spec.kind) {
        case EnvKind::public_goods: {
            auto n = last_number(reply);
            if (!n) return std::nullopt;
            return json{{"contribute", *n}};
        }
        case EnvKind::guess_two_thirds: {
            auto n = last_number(reply);
            if (!n) return std::nullopt;
            return json{{"number", *n}};
        }
        case EnvKind::auction: {
            const std::string lower = lowercase(reply);
            if (lower.find("withdraw") != std::string::npos) return json{{"withdraw", true}};
            auto n = last_number(reply);
            if (!n) return std::nullopt;
            return json{{"bid", *n}};
        }
        case EnvKind::bargaining: {
            const std::string lower = lowercase(reply);
            auto b = last_labeled_count(lower, "book");
            auto h = last_labeled_count(lower, "hat");
            auto l = last_labeled_count(lower, "ball");
            if (b && h && l) return json{{"propose", {*b, *h, *l}}};
            if (lower.find("accept") != std::string::npos) return json{{"accept", true}};
            if (lower.find("reject") != std::string::npos ||
                lower.find("decline") != std::string::npos ||
                lower.find("pass") != std::string::npos)
                return json{{"reject", true}};
            return std::nullopt;
        }
    }
    return std::nullopt;
}

json default_action(EnvKind kind) {
    switch (kind) {
        case EnvKind::public_goods: return json{{"contribute", 0.0}};
        case EnvKind::guess_two_thirds: return json{{"number", 50.0}};
        case EnvKind::auction: return json{{"withdraw", true}};
        case EnvKind::bargaining: return json{{"reject", true}};
    }
    return json::object();
}

std::string action_to_text(EnvKind kind, const json& action) {
    switch (kind) {
        case EnvKind::public_goods:
            return "contribute " + fmt_num(action.at("contribute").get<double>());
        case EnvKind::guess_two_thirds:
            return "choose " + fmt_num(action.at("number").get<double>());
        case EnvKind::auction:
            if (action.contains("withdraw")) return "withdraw";
            return "bid " + fmt_num(action.at("bid").get<double>());
        case EnvKind::bargaining:
            if (action.contains("accept")) return "accept";
            if (action.contains("reject")) return "reject";
            {
                const auto& t = action.at("propose");
                std::string s = "propose: ";
                for (int i = 0; i < 3; ++i) {
                    if (i) s += ", ";
                    s += std::string(kItemNames[i]) + "=" + std::to_string(t.at(i).get<int>());
                }
                return s;
            }
    }
    return action.dump();
}

std::string format_reminder(EnvKind kind) {
    return "Your previous reply could not be interpreted as a valid action. " +
           env_action_instruction(kind);
}

// --- Prompt resources ----------------------------------------------------------

std::string env_framing(EnvKind kind) {
    switch (kind) {
        case EnvKind::public_goods:
            return "Imagine you are a player in a public goods game. In every round each "
                   "player privately decides how many of their tokens to contribute to a "
                   "public pot. The pot is multiplied by a fixed factor and divided evenly "
                   "among all players, and you keep any tokens you do not contribute.";
        case EnvKind::guess_two_thirds:
            return "Imagine you are a player in a number-guessing game. Each player "
                   "independently chooses a number between 0 and 100, and whoever picks the "
                   "number closest to two-thirds of the group's average wins the round.";
        case EnvKind::auction:
            return "Imagine you are an agent in an ascending-bid auction. You will compete "
                   "against other bidders in a bidding war. The price steadily increases as "
                   "bidders progressively pull out. Eventually, a single bidder emerges as "
                   "the winner, securing the item at the final bid.";
        case EnvKind::bargaining:
            return "Imagine you are negotiating with a partner over how to divide a set of "
                   "items. Each of you privately values every item. You take turns proposing "
                   "how to split the items, and if no agreement is reached within the round "
                   "limit, neither side receives anything.";
    }
    return "";
}

std::string env_goal(EnvKind kind) {
    switch (kind) {
        case EnvKind::public_goods:
            return "maximize your total token count by the end of the game";
        case EnvKind::guess_two_thirds:
            return "choose a number that you believe will be closest to 2/3 of the average "
                   "of all numbers chosen by players, including your selection";
        case EnvKind::auction:
            return "secure the highest profit at the end of this auction, compared to all "
                   "other bidders";
        case EnvKind::bargaining:
            return "minimize the profit gap between yourself and your partner in this "
                   "negotiation, regardless of your own profit";
    }
    return "";
}

std::string env_task_noun(EnvKind kind) {
    switch (kind) {
        case EnvKind::auction: return "this auction";
        case EnvKind::bargaining: return "this negotiation";
        default: return "this game";
    }
}

std::string env_session_noun(EnvKind kind) {
    switch (kind) {
        case EnvKind::auction: return "auction";
        case EnvKind::bargaining: return "negotiation";
        default: return "game";
    }
}

std::string env_action_instruction(EnvKind kind) {
    switch (kind) {
        case EnvKind::public_goods:
            return "State your action as \"contribute X\" where X is the number of tokens "
                   "you put into the public pot this round.";
        case EnvKind::guess_two_thirds:
            return "State your chosen number plainly, for example \"I choose 42\". It must "
                   "be between 0 and 100.";
        case EnvKind::auction:
            return "Reply either \"bid X\" with a dollar amount, or \"withdraw\" to leave "
                   "the bidding for this item.";
        case EnvKind::bargaining:
            return "Reply either \"accept\" to take the deal currently on the table, or a "
                   "counter-proposal of the form \"propose: books=B, hats=H, balls=L\" "
                   "listing the items YOU would take.";
    }
    return "";
}

// --- Game implementations -------------------------------------------------------

namespace {

class SimultaneousGame : public Game {
public:
    SimultaneousGame(const EnvSpec& spec, std::vector<std::string> labels)
        : spec_(spec), labels_(std::move(labels)) {}

    bool done() const override { return resolved_; }
    int current_player() const override { return static_cast<int>(actions_.size()); }
    int round_index() const override { return 0; }

protected:
    EnvSpec spec_;
    std::vector<std::string> labels_;
    std::vector<double> actions_;
    bool resolved_ = false;
};

class PublicGoodsGame final : public SimultaneousGame {
public:
    using SimultaneousGame::SimultaneousGame;

    EnvKind kind() const override { return EnvKind::public_goods; }

    Observation observe(int) const override {
        const auto& p = spec_.pg;
        Observation obs;
        std::ostringstream ss;
        ss << "A public goods round with " << spec_.n_players << " players begins. You hold "
           << fmt_num(p.endowment) << " tokens. Contributions go into a public pot that is "
           << "multiplied by " << fmt_num(p.multiplier) << " and split evenly among all "
           << spec_.n_players << " players; tokens you keep stay yours. Decide your "
           << "contribution (0 to " << fmt_num(p.endowment) << ").";
        obs.text = ss.str();
        obs.data = {{"endowment", p.endowment},
                    {"multiplier", p.multiplier},
                    {"n_players", spec_.n_players}};
        return obs;
    }

    std::string validate(int, const json&) const override { return ""; }

    StepResult apply(int player, const json& action) override {
        StepResult res;
        double c = action.at("contribute").get<double>();
        const double clamped = std::clamp(c, 0.0, spec_.pg.endowment);
        if (clamped != c)
            res.warnings.push_back(labels_[static_cast<std::size_t>(player)] +
                                   ": contribution " + fmt_num(c) + " clamped to " +
                                   fmt_num(clamped));
        actions_.push_back(clamped);
        if (static_cast<int>(actions_.size()) == spec_.n_players) {
            payoffs_ = pg_payoffs(actions_, spec_.pg.multiplier, spec_.n_players,
                                  spec_.pg.endowment);
            resolved_ = true;
            res.round_completed = true;
            res.public_announcement = announcement();
        }
        return res;
    }

    std::string round_summary(int player) const override {
        return announcement() + " Your payoff this round: " +
               fmt_num(payoffs_[static_cast<std::size_t>(player)]) + ".";
    }

    GameOutcome outcome() const override {
        GameOutcome out;
        out.payoffs = payoffs_;
        out.log = {{"contributions", actions_}, {"payoffs", payoffs_}};
        return out;
    }

private:
    std::string announcement() const {
        const double pot = std::accumulate(actions_.begin(), actions_.end(), 0.0);
        std::ostringstream ss;
        ss << "Contributions: ";
        for (std::size_t i = 0; i < actions_.size(); ++i) {
            if (i) ss << ", ";
            ss << labels_[i] << "=" << fmt_num(actions_[i]);
        }
        ss << ". Pot after multiplying by " << fmt_num(spec_.pg.multiplier) << ": "
           << fmt_num(pot * spec_.pg.multiplier) << "; each player's share: "
           << fmt_num(pot * spec_.pg.multiplier / spec_.n_players) << ".";
        return ss.str();
    }

    std::vector<double> payoffs_;
};

class GuessGame final : public SimultaneousGame {
public:
    using SimultaneousGame::SimultaneousGame;

    EnvKind kind() const override { return EnvKind::guess_two_thirds; }

    Observation observe(int) const override {
        Observation obs;
        std::ostringstream ss;
        ss << "A guessing round with " << spec_.n_players
           << " players begins. Choose a number between 0 and 100; whoever is closest to "
              "two-thirds of the group's average wins the round.";
        obs.text = ss.str();
        obs.data = {{"n_players", spec_.n_players}};
        return obs;
    }

    std::string validate(int, const json&) const override { return ""; }

    StepResult apply(int player, const json& action) override {
        StepResult res;
        double v = action.at("number").get<double>();
        const double clamped = std::clamp(v, 0.0, 100.0);
        if (clamped != v)
            res.warnings.push_back(labels_[static_cast<std::size_t>(player)] + ": number " +
                                   fmt_num(v) + " clamped to " + fmt_num(clamped));
        actions_.push_back(clamped);
        if (static_cast<int>(actions_.size()) == spec_.n_players) {
            result_ = g23_winners(actions_);
            resolved_ = true;
            res.round_completed = true;
            res.public_announcement = announcement();
        }
        return res;
    }

    std::string round_summary(int player) const override {
        std::string s = announcement();
        const bool won = std::find(result_.winners.begin(), result_.winners.end(), player) !=
                         result_.winners.end();
        return s + (won ? " You won this round." : " You did not win this round.");
    }

    GameOutcome outcome() const override {
        GameOutcome out;
        out.payoffs.assign(static_cast<std::size_t>(spec_.n_players), 0.0);
        out.winners = result_.winners;
        out.log = {{"choices", actions_}, {"target", result_.target}, {"winners", result_.winners}};
        return out;
    }

private:
    std::string announcement() const {
        std::ostringstream ss;
        ss << "Numbers chosen: ";
        for (std::size_t i = 0; i < actions_.size(); ++i) {
            if (i) ss << ", ";
            ss << labels_[i] << "=" << fmt_num(actions_[i]);
        }
        ss << ". Target (2/3 of the average): " << fmt_num(result_.target) << ". Winner(s): ";
        for (std::size_t i = 0; i < result_.winners.size(); ++i) {
            if (i) ss << ", ";
            ss << labels_[static_cast<std::size_t>(result_.winners[i])];
        }
        ss << ".";
        return ss.str();
    }

    G23Result result_;
};

class AuctionGame final : public Game {
public:
    AuctionGame(const EnvSpec& spec, std::vector<std::string> labels, std::uint64_t seed)
        : spec_(spec), labels_(std::move(labels)) {
        Rng rng(seed);
        const int n = spec_.n_players;
        order_.resize(spec_.auction.item_values.size());
        std::iota(order_.begin(), order_.end(), 0);
        rng.shuffle(order_);
        budgets_.assign(static_cast<std::size_t>(n), spec_.auction.budget);
        profits_.assign(static_cast<std::size_t>(n), 0.0);
        estimates_.resize(static_cast<std::size_t>(n));
        for (auto& row : estimates_) {
            row.resize(order_.size());
            for (std::size_t i = 0; i < order_.size(); ++i) {
                const double value = spec_.auction.item_values[static_cast<std::size_t>(order_[i])];
                const double noise = spec_.auction.estimate_noise;
                const double u = noise > 0.0 ? rng.uniform(-noise, noise) : 0.0;
                row[i] = value * (1.0 + u);
            }
        }
        open_item();
    }

    EnvKind kind() const override { return EnvKind::auction; }
    bool done() const override { return item_pos_ >= order_.size(); }
    int round_index() const override { return static_cast<int>(item_pos_); }

    int current_player() const override {
        for (int step = 0; step < spec_.n_players; ++step) {
            const int p = (cursor_ + step) % spec_.n_players;
            if (active_[static_cast<std::size_t>(p)] && p != leader_) return p;
        }
        return 0;  // unreachable while !done()
    }

    Observation observe(int player) const override {
        Observation obs;
        const std::size_t pi = static_cast<std::size_t>(player);
        const double start = starting_price();
        std::ostringstream ss;
        ss << "Item " << (item_pos_ + 1) << " of " << order_.size()
           << " is up for auction. Your estimated value: " << fmt_money(estimates_[pi][item_pos_])
           << ". Starting price: " << fmt_money(start) << ". ";
        if (leader_ >= 0)
            ss << "Current highest bid: " << fmt_money(price_) << " by "
               << labels_[static_cast<std::size_t>(leader_)] << ". ";
        else
            ss << "No bids yet. ";
        ss << "Minimum raise: " << fmt_money(spec_.auction.min_increment)
           << ". Your remaining budget: " << fmt_money(budgets_[pi])
           << ". Your profit so far: " << fmt_money(profits_[pi]) << ".";
        if (!sold_log_.empty()) {
            ss << " Results so far: ";
            for (std::size_t i = 0; i < sold_log_.size(); ++i) {
                if (i) ss << "; ";
                ss << sold_log_[i];
            }
            ss << ".";
        }
        obs.text = ss.str();
        obs.data = {{"item_index", item_pos_},
                    {"estimate", estimates_[pi][item_pos_]},
                    {"starting_price", start},
                    {"min_increment", spec_.auction.min_increment},
                    {"budget", budgets_[pi]},
                    {"required_min", required_min()},
                    {"current_highest", leader_ >= 0 ? json(price_) : json(nullptr)}};
        return obs;
    }

    std::string validate(int, const json&) const override { return ""; }

    StepResult apply(int player, const json& action) override {
        StepResult res;
        const std::size_t pi = static_cast<std::size_t>(player);
        bool withdrew = true;
        if (action.contains("bid")) {
            const double amount = action.at("bid").get<double>();
            if (amount + 1e-9 < required_min()) {
                res.warnings.push_back(labels_[pi] + ": bid " + fmt_money(amount) +
                                       " below required minimum " + fmt_money(required_min()) +
                                       "; treated as withdrawal");
            } else if (amount > budgets_[pi] + 1e-9) {
                res.warnings.push_back(labels_[pi] + ": bid " + fmt_money(amount) +
                                       " exceeds remaining budget " + fmt_money(budgets_[pi]) +
                                       "; treated as withdrawal");
            } else {
                price_ = amount;
                leader_ = player;
                withdrew = false;
            }
        }
        if (withdrew) active_[pi] = false;
        cursor_ = (player + 1) % spec_.n_players;

        bool others_active = false;
        int active_count = 0;
        for (int q = 0; q < spec_.n_players; ++q) {
            if (active_[static_cast<std::size_t>(q)]) {
                ++active_count;
                if (q != leader_) others_active = true;
            }
        }
        if (leader_ >= 0 && !others_active) {
            close_item(true, res);
        } else if (leader_ < 0 && active_count == 0) {
            close_item(false, res);
        }
        return res;
    }

    std::string round_summary(int) const override { return last_result_; }

    GameOutcome outcome() const override {
        GameOutcome out;
        out.payoffs = profits_;
        double best = *std::max_element(profits_.begin(), profits_.end());
        for (std::size_t i = 0; i < profits_.size(); ++i)
            if (profits_[i] == best) out.winners.push_back(static_cast<int>(i));
        out.log = {{"items", item_log_},
                   {"profits", profits_},
                   {"budgets_remaining", budgets_}};
        return out;
    }

private:
    double item_value() const {
        return spec_.auction.item_values[static_cast<std::size_t>(order_[item_pos_])];
    }
    double starting_price() const {
        return item_value() * spec_.auction.starting_price_fraction;
    }
    double required_min() const {
        return leader_ >= 0 ? price_ + spec_.auction.min_increment : starting_price();
    }

    void open_item() {
        price_ = -1.0;
        leader_ = -1;
        active_.assign(static_cast<std::size_t>(spec_.n_players), true);
        cursor_ = 0;
    }

    void close_item(bool sold, StepResult& res) {
        json entry{{"presentation_index", item_pos_},
                   {"source_index", order_[item_pos_]},
                   {"value", item_value()}};
        std::ostringstream ss;
        ss << "Item " << (item_pos_ + 1);
        if (sold) {
            const std::size_t w = static_cast<std::size_t>(leader_);
            budgets_[w] -= price_;
            profits_[w] += item_value() - price_;
            entry["hammer"] = price_;
            entry["winner"] = labels_[w];
            ss << " sold to " << labels_[w] << " for " << fmt_money(price_);
        } else {
            entry["hammer"] = nullptr;
            entry["winner"] = nullptr;
            ss << " passed unsold";
        }
        item_log_.push_back(entry);
        sold_log_.push_back(ss.str());
        last_result_ = ss.str() + ".";
        res.round_completed = true;
        res.public_announcement = last_result_;
        ++item_pos_;
        if (!done()) open_item();
    }

    EnvSpec spec_;
    std::vector<std::string> labels_;
    std::vector<int> order_;
    std::vector<double> budgets_;
    std::vector<double> profits_;
    std::vector<std::vector<double>> estimates_;  // [player][presented item]
    std::size_t item_pos_ = 0;
    double price_ = -1.0;
    int leader_ = -1;
    std::vector<bool> active_;
    int cursor_ = 0;
    json item_log_ = json::array();
    std::vector<std::string> sold_log_;
    std::string last_result_;
};

class BargainGame final : public Game {
public:
    BargainGame(const EnvSpec& spec, std::vector<std::string> labels, std::uint64_t seed)
        : spec_(spec), labels_(std::move(labels)), session_(BargainSession::generate(seed)) {}
    BargainGame(const EnvSpec& spec, std::vector<std::string> labels, BargainSession session)
        : spec_(spec), labels_(std::move(labels)), session_(session) {}

    EnvKind kind() const override { return EnvKind::bargaining; }
    bool done() const override { return agreed_ || rounds_used_ >= spec_.bargain.round_cap; }
    int current_player() const override { return turn_; }
    int round_index() const override { return rounds_used_; }

    Observation observe(int player) const override {
        const std::size_t pi = static_cast<std::size_t>(player);
        Observation obs;
        std::ostringstream ss;
        ss << "You are negotiating how to split a pool of items with "
           << labels_[static_cast<std::size_t>(1 - player)] << ". Pool: ";
        for (int i = 0; i < 3; ++i) {
            if (i) ss << ", ";
            ss << kItemNames[i] << "=" << session_.pool[static_cast<std::size_t>(i)];
        }
        ss << ". Your private per-item values: ";
        for (int i = 0; i < 3; ++i) {
            if (i) ss << ", ";
            ss << kItemNames[i] << "=" << session_.values[pi][static_cast<std::size_t>(i)];
        }
        ss << ". ";
        if (standing_) {
            ss << labels_[static_cast<std::size_t>(standing_->proposer)]
               << " proposes to take ";
            for (int i = 0; i < 3; ++i) {
                if (i) ss << ", ";
                ss << kItemNames[i] << "=" << standing_->take[static_cast<std::size_t>(i)];
            }
            ss << ", leaving you ";
            for (int i = 0; i < 3; ++i) {
                if (i) ss << ", ";
                ss << kItemNames[i] << "="
                   << session_.pool[static_cast<std::size_t>(i)] -
                          standing_->take[static_cast<std::size_t>(i)];
            }
            ss << ". ";
        } else {
            ss << "No proposal is on the table. ";
        }
        ss << "Dialogue round " << (rounds_used_ + 1) << " of " << spec_.bargain.round_cap
           << ". If no agreement is reached within the cap, neither side profits.";
        obs.text = ss.str();

        json your_share = nullptr;
        if (standing_ && standing_->proposer != player) {
            std::array<int, 3> share{};
            for (int i = 0; i < 3; ++i)
                share[static_cast<std::size_t>(i)] =
                    session_.pool[static_cast<std::size_t>(i)] -
                    standing_->take[static_cast<std::size_t>(i)];
            your_share = share;
        }
        obs.data = {{"pool", session_.pool},
                    {"own_values", session_.values[pi]},
                    {"total_value", 10},
                    {"on_table", your_share},
                    {"round", rounds_used_},
                    {"round_cap", spec_.bargain.round_cap}};
        return obs;
    }

    std::string validate(int player, const json& action) const override {
        if (action.contains("accept")) {
            if (!standing_ || standing_->proposer == player)
                return "there is no partner proposal on the table to accept";
            return "";
        }
        if (action.contains("propose")) {
            const auto& take = action.at("propose");
            for (int i = 0; i < 3; ++i) {
                const int t = take.at(i).get<int>();
                if (t < 0 || t > session_.pool[static_cast<std::size_t>(i)])
                    return std::string("proposal takes an invalid count of ") + kItemNames[i] +
                           " (pool has " +
                           std::to_string(session_.pool[static_cast<std::size_t>(i)]) + ")";
            }
            return "";
        }
        return "";  // reject/pass is always acceptable
    }

    StepResult apply(int player, const json& action) override {
        StepResult res;
        res.round_completed = true;
        const std::string& who = labels_[static_cast<std::size_t>(player)];
        if (action.contains("accept") && standing_ && standing_->proposer != player) {
            agreed_ = true;
            const auto& take = standing_->take;
            const std::size_t prop = static_cast<std::size_t>(standing_->proposer);
            const std::size_t acc = 1 - prop;
            for (int i = 0; i < 3; ++i) {
                const std::size_t ii = static_cast<std::size_t>(i);
                profits_[prop] += take[ii] * session_.values[prop][ii];
                profits_[acc] += (session_.pool[ii] - take[ii]) * session_.values[acc][ii];
            }
            res.public_announcement = who + " accepts the proposal.";
        } else if (action.contains("propose")) {
            Standing s;
            s.proposer = player;
            for (int i = 0; i < 3; ++i)
                s.take[static_cast<std::size_t>(i)] = action.at("propose").at(i).get<int>();
            standing_ = s;
            ++rounds_used_;
            res.public_announcement =
                who + " proposes to take " + action_share_text(s.take) + ".";
        } else {
            // reject / pass (including an invalid accept downgraded by the caller)
            standing_.reset();
            ++rounds_used_;
            res.public_announcement = who + " rejects and passes.";
        }
        last_announcement_ = res.public_announcement;
        if (!agreed_ && rounds_used_ >= spec_.bargain.round_cap)
            last_announcement_ += " The round cap was reached; the negotiation ends with no deal.";
        turn_ = 1 - turn_;
        return res;
    }

    std::string round_summary(int) const override { return last_announcement_; }

    GameOutcome outcome() const override {
        GameOutcome out;
        out.payoffs = {profits_[0], profits_[1]};
        if (agreed_) {
            const double best = std::max(profits_[0], profits_[1]);
            for (int i = 0; i < 2; ++i)
                if (profits_[static_cast<std::size_t>(i)] == best) out.winners.push_back(i);
        }
        out.log = {{"agreed", agreed_},
                   {"rounds_used", rounds_used_},
                   {"pool", session_.pool},
                   {"values", session_.values},
                   {"profits", profits_}};
        if (standing_ && agreed_)
            out.log["final_take"] = {{"proposer", standing_->proposer}, {"take", standing_->take}};
        return out;
    }

private:
    struct Standing {
        int proposer = 0;
        std::array<int, 3> take{};
    };

    static std::string action_share_text(const std::array<int, 3>& take) {
        std::string s;
        for (int i = 0; i < 3; ++i) {
            if (i) s += ", ";
            s += std::string(kItemNames[i]) + "=" + std::to_string(take[static_cast<std::size_t>(i)]);
        }
        return s;
    }

    EnvSpec spec_;
    std::vector<std::string> labels_;
    BargainSession session_;
    std::optional<Standing> standing_;
    std::array<double, 2> profits_{0.0, 0.0};
    bool agreed_ = false;
    int rounds_used_ = 0;
    int turn_ = 0;
    std::string last_announcement_;
};

}  // namespace

std::unique_ptr<Game> make_game(const EnvSpec& spec, const std::vector<std::string>& labels,
                                std::uint64_t seed) {
    spec.validate();
    if (static_cast<int>(labels.size()) != spec.n_players)
        throw ConfigError("make_game: label count must equal n_players");
    switch (spec.kind) {
        case EnvKind::public_goods:
            return std::make_unique<PublicGoodsGame>(spec, labels);
        case EnvKind::guess_two_thirds:
            return std::make_unique<GuessGame>(spec, labels);
        case EnvKind::auction:
            return std::make_unique<AuctionGame>(spec, labels, seed);
        case EnvKind::bargaining:
            return std::make_unique<BargainGame>(spec, labels, seed);
    }
    throw ConfigError("make_game: unknown kind");
}

std::unique_ptr<Game> make_bargain_game(const EnvSpec& spec,
                                        const std::vector<std::string>& labels,
                                        const BargainSession& session) {
    spec.validate();
    if (spec.kind != EnvKind::bargaining)
        throw ConfigError("make_bargain_game: spec kind must be bargaining");
    if (static_cast<int>(labels.size()) != spec.n_players)
        throw ConfigError("make_bargain_game: label count must equal n_players");
    return std::make_unique<BargainGame>(spec, labels, session);
}

}  // namespace selfgoal
