#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace selfgoal {

enum class EnvKind { public_goods, guess_two_thirds, auction, bargaining };

std::string env_kind_name(EnvKind k);
EnvKind env_kind_from_name(const std::string& s);

struct PublicGoodsParams {
    double multiplier = 2.0;   // R, 1 <= R <= N
    double endowment = 100.0;  // tokens per player per round
};

struct AuctionParams {
    std::vector<double> item_values;  // defaults to 2000..10000 step 2000, 3 copies each
    double budget = 20000.0;
    double min_increment = 100.0;
    double starting_price_fraction = 0.5;
    double estimate_noise = 0.0;  // 0 -> estimates equal true values
};

struct BargainParams {
    int round_cap = 10;
};

struct EnvSpec {
    EnvKind kind = EnvKind::public_goods;
    int n_players = 5;
    int repeats = 20;
    std::uint64_t seed = 0;
    PublicGoodsParams pg;
    AuctionParams auction;
    BargainParams bargain;

    static EnvSpec defaults(EnvKind kind);
    void validate() const;
    nlohmann::json to_json() const;
    static EnvSpec from_json(const nlohmann::json& j);
};

struct Observation {
    std::string text;
    nlohmann::json data;  // structured view of the same state, for rule agents
};

struct GameOutcome {
    std::vector<double> payoffs;
    std::vector<int> winners;  // empty where the game defines none
    nlohmann::json log;
};

struct StepResult {
    bool round_completed = false;
    std::vector<std::string> warnings;
    std::string public_announcement;  // nonempty when round_completed
};

/// One turn-based game instance. Observations never leak another player's
/// private state; identical state renders identically.
class Game {
public:
    virtual ~Game() = default;
    virtual EnvKind kind() const = 0;
    virtual bool done() const = 0;
    virtual int current_player() const = 0;
    virtual int round_index() const = 0;
    virtual Observation observe(int player) const = 0;
    /// Empty string when the action is acceptable; otherwise a description
    /// used for the single re-ask.
    virtual std::string validate(int player, const nlohmann::json& action) const = 0;
    virtual StepResult apply(int player, const nlohmann::json& action) = 0;
    /// Per-player summary of the round that just completed.
    virtual std::string round_summary(int player) const = 0;
    virtual GameOutcome outcome() const = 0;
};

std::unique_ptr<Game> make_game(const EnvSpec& spec, const std::vector<std::string>& labels,
                                std::uint64_t seed);

/// Bargaining game over an explicit session instead of a seeded one.
struct BargainSession;
std::unique_ptr<Game> make_bargain_game(const EnvSpec& spec,
                                        const std::vector<std::string>& labels,
                                        const BargainSession& session);

// --- Action grammar ----------------------------------------------------------

/// Extracts the environment's action from free text; nullopt when nothing
/// parseable is present (caller re-asks once, then falls back to
/// default_action).
std::optional<nlohmann::json> parse_action(const EnvSpec& spec, const std::string& reply);
nlohmann::json default_action(EnvKind kind);
std::string action_to_text(EnvKind kind, const nlohmann::json& action);
std::string format_reminder(EnvKind kind);

// --- Pure accounting ----------------------------------------------------------

/// payoff_i = (E - c_i) + (R/N) * sum(c). Out-of-range contributions are
/// clamped; a note per clamp is appended to `warnings` when provided.
std::vector<double> pg_payoffs(const std::vector<double>& contributions, double R, int N,
                               double E, std::vector<std::string>* warnings = nullptr);

/// Brute-force best own contribution (integer grid 0..E) against fixed
/// opponents; lowest contribution wins ties.
double pg_best_response(const std::vector<double>& opponent_contribs, double R, int N, double E);

struct G23Result {
    double target = 0.0;
    std::vector<int> winners;
    std::vector<double> clamped_choices;
};
G23Result g23_winners(const std::vector<double>& choices);

/// One bargaining instance: item pool and both agents' private unit values.
/// Each agent's total valuation of the full pool is exactly 10.
struct BargainSession {
    std::array<int, 3> pool{};                     // books, hats, balls
    std::array<std::array<int, 3>, 2> values{};    // per agent
    static BargainSession generate(std::uint64_t seed);
};

// --- Prompt resources ----------------------------------------------------------

std::string env_framing(EnvKind kind);
std::string env_goal(EnvKind kind);
std::string env_task_noun(EnvKind kind);     // "this auction", "this game", ...
std::string env_session_noun(EnvKind kind);  // "auction", "game", "negotiation"
std::string env_action_instruction(EnvKind kind);

}  // namespace selfgoal
