#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "selfgoal/agents.hpp"
#include "selfgoal/backend.hpp"
#include "selfgoal/environments.hpp"
#include "selfgoal/metrics.hpp"

namespace selfgoal {

struct TranscriptEvent {
    long seq = 0;
    int repeat = 0;
    int round = 0;
    std::string agent;  // empty for environment-level events
    std::string kind;   // prompt | reply | action | env_announcement | tree_insert |
                        // tree_prune | search_selection | warning
    nlohmann::json payload;

    nlohmann::json to_json() const;
    static TranscriptEvent from_json(const nlohmann::json& j);
};

struct AgentConfig {
    std::string label;
    PolicySpec policy;
    nlohmann::json backend;       // backend spec; may be null for rule agents
    nlohmann::json tree_backend;  // optional separate tree-construction backend
};

struct ExperimentConfig {
    EnvSpec env;
    std::vector<AgentConfig> agents;
    std::uint64_t master_seed = 0;
    std::string output_dir = "runs";
    bool snapshot_trees = false;
    bool persist_memory = true;  // trees/reflections/learnings persist across repeats
    int parallelism = 1;
    std::string base_dir;  // directory of the config file; resolves script paths

    void validate() const;
    nlohmann::json to_json() const;
    static ExperimentConfig from_json(const nlohmann::json& j, std::string base_dir = "");
    static ExperimentConfig load(const std::string& path);
    std::string digest() const;
};

struct RunRecord {
    std::string dir;
    std::string config_digest;
    std::string record_digest;  // over events + outcomes + scores; wall clock excluded
    nlohmann::json config;
    std::vector<TranscriptEvent> events;
    std::vector<GameOutcome> outcomes;
    nlohmann::json scores;
    nlohmann::json meta;
    bool complete = false;
};

/// Runs the configured experiment: T repeats with per-repeat seeds derived
/// from the master seed, memory persisting across repeats unless disabled.
/// The record is written to <output_dir>/<config_digest>/ as it is produced.
/// A BackendUnavailable abort flushes a partial record marked incomplete.
RunRecord run_experiment(const ExperimentConfig& config);

/// Backend factory from a config fragment:
///   {"kind":"scripted","script":"replies.json"} or inline {"replies":{...}}
///   {"kind":"http","base_url":...,"model":...,"credential_env":...}
/// Any spec may add "cache_dir" for the content-addressed cache wrapper.
std::shared_ptr<Backend> make_backend(const nlohmann::json& spec, const std::string& base_dir);

// --- Ablation harnesses -----------------------------------------------------------

struct SweepRow {
    double xi = 0.0;
    double score = 0.0;
    double uncertainty = 0.0;
    long tree_nodes = 0;
    std::string record_dir;
};

/// Runs one experiment per xi value (seeds held fixed), overriding the
/// similarity threshold of every SelfGoal agent. Rows come back in input order.
std::vector<SweepRow> sweep_xi(const ExperimentConfig& base, const std::vector<double>& xi_values);
std::string sweep_table(const std::vector<SweepRow>& rows);

// --- Record access ------------------------------------------------------------------

RunRecord load_record(const std::string& dir);

std::string report_text(const RunRecord& record);
std::string report_csv(const RunRecord& record);

struct ReplayFilter {
    std::optional<std::string> agent;
    std::optional<std::string> kind;
    std::optional<int> round;
    std::optional<int> repeat;
};
std::string replay_text(const RunRecord& record, const ReplayFilter& filter);

/// Latest (or specific-round) serialized tree snapshot for an agent.
std::string tree_snapshot_dump(const std::string& record_dir, const std::string& agent,
                               std::optional<int> round);

// --- Match-history ratings (CLI `rate`) ------------------------------------------------

/// One result per line: "alice=1 bob=2 carol=2". '#' starts a comment.
std::vector<MatchResult> parse_match_history(const std::string& content);
std::string ratings_table(const std::vector<LeaderboardRow>& rows);
std::string ratings_csv(const std::vector<LeaderboardRow>& rows);

}  // namespace selfgoal
