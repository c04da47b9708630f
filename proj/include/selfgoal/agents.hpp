#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "selfgoal/backend.hpp"
#include "selfgoal/environments.hpp"
#include "selfgoal/goaltree.hpp"
#include "selfgoal/rng.hpp"

namespace selfgoal {

enum class PolicyKind { selfgoal, react, adapt, reflexion, clin, rule };
enum class SearchStrategy { llm, embedding, random };

std::string policy_kind_name(PolicyKind k);
PolicyKind policy_kind_from_name(const std::string& s);
std::string search_strategy_name(SearchStrategy s);
SearchStrategy search_strategy_from_name(const std::string& s);

struct RuleParams {
    enum class Variant {
        level_k,
        fixed_contribution,
        fixed_number,
        budget_capped_truthful_bidder,
        threshold_negotiator,
        uniform_random,
    };
    Variant variant = Variant::fixed_contribution;
    int k = 1;                  // level_k
    double contribution = 0.0;  // fixed_contribution
    double number = 50.0;       // fixed_number
    double margin = 1.0;        // budget_capped_truthful_bidder
    double accept_floor = 0.5;  // threshold_negotiator
    std::uint64_t seed = 0;     // uniform_random

    nlohmann::json to_json() const;
    static RuleParams from_json(const nlohmann::json& j);
};

struct PolicySpec {
    PolicyKind kind = PolicyKind::react;
    SearchStrategy search_strategy = SearchStrategy::llm;
    TreeConfig tree_config;  // selfgoal only
    RuleParams rule;         // rule only
    int history_window = 0;  // prompt history truncation; 0 = full

    nlohmann::json to_json() const;
    static PolicySpec from_json(const nlohmann::json& j);
};

/// What a policy needs to know about the environment it plays in.
struct PolicyEnv {
    EnvKind kind = EnvKind::public_goods;
    int n_players = 0;
    std::string framing;
    std::string goal;
    std::string task_noun;
    std::string session_noun;
    std::string action_instruction;

    static PolicyEnv for_env(EnvKind kind, int n_players);
};

struct HistoryEntry {
    int round = 0;
    std::string observation;
    std::string action;
    std::string result;
};

/// Receiver for policy-side transcript events (tree_insert, tree_prune,
/// search_selection, warning). The runner stamps repeat/round/agent.
class EventSink {
public:
    virtual ~EventSink() = default;
    virtual void event(const std::string& kind, const nlohmann::json& payload) = 0;
};

double level_k_value(int k);

/// Deterministic rule-agent decision, rendered in the environment's action
/// grammar. Total: always yields a parseable action.
std::string rule_action_text(const RuleParams& params, EnvKind kind, const Observation& obs,
                             Rng& rng);

// ---------------------------------------------------------------------------

class AgentPolicy {
public:
    AgentPolicy(std::string label, EventSink* sink, int history_window);
    virtual ~AgentPolicy() = default;

    /// Called once before the first action of the experiment.
    virtual void begin(const PolicyEnv& env);
    /// Called at the start of every repeat (trial); bounds the history slice
    /// that Reflexion/CLIN review.
    void begin_trial();

    virtual std::string act(const Observation& obs) = 0;
    /// Re-issues the last act prompt plus a reminder (used when the reply did
    /// not parse as an action).
    virtual std::string reask(const std::string& reminder);

    void record_action(const std::string& canonical);
    void record_result(const std::string& result);

    /// Per-timestep memory hook (Reflexion/CLIN regenerate here).
    virtual void on_timestep() {}

    virtual const GoalTree* tree() const { return nullptr; }

    const std::string& label() const { return label_; }
    const std::vector<HistoryEntry>& history() const { return history_; }
    const std::string& last_act_prompt() const { return act_prompt_; }
    int round() const { return round_; }
    const PolicyEnv& env() const { return env_; }

protected:
    std::string render_history(int from_round) const;
    std::string scene_text(const Observation& obs) const;
    std::string trial_history() const { return render_history(trial_start_round_); }
    void note(const std::string& kind, const nlohmann::json& payload);
    std::string complete_via(Backend& backend, const std::string& prompt, const std::string& tag);
    std::string tag(const std::string& module) const;

    std::string label_;
    EventSink* sink_ = nullptr;
    int window_ = 0;
    PolicyEnv env_;
    std::string prompt_base_;
    std::vector<HistoryEntry> history_;
    int round_ = 0;
    int trial_start_round_ = 1;
    bool begun_ = false;
    std::string act_prompt_;
    std::string act_tag_;
    Backend* act_backend_for_reask_ = nullptr;
};

struct SelfGoalStepTrace {
    int round = 0;
    std::vector<std::string> selected_ids;
    std::string action_reply;
    std::vector<std::string> inserted_ids;
    std::vector<std::string> pruned_ids;
};

class SelfGoalPolicy final : public AgentPolicy {
public:
    SelfGoalPolicy(std::string label, EventSink* sink, int history_window,
                   std::shared_ptr<Backend> act_backend, std::shared_ptr<Backend> tree_backend,
                   TreeConfig config, SearchStrategy strategy, std::uint64_t seed);

    void begin(const PolicyEnv& env) override;
    std::string act(const Observation& obs) override;
    const GoalTree* tree() const override { return tree_ ? &*tree_ : nullptr; }
    const SelfGoalStepTrace& last_trace() const { return trace_; }

private:
    std::vector<int> run_search(const std::vector<const GoalNode*>& frontier,
                                const std::string& scene, const Observation& obs,
                                std::string* strategy_used);

    std::shared_ptr<Backend> act_backend_;
    std::shared_ptr<Backend> tree_backend_;
    TreeConfig config_;
    SearchStrategy strategy_;
    Rng rng_;
    std::optional<GoalTree> tree_;
    SelfGoalStepTrace trace_;
};

/// Shared shape of the prompt-only baselines: prompt_base + guidance block +
/// rendered history + current observation.
class LlmPolicy : public AgentPolicy {
public:
    LlmPolicy(std::string label, EventSink* sink, int history_window,
              std::shared_ptr<Backend> backend);
    std::string act(const Observation& obs) override;

protected:
    virtual std::string guidance_block() const = 0;
    std::shared_ptr<Backend> backend_;
};

class ReactPolicy final : public LlmPolicy {
public:
    using LlmPolicy::LlmPolicy;

protected:
    std::string guidance_block() const override;
};

class ReflexionPolicy final : public LlmPolicy {
public:
    using LlmPolicy::LlmPolicy;
    void on_timestep() override;
    const std::vector<std::string>& reflections() const { return reflections_; }

protected:
    std::string guidance_block() const override;

private:
    std::vector<std::string> reflections_;
};

class ClinPolicy final : public LlmPolicy {
public:
    using LlmPolicy::LlmPolicy;
    void on_timestep() override;
    const std::vector<std::string>& learnings() const { return learnings_; }

protected:
    std::string guidance_block() const override;

private:
    std::vector<std::string> learnings_;
};

class AdaptPolicy final : public LlmPolicy {
public:
    using LlmPolicy::LlmPolicy;
    void begin(const PolicyEnv& env) override;
    const std::string& plan() const { return plan_; }

protected:
    std::string guidance_block() const override;

private:
    std::string plan_;
    bool planned_ = false;
};

class RulePolicy final : public AgentPolicy {
public:
    RulePolicy(std::string label, EventSink* sink, RuleParams params, std::uint64_t seed);
    std::string act(const Observation& obs) override;
    std::string reask(const std::string& reminder) override;

private:
    RuleParams params_;
    Rng rng_;
    std::string last_action_;
};

std::unique_ptr<AgentPolicy> make_policy(const std::string& label, const PolicySpec& spec,
                                         std::shared_ptr<Backend> act_backend,
                                         std::shared_ptr<Backend> tree_backend, EventSink* sink,
                                         std::uint64_t seed);

}  // namespace selfgoal
