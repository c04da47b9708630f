#include "selfgoal/agents.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "selfgoal/digest.hpp"
#include "selfgoal/errors.hpp"
#include "selfgoal/parsers.hpp"
#include "selfgoal/prompts.hpp"

namespace selfgoal {

using nlohmann::json;

std::string policy_kind_name(PolicyKind k) {
    switch (k) {
        case PolicyKind::selfgoal: return "selfgoal";
        case PolicyKind::react: return "react";
        case PolicyKind::adapt: return "adapt";
        case PolicyKind::reflexion: return "reflexion";
        case PolicyKind::clin: return "clin";
        case PolicyKind::rule: return "rule";
    }
    return "react";
}

PolicyKind policy_kind_from_name(const std::string& s) {
    if (s == "selfgoal") return PolicyKind::selfgoal;
    if (s == "react") return PolicyKind::react;
    if (s == "adapt") return PolicyKind::adapt;
    if (s == "reflexion") return PolicyKind::reflexion;
    if (s == "clin") return PolicyKind::clin;
    if (s == "rule") return PolicyKind::rule;
    throw ConfigError("unknown policy kind: " + s);
}

std::string search_strategy_name(SearchStrategy s) {
    switch (s) {
        case SearchStrategy::llm: return "llm";
        case SearchStrategy::embedding: return "embedding";
        case SearchStrategy::random: return "random";
    }
    return "llm";
}

SearchStrategy search_strategy_from_name(const std::string& s) {
    if (s == "llm") return SearchStrategy::llm;
    if (s == "embedding") return SearchStrategy::embedding;
    if (s == "random") return SearchStrategy::random;
    throw ConfigError("unknown search strategy: " + s);
}

namespace {

std::string rule_variant_name(RuleParams::Variant v) {
    switch (v) {
        case RuleParams::Variant::level_k: return "level_k";
        case RuleParams::Variant::fixed_contribution: return "fixed_contribution";
        case RuleParams::Variant::fixed_number: return "fixed_number";
        case RuleParams::Variant::budget_capped_truthful_bidder:
            return "budget_capped_truthful_bidder";
        case RuleParams::Variant::threshold_negotiator: return "threshold_negotiator";
        case RuleParams::Variant::uniform_random: return "uniform_random";
    }
    return "fixed_contribution";
}

RuleParams::Variant rule_variant_from_name(const std::string& s) {
    if (s == "level_k") return RuleParams::Variant::level_k;
    if (s == "fixed_contribution") return RuleParams::Variant::fixed_contribution;
    if (s == "fixed_number") return RuleParams::Variant::fixed_number;
    if (s == "budget_capped_truthful_bidder")
        return RuleParams::Variant::budget_capped_truthful_bidder;
    if (s == "threshold_negotiator") return RuleParams::Variant::threshold_negotiator;
    if (s == "uniform_random") return RuleParams::Variant::uniform_random;
    throw ConfigError("unknown rule variant: " + s);
}

std::string fmt_value(double v) {
    if (std::abs(v - std::round(v)) < 1e-9) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.0f", v);
        return buf;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

}  // namespace

json RuleParams::to_json() const {
    return json{{"variant", rule_variant_name(variant)}, {"k", k},
                {"contribution", contribution},          {"number", number},
                {"margin", margin},                      {"accept_floor", accept_floor},
                {"seed", seed}};
}

RuleParams RuleParams::from_json(const json& j) {
    RuleParams p;
    p.variant = rule_variant_from_name(j.at("variant").get<std::string>());
    p.k = j.value("k", p.k);
    p.contribution = j.value("contribution", p.contribution);
    p.number = j.value("number", p.number);
    p.margin = j.value("margin", p.margin);
    p.accept_floor = j.value("accept_floor", p.accept_floor);
    p.seed = j.value("seed", p.seed);
    return p;
}

json PolicySpec::to_json() const {
    json j{{"kind", policy_kind_name(kind)}, {"history_window", history_window}};
    if (kind == PolicyKind::selfgoal) {
        j["search_strategy"] = search_strategy_name(search_strategy);
        j["tree_config"] = tree_config.to_json();
    }
    if (kind == PolicyKind::rule) j["rule"] = rule.to_json();
    return j;
}

PolicySpec PolicySpec::from_json(const json& j) {
    PolicySpec s;
    s.kind = policy_kind_from_name(j.at("kind").get<std::string>());
    s.history_window = j.value("history_window", 0);
    if (s.kind == PolicyKind::selfgoal) {
        s.search_strategy =
            search_strategy_from_name(j.value("search_strategy", std::string("llm")));
        s.tree_config = TreeConfig::from_json(j.value("tree_config", json::object()));
    }
    if (s.kind == PolicyKind::rule) {
        if (!j.contains("rule")) throw ConfigError("rule policy requires rule parameters");
        s.rule = RuleParams::from_json(j["rule"]);
    }
    return s;
}

PolicyEnv PolicyEnv::for_env(EnvKind kind, int n_players) {
    PolicyEnv e;
    e.kind = kind;
    e.n_players = n_players;
    e.framing = env_framing(kind);
    e.goal = env_goal(kind);
    e.task_noun = env_task_noun(kind);
    e.session_noun = env_session_noun(kind);
    e.action_instruction = env_action_instruction(kind);
    return e;
}

double level_k_value(int k) { return std::pow(2.0 / 3.0, k) * 50.0; }

std::string rule_action_text(const RuleParams& params, EnvKind kind, const Observation& obs,
                             Rng& rng) {
    using V = RuleParams::Variant;
    switch (params.variant) {
        case V::level_k: {
            const double v = level_k_value(params.k);
            return kind == EnvKind::public_goods ? "contribute " + fmt_value(v)
                                                 : "I choose " + fmt_value(v);
        }
        case V::fixed_contribution:
            return "contribute " + fmt_value(params.contribution);
        case V::fixed_number:
            return "I choose " + fmt_value(params.number);
        case V::budget_capped_truthful_bidder: {
            const double required = obs.data.at("required_min").get<double>();
            const double estimate = obs.data.at("estimate").get<double>();
            const double budget = obs.data.at("budget").get<double>();
            const double bid = std::min({required, estimate * params.margin, budget});
            if (bid + 1e-9 < required) return "withdraw";
            return "bid " + fmt_value(bid);
        }
        case V::threshold_negotiator: {
            const auto& values = obs.data.at("own_values");
            const double total = obs.data.at("total_value").get<double>();
            if (!obs.data.at("on_table").is_null()) {
                const auto& share = obs.data.at("on_table");
                double v = 0.0;
                for (int i = 0; i < 3; ++i)
                    v += share.at(i).get<int>() * values.at(i).get<int>();
                if (v >= params.accept_floor * total - 1e-9) return "accept";
            }
            const auto& pool = obs.data.at("pool");
            int take[3];
            for (int i = 0; i < 3; ++i)
                take[i] = values.at(i).get<int>() > 0 ? pool.at(i).get<int>() : 0;
            char buf[96];
            std::snprintf(buf, sizeof(buf), "propose: books=%d, hats=%d, balls=%d", take[0],
                          take[1], take[2]);
            return buf;
        }
        case V::uniform_random: {
            switch (kind) {
                case EnvKind::public_goods: {
                    const double e = obs.data.value("endowment", 100.0);
                    return "contribute " +
                           fmt_value(static_cast<double>(rng.below(
                               static_cast<std::uint64_t>(std::floor(e)) + 1)));
                }
                case EnvKind::guess_two_thirds:
                    return "I choose " + fmt_value(static_cast<double>(rng.below(101)));
                case EnvKind::auction:
                    return "withdraw";
                case EnvKind::bargaining:
                    return "reject";
            }
            return "";
        }
    }
    return "";
}

// --- AgentPolicy base ---------------------------------------------------------

AgentPolicy::AgentPolicy(std::string label, EventSink* sink, int history_window)
    : label_(std::move(label)), sink_(sink), window_(history_window) {}

void AgentPolicy::begin(const PolicyEnv& env) {
    if (begun_) return;
    begun_ = true;
    env_ = env;
    std::ostringstream ss;
    ss << env.framing << "\n\nYou are " << label_ << ", one of " << env.n_players
       << " participants. Your primary objective is: " << env.goal << ".\n"
       << env.action_instruction;
    prompt_base_ = ss.str();
}

void AgentPolicy::begin_trial() { trial_start_round_ = round_ + 1; }

std::string AgentPolicy::render_history(int from_round) const {
    std::ostringstream ss;
    int first = from_round;
    if (window_ > 0 && round_ - window_ + 1 > first) {
        first = round_ - window_ + 1;
        ss << "[earlier rounds omitted]\n";
    }
    bool any = false;
    for (const auto& h : history_) {
        if (h.round < first) continue;
        if (any) ss << "\n";
        any = true;
        ss << "Round " << h.round << ":\n" << h.observation << "\n";
        ss << "Your action: " << (h.action.empty() ? "(pending)" : h.action) << "\n";
        if (!h.result.empty()) ss << "Outcome: " << h.result << "\n";
    }
    return any ? ss.str() : std::string();
}

std::string AgentPolicy::scene_text(const Observation& obs) const {
    std::string s;
    const std::string hist = render_history(1);
    if (!hist.empty()) s += hist + "\n";
    s += "Now, round " + std::to_string(round_) + ":\n" + obs.text;
    return s;
}

void AgentPolicy::note(const std::string& kind, const json& payload) {
    if (sink_) sink_->event(kind, payload);
}

std::string AgentPolicy::complete_via(Backend& backend, const std::string& prompt,
                                      const std::string& tag) {
    CompletionRequest req;
    req.messages.push_back({Role::user, prompt});
    req.temperature = 0.0;
    req.tag = tag;
    return backend.complete(req);
}

std::string AgentPolicy::tag(const std::string& module) const {
    return label_ + "/" + module + "/" + std::to_string(round_);
}

std::string AgentPolicy::reask(const std::string& reminder) {
    if (!act_backend_for_reask_ || act_prompt_.empty())
        throw std::logic_error("reask before any act");
    return complete_via(*act_backend_for_reask_, act_prompt_ + "\n\n" + reminder,
                        act_tag_ + "/retry");
}

void AgentPolicy::record_action(const std::string& canonical) {
    if (!history_.empty()) history_.back().action = canonical;
}

void AgentPolicy::record_result(const std::string& result) {
    if (!history_.empty()) history_.back().result = result;
}

// --- SelfGoal -------------------------------------------------------------------

SelfGoalPolicy::SelfGoalPolicy(std::string label, EventSink* sink, int history_window,
                               std::shared_ptr<Backend> act_backend,
                               std::shared_ptr<Backend> tree_backend, TreeConfig config,
                               SearchStrategy strategy, std::uint64_t seed)
    : AgentPolicy(std::move(label), sink, history_window),
      act_backend_(std::move(act_backend)),
      tree_backend_(std::move(tree_backend)),
      config_(config),
      strategy_(strategy),
      rng_(seed) {
    if (!tree_backend_) tree_backend_ = act_backend_;
}

void SelfGoalPolicy::begin(const PolicyEnv& env) {
    AgentPolicy::begin(env);
    if (tree_) return;
    tree_.emplace(env_.goal, config_);
    const std::string prompt =
        prompts::render(prompts::main_goal_decomposition(),
                        {{"scene", env_.framing},
                         {"task_noun", env_.task_noun},
                         {"goal", env_.goal}});
    const std::string reply =
        complete_via(*tree_backend_, prompt, label_ + "/decompose-main/0");
    const auto candidates = parse_subgoal_list(reply, config_.max_children_per_decompose);
    BackendEmbedding embedder(tree_backend_);
    const auto accepted = tree_->filter_candidates(candidates, embedder);
    if (!accepted.empty()) {
        auto ids = tree_->insert_children("root", accepted, 0);
        note("tree_insert", {{"parent", "root"}, {"ids", ids}, {"texts", accepted}});
    }
}

std::vector<int> SelfGoalPolicy::run_search(const std::vector<const GoalNode*>& frontier,
                                            const std::string& scene, const Observation& obs,
                                            std::string* strategy_used) {
    const int n = static_cast<int>(frontier.size());
    const int k = config_.search_k;
    if (n <= k) {
        // Nothing to choose between; every leaf fits in the window.
        *strategy_used = "all-leaves";
        std::vector<int> all(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
        return all;
    }
    switch (strategy_) {
        case SearchStrategy::random: {
            *strategy_used = "random";
            return rng_.sample_indices(n, k);
        }
        case SearchStrategy::embedding: {
            *strategy_used = "embedding";
            BackendEmbedding embedder(act_backend_);
            const auto target = embedder.embed(obs.text);
            std::vector<std::pair<double, int>> scored;
            scored.reserve(frontier.size());
            for (int i = 0; i < n; ++i) {
                const auto v = embedder.embed(frontier[static_cast<std::size_t>(i)]->text);
                scored.emplace_back(cosine_similarity(target, v), i);
            }
            std::stable_sort(scored.begin(), scored.end(),
                             [](const auto& a, const auto& b) { return a.first > b.first; });
            std::vector<int> out;
            for (int i = 0; i < k; ++i) out.push_back(scored[static_cast<std::size_t>(i)].second);
            return out;
        }
        case SearchStrategy::llm: {
            *strategy_used = "llm";
            std::ostringstream guidance;
            for (int i = 0; i < n; ++i)
                guidance << i << ". " << frontier[static_cast<std::size_t>(i)]->text << "\n";
            const std::string prompt =
                prompts::render(prompts::search(), {{"scene", scene},
                                                    {"main_goal", env_.goal},
                                                    {"guidance", guidance.str()},
                                                    {"width", std::to_string(k)}});
            const std::string reply = complete_via(*act_backend_, prompt, tag("search"));
            try {
                return parse_selected_ids(reply, k, n - 1);
            } catch (const ParseError&) {
                note("warning", {{"round", round_},
                                 {"message", "search reply unparseable; re-asking once"}});
            }
            const std::string retry_prompt =
                prompt +
                "\n\nYour previous reply could not be parsed. Reply again and end with your "
                "chosen IDs in exactly this format: {\"IDs\": [1, 2, 3]}.";
            const std::string retry =
                complete_via(*act_backend_, retry_prompt, tag("search") + "/retry");
            try {
                return parse_selected_ids(retry, k, n - 1);
            } catch (const ParseError&) {
                note("warning", {{"round", round_},
                                 {"message",
                                  "search retry unparseable; falling back to first-k leaves"}});
            }
            std::vector<int> out;
            for (int i = 0; i < k; ++i) out.push_back(i);
            return out;
        }
    }
    return {};
}

std::string SelfGoalPolicy::act(const Observation& obs) {
    ++round_;
    trace_ = SelfGoalStepTrace{};
    trace_.round = round_;
    const std::string scene = scene_text(obs);

    // 1. Search the leaf frontier for the subgoals suiting the situation.
    const auto frontier = tree_->leaf_frontier();
    std::string strategy_used;
    const auto indices = run_search(frontier, scene, obs, &strategy_used);
    std::vector<std::string> selected_ids;
    std::vector<std::string> selected_texts;
    for (int idx : indices) {
        selected_ids.push_back(frontier[static_cast<std::size_t>(idx)]->id);
        selected_texts.push_back(frontier[static_cast<std::size_t>(idx)]->text);
    }
    tree_->mark_selected(selected_ids, round_);
    trace_.selected_ids = selected_ids;
    note("search_selection", {{"round", round_},
                              {"strategy", strategy_used},
                              {"ids", selected_ids}});

    // 2. Act with the selected subgoals injected as guidance.
    std::ostringstream guidance;
    for (const auto& text : selected_texts) guidance << "- " << text << "\n";
    const std::string act_body =
        prompts::render(prompts::task_solving(), {{"scene", scene},
                                                  {"main_goal", env_.goal},
                                                  {"sub_goals", guidance.str()}});
    act_prompt_ = prompt_base_ + "\n\n" + act_body;
    act_tag_ = tag("act");
    act_backend_for_reask_ = act_backend_.get();
    history_.push_back({round_, obs.text, "", ""});
    const std::string reply = complete_via(*act_backend_, act_prompt_, act_tag_);
    trace_.action_reply = reply;

    // 3. Decompose the selected nodes, unless growth has stopped.
    if (!tree_->stopping_met(round_)) {
        for (std::size_t i = 0; i < selected_ids.size(); ++i) {
            std::string dreply;
            try {
                const std::string sub_prompt = prompts::render(
                    prompts::subgoal_decomposition(),
                    {{"scene", scene}, {"sub_goal", selected_texts[i]}});
                dreply = complete_via(*tree_backend_, sub_prompt,
                                      tag("decompose") + "/" + selected_ids[i]);
            } catch (const BackendUnavailable& e) {
                note("warning", {{"round", round_},
                                 {"message", std::string("decompose skipped: ") + e.what()}});
                continue;
            } catch (const RemoteRejected& e) {
                note("warning", {{"round", round_},
                                 {"message", std::string("decompose skipped: ") + e.what()}});
                continue;
            }
            const auto candidates =
                parse_subgoal_list(dreply, config_.max_children_per_decompose);
            BackendEmbedding embedder(tree_backend_);
            const auto accepted = tree_->filter_candidates(candidates, embedder);
            if (!accepted.empty()) {
                auto ids = tree_->insert_children(selected_ids[i], accepted, round_);
                trace_.inserted_ids.insert(trace_.inserted_ids.end(), ids.begin(), ids.end());
                note("tree_insert",
                     {{"parent", selected_ids[i]}, {"ids", ids}, {"texts", accepted}});
            }
        }
    }

    // 4. Prune stale branches once the tree is frozen.
    if (config_.prune_enabled && tree_->stopping_met(round_)) {
        auto removed = tree_->prune(round_);
        trace_.pruned_ids = removed;
        if (!removed.empty()) note("tree_prune", {{"round", round_}, {"ids", removed}});
    }
    return reply;
}

// --- Prompt-only baselines ------------------------------------------------------

LlmPolicy::LlmPolicy(std::string label, EventSink* sink, int history_window,
                     std::shared_ptr<Backend> backend)
    : AgentPolicy(std::move(label), sink, history_window), backend_(std::move(backend)) {}

std::string LlmPolicy::act(const Observation& obs) {
    ++round_;
    const std::string guidance = guidance_block();
    std::string prompt = prompt_base_;
    if (!guidance.empty()) prompt += "\n\n" + guidance;
    prompt += "\n\n" + scene_text(obs);
    act_prompt_ = prompt;
    act_tag_ = tag("act");
    act_backend_for_reask_ = backend_.get();
    history_.push_back({round_, obs.text, "", ""});
    return complete_via(*backend_, prompt, act_tag_);
}

std::string ReactPolicy::guidance_block() const {
    return "First reason step by step about the current situation. Then state your final "
           "decision on the last line.";
}

std::string ReflexionPolicy::guidance_block() const {
    if (reflections_.empty()) return "";
    std::ostringstream ss;
    ss << "Self-reflections from earlier rounds:\n";
    for (std::size_t i = 0; i < reflections_.size(); ++i)
        ss << (i + 1) << ". " << reflections_[i] << "\n";
    return ss.str();
}

void ReflexionPolicy::on_timestep() {
    if (history_.empty()) return;
    const std::string prompt =
        prompts::render(prompts::reflexion(), {{"past_auction_log", trial_history()},
                                               {"session_noun", env_.session_noun}});
    const std::string reply =
        complete_via(*backend_, prompt, tag("reflexion"));
    reflections_.push_back(reply);
}

std::string ClinPolicy::guidance_block() const {
    if (learnings_.empty()) return "";
    std::ostringstream ss;
    ss << "Your current learnings:\n";
    for (std::size_t i = 0; i < learnings_.size(); ++i)
        ss << (i + 1) << ". " << learnings_[i] << "\n";
    return ss.str();
}

void ClinPolicy::on_timestep() {
    if (history_.empty()) return;
    std::ostringstream past;
    if (learnings_.empty()) {
        past << "(none yet)";
    } else {
        for (std::size_t i = 0; i < learnings_.size(); ++i)
            past << (i + 1) << ". " << learnings_[i] << "\n";
    }
    const std::string prompt = prompts::render(
        prompts::clin(), {{"past_auction_log", trial_history()},
                          {"past_learnings", past.str()},
                          {"session_noun", env_.session_noun},
                          {"session_noun_plural", env_.session_noun + "s"}});
    const std::string reply = complete_via(*backend_, prompt, tag("clin"));
    // CLIN regenerates: a valid reply replaces the whole list.
    auto parsed = parse_clin_learnings(reply);
    if (!parsed.empty()) learnings_ = std::move(parsed);
}

void AdaptPolicy::begin(const PolicyEnv& env) {
    AgentPolicy::begin(env);
    if (planned_) return;
    planned_ = true;
    // Depth-2 decomposition, built entirely before the first interaction and
    // never revised afterwards.
    const std::string main_prompt =
        prompts::render(prompts::main_goal_decomposition(), {{"scene", env_.framing},
                                                             {"task_noun", env_.task_noun},
                                                             {"goal", env_.goal}});
    const std::string top_reply =
        complete_via(*backend_, main_prompt, label_ + "/adapt-main/0");
    const auto top = parse_subgoal_list(top_reply, 5);
    std::ostringstream plan;
    for (std::size_t i = 0; i < top.size(); ++i) {
        plan << (i + 1) << ". " << top[i] << "\n";
        const std::string sub_prompt =
            prompts::render(prompts::subgoal_decomposition(),
                            {{"scene", env_.framing}, {"sub_goal", top[i]}});
        const std::string sub_reply = complete_via(
            *backend_, sub_prompt, label_ + "/adapt-sub/" + std::to_string(i));
        const auto subs = parse_subgoal_list(sub_reply, 5);
        for (std::size_t j = 0; j < subs.size(); ++j)
            plan << (i + 1) << "." << (j + 1) << ". " << subs[j] << "\n";
    }
    plan_ = plan.str();
}

std::string AdaptPolicy::guidance_block() const {
    if (plan_.empty()) return "";
    return "Your plan, prepared before the game:\n" + plan_;
}

// --- Rule agents ------------------------------------------------------------------

RulePolicy::RulePolicy(std::string label, EventSink* sink, RuleParams params, std::uint64_t seed)
    : AgentPolicy(std::move(label), sink, 0), params_(params), rng_(seed) {}

std::string RulePolicy::act(const Observation& obs) {
    ++round_;
    history_.push_back({round_, obs.text, "", ""});
    last_action_ = rule_action_text(params_, env_.kind, obs, rng_);
    return last_action_;
}

std::string RulePolicy::reask(const std::string&) { return last_action_; }

// --- Factory ------------------------------------------------------------------------

std::unique_ptr<AgentPolicy> make_policy(const std::string& label, const PolicySpec& spec,
                                         std::shared_ptr<Backend> act_backend,
                                         std::shared_ptr<Backend> tree_backend, EventSink* sink,
                                         std::uint64_t seed) {
    switch (spec.kind) {
        case PolicyKind::selfgoal:
            if (!act_backend) throw ConfigError("selfgoal policy requires a backend");
            return std::make_unique<SelfGoalPolicy>(label, sink, spec.history_window,
                                                    act_backend, tree_backend, spec.tree_config,
                                                    spec.search_strategy, seed);
        case PolicyKind::react:
            if (!act_backend) throw ConfigError("react policy requires a backend");
            return std::make_unique<ReactPolicy>(label, sink, spec.history_window, act_backend);
        case PolicyKind::reflexion:
            if (!act_backend) throw ConfigError("reflexion policy requires a backend");
            return std::make_unique<ReflexionPolicy>(label, sink, spec.history_window,
                                                     act_backend);
        case PolicyKind::clin:
            if (!act_backend) throw ConfigError("clin policy requires a backend");
            return std::make_unique<ClinPolicy>(label, sink, spec.history_window, act_backend);
        case PolicyKind::adapt:
            if (!act_backend) throw ConfigError("adapt policy requires a backend");
            return std::make_unique<AdaptPolicy>(label, sink, spec.history_window, act_backend);
        case PolicyKind::rule:
            return std::make_unique<RulePolicy>(label, sink, spec.rule,
                                                derive_seed(seed, spec.rule.seed));
    }
    throw ConfigError("make_policy: unknown policy kind");
}

}  // namespace selfgoal
