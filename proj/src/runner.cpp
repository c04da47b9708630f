#include "selfgoal/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <thread>

#include "selfgoal/digest.hpp"
#include "selfgoal/errors.hpp"

namespace selfgoal {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string read_text_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
}

std::string fmt2(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

// --- Transcript events -----------------------------------------------------------

json TranscriptEvent::to_json() const {
    return json{{"seq", seq},     {"repeat", repeat}, {"round", round},
                {"agent", agent}, {"kind", kind},     {"payload", payload}};
}

TranscriptEvent TranscriptEvent::from_json(const json& j) {
    TranscriptEvent e;
    e.seq = j.at("seq").get<long>();
    e.repeat = j.at("repeat").get<int>();
    e.round = j.at("round").get<int>();
    e.agent = j.at("agent").get<std::string>();
    e.kind = j.at("kind").get<std::string>();
    e.payload = j.at("payload");
    return e;
}

// --- Config -----------------------------------------------------------------------

void ExperimentConfig::validate() const {
    env.validate();
    if (static_cast<int>(agents.size()) != env.n_players)
        throw ConfigError("config: agent count (" + std::to_string(agents.size()) +
                          ") must equal env n_players (" + std::to_string(env.n_players) + ")");
    for (std::size_t i = 0; i < agents.size(); ++i) {
        if (agents[i].label.empty()) throw ConfigError("config: empty agent label");
        for (std::size_t j = i + 1; j < agents.size(); ++j)
            if (agents[i].label == agents[j].label)
                throw ConfigError("config: duplicate agent label: " + agents[i].label);
        if (agents[i].policy.kind != PolicyKind::rule &&
            (agents[i].backend.is_null() || agents[i].backend.empty()))
            throw ConfigError("config: agent " + agents[i].label +
                              " needs a backend (only rule agents run without one)");
    }
    if (parallelism < 1) throw ConfigError("config: parallelism must be >= 1");
    if (parallelism > 1 && persist_memory)
        throw ConfigError(
            "config: cross-repeat memory persistence forces sequential repeats; set "
            "persist_memory=false to use parallelism");
}

json ExperimentConfig::to_json() const {
    json a = json::array();
    for (const auto& ac : agents) {
        json e{{"label", ac.label}, {"policy", ac.policy.to_json()}};
        if (!ac.backend.is_null()) e["backend"] = ac.backend;
        if (!ac.tree_backend.is_null()) e["tree_backend"] = ac.tree_backend;
        a.push_back(e);
    }
    return json{{"env", env.to_json()},
                {"agents", a},
                {"master_seed", master_seed},
                {"output_dir", output_dir},
                {"snapshot_trees", snapshot_trees},
                {"persist_memory", persist_memory},
                {"parallelism", parallelism}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j, std::string base_dir) {
    ExperimentConfig c;
    c.env = EnvSpec::from_json(j.at("env"));
    for (const auto& e : j.at("agents")) {
        AgentConfig ac;
        ac.label = e.at("label").get<std::string>();
        ac.policy = PolicySpec::from_json(e.at("policy"));
        ac.backend = e.value("backend", json());
        ac.tree_backend = e.value("tree_backend", json());
        c.agents.push_back(std::move(ac));
    }
    c.master_seed = j.value("master_seed", 0ull);
    c.output_dir = j.value("output_dir", std::string("runs"));
    c.snapshot_trees = j.value("snapshot_trees", false);
    c.persist_memory = j.value("persist_memory", true);
    c.parallelism = j.value("parallelism", 1);
    c.base_dir = std::move(base_dir);
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw ParseError("config " + path + ": " + e.what(), e.byte);
    }
    return from_json(j, fs::path(path).parent_path().string());
}

std::string ExperimentConfig::digest() const { return sha256_hex(to_json().dump()); }

// --- Backend factory ----------------------------------------------------------------

std::shared_ptr<Backend> make_backend(const json& spec, const std::string& base_dir) {
    if (spec.is_null() || spec.empty()) throw ConfigError("empty backend spec");
    const std::string kind = spec.value("kind", std::string("scripted"));
    std::shared_ptr<Backend> inner;
    std::string salt;
    if (kind == "scripted") {
        if (spec.contains("script")) {
            fs::path p = spec["script"].get<std::string>();
            if (p.is_relative() && !base_dir.empty()) p = fs::path(base_dir) / p;
            inner = ScriptedBackend::from_file(p.string());
        } else {
            inner = std::make_shared<ScriptedBackend>(spec);
        }
        salt = "scripted";
    } else if (kind == "http") {
        HttpBackendConfig cfg;
        auto resolve = [&](const char* key, const char* env_key) -> std::string {
            if (spec.contains(key)) return spec[key].get<std::string>();
            if (spec.contains(env_key)) {
                const std::string var = spec[env_key].get<std::string>();
                if (const char* v = std::getenv(var.c_str())) return v;
                throw ConfigError(std::string("backend: environment variable ") + var +
                                  " (from " + env_key + ") is not set");
            }
            return "";
        };
        cfg.base_url = resolve("base_url", "base_url_env");
        if (cfg.base_url.empty()) throw ConfigError("http backend: base_url required");
        cfg.model = resolve("model", "model_env");
        cfg.embedding_model = spec.value("embedding_model", std::string());
        cfg.credential_env = spec.value("credential_env", std::string());
        cfg.max_attempts = spec.value("max_attempts", cfg.max_attempts);
        cfg.backoff_ms = spec.value("backoff_ms", cfg.backoff_ms);
        cfg.timeout_s = spec.value("timeout_s", cfg.timeout_s);
        cfg.max_inflight = spec.value("max_inflight", cfg.max_inflight);
        cfg.per_minute_limit = spec.value("per_minute_limit", cfg.per_minute_limit);
        if (spec.contains("max_tokens")) cfg.default_max_tokens = spec["max_tokens"].get<int>();
        salt = cfg.model;
        inner = std::make_shared<HttpBackend>(cfg);
    } else {
        throw ConfigError("unknown backend kind: " + kind);
    }
    if (spec.contains("cache_dir")) {
        fs::path p = spec["cache_dir"].get<std::string>();
        if (p.is_relative() && !base_dir.empty()) p = fs::path(base_dir) / p;
        inner = std::make_shared<CachedBackend>(inner, p.string(), salt);
    }
    return inner;
}

// --- Recording ------------------------------------------------------------------------

namespace {

class Recorder {
public:
    Recorder() = default;

    void open_stream(const fs::path& path) {
        stream_.open(path, std::ios::binary);
    }

    void add(const std::string& kind, const std::string& agent, const json& payload) {
        TranscriptEvent e{seq_++, repeat, round, agent, kind, payload};
        const std::string line = e.to_json().dump() + "\n";
        bytes_ += line;
        if (stream_.is_open()) {
            stream_ << line;
            stream_.flush();
        }
        events_.push_back(std::move(e));
    }

    void absorb(Recorder& other) {
        for (auto& e : other.events_) {
            e.seq = seq_++;
            const std::string line = e.to_json().dump() + "\n";
            bytes_ += line;
            if (stream_.is_open()) stream_ << line;
            events_.push_back(std::move(e));
        }
        if (stream_.is_open()) stream_.flush();
        other.events_.clear();
    }

    const std::vector<TranscriptEvent>& events() const { return events_; }
    std::vector<TranscriptEvent> take_events() { return std::move(events_); }
    const std::string& bytes() const { return bytes_; }

    int repeat = 0;
    int round = 0;

private:
    long seq_ = 0;
    std::vector<TranscriptEvent> events_;
    std::string bytes_;
    std::ofstream stream_;
};

class AgentSink : public EventSink {
public:
    AgentSink(Recorder* rec, std::string label) : rec_(rec), label_(std::move(label)) {}
    void event(const std::string& kind, const json& payload) override {
        rec_->add(kind, label_, payload);
    }

private:
    Recorder* rec_;
    std::string label_;
};

/// Wraps a backend so every completion lands in the transcript as a
/// prompt/reply pair, with token-ish accounting on the side.
class TracedBackend : public Backend {
public:
    TracedBackend(std::shared_ptr<Backend> inner, EventSink* sink)
        : inner_(std::move(inner)), sink_(sink) {}

    std::string complete(const CompletionRequest& req) override {
        if (sink_) {
            json msgs = json::array();
            for (const auto& m : req.messages)
                msgs.push_back({{"role", role_name(m.role)}, {"content", m.content}});
            sink_->event("prompt", {{"tag", req.tag}, {"messages", msgs}});
        }
        const std::string reply = inner_->complete(req);
        if (sink_) sink_->event("reply", {{"tag", req.tag}, {"text", reply}});
        ++calls_;
        for (const auto& m : req.messages) prompt_chars_ += static_cast<long>(m.content.size());
        reply_chars_ += static_cast<long>(reply.size());
        return reply;
    }

    std::vector<double> embed(const std::string& text) override {
        ++embed_calls_;
        return inner_->embed(text);
    }

    json usage() const {
        return json{{"completions", calls_},
                    {"embeddings", embed_calls_},
                    {"prompt_chars", prompt_chars_},
                    {"reply_chars", reply_chars_}};
    }

private:
    std::shared_ptr<Backend> inner_;
    EventSink* sink_;
    long calls_ = 0;
    long embed_calls_ = 0;
    long prompt_chars_ = 0;
    long reply_chars_ = 0;
};

struct AgentRuntime {
    const AgentConfig* cfg = nullptr;
    std::unique_ptr<AgentSink> sink;
    std::shared_ptr<TracedBackend> act;
    std::shared_ptr<TracedBackend> tree;
    std::unique_ptr<AgentPolicy> policy;
};

struct BackendRegistry {
    std::map<std::string, std::shared_ptr<Backend>> made;
    std::string base_dir;

    std::shared_ptr<Backend> get(const json& spec) {
        const std::string key = spec.dump();
        auto it = made.find(key);
        if (it != made.end()) return it->second;
        auto b = make_backend(spec, base_dir);
        made[key] = b;
        return b;
    }
};

std::vector<AgentRuntime> build_agents(const ExperimentConfig& config, Recorder& rec,
                                       BackendRegistry& registry) {
    std::vector<AgentRuntime> agents;
    agents.reserve(config.agents.size());
    for (const auto& ac : config.agents) {
        AgentRuntime rt;
        rt.cfg = &ac;
        rt.sink = std::make_unique<AgentSink>(&rec, ac.label);
        if (!ac.backend.is_null() && !ac.backend.empty())
            rt.act = std::make_shared<TracedBackend>(registry.get(ac.backend), rt.sink.get());
        if (!ac.tree_backend.is_null() && !ac.tree_backend.empty())
            rt.tree = std::make_shared<TracedBackend>(registry.get(ac.tree_backend), rt.sink.get());
        rt.policy = make_policy(ac.label, ac.policy, rt.act, rt.tree, rt.sink.get(),
                                derive_seed(config.master_seed, fnv1a64(ac.label)));
        agents.push_back(std::move(rt));
    }
    return agents;
}

void snapshot_tree(const fs::path& dir, const AgentRuntime& rt) {
    const GoalTree* t = rt.policy->tree();
    if (!t) return;
    const fs::path tree_dir = dir / "trees" / rt.cfg->label;
    fs::create_directories(tree_dir);
    char name[32];
    std::snprintf(name, sizeof(name), "round_%06d.json", rt.policy->round());
    write_text_file(tree_dir / name, t->serialize());
}

void play_game(Game& game, std::vector<AgentRuntime>& agents, Recorder& rec,
               const ExperimentConfig& config, const fs::path& dir) {
    const EnvKind kind = config.env.kind;
    const bool simultaneous =
        kind == EnvKind::public_goods || kind == EnvKind::guess_two_thirds;

    while (!game.done()) {
        const int p = game.current_player();
        rec.round = game.round_index();
        AgentRuntime& a = agents[static_cast<std::size_t>(p)];
        const Observation obs = game.observe(p);

        std::string reply = a.policy->act(obs);
        auto parsed = parse_action(config.env, reply);
        bool reasked = false;
        if (!parsed) {
            rec.add("warning", a.cfg->label,
                    {{"message", "action unparseable; re-asking once"}});
            reply = a.policy->reask(format_reminder(kind));
            parsed = parse_action(config.env, reply);
            reasked = true;
        }
        if (parsed) {
            const std::string err = game.validate(p, *parsed);
            if (!err.empty()) {
                if (!reasked) {
                    rec.add("warning", a.cfg->label, {{"message", "invalid action: " + err}});
                    reply = a.policy->reask(err + ". " + format_reminder(kind));
                    auto second = parse_action(config.env, reply);
                    if (second && game.validate(p, *second).empty())
                        parsed = second;
                    else
                        parsed.reset();
                    reasked = true;
                } else {
                    parsed.reset();
                }
            }
        }
        if (!parsed) {
            parsed = default_action(kind);
            rec.add("warning", a.cfg->label,
                    {{"message", "falling back to the environment default action"}});
        }

        const std::string canonical = action_to_text(kind, *parsed);
        a.policy->record_action(canonical);
        rec.add("action", a.cfg->label, {{"action", *parsed}, {"text", canonical}});

        const StepResult res = game.apply(p, *parsed);
        for (const auto& w : res.warnings) rec.add("warning", "", {{"message", w}});

        if (!simultaneous) {
            if (res.round_completed) a.policy->record_result(game.round_summary(p));
            a.policy->on_timestep();
        }
        if (res.round_completed) {
            rec.add("env_announcement", "", {{"text", res.public_announcement}});
            if (simultaneous) {
                for (auto& q : agents) q.policy->record_result(game.round_summary(
                    static_cast<int>(&q - agents.data())));
                for (auto& q : agents) q.policy->on_timestep();
            }
            if (config.snapshot_trees)
                for (auto& q : agents) snapshot_tree(dir, q);
        }
    }
}

// Standard competition ranking (1, 2, 2, 4) from payoffs, descending.
std::vector<int> ranks_from_payoffs(const std::vector<double>& payoffs) {
    std::vector<int> ranks(payoffs.size(), 1);
    for (std::size_t i = 0; i < payoffs.size(); ++i)
        for (std::size_t j = 0; j < payoffs.size(); ++j)
            if (payoffs[j] > payoffs[i]) ++ranks[i];
    return ranks;
}

double stderr_of(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size() - 1);
    return std::sqrt(var / static_cast<double>(xs.size()));
}

json compute_scores(const ExperimentConfig& config, const std::vector<GameOutcome>& outcomes,
                    const std::vector<AgentRuntime>& agents) {
    json scores;
    scores["kind"] = env_kind_name(config.env.kind);
    const int n = config.env.n_players;
    std::vector<std::string> labels;
    for (const auto& a : config.agents) labels.push_back(a.label);

    json per_agent = json::array();
    auto agent_row = [&](int i) {
        return json{{"label", config.agents[static_cast<std::size_t>(i)].label},
                    {"policy",
                     policy_kind_name(config.agents[static_cast<std::size_t>(i)].policy.kind)}};
    };

    switch (config.env.kind) {
        case EnvKind::public_goods: {
            std::vector<std::vector<double>> matrix(static_cast<std::size_t>(n));
            std::vector<double> per_repeat;
            std::vector<double> totals(static_cast<std::size_t>(n), 0.0);
            for (const auto& out : outcomes) {
                const auto contribs = out.log.at("contributions").get<std::vector<double>>();
                for (int i = 0; i < n; ++i)
                    matrix[static_cast<std::size_t>(i)].push_back(
                        contribs[static_cast<std::size_t>(i)]);
                per_repeat.push_back(score_s1({contribs}, config.env.pg.endowment));
                for (int i = 0; i < n; ++i)
                    totals[static_cast<std::size_t>(i)] += out.payoffs[static_cast<std::size_t>(i)];
            }
            const double s1 = score_s1(matrix, config.env.pg.endowment);
            scores["s1"] = s1;
            scores["per_repeat_s1"] = per_repeat;
            scores["headline"] = {{"name", "s1"},
                                  {"value", s1},
                                  {"uncertainty", stderr_of(per_repeat)}};
            for (int i = 0; i < n; ++i) {
                json row = agent_row(i);
                row["total_payoff"] = totals[static_cast<std::size_t>(i)];
                const auto& m = matrix[static_cast<std::size_t>(i)];
                row["mean_contribution"] =
                    std::accumulate(m.begin(), m.end(), 0.0) / static_cast<double>(m.size());
                per_agent.push_back(row);
            }
            break;
        }
        case EnvKind::guess_two_thirds: {
            std::vector<std::vector<double>> matrix(static_cast<std::size_t>(n));
            std::vector<double> per_repeat;
            std::vector<int> wins(static_cast<std::size_t>(n), 0);
            for (const auto& out : outcomes) {
                const auto choices = out.log.at("choices").get<std::vector<double>>();
                for (int i = 0; i < n; ++i)
                    matrix[static_cast<std::size_t>(i)].push_back(
                        choices[static_cast<std::size_t>(i)]);
                per_repeat.push_back(score_s2({choices}));
                for (int w : out.winners) ++wins[static_cast<std::size_t>(w)];
            }
            const double s2 = score_s2(matrix);
            scores["s2"] = s2;
            scores["per_repeat_s2"] = per_repeat;
            scores["headline"] = {{"name", "s2"},
                                  {"value", s2},
                                  {"uncertainty", stderr_of(per_repeat)}};
            for (int i = 0; i < n; ++i) {
                json row = agent_row(i);
                const auto& m = matrix[static_cast<std::size_t>(i)];
                row["mean_choice"] =
                    std::accumulate(m.begin(), m.end(), 0.0) / static_cast<double>(m.size());
                row["wins"] = wins[static_cast<std::size_t>(i)];
                per_agent.push_back(row);
            }
            break;
        }
        case EnvKind::auction: {
            std::vector<MatchResult> matches;
            std::vector<double> totals(static_cast<std::size_t>(n), 0.0);
            for (const auto& out : outcomes) {
                MatchResult m;
                m.participants = labels;
                m.ranks = ranks_from_payoffs(out.payoffs);
                matches.push_back(std::move(m));
                for (int i = 0; i < n; ++i)
                    totals[static_cast<std::size_t>(i)] += out.payoffs[static_cast<std::size_t>(i)];
            }
            const auto board = leaderboard(labels, matches);
            json jb = json::array();
            for (const auto& row : board)
                jb.push_back({{"label", row.label},
                              {"mu", row.rating.mu},
                              {"sigma", row.rating.sigma},
                              {"conservative", row.conservative}});
            scores["leaderboard"] = jb;
            // Headline: the first SelfGoal agent's TrueSkill mean, else the top entry.
            double head_mu = board.empty() ? 0.0 : board.front().rating.mu;
            double head_sigma = board.empty() ? 0.0 : board.front().rating.sigma;
            for (const auto& a : config.agents) {
                if (a.policy.kind == PolicyKind::selfgoal) {
                    for (const auto& row : board)
                        if (row.label == a.label) {
                            head_mu = row.rating.mu;
                            head_sigma = row.rating.sigma;
                        }
                    break;
                }
            }
            scores["headline"] = {{"name", "s3"}, {"value", head_mu}, {"uncertainty", head_sigma}};
            for (int i = 0; i < n; ++i) {
                json row = agent_row(i);
                row["total_profit"] = totals[static_cast<std::size_t>(i)];
                for (const auto& b : board)
                    if (b.label == labels[static_cast<std::size_t>(i)]) {
                        row["mu"] = b.rating.mu;
                        row["sigma"] = b.rating.sigma;
                    }
                per_agent.push_back(row);
            }
            break;
        }
        case EnvKind::bargaining: {
            std::vector<std::pair<double, double>> sessions;
            std::vector<double> gaps;
            int agreements = 0;
            std::vector<double> totals(static_cast<std::size_t>(n), 0.0);
            for (const auto& out : outcomes) {
                sessions.emplace_back(out.payoffs[0], out.payoffs[1]);
                gaps.push_back(std::abs(out.payoffs[0] - out.payoffs[1]));
                if (out.log.value("agreed", false)) ++agreements;
                for (int i = 0; i < n; ++i)
                    totals[static_cast<std::size_t>(i)] += out.payoffs[static_cast<std::size_t>(i)];
            }
            const double s4 = score_s4(sessions);
            scores["s4"] = s4;
            scores["agreements"] = agreements;
            scores["headline"] = {{"name", "s4"},
                                  {"value", s4},
                                  {"uncertainty", stderr_of(gaps)}};
            for (int i = 0; i < n; ++i) {
                json row = agent_row(i);
                row["total_profit"] = totals[static_cast<std::size_t>(i)];
                per_agent.push_back(row);
            }
            break;
        }
    }
    scores["per_agent"] = per_agent;

    json tree_nodes = json::object();
    for (const auto& a : agents)
        if (const GoalTree* t = a.policy->tree())
            tree_nodes[a.cfg->label] = t->node_count();
    if (!tree_nodes.empty()) scores["tree_nodes"] = tree_nodes;
    return scores;
}

}  // namespace

// --- run_experiment ------------------------------------------------------------------

RunRecord run_experiment(const ExperimentConfig& config) {
    config.validate();
    const auto t0 = std::chrono::steady_clock::now();

    RunRecord record;
    record.config = config.to_json();
    record.config_digest = sha256_hex(record.config.dump());
    const fs::path dir = fs::path(config.output_dir) / record.config_digest;
    fs::create_directories(dir);
    record.dir = dir.string();
    write_text_file(dir / "config", record.config.dump(2) + "\n");
    write_text_file(dir / "status", "running\n");

    Recorder rec;
    rec.open_stream(dir / "events");
    BackendRegistry registry{{}, config.base_dir};

    std::string outcomes_bytes;
    std::ofstream outcomes_stream(dir / "outcomes", std::ios::binary);
    auto push_outcome = [&](const GameOutcome& out) {
        record.outcomes.push_back(out);
        json j{{"payoffs", out.payoffs}, {"winners", out.winners}, {"log", out.log}};
        const std::string line = j.dump() + "\n";
        outcomes_bytes += line;
        outcomes_stream << line;
        outcomes_stream.flush();
    };

    const PolicyEnv penv = PolicyEnv::for_env(config.env.kind, config.env.n_players);
    std::vector<std::string> labels;
    for (const auto& a : config.agents) labels.push_back(a.label);

    json tree_nodes_per_repeat = json::object();
    bool aborted = false;
    std::string abort_reason;

    std::vector<AgentRuntime> agents = build_agents(config, rec, registry);
    try {
        if (config.parallelism > 1) {
            // Independent repeats (no memory persistence): worker pool over
            // repeats, events merged back in repeat order.
            std::vector<Recorder> local(static_cast<std::size_t>(config.env.repeats));
            std::vector<GameOutcome> outs(static_cast<std::size_t>(config.env.repeats));
            std::vector<std::string> errors(static_cast<std::size_t>(config.env.repeats));
            std::atomic<int> next{0};
            auto worker = [&]() {
                while (true) {
                    const int r = next.fetch_add(1);
                    if (r >= config.env.repeats) return;
                    auto& lrec = local[static_cast<std::size_t>(r)];
                    lrec.repeat = r;
                    try {
                        BackendRegistry lreg{{}, config.base_dir};
                        // Share stateless/cached backends, but scripted cursors
                        // must stay per-repeat for determinism.
                        auto lagents = build_agents(config, lrec, lreg);
                        for (auto& a : lagents) {
                            a.policy->begin(penv);
                            a.policy->begin_trial();
                        }
                        auto game = make_game(config.env, labels,
                                              derive_seed(config.master_seed ^ config.env.seed,
                                                          static_cast<std::uint64_t>(r)));
                        play_game(*game, lagents, lrec, config, dir);
                        outs[static_cast<std::size_t>(r)] = game->outcome();
                    } catch (const std::exception& e) {
                        errors[static_cast<std::size_t>(r)] = e.what();
                    }
                }
            };
            std::vector<std::thread> pool;
            for (int i = 0; i < config.parallelism; ++i) pool.emplace_back(worker);
            for (auto& t : pool) t.join();
            for (int r = 0; r < config.env.repeats; ++r) {
                if (!errors[static_cast<std::size_t>(r)].empty())
                    throw BackendUnavailable(errors[static_cast<std::size_t>(r)]);
                rec.absorb(local[static_cast<std::size_t>(r)]);
                push_outcome(outs[static_cast<std::size_t>(r)]);
            }
        } else {
            for (int repeat = 0; repeat < config.env.repeats; ++repeat) {
                rec.repeat = repeat;
                rec.round = 0;
                if (!config.persist_memory && repeat > 0)
                    agents = build_agents(config, rec, registry);
                for (auto& a : agents) {
                    a.policy->begin(penv);
                    a.policy->begin_trial();
                }
                auto game = make_game(config.env, labels,
                                      derive_seed(config.master_seed ^ config.env.seed,
                                                  static_cast<std::uint64_t>(repeat)));
                play_game(*game, agents, rec, config, dir);
                push_outcome(game->outcome());
                for (const auto& a : agents)
                    if (const GoalTree* t = a.policy->tree())
                        tree_nodes_per_repeat[a.cfg->label].push_back(t->node_count());
            }
        }
    } catch (const BackendUnavailable& e) {
        aborted = true;
        abort_reason = e.what();
    } catch (...) {
        write_text_file(dir / "status", "failed\n");
        throw;  // script exhaustion and logic errors are bugs; fail loudly
    }

    record.scores = compute_scores(config, record.outcomes, agents);
    if (!tree_nodes_per_repeat.empty())
        record.scores["tree_nodes_per_repeat"] = tree_nodes_per_repeat;
    record.events = rec.events();

    const auto t1 = std::chrono::steady_clock::now();
    record.meta["duration_ms"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
    json usage = json::object();
    for (const auto& a : agents) {
        json u = json::object();
        if (a.act) u["act"] = a.act->usage();
        if (a.tree) u["tree"] = a.tree->usage();
        if (!u.empty()) usage[a.cfg->label] = u;
    }
    record.meta["backend_usage"] = usage;
    record.complete = !aborted;
    if (aborted) record.meta["abort_reason"] = abort_reason;

    record.record_digest =
        sha256_hex(rec.bytes() + outcomes_bytes + record.scores.dump());
    write_text_file(dir / "scores", record.scores.dump(2) + "\n");
    write_text_file(dir / "meta", record.meta.dump(2) + "\n");
    write_text_file(dir / "digest", record.record_digest + "\n");
    write_text_file(dir / "status",
                    aborted ? "incomplete: " + abort_reason + "\n" : "complete\n");
    return record;
}

// --- Sweeps --------------------------------------------------------------------------

std::vector<SweepRow> sweep_xi(const ExperimentConfig& base,
                               const std::vector<double>& xi_values) {
    bool any_selfgoal = false;
    for (const auto& a : base.agents)
        if (a.policy.kind == PolicyKind::selfgoal) any_selfgoal = true;
    if (!any_selfgoal) throw ConfigError("sweep_xi: config has no SelfGoal agent");

    std::vector<SweepRow> rows;
    for (double xi : xi_values) {
        ExperimentConfig cfg = base;
        for (auto& a : cfg.agents)
            if (a.policy.kind == PolicyKind::selfgoal) a.policy.tree_config.xi = xi;
        char sub[32];
        std::snprintf(sub, sizeof(sub), "xi_%.2f", xi);
        cfg.output_dir = (fs::path(base.output_dir) / sub).string();
        RunRecord record = run_experiment(cfg);
        SweepRow row;
        row.xi = xi;
        row.score = record.scores.at("headline").at("value").get<double>();
        row.uncertainty = record.scores.at("headline").at("uncertainty").get<double>();
        row.record_dir = record.dir;
        long nodes = 0;
        if (record.scores.contains("tree_nodes"))
            for (const auto& [label, count] : record.scores["tree_nodes"].items())
                nodes += count.get<long>();
        row.tree_nodes = nodes;
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string sweep_table(const std::vector<SweepRow>& rows) {
    std::ostringstream ss;
    ss << "xi      score      uncertainty  tree_nodes\n";
    for (const auto& r : rows) {
        char line[128];
        std::snprintf(line, sizeof(line), "%-7.2f %-10.2f %-12.2f %ld\n", r.xi, r.score,
                      r.uncertainty, r.tree_nodes);
        ss << line;
    }
    return ss.str();
}

// --- Record access ----------------------------------------------------------------------

RunRecord load_record(const std::string& dir) {
    RunRecord record;
    record.dir = dir;
    const fs::path p(dir);
    if (!fs::exists(p / "config")) throw NotFoundError("no record at " + dir);
    try {
        record.config = json::parse(read_text_file(p / "config"));
    } catch (const json::parse_error& e) {
        throw ParseError("record config " + dir + ": " + e.what(), e.byte);
    }
    record.config_digest = sha256_hex(record.config.dump());
    if (fs::exists(p / "events")) {
        std::istringstream in(read_text_file(p / "events"));
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            try {
                record.events.push_back(TranscriptEvent::from_json(json::parse(line)));
            } catch (const json::parse_error& e) {
                throw ParseError("record events " + dir + ": " + e.what(), e.byte);
            }
        }
    }
    if (fs::exists(p / "outcomes")) {
        std::istringstream in(read_text_file(p / "outcomes"));
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            json j = json::parse(line);
            GameOutcome out;
            out.payoffs = j.at("payoffs").get<std::vector<double>>();
            out.winners = j.at("winners").get<std::vector<int>>();
            out.log = j.at("log");
            record.outcomes.push_back(std::move(out));
        }
    }
    if (fs::exists(p / "scores")) record.scores = json::parse(read_text_file(p / "scores"));
    if (fs::exists(p / "meta")) record.meta = json::parse(read_text_file(p / "meta"));
    if (fs::exists(p / "digest")) {
        std::string d = read_text_file(p / "digest");
        while (!d.empty() && (d.back() == '\n' || d.back() == '\r')) d.pop_back();
        record.record_digest = d;
    }
    if (fs::exists(p / "status"))
        record.complete = read_text_file(p / "status").rfind("complete", 0) == 0;
    return record;
}

// --- Reports ---------------------------------------------------------------------------

namespace {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string text() const {
        std::vector<std::size_t> widths(header.size());
        for (std::size_t c = 0; c < header.size(); ++c) widths[c] = header[c].size();
        for (const auto& r : rows)
            for (std::size_t c = 0; c < r.size(); ++c)
                widths[c] = std::max(widths[c], r[c].size());
        std::ostringstream ss;
        auto emit = [&](const std::vector<std::string>& cells) {
            for (std::size_t c = 0; c < cells.size(); ++c) {
                ss << cells[c];
                if (c + 1 < cells.size())
                    ss << std::string(widths[c] - cells[c].size() + 2, ' ');
            }
            ss << "\n";
        };
        emit(header);
        for (const auto& r : rows) emit(r);
        return ss.str();
    }

    std::string csv() const {
        std::ostringstream ss;
        auto emit = [&](const std::vector<std::string>& cells) {
            for (std::size_t c = 0; c < cells.size(); ++c) {
                if (c) ss << ",";
                ss << cells[c];
            }
            ss << "\n";
        };
        emit(header);
        for (const auto& r : rows) emit(r);
        return ss.str();
    }
};

Table report_table(const RunRecord& record) {
    Table t;
    const json& scores = record.scores;
    const std::string kind = scores.value("kind", std::string());
    t.header = {"agent", "policy"};
    std::vector<std::string> extra;
    if (kind == "public_goods") extra = {"total_payoff", "mean_contribution"};
    else if (kind == "guess_two_thirds") extra = {"mean_choice", "wins"};
    else if (kind == "auction") extra = {"total_profit", "mu", "sigma"};
    else if (kind == "bargaining") extra = {"total_profit"};
    t.header.insert(t.header.end(), extra.begin(), extra.end());
    for (const auto& row : scores.value("per_agent", json::array())) {
        std::vector<std::string> cells{row.value("label", std::string()),
                                       row.value("policy", std::string())};
        for (const auto& col : extra) {
            if (!row.contains(col)) {
                cells.push_back("-");
            } else if (row[col].is_number_integer()) {
                cells.push_back(std::to_string(row[col].get<long>()));
            } else {
                cells.push_back(fmt2(row[col].get<double>()));
            }
        }
        t.rows.push_back(std::move(cells));
    }
    return t;
}

std::string headline_line(const RunRecord& record) {
    if (!record.scores.contains("headline")) return "";
    const auto& h = record.scores["headline"];
    return h.value("name", std::string()) + " = " + fmt2(h.value("value", 0.0)) + " +/- " +
           fmt2(h.value("uncertainty", 0.0));
}

}  // namespace

std::string report_text(const RunRecord& record) {
    std::ostringstream ss;
    ss << "environment: " << record.scores.value("kind", std::string())
       << "   repeats: " << record.outcomes.size()
       << "   status: " << (record.complete ? "complete" : "incomplete") << "\n";
    ss << headline_line(record) << "\n\n";
    ss << report_table(record).text();
    if (record.scores.contains("leaderboard")) {
        ss << "\nTrueSkill leaderboard (mu - 3*sigma order):\n";
        Table lb;
        lb.header = {"label", "mu", "sigma", "conservative"};
        for (const auto& row : record.scores["leaderboard"])
            lb.rows.push_back({row.value("label", std::string()), fmt2(row.value("mu", 0.0)),
                               fmt2(row.value("sigma", 0.0)),
                               fmt2(row.value("conservative", 0.0))});
        ss << lb.text();
    }
    return ss.str();
}

std::string report_csv(const RunRecord& record) { return report_table(record).csv(); }

std::string replay_text(const RunRecord& record, const ReplayFilter& filter) {
    std::ostringstream ss;
    for (const auto& e : record.events) {
        if (filter.agent && e.agent != *filter.agent) continue;
        if (filter.kind && e.kind != *filter.kind) continue;
        if (filter.round && e.round != *filter.round) continue;
        if (filter.repeat && e.repeat != *filter.repeat) continue;
        ss << "[repeat " << e.repeat << " | round " << e.round << " | "
           << (e.agent.empty() ? "env" : e.agent) << "] " << e.kind;
        if (e.kind == "prompt") {
            ss << " (tag " << e.payload.value("tag", std::string()) << "):\n";
            for (const auto& m : e.payload.value("messages", json::array()))
                ss << m.value("content", std::string()) << "\n";
        } else if (e.kind == "reply") {
            ss << " (tag " << e.payload.value("tag", std::string()) << "):\n"
               << e.payload.value("text", std::string()) << "\n";
        } else {
            ss << ": " << e.payload.dump() << "\n";
        }
    }
    return ss.str();
}

std::string tree_snapshot_dump(const std::string& record_dir, const std::string& agent,
                               std::optional<int> round) {
    const fs::path dir = fs::path(record_dir) / "trees" / agent;
    if (!fs::exists(dir)) throw NotFoundError("no tree snapshots for agent " + agent);
    fs::path chosen;
    if (round) {
        char name[32];
        std::snprintf(name, sizeof(name), "round_%06d.json", *round);
        chosen = dir / name;
        if (!fs::exists(chosen))
            throw NotFoundError("no snapshot for round " + std::to_string(*round));
    } else {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(dir)) files.push_back(e.path());
        if (files.empty()) throw NotFoundError("no tree snapshots for agent " + agent);
        std::sort(files.begin(), files.end());
        chosen = files.back();
    }
    return GoalTree::deserialize(read_text_file(chosen)).flat_dump();
}

// --- Ratings from match-history files ------------------------------------------------------

std::vector<MatchResult> parse_match_history(const std::string& content) {
    std::vector<MatchResult> out;
    std::istringstream in(content);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        MatchResult m;
        std::string tok;
        while (ls >> tok) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos || eq == 0 || eq + 1 >= tok.size())
                throw ParseError("match history line " + std::to_string(lineno) +
                                 ": expected label=rank, got '" + tok + "'");
            m.participants.push_back(tok.substr(0, eq));
            try {
                m.ranks.push_back(std::stoi(tok.substr(eq + 1)));
            } catch (const std::exception&) {
                throw ParseError("match history line " + std::to_string(lineno) +
                                 ": bad rank in '" + tok + "'");
            }
        }
        if (!m.participants.empty()) out.push_back(std::move(m));
    }
    return out;
}

std::string ratings_table(const std::vector<LeaderboardRow>& rows) {
    Table t;
    t.header = {"label", "mu", "sigma", "conservative"};
    for (const auto& r : rows)
        t.rows.push_back(
            {r.label, fmt2(r.rating.mu), fmt2(r.rating.sigma), fmt2(r.conservative)});
    return t.text();
}

std::string ratings_csv(const std::vector<LeaderboardRow>& rows) {
    Table t;
    t.header = {"label", "mu", "sigma", "conservative"};
    for (const auto& r : rows)
        t.rows.push_back(
            {r.label, fmt2(r.rating.mu), fmt2(r.rating.sigma), fmt2(r.conservative)});
    return t.csv();
}

}  // namespace selfgoal
