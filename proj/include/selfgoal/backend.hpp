#pragma once

#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "selfgoal/embedding.hpp"

namespace selfgoal {

enum class Role { system, user, assistant };

std::string role_name(Role r);
Role role_from_name(const std::string& s);

struct ChatMessage {
    Role role = Role::user;
    std::string content;
};

struct CompletionRequest {
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    std::optional<int> max_tokens;
    // Free-form label (agent id + module + round). Used for scripting and
    // tracing; excluded from cache keys by default.
    std::string tag;
};

/// Throws std::invalid_argument before any I/O when the request is malformed.
void validate_request(const CompletionRequest& req);

/// Content digest of the full request. `salt` folds in backend identity
/// (model name) so two models never share cache entries.
std::string request_digest(const CompletionRequest& req, const std::string& salt = "",
                           bool include_tag = false);

class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string complete(const CompletionRequest& req) = 0;
    virtual std::vector<double> embed(const std::string& text) = 0;
};

/// Adapts a Backend's embed() to the EmbeddingProvider interface.
class BackendEmbedding : public EmbeddingProvider {
public:
    explicit BackendEmbedding(std::shared_ptr<Backend> backend) : backend_(std::move(backend)) {}
    std::vector<double> embed(const std::string& text) const override {
        return backend_->embed(text);
    }

private:
    std::shared_ptr<Backend> backend_;
};

// ---------------------------------------------------------------------------
// Scripted backend: deterministic replays for tests and demos.
//
// Replies are keyed by (tag, call sequence number): each tag owns an ordered
// reply list consumed front to back. Lookup tries the exact tag first, then
// progressively strips trailing "/segment" parts, so a script may answer
// "alice/act/r0/3" with an entry filed under "alice/act". A miss (or an
// exhausted list) throws ScriptExhausted: that is a test bug, fail loudly.
// ---------------------------------------------------------------------------
class ScriptedBackend : public Backend {
public:
    ScriptedBackend() = default;
    explicit ScriptedBackend(const nlohmann::json& script);
    static std::shared_ptr<ScriptedBackend> from_file(const std::string& path);

    void add_reply(const std::string& tag, std::string reply,
                   std::optional<std::string> expect_digest = std::nullopt);
    void set_embedding(std::string text, std::vector<double> vec);
    void set_embedding_dim(int dim);

    std::string complete(const CompletionRequest& req) override;
    std::vector<double> embed(const std::string& text) override;

private:
    struct Entry {
        std::string reply;
        std::optional<std::string> expect_digest;
    };
    mutable std::mutex mu_;
    std::map<std::string, std::deque<Entry>> replies_;
    std::map<std::string, std::vector<double>> embeddings_;
    int embedding_dim_ = 16;
};

// ---------------------------------------------------------------------------
// Content-addressed cache wrapper. One file per request digest holding the
// verbatim reply; in-memory map in front. Safe under concurrent use.
// ---------------------------------------------------------------------------
class CachedBackend : public Backend {
public:
    /// `dir` may be empty for a memory-only cache. `salt` should identify the
    /// inner backend (e.g. model name).
    CachedBackend(std::shared_ptr<Backend> inner, std::string dir, std::string salt = "",
                  bool include_tag_in_key = false);

    std::string complete(const CompletionRequest& req) override;
    std::vector<double> embed(const std::string& text) override;

    long upstream_completions() const;

private:
    std::shared_ptr<Backend> inner_;
    std::string dir_;
    std::string salt_;
    bool include_tag_;
    mutable std::mutex mu_;
    std::map<std::string, std::string> mem_;
    std::map<std::string, std::vector<double>> mem_emb_;
    long upstream_calls_ = 0;
};

// ---------------------------------------------------------------------------
// Remote HTTP backend speaking the common chat-completions / embeddings
// schema. The credential is read from an environment variable at call time
// and never persisted.
// ---------------------------------------------------------------------------
struct HttpBackendConfig {
    std::string base_url;        // e.g. http://host:8000/v1
    std::string model;
    std::string embedding_model;  // empty -> hashed embeddings locally
    std::string credential_env;   // name of the env var holding the key
    int max_attempts = 3;
    int backoff_ms = 250;
    int timeout_s = 60;
    int max_inflight = 4;
    int per_minute_limit = 0;  // 0 = unlimited
    std::optional<int> default_max_tokens;
};

class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig cfg);
    ~HttpBackend() override;

    std::string complete(const CompletionRequest& req) override;
    std::vector<double> embed(const std::string& text) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace selfgoal
