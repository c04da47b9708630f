#include "selfgoal/backend.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "selfgoal/digest.hpp"
#include "selfgoal/errors.hpp"

namespace selfgoal {

using nlohmann::json;
namespace fs = std::filesystem;

std::string role_name(Role r) {
    switch (r) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "user";
}

Role role_from_name(const std::string& s) {
    if (s == "system") return Role::system;
    if (s == "assistant") return Role::assistant;
    if (s == "user") return Role::user;
    throw std::invalid_argument("unknown chat role: " + s);
}

void validate_request(const CompletionRequest& req) {
    if (req.messages.empty())
        throw std::invalid_argument("completion request needs at least one message");
    for (const auto& m : req.messages) {
        if (m.role != Role::assistant && m.content.empty())
            throw std::invalid_argument("completion request has an empty system/user message");
    }
    if (req.temperature < 0.0)
        throw std::invalid_argument("completion request temperature must be >= 0");
}

std::string request_digest(const CompletionRequest& req, const std::string& salt,
                           bool include_tag) {
    json j;
    j["messages"] = json::array();
    for (const auto& m : req.messages)
        j["messages"].push_back({{"role", role_name(m.role)}, {"content", m.content}});
    j["temperature"] = req.temperature;
    if (req.max_tokens) j["max_tokens"] = *req.max_tokens;
    if (!salt.empty()) j["salt"] = salt;
    if (include_tag) j["tag"] = req.tag;
    return sha256_hex(j.dump());
}

// --- ScriptedBackend --------------------------------------------------------

ScriptedBackend::ScriptedBackend(const json& script) {
    const json replies = script.value("replies", json::object());
    const json embeddings = script.value("embeddings", json::object());
    for (const auto& [tag, entries] : replies.items()) {
        for (const auto& e : entries) {
            if (e.is_string()) {
                add_reply(tag, e.get<std::string>());
            } else {
                add_reply(tag, e.at("reply").get<std::string>(),
                          e.contains("digest")
                              ? std::optional<std::string>(e["digest"].get<std::string>())
                              : std::nullopt);
            }
        }
    }
    for (const auto& [text, vec] : embeddings.items())
        set_embedding(text, vec.get<std::vector<double>>());
    embedding_dim_ = script.value("embedding_dim", embedding_dim_);
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open script file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ParseError("script file " + path + ": " + e.what(), e.byte);
    }
    return std::make_shared<ScriptedBackend>(j);
}

void ScriptedBackend::add_reply(const std::string& tag, std::string reply,
                                std::optional<std::string> expect_digest) {
    std::lock_guard<std::mutex> lock(mu_);
    replies_[tag].push_back({std::move(reply), std::move(expect_digest)});
}

void ScriptedBackend::set_embedding(std::string text, std::vector<double> vec) {
    std::lock_guard<std::mutex> lock(mu_);
    embeddings_[std::move(text)] = std::move(vec);
}

void ScriptedBackend::set_embedding_dim(int dim) {
    std::lock_guard<std::mutex> lock(mu_);
    embedding_dim_ = dim;
}

std::string ScriptedBackend::complete(const CompletionRequest& req) {
    validate_request(req);
    std::lock_guard<std::mutex> lock(mu_);
    // Exact tag first, then progressively stripped prefixes.
    std::string tag = req.tag;
    while (true) {
        auto it = replies_.find(tag);
        if (it != replies_.end()) {
            if (it->second.empty())
                throw ScriptExhausted("script exhausted for tag: " + tag +
                                      " (requested: " + req.tag + ")");
            Entry e = std::move(it->second.front());
            it->second.pop_front();
            if (e.expect_digest) {
                std::string got = request_digest(req);
                if (got != *e.expect_digest)
                    throw ScriptExhausted("script digest mismatch for tag " + req.tag +
                                          ": expected " + *e.expect_digest + ", got " + got);
            }
            return e.reply;
        }
        auto pos = tag.rfind('/');
        if (pos == std::string::npos) break;
        tag.resize(pos);
    }
    throw ScriptExhausted("no scripted reply for tag: " + req.tag);
}

std::vector<double> ScriptedBackend::embed(const std::string& text) {
    if (text.empty()) throw std::invalid_argument("embed: empty text");
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = embeddings_.find(text);
        if (it != embeddings_.end()) return it->second;
    }
    return HashedEmbedding(embedding_dim_).embed(text);
}

// --- CachedBackend -----------------------------------------------------------

CachedBackend::CachedBackend(std::shared_ptr<Backend> inner, std::string dir, std::string salt,
                             bool include_tag_in_key)
    : inner_(std::move(inner)), dir_(std::move(dir)), salt_(std::move(salt)),
      include_tag_(include_tag_in_key) {
    if (!dir_.empty()) fs::create_directories(dir_);
}

namespace {

std::optional<std::string> read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
}

}  // namespace

std::string CachedBackend::complete(const CompletionRequest& req) {
    validate_request(req);
    const std::string key = request_digest(req, salt_, include_tag_);
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = mem_.find(key);
        if (it != mem_.end()) return it->second;
        if (!dir_.empty()) {
            if (auto disk = read_file(fs::path(dir_) / key)) {
                mem_[key] = *disk;
                return *disk;
            }
        }
    }
    std::string reply = inner_->complete(req);
    {
        std::lock_guard<std::mutex> lock(mu_);
        ++upstream_calls_;
        mem_[key] = reply;
        if (!dir_.empty()) write_file(fs::path(dir_) / key, reply);
    }
    return reply;
}

std::vector<double> CachedBackend::embed(const std::string& text) {
    if (text.empty()) throw std::invalid_argument("embed: empty text");
    const std::string key = sha256_hex("embed\n" + salt_ + "\n" + text);
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = mem_emb_.find(key);
        if (it != mem_emb_.end()) return it->second;
        if (!dir_.empty()) {
            if (auto disk = read_file(fs::path(dir_) / (key + ".emb"))) {
                auto vec = json::parse(*disk).get<std::vector<double>>();
                mem_emb_[key] = vec;
                return vec;
            }
        }
    }
    auto vec = inner_->embed(text);
    {
        std::lock_guard<std::mutex> lock(mu_);
        mem_emb_[key] = vec;
        if (!dir_.empty()) write_file(fs::path(dir_) / (key + ".emb"), json(vec).dump());
    }
    return vec;
}

long CachedBackend::upstream_completions() const {
    std::lock_guard<std::mutex> lock(mu_);
    return upstream_calls_;
}

}  // namespace selfgoal
