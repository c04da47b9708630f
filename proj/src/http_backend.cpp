#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "selfgoal/backend.hpp"
#include "selfgoal/errors.hpp"

namespace selfgoal {

using nlohmann::json;

namespace {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;    // leading path prefix, no trailing slash
};

SplitUrl split_base_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigError("base_url must include a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    SplitUrl s;
    if (path_start == std::string::npos) {
        s.origin = url;
    } else {
        s.origin = url.substr(0, path_start);
        s.path = url.substr(path_start);
        while (!s.path.empty() && s.path.back() == '/') s.path.pop_back();
    }
    return s;
}

}  // namespace

struct HttpBackend::Impl {
    HttpBackendConfig cfg;
    SplitUrl url;

    std::mutex mu;
    std::condition_variable cv;
    int inflight = 0;
    std::deque<std::chrono::steady_clock::time_point> recent;

    explicit Impl(HttpBackendConfig c) : cfg(std::move(c)), url(split_base_url(cfg.base_url)) {}

    void acquire_slot() {
        std::unique_lock<std::mutex> lock(mu);
        cv.wait(lock, [&] { return inflight < cfg.max_inflight; });
        ++inflight;
        if (cfg.per_minute_limit > 0) {
            const auto now = std::chrono::steady_clock::now();
            while (!recent.empty() && now - recent.front() > std::chrono::minutes(1))
                recent.pop_front();
            while (static_cast<int>(recent.size()) >= cfg.per_minute_limit) {
                auto wake = recent.front() + std::chrono::minutes(1);
                cv.wait_until(lock, wake);
                const auto t = std::chrono::steady_clock::now();
                while (!recent.empty() && t - recent.front() > std::chrono::minutes(1))
                    recent.pop_front();
            }
            recent.push_back(std::chrono::steady_clock::now());
        }
    }

    void release_slot() {
        {
            std::lock_guard<std::mutex> lock(mu);
            --inflight;
        }
        cv.notify_all();
    }

    json post(const std::string& endpoint, const json& body) {
        acquire_slot();
        struct SlotGuard {
            Impl* impl;
            ~SlotGuard() { impl->release_slot(); }
        } guard{this};

        httplib::Headers headers{{"Content-Type", "application/json"}};
        if (!cfg.credential_env.empty()) {
            if (const char* key = std::getenv(cfg.credential_env.c_str()))
                headers.emplace("Authorization", std::string("Bearer ") + key);
        }
        const std::string payload = body.dump();
        std::string last_error;
        for (int attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
            httplib::Client cli(url.origin);
            cli.set_connection_timeout(cfg.timeout_s, 0);
            cli.set_read_timeout(cfg.timeout_s, 0);
            auto res = cli.Post((url.path + endpoint).c_str(), headers, payload,
                                "application/json");
            if (res) {
                if (res->status >= 200 && res->status < 300) {
                    try {
                        return json::parse(res->body);
                    } catch (const json::parse_error& e) {
                        throw RemoteRejected(res->status,
                                             "unparseable response body: " + res->body);
                    }
                }
                if (res->status >= 500) {
                    last_error = "status " + std::to_string(res->status);
                } else {
                    throw RemoteRejected(res->status, res->body);
                }
            } else {
                last_error = httplib::to_string(res.error());
            }
            if (attempt < cfg.max_attempts)
                std::this_thread::sleep_for(std::chrono::milliseconds(cfg.backoff_ms * attempt));
        }
        throw BackendUnavailable("backend unreachable after " +
                                 std::to_string(cfg.max_attempts) + " attempts (" + last_error +
                                 ")");
    }
};

HttpBackend::HttpBackend(HttpBackendConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {}
HttpBackend::~HttpBackend() = default;

std::string HttpBackend::complete(const CompletionRequest& req) {
    validate_request(req);
    json body;
    body["model"] = impl_->cfg.model;
    body["temperature"] = req.temperature;
    if (req.max_tokens)
        body["max_tokens"] = *req.max_tokens;
    else if (impl_->cfg.default_max_tokens)
        body["max_tokens"] = *impl_->cfg.default_max_tokens;
    body["messages"] = json::array();
    for (const auto& m : req.messages)
        body["messages"].push_back({{"role", role_name(m.role)}, {"content", m.content}});

    json res = impl_->post("/chat/completions", body);
    try {
        return res.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
        throw RemoteRejected(200, "response missing choices[0].message.content: " + res.dump());
    }
}

std::vector<double> HttpBackend::embed(const std::string& text) {
    if (text.empty()) throw std::invalid_argument("embed: empty text");
    if (impl_->cfg.embedding_model.empty()) {
        // No embedding endpoint configured; a deterministic local embedding
        // keeps the similarity filter functional.
        return HashedEmbedding().embed(text);
    }
    json body{{"model", impl_->cfg.embedding_model}, {"input", text}};
    json res = impl_->post("/embeddings", body);
    try {
        return res.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const json::exception&) {
        throw RemoteRejected(200, "response missing data[0].embedding: " + res.dump());
    }
}

}  // namespace selfgoal
