#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>

#include "selfgoal/backend.hpp"
#include "selfgoal/digest.hpp"
#include "selfgoal/errors.hpp"
#include "selfgoal/parsers.hpp"
#include "selfgoal/prompts.hpp"

using namespace selfgoal;
using nlohmann::json;

namespace {

CompletionRequest make_request(const std::string& prompt, const std::string& tag = "t") {
    CompletionRequest req;
    req.messages.push_back({Role::user, prompt});
    req.tag = tag;
    return req;
}

}  // namespace

TEST_CASE("sha256 known vectors") {
    CHECK(sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("The quick brown fox jumps over the lazy dog") ==
          "d7a8fbb307d7809469ca9abcb0082e4f8d5651e46d3cdb762d02d0bf37c9e592");
}

TEST_CASE("request digest covers content, salt, optionally tag") {
    auto a = make_request("hello", "x");
    auto b = make_request("hello", "y");
    CHECK(request_digest(a) == request_digest(b));  // tags are labels, not keys
    CHECK(request_digest(a, "model-1") != request_digest(a, "model-2"));
    CHECK(request_digest(a, "", true) != request_digest(b, "", true));
    auto c = make_request("other", "x");
    CHECK(request_digest(a) != request_digest(c));
}

TEST_CASE("scripted backend: lookup, ordering, fallback and exhaustion") {
    ScriptedBackend b;
    b.add_reply("alice/act/3", "I bid $5000");
    b.add_reply("alice/search", "first");
    b.add_reply("alice/search", "second");

    CHECK(b.complete(make_request("p", "alice/act/3")) == "I bid $5000");
    // Prefix fallback: full tag alice/search/7 resolves to the alice/search list.
    CHECK(b.complete(make_request("p", "alice/search/7")) == "first");
    CHECK(b.complete(make_request("p", "alice/search/8/retry")) == "second");
    CHECK_THROWS_AS(b.complete(make_request("p", "alice/search/9")), ScriptExhausted);
    CHECK_THROWS_AS(b.complete(make_request("p", "bob/act/0")), ScriptExhausted);

    CompletionRequest empty;
    empty.tag = "alice/act/3";
    CHECK_THROWS_AS(b.complete(empty), std::invalid_argument);
}

TEST_CASE("scripted backend digest assertion detects prompt drift") {
    ScriptedBackend b;
    auto req = make_request("the exact prompt", "a/act/0");
    b.add_reply("a/act/0", "ok", request_digest(req));
    CHECK(b.complete(req) == "ok");

    b.add_reply("a/act/1", "ok", request_digest(req));
    auto drifted = make_request("a different prompt", "a/act/1");
    CHECK_THROWS_AS(b.complete(drifted), ScriptExhausted);
}

TEST_CASE("scripted backend embeddings: explicit map, hashed fallback, determinism") {
    ScriptedBackend b;
    b.set_embedding("A", {1, 0});
    b.set_embedding("B", {0, 1});
    CHECK(cosine_similarity(b.embed("A"), b.embed("B")) == doctest::Approx(0.0));
    CHECK(b.embed("unmapped text") == b.embed("unmapped text"));
    CHECK(b.embed("unmapped text").size() == 16);
    CHECK_THROWS_AS(b.embed(""), std::invalid_argument);
}

TEST_CASE("scripted backend from json") {
    json script{{"replies", {{"a/act", json::array({"r1", json{{"reply", "r2"}}})}}},
                {"embeddings", {{"t", json::array({1.0, 0.0})}}},
                {"embedding_dim", 4}};
    ScriptedBackend b(script);
    CHECK(b.complete(make_request("p", "a/act/0")) == "r1");
    CHECK(b.complete(make_request("p", "a/act/1")) == "r2");
    CHECK(b.embed("t") == std::vector<double>{1.0, 0.0});
    CHECK(b.embed("other").size() == 4);
}

TEST_CASE("cached backend: identical requests hit upstream once") {
    auto inner = std::make_shared<ScriptedBackend>();
    inner->add_reply("a/act", "the reply");
    const auto dir = std::filesystem::temp_directory_path() / "selfgoal_cache_test";
    std::filesystem::remove_all(dir);

    CachedBackend cache(inner, dir.string());
    auto req = make_request("same prompt", "a/act/0");
    CHECK(cache.complete(req) == "the reply");
    CHECK(cache.complete(req) == "the reply");  // would throw ScriptExhausted if it hit upstream
    CHECK(cache.upstream_completions() == 1);

    // Tag excluded from the key by default.
    auto other_tag = make_request("same prompt", "a/act/99");
    CHECK(cache.complete(other_tag) == "the reply");
    CHECK(cache.upstream_completions() == 1);

    // A fresh wrapper over an exhausted script still answers from disk.
    CachedBackend cache2(inner, dir.string());
    CHECK(cache2.complete(req) == "the reply");
    CHECK(cache2.upstream_completions() == 0);

    // Embeddings cached as well.
    auto e1 = cache.embed("text");
    CachedBackend cache3(inner, dir.string());
    CHECK(cache3.embed("text") == e1);
    std::filesystem::remove_all(dir);
}

TEST_CASE("parse_selected_ids") {
    SUBCASE("paper-format example") {
        const std::string reply =
            "Thinking step by step, the auction favors caution...\n"
            "{\"IDs\": [1, 3, 10, 21, 7]}";
        CHECK(parse_selected_ids(reply, 5, 30) == std::vector<int>{1, 3, 10, 21, 7});
    }
    SUBCASE("dedup and range filtering") {
        CHECK(parse_selected_ids("reasoning text... {\"IDs\": [2, 2, 99]}", 5, 10) ==
              std::vector<int>{2});
    }
    SUBCASE("last well-formed object wins") {
        const std::string reply =
            "Maybe {\"IDs\": [0]}. On reflection, final answer: {\"IDs\": [4, 5]}";
        CHECK(parse_selected_ids(reply, 5, 9) == std::vector<int>{4, 5});
    }
    SUBCASE("truncation to k") {
        CHECK(parse_selected_ids("{\"IDs\": [0, 1, 2, 3]}", 2, 9) == std::vector<int>{0, 1});
    }
    SUBCASE("no braces -> parse failure") {
        CHECK_THROWS_AS(parse_selected_ids("no structured ids here", 5, 9), ParseError);
        CHECK_THROWS_AS(parse_selected_ids("", 5, 9), ParseError);
    }
    SUBCASE("k must be positive") {
        CHECK_THROWS_AS(parse_selected_ids("{\"IDs\": [1]}", 0, 9), std::invalid_argument);
    }
}

TEST_CASE("parse_subgoal_list") {
    SUBCASE("numbered items") {
        auto got = parse_subgoal_list("1. Assess the Current State\n2. Monitor other bidders", 5);
        CHECK(got == std::vector<std::string>{"Assess the Current State",
                                              "Monitor other bidders"});
    }
    SUBCASE("marker lines win over surrounding prose") {
        auto got = parse_subgoal_list(
            "Sure! Here are some sub-goals:\n- Keep a reserve\n- Track rivals\nGood luck!", 5);
        CHECK(got == std::vector<std::string>{"Keep a reserve", "Track rivals"});
    }
    SUBCASE("one-per-line fallback") {
        auto got = parse_subgoal_list("Keep a reserve\nTrack rivals", 5);
        CHECK(got.size() == 2);
    }
    SUBCASE("empty reply") { CHECK(parse_subgoal_list("", 5).empty()); }
    SUBCASE("cap truncation") {
        std::string reply;
        for (int i = 1; i <= 8; ++i) reply += std::to_string(i) + ". item " + std::to_string(i) + "\n";
        auto got = parse_subgoal_list(reply, 5);
        REQUIRE(got.size() == 5);
        CHECK(got[4] == "item 5");
    }
}

TEST_CASE("clin causal templates") {
    CHECK(clin_line_valid("Early bidding MAY BE NECCESSARY to securing items."));
    CHECK(clin_line_valid("1. Patience SHOULD BE NECCESSARY to avoiding overpaying."));
    CHECK(clin_line_valid("Aggression MAY BE CONTRIBUTE to budget exhaustion."));
    CHECK(clin_line_valid("Panic DOES NOT CONTRIBUTE to profit."));
    CHECK_FALSE(clin_line_valid("Early bidding is usually a good idea."));
    CHECK_FALSE(clin_line_valid("MAY BE NECCESSARY to Y."));  // empty X
    CHECK_FALSE(clin_line_valid("X MAY BE NECESSARY to Y."));  // corrected spelling not accepted

    auto got = parse_clin_learnings(
        "1. Early bidding MAY BE NECCESSARY to securing items.\n"
        "2. Just trust your gut.\n"
        "3. Caution MAY BE CONTRIBUTE to missed chances.");
    REQUIRE(got.size() == 2);
    CHECK(got[0] == "Early bidding MAY BE NECCESSARY to securing items.");
}

TEST_CASE("template rendering preserves literal braces") {
    const std::string rendered = prompts::render(
        prompts::search(), {{"scene", "S"}, {"main_goal", "G"}, {"guidance", "0. a"},
                            {"width", "2"}});
    CHECK(rendered.find("{\"IDs\": [1, 3, 10, 21, 7]}") != std::string::npos);
    CHECK(rendered.find("Select 2 most useful sub-goals") != std::string::npos);
    CHECK(rendered.find("{width}") == std::string::npos);
    CHECK(rendered.find("Here's the current scenario:\nS\n") == 0);
}
