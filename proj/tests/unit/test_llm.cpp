#include <gtest/gtest.h>

#include <httplib.h>

#include <atomic>
#include <random>
#include <thread>

#include "ragattack/errors.hpp"
#include "ragattack/http.hpp"
#include "ragattack/llm.hpp"
#include "ragattack/prompts.hpp"
#include "ragattack/text.hpp"

using namespace ragattack;
using nlohmann::json;

namespace {

GenerationConfig fast(std::size_t retries = 2) {
    GenerationConfig c;
    c.max_retries = retries;
    c.backoff = std::chrono::milliseconds(0);
    return c;
}

/// Local HTTP server on an ephemeral port, stopped on destruction.
class FakeServer {
public:
    explicit FakeServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
        server_.Post(".*", [this, handler](const httplib::Request& req, httplib::Response& res) {
            ++hits;
            handler(req, res);
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeServer() {
        server_.stop();
        thread_.join();
    }
    std::string url(const std::string& path = "") const { return "http://127.0.0.1:" + std::to_string(port_) + path; }
    std::atomic<int> hits{0};

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

json random_value(std::mt19937_64& rng, int depth) {
    std::uniform_int_distribution<int> pick(0, depth > 2 ? 3 : 5);
    const std::vector<std::string> strings = {"plain", "with {brace", "close } and ]", "quote \" inside",
                                              "back\\slash", "[x]{y}", ""};
    switch (pick(rng)) {
        case 0: return static_cast<int>(rng() % 1000) - 500;
        case 1: return strings[rng() % strings.size()];
        case 2: return rng() % 2 == 0;
        case 3: return nullptr;
        case 4: {
            json a = json::array();
            for (int i = rng() % 4; i > 0; --i) a.push_back(random_value(rng, depth + 1));
            return a;
        }
        default: {
            json o = json::object();
            for (int i = rng() % 4; i > 0; --i) o[strings[rng() % strings.size()] + std::to_string(i)] = random_value(rng, depth + 1);
            return o;
        }
    }
}

}  // namespace

TEST(Prompts, WrongAnswerTemplateBindsQuestionAndAnswer) {
    auto p = render(PromptLibrary::builtin().get(PromptLibrary::kWrongAnswer), {{"question", "Q"}, {"answer", "A"}});
    EXPECT_NE(p.user.find("Question: Q"), std::string::npos);
    EXPECT_NE(p.user.find("Correct Answer: A"), std::string::npos);
}

TEST(Prompts, UnboundPlaceholderNamed) {
    try {
        render(PromptLibrary::builtin().get(PromptLibrary::kWrongAnswer), {{"answer", "A"}});
        FAIL();
    } catch (const TemplateError& e) {
        EXPECT_EQ(e.placeholder(), "question");
    }
}

TEST(Prompts, NoPlaceholdersVerbatim) {
    PromptTemplate t{"t", "sys", "plain {\"json\": 1} text"};
    auto p = render(t, {});
    EXPECT_EQ(p.system, "sys");
    EXPECT_EQ(p.user, t.user);
    EXPECT_TRUE(t.required_placeholders().empty());
}

TEST(Prompts, BoundValuesNotReexpanded) {
    EXPECT_EQ(render_text("{a} {b}", {{"a", "{b}"}, {"b", "x"}}), "{b} x");
}

TEST(Prompts, ParseSections) {
    auto t = PromptTemplate::parse("n", "[system]\nS line\n[user]\nU {question}\n");
    EXPECT_EQ(t.system, "S line");
    EXPECT_EQ(t.user, "U {question}");
    EXPECT_EQ(t.required_placeholders(), (std::set<std::string>{"question"}));
    EXPECT_EQ(PromptTemplate::parse("n", "only user").user, "only user");
}

TEST(Prompts, EveryBuiltinParses) {
    auto lib = PromptLibrary::builtin();
    for (auto name : {PromptLibrary::kDecompose, PromptLibrary::kRationale, PromptLibrary::kWrongAnswer,
                      PromptLibrary::kPoisonDocument, PromptLibrary::kAdversarialText, PromptLibrary::kParaphrase,
                      PromptLibrary::kNesJudge, PromptLibrary::kQaOpen, PromptLibrary::kQaMultipleChoice})
        EXPECT_FALSE(lib.get(name).user.empty()) << name;
    EXPECT_THROW(lib.get("nope"), NotFoundError);
}

TEST(Prompts, JudgePromptCarriesNoPenaltyRule) {
    const auto& t = PromptLibrary::builtin().get(PromptLibrary::kNesJudge);
    auto joined = t.system + t.user;
    EXPECT_NE(joined.find("Information independence"), std::string::npos);
    EXPECT_NE(joined.find("Naturalness and plausibility"), std::string::npos);
    EXPECT_NE(joined.find("Do not lower the score just because the query text appears"), std::string::npos);
}

TEST(Scripted, CannedResponse) {
    ScriptedProvider p({{{"hello"}, std::nullopt, "world", std::nullopt, false}});
    EXPECT_EQ(complete(p, "", "say hello", fast()), "world");
    EXPECT_EQ(p.calls(), 1u);
}

TEST(Scripted, UnmatchedPrompt) {
    ScriptedProvider p({{{"hello"}, std::nullopt, "world", std::nullopt, false}});
    EXPECT_THROW(complete(p, "", "goodbye", fast()), UnmatchedPromptError);
}

TEST(Scripted, TimesAndHashMatchers) {
    RenderedPrompt rp{"s", "u"};
    ScriptedExchange by_hash;
    by_hash.prompt_hash = text::hex64(text::fnv1a64(rp.joined()));
    by_hash.response = "hashed";
    by_hash.times = 1;
    ScriptedProvider p({by_hash, {{"u"}, std::nullopt, "fallback", std::nullopt, false}});
    EXPECT_EQ(complete(p, rp, fast()), "hashed");
    EXPECT_EQ(complete(p, rp, fast()), "fallback");
}

TEST(Scripted, TransportFailureRetried) {
    ScriptedExchange fail{{"x"}, std::nullopt, "", 2, true};
    ScriptedProvider p({fail, {{"x"}, std::nullopt, "ok", std::nullopt, false}});
    EXPECT_EQ(complete(p, "", "x", fast(2)), "ok");
    EXPECT_EQ(p.calls(), 3u);
}

TEST(Scripted, EmptyOutputIsTyped) {
    ScriptedProvider p({{{"x"}, std::nullopt, "  \n", std::nullopt, false}});
    EXPECT_THROW(complete(p, "", "x", fast()), EmptyOutputError);
}

TEST(Scripted, TranscriptDeterministic) {
    auto run = [] {
        ScriptedProvider p({{{"a"}, std::nullopt, "1", std::nullopt, false}, {{"b"}, std::nullopt, "2", std::nullopt, false}});
        for (auto u : {"a", "b", "ab", "b"}) complete(p, "", u, fast());
        return p.transcript();
    };
    EXPECT_EQ(run(), run());
}

TEST(Generation, TemperatureValidated) {
    ScriptedProvider p({{{"x"}, std::nullopt, "ok", std::nullopt, false}});
    EXPECT_THROW(complete(p, "", "x", fast().with_temperature(2.5)), InvalidInputError);
}

TEST(Remote, Http500ThriceGivesUpAfterThreeAttempts) {
    FakeServer server([](const httplib::Request&, httplib::Response& res) {
        res.status = 500;
        res.set_content("{}", "application/json");
    });
    RemoteChatProvider p({server.url(), "m", "", std::chrono::seconds(5)});
    try {
        complete(p, "s", "u", fast(2));
        FAIL();
    } catch (const TransportError& e) {
        EXPECT_EQ(e.status(), 500);
    }
    EXPECT_EQ(server.hits.load(), 3);
    EXPECT_EQ(p.requests(), 3u);
}

TEST(Remote, ChatRequestShape) {
    json seen;
    std::string auth;
    FakeServer server([&](const httplib::Request& req, httplib::Response& res) {
        seen = json::parse(req.body);
        auth = req.get_header_value("Authorization");
        res.set_content(R"({"choices":[{"message":{"content":"reply"}}]})", "application/json");
    });
    RemoteChatProvider p({server.url("/v1/chat/completions"), "gen-model", "secret", std::chrono::seconds(5)});
    EXPECT_EQ(complete(p, "sys", "user", fast().with_temperature(0.1)), "reply");
    EXPECT_EQ(seen["model"], "gen-model");
    EXPECT_EQ(seen["messages"][0]["role"], "system");
    EXPECT_EQ(seen["messages"][1]["content"], "user");
    EXPECT_DOUBLE_EQ(seen["temperature"].get<double>(), 0.1);
    EXPECT_EQ(auth, "Bearer secret");
}

TEST(Remote, MalformedChatResponseIsSchemaError) {
    FakeServer server([](const httplib::Request&, httplib::Response& res) { res.set_content("{\"x\":1}", "application/json"); });
    RemoteChatProvider p({server.url(), "m", "", std::chrono::seconds(5)});
    EXPECT_THROW(complete(p, "", "u", fast()), SchemaError);
}

TEST(Remote, EmbeddingsAndRanker) {
    FakeServer server([](const httplib::Request& req, httplib::Response& res) {
        auto body = json::parse(req.body);
        if (req.path == "/v1/embeddings") {
            json data = json::array();
            for (std::size_t i = 0; i < body["input"].size(); ++i)
                data.push_back({{"index", i}, {"embedding", {static_cast<double>(i), 1.0}}});
            res.set_content(json{{"data", data}}.dump(), "application/json");
        } else {
            json order = json::array();
            for (auto it = body["candidates"].rbegin(); it != body["candidates"].rend(); ++it) order.push_back((*it)["id"]);
            res.set_content(json{{"order", order}}.dump(), "application/json");
        }
    });
    HttpEmbeddingClient emb({server.url(), "e", "", std::chrono::seconds(5)});
    std::vector<std::string> texts{"a", "b"};
    auto v = emb.embed(texts);
    EXPECT_EQ(v[1], (std::vector<float>{1.0f, 1.0f}));
    HttpListRanker rk({server.url(), "", "", std::chrono::seconds(5)});
    std::vector<RankCandidate> c{{"x", "t"}, {"y", "u"}};
    EXPECT_EQ(rk.order("q", c), (std::vector<std::string>{"y", "x"}));
}

TEST(Remote, UnreachableIsTransportError) {
    RemoteChatProvider p({"http://127.0.0.1:1", "m", "", std::chrono::seconds(1)});
    EXPECT_THROW(complete(p, "", "u", fast(0)), TransportError);
}

TEST(Remote, SplitUrl) {
    EXPECT_EQ(split_url("http://h:1/a/b", "/d"), (std::pair<std::string, std::string>{"http://h:1", "/a/b"}));
    EXPECT_EQ(split_url("http://h", "/d").second, "/d");
    EXPECT_THROW(split_url("h:1", "/d"), ConfigError);
}

TEST(ExtractJson, ArrayInProse) {
    auto j = extract_json_block("Here you go: [{\"phrase\":\"x\"}]");
    ASSERT_TRUE(j.is_array());
    EXPECT_EQ(j.size(), 1u);
}

TEST(ExtractJson, FencedObject) {
    auto j = extract_json_block("Sure.\n```json\n{\"a\": {\"b\": [1, 2]}}\n```\nDone.");
    EXPECT_EQ(j, json::parse(R"({"a": {"b": [1, 2]}})"));
}

TEST(ExtractJson, SkipsUnparseableCandidates) {
    EXPECT_EQ(extract_json_block("{not json} then [1]"), json::parse("[1]"));
    EXPECT_THROW(extract_json_block("no json here"), ExtractionError);
    EXPECT_THROW(extract_json_block("{\"open\": 1"), ExtractionError);
}

TEST(ExtractJson, FuzzAgainstReferenceParser) {
    std::mt19937_64 rng(2024);
    const std::vector<std::string> prefixes = {"", "Answer: ", "Here is the JSON you asked for:\n", "} stray ] marks: ",
                                               "```json\n"};
    const std::vector<std::string> suffixes = {"", "\nHope this helps.", " }", "\n```", " trailing ] text"};
    for (int i = 0; i < 50; ++i) {
        json v = (i % 2 == 0) ? json::object() : json::array();
        for (int j = 1 + rng() % 4; j > 0; --j) {
            if (v.is_object()) v["k" + std::to_string(j)] = random_value(rng, 1);
            else v.push_back(random_value(rng, 1));
        }
        std::string doc = prefixes[rng() % prefixes.size()] + v.dump(i % 3 == 0 ? 2 : -1) + suffixes[rng() % suffixes.size()];
        EXPECT_EQ(extract_json_block(doc), json::parse(v.dump())) << doc;
    }
}
