#include "ragattack/http.hpp"

#include <httplib.h>

#include <nlohmann/json.hpp>

#include "ragattack/errors.hpp"

namespace ragattack {

using nlohmann::json;

std::pair<std::string, std::string> split_url(const std::string& url, const std::string& default_path) {
    auto scheme = url.find("://");
    if (scheme == std::string::npos) throw ConfigError("endpoint url needs a scheme: " + url);
    auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, default_path};
    std::string path = url.substr(slash);
    return {url.substr(0, slash), path == "/" ? default_path : path};
}

namespace {

json post_json(const EndpointConfig& cfg, const std::string& default_path, const json& body) {
    auto [base, path] = split_url(cfg.url, default_path);
    httplib::Client cli(base);
    cli.set_connection_timeout(cfg.timeout);
    cli.set_read_timeout(cfg.timeout);
    cli.set_write_timeout(cfg.timeout);
    httplib::Headers headers;
    if (!cfg.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg.api_key);
    auto res = cli.Post(path, headers, body.dump(), "application/json");
    if (!res) throw TransportError("request to " + base + path + " failed: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300)
        throw TransportError("HTTP " + std::to_string(res->status) + " from " + base + path, {}, res->status);
    auto parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) throw SchemaError("non-JSON response from " + base + path);
    return parsed;
}

}  // namespace

std::string RemoteChatProvider::send(const ChatRequest& request) {
    ++requests_;
    json messages = json::array();
    if (!request.system.empty()) messages.push_back({{"role", "system"}, {"content", request.system}});
    messages.push_back({{"role", "user"}, {"content", request.user}});
    json body = {{"model", cfg_.model},
                 {"messages", std::move(messages)},
                 {"temperature", request.temperature},
                 {"max_tokens", request.max_tokens}};
    if (request.seed) body["seed"] = *request.seed;
    auto res = post_json(cfg_, "/v1/chat/completions", body);
    try {
        const auto& content = res.at("choices").at(0).at("message").at("content");
        return content.is_null() ? std::string{} : content.get<std::string>();
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed chat response: ") + e.what());
    }
}

std::vector<std::vector<float>> HttpEmbeddingClient::embed(std::span<const std::string> texts) {
    ++calls_;
    json body = {{"model", cfg_.model}, {"input", std::vector<std::string>(texts.begin(), texts.end())}};
    auto res = post_json(cfg_, "/v1/embeddings", body);
    std::vector<std::vector<float>> out(texts.size());
    try {
        for (const auto& item : res.at("data")) {
            auto idx = item.value("index", std::size_t{0});
            if (idx >= out.size()) throw SchemaError("embedding index out of range");
            out[idx] = item.at("embedding").get<std::vector<float>>();
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed embedding response: ") + e.what());
    }
    for (const auto& v : out)
        if (v.empty()) throw SchemaError("embedding response is missing vectors");
    return out;
}

std::vector<std::string> HttpListRanker::order(std::string_view query, std::span<const RankCandidate> candidates) {
    ++calls_;
    json cands = json::array();
    for (const auto& c : candidates) cands.push_back({{"id", c.id}, {"text", c.text}});
    json body = {{"query", std::string(query)}, {"candidates", std::move(cands)}};
    if (!cfg_.model.empty()) body["model"] = cfg_.model;
    auto res = post_json(cfg_, "/rank", body);
    try {
        return res.at("order").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed ranker response: ") + e.what());
    }
}

}  // namespace ragattack
