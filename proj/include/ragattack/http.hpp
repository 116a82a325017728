#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <string>

#include "ragattack/embedding.hpp"
#include "ragattack/llm.hpp"
#include "ragattack/ranker.hpp"

namespace ragattack {

/// A JSON-over-HTTP service endpoint. `url` may carry a path
/// ("http://host:8000/v1/chat/completions"); without one the client's
/// default path is used.
struct EndpointConfig {
    std::string url;
    std::string model;
    std::string api_key;
    std::chrono::seconds timeout{60};
};

/// Splits "scheme://host[:port][/path]" into ("scheme://host[:port]", "/path").
std::pair<std::string, std::string> split_url(const std::string& url, const std::string& default_path);

/// Chat endpoint: {model, messages:[{role, content}], temperature, max_tokens}
/// → {choices:[{message:{content}}]}.
class RemoteChatProvider final : public ChatProvider {
public:
    explicit RemoteChatProvider(EndpointConfig cfg) : cfg_(std::move(cfg)) {}
    std::string send(const ChatRequest& request) override;
    std::string_view kind() const override { return "remote"; }
    std::size_t requests() const noexcept { return requests_; }

private:
    EndpointConfig cfg_;
    std::atomic<std::size_t> requests_{0};
};

/// Embeddings endpoint: {model, input:[strings]} → {data:[{index, embedding}]}.
class HttpEmbeddingClient final : public EmbeddingClient {
public:
    explicit HttpEmbeddingClient(EndpointConfig cfg) : cfg_(std::move(cfg)) {}
    std::vector<std::vector<float>> embed(std::span<const std::string> texts) override;
    std::size_t calls() const override { return calls_; }

private:
    EndpointConfig cfg_;
    std::atomic<std::size_t> calls_{0};
};

/// Ranker endpoint: {query, candidates:[{id, text}]} → {order:[ids]}.
class HttpListRanker final : public ListRanker {
public:
    explicit HttpListRanker(EndpointConfig cfg) : cfg_(std::move(cfg)) {}
    std::vector<std::string> order(std::string_view query, std::span<const RankCandidate> candidates) override;
    std::size_t calls() const override { return calls_; }

private:
    EndpointConfig cfg_;
    std::atomic<std::size_t> calls_{0};
};

}  // namespace ragattack
