#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

namespace ragattack {

/// Text → fixed-dimension vector service. Implementations must return one
/// vector per input, in input order.
class EmbeddingClient {
public:
    virtual ~EmbeddingClient() = default;
    virtual std::vector<std::vector<float>> embed(std::span<const std::string> texts) = 0;
    /// Number of embed() calls served so far.
    virtual std::size_t calls() const = 0;
};

/// Fixed lookup table; unknown texts are an error rather than a guess.
class ScriptedEmbedder final : public EmbeddingClient {
public:
    ScriptedEmbedder() = default;
    explicit ScriptedEmbedder(std::map<std::string, std::vector<float>> table) : table_(std::move(table)) {}

    void set(std::string text, std::vector<float> v);
    std::vector<std::vector<float>> embed(std::span<const std::string> texts) override;
    std::size_t calls() const override;

    /// JSONL rows of {"text": ..., "embedding": [...]}.
    static std::unique_ptr<ScriptedEmbedder> from_jsonl(const std::string& path);

private:
    std::map<std::string, std::vector<float>> table_;
    mutable std::mutex mu_;
    std::size_t calls_ = 0;
};

/// Offline bag-of-words embedder: word tokens hashed into `dim` buckets,
/// L2-normalized. Deterministic and network-free.
class HashingEmbedder final : public EmbeddingClient {
public:
    explicit HashingEmbedder(std::size_t dim = 256) : dim_(dim) {}
    std::vector<std::vector<float>> embed(std::span<const std::string> texts) override;
    std::size_t calls() const override;

private:
    std::size_t dim_;
    mutable std::mutex mu_;
    std::size_t calls_ = 0;
};

}  // namespace ragattack
