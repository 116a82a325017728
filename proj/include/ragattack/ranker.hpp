#pragma once

#include <cstddef>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ragattack {

struct RankCandidate {
    std::string id;
    std::string text;
};

/// Listwise ranker service: orders a small candidate list for a query.
/// Implementations return the candidate ids, best first.
class ListRanker {
public:
    virtual ~ListRanker() = default;
    virtual std::vector<std::string> order(std::string_view query, std::span<const RankCandidate> candidates) = 0;
    virtual std::size_t calls() const = 0;
};

/// Keeps the given order. Stands in for a perfect agreement with the retriever.
class IdentityRanker final : public ListRanker {
public:
    std::vector<std::string> order(std::string_view query, std::span<const RankCandidate> candidates) override;
    std::size_t calls() const override;

private:
    mutable std::mutex mu_;
    std::size_t calls_ = 0;
};

/// Moves any listed id to the front (in list order); others keep their order.
class PinnedRanker final : public ListRanker {
public:
    explicit PinnedRanker(std::vector<std::string> pinned) : pinned_(std::move(pinned)) {}
    std::vector<std::string> order(std::string_view query, std::span<const RankCandidate> candidates) override;
    std::size_t calls() const override;

private:
    std::vector<std::string> pinned_;
    mutable std::mutex mu_;
    std::size_t calls_ = 0;
};

}  // namespace ragattack
