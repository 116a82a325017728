#include "ragattack/ranker.hpp"

#include <algorithm>

namespace ragattack {

std::vector<std::string> IdentityRanker::order(std::string_view, std::span<const RankCandidate> candidates) {
    {
        std::lock_guard lock(mu_);
        ++calls_;
    }
    std::vector<std::string> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) out.push_back(c.id);
    return out;
}

std::size_t IdentityRanker::calls() const {
    std::lock_guard lock(mu_);
    return calls_;
}

std::vector<std::string> PinnedRanker::order(std::string_view, std::span<const RankCandidate> candidates) {
    {
        std::lock_guard lock(mu_);
        ++calls_;
    }
    std::vector<std::string> out;
    out.reserve(candidates.size());
    for (const auto& p : pinned_)
        for (const auto& c : candidates)
            if (c.id == p && std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
    for (const auto& c : candidates)
        if (std::find(out.begin(), out.end(), c.id) == out.end()) out.push_back(c.id);
    return out;
}

std::size_t PinnedRanker::calls() const {
    std::lock_guard lock(mu_);
    return calls_;
}

}  // namespace ragattack
