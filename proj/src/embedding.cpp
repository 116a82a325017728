#include "ragattack/embedding.hpp"

#include <cmath>

#include "ragattack/corpus.hpp"
#include "ragattack/errors.hpp"
#include "ragattack/text.hpp"

namespace ragattack {

void ScriptedEmbedder::set(std::string text, std::vector<float> v) {
    std::lock_guard lock(mu_);
    table_[std::move(text)] = std::move(v);
}

std::vector<std::vector<float>> ScriptedEmbedder::embed(std::span<const std::string> texts) {
    std::lock_guard lock(mu_);
    ++calls_;
    std::vector<std::vector<float>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        auto it = table_.find(t);
        if (it == table_.end()) throw UnmatchedPromptError("scripted embedder has no vector for: " + t.substr(0, 80));
        out.push_back(it->second);
    }
    return out;
}

std::size_t ScriptedEmbedder::calls() const {
    std::lock_guard lock(mu_);
    return calls_;
}

std::unique_ptr<ScriptedEmbedder> ScriptedEmbedder::from_jsonl(const std::string& path) {
    auto e = std::make_unique<ScriptedEmbedder>();
    for (auto& [lineno, row] : read_jsonl(path)) {
        try {
            e->set(row.at("text").get<std::string>(), row.at("embedding").get<std::vector<float>>());
        } catch (const nlohmann::json::exception& ex) {
            throw ParseError(ex.what(), lineno);
        }
    }
    return e;
}

std::vector<std::vector<float>> HashingEmbedder::embed(std::span<const std::string> texts) {
    {
        std::lock_guard lock(mu_);
        ++calls_;
    }
    std::vector<std::vector<float>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        std::vector<float> v(dim_, 0.0f);
        for (const auto& tok : text::word_tokens(t)) {
            if (text::stopwords().count(tok)) continue;
            auto h = text::fnv1a64(tok);
            v[h % dim_] += (h >> 63) ? -1.0f : 1.0f;
        }
        double norm = 0.0;
        for (float x : v) norm += static_cast<double>(x) * x;
        if (norm > 0.0)
            for (auto& x : v) x = static_cast<float>(x / std::sqrt(norm));
        out.push_back(std::move(v));
    }
    return out;
}

std::size_t HashingEmbedder::calls() const {
    std::lock_guard lock(mu_);
    return calls_;
}

}  // namespace ragattack
