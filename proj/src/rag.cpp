#include "ragattack/rag.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>

#include "ragattack/attack.hpp"
#include "ragattack/concurrency.hpp"
#include "ragattack/errors.hpp"
#include "ragattack/text.hpp"

namespace ragattack {

std::string_view to_string(DefenseKind k) {
    switch (k) {
        case DefenseKind::none: return "none";
        case DefenseKind::rerank: return "rerank";
        case DefenseKind::confidence: return "confidence";
    }
    return "none";
}

DefenseKind defense_from_string(std::string_view s) {
    if (s == "none") return DefenseKind::none;
    if (s == "rerank") return DefenseKind::rerank;
    if (s == "confidence") return DefenseKind::confidence;
    throw ConfigError("unknown defense: " + std::string(s));
}

void DefenseConfig::validate() const {
    if (rerank_out == 0) throw InvalidInputError("rerank_out must be >= 1");
    if (rerank_out > rerank_pool) throw InvalidInputError("rerank_out must not exceed rerank_pool");
    if (list_size < 2) throw InvalidInputError("list_size must be >= 2");
}

namespace {

std::vector<std::string> ranked_group(ListRanker& ranker, std::string_view query, const CorpusStore& store,
                                      const std::vector<std::string>& ids) {
    std::vector<RankCandidate> cands;
    cands.reserve(ids.size());
    for (const auto& id : ids) cands.push_back({id, store.at(id).text});
    std::vector<std::string> order;
    try {
        order = ranker.order(query, cands);
    } catch (const Error& e) {
        throw DefenseError(std::string("ranker failed: ") + e.what());
    }
    auto sorted_in = ids;
    auto sorted_out = order;
    std::sort(sorted_in.begin(), sorted_in.end());
    std::sort(sorted_out.begin(), sorted_out.end());
    if (sorted_in != sorted_out) throw DefenseError("ranker reply is not a permutation of its input");
    return order;
}

}  // namespace

TournamentResult tournament_rerank(const RetrievalResult& pool, const CorpusStore& store, std::string_view query,
                                   ListRanker& ranker, const DefenseConfig& cfg, std::size_t workers) {
    cfg.validate();
    if (pool.ranked.size() > cfg.rerank_pool)
        throw InvalidInputError("rerank pool holds " + std::to_string(pool.ranked.size()) + " > " +
                                std::to_string(cfg.rerank_pool) + " documents");
    TournamentResult result;
    std::vector<std::string> cands = pool.ids();
    {
        std::set<std::string> uniq(cands.begin(), cands.end());
        if (uniq.size() != cands.size()) throw InvalidInputError("rerank pool has duplicate ids");
    }

    while (cands.size() > cfg.rerank_out) {
        const std::size_t n = cands.size();
        const std::size_t target = std::max(cfg.rerank_out, (n + 1) / 2);
        const std::size_t groups = (n + cfg.list_size - 1) / cfg.list_size;
        std::vector<std::vector<std::string>> members(groups);
        for (std::size_t i = 0; i < n; ++i) members[i % groups].push_back(cands[i]);
        std::vector<std::size_t> quota(groups);
        for (std::size_t g = 0; g < groups; ++g)
            quota[g] = std::min(members[g].size(), target / groups + (g < target % groups ? 1 : 0));

        std::vector<std::vector<std::string>> ordered(groups);
        parallel_for(groups, workers, [&](std::size_t g) { ordered[g] = ranked_group(ranker, query, store, members[g]); });
        result.ranker_calls += groups;

        std::vector<std::string> next;
        for (std::size_t r = 0; next.size() < target; ++r) {
            bool any = false;
            for (std::size_t g = 0; g < groups; ++g) {
                if (r < quota[g]) {
                    next.push_back(ordered[g][r]);
                    any = true;
                }
            }
            if (!any) break;
        }
        cands = std::move(next);
        ++result.rounds;
    }

    if (!cands.empty() && cands.size() <= cfg.list_size) {
        cands = ranked_group(ranker, query, store, cands);
        ++result.ranker_calls;
    }
    if (cands.size() > cfg.rerank_out) cands.resize(cfg.rerank_out);
    result.ids = std::move(cands);
    return result;
}

double lexical_overlap(std::string_view doc, std::string_view query) {
    auto terms = text::content_terms(query);
    if (terms.empty()) return 0.0;
    auto words = text::word_tokens(doc);
    std::set<std::string> doc_words(words.begin(), words.end());
    std::size_t shared = 0;
    for (const auto& t : terms) shared += doc_words.count(t);
    return static_cast<double>(shared) / static_cast<double>(terms.size());
}

GateVerdict confidence_gate(std::string_view query, const RetrievalResult& retrieved, const CorpusStore& store,
                            const DefenseConfig& cfg) {
    GateVerdict v;
    if (retrieved.ranked.empty()) return v;
    const auto& top = retrieved.ranked.front();
    v.top_score = top.score;
    v.overlap = lexical_overlap(store.at(top.doc_id).text, query);
    v.use_docs = v.top_score >= cfg.confidence_threshold && v.overlap >= cfg.overlap_tau;
    if (v.use_docs) v.kept = retrieved.ids();
    return v;
}

double calibrate_confidence_threshold(std::vector<double> top1_scores, double fraction) {
    if (top1_scores.empty()) return 0.0;
    fraction = std::clamp(fraction, 0.0, 1.0);
    std::sort(top1_scores.begin(), top1_scores.end());
    auto idx = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(top1_scores.size())));
    if (idx >= top1_scores.size()) return std::nextafter(top1_scores.back(), std::numeric_limits<double>::infinity());
    return top1_scores[idx];
}

std::string_view asked_text(const QueryCase& q, bool use_paraphrase) {
    if (use_paraphrase) {
        if (!q.paraphrase) throw InvalidInputError("query " + q.query_id + " has no paraphrase");
        return *q.paraphrase;
    }
    return q.question;
}

RenderedPrompt build_qa_prompt(const QueryCase& q, std::string_view question, const std::vector<const Document*>& docs,
                               const PromptLibrary& prompts) {
    std::string joined;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (i) joined += '\n';
        joined += docs[i]->text;
    }
    Bindings b{{"documents", joined}, {"question", std::string(question)}};
    if (q.multiple_choice()) {
        std::string opts;
        for (const auto& o : q.options) opts += "\n" + o.label + ". " + o.text;
        b["options"] = opts;
        return render(prompts.get(PromptLibrary::kQaMultipleChoice), b);
    }
    return render(prompts.get(PromptLibrary::kQaOpen), b);
}

RagAnswer answer_query(const QueryCase& q, const Retriever& index, ChatProvider& generator, std::size_t k,
                       const DefenseConfig& defense, ListRanker* ranker, const AnswerOptions& opts) {
    if (k == 0) throw InvalidInputError("k must be >= 1");
    const auto& prompts = opts.prompts ? *opts.prompts : default_prompts();
    const auto question = asked_text(q, opts.use_paraphrase);
    const auto& store = index.store();

    RagAnswer ans;
    ans.query_id = q.query_id;
    ans.defense = defense.kind;
    switch (defense.kind) {
        case DefenseKind::none:
            ans.retrieved = index.retrieve(question, k);
            ans.used_docs = ans.retrieved.ids();
            break;
        case DefenseKind::rerank: {
            if (!ranker) throw InvalidInputError("rerank defense needs a ranker");
            try {
                auto pool = index.retrieve(question, defense.rerank_pool);
                auto reranked = tournament_rerank(pool, store, question, *ranker, defense, opts.ranker_workers);
                ans.retrieved.query_id = q.query_id;
                ans.retrieved.k = defense.rerank_out;
                for (const auto& id : reranked.ids) {
                    auto it = std::find_if(pool.ranked.begin(), pool.ranked.end(),
                                           [&](const ScoredDoc& s) { return s.doc_id == id; });
                    ans.retrieved.ranked.push_back(*it);
                }
            } catch (const DefenseError& e) {
                ans.defense_fallback = true;
                ans.defense_error = e.what();
                ans.retrieved = index.retrieve(question, k);
            }
            ans.used_docs = ans.retrieved.ids();
            break;
        }
        case DefenseKind::confidence: {
            ans.retrieved = index.retrieve(question, k);
            auto verdict = confidence_gate(question, ans.retrieved, store, defense);
            ans.closed_book = !verdict.use_docs;
            ans.used_docs = std::move(verdict.kept);
            break;
        }
    }
    ans.retrieved.query_id = q.query_id;

    std::vector<const Document*> docs;
    for (const auto& id : ans.used_docs) docs.push_back(&store.at(id));
    auto prompt = build_qa_prompt(q, question, docs, prompts);
    ans.response_text = complete(generator, prompt, opts.generation.with_temperature(kAnswerTemperature));
    return ans;
}

namespace {

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

bool has_standalone_token(std::string_view hay, std::string_view token) {
    if (token.empty()) return false;
    for (auto pos = hay.find(token); pos != std::string_view::npos; pos = hay.find(token, pos + 1)) {
        bool left = pos == 0 || !is_alnum(hay[pos - 1]);
        auto end = pos + token.size();
        bool right = end == hay.size() || !is_alnum(hay[end]);
        if (left && right) return true;
    }
    return false;
}

}  // namespace

bool extract_answer(std::string_view response_text, const QueryCase& q) {
    const auto response = text::normalize(response_text);
    if (q.multiple_choice()) {
        if (const auto* gold = q.gold_option()) {
            if (has_standalone_token(text::collapse_whitespace(response_text), gold->label)) return true;
            return response.find(text::normalize(gold->text)) != std::string::npos;
        }
    }
    for (const auto& g : q.gold_answers) {
        auto ng = text::normalize(g);
        if (!ng.empty() && response.find(ng) != std::string::npos) return true;
    }
    return false;
}

}  // namespace ragattack
