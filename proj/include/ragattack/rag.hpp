#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ragattack/corpus.hpp"
#include "ragattack/llm.hpp"
#include "ragattack/prompts.hpp"
#include "ragattack/ranker.hpp"
#include "ragattack/retrieval.hpp"

namespace ragattack {

enum class DefenseKind { none, rerank, confidence };
std::string_view to_string(DefenseKind k);
DefenseKind defense_from_string(std::string_view s);

struct DefenseConfig {
    DefenseKind kind = DefenseKind::none;
    std::size_t rerank_pool = 50;
    std::size_t rerank_out = 5;
    std::size_t list_size = 5;
    double confidence_threshold = 0.0;
    double overlap_tau = 0.3;

    /// Throws InvalidInputError on rerank_out > rerank_pool or list_size < 2.
    void validate() const;
};

struct TournamentResult {
    std::vector<std::string> ids;
    /// Elimination rounds; the final ordering call is not counted.
    std::size_t rounds = 0;
    std::size_t ranker_calls = 0;
};

/// Bracket-style listwise reranking. Each elimination round seeds the
/// current candidates (in rank order) into ceil(n / list_size) interleaved
/// groups, has the ranker order every group, and advances each group's top
/// entries so that max(rerank_out, ceil(n / 2)) candidates survive. Once at
/// most rerank_out remain, one final call orders the survivors. Ranker
/// failures or non-permutation replies raise DefenseError.
TournamentResult tournament_rerank(const RetrievalResult& pool, const CorpusStore& store, std::string_view query,
                                   ListRanker& ranker, const DefenseConfig& cfg, std::size_t workers = 1);

struct GateVerdict {
    bool use_docs = false;
    std::vector<std::string> kept;
    double top_score = 0.0;
    double overlap = 0.0;
};

/// Fraction of the query's content terms that occur among `doc`'s words.
/// 0 when the query has no content terms.
double lexical_overlap(std::string_view doc, std::string_view query);

/// Keeps every retrieved document iff the top-1 score reaches
/// confidence_threshold and the top-1 document covers at least overlap_tau
/// of the query's content terms; otherwise the answer is closed-book.
GateVerdict confidence_gate(std::string_view query, const RetrievalResult& retrieved, const CorpusStore& store,
                            const DefenseConfig& cfg);
inline GateVerdict confidence_gate(const QueryCase& q, const RetrievalResult& retrieved, const Retriever& index,
                                   const DefenseConfig& cfg) {
    return confidence_gate(q.question, retrieved, index.store(), cfg);
}

/// Threshold at which `fraction` of the given top-1 scores fall strictly
/// below (nearest-rank quantile); used to calibrate the gate on clean runs.
double calibrate_confidence_threshold(std::vector<double> top1_scores, double fraction);

struct RagAnswer {
    std::string query_id;
    std::string response_text;
    /// The ranked list the defense stage produced; metrics count poison here.
    RetrievalResult retrieved;
    std::vector<std::string> used_docs;
    DefenseKind defense = DefenseKind::none;
    bool closed_book = false;
    /// The defense failed and the query fell back to plain top-k.
    bool defense_fallback = false;
    std::string defense_error;
};

struct AnswerOptions {
    bool use_paraphrase = false;
    GenerationConfig generation = GenerationConfig{}.with_temperature(kAnswerTemperature);
    const PromptLibrary* prompts = nullptr;  // default_prompts() when null
    std::size_t ranker_workers = 1;
};

/// The text actually sent to the system: the paraphrase when requested.
std::string_view asked_text(const QueryCase& q, bool use_paraphrase);

/// Renders the QA prompt for `docs` (rank order). Options are listed one per
/// line as "<label>. <text>" for multiple-choice questions.
RenderedPrompt build_qa_prompt(const QueryCase& q, std::string_view question, const std::vector<const Document*>& docs,
                               const PromptLibrary& prompts);

/// retrieve → defend → prompt → generate. `ranker` is required for the
/// rerank defense.
RagAnswer answer_query(const QueryCase& q, const Retriever& index, ChatProvider& generator, std::size_t k,
                       const DefenseConfig& defense, ListRanker* ranker = nullptr, const AnswerOptions& opts = {});

/// Open QA: a gold answer is a case-insensitive substring of the
/// whitespace-collapsed response. Multiple choice: the gold label appears
/// as a standalone token, or the gold option text appears.
bool extract_answer(std::string_view response_text, const QueryCase& q);

}  // namespace ragattack
