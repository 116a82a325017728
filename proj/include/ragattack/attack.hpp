#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragattack/corpus.hpp"
#include "ragattack/llm.hpp"
#include "ragattack/prompts.hpp"
#include "ragattack/retrieval.hpp"

namespace ragattack {

inline constexpr std::size_t kMaxQueryComponents = 10;
inline constexpr std::size_t kDefaultPoisonPerQuery = 5;
inline constexpr std::string_view kAnalysisUnavailable = "analysis unavailable";

enum class Relevance { supports_intent, superficial, off_topic };
std::string_view to_string(Relevance r);
std::optional<Relevance> relevance_from_string(std::string_view s);

struct QueryComponent {
    std::string phrase;
    std::string role;
    friend bool operator==(const QueryComponent&, const QueryComponent&) = default;
};

struct ComponentEvidence {
    QueryComponent component;
    bool present = false;
    /// Set only when present.
    std::optional<Relevance> relevance;
    std::string note;
};

struct DocumentAnalysis {
    std::size_t rank = 0;  // 1-based rank in the observed retrieval
    std::vector<ComponentEvidence> evidence;
    std::string summary;
    bool available() const noexcept { return summary != kAnalysisUnavailable; }
};

/// What the retriever appears to reward for one query.
struct PreferenceReport {
    std::string query_id;
    std::vector<QueryComponent> components;
    std::map<std::string, DocumentAnalysis> per_document;

    /// Plain-text digest (rank order) bound into the generation prompt.
    std::string digest() const;
};

struct PoisonSet {
    std::string query_id;
    std::string wrong_answer;
    std::vector<Document> docs;
    std::size_t n_per_query = kDefaultPoisonPerQuery;
    /// Generations rejected by validation while building the set.
    std::size_t regenerations = 0;
};

nlohmann::json to_json(const PreferenceReport& r);
PreferenceReport preference_report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PoisonSet& s);
/// One JSON object per document, each carrying query_id and wrong_answer.
std::vector<nlohmann::json> poison_set_rows(const PoisonSet& s);
PoisonSet poison_set_from_rows(std::span<const nlohmann::json> rows);

const PromptLibrary& default_prompts();

/// Name of the first constraint `text` violates as a member of a poison set
/// of the given origin ("wrong_answer", "query_term", "correct_answer"), or
/// nullopt when it conforms.
std::optional<std::string> poison_document_violation(std::string_view text, const QueryCase& q,
                                                      std::string_view wrong_answer, Origin origin);
/// Throws InvalidInputError if any PoisonSet invariant fails.
void validate_poison_set(const PoisonSet& set, const QueryCase& q);

/// True when `candidate` overlaps no gold answer (bidirectional
/// normalized containment) and is non-empty.
bool is_valid_wrong_answer(std::string_view candidate, const QueryCase& q);

/// LLM query decomposition at the analysis temperature. After
/// max_retries + 1 unusable replies, falls back to the whole question.
std::vector<QueryComponent> decompose_query(const QueryCase& q, ChatProvider& provider, const GenerationConfig& cfg,
                                            const PromptLibrary& prompts = default_prompts());

/// One analysis call per retrieved document. A document whose analysis
/// keeps failing is recorded with empty evidence and kAnalysisUnavailable.
PreferenceReport infer_rationale(const QueryCase& q, const std::vector<QueryComponent>& components,
                                 const RetrievalResult& retrieved, const CorpusStore& store, ChatProvider& provider,
                                 const GenerationConfig& cfg, const PromptLibrary& prompts = default_prompts());

std::string generate_wrong_answer(const QueryCase& q, ChatProvider& provider, const GenerationConfig& cfg,
                                  const PromptLibrary& prompts = default_prompts());

struct PoisonDocOptions {
    std::optional<std::string> source_tag;
    /// Doc ids are "<query_id>-<id_infix>-<i>".
    std::string id_infix = "paradox";
};

PoisonSet generate_poison_docs(const QueryCase& q, const std::string& wrong_answer, const PreferenceReport& report,
                               ChatProvider& provider, const GenerationConfig& cfg, std::size_t n,
                               const PromptLibrary& prompts = default_prompts(), const PoisonDocOptions& opts = {});

/// Baseline: each document is the question, a space, then one adversarial
/// text. Requires q.wrong_answer and that every text contains it.
PoisonSet prepend_baseline(const QueryCase& q, const std::vector<std::string>& adv_texts,
                           const PoisonDocOptions& opts = {});

/// Generates `n` short adversarial texts asserting the wrong answer, the
/// input the prepend baseline expects.
std::vector<std::string> generate_adversarial_texts(const QueryCase& q, const std::string& wrong_answer,
                                                    ChatProvider& provider, const GenerationConfig& cfg,
                                                    std::size_t n, std::size_t max_words = 30,
                                                    const PromptLibrary& prompts = default_prompts());

/// Stores the paraphrase into q.paraphrase and returns it.
std::string paraphrase_query(QueryCase& q, ChatProvider& provider, const GenerationConfig& cfg,
                             const PromptLibrary& prompts = default_prompts());

struct AttackOutput {
    PoisonSet poison;
    std::optional<PreferenceReport> report;
};

/// Pluggable poisoning method. Additional constructions (embedding
/// inversion, gradient search) plug in here with Origin::external.
class AttackStrategy {
public:
    virtual ~AttackStrategy() = default;
    /// `target` is the system under attack; only its top-k outputs are used.
    virtual AttackOutput build(const QueryCase& q, const Retriever& target, std::size_t n) = 0;
    virtual std::string_view name() const = 0;
};

struct ParadoxOptions {
    /// Documents observed from the target per query.
    std::size_t observed_k = 5;
    /// Skip decomposition and rationale inference (ablation).
    bool use_preference_analysis = true;
    std::optional<std::string> source_tag;
};

class ParadoxAttack final : public AttackStrategy {
public:
    ParadoxAttack(ChatProvider& provider, GenerationConfig base, ParadoxOptions opts = {},
                  const PromptLibrary& prompts = default_prompts())
        : provider_(provider), base_(std::move(base)), opts_(std::move(opts)), prompts_(prompts) {}
    AttackOutput build(const QueryCase& q, const Retriever& target, std::size_t n) override;
    std::string_view name() const override { return "paradox"; }

private:
    ChatProvider& provider_;
    GenerationConfig base_;
    ParadoxOptions opts_;
    const PromptLibrary& prompts_;
};

class PrependAttack final : public AttackStrategy {
public:
    PrependAttack(ChatProvider& provider, GenerationConfig base, std::size_t max_words = 30,
                  std::optional<std::string> source_tag = std::nullopt,
                  const PromptLibrary& prompts = default_prompts())
        : provider_(provider), base_(std::move(base)), max_words_(max_words), source_tag_(std::move(source_tag)),
          prompts_(prompts) {}
    AttackOutput build(const QueryCase& q, const Retriever& target, std::size_t n) override;
    std::string_view name() const override { return "prepend"; }

private:
    ChatProvider& provider_;
    GenerationConfig base_;
    std::size_t max_words_;
    std::optional<std::string> source_tag_;
    const PromptLibrary& prompts_;
};

}  // namespace ragattack
