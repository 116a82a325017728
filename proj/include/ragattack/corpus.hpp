#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace ragattack {

/// Where a passage came from. Anything other than `clean` is poison.
enum class Origin { clean, paradox, prepend_baseline, external };

std::string_view to_string(Origin o);
Origin origin_from_string(std::string_view s);

struct Document {
    std::string doc_id;
    std::string text;
    std::optional<std::string> title;
    Origin origin = Origin::clean;
    /// Simulated upload platform, e.g. "wiki-like".
    std::optional<std::string> source_tag;

    bool poisoned() const noexcept { return origin != Origin::clean; }
    friend bool operator==(const Document&, const Document&) = default;
};

struct AnswerOption {
    std::string label;
    std::string text;
    friend bool operator==(const AnswerOption&, const AnswerOption&) = default;
};

struct QueryCase {
    std::string query_id;
    std::string question;
    std::vector<std::string> gold_answers;
    std::vector<AnswerOption> options;  // empty for open QA
    std::optional<std::string> wrong_answer;
    std::optional<std::string> paraphrase;

    bool multiple_choice() const noexcept { return !options.empty(); }
    /// The option whose label or text is listed among the gold answers.
    const AnswerOption* gold_option() const;
    /// Text form of the correct answer: the gold option text for MC
    /// questions, else the first gold answer.
    std::string correct_answer_text() const;
    friend bool operator==(const QueryCase&, const QueryCase&) = default;
};

struct CorpusStats {
    std::size_t n_clean = 0;
    std::size_t n_poisoned = 0;
    double poison_proportion = 0.0;
};

nlohmann::json to_json(const Document& d);
Document document_from_json(const nlohmann::json& j);
nlohmann::json to_json(const QueryCase& q);
QueryCase query_from_json(const nlohmann::json& j);

/// Flat passage store. Clean and poisoned passages share one id space so
/// every retriever sees a single unified corpus.
class CorpusStore {
public:
    CorpusStore() = default;

    /// Throws ConflictError on a duplicate id, InvalidInputError on empty text.
    void add(Document doc);

    /// Validates the whole batch before inserting anything; existing
    /// documents are never touched.
    CorpusStats inject_poison(std::span<const Document> docs);

    const Document* find(std::string_view doc_id) const;
    /// Throws NotFoundError.
    const Document& at(std::string_view doc_id) const;
    std::size_t index_of(std::string_view doc_id) const;

    const std::vector<Document>& documents() const noexcept { return docs_; }
    std::size_t size() const noexcept { return docs_.size(); }
    bool empty() const noexcept { return docs_.empty(); }
    CorpusStats stats() const;

private:
    std::vector<Document> docs_;
    std::unordered_map<std::string, std::size_t> by_id_;
    std::size_t n_poisoned_ = 0;
};

enum class CorpusFormat { jsonl };

struct IngestOptions {
    /// 0 disables chunking; otherwise passages longer than this many
    /// whitespace tokens are split into "<id>_<n>" chunks.
    std::size_t chunk_tokens = 0;
    std::size_t chunk_overlap = 0;
};

CorpusStore ingest_corpus(const std::filesystem::path& path, CorpusFormat format = CorpusFormat::jsonl,
                          const IngestOptions& opts = {});
void export_corpus(const CorpusStore& store, const std::filesystem::path& path);

std::vector<QueryCase> load_queries(const std::filesystem::path& path);
void save_queries(std::span<const QueryCase> queries, const std::filesystem::path& path);

/// Splits on whitespace tokens into windows of at most `max_tokens`, each
/// starting `max_tokens - overlap` tokens after the previous. Chunks are
/// verbatim substrings of `text`.
std::vector<std::string> chunk_text(std::string_view text, std::size_t max_tokens, std::size_t overlap = 0);

/// Reads a JSONL file, skipping blank lines. Parse failures raise ParseError
/// with the 1-based line number.
std::vector<std::pair<std::size_t, nlohmann::json>> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, std::span<const nlohmann::json> rows);

}  // namespace ragattack
