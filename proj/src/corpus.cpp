#include "ragattack/corpus.hpp"

#include <fstream>
#include <set>

#include "ragattack/errors.hpp"
#include "ragattack/text.hpp"

namespace ragattack {

using nlohmann::json;

std::string_view to_string(Origin o) {
    switch (o) {
        case Origin::clean: return "clean";
        case Origin::paradox: return "paradox";
        case Origin::prepend_baseline: return "prepend_baseline";
        case Origin::external: return "external";
    }
    return "clean";
}

Origin origin_from_string(std::string_view s) {
    if (s == "clean") return Origin::clean;
    if (s == "paradox") return Origin::paradox;
    if (s == "prepend_baseline") return Origin::prepend_baseline;
    if (s == "external") return Origin::external;
    throw SchemaError("unknown document origin: " + std::string(s));
}

const AnswerOption* QueryCase::gold_option() const {
    for (const auto& opt : options)
        for (const auto& g : gold_answers)
            if (opt.label == g || text::normalize(opt.text) == text::normalize(g)) return &opt;
    return nullptr;
}

std::string QueryCase::correct_answer_text() const {
    if (const auto* opt = gold_option()) return opt->text;
    return gold_answers.empty() ? std::string{} : gold_answers.front();
}

json to_json(const Document& d) {
    json j = {{"id", d.doc_id}, {"text", d.text}};
    if (d.title) j["title"] = *d.title;
    if (d.origin != Origin::clean) j["origin"] = std::string(to_string(d.origin));
    if (d.source_tag) j["source_tag"] = *d.source_tag;
    return j;
}

namespace {

std::string required_string(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw SchemaError(std::string("missing field \"") + key + "\"");
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number_integer()) return std::to_string(it->get<long long>());
    throw SchemaError(std::string("field \"") + key + "\" must be a string");
}

std::optional<std::string> optional_string(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw SchemaError(std::string("field \"") + key + "\" must be a string");
    return it->get<std::string>();
}

}  // namespace

Document document_from_json(const json& j) {
    if (!j.is_object()) throw SchemaError("document must be a JSON object");
    Document d;
    d.doc_id = required_string(j, "id");
    d.text = required_string(j, "text");
    d.title = optional_string(j, "title");
    if (auto o = optional_string(j, "origin")) d.origin = origin_from_string(*o);
    d.source_tag = optional_string(j, "source_tag");
    if (d.doc_id.empty()) throw SchemaError("empty document id");
    if (d.text.empty()) throw SchemaError("empty document text");
    return d;
}

json to_json(const QueryCase& q) {
    json j = {{"id", q.query_id}, {"question", q.question}, {"answers", q.gold_answers}};
    if (!q.options.empty()) {
        json opts = json::array();
        for (const auto& o : q.options) opts.push_back({{"label", o.label}, {"text", o.text}});
        j["options"] = std::move(opts);
    }
    if (q.wrong_answer) j["wrong_answer"] = *q.wrong_answer;
    if (q.paraphrase) j["paraphrase"] = *q.paraphrase;
    return j;
}

QueryCase query_from_json(const json& j) {
    if (!j.is_object()) throw SchemaError("query must be a JSON object");
    QueryCase q;
    q.query_id = required_string(j, "id");
    q.question = required_string(j, "question");
    auto answers = j.find("answers");
    if (answers == j.end()) throw SchemaError("missing field \"answers\"");
    if (answers->is_string()) {
        q.gold_answers.push_back(answers->get<std::string>());
    } else if (answers->is_array()) {
        for (const auto& a : *answers) {
            if (!a.is_string()) throw SchemaError("answers must be strings");
            q.gold_answers.push_back(a.get<std::string>());
        }
    } else {
        throw SchemaError("field \"answers\" must be a list of strings");
    }
    if (q.gold_answers.empty()) throw SchemaError("answers must be non-empty");

    if (auto opts = j.find("options"); opts != j.end() && !opts->is_null()) {
        // Accept both [{label,text}] and MedQA-style {"A": "...", ...}.
        if (opts->is_object()) {
            for (auto it = opts->begin(); it != opts->end(); ++it)
                q.options.push_back({it.key(), it.value().get<std::string>()});
        } else if (opts->is_array()) {
            for (const auto& o : *opts) q.options.push_back({required_string(o, "label"), required_string(o, "text")});
        } else {
            throw SchemaError("field \"options\" must be a list or object");
        }
        std::set<std::string> labels;
        for (const auto& o : q.options)
            if (!labels.insert(o.label).second) throw SchemaError("duplicate option label " + o.label);
    }
    q.wrong_answer = optional_string(j, "wrong_answer");
    q.paraphrase = optional_string(j, "paraphrase");
    if (q.wrong_answer) {
        for (const auto& g : q.gold_answers)
            if (text::overlaps(*q.wrong_answer, g))
                throw SchemaError("wrong_answer overlaps gold answer \"" + g + "\"");
    }
    return q;
}

void CorpusStore::add(Document doc) {
    if (doc.text.empty()) throw InvalidInputError("document " + doc.doc_id + " has empty text");
    if (by_id_.count(doc.doc_id)) throw ConflictError("duplicate document id: " + doc.doc_id);
    by_id_.emplace(doc.doc_id, docs_.size());
    if (doc.poisoned()) ++n_poisoned_;
    docs_.push_back(std::move(doc));
}

CorpusStats CorpusStore::inject_poison(std::span<const Document> docs) {
    std::set<std::string_view> batch_ids;
    for (const auto& d : docs) {
        if (!d.poisoned()) throw InvalidInputError("cannot inject clean document " + d.doc_id);
        if (d.text.empty()) throw InvalidInputError("document " + d.doc_id + " has empty text");
        if (by_id_.count(d.doc_id) || !batch_ids.insert(d.doc_id).second)
            throw ConflictError("poison document id collides: " + d.doc_id);
    }
    for (const auto& d : docs) add(d);
    return stats();
}

const Document* CorpusStore::find(std::string_view doc_id) const {
    auto it = by_id_.find(std::string(doc_id));
    return it == by_id_.end() ? nullptr : &docs_[it->second];
}

const Document& CorpusStore::at(std::string_view doc_id) const {
    if (const auto* d = find(doc_id)) return *d;
    throw NotFoundError("unknown document id: " + std::string(doc_id));
}

std::size_t CorpusStore::index_of(std::string_view doc_id) const {
    auto it = by_id_.find(std::string(doc_id));
    if (it == by_id_.end()) throw NotFoundError("unknown document id: " + std::string(doc_id));
    return it->second;
}

CorpusStats CorpusStore::stats() const {
    CorpusStats s;
    s.n_poisoned = n_poisoned_;
    s.n_clean = docs_.size() - n_poisoned_;
    s.poison_proportion = docs_.empty() ? 0.0 : static_cast<double>(n_poisoned_) / static_cast<double>(docs_.size());
    return s;
}

std::vector<std::pair<std::size_t, json>> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInputError("cannot open " + path.string());
    std::vector<std::pair<std::size_t, json>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        try {
            rows.emplace_back(lineno, json::parse(line));
        } catch (const json::parse_error& e) {
            throw ParseError(e.what(), lineno);
        }
    }
    return rows;
}

void write_jsonl(const std::filesystem::path& path, std::span<const json> rows) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInputError("cannot write " + path.string());
    for (const auto& r : rows) out << r.dump() << '\n';
}

CorpusStore ingest_corpus(const std::filesystem::path& path, CorpusFormat format, const IngestOptions& opts) {
    if (format != CorpusFormat::jsonl) throw InvalidInputError("unsupported corpus format");
    if (!std::filesystem::exists(path)) throw InvalidInputError("corpus file not found: " + path.string());
    CorpusStore store;
    for (auto& [lineno, row] : read_jsonl(path)) {
        Document d;
        try {
            d = document_from_json(row);
        } catch (const SchemaError& e) {
            throw ParseError(e.what(), lineno);
        }
        try {
            if (opts.chunk_tokens == 0 || text::whitespace_token_spans(d.text).size() <= opts.chunk_tokens) {
                store.add(std::move(d));
                continue;
            }
            auto chunks = chunk_text(d.text, opts.chunk_tokens, opts.chunk_overlap);
            for (std::size_t i = 0; i < chunks.size(); ++i) {
                Document c = d;
                c.doc_id = d.doc_id + "_" + std::to_string(i);
                c.text = std::move(chunks[i]);
                store.add(std::move(c));
            }
        } catch (const ConflictError& e) {
            throw ConflictError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return store;
}

void export_corpus(const CorpusStore& store, const std::filesystem::path& path) {
    std::vector<json> rows;
    rows.reserve(store.size());
    for (const auto& d : store.documents()) rows.push_back(to_json(d));
    write_jsonl(path, rows);
}

std::vector<QueryCase> load_queries(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw InvalidInputError("query file not found: " + path.string());
    std::vector<QueryCase> out;
    std::set<std::string> ids;
    for (auto& [lineno, row] : read_jsonl(path)) {
        try {
            out.push_back(query_from_json(row));
        } catch (const SchemaError& e) {
            throw ParseError(e.what(), lineno);
        }
        if (!ids.insert(out.back().query_id).second)
            throw ConflictError("line " + std::to_string(lineno) + ": duplicate query id " + out.back().query_id);
    }
    return out;
}

void save_queries(std::span<const QueryCase> queries, const std::filesystem::path& path) {
    std::vector<json> rows;
    for (const auto& q : queries) rows.push_back(to_json(q));
    write_jsonl(path, rows);
}

std::vector<std::string> chunk_text(std::string_view text, std::size_t max_tokens, std::size_t overlap) {
    if (max_tokens == 0) throw InvalidInputError("max_tokens must be >= 1");
    if (overlap >= max_tokens) throw InvalidInputError("overlap must be smaller than max_tokens");
    auto spans = text::whitespace_token_spans(text);
    std::vector<std::string> chunks;
    const std::size_t stride = max_tokens - overlap;
    for (std::size_t start = 0; start < spans.size(); start += stride) {
        std::size_t end = std::min(start + max_tokens, spans.size());
        chunks.emplace_back(text.substr(spans[start].begin, spans[end - 1].end - spans[start].begin));
        if (end == spans.size()) break;
    }
    return chunks;
}

}  // namespace ragattack
