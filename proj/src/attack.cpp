#include "ragattack/attack.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "ragattack/errors.hpp"
#include "ragattack/text.hpp"

namespace ragattack {

using nlohmann::json;

std::string_view to_string(Relevance r) {
    switch (r) {
        case Relevance::supports_intent: return "supports_intent";
        case Relevance::superficial: return "superficial";
        case Relevance::off_topic: return "off_topic";
    }
    return "off_topic";
}

std::optional<Relevance> relevance_from_string(std::string_view s) {
    if (s == "supports_intent") return Relevance::supports_intent;
    if (s == "superficial") return Relevance::superficial;
    if (s == "off_topic") return Relevance::off_topic;
    return std::nullopt;
}

const PromptLibrary& default_prompts() {
    static const PromptLibrary lib = PromptLibrary::builtin();
    return lib;
}

namespace {

void require_temperature(const GenerationConfig& cfg, double expected, std::string_view op) {
    if (std::abs(cfg.temperature - expected) > 1e-12) {
        std::ostringstream msg;
        msg << op << " runs at temperature " << expected << ", got " << cfg.temperature;
        throw InvalidInputError(msg.str());
    }
}

std::string trimmed(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

/// Phrase is a normalized substring of the question, or all its words occur
/// in the question.
bool phrase_from_question(std::string_view phrase, std::string_view question) {
    if (text::contains_normalized(question, phrase)) return true;
    auto qwords = text::word_tokens(question);
    std::set<std::string> qset(qwords.begin(), qwords.end());
    auto pwords = text::word_tokens(phrase);
    if (pwords.empty()) return false;
    return std::all_of(pwords.begin(), pwords.end(), [&](const auto& w) { return qset.count(w) > 0; });
}

std::optional<std::vector<QueryComponent>> parse_components(const std::string& reply, std::string_view question) {
    json j;
    try {
        j = extract_json_block(reply);
    } catch (const ExtractionError&) {
        return std::nullopt;
    }
    if (!j.is_array() || j.empty() || j.size() > kMaxQueryComponents) return std::nullopt;
    std::vector<QueryComponent> out;
    for (const auto& item : j) {
        if (!item.is_object()) return std::nullopt;
        auto phrase = item.find("phrase");
        auto role = item.find("role");
        if (phrase == item.end() || !phrase->is_string()) return std::nullopt;
        QueryComponent c{trimmed(phrase->get<std::string>()),
                         role != item.end() && role->is_string() ? trimmed(role->get<std::string>()) : std::string{}};
        if (c.phrase.empty() || c.phrase.size() > question.size() || !phrase_from_question(c.phrase, question))
            return std::nullopt;
        out.push_back(std::move(c));
    }
    return out;
}

const QueryComponent* match_component(const std::vector<QueryComponent>& components, std::string_view phrase) {
    auto norm = text::normalize(phrase);
    for (const auto& c : components)
        if (text::normalize(c.phrase) == norm) return &c;
    return nullptr;
}

std::optional<DocumentAnalysis> parse_analysis(const std::string& reply, const std::vector<QueryComponent>& components) {
    json j;
    try {
        j = extract_json_block(reply);
    } catch (const ExtractionError&) {
        return std::nullopt;
    }
    if (!j.is_object()) return std::nullopt;
    auto ev = j.find("evidence");
    auto summary = j.find("summary");
    if (ev == j.end() || !ev->is_array() || summary == j.end() || !summary->is_string()) return std::nullopt;
    DocumentAnalysis a;
    a.summary = trimmed(summary->get<std::string>());
    if (a.summary.empty()) return std::nullopt;
    std::set<std::string> seen;
    for (const auto& item : *ev) {
        if (!item.is_object() || !item.contains("phrase") || !item["phrase"].is_string()) return std::nullopt;
        const auto* comp = match_component(components, item["phrase"].get<std::string>());
        if (!comp || !seen.insert(comp->phrase).second) return std::nullopt;
        ComponentEvidence e;
        e.component = *comp;
        auto present = item.find("present");
        if (present == item.end() || !present->is_boolean()) return std::nullopt;
        e.present = present->get<bool>();
        if (e.present) {
            auto rel = item.find("relevance");
            if (rel == item.end() || !rel->is_string()) return std::nullopt;
            e.relevance = relevance_from_string(rel->get<std::string>());
            if (!e.relevance) return std::nullopt;
        }
        if (auto note = item.find("note"); note != item.end() && note->is_string()) e.note = note->get<std::string>();
        a.evidence.push_back(std::move(e));
    }
    return a;
}

json components_json(const std::vector<QueryComponent>& components) {
    json arr = json::array();
    for (const auto& c : components) arr.push_back({{"phrase", c.phrase}, {"role", c.role}});
    return arr;
}

bool has_query_term(std::string_view doc, std::string_view question) {
    auto terms = text::content_terms(question);
    auto words = text::word_tokens(doc);
    std::set<std::string> doc_words(words.begin(), words.end());
    return std::any_of(terms.begin(), terms.end(), [&](const auto& t) { return doc_words.count(t) > 0; });
}

std::string doc_id_for(const QueryCase& q, std::string_view infix, std::size_t i) {
    return q.query_id + "-" + std::string(infix) + "-" + std::to_string(i);
}

}  // namespace

std::string PreferenceReport::digest() const {
    std::ostringstream out;
    out << "Query components:";
    for (const auto& c : components) out << "\n- \"" << c.phrase << "\" (" << (c.role.empty() ? "unspecified" : c.role) << ")";
    std::vector<std::pair<std::size_t, const std::string*>> order;
    for (const auto& [id, a] : per_document) order.emplace_back(a.rank, &id);
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first < b.first : *a.second < *b.second;
    });
    for (const auto& [rank, id] : order) {
        const auto& a = per_document.at(*id);
        out << "\nRank " << rank << ": " << a.summary;
        std::vector<std::string> supports, weak;
        for (const auto& e : a.evidence) {
            if (!e.present) continue;
            (e.relevance == Relevance::supports_intent ? supports : weak).push_back(e.component.phrase);
        }
        auto list = [&](const char* label, const std::vector<std::string>& v) {
            if (v.empty()) return;
            out << " " << label << ": ";
            for (std::size_t i = 0; i < v.size(); ++i) out << (i ? ", " : "") << "\"" << v[i] << "\"";
            out << ".";
        };
        list("Supporting mentions", supports);
        list("Superficial or off-topic mentions", weak);
    }
    return out.str();
}

json to_json(const PreferenceReport& r) {
    json docs = json::object();
    for (const auto& [id, a] : r.per_document) {
        json ev = json::array();
        for (const auto& e : a.evidence) {
            ev.push_back({{"phrase", e.component.phrase},
                          {"present", e.present},
                          {"relevance", e.relevance ? json(std::string(to_string(*e.relevance))) : json(nullptr)},
                          {"note", e.note}});
        }
        docs[id] = {{"rank", a.rank}, {"evidence", std::move(ev)}, {"summary", a.summary}};
    }
    return {{"query_id", r.query_id}, {"components", components_json(r.components)}, {"per_document", std::move(docs)}};
}

PreferenceReport preference_report_from_json(const json& j) {
    PreferenceReport r;
    r.query_id = j.at("query_id").get<std::string>();
    for (const auto& c : j.at("components")) r.components.push_back({c.at("phrase"), c.value("role", "")});
    for (const auto& [id, d] : j.at("per_document").items()) {
        DocumentAnalysis a;
        a.rank = d.value("rank", std::size_t{0});
        a.summary = d.at("summary").get<std::string>();
        for (const auto& e : d.at("evidence")) {
            const auto* comp = match_component(r.components, e.at("phrase").get<std::string>());
            if (!comp) throw SchemaError("evidence references unknown component");
            ComponentEvidence ce{*comp, e.at("present").get<bool>(), std::nullopt, e.value("note", "")};
            if (ce.present && e.contains("relevance") && e["relevance"].is_string())
                ce.relevance = relevance_from_string(e["relevance"].get<std::string>());
            a.evidence.push_back(std::move(ce));
        }
        r.per_document.emplace(id, std::move(a));
    }
    return r;
}

json to_json(const PoisonSet& s) {
    json docs = json::array();
    for (const auto& d : s.docs) docs.push_back(to_json(d));
    return {{"query_id", s.query_id},
            {"wrong_answer", s.wrong_answer},
            {"n_per_query", s.n_per_query},
            {"regenerations", s.regenerations},
            {"docs", std::move(docs)}};
}

std::vector<json> poison_set_rows(const PoisonSet& s) {
    std::vector<json> rows;
    for (const auto& d : s.docs) {
        auto row = to_json(d);
        row["query_id"] = s.query_id;
        row["wrong_answer"] = s.wrong_answer;
        rows.push_back(std::move(row));
    }
    return rows;
}

PoisonSet poison_set_from_rows(std::span<const json> rows) {
    PoisonSet s;
    if (rows.empty()) throw SchemaError("empty poison set");
    s.query_id = rows.front().at("query_id").get<std::string>();
    s.wrong_answer = rows.front().at("wrong_answer").get<std::string>();
    for (const auto& row : rows) {
        if (row.at("query_id") != s.query_id || row.at("wrong_answer") != s.wrong_answer)
            throw SchemaError("poison set rows disagree on query_id / wrong_answer");
        s.docs.push_back(document_from_json(row));
    }
    s.n_per_query = s.docs.size();
    return s;
}

bool is_valid_wrong_answer(std::string_view candidate, const QueryCase& q) {
    if (text::collapse_whitespace(candidate).empty()) return false;
    for (const auto& g : q.gold_answers)
        if (text::overlaps(candidate, g)) return false;
    if (const auto* opt = q.gold_option(); opt && text::overlaps(candidate, opt->text)) return false;
    return true;
}

std::optional<std::string> poison_document_violation(std::string_view text, const QueryCase& q,
                                                      std::string_view wrong_answer, Origin origin) {
    if (!text::contains_normalized(text, wrong_answer)) return "wrong_answer";
    if (origin == Origin::paradox) {
        if (!has_query_term(text, q.question)) return "query_term";
        if (!text::contains_normalized(text, q.correct_answer_text())) return "correct_answer";
    }
    return std::nullopt;
}

void validate_poison_set(const PoisonSet& set, const QueryCase& q) {
    if (set.docs.size() != set.n_per_query)
        throw InvalidInputError("poison set for " + set.query_id + " has " + std::to_string(set.docs.size()) +
                                " docs, expected " + std::to_string(set.n_per_query));
    for (const auto& d : set.docs) {
        if (d.origin != Origin::paradox && d.origin != Origin::prepend_baseline && d.origin != Origin::external)
            throw InvalidInputError("poison document " + d.doc_id + " has clean origin");
        if (auto v = poison_document_violation(d.text, q, set.wrong_answer, d.origin))
            throw InvalidInputError("poison document " + d.doc_id + " violates " + *v);
    }
}

std::vector<QueryComponent> decompose_query(const QueryCase& q, ChatProvider& provider, const GenerationConfig& cfg,
                                            const PromptLibrary& prompts) {
    require_temperature(cfg, kAnalysisTemperature, "decompose_query");
    auto prompt = render(prompts.get(PromptLibrary::kDecompose), {{"question", q.question}});
    for (std::size_t attempt = 0; attempt <= cfg.max_retries; ++attempt) {
        std::string reply;
        try {
            reply = complete(provider, prompt, cfg);
        } catch (const EmptyOutputError&) {
            continue;
        }
        if (auto parsed = parse_components(reply, q.question)) return *parsed;
    }
    return {QueryComponent{q.question, "full query"}};
}

PreferenceReport infer_rationale(const QueryCase& q, const std::vector<QueryComponent>& components,
                                 const RetrievalResult& retrieved, const CorpusStore& store, ChatProvider& provider,
                                 const GenerationConfig& cfg, const PromptLibrary& prompts) {
    require_temperature(cfg, kAnalysisTemperature, "infer_rationale");
    if (retrieved.ranked.empty()) throw InvalidInputError("infer_rationale needs at least one retrieved document");
    if (components.empty()) throw InvalidInputError("infer_rationale needs query components");
    PreferenceReport report;
    report.query_id = q.query_id;
    report.components = components;
    const std::string comps = components_json(components).dump(2);
    const auto& tpl = prompts.get(PromptLibrary::kRationale);
    for (std::size_t i = 0; i < retrieved.ranked.size(); ++i) {
        const auto& doc = store.at(retrieved.ranked[i].doc_id);
        auto prompt = render(tpl, {{"question", q.question},
                                   {"components", comps},
                                   {"rank", std::to_string(i + 1)},
                                   {"document", doc.text}});
        std::optional<DocumentAnalysis> analysis;
        for (std::size_t attempt = 0; attempt <= cfg.max_retries && !analysis; ++attempt) {
            try {
                analysis = parse_analysis(complete(provider, prompt, cfg), components);
            } catch (const EmptyOutputError&) {
            } catch (const TransportError&) {
                break;  // complete() already retried the transport
            }
        }
        if (!analysis) {
            analysis.emplace();
            analysis->summary = std::string(kAnalysisUnavailable);
        }
        analysis->rank = i + 1;
        if (!report.per_document.emplace(doc.doc_id, std::move(*analysis)).second)
            throw InvalidInputError("duplicate document in retrieval result: " + doc.doc_id);
    }
    return report;
}

std::string generate_wrong_answer(const QueryCase& q, ChatProvider& provider, const GenerationConfig& cfg,
                                  const PromptLibrary& prompts) {
    require_temperature(cfg, kGenerationTemperature, "generate_wrong_answer");
    auto prompt = render(prompts.get(PromptLibrary::kWrongAnswer),
                         {{"question", q.question}, {"answer", q.correct_answer_text()}});
    std::string last_failure = "empty";
    for (std::size_t attempt = 0; attempt <= cfg.max_retries; ++attempt) {
        std::string candidate;
        try {
            candidate = trimmed(complete(provider, prompt, cfg));
        } catch (const EmptyOutputError&) {
            last_failure = "empty";
            continue;
        }
        if (is_valid_wrong_answer(candidate, q)) return candidate;
        last_failure = "overlap";
    }
    throw ValidationExhaustedError("no non-overlapping wrong answer for " + q.query_id, last_failure);
}

PoisonSet generate_poison_docs(const QueryCase& q, const std::string& wrong_answer, const PreferenceReport& report,
                               ChatProvider& provider, const GenerationConfig& cfg, std::size_t n,
                               const PromptLibrary& prompts, const PoisonDocOptions& opts) {
    require_temperature(cfg, kGenerationTemperature, "generate_poison_docs");
    if (n == 0) throw InvalidInputError("n must be >= 1");
    if (!is_valid_wrong_answer(wrong_answer, q)) throw InvalidInputError("wrong answer overlaps a gold answer");
    auto prompt = render(prompts.get(PromptLibrary::kPoisonDocument), {{"question", q.question},
                                                                        {"wrong_answer", wrong_answer},
                                                                        {"correct_answer", q.correct_answer_text()},
                                                                        {"preference_summary", report.digest()}});
    PoisonSet set;
    set.query_id = q.query_id;
    set.wrong_answer = wrong_answer;
    set.n_per_query = n;
    for (std::size_t i = 0; i < n; ++i) {
        std::optional<std::string> accepted;
        std::string last_failure = "empty";
        for (std::size_t attempt = 0; attempt <= cfg.max_retries && !accepted; ++attempt) {
            std::string candidate;
            try {
                candidate = trimmed(complete(provider, prompt, cfg));
            } catch (const EmptyOutputError&) {
                last_failure = "empty";
                ++set.regenerations;
                continue;
            }
            if (auto v = poison_document_violation(candidate, q, wrong_answer, Origin::paradox)) {
                last_failure = *v;
                ++set.regenerations;
                continue;
            }
            accepted = std::move(candidate);
        }
        if (!accepted)
            throw ValidationExhaustedError("poison document " + std::to_string(i) + " for " + q.query_id, last_failure);
        set.docs.push_back(Document{doc_id_for(q, opts.id_infix, i), std::move(*accepted), std::nullopt,
                                    Origin::paradox, opts.source_tag});
    }
    return set;
}

PoisonSet prepend_baseline(const QueryCase& q, const std::vector<std::string>& adv_texts, const PoisonDocOptions& opts) {
    if (!q.wrong_answer) throw InvalidInputError("prepend_baseline needs a wrong answer on query " + q.query_id);
    if (adv_texts.empty()) throw InvalidInputError("prepend_baseline needs adversarial texts");
    PoisonSet set;
    set.query_id = q.query_id;
    set.wrong_answer = *q.wrong_answer;
    set.n_per_query = adv_texts.size();
    const std::string infix = opts.id_infix == "paradox" ? "prepend" : opts.id_infix;
    for (std::size_t i = 0; i < adv_texts.size(); ++i) {
        if (!text::contains_normalized(adv_texts[i], *q.wrong_answer))
            throw InvalidInputError("adversarial text " + std::to_string(i) + " lacks the wrong answer");
        set.docs.push_back(Document{doc_id_for(q, infix, i), q.question + " " + adv_texts[i], std::nullopt,
                                    Origin::prepend_baseline, opts.source_tag});
    }
    return set;
}

std::vector<std::string> generate_adversarial_texts(const QueryCase& q, const std::string& wrong_answer,
                                                    ChatProvider& provider, const GenerationConfig& cfg,
                                                    std::size_t n, std::size_t max_words,
                                                    const PromptLibrary& prompts) {
    require_temperature(cfg, kGenerationTemperature, "generate_adversarial_texts");
    auto prompt = render(prompts.get(PromptLibrary::kAdversarialText), {{"question", q.question},
                                                                         {"wrong_answer", wrong_answer},
                                                                         {"max_words", std::to_string(max_words)}});
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::optional<std::string> accepted;
        for (std::size_t attempt = 0; attempt <= cfg.max_retries && !accepted; ++attempt) {
            try {
                auto candidate = trimmed(complete(provider, prompt, cfg));
                if (text::contains_normalized(candidate, wrong_answer)) accepted = std::move(candidate);
            } catch (const EmptyOutputError&) {
            }
        }
        if (!accepted)
            throw ValidationExhaustedError("adversarial text " + std::to_string(i) + " for " + q.query_id,
                                           "wrong_answer");
        out.push_back(std::move(*accepted));
    }
    return out;
}

std::string paraphrase_query(QueryCase& q, ChatProvider& provider, const GenerationConfig& cfg,
                             const PromptLibrary& prompts) {
    auto prompt = render(prompts.get(PromptLibrary::kParaphrase), {{"question", q.question}});
    for (std::size_t attempt = 0; attempt <= cfg.max_retries; ++attempt) {
        std::string candidate;
        try {
            candidate = trimmed(complete(provider, prompt, cfg));
        } catch (const EmptyOutputError&) {
            continue;
        }
        if (text::normalize(candidate) != text::normalize(q.question)) {
            q.paraphrase = candidate;
            return candidate;
        }
    }
    throw ValidationExhaustedError("no distinct paraphrase for " + q.query_id, "identical");
}

AttackOutput ParadoxAttack::build(const QueryCase& q, const Retriever& target, std::size_t n) {
    const auto gen_cfg = base_.with_temperature(kGenerationTemperature);
    const auto ana_cfg = base_.with_temperature(kAnalysisTemperature);
    std::string wrong = q.wrong_answer ? *q.wrong_answer : generate_wrong_answer(q, provider_, gen_cfg, prompts_);

    AttackOutput out;
    PreferenceReport report;
    report.query_id = q.query_id;
    if (opts_.use_preference_analysis) {
        auto observed = target.retrieve(q.question, opts_.observed_k);
        auto components = decompose_query(q, provider_, ana_cfg, prompts_);
        if (!observed.ranked.empty())
            report = infer_rationale(q, components, observed, target.store(), provider_, ana_cfg, prompts_);
        else
            report.components = std::move(components);
        out.report = report;
    }
    PoisonDocOptions doc_opts{opts_.source_tag, "paradox"};
    out.poison = generate_poison_docs(q, wrong, report, provider_, gen_cfg, n, prompts_, doc_opts);
    return out;
}

AttackOutput PrependAttack::build(const QueryCase& q, const Retriever& /*target*/, std::size_t n) {
    const auto gen_cfg = base_.with_temperature(kGenerationTemperature);
    QueryCase with_wrong = q;
    if (!with_wrong.wrong_answer) with_wrong.wrong_answer = generate_wrong_answer(q, provider_, gen_cfg, prompts_);
    auto texts = generate_adversarial_texts(with_wrong, *with_wrong.wrong_answer, provider_, gen_cfg, n, max_words_,
                                            prompts_);
    AttackOutput out;
    out.poison = prepend_baseline(with_wrong, texts, PoisonDocOptions{source_tag_, "prepend"});
    return out;
}

}  // namespace ragattack
