#include "ragattack/experiment.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>

#include "ragattack/attack.hpp"
#include "ragattack/concurrency.hpp"
#include "ragattack/errors.hpp"
#include "ragattack/http.hpp"
#include "ragattack/metrics.hpp"
#include "ragattack/text.hpp"

namespace ragattack {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(AttackKind a) {
    switch (a) {
        case AttackKind::none: return "none";
        case AttackKind::paradox: return "paradox";
        case AttackKind::prepend: return "prepend";
    }
    return "none";
}

AttackKind attack_from_string(std::string_view s) {
    if (s == "none") return AttackKind::none;
    if (s == "paradox") return AttackKind::paradox;
    if (s == "prepend") return AttackKind::prepend;
    throw ConfigError("unknown attack: " + std::string(s));
}

// ---------------------------------------------------------------- config

void apply_override(json& doc, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key.path=value: " + assignment);
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        auto dot = key.find('.', start);
        std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("empty key segment in override: " + assignment);
        if (!node->is_object()) throw ConfigError("override path crosses a non-object value: " + key);
        if (dot == std::string::npos) {
            (*node)[part] = std::move(value);
            return;
        }
        node = &(*node)[part];
        if (node->is_null()) *node = json::object();
        start = dot + 1;
    }
}

namespace {

void check_keys(const json& section, std::string_view where, std::initializer_list<std::string_view> allowed) {
    if (!section.is_object()) throw ConfigError(std::string(where) + " must be an object");
    for (const auto& [key, _] : section.items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError("unknown key " + std::string(where) + "." + key);
    }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, std::string_view where) {
    if (!j.contains(key) || j[key].is_null()) return fallback;
    try {
        return j[key].get<T>();
    } catch (const json::exception&) {
        throw ConfigError("bad value for " + std::string(where) + "." + key + ": " + j[key].dump());
    }
}

std::size_t get_count(const json& j, const char* key, std::size_t fallback, std::string_view where) {
    if (!j.contains(key) || j[key].is_null()) return fallback;
    if (!j[key].is_number_integer() || j[key].get<long long>() < 0)
        throw ConfigError(std::string(where) + "." + key + " must be a non-negative integer");
    return j[key].get<std::size_t>();
}

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

json section(const json& doc, const char* key) {
    return doc.contains(key) && !doc[key].is_null() ? doc[key] : json::object();
}

const std::set<std::string> kRoles = {"attacker", "generator", "judge", "embedder", "ranker", "paraphraser"};

json resolve_provider(json desc, const fs::path& base, const std::string& role) {
    if (!desc.is_object() || !desc.contains("kind") || !desc["kind"].is_string())
        throw ConfigError("provider " + role + " needs a string \"kind\"");
    if (desc.contains("fixture")) {
        auto p = resolve(base, desc["fixture"].get<std::string>());
        if (!fs::exists(p)) throw ConfigError("provider " + role + " fixture not found: " + p.string());
        desc["fixture"] = p.string();
    }
    return desc;
}

}  // namespace

ExperimentConfig config_from_json(json doc, const fs::path& base_dir) {
    check_keys(doc, "config",
               {"corpus", "queries", "output_dir", "poison_dir", "prompts_dir", "ingest", "retriever", "k", "attack",
                "defense", "evaluation", "seed", "generation", "workers", "providers"});
    ExperimentConfig c;
    c.document = doc;

    if (!doc.contains("corpus") || !doc.contains("queries")) throw ConfigError("config needs corpus and queries");
    c.corpus = resolve(base_dir, get_or<std::string>(doc, "corpus", "", "config"));
    c.queries = resolve(base_dir, get_or<std::string>(doc, "queries", "", "config"));
    if (!fs::exists(c.corpus)) throw ConfigError("corpus not found: " + c.corpus.string());
    if (!fs::exists(c.queries)) throw ConfigError("queries not found: " + c.queries.string());
    c.output_dir = resolve(base_dir, get_or<std::string>(doc, "output_dir", "out", "config"));
    c.poison_dir = doc.contains("poison_dir") ? resolve(base_dir, get_or<std::string>(doc, "poison_dir", "", "config"))
                                              : c.output_dir / "poison";
    if (doc.contains("prompts_dir")) {
        c.prompts_dir = resolve(base_dir, get_or<std::string>(doc, "prompts_dir", "", "config"));
        if (!fs::is_directory(*c.prompts_dir)) throw ConfigError("prompts_dir not found: " + c.prompts_dir->string());
    }

    auto ingest = section(doc, "ingest");
    check_keys(ingest, "ingest", {"chunk_tokens", "chunk_overlap"});
    c.ingest.chunk_tokens = get_count(ingest, "chunk_tokens", 0, "ingest");
    c.ingest.chunk_overlap = get_count(ingest, "chunk_overlap", 0, "ingest");
    if (c.ingest.chunk_tokens && c.ingest.chunk_overlap >= c.ingest.chunk_tokens)
        throw ConfigError("ingest.chunk_overlap must be smaller than chunk_tokens");

    auto ret = section(doc, "retriever");
    check_keys(ret, "retriever", {"kind", "k1", "b", "batch_size", "max_in_flight"});
    c.retriever = get_or<std::string>(ret, "kind", "bm25", "retriever");
    if (c.retriever != "bm25" && c.retriever != "dense") throw ConfigError("unknown retriever: " + c.retriever);
    c.bm25.k1 = get_or<double>(ret, "k1", 2.0, "retriever");
    c.bm25.b = get_or<double>(ret, "b", 0.75, "retriever");
    if (c.bm25.k1 <= 0 || c.bm25.b < 0 || c.bm25.b > 1) throw ConfigError("retriever.k1/b out of range");
    c.dense.batch_size = get_count(ret, "batch_size", 32, "retriever");
    c.dense.max_in_flight = get_count(ret, "max_in_flight", 4, "retriever");

    if (doc.contains("k")) {
        c.k.clear();
        const auto& kj = doc["k"];
        if (kj.is_array()) {
            for (const auto& v : kj) {
                if (!v.is_number_integer() || v.get<long long>() < 1) throw ConfigError("k entries must be >= 1");
                c.k.push_back(v.get<std::size_t>());
            }
        } else if (kj.is_number_integer() && kj.get<long long>() >= 1) {
            c.k.push_back(kj.get<std::size_t>());
        } else {
            throw ConfigError("k must be a positive integer or a list of them");
        }
        if (c.k.empty()) throw ConfigError("k list is empty");
    }

    auto atk = section(doc, "attack");
    check_keys(atk, "attack", {"kind", "n_per_query", "observed_k", "use_preference_analysis", "max_words", "source_tag"});
    c.attack = attack_from_string(get_or<std::string>(atk, "kind", "paradox", "attack"));
    c.n_per_query = get_count(atk, "n_per_query", kDefaultPoisonPerQuery, "attack");
    if (c.n_per_query == 0) throw ConfigError("attack.n_per_query must be >= 1");
    c.observed_k = get_count(atk, "observed_k", 5, "attack");
    c.use_preference_analysis = get_or<bool>(atk, "use_preference_analysis", true, "attack");
    c.max_words = get_count(atk, "max_words", 30, "attack");
    if (atk.contains("source_tag")) c.source_tag = get_or<std::string>(atk, "source_tag", "", "attack");

    auto def = section(doc, "defense");
    check_keys(def, "defense", {"kind", "rerank_pool", "rerank_out", "list_size", "confidence_threshold",
                                "calibration_fraction", "overlap_tau"});
    c.defense.kind = defense_from_string(get_or<std::string>(def, "kind", "none", "defense"));
    c.defense.rerank_pool = get_count(def, "rerank_pool", 50, "defense");
    c.defense.rerank_out = get_count(def, "rerank_out", 5, "defense");
    c.defense.list_size = get_count(def, "list_size", 5, "defense");
    if (def.contains("confidence_threshold") && def["confidence_threshold"].is_string()) {
        if (def["confidence_threshold"] != "auto") throw ConfigError("defense.confidence_threshold: number or \"auto\"");
        c.auto_threshold = true;
    } else {
        c.defense.confidence_threshold = get_or<double>(def, "confidence_threshold", 0.0, "defense");
    }
    c.calibration_fraction = get_or<double>(def, "calibration_fraction", 0.2, "defense");
    c.defense.overlap_tau = get_or<double>(def, "overlap_tau", 0.3, "defense");
    try {
        c.defense.validate();
    } catch (const InvalidInputError& e) {
        throw ConfigError(std::string("defense: ") + e.what());
    }

    auto ev = section(doc, "evaluation");
    check_keys(ev, "evaluation", {"include_clean", "nes", "paraphrase_mode"});
    c.include_clean = get_or<bool>(ev, "include_clean", true, "evaluation");
    c.nes = get_or<bool>(ev, "nes", true, "evaluation");
    c.paraphrase_mode = get_or<bool>(ev, "paraphrase_mode", false, "evaluation");
    if (c.attack == AttackKind::none && !c.include_clean)
        throw ConfigError("nothing to evaluate: attack is none and include_clean is false");

    if (doc.contains("seed") && !doc["seed"].is_null()) {
        if (!doc["seed"].is_number_integer()) throw ConfigError("seed must be an integer");
        c.seed = doc["seed"].get<std::uint64_t>();
    }
    if (c.nes && c.attack != AttackKind::none && !c.seed)
        throw ConfigError("a seed is required: naturalness judging samples one document per query");

    auto gen = section(doc, "generation");
    check_keys(gen, "generation", {"max_retries", "backoff_ms", "max_output_tokens", "judge_temperature"});
    c.generation.max_retries = get_count(gen, "max_retries", 5, "generation");
    c.generation.backoff = std::chrono::milliseconds(get_count(gen, "backoff_ms", 200, "generation"));
    c.generation.max_output_tokens = get_count(gen, "max_output_tokens", 512, "generation");
    if (c.seed) c.generation.seed = static_cast<std::int64_t>(*c.seed);
    c.judge_temperature = get_or<double>(gen, "judge_temperature", 0.0, "generation");

    c.workers = std::max<std::size_t>(1, get_count(doc, "workers", 4, "config"));

    auto prov = section(doc, "providers");
    if (!prov.is_object()) throw ConfigError("providers must be an object");
    for (const auto& [role, desc] : prov.items()) {
        if (!kRoles.count(role)) throw ConfigError("unknown provider role: " + role);
        c.providers[role] = resolve_provider(desc, base_dir, role);
    }
    return c;
}

ExperimentConfig load_config(const fs::path& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    json doc = json::parse(in, nullptr, false, true);
    if (doc.is_discarded()) throw ConfigError("config is not valid JSON: " + path.string());
    for (const auto& o : overrides) apply_override(doc, o);
    return config_from_json(std::move(doc), fs::absolute(path).parent_path());
}

std::string config_hash(const ExperimentConfig& cfg) { return text::hex64(text::fnv1a64(cfg.document.dump())); }

// ---------------------------------------------------------------- providers

namespace {

EndpointConfig endpoint_from(const json& desc, const std::string& role) {
    EndpointConfig ep;
    if (!desc.contains("url")) throw ConfigError("provider " + role + " needs a url");
    ep.url = desc["url"].get<std::string>();
    ep.model = desc.value("model", std::string{});
    const auto env = desc.value("api_key_env", std::string("RAGATTACK_API_KEY"));
    if (const char* key = std::getenv(env.c_str())) ep.api_key = key;
    ep.timeout = std::chrono::seconds(desc.value("timeout_s", 60));
    return ep;
}

std::string fixture_of(const json& desc, const std::string& role) {
    if (!desc.contains("fixture")) throw ConfigError("scripted provider " + role + " needs a fixture");
    return desc["fixture"].get<std::string>();
}

}  // namespace

std::shared_ptr<ChatProvider> make_chat_provider(const json& desc, const std::string& role) {
    const auto kind = desc.value("kind", std::string{});
    if (kind == "scripted") return ScriptedProvider::from_jsonl(fixture_of(desc, role));
    if (kind == "remote") {
        auto inner = std::make_shared<RemoteChatProvider>(endpoint_from(desc, role));
        return std::make_shared<InFlightLimitedProvider>(inner, desc.value("max_in_flight", 4));
    }
    throw ConfigError("unknown chat provider kind for " + role + ": " + kind);
}

std::shared_ptr<EmbeddingClient> make_embedder(const json& desc) {
    const auto kind = desc.value("kind", std::string{});
    if (kind == "scripted") return ScriptedEmbedder::from_jsonl(fixture_of(desc, "embedder"));
    if (kind == "hashing") return std::make_shared<HashingEmbedder>(desc.value("dim", std::size_t{256}));
    if (kind == "http") return std::make_shared<HttpEmbeddingClient>(endpoint_from(desc, "embedder"));
    throw ConfigError("unknown embedder kind: " + kind);
}

std::shared_ptr<ListRanker> make_ranker(const json& desc) {
    const auto kind = desc.value("kind", std::string{});
    if (kind == "identity") return std::make_shared<IdentityRanker>();
    if (kind == "pinned") return std::make_shared<PinnedRanker>(desc.value("ids", std::vector<std::string>{}));
    if (kind == "http") return std::make_shared<HttpListRanker>(endpoint_from(desc, "ranker"));
    throw ConfigError("unknown ranker kind: " + kind);
}

namespace {

const json& provider_desc(const ExperimentConfig& cfg, const std::string& role) {
    if (!cfg.providers.contains(role)) throw ConfigError("no provider configured for role " + role);
    return cfg.providers[role];
}

}  // namespace

// ---------------------------------------------------------------- manifest

std::string file_hash(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw NotFoundError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return text::hex64(text::fnv1a64(ss.str()));
}

namespace {

std::string now_utc() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_text(const fs::path& p, const std::string& body) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + p.string());
    out << body;
}

}  // namespace

const StageRecord* RunManifest::stage(const std::string& name) const {
    for (const auto& s : stages)
        if (s.name == name) return &s;
    return nullptr;
}

bool RunManifest::stage_valid(const std::string& name, const fs::path& dir) const {
    const auto* s = stage(name);
    if (!s) return false;
    for (const auto& a : s->artifacts) {
        if (!fs::exists(dir / a.path)) return false;
        if (file_hash(dir / a.path) != a.hash) return false;
    }
    return true;
}

void RunManifest::record(const std::string& name, const std::vector<std::string>& paths, const fs::path& dir) {
    StageRecord rec{name, now_utc(), {}};
    for (const auto& p : paths) rec.artifacts.push_back({p, file_hash(dir / p)});
    for (auto& s : stages) {
        if (s.name == name) {
            s = std::move(rec);
            updated_at = s.completed_at;
            return;
        }
    }
    updated_at = rec.completed_at;
    stages.push_back(std::move(rec));
}

json RunManifest::to_json() const {
    json st = json::array();
    for (const auto& s : stages) {
        json arts = json::array();
        for (const auto& a : s.artifacts) arts.push_back({{"path", a.path}, {"hash", a.hash}});
        st.push_back({{"name", s.name}, {"completed_at", s.completed_at}, {"artifacts", std::move(arts)}});
    }
    return {{"tool_version", tool_version}, {"config_hash", config_hash}, {"created_at", created_at},
            {"updated_at", updated_at},     {"stages", std::move(st)},    {"notes", notes}};
}

RunManifest RunManifest::from_json(const json& j) {
    try {
        RunManifest m;
        m.tool_version = j.at("tool_version").get<std::string>();
        m.config_hash = j.at("config_hash").get<std::string>();
        m.created_at = j.value("created_at", std::string{});
        m.updated_at = j.value("updated_at", std::string{});
        m.notes = j.value("notes", json::object());
        for (const auto& s : j.at("stages")) {
            StageRecord rec{s.at("name").get<std::string>(), s.value("completed_at", std::string{}), {}};
            for (const auto& a : s.at("artifacts"))
                rec.artifacts.push_back({a.at("path").get<std::string>(), a.at("hash").get<std::string>()});
            m.stages.push_back(std::move(rec));
        }
        return m;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed manifest: ") + e.what());
    }
}

RunManifest RunManifest::open(const fs::path& dir, const std::string& hash) {
    const auto path = dir / "manifest.json";
    if (fs::exists(path)) {
        std::ifstream in(path);
        auto j = json::parse(in, nullptr, false);
        if (!j.is_discarded()) {
            try {
                auto m = from_json(j);
                if (m.config_hash == hash && m.tool_version == kToolVersion) return m;
            } catch (const SchemaError&) {
            }
        }
    }
    RunManifest m;
    m.config_hash = hash;
    m.created_at = m.updated_at = now_utc();
    return m;
}

void RunManifest::save(const fs::path& dir) const { write_text(dir / "manifest.json", to_json().dump(2) + "\n"); }

// ---------------------------------------------------------------- shared run pieces

namespace {

PromptLibrary load_prompts(const ExperimentConfig& cfg) {
    return cfg.prompts_dir ? PromptLibrary::with_overrides(*cfg.prompts_dir) : PromptLibrary::builtin();
}

std::unique_ptr<Retriever> build_retriever(const ExperimentConfig& cfg, const CorpusStore& store) {
    if (cfg.retriever == "dense") {
        auto embedder = make_embedder(provider_desc(cfg, "embedder"));
        return std::make_unique<DenseIndex<float>>(build_dense_index<float>(store, std::move(embedder), cfg.dense));
    }
    return std::make_unique<Bm25Index>(build_bm25_index(store, cfg.bm25));
}

fs::path poison_file(const ExperimentConfig& cfg, const std::string& qid) { return cfg.poison_dir / (qid + ".jsonl"); }

void check_query_id(const std::string& qid) {
    if (qid.empty() || qid.find_first_of("/\\") != std::string::npos || qid == "." || qid == "..")
        throw InvalidInputError("query id unusable as a file name: " + qid);
}

template <class F>
auto run_stage(const std::string& name, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

}  // namespace

// ---------------------------------------------------------------- attack

int cmd_attack(const ExperimentConfig& cfg, std::ostream& log) {
    if (cfg.attack == AttackKind::none) throw ConfigError("attack.kind is none; nothing to generate");
    auto attacker = make_chat_provider(provider_desc(cfg, "attacker"), "attacker");
    std::shared_ptr<ChatProvider> paraphraser;
    if (cfg.paraphrase_mode)
        paraphraser = cfg.providers.contains("paraphraser") ? make_chat_provider(cfg.providers["paraphraser"], "paraphraser")
                                                            : attacker;
    const auto prompts = load_prompts(cfg);

    auto store = run_stage("load", [&] { return ingest_corpus(cfg.corpus, CorpusFormat::jsonl, cfg.ingest); });
    auto queries = run_stage("load", [&] { return load_queries(cfg.queries); });
    auto target = run_stage("index", [&] { return build_retriever(cfg, store); });

    std::unique_ptr<AttackStrategy> strategy;
    if (cfg.attack == AttackKind::paradox) {
        strategy = std::make_unique<ParadoxAttack>(
            *attacker, cfg.generation, ParadoxOptions{cfg.observed_k, cfg.use_preference_analysis, cfg.source_tag},
            prompts);
    } else {
        strategy = std::make_unique<PrependAttack>(*attacker, cfg.generation, cfg.max_words, cfg.source_tag, prompts);
    }

    fs::create_directories(cfg.poison_dir);
    fs::create_directories(cfg.output_dir / "analysis");
    std::vector<std::string> errors(queries.size());
    std::vector<std::size_t> n_docs(queries.size(), 0);
    std::vector<std::optional<std::string>> paraphrases(queries.size());

    parallel_for(queries.size(), cfg.workers, [&](std::size_t i) {
        const auto& q = queries[i];
        try {
            check_query_id(q.query_id);
            auto out = strategy->build(q, *target, cfg.n_per_query);
            validate_poison_set(out.poison, q);
            auto rows = poison_set_rows(out.poison);
            write_jsonl(poison_file(cfg, q.query_id), rows);
            if (out.report)
                write_text(cfg.output_dir / "analysis" / (q.query_id + ".json"), to_json(*out.report).dump(2) + "\n");
            n_docs[i] = out.poison.docs.size();
            if (paraphraser) {
                QueryCase copy = q;
                paraphrases[i] = paraphrase_query(copy, *paraphraser,
                                                  cfg.generation.with_temperature(kGenerationTemperature), prompts);
            }
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });

    std::size_t failed = 0, total_docs = 0;
    json failures = json::array();
    for (std::size_t i = 0; i < queries.size(); ++i) {
        total_docs += n_docs[i];
        if (!errors[i].empty()) {
            ++failed;
            failures.push_back({{"query_id", queries[i].query_id}, {"error", errors[i]}});
            log << "attack: " << queries[i].query_id << " failed: " << errors[i] << "\n";
        }
    }
    write_text(cfg.output_dir / "attack_failures.json", failures.dump(2) + "\n");
    if (cfg.paraphrase_mode) {
        std::vector<json> rows;
        for (std::size_t i = 0; i < queries.size(); ++i)
            if (paraphrases[i]) rows.push_back({{"query_id", queries[i].query_id}, {"paraphrase", *paraphrases[i]}});
        write_jsonl(cfg.output_dir / "paraphrases.jsonl", rows);
    }
    log << "attack: " << strategy->name() << ", " << queries.size() << " queries, " << (queries.size() - failed)
        << " poison sets, " << total_docs << " documents, " << failed << " failed\n";
    return failed ? kExitPartial : kExitOk;
}

// ---------------------------------------------------------------- run

namespace {

struct Condition {
    std::string name;
    bool attacked = false;
    std::size_t k = 0;
    std::optional<std::string> baseline;
};

std::string condition_name(const ExperimentConfig& cfg, bool attacked, std::size_t k) {
    std::string name = attacked ? std::string(to_string(cfg.attack)) : "clean";
    if (cfg.defense.kind != DefenseKind::none) name += "+" + std::string(to_string(cfg.defense.kind));
    return name + "@k" + std::to_string(k);
}

json answer_row(const RagAnswer& a, const QueryOutcome& o) {
    return {{"query_id", a.query_id},   {"response", a.response_text},       {"used_docs", a.used_docs},
            {"defense_error", a.defense_error}, {"outcome", to_json(o)}};
}

}  // namespace

int cmd_run(const ExperimentConfig& cfg, std::ostream& log) {
    const auto out_dir = cfg.output_dir;
    fs::create_directories(out_dir);
    auto manifest = RunManifest::open(out_dir, config_hash(cfg));
    const auto prompts = load_prompts(cfg);
    bool partial = false;

    // load
    auto clean = run_stage("load", [&] {
        auto s = std::make_unique<CorpusStore>(ingest_corpus(cfg.corpus, CorpusFormat::jsonl, cfg.ingest));
        if (s->stats().n_poisoned) throw InvalidInputError("the clean corpus already contains poisoned documents");
        return s;
    });
    auto queries = run_stage("load", [&] {
        auto qs = load_queries(cfg.queries);
        if (qs.empty()) throw InvalidInputError("no queries");
        if (cfg.paraphrase_mode) {
            std::map<std::string, std::string> para;
            for (const auto& [line, row] : read_jsonl(out_dir / "paraphrases.jsonl"))
                para[row.at("query_id").get<std::string>()] = row.at("paraphrase").get<std::string>();
            for (auto& q : qs) {
                auto it = para.find(q.query_id);
                if (it == para.end()) throw NotFoundError("no paraphrase for query " + q.query_id);
                q.paraphrase = it->second;
            }
        }
        return qs;
    });
    log << "load: " << clean->size() << " passages, " << queries.size() << " queries\n";
    manifest.record("load", {}, out_dir);

    // inject
    std::map<std::string, std::vector<Document>> poison_by_query;
    std::unique_ptr<CorpusStore> poisoned;
    if (cfg.attack != AttackKind::none) {
        poisoned = run_stage("inject", [&] {
            std::vector<Document> all;
            std::vector<std::string> missing;
            for (const auto& q : queries) {
                const auto path = poison_file(cfg, q.query_id);
                if (!fs::exists(path)) {
                    missing.push_back(q.query_id);
                    continue;
                }
                std::vector<json> rows;
                for (auto& [line, row] : read_jsonl(path)) rows.push_back(std::move(row));
                auto set = poison_set_from_rows(rows);
                if (set.query_id != q.query_id)
                    throw InvalidInputError(path.string() + " holds poison for " + set.query_id);
                set.n_per_query = set.docs.size();
                validate_poison_set(set, q);
                for (const auto& d : set.docs) all.push_back(d);
                poison_by_query[q.query_id] = std::move(set.docs);
            }
            if (missing.size() == queries.size()) throw NotFoundError("no poison sets in " + cfg.poison_dir.string());
            for (const auto& id : missing) log << "inject: no poison set for " << id << "\n";
            partial = partial || !missing.empty();
            auto s = std::make_unique<CorpusStore>(*clean);
            auto st = s->inject_poison(all);
            log << "inject: " << st.n_poisoned << " poisoned passages (" << st.poison_proportion * 100.0
                << "% of corpus)\n";
            return s;
        });
        manifest.record("inject", {}, out_dir);
    }

    // index
    std::unique_ptr<Retriever> clean_index, poisoned_index;
    run_stage("index", [&] {
        if (cfg.include_clean || cfg.auto_threshold) clean_index = build_retriever(cfg, *clean);
        if (poisoned) poisoned_index = build_retriever(cfg, *poisoned);
    });
    manifest.record("index", {}, out_dir);

    DefenseConfig defense = cfg.defense;
    if (defense.kind == DefenseKind::confidence && cfg.auto_threshold) {
        run_stage("defend", [&] {
            std::vector<double> top1;
            for (const auto& q : queries) {
                auto r = clean_index->retrieve(asked_text(q, cfg.paraphrase_mode), 1);
                top1.push_back(r.ranked.empty() ? 0.0 : r.ranked.front().score);
            }
            defense.confidence_threshold = calibrate_confidence_threshold(top1, cfg.calibration_fraction);
        });
        manifest.notes["confidence_threshold"] = defense.confidence_threshold;
        manifest.record("defend", {}, out_dir);
        log << "defend: calibrated confidence threshold " << defense.confidence_threshold << "\n";
    }
    std::shared_ptr<ListRanker> ranker;
    if (defense.kind == DefenseKind::rerank) ranker = make_ranker(provider_desc(cfg, "ranker"));
    std::shared_ptr<ChatProvider> generator;

    std::vector<Condition> conditions;
    for (auto k : cfg.k) {
        if (cfg.include_clean) conditions.push_back({condition_name(cfg, false, k), false, k, std::nullopt});
        if (cfg.attack != AttackKind::none) {
            std::optional<std::string> base;
            if (cfg.include_clean) base = condition_name(cfg, false, k);
            conditions.push_back({condition_name(cfg, true, k), true, k, base});
        }
    }

    // answer
    std::map<std::string, std::vector<QueryOutcome>> outcomes;
    for (const auto& cond : conditions) {
        const std::string stage_name = "answer:" + cond.name;
        const std::string rel = "answers/" + cond.name + ".jsonl";
        if (manifest.stage_valid(stage_name, out_dir)) {
            run_stage(stage_name, [&] {
                auto& list = outcomes[cond.name];
                for (const auto& [line, row] : read_jsonl(out_dir / rel)) list.push_back(outcome_from_json(row.at("outcome")));
                if (list.size() != queries.size()) throw SchemaError(rel + " does not cover every query");
            });
            log << "answer: " << cond.name << " reused\n";
            continue;
        }
        if (!generator) generator = make_chat_provider(provider_desc(cfg, "generator"), "generator");
        run_stage(stage_name, [&] {
            const Retriever& index = cond.attacked ? *poisoned_index : *clean_index;
            AnswerOptions opts;
            opts.use_paraphrase = cfg.paraphrase_mode;
            opts.generation = cfg.generation.with_temperature(kAnswerTemperature);
            opts.prompts = &prompts;
            std::vector<RagAnswer> answers(queries.size());
            std::vector<QueryOutcome> list(queries.size());
            parallel_for(queries.size(), cfg.workers, [&](std::size_t i) {
                const auto& q = queries[i];
                answers[i] = answer_query(q, index, *generator, cond.k, defense, ranker.get(), opts);
                std::vector<std::string> own;
                if (cond.attacked)
                    if (auto it = poison_by_query.find(q.query_id); it != poison_by_query.end())
                        for (const auto& d : it->second) own.push_back(d.doc_id);
                list[i] = make_outcome(q.query_id, answers[i].retrieved, index.store(),
                                       extract_answer(answers[i].response_text, q), own);
                list[i].closed_book = answers[i].closed_book;
                list[i].defense_fallback = answers[i].defense_fallback;
            });
            std::vector<json> rows;
            for (std::size_t i = 0; i < queries.size(); ++i) rows.push_back(answer_row(answers[i], list[i]));
            fs::create_directories(out_dir / "answers");
            write_jsonl(out_dir / rel, rows);
            manifest.record(stage_name, {rel}, out_dir);
            manifest.save(out_dir);
            outcomes[cond.name] = std::move(list);
        });
        log << "answer: " << cond.name << " done\n";
    }

    // judge
    std::map<std::string, std::optional<NesSample>> nes;
    std::set<std::string> nes_failed;
    if (cfg.attack != AttackKind::none && cfg.nes) {
        const std::string rel = "nes.jsonl";
        if (manifest.stage_valid("judge", out_dir)) {
            run_stage("judge", [&] {
                for (const auto& [line, row] : read_jsonl(out_dir / rel)) {
                    auto qid = row.at("query_id").get<std::string>();
                    if (row.contains("score"))
                        nes[qid] = NesSample{row.at("doc_id").get<std::string>(), row.at("score").get<int>()};
                    else
                        nes_failed.insert(qid);
                }
            });
            log << "judge: reused\n";
        } else {
            auto judge = make_chat_provider(provider_desc(cfg, "judge"), "judge");
            run_stage("judge", [&] {
                const auto judge_cfg = cfg.generation.with_temperature(cfg.judge_temperature);
                std::vector<json> rows(queries.size());
                std::vector<std::optional<NesSample>> samples(queries.size());
                parallel_for(queries.size(), cfg.workers, [&](std::size_t i) {
                    const auto& q = queries[i];
                    auto it = poison_by_query.find(q.query_id);
                    if (it == poison_by_query.end()) {
                        rows[i] = {{"query_id", q.query_id}, {"error", "no poison set"}};
                        return;
                    }
                    try {
                        samples[i] = judge_nes(it->second, q, *judge, *cfg.seed, judge_cfg, prompts);
                        rows[i] = {{"query_id", q.query_id}, {"doc_id", samples[i]->doc_id}, {"score", samples[i]->score}};
                    } catch (const JudgingError& e) {
                        rows[i] = {{"query_id", q.query_id}, {"error", e.what()}};
                    }
                });
                for (std::size_t i = 0; i < queries.size(); ++i) {
                    if (samples[i])
                        nes[queries[i].query_id] = samples[i];
                    else
                        nes_failed.insert(queries[i].query_id);
                }
                write_jsonl(out_dir / rel, rows);
                manifest.record("judge", {rel}, out_dir);
                manifest.save(out_dir);
            });
            log << "judge: " << nes.size() << " judged, " << nes_failed.size() << " failed\n";
        }
        for (const auto& qid : nes_failed)
            if (poison_by_query.count(qid)) partial = true;
    }

    // evaluate
    std::vector<ConditionReport> blocks;
    std::vector<NamedStats> stats;
    run_stage("evaluate", [&] {
        for (const auto& cond : conditions) {
            auto& list = outcomes[cond.name];
            if (cond.attacked) {
                for (auto& o : list) {
                    if (auto it = nes.find(o.query_id); it != nes.end()) o.nes_sample = it->second;
                    o.nes_failed = nes_failed.count(o.query_id) && poison_by_query.count(o.query_id);
                }
            }
            blocks.push_back({cond.name, aggregate(list, cond.k, cond.attacked), cond.baseline, list});
            if (cond.baseline) {
                const auto& before_list = outcomes[*cond.baseline];
                std::vector<double> before, after;
                for (std::size_t i = 0; i < list.size(); ++i) {
                    before.push_back(before_list[i].answered_correctly ? 1.0 : 0.0);
                    after.push_back(list[i].answered_correctly ? 1.0 : 0.0);
                }
                if (list.size() >= 2)
                    stats.push_back({"accuracy " + *cond.baseline + " -> " + cond.name, paired_ttest(before, after)});
            }
        }
    });
    manifest.record("evaluate", {}, out_dir);

    // report
    run_stage("report", [&] {
        auto report = build_report(std::move(blocks), std::move(stats));
        write_text(out_dir / "report.json", to_json(report).dump(2) + "\n");
        write_text(out_dir / "report.txt", render_table(report));
        write_text(out_dir / "report.csv", render_csv(report));
        manifest.record("report", {"report.json", "report.txt", "report.csv"}, out_dir);
        manifest.save(out_dir);
        log << render_table(report);
    });
    return partial ? kExitPartial : kExitOk;
}

// ---------------------------------------------------------------- stats / report

EvalReport load_report(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot read report " + path.string());
    auto j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw SchemaError("report is not valid JSON: " + path.string());
    return report_from_json(j);
}

namespace {

const ConditionReport& pick_condition(const EvalReport& r, const std::optional<std::string>& name) {
    if (r.conditions.empty()) throw InvalidInputError("report has no conditions");
    if (name) return r.condition(*name);
    for (const auto& c : r.conditions)
        if (c.metrics.asr) return c;
    return r.conditions.front();
}

}  // namespace

std::vector<NamedStats> cmd_stats(const EvalReport& a, const EvalReport& b, const std::optional<std::string>& condition) {
    const auto& ca = pick_condition(a, condition);
    const auto& cb = pick_condition(b, condition);
    std::map<std::string, const QueryOutcome*> in_a, in_b;
    for (const auto& o : ca.per_query) in_a[o.query_id] = &o;
    for (const auto& o : cb.per_query) in_b[o.query_id] = &o;
    std::vector<std::string> only;
    for (const auto& [id, _] : in_a)
        if (!in_b.count(id)) only.push_back(id);
    for (const auto& [id, _] : in_b)
        if (!in_a.count(id)) only.push_back(id);
    if (!only.empty()) {
        std::string ids;
        for (const auto& id : only) ids += (ids.empty() ? "" : ", ") + id;
        throw InvalidInputError("reports cover different queries; unmatched ids: " + ids);
    }
    if (in_a.size() < 2) throw InvalidInputError("need per-query outcomes for at least 2 queries");

    std::vector<double> sel_a, sel_b, cor_a, cor_b;
    for (const auto& [id, oa] : in_a) {
        const auto* ob = in_b.at(id);
        sel_a.push_back(static_cast<double>(oa->n_poisoned_retrieved));
        sel_b.push_back(static_cast<double>(ob->n_poisoned_retrieved));
        cor_a.push_back(oa->answered_correctly ? 1.0 : 0.0);
        cor_b.push_back(ob->answered_correctly ? 1.0 : 0.0);
    }
    const std::string label = ca.name == cb.name ? ca.name : ca.name + " vs " + cb.name;
    return {{"poison retrieved (" + label + ")", paired_ttest(sel_a, sel_b)},
            {"correct (" + label + ")", paired_ttest(cor_a, cor_b)}};
}

}  // namespace ragattack
