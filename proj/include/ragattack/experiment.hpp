#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragattack/attack.hpp"
#include "ragattack/corpus.hpp"
#include "ragattack/embedding.hpp"
#include "ragattack/llm.hpp"
#include "ragattack/rag.hpp"
#include "ragattack/ranker.hpp"
#include "ragattack/report.hpp"
#include "ragattack/retrieval.hpp"

namespace ragattack {

inline constexpr const char* kToolVersion = "0.3.0";

enum class AttackKind { none, paradox, prepend };
std::string_view to_string(AttackKind a);
AttackKind attack_from_string(std::string_view s);

/// One experiment. Loaded from a JSON file with nested sections; relative
/// paths resolve against the file's directory.
struct ExperimentConfig {
    std::filesystem::path corpus;
    std::filesystem::path queries;
    std::filesystem::path output_dir;
    std::filesystem::path poison_dir;
    std::optional<std::filesystem::path> prompts_dir;
    IngestOptions ingest;

    std::string retriever = "bm25";
    Bm25Params bm25;
    DenseBuildOptions dense;
    std::vector<std::size_t> k{5};

    AttackKind attack = AttackKind::paradox;
    std::size_t n_per_query = kDefaultPoisonPerQuery;
    std::size_t observed_k = 5;
    bool use_preference_analysis = true;
    std::size_t max_words = 30;
    std::optional<std::string> source_tag;

    DefenseConfig defense;
    /// Calibrate the gate threshold on clean top-1 scores.
    bool auto_threshold = false;
    double calibration_fraction = 0.2;

    bool include_clean = true;
    bool nes = true;
    bool paraphrase_mode = false;
    std::optional<std::uint64_t> seed;

    GenerationConfig generation;
    double judge_temperature = 0.0;
    std::size_t workers = 4;

    /// role → provider descriptor, e.g. {"kind": "scripted", "fixture": ...}.
    nlohmann::json providers = nlohmann::json::object();
    /// The merged configuration document, overrides applied.
    nlohmann::json document;
};

/// Applies one "a.b.c=value" override. The value is parsed as JSON when it
/// parses, else taken as a string. Throws ConfigError on a malformed entry.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Throws ConfigError for unreadable files, unknown keys or kinds, bad
/// values, missing referenced files, or a sampling run without a seed.
ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});
ExperimentConfig config_from_json(nlohmann::json doc, const std::filesystem::path& base_dir);

/// Hex FNV-1a-64 of the canonical dump of the merged configuration.
std::string config_hash(const ExperimentConfig& cfg);

/// Provider factories. Endpoint credentials come from the environment
/// variable named by "api_key_env" (default RAGATTACK_API_KEY).
std::shared_ptr<ChatProvider> make_chat_provider(const nlohmann::json& desc, const std::string& role);
std::shared_ptr<EmbeddingClient> make_embedder(const nlohmann::json& desc);
std::shared_ptr<ListRanker> make_ranker(const nlohmann::json& desc);

struct ArtifactRecord {
    std::string path;  // relative to the output directory
    std::string hash;
};

struct StageRecord {
    std::string name;
    std::string completed_at;
    std::vector<ArtifactRecord> artifacts;
};

struct RunManifest {
    std::string tool_version = kToolVersion;
    std::string config_hash;
    std::string created_at;
    std::string updated_at;
    std::vector<StageRecord> stages;
    nlohmann::json notes = nlohmann::json::object();

    const StageRecord* stage(const std::string& name) const;
    /// The stage completed and every artifact still hashes as recorded.
    bool stage_valid(const std::string& name, const std::filesystem::path& dir) const;
    void record(const std::string& name, const std::vector<std::string>& paths, const std::filesystem::path& dir);

    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
    /// Loads dir/manifest.json when it exists with the same config hash;
    /// otherwise a fresh manifest for `hash`.
    static RunManifest open(const std::filesystem::path& dir, const std::string& hash);
    void save(const std::filesystem::path& dir) const;
};

std::string file_hash(const std::filesystem::path& p);

/// Exit codes shared by the commands.
enum ExitCode : int { kExitOk = 0, kExitPartial = 1, kExitStage = 2, kExitConfig = 3 };

/// Builds one poison set per query against the clean corpus and writes
/// poison/<query_id>.jsonl plus analysis/<query_id>.json. A failing query
/// is logged and skipped. Returns kExitPartial when any query failed.
int cmd_attack(const ExperimentConfig& cfg, std::ostream& log);

/// load → inject → index → answer (per condition) → judge → report.
/// Completed answer and judge stages whose artifacts validate against the
/// manifest are reused. Throws StageError naming the failing stage.
int cmd_run(const ExperimentConfig& cfg, std::ostream& log);

/// Paired tests B − A on per-query poison counts and correctness for one
/// condition (default: the first attacked condition of each report).
/// Throws InvalidInputError naming query ids present in only one report.
std::vector<NamedStats> cmd_stats(const EvalReport& a, const EvalReport& b,
                                  const std::optional<std::string>& condition = std::nullopt);

EvalReport load_report(const std::filesystem::path& path);

}  // namespace ragattack
