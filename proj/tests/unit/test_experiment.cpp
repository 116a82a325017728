#include <gtest/gtest.h>

#include <sstream>

#include "demo_fixture.hpp"
#include "ragattack/errors.hpp"
#include "ragattack/experiment.hpp"
#include "temp_dir.hpp"

using namespace ragattack;
using nlohmann::json;
using testing_support::read_file;
using testing_support::TempDir;
using testing_support::write_file;

TEST(Config, Overrides) {
    json doc = {{"k", 5}, {"defense", {{"kind", "none"}}}};
    apply_override(doc, "defense.kind=rerank");
    apply_override(doc, "k=[5,10]");
    apply_override(doc, "attack.observed_k=3");
    EXPECT_EQ(doc["defense"]["kind"], "rerank");
    EXPECT_EQ(doc["k"], json::parse("[5,10]"));
    EXPECT_EQ(doc["attack"]["observed_k"], 3);
    EXPECT_THROW(apply_override(doc, "no-equals"), ConfigError);
}

TEST(Config, LoadsWorkspaceAndResolvesPaths) {
    TempDir dir;
    auto path = demo::write_workspace(demo::make_fixture(), dir.path());
    auto cfg = load_config(path, {"k=[5,10]", "defense.kind=confidence", "defense.confidence_threshold=auto"});
    EXPECT_EQ(cfg.corpus, dir.path() / "corpus.jsonl");
    EXPECT_EQ(cfg.output_dir, dir.path() / "out");
    EXPECT_EQ(cfg.k, (std::vector<std::size_t>{5, 10}));
    EXPECT_EQ(cfg.defense.kind, DefenseKind::confidence);
    EXPECT_TRUE(cfg.auto_threshold);
    EXPECT_EQ(cfg.seed, 7u);
}

TEST(Config, RejectsBadInput) {
    TempDir dir;
    auto path = demo::write_workspace(demo::make_fixture(), dir.path());
    EXPECT_THROW(load_config(path, {"bogus=1"}), ConfigError);
    EXPECT_THROW(load_config(path, {"retriever.kind=sparse"}), ConfigError);
    EXPECT_THROW(load_config(path, {"k=0"}), ConfigError);
    EXPECT_THROW(load_config(path, {"corpus=missing.jsonl"}), ConfigError);
    EXPECT_THROW(load_config(path, {"seed=null"}), ConfigError);
    EXPECT_THROW(load_config(dir / "absent.json"), ConfigError);
    write_file(dir / "broken.json", "{ not json");
    EXPECT_THROW(load_config(dir / "broken.json"), ConfigError);
}

TEST(Config, HashChangesIffContentChanges) {
    TempDir dir;
    auto path = demo::write_workspace(demo::make_fixture(), dir.path());
    auto a = config_hash(load_config(path));
    EXPECT_EQ(config_hash(load_config(path)), a);
    EXPECT_EQ(config_hash(load_config(path, {"k=5"})), a);
    EXPECT_NE(config_hash(load_config(path, {"k=10"})), a);
    EXPECT_NE(config_hash(load_config(path, {"attack.n_per_query=4"})), a);
}

TEST(Providers, Factories) {
    EXPECT_EQ(make_embedder({{"kind", "hashing"}, {"dim", 16}})->calls(), 0u);
    EXPECT_EQ(make_ranker({{"kind", "identity"}})->calls(), 0u);
    EXPECT_THROW(make_chat_provider({{"kind", "telepathy"}}, "generator"), ConfigError);
    auto remote = make_chat_provider({{"kind", "remote"}, {"url", "http://127.0.0.1:1"}, {"model", "m"}}, "judge");
    EXPECT_EQ(remote->kind(), "remote");
}

namespace {

struct Workspace {
    TempDir dir;
    std::filesystem::path config;
    explicit Workspace(const std::string& attack = "paradox") {
        config = demo::write_workspace(demo::make_fixture(), dir.path(), attack);
    }
};

}  // namespace

TEST(Commands, AttackWritesTenSetsOfFive) {
    Workspace ws;
    std::ostringstream log;
    auto cfg = load_config(ws.config);
    ASSERT_EQ(cmd_attack(cfg, log), kExitOk) << log.str();
    for (const auto& q : demo::make_fixture().queries) {
        auto path = cfg.poison_dir / (q.query_id + ".jsonl");
        ASSERT_TRUE(std::filesystem::exists(path)) << path;
        auto rows = read_jsonl(path);
        EXPECT_EQ(rows.size(), 5u);
        std::vector<json> js;
        for (auto& [_, r] : rows) js.push_back(r);
        EXPECT_NO_THROW(validate_poison_set(poison_set_from_rows(js), q));
        EXPECT_TRUE(std::filesystem::exists(cfg.output_dir / "analysis" / (q.query_id + ".json")));
    }
}

TEST(Commands, PrependAttackBuildsBaselineSets) {
    Workspace ws("prepend");
    std::ostringstream log;
    auto cfg = load_config(ws.config);
    ASSERT_EQ(cmd_attack(cfg, log), kExitOk) << log.str();
    auto rows = read_jsonl(cfg.poison_dir / "q03.jsonl");
    ASSERT_EQ(rows.size(), 5u);
    EXPECT_EQ(rows[0].second["origin"], "prepend_baseline");
}

TEST(Commands, AttackFailureIsPartial) {
    Workspace ws;
    // Drop the scripted poison exchanges for one query.
    auto lines = read_jsonl(ws.dir / "attacker.jsonl");
    std::vector<json> kept;
    for (auto& [_, r] : lines)
        if (r.dump().find("Target answer (state as fact): Tarsvik") == std::string::npos) kept.push_back(r);
    write_jsonl(ws.dir / "attacker.jsonl", kept);
    std::ostringstream log;
    auto cfg = load_config(ws.config);
    EXPECT_EQ(cmd_attack(cfg, log), kExitPartial);
    EXPECT_FALSE(std::filesystem::exists(cfg.poison_dir / "q01.jsonl"));
    EXPECT_TRUE(std::filesystem::exists(cfg.poison_dir / "q02.jsonl"));
    EXPECT_TRUE(std::filesystem::exists(cfg.output_dir / "attack_failures.json"));
}

TEST(Commands, RunProducesReportAndResumes) {
    Workspace ws;
    std::ostringstream log;
    auto cfg = load_config(ws.config);
    ASSERT_EQ(cmd_attack(cfg, log), kExitOk);
    ASSERT_EQ(cmd_run(cfg, log), kExitOk) << log.str();
    auto report = load_report(cfg.output_dir / "report.json");
    const auto& clean = report.condition("clean@k5");
    const auto& attacked = report.condition("paradox@k5");
    EXPECT_FALSE(clean.metrics.asr.has_value());
    EXPECT_TRUE(attacked.metrics.asr.has_value());
    EXPECT_EQ(attacked.baseline, "clean@k5");
    EXPECT_LT(attacked.metrics.accuracy, clean.metrics.accuracy);
    EXPECT_EQ(attacked.metrics.nes_judged, 10u);
    EXPECT_FALSE(report.stats.empty());
    const auto first = read_file(cfg.output_dir / "report.json");

    std::ostringstream again;
    ASSERT_EQ(cmd_run(cfg, again), kExitOk);
    EXPECT_NE(again.str().find("reus"), std::string::npos) << again.str();
    EXPECT_EQ(read_file(cfg.output_dir / "report.json"), first);
    auto manifest = RunManifest::from_json(json::parse(read_file(cfg.output_dir / "manifest.json")));
    EXPECT_EQ(manifest.config_hash, config_hash(cfg));
    EXPECT_TRUE(manifest.stage_valid("judge", cfg.output_dir));
}

TEST(Commands, TamperedArtifactInvalidatesStage) {
    Workspace ws;
    std::ostringstream log;
    auto cfg = load_config(ws.config);
    ASSERT_EQ(cmd_attack(cfg, log), kExitOk);
    ASSERT_EQ(cmd_run(cfg, log), kExitOk);
    auto manifest = RunManifest::from_json(json::parse(read_file(cfg.output_dir / "manifest.json")));
    const auto* st = manifest.stage("answer:paradox@k5");
    ASSERT_NE(st, nullptr);
    ASSERT_FALSE(st->artifacts.empty());
    write_file(cfg.output_dir / st->artifacts[0].path, "tampered\n");
    EXPECT_FALSE(manifest.stage_valid("answer:paradox@k5", cfg.output_dir));
}

TEST(Commands, CleanOnlyRunHasNoAsr) {
    Workspace ws("none");
    std::ostringstream log;
    auto cfg = load_config(ws.config);
    ASSERT_EQ(cmd_run(cfg, log), kExitOk) << log.str();
    auto report = load_report(cfg.output_dir / "report.json");
    ASSERT_EQ(report.conditions.size(), 1u);
    EXPECT_FALSE(report.conditions[0].metrics.asr.has_value());
    EXPECT_DOUBLE_EQ(report.conditions[0].metrics.accuracy, 1.0);
}

TEST(Commands, KnowledgeExpansionComparison) {
    Workspace ws;
    std::ostringstream log;
    auto cfg = load_config(ws.config, {"k=[5,10]", "retriever.kind=dense"});
    ASSERT_EQ(cmd_attack(cfg, log), kExitOk);
    ASSERT_EQ(cmd_run(cfg, log), kExitOk) << log.str();
    auto report = load_report(cfg.output_dir / "report.json");
    EXPECT_EQ(report.condition("paradox@k10").baseline, "clean@k10");
    EXPECT_EQ(report.condition("paradox@k10").metrics.k, 10u);
    EXPECT_NE(render_table(report).find("paradox@k10"), std::string::npos);
}

TEST(Commands, ParaphraseModeAsksParaphrase) {
    Workspace ws("prepend");
    std::ostringstream log;
    auto cfg = load_config(ws.config, {"evaluation.paraphrase_mode=true"});
    ASSERT_EQ(cmd_attack(cfg, log), kExitOk);
    EXPECT_TRUE(std::filesystem::exists(cfg.output_dir / "paraphrases.jsonl"));
    ASSERT_EQ(cmd_run(cfg, log), kExitOk) << log.str();
    auto report = load_report(cfg.output_dir / "report.json");
    // Prepended documents carry the original wording, so paraphrased
    // questions retrieve fewer of them.
    EXPECT_LT(report.condition("prepend@k5").metrics.selection_rate, 5.0);
}

TEST(Commands, MissingPoisonIsStageErrorWhenAllMissing) {
    Workspace ws;
    std::ostringstream log;
    auto cfg = load_config(ws.config);
    EXPECT_THROW(cmd_run(cfg, log), StageError);
}

TEST(Commands, RerankAndConfidenceDefenses) {
    Workspace ws;
    std::ostringstream log;
    auto base = load_config(ws.config);
    ASSERT_EQ(cmd_attack(base, log), kExitOk);
    auto rr = load_config(ws.config, {"defense.kind=rerank", "output_dir=out-rr", "poison_dir=out/poison"});
    ASSERT_EQ(cmd_run(rr, log), kExitOk) << log.str();
    auto r1 = load_report(rr.output_dir / "report.json");
    EXPECT_EQ(r1.condition("paradox+rerank@k5").metrics.defense_fallbacks, 0u);
    auto cf = load_config(ws.config, {"defense.kind=confidence", "defense.confidence_threshold=auto",
                                      "output_dir=out-cf", "poison_dir=out/poison"});
    ASSERT_EQ(cmd_run(cf, log), kExitOk) << log.str();
    auto r2 = load_report(cf.output_dir / "report.json");
    EXPECT_GT(r2.condition("clean+confidence@k5").metrics.closed_book, 0u);
}

namespace {

EvalReport report_with(const std::string& cond, const std::vector<std::pair<std::string, std::size_t>>& sel) {
    ConditionReport c;
    c.name = cond;
    c.metrics.asr = 0.5;
    for (const auto& [id, n] : sel) {
        QueryOutcome o;
        o.query_id = id;
        o.n_poisoned_retrieved = n;
        o.answered_correctly = n == 0;
        c.per_query.push_back(o);
    }
    return build_report({c});
}

}  // namespace

TEST(Stats, IdenticalReportsZeroDiff) {
    auto r = report_with("paradox@k5", {{"q1", 2}, {"q2", 3}, {"q3", 5}});
    auto s = cmd_stats(r, r);
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s[0].stats.mean_diff, 0.0);
    EXPECT_EQ(s[0].stats.p_value, 1.0);
}

TEST(Stats, PreferenceAnalysisVariantRetrievesMore) {
    auto without = report_with("paradox@k5", {{"q1", 1}, {"q2", 2}, {"q3", 0}, {"q4", 3}});
    auto with = report_with("paradox@k5", {{"q1", 4}, {"q2", 3}, {"q3", 2}, {"q4", 5}});
    auto s = cmd_stats(without, with);
    EXPECT_GT(s[0].stats.mean_diff, 0.0);
    EXPECT_NE(s[0].name.find("poison retrieved"), std::string::npos);
}

TEST(Stats, MismatchedIdsListed) {
    auto a = report_with("paradox@k5", {{"q1", 1}, {"q2", 2}, {"q3", 0}});
    auto b = report_with("paradox@k5", {{"q1", 1}, {"q2", 2}, {"q9", 0}});
    try {
        cmd_stats(a, b);
        FAIL();
    } catch (const InvalidInputError& e) {
        std::string what = e.what();
        EXPECT_NE(what.find("q3"), std::string::npos);
        EXPECT_NE(what.find("q9"), std::string::npos);
    }
}
