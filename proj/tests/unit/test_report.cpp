#include <gtest/gtest.h>

#include "ragattack/errors.hpp"
#include "ragattack/report.hpp"

using namespace ragattack;

namespace {

ConditionReport cond(std::string name, double acc, std::optional<double> asr = std::nullopt,
                     std::optional<std::string> baseline = std::nullopt) {
    ConditionReport c;
    c.name = std::move(name);
    c.metrics.accuracy = acc;
    c.metrics.asr = asr;
    c.metrics.k = 5;
    c.metrics.n_queries = 10;
    c.baseline = std::move(baseline);
    return c;
}

}  // namespace

TEST(Delta, Formatting) {
    EXPECT_EQ(format_delta(0.48, 0.154), "-68%");
    EXPECT_EQ(format_delta(0.5, 0.5), "0%");
    EXPECT_EQ(format_delta(0.5, 0.75), "+50%");
    EXPECT_EQ(format_delta(1.0, 0.996), "-0.4%");
    EXPECT_EQ(format_delta(1.0, 0.9999), "-0.1%");
    EXPECT_EQ(format_delta(0.0, 0.3), "n/a");
    EXPECT_FALSE(relative_change(0.0, 1.0).has_value());
    EXPECT_NEAR(*relative_change(0.48, 0.154), -0.679166, 1e-6);
}

TEST(Report, DeltaColumnOnlyWithBaseline) {
    auto single = build_report({cond("clean@k5", 0.48)});
    EXPECT_EQ(render_table(single).find("delta"), std::string::npos);

    auto both = build_report({cond("clean@k5", 0.48), cond("paradox@k5", 0.154, 0.8, "clean@k5")});
    auto table = render_table(both);
    EXPECT_NE(table.find("delta"), std::string::npos);
    EXPECT_NE(table.find("-68%"), std::string::npos);
    EXPECT_NE(table.find("--"), std::string::npos);  // clean ASR
    auto j = to_json(both);
    EXPECT_EQ(j["conditions"][1]["deltas"]["accuracy"], "-68%");
    EXPECT_TRUE(j["conditions"][0]["metrics"]["asr"].is_null());
}

TEST(Report, LoneConditionDropsBaseline) {
    auto r = build_report({cond("paradox@k5", 0.2, 0.5, "clean@k5")});
    EXPECT_FALSE(r.conditions[0].baseline.has_value());
}

TEST(Report, Errors) {
    EXPECT_THROW(build_report({}), InvalidInputError);
    EXPECT_THROW(build_report({cond("a", 0.1), cond("a", 0.2)}), ConflictError);
    EXPECT_THROW(build_report({cond("a", 0.1), cond("b", 0.2, 0.1, "zzz")}), InvalidInputError);
    auto r = build_report({cond("a", 0.1)});
    EXPECT_THROW(r.condition("nope"), NotFoundError);
}

TEST(Report, JsonRoundTripAndDeterminism) {
    auto c = cond("paradox@k5", 0.2, 0.6, "clean@k5");
    QueryOutcome o;
    o.query_id = "q1";
    o.retrieved = {"q1", {{"d", 1.5}}, 5};
    o.poisoned = o.targeted = {true};
    o.n_poisoned_retrieved = 1;
    o.n_poison_available = 5;
    c.per_query.push_back(o);
    PairedStats s;
    s.mean_diff = -0.4;
    s.n = 10;
    auto r = build_report({cond("clean@k5", 0.6), c}, {{"correct (paradox@k5)", s}});
    auto dumped = to_json(r).dump(2);
    EXPECT_EQ(to_json(report_from_json(to_json(r))).dump(2), dumped);
    EXPECT_EQ(to_json(build_report({cond("clean@k5", 0.6), c}, {{"correct (paradox@k5)", s}})).dump(2), dumped);
    EXPECT_FALSE(to_json(r, false)["conditions"][1].contains("per_query"));
}

TEST(Report, Csv) {
    auto r = build_report({cond("clean@k5", 0.5), cond("paradox@k5", 0.25, 0.5, "clean@k5")});
    auto csv = render_csv(r);
    EXPECT_EQ(csv.substr(0, csv.find('\n')),
              "condition,k,accuracy,accuracy_delta,asr,selection_rate,ndcg_at_k,nes_mean,n_queries,excluded_ndcg,"
              "nes_failures");
    EXPECT_NE(csv.find("\"paradox@k5\",5,0.250000,-0.500000,0.500000"), std::string::npos);
}

TEST(Report, StatsLines) {
    PairedStats s;
    s.mean_diff = 2.0;
    s.std_error = 0.57735;
    s.n = 3;
    auto txt = render_stats({{"sel", s}});
    EXPECT_NE(txt.find("sel: mean_diff 2.0000, se 0.5774"), std::string::npos);
}
