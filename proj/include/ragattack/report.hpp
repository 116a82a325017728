#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragattack/metrics.hpp"
#include "ragattack/stats.hpp"

namespace ragattack {

struct ConditionReport {
    std::string name;
    MetricBlock metrics;
    /// Condition whose accuracy the relative change is measured against.
    std::optional<std::string> baseline;
    std::vector<QueryOutcome> per_query;
};

struct NamedStats {
    std::string name;
    PairedStats stats;
};

struct EvalReport {
    std::vector<ConditionReport> conditions;
    std::vector<NamedStats> stats;

    /// Throws NotFoundError.
    const ConditionReport& condition(const std::string& name) const;
};

/// (value - baseline) / baseline; nullopt when the baseline is 0.
std::optional<double> relative_change(double baseline, double value);

/// Signed whole percent, e.g. "-68%". A change that rounds to zero keeps one
/// decimal ("-0.4%") and an exact zero prints "0%".
std::string format_delta(double baseline, double value);

/// Checks baselines name an existing condition and drops the baseline of a
/// lone condition. Throws InvalidInputError when `conditions` is empty.
EvalReport build_report(std::vector<ConditionReport> conditions, std::vector<NamedStats> stats = {});

nlohmann::json to_json(const EvalReport& r, bool include_per_query = true);
EvalReport report_from_json(const nlohmann::json& j);

/// Fixed-width text table; accuracy, ASR and NDCG in percent. ASR of a
/// clean condition prints as "--". The delta column appears only when some
/// condition has a baseline.
std::string render_table(const EvalReport& r);
std::string render_csv(const EvalReport& r);
/// One line per test: mean difference, SE, 95% CI, p and n.
std::string render_stats(const std::vector<NamedStats>& stats);

}  // namespace ragattack
