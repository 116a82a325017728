#include "ragattack/report.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "ragattack/errors.hpp"

namespace ragattack {

using nlohmann::json;

const ConditionReport& EvalReport::condition(const std::string& name) const {
    for (const auto& c : conditions)
        if (c.name == name) return c;
    throw NotFoundError("no condition named " + name);
}

std::optional<double> relative_change(double baseline, double value) {
    if (baseline == 0.0) return std::nullopt;
    return (value - baseline) / baseline;
}

std::string format_delta(double baseline, double value) {
    auto rel = relative_change(baseline, value);
    if (!rel) return "n/a";
    const double pct = *rel * 100.0;
    char buf[32];
    if (pct == 0.0) return "0%";
    if (std::lround(pct) != 0) {
        std::snprintf(buf, sizeof buf, "%+ld%%", std::lround(pct));
    } else {
        double tenth = std::round(pct * 10.0) / 10.0;
        if (tenth == 0.0) tenth = std::copysign(0.1, pct);
        std::snprintf(buf, sizeof buf, "%+.1f%%", tenth);
    }
    return buf;
}

EvalReport build_report(std::vector<ConditionReport> conditions, std::vector<NamedStats> stats) {
    if (conditions.empty()) throw InvalidInputError("a report needs at least one condition");
    std::set<std::string> names;
    for (const auto& c : conditions)
        if (!names.insert(c.name).second) throw ConflictError("duplicate condition name " + c.name);
    for (auto& c : conditions) {
        if (conditions.size() == 1 || (c.baseline && *c.baseline == c.name)) c.baseline.reset();
        if (c.baseline && !names.count(*c.baseline))
            throw InvalidInputError("condition " + c.name + " names unknown baseline " + *c.baseline);
    }
    return EvalReport{std::move(conditions), std::move(stats)};
}

json to_json(const EvalReport& r, bool include_per_query) {
    json conds = json::array();
    for (const auto& c : r.conditions) {
        json deltas = json::object();
        if (c.baseline) {
            const double base = r.condition(*c.baseline).metrics.accuracy;
            auto rel = relative_change(base, c.metrics.accuracy);
            deltas["baseline"] = *c.baseline;
            deltas["accuracy_relative"] = rel ? json(*rel) : json(nullptr);
            deltas["accuracy"] = format_delta(base, c.metrics.accuracy);
        }
        json cj = {{"name", c.name}, {"metrics", to_json(c.metrics)}, {"deltas", std::move(deltas)}};
        if (include_per_query) {
            json rows = json::array();
            for (const auto& o : c.per_query) rows.push_back(to_json(o));
            cj["per_query"] = std::move(rows);
        }
        conds.push_back(std::move(cj));
    }
    json stats = json::array();
    for (const auto& s : r.stats) {
        auto sj = to_json(s.stats);
        sj["name"] = s.name;
        stats.push_back(std::move(sj));
    }
    return {{"conditions", std::move(conds)}, {"stats", std::move(stats)}};
}

EvalReport report_from_json(const json& j) {
    try {
        EvalReport r;
        for (const auto& cj : j.at("conditions")) {
            ConditionReport c;
            c.name = cj.at("name").get<std::string>();
            c.metrics = metric_block_from_json(cj.at("metrics"));
            if (cj.contains("deltas") && cj["deltas"].contains("baseline"))
                c.baseline = cj["deltas"]["baseline"].get<std::string>();
            if (cj.contains("per_query"))
                for (const auto& row : cj["per_query"]) c.per_query.push_back(outcome_from_json(row));
            r.conditions.push_back(std::move(c));
        }
        for (const auto& sj : j.value("stats", json::array())) {
            NamedStats s;
            s.name = sj.value("name", std::string{});
            s.stats.mean_diff = sj.at("mean_diff").get<double>();
            s.stats.std_error = sj.at("std_error").get<double>();
            s.stats.ci_low = sj.at("ci95").at(0).get<double>();
            s.stats.ci_high = sj.at("ci95").at(1).get<double>();
            s.stats.t_stat = sj.at("t_stat").is_null() ? std::copysign(INFINITY, s.stats.mean_diff)
                                                       : sj.at("t_stat").get<double>();
            s.stats.p_value = sj.at("p_value").get<double>();
            s.stats.n = sj.at("n").get<std::size_t>();
            s.stats.degenerate = sj.value("degenerate", false);
            r.stats.push_back(std::move(s));
        }
        return r;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed report: ") + e.what());
    }
}

namespace {

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string pct_or_dash(const std::optional<double>& v) { return v ? fixed(*v * 100.0, 2) : "--"; }
std::string num_or_dash(const std::optional<double>& v, int digits) { return v ? fixed(*v, digits) : "--"; }

struct Row {
    std::vector<std::string> cells;
};

std::vector<Row> table_rows(const EvalReport& r, bool with_delta) {
    std::vector<Row> rows;
    std::vector<std::string> head = {"condition", "k", "acc%"};
    if (with_delta) head.push_back("delta");
    for (const char* h : {"asr%", "sel", "ndcg%", "nes", "n"}) head.emplace_back(h);
    rows.push_back({head});
    for (const auto& c : r.conditions) {
        const auto& m = c.metrics;
        std::vector<std::string> cells = {c.name, std::to_string(m.k), fixed(m.accuracy * 100.0, 2)};
        if (with_delta)
            cells.push_back(c.baseline ? format_delta(r.condition(*c.baseline).metrics.accuracy, m.accuracy) : "");
        cells.push_back(pct_or_dash(m.asr));
        cells.push_back(fixed(m.selection_rate, 2));
        cells.push_back(pct_or_dash(m.ndcg_at_k));
        cells.push_back(num_or_dash(m.nes_mean, 2));
        cells.push_back(std::to_string(m.n_queries));
        rows.push_back({cells});
    }
    return rows;
}

bool any_baseline(const EvalReport& r) {
    for (const auto& c : r.conditions)
        if (c.baseline) return true;
    return false;
}

}  // namespace

std::string render_stats(const std::vector<NamedStats>& stats) {
    std::ostringstream out;
    for (const auto& s : stats) {
        const auto& p = s.stats;
        out << s.name << ": mean_diff " << fixed(p.mean_diff, 4) << ", se " << fixed(p.std_error, 4) << ", 95% CI ["
            << fixed(p.ci_low, 4) << ", " << fixed(p.ci_high, 4) << "], p " << fixed(p.p_value, 4) << ", n " << p.n
            << (p.degenerate ? " (zero variance)" : "") << '\n';
    }
    return out.str();
}

std::string render_table(const EvalReport& r) {
    auto rows = table_rows(r, any_baseline(r));
    std::vector<std::size_t> width(rows.front().cells.size(), 0);
    for (const auto& row : rows)
        for (std::size_t i = 0; i < row.cells.size(); ++i) width[i] = std::max(width[i], row.cells[i].size());
    std::ostringstream out;
    for (std::size_t ri = 0; ri < rows.size(); ++ri) {
        for (std::size_t i = 0; i < rows[ri].cells.size(); ++i) {
            const auto& cell = rows[ri].cells[i];
            if (i) out << "  ";
            if (i == 0) {
                out << cell << std::string(width[i] - cell.size(), ' ');
            } else {
                out << std::string(width[i] - cell.size(), ' ') << cell;
            }
        }
        out << '\n';
        if (ri == 0) {
            std::size_t total = 0;
            for (auto w : width) total += w;
            out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
        }
    }
    if (!r.stats.empty()) out << '\n' << render_stats(r.stats);
    return out.str();
}

std::string render_csv(const EvalReport& r) {
    std::ostringstream out;
    out << "condition,k,accuracy,accuracy_delta,asr,selection_rate,ndcg_at_k,nes_mean,n_queries,excluded_ndcg,"
           "nes_failures\n";
    for (const auto& c : r.conditions) {
        const auto& m = c.metrics;
        auto opt = [](const std::optional<double>& v) { return v ? fixed(*v, 6) : std::string{}; };
        std::string delta;
        if (c.baseline)
            if (auto rel = relative_change(r.condition(*c.baseline).metrics.accuracy, m.accuracy)) delta = fixed(*rel, 6);
        out << '"' << c.name << '"' << ',' << m.k << ',' << fixed(m.accuracy, 6) << ',' << delta << ','
            << opt(m.asr) << ',' << fixed(m.selection_rate, 6) << ',' << opt(m.ndcg_at_k) << ',' << opt(m.nes_mean)
            << ',' << m.n_queries << ',' << m.excluded_ndcg << ',' << m.nes_failures << '\n';
    }
    return out.str();
}

}  // namespace ragattack
