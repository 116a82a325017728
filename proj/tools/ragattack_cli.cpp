// ragattack: attack, run, stats and report subcommands.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "ragattack/errors.hpp"
#include "ragattack/experiment.hpp"
#include "ragattack/report.hpp"

using namespace ragattack;

int main(int argc, char** argv) {
    CLI::App app{"Corpus-poisoning attack and evaluation harness for retrieval-augmented QA"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    auto add_config = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--set", overrides, "override a config value, e.g. --set defense.kind=rerank");
    };
    auto* attack = app.add_subcommand("attack", "generate poison sets for every query");
    add_config(attack);
    auto* run = app.add_subcommand("run", "inject, retrieve, defend, answer, evaluate and report");
    add_config(run);

    std::string report_a, report_b, condition, out_path;
    auto* stats = app.add_subcommand("stats", "paired t-tests between two reports (B - A)");
    stats->add_option("report_a", report_a, "baseline report.json")->required();
    stats->add_option("report_b", report_b, "comparison report.json")->required();
    stats->add_option("--condition", condition, "condition name present in both reports");
    stats->add_option("-o,--out", out_path, "write the stats JSON here");

    std::string report_path, format = "table";
    auto* report = app.add_subcommand("report", "render a report.json");
    report->add_option("report", report_path, "report.json")->required();
    report->add_option("-f,--format", format, "table, csv or json")->check(CLI::IsMember({"table", "csv", "json"}));

    CLI11_PARSE(app, argc, argv);

    try {
        if (*attack) return cmd_attack(load_config(config_path, overrides), std::cout);
        if (*run) return cmd_run(load_config(config_path, overrides), std::cout);
        if (*stats) {
            auto results = cmd_stats(load_report(report_a), load_report(report_b),
                                     condition.empty() ? std::nullopt : std::optional<std::string>(condition));
            std::cout << render_stats(results);
            if (!out_path.empty()) {
                nlohmann::json j = nlohmann::json::array();
                for (const auto& s : results) {
                    auto sj = to_json(s.stats);
                    sj["name"] = s.name;
                    j.push_back(std::move(sj));
                }
                std::ofstream(out_path) << j.dump(2) << "\n";
            }
            return kExitOk;
        }
        if (*report) {
            auto r = load_report(report_path);
            if (format == "csv")
                std::cout << render_csv(r);
            else if (format == "json")
                std::cout << to_json(r).dump(2) << "\n";
            else
                std::cout << render_table(r);
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitStage;
    }
    return kExitOk;
}
