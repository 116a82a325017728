#pragma once

// Synthetic workspace: a fictional-fact corpus, its queries, ready-made
// poison sets, and scripted provider fixtures for every LLM role. Used by
// the test suites and by make_demo.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragattack/attack.hpp"
#include "ragattack/corpus.hpp"
#include "ragattack/llm.hpp"

namespace ragattack::demo {

struct Topic {
    std::string id;
    std::string question;
    std::string gold;
    std::string wrong;
    /// Noun phrase naming what is asked, e.g. "the capital city of Veloria".
    std::string subject;
    std::string paraphrase;
    std::vector<std::pair<std::string, std::string>> components;  // phrase, role
    std::vector<std::string> clean_passages;
};

const std::vector<Topic>& topics();

struct Fixture {
    std::vector<Document> corpus;
    std::vector<QueryCase> queries;
    std::vector<ScriptedExchange> attacker;
    std::vector<ScriptedExchange> generator;
    std::vector<ScriptedExchange> judge;
};

/// `n_docs` passages (at least 3 per topic) with filler drawn from a seeded
/// generator; same seed, same bytes.
Fixture make_fixture(std::uint64_t seed = 7, std::size_t n_docs = 200);

/// The passages the scripted attacker writes for a topic.
std::vector<std::string> paradox_passages(const Topic& t);
std::vector<std::string> adversarial_texts(const Topic& t);

/// Poison sets built directly from the passages above, no provider involved.
PoisonSet paradox_set(const Topic& t);
PoisonSet prepend_set(const Topic& t);

nlohmann::json exchange_to_json(const ScriptedExchange& ex);

/// Writes corpus.jsonl, queries.jsonl, attacker/generator/judge.jsonl and a
/// config.json for `attack` ("paradox", "prepend" or "none") into `dir`.
std::filesystem::path write_workspace(const Fixture& f, const std::filesystem::path& dir,
                                      const std::string& attack = "paradox", std::uint64_t seed = 7);

}  // namespace ragattack::demo
