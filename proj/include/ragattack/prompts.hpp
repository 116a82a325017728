#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "ragattack/llm.hpp"

namespace ragattack {

/// The prompt set used by the attack, the RAG pipeline, and the judge.
/// Built-in defaults are compiled from assets/prompts/*.prompt; a directory
/// of same-named files can override any of them.
class PromptLibrary {
public:
    static constexpr std::string_view kDecompose = "decompose";
    static constexpr std::string_view kRationale = "rationale";
    static constexpr std::string_view kWrongAnswer = "wrong_answer";
    static constexpr std::string_view kPoisonDocument = "poison_document";
    static constexpr std::string_view kAdversarialText = "adversarial_text";
    static constexpr std::string_view kParaphrase = "paraphrase";
    static constexpr std::string_view kNesJudge = "nes_judge";
    static constexpr std::string_view kQaOpen = "qa_open";
    static constexpr std::string_view kQaMultipleChoice = "qa_multiple_choice";

    static PromptLibrary builtin();
    /// Built-ins overridden by every "<name>.prompt" file found in `dir`.
    static PromptLibrary with_overrides(const std::filesystem::path& dir);

    /// Throws NotFoundError for unknown names.
    const PromptTemplate& get(std::string_view name) const;
    void set(PromptTemplate tpl);
    const std::map<std::string, PromptTemplate, std::less<>>& all() const noexcept { return templates_; }

private:
    std::map<std::string, PromptTemplate, std::less<>> templates_;
};

/// Raw asset sources keyed by template name.
const std::map<std::string, std::string>& builtin_prompt_sources();

}  // namespace ragattack
