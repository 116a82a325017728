#include "ragattack/prompts.hpp"

#include <fstream>
#include <sstream>

#include "ragattack/errors.hpp"

namespace ragattack {

PromptLibrary PromptLibrary::builtin() {
    PromptLibrary lib;
    for (const auto& [name, source] : builtin_prompt_sources()) lib.set(PromptTemplate::parse(name, source));
    return lib;
}

PromptLibrary PromptLibrary::with_overrides(const std::filesystem::path& dir) {
    auto lib = builtin();
    if (!std::filesystem::is_directory(dir)) throw ConfigError("prompt directory not found: " + dir.string());
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() != ".prompt") continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        lib.set(PromptTemplate::parse(entry.path().stem().string(), ss.str()));
    }
    return lib;
}

const PromptTemplate& PromptLibrary::get(std::string_view name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw NotFoundError("unknown prompt template: " + std::string(name));
    return it->second;
}

void PromptLibrary::set(PromptTemplate tpl) {
    auto name = tpl.name;
    templates_.insert_or_assign(std::move(name), std::move(tpl));
}

}  // namespace ragattack
