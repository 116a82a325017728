#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragattack/concurrency.hpp"

namespace ragattack {

// Sampling temperatures per role.
inline constexpr double kAnalysisTemperature = 0.2;
inline constexpr double kGenerationTemperature = 1.0;
inline constexpr double kAnswerTemperature = 0.1;

struct GenerationConfig {
    double temperature = kAnalysisTemperature;
    std::size_t max_output_tokens = 512;
    std::optional<std::int64_t> seed;
    /// Extra attempts after the first, both for transport failures and for
    /// structured-output regeneration loops.
    std::size_t max_retries = 5;
    /// First transport backoff; doubles per retry.
    std::chrono::milliseconds backoff{200};

    /// Throws InvalidInputError when temperature is outside [0, 2].
    void validate() const;
    GenerationConfig with_temperature(double t) const {
        auto c = *this;
        c.temperature = t;
        return c;
    }
};

/// System + user text with `{name}` placeholders (name = [a-z_][a-z0-9_]*).
/// Any other brace sequence, e.g. a JSON example, is literal text.
struct PromptTemplate {
    std::string name;
    std::string system;
    std::string user;

    std::set<std::string> required_placeholders() const;

    /// Parses the asset format: a "[system]" line, system text, a "[user]"
    /// line, user text. A file without markers is a user-only template.
    static PromptTemplate parse(std::string name, std::string_view source);
};

struct RenderedPrompt {
    std::string system;
    std::string user;
    /// Text scripted matchers and hashes see: system + "\n\n" + user.
    std::string joined() const { return system + "\n\n" + user; }
};

using Bindings = std::map<std::string, std::string, std::less<>>;

/// Single-pass substitution; bound values are never re-expanded. Throws
/// TemplateError naming the first unbound placeholder.
RenderedPrompt render(const PromptTemplate& tpl, const Bindings& bindings);
std::string render_text(std::string_view text, const Bindings& bindings);

struct ChatRequest {
    std::string system;
    std::string user;
    double temperature = 0.0;
    std::size_t max_tokens = 512;
    std::optional<std::int64_t> seed;
};

/// One chat-completion attempt. Transport problems throw TransportError;
/// retry policy lives in complete().
class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual std::string send(const ChatRequest& request) = 0;
    virtual std::string_view kind() const = 0;
};

struct ScriptedExchange {
    /// All substrings must occur in the joined prompt.
    std::vector<std::string> match;
    /// Alternative matcher: hex FNV-1a-64 of the joined prompt.
    std::optional<std::string> prompt_hash;
    std::string response;
    /// Uses before the exchange is exhausted; unlimited when unset.
    std::optional<std::size_t> times;
    /// Simulate a transport failure instead of responding.
    bool transport_error = false;
};

/// Deterministic provider: the first exchange (in fixture order) whose
/// matcher accepts the prompt and that still has uses left answers it. An
/// unmatched prompt is an UnmatchedPromptError, never a fabricated reply.
class ScriptedProvider final : public ChatProvider {
public:
    ScriptedProvider() = default;
    explicit ScriptedProvider(std::vector<ScriptedExchange> exchanges);

    void add(ScriptedExchange ex);
    std::string send(const ChatRequest& request) override;
    std::string_view kind() const override { return "scripted"; }

    /// (prompt hash, response) per served call, in call order.
    std::vector<std::pair<std::string, std::string>> transcript() const;
    std::size_t calls() const;

    static std::unique_ptr<ScriptedProvider> from_jsonl(const std::string& path);
    static ScriptedExchange exchange_from_json(const nlohmann::json& j);

private:
    mutable std::mutex mu_;
    std::vector<ScriptedExchange> exchanges_;
    std::vector<std::size_t> used_;
    std::vector<std::pair<std::string, std::string>> transcript_;
};

/// Wraps a provider so at most `limit` requests are in flight at once.
class InFlightLimitedProvider final : public ChatProvider {
public:
    InFlightLimitedProvider(std::shared_ptr<ChatProvider> inner, std::ptrdiff_t limit)
        : inner_(std::move(inner)), limit_(limit) {}
    std::string send(const ChatRequest& request) override {
        auto permit = limit_.acquire();
        return inner_->send(request);
    }
    std::string_view kind() const override { return inner_->kind(); }

private:
    std::shared_ptr<ChatProvider> inner_;
    InFlightLimit limit_;
};

/// Sends with transport retries (max_retries extra attempts, exponential
/// backoff). Whitespace-only output is an EmptyOutputError.
std::string complete(ChatProvider& provider, const std::string& system, const std::string& user,
                     const GenerationConfig& config);
inline std::string complete(ChatProvider& provider, const RenderedPrompt& prompt, const GenerationConfig& config) {
    return complete(provider, prompt.system, prompt.user, config);
}

/// First balanced top-level JSON object or array in `text` that parses.
/// Throws ExtractionError when there is none.
nlohmann::json extract_json_block(std::string_view text);

}  // namespace ragattack
