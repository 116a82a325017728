#include "ragattack/llm.hpp"

#include <cctype>
#include <thread>

#include "ragattack/corpus.hpp"
#include "ragattack/errors.hpp"
#include "ragattack/text.hpp"

namespace ragattack {

using nlohmann::json;

void GenerationConfig::validate() const {
    if (temperature < 0.0 || temperature > 2.0) throw InvalidInputError("temperature must be in [0, 2]");
}

namespace {

bool is_name_start(char c) { return c == '_' || (c >= 'a' && c <= 'z'); }
bool is_name_char(char c) { return is_name_start(c) || (c >= '0' && c <= '9'); }

/// Length of a placeholder starting at text[i] == '{', or 0.
std::size_t placeholder_len(std::string_view text, std::size_t i) {
    if (text[i] != '{' || i + 1 >= text.size() || !is_name_start(text[i + 1])) return 0;
    std::size_t j = i + 2;
    while (j < text.size() && is_name_char(text[j])) ++j;
    return (j < text.size() && text[j] == '}') ? j - i + 1 : 0;
}

void collect_placeholders(std::string_view text, std::set<std::string>& out) {
    for (std::size_t i = 0; i < text.size(); ++i)
        if (auto len = placeholder_len(text, i)) out.emplace(text.substr(i + 1, len - 2));
}

std::string trim_newlines(std::string_view s) {
    while (!s.empty() && (s.front() == '\n' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.remove_suffix(1);
    return std::string(s);
}

}  // namespace

std::set<std::string> PromptTemplate::required_placeholders() const {
    std::set<std::string> out;
    collect_placeholders(system, out);
    collect_placeholders(user, out);
    return out;
}

PromptTemplate PromptTemplate::parse(std::string name, std::string_view source) {
    PromptTemplate t;
    t.name = std::move(name);
    constexpr std::string_view kSys = "[system]";
    constexpr std::string_view kUser = "[user]";
    auto line_marker = [&](std::string_view marker) -> std::size_t {
        for (std::size_t pos = source.find(marker); pos != std::string_view::npos; pos = source.find(marker, pos + 1)) {
            bool at_line_start = pos == 0 || source[pos - 1] == '\n';
            std::size_t after = pos + marker.size();
            bool at_line_end = after == source.size() || source[after] == '\n' || source[after] == '\r';
            if (at_line_start && at_line_end) return pos;
        }
        return std::string_view::npos;
    };
    auto sys = line_marker(kSys);
    auto usr = line_marker(kUser);
    if (usr == std::string_view::npos) {
        t.user = trim_newlines(source);
        return t;
    }
    if (sys != std::string_view::npos && sys < usr) t.system = trim_newlines(source.substr(sys + kSys.size(), usr - sys - kSys.size()));
    t.user = trim_newlines(source.substr(usr + kUser.size()));
    return t;
}

std::string render_text(std::string_view text, const Bindings& bindings) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size();) {
        if (auto len = placeholder_len(text, i)) {
            auto key = text.substr(i + 1, len - 2);
            auto it = bindings.find(key);
            if (it == bindings.end()) throw TemplateError(std::string(key));
            out += it->second;
            i += len;
        } else {
            out.push_back(text[i++]);
        }
    }
    return out;
}

RenderedPrompt render(const PromptTemplate& tpl, const Bindings& bindings) {
    return {render_text(tpl.system, bindings), render_text(tpl.user, bindings)};
}

ScriptedProvider::ScriptedProvider(std::vector<ScriptedExchange> exchanges)
    : exchanges_(std::move(exchanges)), used_(exchanges_.size(), 0) {}

void ScriptedProvider::add(ScriptedExchange ex) {
    std::lock_guard lock(mu_);
    exchanges_.push_back(std::move(ex));
    used_.push_back(0);
}

std::string ScriptedProvider::send(const ChatRequest& request) {
    const std::string prompt = RenderedPrompt{request.system, request.user}.joined();
    const std::string hash = text::hex64(text::fnv1a64(prompt));
    std::lock_guard lock(mu_);
    for (std::size_t i = 0; i < exchanges_.size(); ++i) {
        const auto& ex = exchanges_[i];
        if (ex.times && used_[i] >= *ex.times) continue;
        bool ok = ex.prompt_hash ? *ex.prompt_hash == hash : !ex.match.empty();
        for (const auto& m : ex.match) ok = ok && prompt.find(m) != std::string::npos;
        if (!ok) continue;
        ++used_[i];
        if (ex.transport_error) {
            transcript_.emplace_back(hash, "<transport error>");
            throw TransportError("scripted transport failure");
        }
        transcript_.emplace_back(hash, ex.response);
        return ex.response;
    }
    throw UnmatchedPromptError("no scripted exchange matches prompt " + hash + ": " +
                               text::collapse_whitespace(request.user).substr(0, 160));
}

std::vector<std::pair<std::string, std::string>> ScriptedProvider::transcript() const {
    std::lock_guard lock(mu_);
    return transcript_;
}

std::size_t ScriptedProvider::calls() const {
    std::lock_guard lock(mu_);
    return transcript_.size();
}

ScriptedExchange ScriptedProvider::exchange_from_json(const json& j) {
    ScriptedExchange ex;
    if (auto m = j.find("match"); m != j.end()) {
        if (m->is_string()) ex.match.push_back(m->get<std::string>());
        else ex.match = m->get<std::vector<std::string>>();
    }
    if (auto h = j.find("prompt_hash"); h != j.end()) ex.prompt_hash = h->get<std::string>();
    if (ex.match.empty() && !ex.prompt_hash) throw SchemaError("exchange needs \"match\" or \"prompt_hash\"");
    ex.response = j.value("response", std::string{});
    if (auto t = j.find("times"); t != j.end() && !t->is_null()) ex.times = t->get<std::size_t>();
    ex.transport_error = j.value("transport_error", false);
    return ex;
}

std::unique_ptr<ScriptedProvider> ScriptedProvider::from_jsonl(const std::string& path) {
    std::vector<ScriptedExchange> exchanges;
    for (auto& [lineno, row] : read_jsonl(path)) {
        try {
            exchanges.push_back(exchange_from_json(row));
        } catch (const std::exception& e) {
            throw ParseError(e.what(), lineno);
        }
    }
    return std::make_unique<ScriptedProvider>(std::move(exchanges));
}

std::string complete(ChatProvider& provider, const std::string& system, const std::string& user,
                     const GenerationConfig& config) {
    config.validate();
    ChatRequest req{system, user, config.temperature, config.max_output_tokens, config.seed};
    auto delay = config.backoff;
    for (std::size_t attempt = 0;; ++attempt) {
        try {
            std::string out = provider.send(req);
            if (out.find_first_not_of(" \t\r\n") == std::string::npos)
                throw EmptyOutputError("provider returned empty output");
            return out;
        } catch (const TransportError& e) {
            if (attempt >= config.max_retries)
                throw TransportError("giving up after " + std::to_string(attempt + 1) + " attempts: " + e.what(),
                                     e.batch(), e.status());
        }
        if (delay.count() > 0) std::this_thread::sleep_for(delay);
        delay *= 2;
    }
}

namespace {

/// End (exclusive) of the balanced bracket run starting at text[start], or
/// npos. String literals are skipped so braces inside them do not count.
std::size_t balanced_end(std::string_view text, std::size_t start) {
    std::vector<char> stack;
    bool in_string = false;
    for (std::size_t i = start; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
            continue;
        }
        switch (c) {
            case '"': in_string = true; break;
            case '{': stack.push_back('}'); break;
            case '[': stack.push_back(']'); break;
            case '}':
            case ']':
                if (stack.empty() || stack.back() != c) return std::string_view::npos;
                stack.pop_back();
                if (stack.empty()) return i + 1;
                break;
            default: break;
        }
    }
    return std::string_view::npos;
}

}  // namespace

json extract_json_block(std::string_view text) {
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '{' && text[i] != '[') continue;
        auto end = balanced_end(text, i);
        if (end == std::string_view::npos) continue;
        auto parsed = json::parse(text.substr(i, end - i), nullptr, /*allow_exceptions=*/false);
        if (!parsed.is_discarded()) return parsed;
    }
    throw ExtractionError("no JSON object or array found in model output");
}

}  // namespace ragattack
