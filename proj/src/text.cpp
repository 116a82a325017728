#include "ragattack/text.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

namespace ragattack::text {

namespace {

bool is_space(unsigned char c) { return std::isspace(c) != 0; }

bool is_word_byte(unsigned char c) { return c >= 0x80 || std::isalnum(c) != 0; }

}  // namespace

std::vector<TokenSpan> whitespace_token_spans(std::string_view s) {
    std::vector<TokenSpan> spans;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(static_cast<unsigned char>(s[i]))) ++i;
        if (i == s.size()) break;
        std::size_t start = i;
        while (i < s.size() && !is_space(static_cast<unsigned char>(s[i]))) ++i;
        spans.push_back({start, i});
    }
    return spans;
}

std::vector<std::string> whitespace_tokens(std::string_view s) {
    std::vector<std::string> out;
    for (auto span : whitespace_token_spans(s)) out.emplace_back(s.substr(span.begin, span.end - span.begin));
    return out;
}

std::vector<std::string> word_tokens(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        auto c = static_cast<unsigned char>(ch);
        if (is_word_byte(c)) {
            cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (auto& ch : out) {
        auto c = static_cast<unsigned char>(ch);
        if (c < 0x80) ch = static_cast<char>(std::tolower(c));
    }
    return out;
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char ch : s) {
        if (is_space(static_cast<unsigned char>(ch))) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(ch);
    }
    return out;
}

std::string normalize(std::string_view s) { return to_lower(collapse_whitespace(s)); }

bool contains_normalized(std::string_view haystack, std::string_view needle) {
    return normalize(haystack).find(normalize(needle)) != std::string::npos;
}

bool overlaps(std::string_view a, std::string_view b) {
    auto na = normalize(a);
    auto nb = normalize(b);
    return na.find(nb) != std::string::npos || nb.find(na) != std::string::npos;
}

const std::set<std::string, std::less<>>& stopwords() {
    static const std::set<std::string, std::less<>> words = {
        "a",     "an",   "the",   "and",  "or",    "but",  "if",    "of",    "to",   "in",
        "on",    "at",   "by",    "for",  "with",  "about", "from", "as",    "into", "is",
        "are",   "was",  "were",  "be",   "been",  "being", "do",   "does",  "did",  "what",
        "which", "who",  "whom",  "whose", "when", "where", "why",  "how",   "that", "this",
        "these", "those", "it",   "its",  "has",   "have",  "had",  "not",   "no",   "than",
    };
    return words;
}

std::vector<std::string> content_terms(std::string_view s) {
    std::vector<std::string> out;
    const auto& stop = stopwords();
    for (auto& tok : word_tokens(s)) {
        if (stop.count(tok)) continue;
        if (std::find(out.begin(), out.end(), tok) == out.end()) out.push_back(std::move(tok));
    }
    return out;
}

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace ragattack::text
