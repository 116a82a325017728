#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ragattack::text {

/// Half-open byte range [begin, end) of one token inside its source string.
struct TokenSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
};

/// Maximal runs of non-whitespace.
std::vector<TokenSpan> whitespace_token_spans(std::string_view s);
std::vector<std::string> whitespace_tokens(std::string_view s);

/// Lowercased ASCII-alphanumeric word tokens; bytes >= 0x80 are kept as part
/// of a word so UTF-8 text is not shredded.
std::vector<std::string> word_tokens(std::string_view s);

std::string to_lower(std::string_view s);

/// Trim, and replace every whitespace run with one space.
std::string collapse_whitespace(std::string_view s);

/// to_lower(collapse_whitespace(s))
std::string normalize(std::string_view s);

/// Case-insensitive, whitespace-insensitive substring test.
bool contains_normalized(std::string_view haystack, std::string_view needle);

/// True when either normalized string contains the other. Empty strings
/// overlap everything.
bool overlaps(std::string_view a, std::string_view b);

/// Fixed 50-word English stopword list.
const std::set<std::string, std::less<>>& stopwords();

/// Query word tokens minus stopwords, deduplicated, first-occurrence order.
std::vector<std::string> content_terms(std::string_view s);

/// 64-bit FNV-1a, used for prompt matchers and manifest hashes.
std::uint64_t fnv1a64(std::string_view s);
std::string hex64(std::uint64_t v);

}  // namespace ragattack::text
