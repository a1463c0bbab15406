#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace icsum {

/// Normalized lexical fingerprint of a code snippet: the set of lowercase
/// sub-tokens left after keyword removal and identifier splitting.
struct SubTokenSet {
    std::set<std::string> tokens;
    std::optional<std::string> source_id;
};

/// Comment-side tokenization result. Order-preserving, duplicates allowed.
using WordSequence = std::vector<std::string>;

namespace detail {

inline bool is_ascii_letter(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
inline bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_ascii_upper(char c) { return c >= 'A' && c <= 'Z'; }
inline bool is_ascii_lower(char c) { return c >= 'a' && c <= 'z'; }
inline bool is_ascii_alnum(char c) { return is_ascii_letter(c) || is_ascii_digit(c); }
inline bool is_word_char(char c) { return is_ascii_alnum(c) || c == '_'; }
inline char to_ascii_lower(char c) { return is_ascii_upper(c) ? static_cast<char>(c - 'A' + 'a') : c; }

} // namespace detail

/// The Java reserved words plus the literals true/false/null, 53 strings.
/// Mirrored bit-exactly by data/java_reserved_words.txt (one word per line);
/// a test pins the two against each other.
inline const std::array<std::string_view, 53>& java_reserved_words() {
    static const std::array<std::string_view, 53> words = {
        "abstract", "assert",       "boolean",  "break",    "byte",      "case",
        "catch",    "char",         "class",    "const",    "continue",  "default",
        "do",       "double",       "else",     "enum",     "extends",   "final",
        "finally",  "float",        "for",      "goto",     "if",        "implements",
        "import",   "instanceof",   "int",      "interface", "long",     "native",
        "new",      "package",      "private",  "protected", "public",   "return",
        "short",    "static",       "strictfp", "super",    "switch",    "synchronized",
        "this",     "throw",        "throws",   "transient", "try",      "void",
        "volatile", "while",        "true",     "false",    "null",
    };
    return words;
}

inline bool is_java_reserved(std::string_view token) {
    static const std::unordered_set<std::string_view> lookup(java_reserved_words().begin(),
                                                             java_reserved_words().end());
    return lookup.count(token) > 0;
}

/// Splits an identifier at underscores and camelCase boundaries.
///
/// Boundaries: an underscore; a lower-to-upper transition; and inside a run
/// of two or more uppercase letters followed by a lowercase letter, before
/// the last uppercase letter ("XMLParser" -> xml | parser). Digits stay
/// attached to the preceding segment. Segments come back lowercased, empty
/// segments dropped.
inline std::vector<std::string> split_identifier(std::string_view name) {
    std::vector<std::string> segments;
    std::string current;
    const auto flush = [&] {
        if (!current.empty()) {
            segments.push_back(current);
            current.clear();
        }
    };
    for (std::size_t i = 0; i < name.size(); ++i) {
        const char c = name[i];
        if (c == '_') {
            flush();
            continue;
        }
        if (i > 0 && detail::is_ascii_upper(c)) {
            const char prev = name[i - 1];
            if (detail::is_ascii_lower(prev)) {
                flush(); // lower-to-upper boundary
            } else if (detail::is_ascii_upper(prev) && i + 1 < name.size() &&
                       detail::is_ascii_lower(name[i + 1])) {
                flush(); // acronym run ends: split before the last uppercase
            }
        }
        current.push_back(detail::to_ascii_lower(c));
    }
    flush();
    return segments;
}

/// Lexes code into word-like tokens (maximal [A-Za-z0-9_]+ runs starting
/// with a letter or underscore), drops Java reserved words and the literals
/// true/false/null (exact match, before any lowercasing), splits the
/// survivors into sub-tokens, and returns the lowercased union as a set.
/// Reserved words are filtered again after splitting so the result never
/// contains one. String-level scanning only; the code need not parse.
inline SubTokenSet code_subtokens(std::string_view code) {
    SubTokenSet result;
    std::size_t i = 0;
    while (i < code.size()) {
        if (!detail::is_word_char(code[i])) {
            ++i;
            continue;
        }
        std::size_t start = i;
        while (i < code.size() && detail::is_word_char(code[i])) ++i;
        std::string_view run = code.substr(start, i - start);
        if (detail::is_ascii_digit(run.front())) continue; // numeric literal, not a word
        if (is_java_reserved(run)) continue;
        for (auto& sub : split_identifier(run)) {
            if (!is_java_reserved(sub)) result.tokens.insert(std::move(sub));
        }
    }
    return result;
}

/// Lowercases, splits on any non-alphanumeric character, drops empty
/// segments, preserves order.
inline WordSequence comment_tokens(std::string_view comment) {
    WordSequence words;
    std::string current;
    for (char c : comment) {
        if (detail::is_ascii_alnum(c)) {
            current.push_back(detail::to_ascii_lower(c));
        } else if (!current.empty()) {
            words.push_back(current);
            current.clear();
        }
    }
    if (!current.empty()) words.push_back(current);
    return words;
}

} // namespace icsum
