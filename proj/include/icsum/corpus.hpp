#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

namespace icsum {

/// The perspective a comment takes on its code. Others is never a
/// generation target; it exists so corpora carrying that label load cleanly
/// and can be filtered out.
enum class Intent { What, Why, HowToUse, HowItIsDone, Property, Others };

enum class Split { Train, Test };

inline const char* to_label(Intent v) {
    switch (v) {
        case Intent::What: return "what";
        case Intent::Why: return "why";
        case Intent::HowToUse: return "how-to-use";
        case Intent::HowItIsDone: return "how-it-is-done";
        case Intent::Property: return "property";
        case Intent::Others: return "others";
    }
    throw std::logic_error("unreachable intent value");
}

inline const char* to_label(Split v) {
    return v == Split::Train ? "train" : "test";
}

inline Intent parse_intent(std::string_view label) {
    if (label == "what") return Intent::What;
    if (label == "why") return Intent::Why;
    if (label == "how-to-use") return Intent::HowToUse;
    if (label == "how-it-is-done") return Intent::HowItIsDone;
    if (label == "property") return Intent::Property;
    if (label == "others") return Intent::Others;
    throw std::invalid_argument("unknown intent label '" + std::string(label) + "'");
}

inline Split parse_split(std::string_view label) {
    if (label == "train") return Split::Train;
    if (label == "test") return Split::Test;
    throw std::invalid_argument("unknown split label '" + std::string(label) + "'");
}

inline const std::vector<Intent>& all_intents() {
    static const std::vector<Intent> intents = {Intent::What, Intent::Why, Intent::HowToUse,
                                                Intent::HowItIsDone, Intent::Property,
                                                Intent::Others};
    return intents;
}

/// One labeled code-comment pair.
struct CorpusEntry {
    std::string id;
    std::string code;
    std::string comment;
    Intent intent = Intent::What;
    Split split = Split::Train;
};

/// Immutable after load; entry order is file order and stable across loads,
/// which retrieval relies on for tie-breaking.
struct Corpus {
    std::string name;
    std::vector<CorpusEntry> entries;

    std::size_t size() const { return entries.size(); }
    bool empty() const { return entries.empty(); }
};

using WarningSink = std::function<void(const std::string&)>;

inline void default_warning_sink(const std::string& message) {
    std::cerr << "warning: " << message << '\n';
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto* ws = " \t\r\n\f\v";
    const auto begin = s.find_first_not_of(ws);
    if (begin == std::string_view::npos) return {};
    const auto end = s.find_last_not_of(ws);
    return s.substr(begin, end - begin + 1);
}

} // namespace detail

/// Loads a line-delimited corpus file: one JSON record per line with fields
/// id, code, comment, intent, split (field order irrelevant). Unknown fields
/// are ignored with a warning. Blank lines are skipped. Malformed lines,
/// duplicate ids, and unknown labels are errors naming the offending line.
inline Corpus load_corpus(const std::string& path, const WarningSink& warn = default_warning_sink) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open corpus file '" + path + "'");

    Corpus corpus;
    corpus.name = std::filesystem::path(path).filename().string();

    std::unordered_set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    const auto fail = [&](const std::string& what) -> void {
        std::ostringstream msg;
        msg << path << ":" << line_no << ": " << what;
        throw std::runtime_error(msg.str());
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;

        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            fail(std::string("invalid record: ") + e.what());
        }
        if (!record.is_object()) fail("record is not an object");

        static const std::unordered_set<std::string> known = {"id", "code", "comment", "intent",
                                                              "split"};
        for (const auto& [key, _] : record.items()) {
            if (!known.count(key)) {
                std::ostringstream msg;
                msg << path << ":" << line_no << ": ignoring unknown field '" << key << "'";
                warn(msg.str());
            }
        }

        const auto field = [&](const char* name) -> std::string {
            if (!record.contains(name)) fail(std::string("missing field '") + name + "'");
            if (!record[name].is_string()) fail(std::string("field '") + name + "' must be a string");
            return record[name].get<std::string>();
        };

        CorpusEntry entry;
        entry.id = field("id");
        entry.code = field("code");
        entry.comment = field("comment");
        if (detail::trim(entry.id).empty()) fail("field 'id' is empty");
        if (detail::trim(entry.code).empty()) fail("field 'code' is empty");
        if (detail::trim(entry.comment).empty()) fail("field 'comment' is empty");
        try {
            entry.intent = parse_intent(field("intent"));
            entry.split = parse_split(field("split"));
        } catch (const std::invalid_argument& e) {
            fail(e.what());
        }
        if (!seen_ids.insert(entry.id).second) fail("duplicate id '" + entry.id + "'");
        corpus.entries.push_back(std::move(entry));
    }
    return corpus;
}

/// Entries matching both predicates, original relative order preserved.
inline Corpus filter(const Corpus& corpus, Intent intent, Split split) {
    Corpus out;
    out.name = corpus.name;
    for (const auto& entry : corpus.entries) {
        if (entry.intent == intent && entry.split == split) out.entries.push_back(entry);
    }
    return out;
}

/// Samples k distinct entries uniformly without replacement. If k exceeds
/// the corpus size, every entry comes back (as a permutation).
///
/// Pinned algorithm so the same seed reproduces the same sample on every
/// platform: std::mt19937_64 seeded with `seed`, partial Fisher-Yates where
/// the i-th draw is i + gen() % (n - i). Both the generator and the modulo
/// reduction are fully specified; no distribution class is involved.
inline std::vector<CorpusEntry> sample_random(const Corpus& corpus, std::size_t k,
                                              std::uint64_t seed) {
    const std::size_t n = corpus.size();
    const std::size_t take = k < n ? k : n;
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    std::mt19937_64 gen(seed);
    std::vector<CorpusEntry> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(gen() % (n - i));
        std::swap(order[i], order[j]);
        out.push_back(corpus.entries[order[i]]);
    }
    return out;
}

} // namespace icsum
