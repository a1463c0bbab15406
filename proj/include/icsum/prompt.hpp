#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "icsum/corpus.hpp"

namespace icsum {

/// One in-context example: a code snippet and its reference comment.
struct Demonstration {
    std::string code;
    std::string comment;
};

struct PromptSpec {
    Intent intent = Intent::What;
    std::string language_name = "Java";
    std::vector<Demonstration> demonstrations; // emitted in list order; put the most similar LAST
    std::string query_code;
    std::size_t window_limit = 8000; // token-estimate budget
};

struct RenderedPrompt {
    std::string text;
    std::size_t shots_used = 0;
    std::size_t estimated_tokens = 0;
};

/// The instruction line for each intent. Byte-exact strings; Others has no
/// instruction and is an error.
inline std::string_view intent_instruction(Intent intent) {
    switch (intent) {
        case Intent::What:
            return "Describe the functionality of the method";
        case Intent::Why:
            return "Explain the reason why the method is provided or the design rationale of the method";
        case Intent::HowToUse:
            return "Describe the usage or the expected set-up of using the method";
        case Intent::HowItIsDone:
            return "Describe the implementation details of the method";
        case Intent::Property:
            return "Assert properties of the method including pre-conditions or post-conditions of the method";
        case Intent::Others:
            break;
    }
    throw std::invalid_argument("intent 'others' is not a generation target");
}

/// Byte-count token estimate: ceil(bytes / 4). Model-agnostic and monotone
/// in text length.
inline std::size_t estimate_tokens_for(std::size_t bytes) { return (bytes + 3) / 4; }

inline std::size_t estimate_tokens(std::string_view text) {
    return estimate_tokens_for(text.size());
}

namespace detail {

inline std::string demonstration_block(const Demonstration& demo) {
    return demo.code + "\n# Comment: " + demo.comment + "\n###\n";
}

} // namespace detail

/// Renders the in-context-learning prompt:
///
///   # <language_name>
///   # <intent instruction>
///   <demo code>
///   # Comment: <demo comment>
///   ###
///   ...
///   <query code>
///   # Comment:
///
/// with no trailing newline. If the token estimate exceeds window_limit,
/// demonstrations are dropped from the FRONT of the list (least-priority
/// first) until it fits; a query that does not fit even zero-shot is an
/// error.
inline RenderedPrompt build_prompt(const PromptSpec& spec) {
    if (spec.intent == Intent::Others) {
        throw std::invalid_argument("intent 'others' is not a generation target");
    }
    if (spec.window_limit == 0) throw std::invalid_argument("window_limit must be positive");
    if (spec.query_code.empty()) throw std::invalid_argument("query_code must be non-empty");
    for (const auto& demo : spec.demonstrations) {
        if (demo.code.empty() || demo.comment.empty()) {
            throw std::invalid_argument("demonstrations must have non-empty code and comment");
        }
    }

    const std::string header = "# " + spec.language_name + "\n# " +
                               std::string(intent_instruction(spec.intent)) + "\n";
    const std::string query_block = spec.query_code + "\n# Comment:";

    std::vector<std::string> blocks;
    blocks.reserve(spec.demonstrations.size());
    for (const auto& demo : spec.demonstrations) blocks.push_back(detail::demonstration_block(demo));

    const std::size_t fixed_bytes = header.size() + query_block.size();
    std::size_t suffix_bytes = 0;
    for (const auto& block : blocks) suffix_bytes += block.size();

    // Largest suffix of the demonstration list whose estimate fits.
    std::size_t first_kept = 0;
    while (estimate_tokens_for(fixed_bytes + suffix_bytes) > spec.window_limit &&
           first_kept < blocks.size()) {
        suffix_bytes -= blocks[first_kept].size();
        ++first_kept;
    }
    if (estimate_tokens_for(fixed_bytes + suffix_bytes) > spec.window_limit) {
        throw std::runtime_error("query exceeds the window limit even with zero demonstrations");
    }

    RenderedPrompt out;
    out.shots_used = blocks.size() - first_kept;
    out.text.reserve(fixed_bytes + suffix_bytes);
    out.text += header;
    for (std::size_t i = first_kept; i < blocks.size(); ++i) out.text += blocks[i];
    out.text += query_block;
    out.estimated_tokens = estimate_tokens(out.text);
    return out;
}

} // namespace icsum
