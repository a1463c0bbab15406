#pragma once

#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "icsum/corpus.hpp"
#include "icsum/detail/http.hpp"
#include "icsum/prompt.hpp"
#include "icsum/retrieval.hpp"

namespace icsum {

struct SamplingParams {
    double temperature = 0.5;
    std::size_t n_samples = 10;
    std::size_t max_output_tokens = 64;
    std::vector<std::string> stop_sequences = {"\n", "###"};
};

struct CandidateComment {
    std::string text;        // stop sequences stripped, whitespace trimmed
    std::size_t sample_index = 0;
    std::string backend;     // "scripted" | "echo-nearest" | "remote"
};

/// Replays a fixed list of responses, cycling when exhausted.
struct ScriptedSpec {
    std::vector<std::string> script;
};

/// Answers every request with the comment of the corpus entry whose code is
/// most similar to the query code found in the prompt's final segment.
/// `corpus` may be left unset when the experiment harness is expected to bind
/// it (to the cell's demonstration pool) before use.
struct EchoNearestSpec {
    std::optional<Corpus> corpus;
    RetrievalStrategy strategy = RetrievalStrategy::Token;
    std::optional<EmbedderSpec> embedder;      // required for Semantic
    std::optional<std::uint64_t> seed;         // required for Random
};

/// Completions-style HTTP service. The credential is read from the
/// environment variable named by api_key_env and is never written to logs,
/// errors, or files.
struct RemoteCompletionSpec {
    std::string base_url;
    std::string model;
    std::string api_key_env;
    int rate_limit_rpm = 0; // 0 = unlimited
    detail::RetryPolicy retry;
};

using BackendSpec = std::variant<ScriptedSpec, EchoNearestSpec, RemoteCompletionSpec>;

inline std::string backend_tag(const BackendSpec& spec) {
    if (std::holds_alternative<ScriptedSpec>(spec)) return "scripted";
    if (std::holds_alternative<EchoNearestSpec>(spec)) return "echo-nearest";
    return "remote";
}

/// Pulls the query code back out of a rendered prompt: the text between the
/// last demonstration delimiter (or the two-line header) and the trailing
/// "# Comment:" cue.
inline std::string extract_query_code(const std::string& prompt_text) {
    static constexpr std::string_view kCue = "\n# Comment:";
    if (prompt_text.size() < kCue.size() ||
        prompt_text.compare(prompt_text.size() - kCue.size(), kCue.size(), kCue) != 0) {
        throw std::invalid_argument("prompt does not end with the comment cue");
    }
    const std::string body = prompt_text.substr(0, prompt_text.size() - kCue.size());
    static constexpr std::string_view kDelim = "###\n";
    if (const auto pos = body.rfind(kDelim); pos != std::string::npos) {
        return body.substr(pos + kDelim.size());
    }
    // Zero-shot: skip the "# <language>" and "# <instruction>" lines.
    std::size_t line_end = body.find('\n');
    if (line_end != std::string::npos) line_end = body.find('\n', line_end + 1);
    if (line_end == std::string::npos) {
        throw std::invalid_argument("prompt is missing its header lines");
    }
    return body.substr(line_end + 1);
}

namespace detail {

/// Truncates at the earliest stop sequence, then trims whitespace.
inline std::string apply_stops(std::string text, const std::vector<std::string>& stops) {
    std::size_t cut = text.size();
    for (const auto& stop : stops) {
        if (stop.empty()) continue;
        if (const auto pos = text.find(stop); pos != std::string::npos) cut = std::min(cut, pos);
    }
    text.resize(cut);
    return std::string(trim(text));
}

inline RateLimiter& shared_rate_limiter(const std::string& base_url, int rpm) {
    static std::mutex mutex;
    static std::map<std::string, std::unique_ptr<RateLimiter>> limiters;
    std::lock_guard lock(mutex);
    auto& slot = limiters[base_url];
    if (!slot) slot = std::make_unique<RateLimiter>(rpm);
    return *slot;
}

} // namespace detail

/// Stateful completion source. State only matters for the scripted backend,
/// whose cursor advances across calls; the other backends are pure.
class CompletionBackend {
  public:
    explicit CompletionBackend(BackendSpec spec) : spec_(std::move(spec)) {}

    const BackendSpec& spec() const { return spec_; }

    std::vector<CandidateComment> complete(const RenderedPrompt& prompt,
                                           const SamplingParams& params) {
        if (prompt.text.empty()) throw std::invalid_argument("prompt must be non-empty");
        if (params.n_samples < 1) throw std::invalid_argument("n_samples must be at least 1");

        std::vector<std::string> raw;
        if (const auto* scripted = std::get_if<ScriptedSpec>(&spec_)) {
            raw = run_scripted(*scripted, params.n_samples);
        } else if (const auto* echo = std::get_if<EchoNearestSpec>(&spec_)) {
            raw = run_echo_nearest(*echo, prompt, params.n_samples);
        } else {
            raw = run_remote(std::get<RemoteCompletionSpec>(spec_), prompt, params);
        }

        std::vector<CandidateComment> out;
        out.reserve(raw.size());
        const std::string tag = backend_tag(spec_);
        for (std::size_t i = 0; i < raw.size(); ++i) {
            out.push_back({detail::apply_stops(std::move(raw[i]), params.stop_sequences), i, tag});
        }
        return out;
    }

  private:
    std::vector<std::string> run_scripted(const ScriptedSpec& scripted, std::size_t n) {
        if (scripted.script.empty()) throw std::invalid_argument("scripted backend has an empty script");
        std::vector<std::string> out;
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            out.push_back(scripted.script[script_cursor_ % scripted.script.size()]);
            ++script_cursor_;
        }
        return out;
    }

    static std::vector<std::string> run_echo_nearest(const EchoNearestSpec& echo,
                                                     const RenderedPrompt& prompt, std::size_t n) {
        if (!echo.corpus.has_value() || echo.corpus->empty()) {
            throw std::invalid_argument("echo-nearest backend requires a non-empty corpus");
        }
        const std::string query = extract_query_code(prompt.text);
        const auto nearest = retrieve(*echo.corpus, query, 1, echo.strategy, echo.embedder, echo.seed);
        if (nearest.empty()) throw std::runtime_error("echo-nearest retrieval returned nothing");
        return std::vector<std::string>(n, nearest.front().entry.comment);
    }

    static std::vector<std::string> run_remote(const RemoteCompletionSpec& remote,
                                               const RenderedPrompt& prompt,
                                               const SamplingParams& params) {
        detail::require_network("remote completion backend");
        if (remote.base_url.empty()) throw std::invalid_argument("remote backend requires a base_url");
        if (remote.model.empty()) throw std::invalid_argument("remote backend requires a model name");
        if (remote.api_key_env.empty()) {
            throw std::invalid_argument("remote backend requires api_key_env, the name of the "
                                        "environment variable holding the credential");
        }
        const char* key = std::getenv(remote.api_key_env.c_str());
        if (key == nullptr || *key == '\0') {
            throw std::runtime_error("environment variable " + remote.api_key_env + " is not set");
        }
        const httplib::Headers headers = {{"Authorization", "Bearer " + std::string(key)}};

        auto& limiter = detail::shared_rate_limiter(remote.base_url, remote.rate_limit_rpm);
        auto request = [&](std::size_t n) {
            nlohmann::ordered_json body = {
                {"model", remote.model},
                {"prompt", prompt.text},
                {"temperature", params.temperature},
                {"n", n},
                {"max_tokens", params.max_output_tokens},
                {"stop", params.stop_sequences},
            };
            limiter.wait_turn();
            return detail::post_json(remote.base_url, "/completions", body.dump(), headers,
                                     remote.retry);
        };

        try {
            return parse_choice_texts(request(params.n_samples), params.n_samples);
        } catch (const detail::HttpError& err) {
            // Some services reject n > 1; fall back to single-sample requests.
            if (err.status != 400 || params.n_samples == 1) throw;
        }
        std::vector<std::string> out;
        out.reserve(params.n_samples);
        for (std::size_t i = 0; i < params.n_samples; ++i) {
            auto texts = parse_choice_texts(request(1), 1);
            out.push_back(std::move(texts.front()));
        }
        return out;
    }

    static std::vector<std::string> parse_choice_texts(const std::string& body,
                                                       std::size_t expected) {
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(body);
        } catch (const nlohmann::json::exception& err) {
            throw std::runtime_error(std::string("completion response is not valid JSON: ") +
                                     err.what());
        }
        if (!doc.is_object() || !doc.contains("choices") || !doc["choices"].is_array()) {
            throw std::runtime_error("completion response is missing a 'choices' array");
        }
        const auto& choices = doc["choices"];
        if (choices.size() != expected) {
            throw std::runtime_error("completion response has " + std::to_string(choices.size()) +
                                     " choices, expected " + std::to_string(expected));
        }
        std::vector<std::string> out;
        out.reserve(choices.size());
        for (const auto& choice : choices) {
            if (!choice.is_object() || !choice.contains("text") || !choice["text"].is_string()) {
                throw std::runtime_error("completion choice is missing a string 'text' field");
            }
            out.push_back(choice["text"].get<std::string>());
        }
        return out;
    }

    BackendSpec spec_;
    std::size_t script_cursor_ = 0;
};

/// One-shot convenience wrapper; scripted cursors start fresh per call.
inline std::vector<CandidateComment> complete(const BackendSpec& spec, const RenderedPrompt& prompt,
                                              const SamplingParams& params = {}) {
    CompletionBackend backend(spec);
    return backend.complete(prompt, params);
}

} // namespace icsum
