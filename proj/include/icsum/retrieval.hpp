#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "icsum/codetok.hpp"
#include "icsum/corpus.hpp"
#include "icsum/detail/http.hpp"

namespace icsum {

struct EmbeddingVector {
    std::vector<double> components;

    std::size_t dim() const { return components.size(); }
};

enum class EmbedderKind { RemoteService, LocalHashed };

/// Pluggable embedding provider. LocalHashed is a deterministic offline
/// stand-in (hashed bag of sub-tokens); RemoteService recovers a real
/// sentence-encoder setup over HTTP.
struct EmbedderSpec {
    EmbedderKind kind = EmbedderKind::LocalHashed;
    std::string endpoint;  // RemoteService: base URL, path /embed appended
    std::size_t dim = 512; // LocalHashed: bucket count, >= 16
    detail::RetryPolicy retry;

    static EmbedderSpec local_hashed(std::size_t dim = 512) {
        EmbedderSpec spec;
        spec.kind = EmbedderKind::LocalHashed;
        spec.dim = dim;
        return spec;
    }

    static EmbedderSpec remote(std::string endpoint) {
        EmbedderSpec spec;
        spec.kind = EmbedderKind::RemoteService;
        spec.endpoint = std::move(endpoint);
        return spec;
    }
};

/// Which tokenizer feeds the LocalHashed embedder: code goes through
/// code_subtokens, comments through comment_tokens. RemoteService embeds the
/// raw text either way.
enum class TextKind { Code, Comment };

enum class RetrievalStrategy { Token, Semantic, Random };

inline const char* to_label(RetrievalStrategy v) {
    switch (v) {
        case RetrievalStrategy::Token: return "token";
        case RetrievalStrategy::Semantic: return "semantic";
        case RetrievalStrategy::Random: return "random";
    }
    throw std::logic_error("unreachable strategy value");
}

inline RetrievalStrategy parse_strategy(std::string_view label) {
    if (label == "token") return RetrievalStrategy::Token;
    if (label == "semantic") return RetrievalStrategy::Semantic;
    if (label == "random") return RetrievalStrategy::Random;
    throw std::invalid_argument("unknown retrieval strategy '" + std::string(label) + "'");
}

struct ScoredEntry {
    CorpusEntry entry;
    double score = 0.0;
    std::size_t rank = 0; // 1-based
};

/// |a∩b| / |a∪b|. Both sets empty yields 1.0 by convention.
inline double jaccard(const SubTokenSet& a, const SubTokenSet& b) {
    if (a.tokens.empty() && b.tokens.empty()) return 1.0;
    std::size_t intersection = 0;
    auto ita = a.tokens.begin();
    auto itb = b.tokens.begin();
    while (ita != a.tokens.end() && itb != b.tokens.end()) {
        if (*ita < *itb) {
            ++ita;
        } else if (*itb < *ita) {
            ++itb;
        } else {
            ++intersection;
            ++ita;
            ++itb;
        }
    }
    const std::size_t unions = a.tokens.size() + b.tokens.size() - intersection;
    return static_cast<double>(intersection) / static_cast<double>(unions);
}

/// dot(u,v) / (|u||v|), clamped to [-1,1]. Zero-norm input yields 0 by
/// convention. Dimension mismatch is an error.
inline double cosine(const EmbeddingVector& u, const EmbeddingVector& v) {
    if (u.dim() != v.dim()) {
        throw std::invalid_argument("cosine: dimension mismatch (" + std::to_string(u.dim()) +
                                    " vs " + std::to_string(v.dim()) + ")");
    }
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.dim(); ++i) {
        dot += u.components[i] * v.components[i];
        nu += u.components[i] * u.components[i];
        nv += v.components[i] * v.components[i];
    }
    if (nu == 0.0 || nv == 0.0) return 0.0;
    const double value = dot / (std::sqrt(nu) * std::sqrt(nv));
    return std::clamp(value, -1.0, 1.0);
}

namespace detail {

// FNV-1a, 64-bit. Pinned so hashed-bag embeddings are identical everywhere.
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t hash = 14695981039346656037ULL;
    for (unsigned char c : s) {
        hash ^= c;
        hash *= 1099511628211ULL;
    }
    return hash;
}

inline EmbeddingVector hashed_bag(const std::vector<std::string>& tokens, std::size_t dim) {
    EmbeddingVector vec;
    vec.components.assign(dim, 0.0);
    for (const auto& token : tokens) {
        vec.components[fnv1a64(token) % dim] += 1.0;
    }
    double norm = 0.0;
    for (double c : vec.components) norm += c * c;
    if (norm > 0.0) {
        norm = std::sqrt(norm);
        for (double& c : vec.components) c /= norm;
    }
    return vec;
}

inline std::vector<std::string> embedding_tokens(const std::string& text, TextKind kind) {
    if (kind == TextKind::Comment) return comment_tokens(text);
    auto set = code_subtokens(text);
    return {set.tokens.begin(), set.tokens.end()};
}

} // namespace detail

/// One vector per text, order preserved. LocalHashed tokenizes per `kind`,
/// hashes each sub-token into one of dim buckets (FNV-1a 64-bit mod dim),
/// counts, and L2-normalizes; a text with no tokens maps to the zero vector.
/// RemoteService POSTs the raw texts to {endpoint}/embed and validates the
/// returned count and dimension.
inline std::vector<EmbeddingVector> embed(const EmbedderSpec& spec,
                                          const std::vector<std::string>& texts,
                                          TextKind kind = TextKind::Code) {
    if (texts.empty()) throw std::invalid_argument("embed: texts must be non-empty");

    if (spec.kind == EmbedderKind::LocalHashed) {
        if (spec.dim < 16) throw std::invalid_argument("LocalHashed embedder requires dim >= 16");
        std::vector<EmbeddingVector> out;
        out.reserve(texts.size());
        for (const auto& text : texts) {
            out.push_back(detail::hashed_bag(detail::embedding_tokens(text, kind), spec.dim));
        }
        return out;
    }

    if (spec.endpoint.empty()) throw std::invalid_argument("RemoteService embedder requires an endpoint");
    detail::require_network("remote embedding");

    nlohmann::ordered_json request;
    request["texts"] = texts;
    const std::string body = detail::post_json(spec.endpoint, "/embed", request.dump(), {}, spec.retry);

    nlohmann::json response;
    try {
        response = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error(std::string("embedding service returned invalid JSON: ") + e.what());
    }
    if (!response.contains("vectors") || !response["vectors"].is_array() ||
        !response.contains("dim") || !response["dim"].is_number_unsigned()) {
        throw std::runtime_error("embedding service response missing 'vectors' or 'dim'");
    }
    const std::size_t dim = response["dim"].get<std::size_t>();
    const auto& vectors = response["vectors"];
    if (vectors.size() != texts.size()) {
        throw std::runtime_error("embedding service returned " + std::to_string(vectors.size()) +
                                 " vectors for " + std::to_string(texts.size()) + " texts");
    }
    std::vector<EmbeddingVector> out;
    out.reserve(vectors.size());
    for (const auto& row : vectors) {
        EmbeddingVector vec;
        vec.components = row.get<std::vector<double>>();
        if (vec.dim() != dim) {
            throw std::runtime_error("embedding service returned a vector of dim " +
                                     std::to_string(vec.dim()) + ", expected " + std::to_string(dim));
        }
        out.push_back(std::move(vec));
    }
    return out;
}

/// Top-k corpus entries by similarity to the query code. Token scores with
/// Jaccard over sub-token sets, Semantic with cosine over embeddings, Random
/// returns sample_random results with score 0. Ties break by ascending
/// corpus position, so retrieve(k) is always a prefix of retrieve(k+1).
inline std::vector<ScoredEntry> retrieve(const Corpus& corpus, std::string_view query_code,
                                         std::size_t k, RetrievalStrategy strategy,
                                         const std::optional<EmbedderSpec>& embedder = std::nullopt,
                                         std::optional<std::uint64_t> seed = std::nullopt) {
    std::vector<ScoredEntry> out;
    if (k == 0) return out;

    if (strategy == RetrievalStrategy::Random) {
        if (!seed) throw std::invalid_argument("Random retrieval requires a seed");
        auto sampled = sample_random(corpus, k, *seed);
        out.reserve(sampled.size());
        for (std::size_t i = 0; i < sampled.size(); ++i) {
            out.push_back({std::move(sampled[i]), 0.0, i + 1});
        }
        return out;
    }

    std::vector<double> scores(corpus.size(), 0.0);
    if (strategy == RetrievalStrategy::Token) {
        const SubTokenSet query_set = code_subtokens(query_code);
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            scores[i] = jaccard(query_set, code_subtokens(corpus.entries[i].code));
        }
    } else {
        if (!embedder) throw std::invalid_argument("Semantic retrieval requires an embedder spec");
        if (corpus.empty()) return out;
        std::vector<std::string> texts;
        texts.reserve(corpus.size() + 1);
        texts.emplace_back(query_code);
        for (const auto& entry : corpus.entries) texts.push_back(entry.code);
        const auto vectors = embed(*embedder, texts, TextKind::Code);
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            scores[i] = cosine(vectors[0], vectors[i + 1]);
        }
    }

    std::vector<std::size_t> order(corpus.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });

    const std::size_t take = std::min(k, corpus.size());
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        out.push_back({corpus.entries[order[i]], scores[order[i]], i + 1});
    }
    return out;
}

} // namespace icsum
