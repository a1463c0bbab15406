#pragma once

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "icsum/codetok.hpp"
#include "icsum/corpus.hpp"
#include "icsum/llm.hpp"
#include "icsum/retrieval.hpp"

namespace icsum {

enum class RerankStrategy { TokenRerank, SemanticRerank };

inline const char* to_label(RerankStrategy strategy) {
    return strategy == RerankStrategy::TokenRerank ? "token" : "semantic";
}

inline RerankStrategy parse_rerank_strategy(std::string_view label) {
    if (label == "token") return RerankStrategy::TokenRerank;
    if (label == "semantic") return RerankStrategy::SemanticRerank;
    throw std::invalid_argument("unknown rerank strategy: " + std::string(label));
}

struct RerankSpec {
    RerankStrategy strategy = RerankStrategy::TokenRerank;
    // Modality used to pick the reference comment; defaults pair token rerank
    // with token retrieval and semantic rerank with semantic retrieval.
    std::optional<RetrievalStrategy> reference_retrieval;
    std::optional<EmbedderSpec> embedder; // required for SemanticRerank

    RetrievalStrategy effective_reference_retrieval() const {
        if (reference_retrieval.has_value()) return *reference_retrieval;
        return strategy == RerankStrategy::TokenRerank ? RetrievalStrategy::Token
                                                       : RetrievalStrategy::Semantic;
    }
};

struct RankedCandidate {
    CandidateComment candidate;
    double similarity_to_reference = 0.0;
    std::size_t final_rank = 0; // 1-based
};

/// Comment of the corpus entry whose code is most similar to the query.
inline std::string select_reference(const Corpus& corpus, const std::string& query_code,
                                    RetrievalStrategy retrieval,
                                    const std::optional<EmbedderSpec>& embedder = std::nullopt) {
    if (corpus.empty()) throw std::invalid_argument("reference selection requires a non-empty corpus");
    if (retrieval == RetrievalStrategy::Random) {
        throw std::invalid_argument("reference selection must be token or semantic");
    }
    const auto top = retrieve(corpus, query_code, 1, retrieval, embedder);
    if (top.empty()) throw std::runtime_error("reference retrieval returned nothing");
    return top.front().entry.comment;
}

/// Orders candidates by similarity to the reference comment, most similar
/// first; equal scores keep sample order. Token similarity is Jaccard over
/// comment word sets; semantic similarity is embedding cosine.
inline std::vector<RankedCandidate> rerank(const std::vector<CandidateComment>& candidates,
                                           const std::string& reference, const RerankSpec& spec) {
    if (candidates.empty()) throw std::invalid_argument("rerank requires at least one candidate");

    std::vector<RankedCandidate> out;
    out.reserve(candidates.size());
    if (spec.strategy == RerankStrategy::TokenRerank) {
        const auto ref_tokens = comment_tokens(reference);
        const SubTokenSet ref_set{{ref_tokens.begin(), ref_tokens.end()}, std::nullopt};
        for (const auto& cand : candidates) {
            const auto cand_tokens = comment_tokens(cand.text);
            const SubTokenSet cand_set{{cand_tokens.begin(), cand_tokens.end()}, std::nullopt};
            out.push_back({cand, jaccard(cand_set, ref_set), 0});
        }
    } else {
        if (!spec.embedder.has_value()) {
            throw std::invalid_argument("semantic rerank requires an embedder");
        }
        std::vector<std::string> texts;
        texts.reserve(candidates.size() + 1);
        texts.push_back(reference);
        for (const auto& cand : candidates) texts.push_back(cand.text);
        const auto vectors = embed(*spec.embedder, texts, TextKind::Comment);
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            out.push_back({candidates[i], cosine(vectors[i + 1], vectors[0]), 0});
        }
    }

    std::stable_sort(out.begin(), out.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
        if (a.similarity_to_reference != b.similarity_to_reference) {
            return a.similarity_to_reference > b.similarity_to_reference;
        }
        return a.candidate.sample_index < b.candidate.sample_index;
    });
    for (std::size_t i = 0; i < out.size(); ++i) out[i].final_rank = i + 1;
    return out;
}

} // namespace icsum
