#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "icsum/codetok.hpp"
#include "icsum/corpus.hpp"

namespace icsum {

struct MetricScores {
    double bleu = 0.0;
    double rouge_l = 0.0;
    double meteor = 0.0;
};

struct MetricReport {
    std::vector<std::pair<std::string, MetricScores>> per_example; // (entry id, scores)
    std::optional<MetricScores> overall;                           // empty input -> nullopt
    std::map<Intent, MetricScores> per_intent;
};

namespace detail {

inline std::map<std::vector<std::string>, int> ngram_counts(const WordSequence& words,
                                                            std::size_t n) {
    std::map<std::vector<std::string>, int> counts;
    if (words.size() < n) return counts;
    for (std::size_t i = 0; i + n <= words.size(); ++i) {
        ++counts[std::vector<std::string>(words.begin() + i, words.begin() + i + n)];
    }
    return counts;
}

inline std::size_t lcs_length(const WordSequence& a, const WordSequence& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0);
    std::vector<std::size_t> curr(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            curr[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], curr[j - 1]);
        }
        std::swap(prev, curr);
    }
    return prev[b.size()];
}

} // namespace detail

/// Sentence-level BLEU-4 with clipped n-gram precisions. Zero-match counts
/// for n >= 2 are smoothed by adding one to both numerator and denominator;
/// a zero unigram precision (or an empty candidate) yields 0. Orders longer
/// than the candidate are left out of the geometric mean, whose weights stay
/// fixed at 1/4.
inline double bleu(const WordSequence& candidate, const WordSequence& reference) {
    if (candidate.empty()) return 0.0;
    const std::size_t c = candidate.size();
    const std::size_t r = reference.size();

    double log_sum = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
        if (n > c) break;
        const auto cand_counts = detail::ngram_counts(candidate, n);
        const auto ref_counts = detail::ngram_counts(reference, n);
        long matched = 0;
        long total = 0;
        for (const auto& [gram, count] : cand_counts) {
            total += count;
            const auto it = ref_counts.find(gram);
            if (it != ref_counts.end()) matched += std::min(count, it->second);
        }
        if (matched == 0) {
            if (n == 1) return 0.0;
            ++matched;
            ++total;
        }
        log_sum += 0.25 * std::log(static_cast<double>(matched) / static_cast<double>(total));
    }

    const double bp = c < r ? std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c)) : 1.0;
    return bp * std::exp(log_sum);
}

/// ROUGE-L F-score over the longest common subsequence, with beta = 1.2
/// weighting recall. Empty inputs (or no common subsequence) score 0.
inline double rouge_l(const WordSequence& candidate, const WordSequence& reference) {
    if (candidate.empty() || reference.empty()) return 0.0;
    const auto lcs = detail::lcs_length(candidate, reference);
    if (lcs == 0) return 0.0;
    const double p = static_cast<double>(lcs) / static_cast<double>(candidate.size());
    const double rr = static_cast<double>(lcs) / static_cast<double>(reference.size());
    constexpr double beta_sq = 1.2 * 1.2;
    return (1.0 + beta_sq) * p * rr / (rr + beta_sq * p);
}

/// METEOR restricted to exact unigram matching. Candidate words are aligned
/// left to right, each preferring the reference slot that continues the
/// current chunk and otherwise taking the earliest unused slot, so the match
/// count equals the multiset-intersection size. Score is the recall-weighted
/// harmonic mean Fmean = 10PR/(R+9P) scaled by the fragmentation penalty
/// 0.5*(chunks/matches)^3.
inline double meteor(const WordSequence& candidate, const WordSequence& reference) {
    if (candidate.empty() || reference.empty()) return 0.0;

    std::map<std::string, std::vector<std::size_t>> ref_slots; // word -> unused positions, ascending
    for (std::size_t j = 0; j < reference.size(); ++j) ref_slots[reference[j]].push_back(j);
    std::vector<bool> used(reference.size(), false);

    std::size_t matches = 0;
    std::size_t chunks = 0;
    bool have_prev = false;
    std::size_t prev_cand = 0;
    std::size_t prev_ref = 0;
    for (std::size_t i = 0; i < candidate.size(); ++i) {
        const auto it = ref_slots.find(candidate[i]);
        if (it == ref_slots.end()) continue;
        auto& slots = it->second;
        while (!slots.empty() && used[slots.front()]) slots.erase(slots.begin());
        if (slots.empty()) continue;

        std::size_t j = slots.front();
        const bool adjacent = have_prev && i == prev_cand + 1;
        if (adjacent && prev_ref + 1 < reference.size() && !used[prev_ref + 1] &&
            reference[prev_ref + 1] == candidate[i]) {
            j = prev_ref + 1; // continue the current chunk
        }
        used[j] = true;
        ++matches;
        if (!(adjacent && j == prev_ref + 1)) ++chunks;
        have_prev = true;
        prev_cand = i;
        prev_ref = j;
    }
    if (matches == 0) return 0.0;

    const double p = static_cast<double>(matches) / static_cast<double>(candidate.size());
    const double rr = static_cast<double>(matches) / static_cast<double>(reference.size());
    const double fmean = 10.0 * p * rr / (rr + 9.0 * p);
    const double frag = static_cast<double>(chunks) / static_cast<double>(matches);
    return fmean * (1.0 - 0.5 * frag * frag * frag);
}

/// Tokenizes both strings as comments and applies all three metrics.
inline MetricScores score_pair(const std::string& candidate, const std::string& reference) {
    const WordSequence cand = comment_tokens(candidate);
    const WordSequence ref = comment_tokens(reference);
    return {bleu(cand, ref), rouge_l(cand, ref), meteor(cand, ref)};
}

struct ScoredExample {
    std::string id;
    Intent intent = Intent::What;
    MetricScores scores;
};

/// Arithmetic means of per-example scores, overall and per intent.
inline MetricReport aggregate(const std::vector<ScoredExample>& examples) {
    MetricReport report;
    if (examples.empty()) return report;

    MetricScores total;
    std::map<Intent, MetricScores> intent_totals;
    std::map<Intent, std::size_t> intent_counts;
    for (const auto& ex : examples) {
        report.per_example.emplace_back(ex.id, ex.scores);
        total.bleu += ex.scores.bleu;
        total.rouge_l += ex.scores.rouge_l;
        total.meteor += ex.scores.meteor;
        auto& it = intent_totals[ex.intent];
        it.bleu += ex.scores.bleu;
        it.rouge_l += ex.scores.rouge_l;
        it.meteor += ex.scores.meteor;
        ++intent_counts[ex.intent];
    }

    const auto n = static_cast<double>(examples.size());
    report.overall = MetricScores{total.bleu / n, total.rouge_l / n, total.meteor / n};
    for (const auto& [intent, sums] : intent_totals) {
        const auto k = static_cast<double>(intent_counts[intent]);
        report.per_intent[intent] = MetricScores{sums.bleu / k, sums.rouge_l / k, sums.meteor / k};
    }
    return report;
}

} // namespace icsum
