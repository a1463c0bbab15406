// Minimal end-to-end walkthrough of the library: load a corpus, pick
// demonstrations for a query method, render the prompt, generate candidates
// with the offline echo backend, rerank them, and score the final pick.
//
// Usage: quickstart [corpus.jsonl]

#include <icsum/icsum.hpp>

#include <iostream>

int main(int argc, char** argv) {
    const std::string corpus_path = argc > 1 ? argv[1] : "samples/sample_corpus.jsonl";

    try {
        const icsum::Corpus corpus = icsum::load_corpus(corpus_path);
        const icsum::Corpus train = icsum::filter(corpus, icsum::Intent::What, icsum::Split::Train);
        std::cout << "loaded " << corpus.entries.size() << " entries, " << train.entries.size()
                  << " what/train demonstrations\n\n";

        const std::string query = "public int size() { return elementCount; }";

        // 1. Rank train entries by token similarity and keep the top two,
        //    most similar last, as the prompt demonstrations.
        const auto ranked = icsum::retrieve(corpus, query, 2, icsum::RetrievalStrategy::Token);
        icsum::PromptSpec spec;
        spec.intent = icsum::Intent::What;
        spec.query_code = query;
        for (auto it = ranked.rbegin(); it != ranked.rend(); ++it) {
            spec.demonstrations.push_back({it->entry.code, it->entry.comment});
        }
        const auto prompt = icsum::build_prompt(spec);
        std::cout << "--- prompt (" << prompt.estimated_tokens << " estimated tokens) ---\n"
                  << prompt.text << "\n--- end prompt ---\n\n";

        // 2. Generate candidates offline: the echo backend answers with the
        //    comment of the train entry most similar to the query.
        icsum::EchoNearestSpec backend;
        backend.corpus = train;
        icsum::SamplingParams sampling;
        sampling.n_samples = 3;
        const auto candidates = icsum::complete(backend, prompt, sampling);
        for (const auto& candidate : candidates) {
            std::cout << "candidate " << candidate.sample_index + 1 << ": " << candidate.text
                      << '\n';
        }

        // 3. Rerank against the comment of the most similar train method and
        //    score the winner against a reference.
        icsum::RerankSpec rerank_spec;
        rerank_spec.strategy = icsum::RerankStrategy::TokenRerank;
        const auto reference_comment = icsum::select_reference(
            train, query, rerank_spec.effective_reference_retrieval());
        const auto reranked = icsum::rerank(candidates, reference_comment, rerank_spec);
        const std::string& pick = reranked.front().candidate.text;
        std::cout << "\nfinal pick: " << pick << '\n';

        const auto scores =
            icsum::score_pair(pick, "Returns the number of elements currently stored in the buffer.");
        std::cout << "bleu=" << scores.bleu << " rouge_l=" << scores.rouge_l
                  << " meteor=" << scores.meteor << '\n';
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
