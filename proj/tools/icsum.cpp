// Command-line front end for the comment-generation toolkit.
//
// Subcommands:
//   ingest      validate a corpus file and print per-intent/per-split counts
//   retrieve    rank corpus entries by similarity to a query method
//   prompt      render the few-shot prompt for a query method
//   generate    run one query end-to-end and print candidates plus final pick
//   evaluate    score line-aligned candidate/reference files
//   experiment  run a full configuration grid and export result rows

#include <icsum/icsum.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

namespace {

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

icsum::Corpus load_corpus_verbose(const std::string& path) {
    return icsum::load_corpus(path, [](const std::string& warning) {
        std::cerr << "warning: " << warning << '\n';
    });
}

/// Query code with surrounding whitespace trimmed, so a trailing newline in
/// the file does not leak into the prompt.
std::string load_query_code(const std::string& path) {
    const std::string raw = read_text_file(path);
    const auto trimmed = icsum::detail::trim(raw);
    if (trimmed.empty()) throw std::runtime_error("query file is empty: " + path);
    return std::string(trimmed);
}

struct EmbedderOptions {
    std::string remote_endpoint;
    std::size_t local_dim = 512;

    std::optional<icsum::EmbedderSpec> resolve(bool required) const {
        if (!remote_endpoint.empty()) return icsum::EmbedderSpec::remote(remote_endpoint);
        if (required) return icsum::EmbedderSpec::local_hashed(local_dim);
        return std::nullopt;
    }
};

void add_embedder_options(CLI::App* cmd, EmbedderOptions& options) {
    cmd->add_option("--embed-endpoint", options.remote_endpoint,
                    "Remote embedding service base URL (default: local hashed embedder)");
    cmd->add_option("--embed-dim", options.local_dim,
                    "Dimensionality of the local hashed embedder (>= 16)")
        ->default_val(512);
}

/// Demonstrations for a query: intent-filtered train entries ranked by the
/// selection strategy, reordered so the most similar example sits last.
std::vector<icsum::Demonstration> select_demonstrations(
    const icsum::Corpus& train, const std::string& query_code, icsum::Intent intent,
    std::size_t shots, icsum::RetrievalStrategy selection,
    const std::optional<icsum::EmbedderSpec>& embedder, std::optional<std::uint64_t> seed) {
    const icsum::Corpus pool = icsum::filter(train, intent, icsum::Split::Train);
    if (pool.entries.empty()) {
        throw std::runtime_error(std::string("no train entries with intent '") + icsum::to_label(intent) +
                                 "'");
    }
    const auto ranked = icsum::retrieve(pool, query_code, shots, selection, embedder, seed);
    std::vector<icsum::Demonstration> demos;
    demos.reserve(ranked.size());
    for (auto it = ranked.rbegin(); it != ranked.rend(); ++it) {
        demos.push_back({it->entry.code, it->entry.comment});
    }
    return demos;
}

nlohmann::ordered_json scores_to_json(const icsum::MetricScores& scores) {
    return {{"bleu", scores.bleu}, {"rouge_l", scores.rouge_l}, {"meteor", scores.meteor}};
}

int run_ingest(const std::string& corpus_path) {
    const auto corpus = load_corpus_verbose(corpus_path);
    std::map<std::string, std::size_t> by_intent;
    std::map<std::string, std::size_t> by_split;
    for (const auto& entry : corpus.entries) {
        ++by_intent[icsum::to_label(entry.intent)];
        ++by_split[icsum::to_label(entry.split)];
    }
    nlohmann::ordered_json report;
    report["path"] = corpus_path;
    report["entries"] = corpus.entries.size();
    report["by_intent"] = by_intent;
    report["by_split"] = by_split;
    std::cout << report.dump(2) << '\n';
    return 0;
}

int run_retrieve(const std::string& corpus_path, const std::string& code_file,
                 const std::string& strategy_name, std::size_t k,
                 std::optional<std::uint64_t> seed, const EmbedderOptions& embedder_options) {
    const auto corpus = load_corpus_verbose(corpus_path);
    const auto strategy = icsum::parse_strategy(strategy_name);
    const auto embedder =
        embedder_options.resolve(strategy == icsum::RetrievalStrategy::Semantic);
    const auto query = load_query_code(code_file);
    const auto ranked = icsum::retrieve(corpus, query, k, strategy, embedder, seed);

    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const auto& hit : ranked) {
        out.push_back({{"rank", hit.rank}, {"id", hit.entry.id}, {"score", hit.score}});
    }
    std::cout << out.dump(2) << '\n';
    return 0;
}

int run_prompt(const std::string& corpus_path, const std::string& code_file,
               const std::string& intent_name, std::size_t shots,
               const std::string& strategy_name, std::optional<std::uint64_t> seed,
               const EmbedderOptions& embedder_options, std::size_t window_limit,
               const std::string& language) {
    const auto corpus = load_corpus_verbose(corpus_path);
    const auto intent = icsum::parse_intent(intent_name);
    const auto strategy = icsum::parse_strategy(strategy_name);
    const auto embedder =
        embedder_options.resolve(strategy == icsum::RetrievalStrategy::Semantic);

    icsum::PromptSpec spec;
    spec.intent = intent;
    spec.language_name = language;
    spec.query_code = load_query_code(code_file);
    spec.window_limit = window_limit;
    if (shots > 0) {
        spec.demonstrations =
            select_demonstrations(corpus, spec.query_code, intent, shots, strategy, embedder, seed);
    }
    const auto prompt = icsum::build_prompt(spec);
    std::cout << prompt.text;
    std::cerr << "\n[" << prompt.shots_used << " shots, ~" << prompt.estimated_tokens
              << " tokens]\n";
    return 0;
}

int run_generate(const std::string& train_path, const std::string& code_file,
                 const std::string& intent_name, std::size_t shots,
                 const std::string& strategy_name, const std::string& rerank_name,
                 std::optional<std::uint64_t> seed, const EmbedderOptions& embedder_options,
                 const icsum::SamplingParams& sampling, const std::string& backend_name,
                 const std::string& base_url, const std::string& model,
                 const std::string& api_key_env, int rate_limit_rpm) {
    const auto train = load_corpus_verbose(train_path);
    const auto intent = icsum::parse_intent(intent_name);
    const auto strategy = icsum::parse_strategy(strategy_name);
    const auto rerank_option = icsum::parse_rerank_option(rerank_name);
    const bool needs_embedder = strategy == icsum::RetrievalStrategy::Semantic ||
                                rerank_option == icsum::RerankOption::SemanticRerank;
    const auto embedder = embedder_options.resolve(needs_embedder);

    const std::string query = load_query_code(code_file);
    const icsum::Corpus pool = icsum::filter(train, intent, icsum::Split::Train);
    if (pool.entries.empty()) {
        throw std::runtime_error(std::string("no train entries with intent '") + icsum::to_label(intent) +
                                 "'");
    }

    icsum::PromptSpec prompt_spec;
    prompt_spec.intent = intent;
    prompt_spec.query_code = query;
    if (shots > 0) {
        prompt_spec.demonstrations =
            select_demonstrations(train, query, intent, shots, strategy, embedder, seed);
    }
    const auto prompt = icsum::build_prompt(prompt_spec);

    icsum::BackendSpec backend;
    if (backend_name == "echo") {
        icsum::EchoNearestSpec echo;
        echo.corpus = pool;
        echo.strategy = strategy == icsum::RetrievalStrategy::Random
                            ? icsum::RetrievalStrategy::Token
                            : strategy;
        echo.embedder = embedder;
        echo.seed = seed;
        backend = echo;
    } else if (backend_name == "remote") {
        icsum::RemoteCompletionSpec remote;
        remote.base_url = base_url;
        remote.model = model;
        remote.api_key_env = api_key_env;
        remote.rate_limit_rpm = rate_limit_rpm;
        backend = remote;
    } else {
        throw CLI::ValidationError("--backend must be 'echo' or 'remote'");
    }

    const auto candidates = icsum::complete(backend, prompt, sampling);
    for (const auto& candidate : candidates) {
        std::cout << "candidate " << candidate.sample_index + 1 << ": " << candidate.text << '\n';
    }

    std::string final_pick = candidates.front().text;
    if (rerank_option != icsum::RerankOption::None) {
        icsum::RerankSpec rerank_spec;
        rerank_spec.strategy = rerank_option == icsum::RerankOption::TokenRerank
                                   ? icsum::RerankStrategy::TokenRerank
                                   : icsum::RerankStrategy::SemanticRerank;
        rerank_spec.embedder = embedder;
        const auto reference = icsum::select_reference(
            pool, query, rerank_spec.effective_reference_retrieval(), embedder);
        const auto ranked = icsum::rerank(candidates, reference, rerank_spec);
        final_pick = ranked.front().candidate.text;
        std::cout << "reference: " << reference << '\n';
    }
    std::cout << "final: " << final_pick << '\n';
    return 0;
}

int run_evaluate(const std::string& candidates_path, const std::string& references_path) {
    const auto candidates = read_lines(candidates_path);
    const auto references = read_lines(references_path);
    if (candidates.size() != references.size()) {
        throw std::runtime_error("line count mismatch: " + std::to_string(candidates.size()) +
                                 " candidates vs " + std::to_string(references.size()) +
                                 " references");
    }
    if (candidates.empty()) throw std::runtime_error("no lines to evaluate");

    std::vector<icsum::ScoredExample> examples;
    examples.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        examples.push_back({"line" + std::to_string(i + 1), icsum::Intent::What,
                            icsum::score_pair(candidates[i], references[i])});
    }
    const auto report = icsum::aggregate(examples);

    nlohmann::ordered_json out;
    out["per_example"] = nlohmann::ordered_json::array();
    for (const auto& [id, scores] : report.per_example) {
        out["per_example"].push_back(
            {{"id", id}, {"bleu", scores.bleu}, {"rouge_l", scores.rouge_l}, {"meteor", scores.meteor}});
    }
    out["overall"] = report.overall ? scores_to_json(*report.overall) : nlohmann::ordered_json();
    std::cout << out.dump(2) << '\n';
    return 0;
}

int run_experiment_cmd(const std::string& config_path, const std::string& out_path,
                       const std::string& format_name) {
    const auto format = icsum::parse_export_format(format_name);
    auto config = icsum::load_experiment_config(config_path);
    const auto result = icsum::run_experiment(std::move(config));

    if (!result.rows.empty()) {
        icsum::export_rows(result.rows, format, out_path);
        const std::filesystem::path out(out_path);
        const auto summary_path =
            (out.parent_path() / (out.stem().string() + ".summary" + out.extension().string()))
                .string();
        icsum::export_rows(result.summary, format, summary_path);
        std::cout << "wrote " << result.rows.size() << " rows to " << out_path << '\n';
        std::cout << "wrote " << result.summary.size() << " summary rows to " << summary_path
                  << '\n';
    }
    for (const auto& row : result.summary) {
        std::cout << icsum::to_label(row.cell.intent) << " shots=" << row.cell.shots
                  << " selection=" << icsum::to_label(row.cell.selection)
                  << " rerank=" << icsum::to_label(row.cell.rerank) << "  bleu=" << row.means.bleu
                  << " rouge_l=" << row.means.rouge_l << " meteor=" << row.means.meteor << '\n';
    }
    if (!result.failures.empty()) {
        for (const auto& failure : result.failures) {
            std::cerr << "cell failed: intent=" << icsum::to_label(failure.cell.intent)
                      << " shots=" << failure.cell.shots
                      << " selection=" << icsum::to_label(failure.cell.selection)
                      << " rerank=" << icsum::to_label(failure.cell.rerank)
                      << " repetition=" << failure.repetition << ": " << failure.message << '\n';
        }
        return 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Intent-aware code comment generation via retrieval-augmented prompting"};
    app.require_subcommand(1);

    // ingest
    std::string ingest_corpus;
    auto* ingest = app.add_subcommand("ingest", "Validate a corpus file and print counts");
    ingest->add_option("--corpus", ingest_corpus, "Corpus file (one JSON object per line)")
        ->required();

    // retrieve
    std::string retrieve_corpus, retrieve_code, retrieve_strategy = "token";
    std::size_t retrieve_k = 5;
    std::optional<std::uint64_t> retrieve_seed;
    EmbedderOptions retrieve_embedder;
    auto* retrieve = app.add_subcommand("retrieve", "Rank corpus entries by similarity to a query");
    retrieve->add_option("--corpus", retrieve_corpus, "Corpus file")->required();
    retrieve->add_option("--code-file", retrieve_code, "File holding the query method")->required();
    retrieve->add_option("--strategy", retrieve_strategy, "token | semantic | random")
        ->default_val("token");
    retrieve->add_option("--k", retrieve_k, "Number of results")->default_val(5);
    retrieve->add_option("--seed", retrieve_seed, "Seed (required for --strategy random)");
    add_embedder_options(retrieve, retrieve_embedder);

    // prompt
    std::string prompt_corpus, prompt_code, prompt_intent = "what", prompt_strategy = "token";
    std::string prompt_language = "Java";
    std::size_t prompt_shots = 5, prompt_window = 8000;
    std::optional<std::uint64_t> prompt_seed;
    EmbedderOptions prompt_embedder;
    auto* prompt = app.add_subcommand("prompt", "Render the few-shot prompt for a query");
    prompt->add_option("--corpus", prompt_corpus, "Corpus file supplying demonstrations")
        ->required();
    prompt->add_option("--code-file", prompt_code, "File holding the query method")->required();
    prompt->add_option("--intent", prompt_intent,
                       "what | why | how-to-use | how-it-is-done | property")
        ->default_val("what");
    prompt->add_option("--shots", prompt_shots, "Demonstrations to include (0, 1, 5, 10, ...)")
        ->default_val(5);
    prompt->add_option("--selection", prompt_strategy, "token | semantic | random")
        ->default_val("token");
    prompt->add_option("--seed", prompt_seed, "Seed (required for --selection random)");
    prompt->add_option("--window-limit", prompt_window, "Prompt budget in estimated tokens")
        ->default_val(8000);
    prompt->add_option("--language", prompt_language, "Language tag for the prompt header")
        ->default_val("Java");
    add_embedder_options(prompt, prompt_embedder);

    // generate
    std::string gen_train, gen_code, gen_intent = "what", gen_strategy = "token";
    std::string gen_rerank = "none", gen_backend = "echo";
    std::string gen_base_url, gen_model, gen_api_key_env;
    std::size_t gen_shots = 5;
    int gen_rpm = 0;
    std::optional<std::uint64_t> gen_seed;
    EmbedderOptions gen_embedder;
    icsum::SamplingParams gen_sampling;
    auto* generate = app.add_subcommand("generate", "Run one query end-to-end");
    generate->add_option("--train", gen_train, "Train corpus file")->required();
    generate->add_option("--code-file", gen_code, "File holding the query method")->required();
    generate->add_option("--intent", gen_intent, "Target intent")->default_val("what");
    generate->add_option("--shots", gen_shots, "Demonstrations to include")->default_val(5);
    generate->add_option("--selection", gen_strategy, "token | semantic | random")
        ->default_val("token");
    generate->add_option("--rerank", gen_rerank, "none | token | semantic")->default_val("none");
    generate->add_option("--seed", gen_seed, "Seed for random selection");
    generate->add_option("--backend", gen_backend, "echo | remote")->default_val("echo");
    generate->add_option("--base-url", gen_base_url, "Remote completion service base URL");
    generate->add_option("--model", gen_model, "Remote model name");
    generate->add_option("--api-key-env", gen_api_key_env,
                         "Name of the environment variable holding the API credential");
    generate->add_option("--rate-limit-rpm", gen_rpm, "Requests per minute (0 = unlimited)")
        ->default_val(0);
    generate->add_option("--n-samples", gen_sampling.n_samples, "Samples per query")
        ->default_val(10);
    generate->add_option("--temperature", gen_sampling.temperature, "Sampling temperature")
        ->default_val(0.5);
    generate->add_option("--max-tokens", gen_sampling.max_output_tokens, "Max output tokens")
        ->default_val(64);
    add_embedder_options(generate, gen_embedder);

    // evaluate
    std::string eval_candidates, eval_references;
    auto* evaluate = app.add_subcommand("evaluate", "Score line-aligned candidate/reference files");
    evaluate->add_option("--candidates-file", eval_candidates, "One candidate comment per line")
        ->required();
    evaluate->add_option("--references-file", eval_references, "One reference comment per line")
        ->required();

    // experiment
    std::string exp_config, exp_out, exp_format = "json";
    auto* experiment = app.add_subcommand("experiment", "Run a configuration grid from a file");
    experiment->add_option("--config", exp_config, "Experiment configuration file")->required();
    experiment->add_option("--out", exp_out, "Output path for per-repetition rows")->required();
    experiment->add_option("--format", exp_format, "json | csv")->default_val("json");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(ingest)) return run_ingest(ingest_corpus);
        if (app.got_subcommand(retrieve)) {
            return run_retrieve(retrieve_corpus, retrieve_code, retrieve_strategy, retrieve_k,
                                retrieve_seed, retrieve_embedder);
        }
        if (app.got_subcommand(prompt)) {
            return run_prompt(prompt_corpus, prompt_code, prompt_intent, prompt_shots,
                              prompt_strategy, prompt_seed, prompt_embedder, prompt_window,
                              prompt_language);
        }
        if (app.got_subcommand(generate)) {
            return run_generate(gen_train, gen_code, gen_intent, gen_shots, gen_strategy,
                                gen_rerank, gen_seed, gen_embedder, gen_sampling, gen_backend,
                                gen_base_url, gen_model, gen_api_key_env, gen_rpm);
        }
        if (app.got_subcommand(evaluate)) return run_evaluate(eval_candidates, eval_references);
        if (app.got_subcommand(experiment)) {
            return run_experiment_cmd(exp_config, exp_out, exp_format);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
