#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "icsum/corpus.hpp"
#include "icsum/llm.hpp"
#include "icsum/metrics.hpp"
#include "icsum/prompt.hpp"
#include "icsum/rerank.hpp"
#include "icsum/retrieval.hpp"

namespace icsum {

enum class RerankOption { None, TokenRerank, SemanticRerank };

inline const char* to_label(RerankOption option) {
    switch (option) {
        case RerankOption::None: return "none";
        case RerankOption::TokenRerank: return "token";
        case RerankOption::SemanticRerank: return "semantic";
    }
    throw std::logic_error("unreachable");
}

inline RerankOption parse_rerank_option(std::string_view label) {
    if (label == "none") return RerankOption::None;
    if (label == "token") return RerankOption::TokenRerank;
    if (label == "semantic") return RerankOption::SemanticRerank;
    throw std::invalid_argument("unknown rerank option: " + std::string(label));
}

struct ExperimentConfig {
    std::string train_path;
    std::string test_path;
    std::vector<Intent> intents;               // generation targets; never Others
    std::vector<int> shots;                    // subset of {0, 1, 5, 10}
    std::vector<RetrievalStrategy> selection;  // demonstration selection strategies
    std::vector<RerankOption> rerank;
    std::size_t repetitions = 1;
    std::uint64_t seed = 0;
    BackendSpec backend = ScriptedSpec{};
    std::optional<EmbedderSpec> embedder;
    SamplingParams sampling;
    std::optional<std::size_t> max_test_examples;
    std::size_t parallelism = 1; // concurrent cell-repetition units
};

/// One point of the experiment grid.
struct CellSpec {
    Intent intent = Intent::What;
    int shots = 0;
    RetrievalStrategy selection = RetrievalStrategy::Token;
    RerankOption rerank = RerankOption::None;

    friend bool operator<(const CellSpec& a, const CellSpec& b) {
        return std::tuple(a.intent, a.shots, a.selection, a.rerank) <
               std::tuple(b.intent, b.shots, b.selection, b.rerank);
    }
    friend bool operator==(const CellSpec& a, const CellSpec& b) {
        return std::tuple(a.intent, a.shots, a.selection, a.rerank) ==
               std::tuple(b.intent, b.shots, b.selection, b.rerank);
    }
};

/// Scores for one cell at one repetition; repetition -1 marks a summary row
/// (the mean over that cell's repetitions).
struct ResultRow {
    CellSpec cell;
    long repetition = 0;
    MetricScores means;
    std::size_t n_examples = 0;
};

struct CellFailure {
    CellSpec cell;
    long repetition = 0;
    std::string message;
};

struct ExperimentResult {
    std::vector<ResultRow> rows;     // one per successful cell x repetition
    std::vector<ResultRow> summary;  // one per cell with >= 1 successful repetition
    std::vector<CellFailure> failures;
};

namespace detail {

template <typename T>
void sort_unique(std::vector<T>& values) {
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
}

inline bool is_remote_backend(const BackendSpec& backend) {
    return std::holds_alternative<RemoteCompletionSpec>(backend);
}

inline bool is_remote_embedder(const std::optional<EmbedderSpec>& embedder) {
    return embedder.has_value() && embedder->kind == EmbedderKind::RemoteService;
}

} // namespace detail

/// Normalizes the grid lists (sorted, deduplicated) and rejects invalid
/// combinations. Fails fast when NO_NETWORK=1 is set but a remote component
/// is configured.
inline void validate_config(ExperimentConfig& config) {
    if (config.train_path.empty() || config.test_path.empty()) {
        throw std::invalid_argument("config requires train and test corpus paths");
    }
    if (config.intents.empty()) throw std::invalid_argument("config requires at least one intent");
    for (const Intent intent : config.intents) {
        if (intent == Intent::Others) {
            throw std::invalid_argument("intent 'others' is not a generation target");
        }
    }
    if (config.shots.empty()) throw std::invalid_argument("config requires at least one shot count");
    for (const int shots : config.shots) {
        if (shots != 0 && shots != 1 && shots != 5 && shots != 10) {
            throw std::invalid_argument("shots must be one of 0, 1, 5, 10");
        }
    }
    if (config.selection.empty()) {
        throw std::invalid_argument("config requires at least one selection strategy");
    }
    if (config.rerank.empty()) config.rerank.push_back(RerankOption::None);

    detail::sort_unique(config.intents);
    detail::sort_unique(config.shots);
    detail::sort_unique(config.selection);
    detail::sort_unique(config.rerank);

    const bool zero_shot_only = config.shots.size() == 1 && config.shots.front() == 0;
    const bool random_only =
        config.selection.size() == 1 && config.selection.front() == RetrievalStrategy::Random;
    if (zero_shot_only && !random_only) {
        throw std::invalid_argument(
            "shots = {0} only makes sense with selection = {random}: no demonstrations are chosen");
    }

    const bool needs_embedder =
        std::count(config.selection.begin(), config.selection.end(), RetrievalStrategy::Semantic) >
            0 ||
        std::count(config.rerank.begin(), config.rerank.end(), RerankOption::SemanticRerank) > 0;
    if (needs_embedder && !config.embedder.has_value()) {
        throw std::invalid_argument("semantic selection or semantic rerank requires an embedder");
    }

    if (config.repetitions < 1) throw std::invalid_argument("repetitions must be at least 1");
    if (config.parallelism < 1) throw std::invalid_argument("parallelism must be at least 1");
    if (config.sampling.n_samples < 1 || config.sampling.n_samples > 100) {
        throw std::invalid_argument("n_samples must be between 1 and 100");
    }
    if (config.sampling.temperature < 0) {
        throw std::invalid_argument("temperature must be non-negative");
    }
    if (config.sampling.max_output_tokens < 1) {
        throw std::invalid_argument("max_output_tokens must be at least 1");
    }

    if (const auto* scripted = std::get_if<ScriptedSpec>(&config.backend)) {
        if (scripted->script.empty()) {
            throw std::invalid_argument("scripted backend requires a non-empty script");
        }
    }
    if (detail::no_network() &&
        (detail::is_remote_backend(config.backend) || detail::is_remote_embedder(config.embedder))) {
        throw std::runtime_error(
            "NO_NETWORK=1 is set but the config names a remote backend or embedder");
    }
}

inline std::vector<CellSpec> enumerate_cells(const ExperimentConfig& config) {
    std::vector<CellSpec> cells;
    for (const Intent intent : config.intents) {
        for (const int shots : config.shots) {
            for (const RetrievalStrategy selection : config.selection) {
                for (const RerankOption rerank : config.rerank) {
                    cells.push_back({intent, shots, selection, rerank});
                }
            }
        }
    }
    std::sort(cells.begin(), cells.end());
    return cells;
}

namespace detail {

/// An EchoNearest backend with no corpus bound is completed by the harness:
/// it echoes from the cell's demonstration pool using the cell's selection
/// strategy, so similarity-based cells echo the nearest train comment while
/// random cells echo an arbitrary one.
inline BackendSpec bind_backend(const BackendSpec& backend, const Corpus& train_pool,
                                const CellSpec& cell, const ExperimentConfig& config,
                                std::uint64_t repetition_seed) {
    const auto* echo = std::get_if<EchoNearestSpec>(&backend);
    if (echo == nullptr || echo->corpus.has_value()) return backend;
    EchoNearestSpec bound = *echo;
    bound.corpus = train_pool;
    bound.strategy = cell.selection;
    bound.embedder = config.embedder;
    bound.seed = repetition_seed;
    return bound;
}

} // namespace detail

/// Runs one grid cell at one repetition: for every test entry of the cell's
/// intent, select demonstrations from same-intent train entries, render the
/// prompt (most similar demonstration last), sample candidates, pick the
/// first sample or the rerank winner, and score it against the reference.
inline ResultRow run_cell(const Corpus& train, const Corpus& test, const ExperimentConfig& config,
                          const CellSpec& cell, std::size_t repetition) {
    const std::uint64_t repetition_seed = config.seed + repetition;

    const Corpus train_pool = filter(train, cell.intent, Split::Train);
    const Corpus test_pool = filter(test, cell.intent, Split::Test);
    if (test_pool.empty()) {
        throw std::runtime_error(std::string("no test entries with intent '") + to_label(cell.intent) + "'");
    }
    if (cell.shots > 0 && train_pool.empty()) {
        throw std::runtime_error(std::string("no train entries with intent '") + to_label(cell.intent) + "'");
    }

    std::size_t n_test = test_pool.size();
    if (config.max_test_examples.has_value()) n_test = std::min(n_test, *config.max_test_examples);

    // Random selection redraws once per repetition; the draw is shared by
    // every test entry in the cell.
    std::vector<ScoredEntry> random_demos;
    if (cell.shots > 0 && cell.selection == RetrievalStrategy::Random) {
        random_demos = retrieve(train_pool, "", static_cast<std::size_t>(cell.shots),
                                RetrievalStrategy::Random, std::nullopt, repetition_seed);
    }

    CompletionBackend backend(
        detail::bind_backend(config.backend, train_pool, cell, config, repetition_seed));

    std::vector<ScoredExample> scored;
    scored.reserve(n_test);
    for (std::size_t t = 0; t < n_test; ++t) {
        const CorpusEntry& entry = test_pool.entries[t];
        const char* stage = "retrieval";
        try {
            std::vector<ScoredEntry> demos;
            if (cell.shots > 0) {
                demos = cell.selection == RetrievalStrategy::Random
                            ? random_demos
                            : retrieve(train_pool, entry.code, static_cast<std::size_t>(cell.shots),
                                       cell.selection, config.embedder);
            }
            for (const auto& demo : demos) {
                if (demo.entry.intent != cell.intent) {
                    throw std::logic_error(std::string("demonstration pool leaked intent '") +
                                           to_label(demo.entry.intent) + "'");
                }
            }

            stage = "prompt";
            PromptSpec prompt_spec;
            prompt_spec.intent = cell.intent;
            prompt_spec.query_code = entry.code;
            for (auto it = demos.rbegin(); it != demos.rend(); ++it) { // most similar last
                prompt_spec.demonstrations.push_back({it->entry.code, it->entry.comment});
            }
            const RenderedPrompt prompt = build_prompt(prompt_spec);

            stage = "generation";
            const auto candidates = backend.complete(prompt, config.sampling);

            stage = "rerank";
            CandidateComment pick;
            if (cell.rerank == RerankOption::None) {
                pick = candidates.front();
            } else {
                RerankSpec rerank_spec;
                rerank_spec.strategy = cell.rerank == RerankOption::TokenRerank
                                           ? RerankStrategy::TokenRerank
                                           : RerankStrategy::SemanticRerank;
                rerank_spec.embedder = config.embedder;
                const std::string reference =
                    select_reference(train_pool, entry.code,
                                     rerank_spec.effective_reference_retrieval(), config.embedder);
                pick = rerank(candidates, reference, rerank_spec).front().candidate;
            }

            stage = "scoring";
            scored.push_back({entry.id, entry.intent, score_pair(pick.text, entry.comment)});
        } catch (const std::exception& e) {
            throw std::runtime_error("entry '" + entry.id + "' failed during " + stage + ": " +
                                     e.what());
        }
    }

    const MetricReport report = aggregate(scored);
    ResultRow row;
    row.cell = cell;
    row.repetition = static_cast<long>(repetition);
    row.means = report.overall.value();
    row.n_examples = scored.size();
    return row;
}

/// Runs the full grid: every cell at every repetition (seed + repetition
/// index), optionally several units in flight at once. Failures are recorded
/// per cell-repetition rather than aborting the sweep. Rows come back in
/// canonical order (intent, shots, selection, rerank, repetition) followed by
/// per-cell summary rows with repetition -1.
inline ExperimentResult run_experiment(const ExperimentConfig& validated_config,
                                       const Corpus& train, const Corpus& test) {
    const ExperimentConfig& config = validated_config;
    const std::vector<CellSpec> cells = enumerate_cells(config);

    struct Unit {
        CellSpec cell;
        std::size_t repetition;
    };
    std::vector<Unit> units;
    units.reserve(cells.size() * config.repetitions);
    for (const auto& cell : cells) {
        for (std::size_t rep = 0; rep < config.repetitions; ++rep) units.push_back({cell, rep});
    }

    ExperimentResult result;
    auto run_unit = [&](const Unit& unit) {
        return run_cell(train, test, config, unit.cell, unit.repetition);
    };
    auto record_unit = [&](const Unit& unit, auto&& obtain) {
        try {
            result.rows.push_back(obtain());
        } catch (const std::exception& e) {
            result.failures.push_back({unit.cell, static_cast<long>(unit.repetition), e.what()});
        }
    };

    if (config.parallelism <= 1) {
        for (const auto& unit : units) {
            record_unit(unit, [&] { return run_unit(unit); });
        }
    } else {
        for (std::size_t begin = 0; begin < units.size(); begin += config.parallelism) {
            const std::size_t end = std::min(begin + config.parallelism, units.size());
            std::vector<std::future<ResultRow>> batch;
            batch.reserve(end - begin);
            for (std::size_t i = begin; i < end; ++i) {
                batch.push_back(std::async(std::launch::async, run_unit, units[i]));
            }
            for (std::size_t i = begin; i < end; ++i) {
                record_unit(units[i], [&] { return batch[i - begin].get(); });
            }
        }
    }

    const auto canonical = [](const ResultRow& a, const ResultRow& b) {
        return std::tuple(a.cell, a.repetition) < std::tuple(b.cell, b.repetition);
    };
    std::sort(result.rows.begin(), result.rows.end(), canonical);
    std::sort(result.failures.begin(), result.failures.end(),
              [](const CellFailure& a, const CellFailure& b) {
                  return std::tuple(a.cell, a.repetition) < std::tuple(b.cell, b.repetition);
              });

    for (const auto& cell : cells) {
        MetricScores total;
        std::size_t count = 0;
        std::size_t n_examples = 0;
        for (const auto& row : result.rows) {
            if (!(row.cell == cell)) continue;
            total.bleu += row.means.bleu;
            total.rouge_l += row.means.rouge_l;
            total.meteor += row.means.meteor;
            n_examples = row.n_examples;
            ++count;
        }
        if (count == 0) continue;
        const auto n = static_cast<double>(count);
        result.summary.push_back(
            {cell, -1, MetricScores{total.bleu / n, total.rouge_l / n, total.meteor / n},
             n_examples});
    }
    return result;
}

/// Validates the config, loads both corpora from their configured paths, and
/// runs the sweep.
inline ExperimentResult run_experiment(ExperimentConfig config) {
    validate_config(config);
    const Corpus train = load_corpus(config.train_path);
    const Corpus test = load_corpus(config.test_path);
    return run_experiment(config, train, test);
}

namespace detail {

inline std::string format_score(double value) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.9g", value);
    return buffer;
}

} // namespace detail

enum class ExportFormat { Json, Csv };

inline ExportFormat parse_export_format(std::string_view label) {
    if (label == "json") return ExportFormat::Json;
    if (label == "csv") return ExportFormat::Csv;
    throw std::invalid_argument("unknown export format: " + std::string(label));
}

inline nlohmann::ordered_json row_to_json(const ResultRow& row) {
    return nlohmann::ordered_json{
        {"intent", to_label(row.cell.intent)},
        {"shots", row.cell.shots},
        {"selection", to_label(row.cell.selection)},
        {"rerank", to_label(row.cell.rerank)},
        {"repetition", row.repetition},
        {"bleu", row.means.bleu},
        {"rouge_l", row.means.rouge_l},
        {"meteor", row.means.meteor},
        {"n_examples", row.n_examples},
    };
}

/// Writes rows as a JSON array or a CSV table with the fixed column order
/// intent, shots, selection, rerank, repetition, bleu, rouge_l, meteor,
/// n_examples. Scores carry nine significant digits.
inline void export_rows(const std::vector<ResultRow>& rows, ExportFormat format,
                        const std::string& path) {
    if (rows.empty()) throw std::invalid_argument("nothing to export: no result rows");

    std::ostringstream body;
    if (format == ExportFormat::Json) {
        nlohmann::ordered_json doc = nlohmann::ordered_json::array();
        for (const auto& row : rows) doc.push_back(row_to_json(row));
        body << doc.dump(2) << '\n';
    } else {
        body << "intent,shots,selection,rerank,repetition,bleu,rouge_l,meteor,n_examples\n";
        for (const auto& row : rows) {
            body << to_label(row.cell.intent) << ',' << row.cell.shots << ','
                 << to_label(row.cell.selection) << ',' << to_label(row.cell.rerank) << ','
                 << row.repetition << ',' << detail::format_score(row.means.bleu) << ','
                 << detail::format_score(row.means.rouge_l) << ','
                 << detail::format_score(row.means.meteor) << ',' << row.n_examples << '\n';
        }
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << body.str();
    out.flush();
    if (!out) throw std::runtime_error("failed while writing: " + path);
}

// ---------------------------------------------------------------------------
// Config file parsing (JSON document mirroring ExperimentConfig).

namespace detail {

inline std::string resolve_path(const std::string& raw, const std::filesystem::path& base_dir) {
    std::filesystem::path p(raw);
    if (p.is_absolute() || base_dir.empty()) return p.string();
    return (base_dir / p).lexically_normal().string();
}

inline EmbedderSpec embedder_from_json(const nlohmann::json& doc) {
    const std::string kind = doc.value("kind", "local-hashed");
    if (kind == "local-hashed") {
        return EmbedderSpec::local_hashed(doc.value("dim", std::size_t{512}));
    }
    if (kind == "remote") {
        if (!doc.contains("endpoint")) {
            throw std::invalid_argument("remote embedder requires an endpoint");
        }
        return EmbedderSpec::remote(doc["endpoint"].get<std::string>());
    }
    throw std::invalid_argument("unknown embedder kind: " + kind);
}

inline BackendSpec backend_from_json(const nlohmann::json& doc) {
    if (!doc.contains("kind")) throw std::invalid_argument("backend requires a kind");
    const std::string kind = doc["kind"].get<std::string>();
    if (kind == "scripted") {
        ScriptedSpec spec;
        if (doc.contains("script")) spec.script = doc["script"].get<std::vector<std::string>>();
        return spec;
    }
    if (kind == "echo-nearest") {
        return EchoNearestSpec{}; // corpus, strategy, and seed are bound per cell
    }
    if (kind == "remote") {
        RemoteCompletionSpec spec;
        spec.base_url = doc.value("base_url", "");
        spec.model = doc.value("model", "");
        spec.api_key_env = doc.value("api_key_env", "");
        spec.rate_limit_rpm = doc.value("rate_limit_rpm", 0);
        if (spec.base_url.empty() || spec.model.empty() || spec.api_key_env.empty()) {
            throw std::invalid_argument(
                "remote backend requires base_url, model, and api_key_env");
        }
        return spec;
    }
    throw std::invalid_argument("unknown backend kind: " + kind);
}

} // namespace detail

/// Parses a config document. Relative corpus paths are resolved against
/// base_dir (the config file's directory). Unknown keys are rejected so a
/// typo cannot silently fall back to a default.
inline ExperimentConfig parse_experiment_config(const nlohmann::json& doc,
                                                const std::filesystem::path& base_dir = {}) {
    if (!doc.is_object()) throw std::invalid_argument("config must be a JSON object");
    static const std::set<std::string> known = {
        "train",   "test",    "intents",  "shots",    "selection",
        "rerank",  "repetitions", "seed", "backend",  "embedder",
        "sampling", "max_test_examples",  "parallelism"};
    for (const auto& [key, _] : doc.items()) {
        if (known.find(key) == known.end()) {
            throw std::invalid_argument("unknown config key: " + key);
        }
    }

    ExperimentConfig config;
    if (doc.contains("train")) {
        config.train_path = detail::resolve_path(doc["train"].get<std::string>(), base_dir);
    }
    if (doc.contains("test")) {
        config.test_path = detail::resolve_path(doc["test"].get<std::string>(), base_dir);
    }
    if (doc.contains("intents")) {
        for (const auto& label : doc["intents"]) {
            config.intents.push_back(parse_intent(label.get<std::string>()));
        }
    }
    if (doc.contains("shots")) config.shots = doc["shots"].get<std::vector<int>>();
    if (doc.contains("selection")) {
        for (const auto& label : doc["selection"]) {
            config.selection.push_back(parse_strategy(label.get<std::string>()));
        }
    }
    if (doc.contains("rerank")) {
        for (const auto& label : doc["rerank"]) {
            config.rerank.push_back(parse_rerank_option(label.get<std::string>()));
        }
    }
    config.repetitions = doc.value("repetitions", std::size_t{1});
    config.seed = doc.value("seed", std::uint64_t{0});
    if (doc.contains("backend")) config.backend = detail::backend_from_json(doc["backend"]);
    if (doc.contains("embedder")) config.embedder = detail::embedder_from_json(doc["embedder"]);
    if (doc.contains("sampling")) {
        const auto& s = doc["sampling"];
        config.sampling.temperature = s.value("temperature", config.sampling.temperature);
        config.sampling.n_samples = s.value("n_samples", config.sampling.n_samples);
        config.sampling.max_output_tokens =
            s.value("max_output_tokens", config.sampling.max_output_tokens);
        if (s.contains("stop")) {
            config.sampling.stop_sequences = s["stop"].get<std::vector<std::string>>();
        }
    }
    if (doc.contains("max_test_examples")) {
        config.max_test_examples = doc["max_test_examples"].get<std::size_t>();
    }
    config.parallelism = doc.value("parallelism", std::size_t{1});
    return config;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("config file " + path + " is not valid JSON: " + e.what());
    }
    return parse_experiment_config(doc, std::filesystem::path(path).parent_path());
}

} // namespace icsum
