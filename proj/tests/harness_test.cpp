#include <icsum/harness.hpp>

#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "testutil.hpp"

using icsum::CellSpec;
using icsum::CorpusEntry;
using icsum::EchoNearestSpec;
using icsum::ExperimentConfig;
using icsum::Intent;
using icsum::RerankOption;
using icsum::RetrievalStrategy;
using icsum::ScriptedSpec;
using icsum::Split;
using testutil::TempDir;

namespace {

/// Paired corpora: every test entry reuses a train entry's code and comment,
/// so echoing the nearest train comment reproduces the reference exactly.
struct PairedCorpora {
    icsum::Corpus train;
    icsum::Corpus test;
};

PairedCorpora paired_corpora(std::size_t n, Intent intent = Intent::What) {
    PairedCorpora out;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string code =
            "int method" + std::to_string(i) + "(int x) { return x + " + std::to_string(i) + "; }";
        const std::string comment = "Adds offset " + std::to_string(i) + " to the input.";
        out.train.entries.push_back(
            {"train" + std::to_string(i), code, comment, intent, Split::Train});
        out.test.entries.push_back(
            {"test" + std::to_string(i), code, comment, intent, Split::Test});
    }
    return out;
}

ExperimentConfig echo_config() {
    ExperimentConfig config;
    config.train_path = "unused-train";
    config.test_path = "unused-test";
    config.intents = {Intent::What};
    config.shots = {1};
    config.selection = {RetrievalStrategy::Token};
    config.rerank = {RerankOption::None};
    config.backend = EchoNearestSpec{};
    config.sampling.n_samples = 2;
    return config;
}

} // namespace

TEST(ValidateConfig, AcceptsABaselineAndNormalizesLists) {
    auto config = echo_config();
    config.intents = {Intent::Why, Intent::What, Intent::What};
    config.shots = {10, 1, 10};
    config.rerank.clear();
    icsum::validate_config(config);
    EXPECT_EQ(config.intents, (std::vector<Intent>{Intent::What, Intent::Why}));
    EXPECT_EQ(config.shots, (std::vector<int>{1, 10}));
    EXPECT_EQ(config.rerank, (std::vector<RerankOption>{RerankOption::None}));
}

TEST(ValidateConfig, RejectsBadGrids) {
    {
        auto config = echo_config();
        config.intents = {Intent::Others};
        EXPECT_THROW(icsum::validate_config(config), std::invalid_argument);
    }
    {
        auto config = echo_config();
        config.shots = {3};
        EXPECT_THROW(icsum::validate_config(config), std::invalid_argument);
    }
    {
        auto config = echo_config();
        config.shots = {0}; // selection token makes no sense at zero shots
        EXPECT_THROW(icsum::validate_config(config), std::invalid_argument);
    }
    {
        auto config = echo_config();
        config.shots = {0};
        config.selection = {RetrievalStrategy::Random};
        icsum::validate_config(config); // zero-shot random is the valid spelling
    }
    {
        auto config = echo_config();
        config.shots = {0, 5}; // zero among others is fine
        icsum::validate_config(config);
    }
    {
        auto config = echo_config();
        config.intents.clear();
        EXPECT_THROW(icsum::validate_config(config), std::invalid_argument);
    }
}

TEST(ValidateConfig, SemanticNeedsAnEmbedder) {
    {
        auto config = echo_config();
        config.selection = {RetrievalStrategy::Semantic};
        EXPECT_THROW(icsum::validate_config(config), std::invalid_argument);
        config.embedder = icsum::EmbedderSpec::local_hashed(64);
        icsum::validate_config(config);
    }
    {
        auto config = echo_config();
        config.rerank = {RerankOption::SemanticRerank};
        EXPECT_THROW(icsum::validate_config(config), std::invalid_argument);
    }
}

TEST(ValidateConfig, BoundsSamplingAndRepetitions) {
    {
        auto config = echo_config();
        config.sampling.n_samples = 0;
        EXPECT_THROW(icsum::validate_config(config), std::invalid_argument);
        config.sampling.n_samples = 101;
        EXPECT_THROW(icsum::validate_config(config), std::invalid_argument);
        config.sampling.n_samples = 100;
        icsum::validate_config(config);
    }
    {
        auto config = echo_config();
        config.repetitions = 0;
        EXPECT_THROW(icsum::validate_config(config), std::invalid_argument);
    }
    {
        auto config = echo_config();
        config.sampling.temperature = -0.1;
        EXPECT_THROW(icsum::validate_config(config), std::invalid_argument);
    }
}

TEST(ValidateConfig, FailsFastOffline) {
    testutil::EnvVarGuard guard("NO_NETWORK", "1");
    {
        auto config = echo_config();
        icsum::RemoteCompletionSpec remote;
        remote.base_url = "http://example.invalid";
        remote.model = "m";
        remote.api_key_env = "KEY_VAR";
        config.backend = remote;
        EXPECT_THROW(icsum::validate_config(config), std::runtime_error);
    }
    {
        auto config = echo_config();
        config.embedder = icsum::EmbedderSpec::remote("http://example.invalid");
        EXPECT_THROW(icsum::validate_config(config), std::runtime_error);
    }
}

TEST(EnumerateCells, FullCartesianProductInCanonicalOrder) {
    auto config = echo_config();
    config.intents = {Intent::What};
    config.shots = {1, 10};
    config.selection = {RetrievalStrategy::Random, RetrievalStrategy::Token};
    config.rerank = {RerankOption::None};
    icsum::validate_config(config);

    const auto cells = icsum::enumerate_cells(config);
    ASSERT_EQ(cells.size(), 4u);
    EXPECT_TRUE(std::is_sorted(cells.begin(), cells.end()));
}

TEST(RunCell, EchoOnPairedCorporaScoresPerfectly) {
    const auto corpora = paired_corpora(6);
    auto config = echo_config();
    icsum::validate_config(config);

    const auto row = icsum::run_cell(corpora.train, corpora.test, config,
                                     {Intent::What, 1, RetrievalStrategy::Token,
                                      RerankOption::None},
                                     0);
    EXPECT_EQ(row.n_examples, 6u);
    EXPECT_DOUBLE_EQ(row.means.bleu, 1.0);
    EXPECT_DOUBLE_EQ(row.means.rouge_l, 1.0);
    EXPECT_GT(row.means.meteor, 0.9);
}

TEST(RunCell, ZeroShotRandomRuns) {
    const auto corpora = paired_corpora(4);
    auto config = echo_config();
    config.shots = {0};
    config.selection = {RetrievalStrategy::Random};
    icsum::validate_config(config);

    const auto row = icsum::run_cell(corpora.train, corpora.test, config,
                                     {Intent::What, 0, RetrievalStrategy::Random,
                                      RerankOption::None},
                                     0);
    EXPECT_EQ(row.n_examples, 4u);
}

TEST(RunCell, ScriptedRerankPicksThePlantedSample) {
    // One test entry; the reference comment appears as the third of five
    // scripted samples; token rerank against the train twin must pick it.
    PairedCorpora corpora = paired_corpora(1);
    const std::string reference = corpora.test.entries[0].comment;

    auto config = echo_config();
    config.backend = ScriptedSpec{{"unrelated words one", "other unrelated text", reference,
                                   "more filler phrasing", "final decoy sentence"}};
    config.sampling.n_samples = 5;
    icsum::validate_config(config);

    const auto with_rerank = icsum::run_cell(corpora.train, corpora.test, config,
                                             {Intent::What, 1, RetrievalStrategy::Token,
                                              RerankOption::TokenRerank},
                                             0);
    EXPECT_DOUBLE_EQ(with_rerank.means.bleu, 1.0);

    const auto without = icsum::run_cell(corpora.train, corpora.test, config,
                                         {Intent::What, 1, RetrievalStrategy::Token,
                                          RerankOption::None},
                                         0);
    EXPECT_LT(without.means.bleu, 0.5); // first sample is a decoy
}

TEST(RunCell, CapsTestExamples) {
    const auto corpora = paired_corpora(8);
    auto config = echo_config();
    config.max_test_examples = 3;
    icsum::validate_config(config);

    const auto row = icsum::run_cell(corpora.train, corpora.test, config,
                                     {Intent::What, 1, RetrievalStrategy::Token,
                                      RerankOption::None},
                                     0);
    EXPECT_EQ(row.n_examples, 3u);
}

TEST(RunCell, MissingIntentsFailWithContext) {
    const auto corpora = paired_corpora(2, Intent::What);
    auto config = echo_config();
    icsum::validate_config(config);
    EXPECT_THROW(icsum::run_cell(corpora.train, corpora.test, config,
                                 {Intent::Why, 1, RetrievalStrategy::Token, RerankOption::None},
                                 0),
                 std::runtime_error);
}

TEST(RunExperiment, ProducesRowsSummariesAndFailures) {
    const auto corpora = paired_corpora(4);
    auto config = echo_config();
    config.intents = {Intent::What, Intent::Why}; // Why has no entries -> failures
    config.shots = {1, 10};
    config.repetitions = 2;
    icsum::validate_config(config);

    const auto result = icsum::run_experiment(config, corpora.train, corpora.test);
    // What-intent: 2 shots x 1 selection x 1 rerank x 2 reps succeed.
    EXPECT_EQ(result.rows.size(), 4u);
    EXPECT_EQ(result.summary.size(), 2u);
    EXPECT_EQ(result.failures.size(), 4u); // Why-intent cells fail every repetition
    for (const auto& failure : result.failures) {
        EXPECT_EQ(failure.cell.intent, Intent::Why);
        EXPECT_NE(failure.message.find("no test entries"), std::string::npos);
    }
    for (const auto& row : result.summary) {
        EXPECT_EQ(row.repetition, -1);
        EXPECT_DOUBLE_EQ(row.means.bleu, 1.0);
    }
}

TEST(RunExperiment, SummaryAveragesRepetitions) {
    // Random selection draws different demonstrations per repetition, but the
    // echoed comment still comes from the draw, so scores vary across reps.
    const auto corpora = paired_corpora(5);
    auto config = echo_config();
    config.selection = {RetrievalStrategy::Random};
    config.repetitions = 3;
    config.seed = 11;
    icsum::validate_config(config);

    const auto result = icsum::run_experiment(config, corpora.train, corpora.test);
    ASSERT_EQ(result.rows.size(), 3u);
    ASSERT_EQ(result.summary.size(), 1u);
    double mean = 0.0;
    for (const auto& row : result.rows) mean += row.means.bleu;
    mean /= 3.0;
    EXPECT_NEAR(result.summary[0].means.bleu, mean, 1e-12);
}

TEST(RunExperiment, ParallelMatchesSequential) {
    const auto corpora = paired_corpora(4);
    auto config = echo_config();
    config.shots = {1, 5};
    config.selection = {RetrievalStrategy::Token, RetrievalStrategy::Random};
    config.repetitions = 2;
    icsum::validate_config(config);

    auto parallel = config;
    parallel.parallelism = 4;

    const auto a = icsum::run_experiment(config, corpora.train, corpora.test);
    const auto b = icsum::run_experiment(parallel, corpora.train, corpora.test);
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        EXPECT_TRUE(a.rows[i].cell == b.rows[i].cell);
        EXPECT_DOUBLE_EQ(a.rows[i].means.bleu, b.rows[i].means.bleu);
        EXPECT_DOUBLE_EQ(a.rows[i].means.meteor, b.rows[i].means.meteor);
    }
}

TEST(Export, CsvAndJsonCarryTheFixedColumns) {
    TempDir dir;
    std::vector<icsum::ResultRow> rows = {
        {{Intent::What, 5, RetrievalStrategy::Token, RerankOption::None}, 0,
         {0.123456789, 0.5, 0.75}, 42},
        {{Intent::What, 5, RetrievalStrategy::Token, RerankOption::None}, -1,
         {0.123456789, 0.5, 0.75}, 42},
    };

    const auto csv_path = dir.file("rows.csv");
    icsum::export_rows(rows, icsum::ExportFormat::Csv, csv_path);
    const auto csv = testutil::read_file(csv_path);
    EXPECT_EQ(csv.rfind("intent,shots,selection,rerank,repetition,bleu,rouge_l,meteor,n_examples\n",
                        0),
              0u);
    EXPECT_NE(csv.find("what,5,token,none,0,0.123456789,0.5,0.75,42"), std::string::npos);
    EXPECT_NE(csv.find("what,5,token,none,-1,"), std::string::npos);

    const auto json_path = dir.file("rows.json");
    icsum::export_rows(rows, icsum::ExportFormat::Json, json_path);
    const auto parsed = nlohmann::json::parse(testutil::read_file(json_path));
    ASSERT_TRUE(parsed.is_array());
    ASSERT_EQ(parsed.size(), 2u);
    EXPECT_EQ(parsed[0]["intent"], "what");
    EXPECT_EQ(parsed[0]["shots"], 5);
    EXPECT_EQ(parsed[0]["selection"], "token");
    EXPECT_EQ(parsed[0]["rerank"], "none");
    EXPECT_EQ(parsed[0]["repetition"], 0);
    EXPECT_NEAR(parsed[0]["bleu"].get<double>(), 0.123456789, 1e-12);
    EXPECT_EQ(parsed[0]["n_examples"], 42);

    // Column order is part of the contract for JSON objects too.
    const auto text = testutil::read_file(json_path);
    EXPECT_LT(text.find("\"intent\""), text.find("\"shots\""));
    EXPECT_LT(text.find("\"shots\""), text.find("\"selection\""));
    EXPECT_LT(text.find("\"meteor\""), text.find("\"n_examples\""));
}

TEST(Export, RejectsEmptyRowsAndBadPaths) {
    EXPECT_THROW(icsum::export_rows({}, icsum::ExportFormat::Csv, "/tmp/unused.csv"),
                 std::invalid_argument);
    std::vector<icsum::ResultRow> rows = {
        {{Intent::What, 1, RetrievalStrategy::Token, RerankOption::None}, 0, {0, 0, 0}, 1}};
    EXPECT_THROW(icsum::export_rows(rows, icsum::ExportFormat::Csv, "/nonexistent/dir/out.csv"),
                 std::runtime_error);
}

TEST(ExperimentDeterminism, IdenticalConfigGivesByteIdenticalExports) {
    const auto corpora = paired_corpora(5);
    auto config = echo_config();
    config.selection = {RetrievalStrategy::Token, RetrievalStrategy::Random};
    config.repetitions = 2;
    config.seed = 99;
    icsum::validate_config(config);

    TempDir dir;
    const auto run = [&](const std::string& tag) {
        const auto result = icsum::run_experiment(config, corpora.train, corpora.test);
        icsum::export_rows(result.rows, icsum::ExportFormat::Json, dir.file(tag + ".json"));
        icsum::export_rows(result.summary, icsum::ExportFormat::Csv, dir.file(tag + ".csv"));
    };
    run("first");
    run("second");
    EXPECT_EQ(testutil::read_file(dir.file("first.json")),
              testutil::read_file(dir.file("second.json")));
    EXPECT_EQ(testutil::read_file(dir.file("first.csv")),
              testutil::read_file(dir.file("second.csv")));
}

TEST(ConfigFile, ParsesAndResolvesRelativePaths) {
    TempDir dir;
    const auto corpora = paired_corpora(3);
    testutil::write_file(dir.file("train.jsonl"), testutil::to_jsonl(corpora.train.entries));
    testutil::write_file(dir.file("test.jsonl"), testutil::to_jsonl(corpora.test.entries));
    testutil::write_file(dir.file("config.json"), R"({
        "train": "train.jsonl",
        "test": "test.jsonl",
        "intents": ["what"],
        "shots": [1],
        "selection": ["token"],
        "rerank": ["none"],
        "repetitions": 2,
        "seed": 7,
        "backend": {"kind": "echo-nearest"},
        "sampling": {"n_samples": 3, "temperature": 0.5},
        "max_test_examples": 2,
        "parallelism": 2
    })");

    auto config = icsum::load_experiment_config(dir.file("config.json"));
    EXPECT_EQ(config.train_path, dir.file("train.jsonl"));
    EXPECT_EQ(config.repetitions, 2u);
    EXPECT_EQ(config.seed, 7u);
    EXPECT_EQ(config.sampling.n_samples, 3u);
    EXPECT_EQ(config.max_test_examples, std::optional<std::size_t>(2));
    EXPECT_TRUE(std::holds_alternative<EchoNearestSpec>(config.backend));

    const auto result = icsum::run_experiment(config);
    EXPECT_EQ(result.rows.size(), 2u);
    EXPECT_TRUE(result.failures.empty());
}

TEST(ConfigFile, RejectsUnknownKeysAndBadKinds) {
    TempDir dir;
    testutil::write_file(dir.file("typo.json"), R"({"trian": "x.jsonl"})");
    EXPECT_THROW(icsum::load_experiment_config(dir.file("typo.json")), std::invalid_argument);

    testutil::write_file(dir.file("kind.json"), R"({"backend": {"kind": "banana"}})");
    EXPECT_THROW(icsum::load_experiment_config(dir.file("kind.json")), std::invalid_argument);

    testutil::write_file(dir.file("remote.json"),
                         R"({"backend": {"kind": "remote", "base_url": "http://x"}})");
    EXPECT_THROW(icsum::load_experiment_config(dir.file("remote.json")), std::invalid_argument);

    testutil::write_file(dir.file("notjson.json"), "{nope");
    EXPECT_THROW(icsum::load_experiment_config(dir.file("notjson.json")), std::runtime_error);
}

TEST(ConfigFile, CredentialNamesComeFromEnvironmentNotConfig) {
    TempDir dir;
    testutil::write_file(dir.file("remote.json"), R"({
        "backend": {"kind": "remote", "base_url": "http://localhost:9",
                     "model": "m", "api_key_env": "MY_KEY_VAR"}
    })");
    const auto config = icsum::load_experiment_config(dir.file("remote.json"));
    const auto& remote = std::get<icsum::RemoteCompletionSpec>(config.backend);
    EXPECT_EQ(remote.api_key_env, "MY_KEY_VAR"); // the name, never the secret
}
