#include <icsum/corpus.hpp>

#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "testutil.hpp"

using icsum::CorpusEntry;
using icsum::Intent;
using icsum::Split;
using testutil::TempDir;
using testutil::write_file;

namespace {

std::vector<CorpusEntry> three_entries() {
    return {
        {"m1", "int getA() { return a; }", "Returns a.", Intent::What, Split::Train},
        {"m2", "void setA(int a) { this.a = a; }", "Sets a.", Intent::What, Split::Test},
        {"m3", "int hash() { return 7; }", "Computes the hash.", Intent::HowItIsDone,
         Split::Train},
    };
}

} // namespace

TEST(LoadCorpus, ParsesValidLinesAndSkipsBlanks) {
    TempDir dir;
    const auto path = dir.file("corpus.jsonl");
    write_file(path, "\n" + testutil::to_jsonl(three_entries()) + "\n\n");

    const auto corpus = icsum::load_corpus(path);
    ASSERT_EQ(corpus.size(), 3u);
    EXPECT_EQ(corpus.entries[0].id, "m1");
    EXPECT_EQ(corpus.entries[1].split, Split::Test);
    EXPECT_EQ(corpus.entries[2].intent, Intent::HowItIsDone);
    EXPECT_EQ(corpus.name, "corpus.jsonl");
}

TEST(LoadCorpus, UnknownFieldsWarnButLoad) {
    TempDir dir;
    const auto path = dir.file("corpus.jsonl");
    write_file(path,
               R"({"id":"m1","code":"int a;","comment":"A field.","intent":"what","split":"train","extra":1})"
               "\n");

    std::vector<std::string> warnings;
    const auto corpus = icsum::load_corpus(path, [&](const std::string& w) { warnings.push_back(w); });
    EXPECT_EQ(corpus.size(), 1u);
    ASSERT_EQ(warnings.size(), 1u);
    EXPECT_NE(warnings[0].find("unknown field 'extra'"), std::string::npos);
    EXPECT_NE(warnings[0].find(":1:"), std::string::npos);
}

TEST(LoadCorpus, ErrorsNameTheLine) {
    TempDir dir;
    const auto path = dir.file("bad.jsonl");
    write_file(path, testutil::to_jsonl({three_entries()[0]}) + "not json\n");
    try {
        icsum::load_corpus(path);
        FAIL() << "expected a parse error";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find(path + ":2:"), std::string::npos) << e.what();
    }
}

TEST(LoadCorpus, RejectsMissingAndEmptyFields) {
    TempDir dir;
    const auto missing = dir.file("missing.jsonl");
    write_file(missing, R"({"id":"m1","code":"int a;","intent":"what","split":"train"})" "\n");
    EXPECT_THROW(icsum::load_corpus(missing), std::runtime_error);

    const auto empty = dir.file("empty.jsonl");
    write_file(empty,
               R"({"id":"m1","code":"  ","comment":"c","intent":"what","split":"train"})" "\n");
    EXPECT_THROW(icsum::load_corpus(empty), std::runtime_error);

    const auto nonstring = dir.file("nonstring.jsonl");
    write_file(nonstring,
               R"({"id":7,"code":"int a;","comment":"c","intent":"what","split":"train"})" "\n");
    EXPECT_THROW(icsum::load_corpus(nonstring), std::runtime_error);
}

TEST(LoadCorpus, RejectsUnknownLabelsAndDuplicateIds) {
    TempDir dir;
    const auto label = dir.file("label.jsonl");
    write_file(label,
               R"({"id":"m1","code":"int a;","comment":"c","intent":"banana","split":"train"})" "\n");
    EXPECT_THROW(icsum::load_corpus(label), std::runtime_error);

    const auto dup = dir.file("dup.jsonl");
    auto entries = three_entries();
    entries[1].id = entries[0].id;
    write_file(dup, testutil::to_jsonl(entries));
    try {
        icsum::load_corpus(dup);
        FAIL() << "expected duplicate-id error";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("duplicate id 'm1'"), std::string::npos);
    }
}

TEST(LoadCorpus, MissingFileErrors) {
    EXPECT_THROW(icsum::load_corpus("/nonexistent/corpus.jsonl"), std::runtime_error);
}

TEST(IntentLabels, RoundTrip) {
    using icsum::parse_intent;
    using icsum::to_label;
    for (const Intent intent : icsum::all_intents()) {
        EXPECT_EQ(parse_intent(to_label(intent)), intent);
    }
    EXPECT_THROW(parse_intent("What"), std::invalid_argument); // labels are lowercase
    EXPECT_EQ(parse_intent("how-to-use"), Intent::HowToUse);
    EXPECT_EQ(parse_intent("how-it-is-done"), Intent::HowItIsDone);
}

TEST(Filter, KeepsOrderAndMatchesBothPredicates) {
    const auto corpus = testutil::make_corpus(three_entries());
    const auto what_train = icsum::filter(corpus, Intent::What, Split::Train);
    ASSERT_EQ(what_train.size(), 1u);
    EXPECT_EQ(what_train.entries[0].id, "m1");

    const auto none = icsum::filter(corpus, Intent::Why, Split::Train);
    EXPECT_TRUE(none.empty());
}

TEST(SampleRandom, MatchesPinnedGeneratorSequence) {
    std::vector<CorpusEntry> entries;
    for (int i = 0; i < 10; ++i) {
        entries.push_back({"m" + std::to_string(i), "int f" + std::to_string(i) + "();", "c",
                           Intent::What, Split::Train});
    }
    const auto corpus = testutil::make_corpus(entries);

    // Recompute the documented draw independently: partial Fisher-Yates with
    // j = i + gen() % (n - i) over mt19937_64(seed).
    const std::uint64_t seed = 42;
    std::mt19937_64 gen(seed);
    std::vector<std::size_t> order(10);
    for (std::size_t i = 0; i < 10; ++i) order[i] = i;
    std::vector<std::string> expected;
    for (std::size_t i = 0; i < 3; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(gen() % (10 - i));
        std::swap(order[i], order[j]);
        expected.push_back("m" + std::to_string(order[i]));
    }

    const auto sampled = icsum::sample_random(corpus, 3, seed);
    ASSERT_EQ(sampled.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(sampled[i].id, expected[i]);
}

TEST(SampleRandom, SameSeedSameSample) {
    const auto corpus = testutil::make_corpus(three_entries());
    const auto a = icsum::sample_random(corpus, 2, 7);
    const auto b = icsum::sample_random(corpus, 2, 7);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].id, b[i].id);
}

TEST(SampleRandom, OverdrawReturnsPermutation) {
    const auto corpus = testutil::make_corpus(three_entries());
    const auto sampled = icsum::sample_random(corpus, 99, 1);
    ASSERT_EQ(sampled.size(), 3u);
    std::set<std::string> ids;
    for (const auto& e : sampled) ids.insert(e.id);
    EXPECT_EQ(ids.size(), 3u);
}
