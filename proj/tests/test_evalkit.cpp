#include <gtest/gtest.h>

#include <random>

#include "lexrag/error.hpp"
#include "lexrag/evalkit.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace lexrag;
using namespace lexrag::evalkit;
using lexrag::testing::fixture;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorKind::IoFailure;
}

struct Case {
    std::vector<std::string> retrieved;
    std::set<std::string> relevant;
};

}  // namespace

TEST(Prf, WorkedExamples) {
    auto s = retrieval_prf({"a", "b"}, {"a", "b"});
    EXPECT_EQ(s.precision, 1.0);
    EXPECT_EQ(s.recall, 1.0);
    EXPECT_EQ(s.f1, 1.0);

    const auto c = count({"a", "b"}, {"a", "c", "d"});
    EXPECT_EQ(c.tp, 1u);
    EXPECT_EQ(c.fp, 1u);
    EXPECT_EQ(c.fn, 2u);
    s = retrieval_prf({"a", "b"}, {"a", "c", "d"});
    EXPECT_EQ(s.precision, 0.5);
    EXPECT_EQ(s.recall, 1.0 / 3.0);
    EXPECT_EQ(s.f1, 0.4);

    s = retrieval_prf({}, {"a"});
    EXPECT_EQ(s.precision, 0.0);
    EXPECT_EQ(s.recall, 0.0);
    EXPECT_EQ(s.f1, 0.0);
    EXPECT_EQ(kind_of([] { retrieval_prf({"a"}, {}); }), ErrorKind::EmptyRelevant);
}

TEST(Prf, EnumeratedCasesMatchRationalArithmetic) {
    const std::vector<Case> cases{
        {{"a", "b"}, {"a", "b"}},
        {{"a", "b"}, {"a", "c", "d"}},
        {{}, {"a"}},
        {{"x"}, {"a"}},
        {{"a"}, {"a", "b", "c"}},
        {{"a", "b", "c"}, {"a"}},
        {{"a", "b", "c", "d", "e", "f", "g"}, {"a", "c"}},
        {{"a", "a", "b"}, {"a", "b"}},
        {{"b", "a"}, {"a", "b", "c", "d", "e", "f"}},
        {{"a", "b", "c"}, {"b", "c", "d"}},
        {{"p", "q", "r", "s"}, {"q", "s", "t", "u", "v"}},
        {{"a", "b", "c", "d", "e", "f"}, {"a", "b", "c", "d", "e", "f", "g"}},
    };
    for (const auto& c : cases) {
        const auto got = retrieval_prf(c.retrieved, c.relevant);
        const auto want = oracle::prf(c.retrieved, c.relevant);
        EXPECT_EQ(got.precision, oracle::to_double(want.precision));
        EXPECT_EQ(got.recall, oracle::to_double(want.recall));
        EXPECT_EQ(got.f1, oracle::to_double(want.f1));
    }
}

TEST(Prf, ExhaustiveCountsExact) {
    for (std::size_t tp = 0; tp < 12; ++tp)
        for (std::size_t fp = 0; fp < 12; ++fp)
            for (std::size_t fn = 0; fn < 12; ++fn) {
                if (tp + fn == 0) continue;
                std::vector<std::string> retrieved;
                std::set<std::string> relevant;
                for (std::size_t i = 0; i < tp; ++i) retrieved.push_back("t" + std::to_string(i)), relevant.insert("t" + std::to_string(i));
                for (std::size_t i = 0; i < fp; ++i) retrieved.push_back("f" + std::to_string(i));
                for (std::size_t i = 0; i < fn; ++i) relevant.insert("n" + std::to_string(i));
                const auto got = retrieval_prf(retrieved, relevant);
                const auto want = oracle::prf(retrieved, relevant);
                ASSERT_EQ(got.precision, oracle::to_double(want.precision));
                ASSERT_EQ(got.recall, oracle::to_double(want.recall));
                ASSERT_EQ(got.f1, oracle::to_double(want.f1));
            }
}

TEST(Prf, OrderInvariantAndBounded) {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 300; ++t) {
        std::vector<std::string> r;
        std::set<std::string> rel;
        for (int i = 0; i < 1 + static_cast<int>(rng() % 8); ++i) r.push_back(std::string(1, 'a' + rng() % 10));
        for (int i = 0; i < 1 + static_cast<int>(rng() % 8); ++i) rel.insert(std::string(1, 'a' + rng() % 10));
        const auto a = retrieval_prf(r, rel);
        std::shuffle(r.begin(), r.end(), rng);
        const auto b = retrieval_prf(r, rel);
        ASSERT_EQ(a.f1, b.f1);
        ASSERT_LE(a.f1, std::max(a.precision, a.recall) + 1e-15);
        ASSERT_LE(a.f1, 2 * std::min(a.precision, a.recall) + 1e-15);
        if (a.precision == a.recall) ASSERT_NEAR(a.f1, a.precision, 1e-15);
    }
}

TEST(AnswerF1, Examples) {
    EXPECT_EQ(answer_token_f1("Equality before law", "equality before law"), 1.0);
    EXPECT_EQ(answer_token_f1("tax", "law"), 0.0);
    EXPECT_EQ(answer_token_f1("", "law"), 0.0);
    EXPECT_NEAR(answer_token_f1("equality before law", "equality before the law"), 6.0 / 7.0, 1e-15);
    EXPECT_NEAR(answer_token_f1("equality before law", "equality before the law"), 0.8571, 1e-4);
    EXPECT_NEAR(answer_token_f1("law law law", "law"), 0.5, 1e-15);
}

TEST(Gold, ParsesJsonl) {
    const auto items = parse_gold(
        R"({"question":"q1","relevant":["Part I / Article 1"],"gold_answer":"x"})"
        "\n\n"
        R"({"question":"q2","relevant":[]})"
        "\n");
    ASSERT_EQ(items.size(), 2u);
    EXPECT_EQ(items[0].relevant, std::vector<std::string>{"Part I / Article 1"});
    EXPECT_EQ(*items[0].gold_answer, "x");
    EXPECT_FALSE(items[1].gold_answer.has_value());
    EXPECT_EQ(kind_of([] { parse_gold("{not json"); }), ErrorKind::InvalidConfig);
    EXPECT_EQ(load_gold(fixture("corpus/gold.jsonl")).size(), 10u);
}

TEST(Gold, PathsExpandToChunksBeneath) {
    const auto index = lexrag::testing::mini_corpus_index();
    const auto ids = resolve_relevant({"Part I / Article 1"}, index.store);
    EXPECT_EQ(ids, (std::set<std::string>{"mini_constitution:00001", "mini_constitution:00002",
                                          "mini_constitution:00003"}));
    EXPECT_EQ(resolve_relevant({"mini_constitution:00007"}, index.store), std::set<std::string>{"mini_constitution:00007"});
    EXPECT_TRUE(resolve_relevant({"Part IX / Article 99"}, index.store).empty());
    // "Article 1" must not swallow "Article 10".
    for (const auto& id : resolve_relevant({"Part II / Article 10"}, index.store)) {
        EXPECT_EQ(index.store.get(id)->path.rfind("Part II / Article 10", 0), 0u);
    }
}

TEST(RunEval, MiniCorpusIsPerfectAtK3) {
    const auto index = lexrag::testing::mini_corpus_index();
    const auto gold = load_gold(fixture("corpus/gold.jsonl"));
    const auto cfg = lexrag::testing::default_config().engine;
    const auto report = run_eval(gold, index, cfg, 3);
    ASSERT_EQ(report.per_question.size(), 10u);
    EXPECT_EQ(report.skipped, 0u);
    EXPECT_EQ(report.macro.precision, 1.0);
    EXPECT_EQ(report.macro.recall, 1.0);
    EXPECT_EQ(report.macro.f1, 1.0);
    for (const auto& q : report.per_question) {
        ASSERT_TRUE(q.answer_f1.has_value());
        EXPECT_GE(*q.answer_f1, 0.8) << q.question;
    }
    EXPECT_EQ(report.config["k"], 3);

    // Retrieval agrees with the brute-force oracle run at fixture build time.
    const auto expected = nlohmann::json::parse(lexrag::testing::read_file(fixture("corpus/expected.json")));
    for (std::size_t i = 0; i < 10; ++i) {
        auto want = expected["questions"][i]["top3"].get<std::vector<std::string>>();
        EXPECT_EQ(report.per_question[i].retrieved, want) << report.per_question[i].question;
    }
}

TEST(RunEval, ReportsAreByteIdentical) {
    const auto index = lexrag::testing::mini_corpus_index();
    const auto gold = load_gold(fixture("corpus/gold.jsonl"));
    const auto cfg = lexrag::testing::default_config().engine;
    const auto a = dump_report(run_eval(gold, index, cfg, 3));
    const auto b = dump_report(run_eval(gold, index, cfg, 3));
    EXPECT_EQ(a, b);
    lexrag::testing::TempDir dir;
    write_report(run_eval(gold, index, cfg, 3), dir / "eval_report.json");
    EXPECT_EQ(lexrag::testing::read_file(dir / "eval_report.json"), a);
    const auto j = nlohmann::json::parse(a);
    for (const char* key : {"per_question", "macro", "skipped", "config"}) EXPECT_TRUE(j.contains(key)) << key;
}

TEST(RunEval, RecallMonotoneInK) {
    const auto index = lexrag::testing::mini_corpus_index();
    auto gold = load_gold(fixture("corpus/gold.jsonl"));
    for (auto& g : gold) g.relevant.push_back("Part IV / Article 20");  // partly out of reach at small k
    const auto cfg = lexrag::testing::default_config().engine;
    std::vector<double> prev(gold.size(), 0.0);
    for (std::size_t k : {1, 2, 3, 5, 8, 13, 30, 64, 100}) {
        const auto r = run_eval(gold, index, cfg, k);
        for (std::size_t i = 0; i < gold.size(); ++i) {
            ASSERT_GE(r.per_question[i].scores.recall, prev[i]) << "k=" << k;
            prev[i] = r.per_question[i].scores.recall;
        }
        if (k >= index.store.size()) EXPECT_EQ(r.macro.recall, 1.0);
    }
}

TEST(RunEval, EmptyRelevantIsSkipped) {
    const auto index = lexrag::testing::mini_corpus_index();
    const auto cfg = lexrag::testing::default_config().engine;
    std::vector<GoldItem> gold{{"What shall the council certify?", {"Part I / Article 1"}, std::nullopt},
                               {"Unanswerable probe?", {}, std::nullopt}};
    const auto r = run_eval(gold, index, cfg, 3);
    EXPECT_EQ(r.skipped, 1u);
    EXPECT_EQ(r.per_question.size(), 1u);
    EXPECT_EQ(r.skipped_questions, std::vector<std::string>{"Unanswerable probe?"});
    EXPECT_FALSE(r.macro_answer_f1.has_value());

    std::vector<GoldItem> none{{"a", {}, std::nullopt}, {"b", {}, std::nullopt}};
    EXPECT_EQ(kind_of([&] { run_eval(none, index, cfg, 3); }), ErrorKind::EmptyGoldSet);
    EXPECT_EQ(kind_of([&] { run_eval({}, index, cfg, 3); }), ErrorKind::EmptyGoldSet);
    EXPECT_EQ(kind_of([&] { run_eval(gold, rag::Index(256), cfg, 3); }), ErrorKind::EmptyIndex);
}
