#include <gtest/gtest.h>

#include <cstdlib>
#include <random>

#include "lexrag/error.hpp"
#include "lexrag/rag.hpp"
#include "lexrag/text.hpp"
#include "mock_http.hpp"
#include "test_util.hpp"

using namespace lexrag;
using namespace lexrag::rag;
using lexrag::testing::fixture;
using lexrag::testing::MockServer;

namespace {

store::ScoredChunk chunk(const std::string& id, const std::string& path, const std::string& text,
                         std::size_t start = 0, double score = 0.5) {
    store::ScoredChunk c;
    c.chunk_id = id;
    c.doc_id = "doc";
    c.path = path;
    c.text = text;
    c.span = {start, start + text.size()};
    c.cosine_score = score;
    return c;
}

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorKind::IoFailure;
}

/// Spells out the prompt template independently of the library.
std::string expected_prompt(const std::string& q, const std::vector<std::pair<std::string, std::string>>& blocks) {
    std::string s = "You are a legal research assistant. Answer strictly from the context.\n\nContext:\n";
    for (const auto& [label, text] : blocks) s += "[" + label + "] " + text + "\n";
    return s + "\nQuestion: " + q + "\nAnswer:";
}

std::size_t ws_count(const std::string& s) {
    std::size_t n = 0;
    bool in = false;
    for (char c : s) {
        const bool sp = c == ' ' || c == '\n' || c == '\t' || c == '\r' || c == '\f' || c == '\v';
        if (!sp && !in) ++n;
        in = !sp;
    }
    return n;
}

EngineConfig engine_cfg() { return lexrag::testing::default_config().engine; }

nlohmann::json without_latency(const AnswerResult& r) {
    auto j = to_json(r);
    j.erase("latency_ms");
    return j;
}

}  // namespace

TEST(Prompt, SingleChunkTemplate) {
    const auto p = build_prompt("What does Article 14 guarantee?",
                                {chunk("d:1", "Part III / Article 14", "Equality before law.")});
    EXPECT_EQ(p.prompt_text, expected_prompt("What does Article 14 guarantee?",
                                             {{"Part III / Article 14", "Equality before law."}}));
    ASSERT_EQ(p.included.size(), 1u);
    EXPECT_EQ(p.included[0], (Citation{"d:1", "Part III / Article 14"}));
    EXPECT_EQ(p.token_count, ws_count(p.prompt_text));
    EXPECT_EQ(p.budget, 512u);
    EXPECT_TRUE(p.warnings.empty());
}

TEST(Prompt, EmptyPathFallsBackToDocId) {
    const auto p = build_prompt("q", {chunk("d:0", "", "Preamble text.")});
    EXPECT_NE(p.prompt_text.find("[doc] Preamble text."), std::string::npos);
}

TEST(Prompt, RendersInDocumentOrder) {
    const auto p = build_prompt("q", {chunk("d:5", "B", "second", 50, 0.9), chunk("d:1", "A", "first", 10, 0.4)});
    EXPECT_EQ(p.prompt_text, expected_prompt("q", {{"A", "first"}, {"B", "second"}}));
    EXPECT_EQ(p.included[0].chunk_id, "d:1");
}

TEST(Prompt, EmptyContextIsFlagged) {
    const auto p = build_prompt("q", {});
    EXPECT_EQ(p.prompt_text, expected_prompt("q", {}));
    EXPECT_TRUE(p.included.empty());
    ASSERT_FALSE(p.warnings.empty());
    EXPECT_EQ(kind_of([] { build_prompt("a long question indeed", {}, 5); }), ErrorKind::BudgetTooSmall);
}

TEST(Prompt, BudgetAdmitsScorePrefixByTokenOracle) {
    std::mt19937_64 rng(12);
    for (int t = 0; t < 200; ++t) {
        std::vector<store::ScoredChunk> cands;
        const auto n = rng() % 8;
        for (std::size_t i = 0; i < n; ++i) {
            std::string text;
            const auto words = 1 + rng() % 60;
            for (std::size_t w = 0; w < words; ++w) text += (w ? (rng() % 7 ? " " : "\n") : "") + std::string("w");
            cands.push_back(chunk("d:" + std::to_string(i), "Article " + std::to_string(i), text, rng() % 1000));
        }
        const std::size_t budget = 20 + rng() % 200;
        const auto p = build_prompt("what is the law", cands, budget);

        // Oracle: render prefixes and count tokens of the full prompt text.
        std::vector<store::ScoredChunk> admitted;
        for (const auto& c : cands) {
            auto trial = admitted;
            trial.push_back(c);
            std::stable_sort(trial.begin(), trial.end(),
                             [](const auto& a, const auto& b) { return a.span.start < b.span.start; });
            std::vector<std::pair<std::string, std::string>> blocks;
            for (const auto& x : trial) blocks.emplace_back(x.path, x.text);
            if (ws_count(expected_prompt("what is the law", blocks)) > budget) break;
            admitted = trial;
        }
        ASSERT_EQ(p.included.size(), admitted.size()) << "trial " << t;
        for (std::size_t i = 0; i < admitted.size(); ++i) ASSERT_EQ(p.included[i].chunk_id, admitted[i].chunk_id);
        ASSERT_LE(p.token_count, budget);
        for (const auto& c : p.included_chunks) {
            ASSERT_NE(p.prompt_text.find("[" + c.path + "] " + c.text), std::string::npos);
        }
    }
}

TEST(Prompt, LargerBudgetNeverDropsAChunk) {
    std::vector<store::ScoredChunk> cands;
    for (int i = 0; i < 6; ++i) cands.push_back(chunk("d:" + std::to_string(i), "P", std::string(10 + i * 7, 'x') + " y z", i));
    std::set<std::string> prev;
    for (std::size_t budget = 20; budget < 80; ++budget) {
        const auto p = build_prompt("q", cands, budget);
        std::set<std::string> now;
        for (const auto& c : p.included) now.insert(c.chunk_id);
        ASSERT_TRUE(std::includes(now.begin(), now.end(), prev.begin(), prev.end())) << budget;
        prev = now;
    }
}

TEST(Sentences, Boundaries) {
    EXPECT_EQ(split_sentences("One. Two? Three!\nFour\n\nFive."),
              (std::vector<std::string>{"One.", "Two?", "Three!", "Four", "Five."}));
    EXPECT_EQ(split_sentences("Art. 14.2 stays"), (std::vector<std::string>{"Art.", "14.2 stays"}));
    EXPECT_TRUE(split_sentences("  \n ").empty());
}

TEST(Stub, PicksBestOverlapSentence) {
    const auto p = build_prompt("What does Article 14 guarantee?",
                                {chunk("d:1", "Part III / Article 14",
                                       "The State shall not deny to any person equality. Article 14 guarantees "
                                       "equality before law.\nNothing else here.")});
    const auto a = generate_stub(p, "What does Article 14 guarantee?");
    EXPECT_EQ(a.answer, "Article 14 guarantees equality before law.");
    EXPECT_EQ(a.citation, (Citation{"d:1", "Part III / Article 14"}));
    EXPECT_NEAR(overlap_f1(a.answer, "What does Article 14 guarantee?"), 4.0 / 11.0, 1e-15);
}

TEST(Stub, SingleSentenceAndTies) {
    const auto one = build_prompt("zzz", {chunk("d:1", "A", "Only this sentence.")});
    EXPECT_EQ(generate_stub(one, "zzz").answer, "Only this sentence.");
    const auto tie = build_prompt("law", {chunk("d:2", "B", "The law binds. Law governs.", 20),
                                          chunk("d:1", "A", "A law exists.", 10)});
    const auto a = generate_stub(tie, "law");
    EXPECT_EQ(a.answer, "Law governs.");  // 2-token sentence beats 3-token ones
    const auto even = build_prompt("law", {chunk("d:2", "B", "Law binds.", 20), chunk("d:1", "A", "Law rules.", 10)});
    EXPECT_EQ(generate_stub(even, "law").answer, "Law rules.");  // earliest in prompt order
    EXPECT_EQ(kind_of([] { generate_stub(build_prompt("q", {}), "q"); }), ErrorKind::NoContext);
}

TEST(Remote, EchoesGeneratedText) {
    MockServer mock;
    nlohmann::json seen;
    std::string auth;
    mock.http().Post("/generate", [&](const httplib::Request& req, httplib::Response& res) {
        seen = nlohmann::json::parse(req.body);
        auth = req.get_header_value("Authorization");
        res.set_content(R"({"generated_text":"X"})", "application/json");
    });
    mock.start();
    const auto p = build_prompt("q", {chunk("d:1", "A", "text.")});
    ::setenv("LEXRAG_GEN_TOKEN", "gen-secret", 1);
    EXPECT_EQ(generate_remote(p, GenParams{64, 0.5}, mock.url(), std::chrono::milliseconds(2000), {}), "X");
    ::unsetenv("LEXRAG_GEN_TOKEN");
    EXPECT_EQ(seen["inputs"], p.prompt_text);
    EXPECT_EQ(seen["parameters"]["max_new_tokens"], 64);
    EXPECT_EQ(seen["parameters"]["temperature"], 0.5);
    EXPECT_EQ(auth, "Bearer gen-secret");
}

TEST(Remote, FailureKinds) {
    MockServer mock;
    std::atomic<int> calls{0};
    mock.http().Post("/down/generate", [&](const httplib::Request&, httplib::Response& res) {
        ++calls;
        res.status = 503;
    });
    mock.http().Post("/odd/generate", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"text":"X"})", "application/json");
    });
    mock.start();
    const auto p = build_prompt("q", {chunk("d:1", "A", "text.")});
    http::RetryPolicy fast{3, std::chrono::milliseconds(5)};
    EXPECT_EQ(kind_of([&] { generate_remote(p, {}, mock.url() + "/down", std::chrono::milliseconds(2000), fast); }),
              ErrorKind::RemoteUnavailable);
    EXPECT_EQ(calls.load(), 3);
    EXPECT_EQ(kind_of([&] { generate_remote(p, {}, mock.url() + "/odd", std::chrono::milliseconds(2000), fast); }),
              ErrorKind::RemoteProtocol);
    EXPECT_EQ(kind_of([&] { generate_remote(p, {}, "", std::chrono::milliseconds(2000), fast); }),
              ErrorKind::InvalidConfig);
    EXPECT_EQ(kind_of([&] { generate_remote(p, {256, -1.0}, mock.url(), std::chrono::milliseconds(2000), fast); }),
              ErrorKind::InvalidConfig);
}

TEST(Retrieve, SingleRecordIndex) {
    Index index(256);
    store::VectorRecord r;
    r.chunk_id = "only";
    r.text = "equality before law";
    r.vector = embed::embed_text(r.text, embed::EmbedderConfig{});
    index.store.upsert({r});
    const auto hits = retrieve("anything at all", 1, false, index, engine_cfg());
    ASSERT_EQ(hits.size(), 1u);
    EXPECT_EQ(hits[0].chunk_id, "only");
    EXPECT_EQ(kind_of([&] { retrieve("q", 0, false, index, engine_cfg()); }), ErrorKind::InvalidConfig);
}

TEST(Retrieve, UniqueKeywordRanksItsArticleFirst) {
    const auto index = lexrag::testing::mini_corpus_index();
    const auto articles = nlohmann::json::parse(lexrag::testing::read_file(fixture("corpus/articles.json")));
    for (const auto& a : articles) {
        const auto hits = retrieve(a["question"].get<std::string>(), 3, false, index, engine_cfg());
        ASSERT_EQ(hits.size(), 3u);
        const auto& path = a["path"].get<std::string>();
        EXPECT_EQ(hits[0].path.rfind(path, 0), 0u) << a["question"] << " got " << hits[0].path;
    }
}

TEST(Retrieve, RerankWithoutWiderPoolKeepsTheSet) {
    const auto index = lexrag::testing::mini_corpus_index();
    auto cfg = engine_cfg();
    cfg.rerank_pool = 0;
    const auto plain = retrieve("What shall the council certify?", 5, false, index, cfg);
    const auto reranked = retrieve("What shall the council certify?", 5, true, index, cfg);
    std::set<std::string> a, b;
    for (const auto& h : plain) a.insert(h.chunk_id);
    for (const auto& h : reranked) {
        b.insert(h.chunk_id);
        EXPECT_TRUE(h.rerank_score.has_value());
    }
    EXPECT_EQ(a, b);
}

TEST(Answer, MatchesFrozenGolden) {
    const auto golden = nlohmann::json::parse(lexrag::testing::read_file(fixture("corpus/golden_answer.json")));
    const auto index = lexrag::testing::mini_corpus_index();
    auto cfg = engine_cfg();
    cfg.k = golden["k"].get<std::size_t>();
    const auto r = answer(golden["question"].get<std::string>(), index, cfg);
    EXPECT_EQ(without_latency(r), golden["result"]);
    ASSERT_EQ(r.citations.size(), 1u);
    EXPECT_GE(r.latency_ms, 0.0);
}

TEST(Answer, DeterministicAndCitationsSound) {
    const auto index = lexrag::testing::mini_corpus_index();
    const auto cfg = engine_cfg();
    const auto gold = nlohmann::json::parse(lexrag::testing::read_file(fixture("corpus/articles.json")));
    for (const auto& a : gold) {
        const auto q = a["question"].get<std::string>();
        const auto r1 = answer(q, index, cfg), r2 = answer(q, index, cfg);
        ASSERT_EQ(without_latency(r1).dump(), without_latency(r2).dump());
        const auto prompt = build_prompt(q, r1.retrieved, cfg.budget_tokens);
        for (const auto& c : r1.citations) {
            EXPECT_NE(std::find(prompt.included.begin(), prompt.included.end(), c), prompt.included.end());
        }
        EXPECT_FALSE(r1.answer.empty());
    }
}

TEST(Answer, EmptyIndexFailsBeforeEmbedding) {
    Index empty(256);
    auto cfg = engine_cfg();
    cfg.embedder.provider = embed::Provider::remote;
    cfg.embedder.remote_base_url = "http://127.0.0.1:" + std::to_string(lexrag::testing::dead_port());
    EXPECT_EQ(kind_of([&] { answer("q", empty, cfg); }), ErrorKind::EmptyIndex);
    EXPECT_EQ(kind_of([&] { retrieve("q", 3, false, empty, cfg); }), ErrorKind::EmptyIndex);
}

TEST(Answer, UnreachableGeneratorKeepsRetrieval) {
    const auto index = lexrag::testing::mini_corpus_index();
    auto cfg = engine_cfg();
    cfg.backend = Backend::remote;
    cfg.gen_base_url = "http://127.0.0.1:" + std::to_string(lexrag::testing::dead_port());
    cfg.retry = {3, std::chrono::milliseconds(5)};
    try {
        answer("What shall the council certify?", index, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::RemoteUnavailable);
        ASSERT_TRUE(e.detail().contains("retrieved"));
        EXPECT_EQ(e.detail()["retrieved"].size(), cfg.k);
    }
}

TEST(Answer, RemoteCitesEveryIncludedChunk) {
    MockServer mock;
    mock.http().Post("/generate", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"generated_text":"Generated."})", "application/json");
    });
    mock.start();
    const auto index = lexrag::testing::mini_corpus_index();
    auto cfg = engine_cfg();
    cfg.backend = Backend::remote;
    cfg.gen_base_url = mock.url();
    const auto r = answer("What shall the council certify?", index, cfg);
    EXPECT_EQ(r.answer, "Generated.");
    EXPECT_EQ(r.citations, build_prompt("What shall the council certify?", r.retrieved, cfg.budget_tokens).included);
    EXPECT_EQ(to_json(r)["backend"], "remote");
}

TEST(Backend, Names) {
    EXPECT_EQ(backend_from_string("stub"), Backend::stub);
    EXPECT_EQ(to_string(Backend::remote), "remote");
    EXPECT_EQ(kind_of([] { backend_from_string("gpt"); }), ErrorKind::InvalidConfig);
}

TEST(IndexOpen, MissingDirectoryIsEmptyIndex) {
    lexrag::testing::TempDir dir;
    EXPECT_EQ(kind_of([&] { Index::open(dir.path()); }), ErrorKind::EmptyIndex);
}
