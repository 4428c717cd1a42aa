#include <gtest/gtest.h>

#include <random>

#include "json.hpp"
#include "lexrag/chunker.hpp"
#include "lexrag/error.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace lexrag;
using namespace lexrag::chunker;
using lexrag::testing::fixture;
using lexrag::testing::read_file;

namespace {

ChunkConfig cfg_of(std::size_t max, std::size_t overlap, bool respect = true) {
    ChunkConfig c;
    c.max_tokens = max;
    c.overlap_tokens = overlap;
    c.respect_boundaries = respect;
    return c;
}

std::vector<std::string> texts(const std::vector<Token>& t) {
    std::vector<std::string> out;
    for (const auto& x : t) out.push_back(x.text);
    return out;
}

}  // namespace

TEST(Tokenize, Examples) {
    const auto t = tokenize("a b  c");
    EXPECT_EQ(texts(t), (std::vector<std::string>{"a", "b", "c"}));
    EXPECT_EQ(t[0].span, (Span{0, 1}));
    EXPECT_EQ(t[1].span, (Span{2, 3}));
    EXPECT_EQ(t[2].span, (Span{5, 6}));
    EXPECT_TRUE(tokenize("").empty());
    const auto x = tokenize(" x ");
    ASSERT_EQ(x.size(), 1u);
    EXPECT_EQ(x[0].span, (Span{1, 2}));
}

TEST(Windows, TenTokensMaxFourOverlapOne) {
    EXPECT_EQ(windows(10, cfg_of(4, 1)), (std::vector<Window>{{0, 4}, {3, 7}, {6, 10}}));
}

TEST(Windows, ShortInputIsOneWindow) {
    EXPECT_EQ(windows(3, cfg_of(4, 1)), (std::vector<Window>{{0, 3}}));
    EXPECT_TRUE(windows(0, cfg_of(4, 1)).empty());
}

TEST(Windows, MatchEnumerationOracle) {
    for (std::size_t n = 0; n < 120; ++n) {
        for (std::size_t max = 1; max < 12; ++max) {
            for (std::size_t ov = 0; ov < max; ++ov) {
                const auto got = windows(n, cfg_of(max, ov));
                const auto want = oracle::windows(n, max, ov);
                ASSERT_EQ(got.size(), want.size()) << n << " " << max << " " << ov;
                for (std::size_t i = 0; i < got.size(); ++i) {
                    ASSERT_EQ(got[i].first, want[i].first);
                    ASSERT_EQ(got[i].second, want[i].second);
                    if (i > 0 && i + 1 < got.size()) ASSERT_EQ(got[i - 1].second - got[i].first, ov);
                }
            }
        }
    }
}

TEST(Chunk, TwoArticlesNeverShareAWindow) {
    const auto doc = oracle::make_clean("1. Alpha b c d\n2. Beta f g h\n");
    const auto chunks = chunk(doc, cfg_of(4, 1));
    ASSERT_EQ(chunks.size(), 4u);
    EXPECT_EQ(chunks[0].text, "1. Alpha b c");
    EXPECT_EQ(chunks[1].text, "c d");
    EXPECT_EQ(chunks[2].text, "2. Beta f g");
    EXPECT_EQ(chunks[3].text, "g h");
    EXPECT_EQ(chunks[0].path, "Article 1");
    EXPECT_EQ(chunks[3].path, "Article 2");
    EXPECT_EQ(chunks[0].chunk_id, "doc:00000");
    EXPECT_EQ(chunks[3].chunk_id, "doc:00003");

    const auto flat = chunk(doc, cfg_of(4, 1, false));
    ASSERT_EQ(flat.size(), 3u);
    EXPECT_EQ(flat[1].text, "c d\n2. Beta");
}

TEST(Chunk, InvalidConfigRejected) {
    const auto doc = oracle::make_clean("x y z");
    for (auto [max, ov] : std::vector<std::pair<std::size_t, std::size_t>>{{4, 4}, {4, 5}, {0, 0}}) {
        try {
            chunk(doc, cfg_of(max, ov));
            FAIL() << max << "/" << ov;
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::InvalidConfig);
        }
    }
}

TEST(Chunk, ReconstructionAndBoundaryProperty) {
    std::mt19937_64 rng(2024);
    for (int d = 0; d < 50; ++d) {
        const auto doc = oracle::make_clean(oracle::random_legal_text(rng));
        for (int c = 0; c < 10; ++c) {
            const std::size_t max = 1 + rng() % 40;
            const auto cfg = cfg_of(max, rng() % max, rng() % 4 != 0);
            const auto chunks = chunk(doc, cfg);
            ASSERT_EQ(oracle::check_chunking(doc, chunks, cfg), "") << "doc " << d << " cfg " << c;

            const auto segs = segments(doc, cfg.respect_boundaries);
            for (const auto& ch : chunks) {
                const bool inside = std::any_of(segs.begin(), segs.end(), [&](const Span& s) { return s.contains(ch.span); });
                ASSERT_TRUE(inside) << ch.chunk_id;
                const auto chain = ingest::chain_at(doc.structure, ch.span.start);
                ASSERT_EQ(ch.path, ingest::structure_path(chain));
            }
        }
    }
}

TEST(Chunk, MiniCorpusMatchesOracleLayout) {
    const auto doc = ingest::clean_document(ingest::load_document(fixture("corpus/mini_constitution.txt").string()));
    const auto chunks = chunk(doc, ChunkConfig{});
    const auto expected = nlohmann::json::parse(read_file(fixture("corpus/expected.json")));
    ASSERT_EQ(chunks.size(), expected["chunk_count"].get<std::size_t>());
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        const auto& e = expected["chunks"][i];
        EXPECT_EQ(chunks[i].chunk_id, e["chunk_id"].get<std::string>());
        EXPECT_EQ(chunks[i].path, e["path"].get<std::string>());
        EXPECT_EQ(chunks[i].token_count, e["token_count"].get<std::size_t>());
    }
}
