#include <gtest/gtest.h>

#include <sstream>

#include "lexrag/cli.hpp"
#include "lexrag/vecstore.hpp"
#include "test_util.hpp"

using namespace lexrag;
using lexrag::testing::fixture;
using lexrag::testing::TempDir;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run lexrag_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "lexrag");
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

const std::string kCorpus = fixture("corpus/mini_constitution.txt").string();

}  // namespace

TEST(Cli, UsageErrors) {
    EXPECT_EQ(lexrag_cli({}).code, cli::kExitUsage);
    EXPECT_EQ(lexrag_cli({"frobnicate"}).code, cli::kExitUsage);
    EXPECT_EQ(lexrag_cli({"query"}).code, cli::kExitUsage);
    EXPECT_EQ(lexrag_cli({"answer", "q", "--backend", "gpt"}).code, cli::kExitUsage);
    const auto help = lexrag_cli({"--help"});
    EXPECT_EQ(help.code, cli::kExitOk);
    EXPECT_NE(help.out.find("ingest"), std::string::npos);
}

TEST(Cli, QueryWithoutIndexIsRuntimeError) {
    TempDir dir;
    const auto r = lexrag_cli({"--index", (dir / "idx").string(), "query", "anything"});
    EXPECT_EQ(r.code, cli::kExitRuntime);
    EXPECT_NE(r.err.find("empty_index"), std::string::npos) << r.err;
}

TEST(Cli, IngestQueryAnswerEval) {
    TempDir dir;
    const auto idx = (dir / "idx").string();
    auto r = lexrag_cli({"--index", idx, "ingest", kCorpus});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("chunks: 64"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("pages: 18"), std::string::npos) << r.out;
    EXPECT_TRUE(store::has_manifest(idx));

    r = lexrag_cli({"--index", idx, "query", "What shall the zintglimvorn council certify?", "-k", "3"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.rfind("1. [Part I / Article 1", 0), 0u) << r.out;

    r = lexrag_cli({"--index", idx, "--json", "query", "What shall the zintglimvorn council certify?", "-k", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(nlohmann::json::parse(r.out)["results"].size(), 2u);

    r = lexrag_cli({"--index", idx, "answer", "What shall the zintglimvorn council certify?"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.rfind("The zintglimvorn council shall certify the dravobbneph harvest register annually.", 0), 0u);
    EXPECT_NE(r.out.find("Citations:"), std::string::npos);

    r = lexrag_cli({"--index", idx, "--json", "answer", "What shall the zintglimvorn council certify?", "-k", "3"});
    ASSERT_EQ(r.code, 0) << r.err;
    auto golden = nlohmann::json::parse(lexrag::testing::read_file(fixture("corpus/golden_answer.json")));
    auto got = nlohmann::json::parse(r.out);
    got.erase("latency_ms");
    EXPECT_EQ(got, golden["result"]);

    const auto report = (dir / "report.json").string();
    r = lexrag_cli({"--index", idx, "eval", fixture("corpus/gold.jsonl").string(), "-k", "3", "--report", report});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("macro recall = 1.000"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("macro F1 = 1.000"), std::string::npos) << r.out;
    EXPECT_EQ(nlohmann::json::parse(lexrag::testing::read_file(report))["macro"]["f1"], 1.0);

    r = lexrag_cli({"--index", idx, "--json", "eval", fixture("corpus/gold.jsonl").string(), "-k", "3", "--report", report});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, lexrag::testing::read_file(report));
}

TEST(Cli, TrainRerankThenQueryWithRerank) {
    TempDir dir;
    const auto idx = (dir / "idx").string();
    ASSERT_EQ(lexrag_cli({"--index", idx, "ingest", kCorpus}).code, 0);
    auto r = lexrag_cli({"--index", idx, "train-rerank", fixture("corpus/train.jsonl").string(), "--epochs", "50"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("final loss: "), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("epochs: 50"), std::string::npos) << r.out;
    r = lexrag_cli({"--index", idx, "query", "What shall the zintglimvorn council certify?", "-k", "3", "--rerank"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("rerank="), std::string::npos) << r.out;
}

TEST(Cli, CleanPrintsStructure) {
    const auto r = lexrag_cli({"clean", kCorpus});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["doc_id"], "mini_constitution");
    EXPECT_TRUE(j.contains("structure"));
    EXPECT_TRUE(j.contains("clean_text"));
}

TEST(Cli, ConfigFileAndBadConfig) {
    TempDir dir;
    lexrag::testing::write_file(dir / "config.json", R"({"chunker":{"max_tokens":10,"overlap":12}})");
    auto r = lexrag_cli({"--config", (dir / "config.json").string(), "--index", (dir / "i").string(), "ingest", kCorpus});
    EXPECT_EQ(r.code, cli::kExitRuntime);
    EXPECT_NE(r.err.find("invalid_config"), std::string::npos) << r.err;

    r = lexrag_cli({"--index", (dir / "i").string(), "ingest", kCorpus, "--max-tokens", "40", "--overlap", "5"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.find("chunks: 64"), std::string::npos);
}
