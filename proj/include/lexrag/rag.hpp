#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lexrag/embedder.hpp"
#include "lexrag/http_client.hpp"
#include "lexrag/rerank.hpp"
#include "lexrag/vecstore.hpp"

namespace lexrag::rag {

inline constexpr const char* kRerankerFile = "reranker.json";

/// A loaded index directory: vectors plus the optional trained re-ranker.
struct Index {
    store::VectorStore store;
    std::optional<rerank::RerankModel> model;

    explicit Index(std::size_t dim) : store(dim) {}
    Index(store::VectorStore s, std::optional<rerank::RerankModel> m) : store(std::move(s)), model(std::move(m)) {}

    /// Throws Error{EmptyIndex} when `dir` holds no index, CorruptStore when
    /// it holds a damaged one.
    static Index open(const std::filesystem::path& dir);
};

enum class Backend { stub, remote };

std::string_view to_string(Backend b);
Backend backend_from_string(std::string_view s);

struct GenParams {
    std::size_t max_new_tokens = 256;
    double temperature = 0.0;

    void validate() const;
};

struct EngineConfig {
    embed::EmbedderConfig embedder;
    std::size_t max_tokens = 180;  // chunk window, used by the length feature
    std::size_t k = 5;
    bool rerank = false;
    std::size_t rerank_pool = 20;
    std::size_t budget_tokens = 512;
    Backend backend = Backend::stub;
    GenParams gen;
    std::string gen_base_url;
    int gen_timeout_ms = 60000;
    http::RetryPolicy retry;

    rerank::FeatureContext feature_context() const { return {embedder.dim, max_tokens}; }
    nlohmann::json to_json() const;
};

struct Citation {
    std::string chunk_id;
    std::string path;
    bool operator==(const Citation&) const = default;
};

struct PromptBundle {
    std::string prompt_text;
    std::vector<Citation> included;                // render order
    std::vector<store::ScoredChunk> included_chunks;  // render order
    std::size_t token_count = 0;
    std::size_t budget = 0;
    std::vector<std::string> warnings;
};

struct StubAnswer {
    std::string answer;
    Citation citation;
};

struct AnswerResult {
    std::string answer;
    std::vector<Citation> citations;
    std::vector<store::ScoredChunk> retrieved;
    Backend backend = Backend::stub;
    double latency_ms = 0.0;
    std::vector<std::string> warnings;
};

inline constexpr std::string_view kPromptHeader =
    "You are a legal research assistant. Answer strictly from the context.";

/// Embeds the question, takes max(k, rerank_pool) candidates when
/// re-ranking (k otherwise), re-ranks, truncates to k.
std::vector<store::ScoredChunk> retrieve(std::string_view question, std::size_t k, bool rerank_enabled,
                                         const Index& index, const EngineConfig& cfg);

/// Admits candidates in score order while the rendered prompt fits the
/// whitespace-token budget; renders admitted chunks in document order.
PromptBundle build_prompt(std::string_view question, const std::vector<store::ScoredChunk>& candidates,
                          std::size_t budget_tokens = 512);

/// Sentence boundaries: '.', '?' or '!' followed by whitespace, or a line break.
std::vector<std::string> split_sentences(std::string_view text);

/// Multiset F1 between lowercased alphanumeric tokens of two strings.
double overlap_f1(std::string_view a, std::string_view b);

/// Extractive answer: the included sentence with the best overlap F1.
StubAnswer generate_stub(const PromptBundle& prompt, std::string_view question);

std::string generate_remote(const PromptBundle& prompt, const GenParams& params, const std::string& base_url,
                            std::chrono::milliseconds timeout, const http::RetryPolicy& retry);

AnswerResult answer(std::string_view question, const Index& index, const EngineConfig& cfg);

nlohmann::json to_json(const Citation& c);
nlohmann::json to_json(const AnswerResult& r);

}  // namespace lexrag::rag
