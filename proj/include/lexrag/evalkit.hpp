#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lexrag/rag.hpp"

namespace lexrag::evalkit {

struct RetrievalCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
};

struct PrfScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct GoldItem {
    std::string question;
    std::vector<std::string> relevant;  // chunk ids or structure paths
    std::optional<std::string> gold_answer;
};

struct QuestionReport {
    std::string question;
    PrfScores scores;
    std::optional<double> answer_f1;
    std::vector<std::string> retrieved;
    std::vector<std::string> relevant;  // resolved chunk ids
};

struct EvalReport {
    std::vector<QuestionReport> per_question;
    PrfScores macro;
    std::optional<double> macro_answer_f1;
    std::size_t skipped = 0;
    std::vector<std::string> skipped_questions;
    nlohmann::json config;
};

RetrievalCounts count(const std::vector<std::string>& retrieved, const std::set<std::string>& relevant);

/// F1 is 0 when precision + recall is 0.
PrfScores prf_from_counts(const RetrievalCounts& c);

/// Set semantics over `retrieved`. Throws Error{EmptyRelevant} for an empty
/// relevant set, which callers treat as "skip this question".
PrfScores retrieval_prf(const std::vector<std::string>& retrieved, const std::set<std::string>& relevant);

/// Multiset F1 over lowercased whitespace tokens.
double answer_token_f1(std::string_view pred, std::string_view gold);

std::vector<GoldItem> parse_gold(std::string_view jsonl);
std::vector<GoldItem> load_gold(const std::filesystem::path& file);

/// Chunk ids matching `relevant`: an entry that names a chunk id is kept;
/// any other entry is a structure path and expands to every chunk whose
/// path equals it or lies beneath it.
std::set<std::string> resolve_relevant(const std::vector<std::string>& relevant, const store::VectorStore& s);

EvalReport run_eval(const std::vector<GoldItem>& gold, const rag::Index& index, const rag::EngineConfig& cfg,
                    std::size_t k);

nlohmann::json to_json(const PrfScores& s);
nlohmann::json to_json(const EvalReport& r);

/// Stable serialization used for eval_report.json.
std::string dump_report(const EvalReport& r);
void write_report(const EvalReport& r, const std::filesystem::path& file);

}  // namespace lexrag::evalkit
