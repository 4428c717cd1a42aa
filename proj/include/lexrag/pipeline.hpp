#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "lexrag/config.hpp"
#include "lexrag/ingest.hpp"
#include "lexrag/rag.hpp"
#include "lexrag/rerank.hpp"
#include "lexrag/vecstore.hpp"

namespace lexrag::pipeline {

struct IngestReport {
    std::string doc_id;
    std::size_t pages = 0;
    std::size_t chunks = 0;
    std::vector<std::string> warnings;

    nlohmann::json to_json() const;
};

/// clean -> chunk -> embed -> upsert. Earlier chunks of the same doc_id are
/// dropped first, so re-ingesting a changed document leaves no stale chunks.
IngestReport ingest_document(const ingest::Document& doc, store::VectorStore& s, const AppConfig& cfg);

IngestReport ingest_path(const std::string& path, store::VectorStore& s, const AppConfig& cfg,
                         std::string doc_id = {});

/// Empty store of the configured dimension when `dir` holds no index yet.
store::VectorStore open_or_create(const std::filesystem::path& dir, std::size_t dim);

/// Takes the directory writer lock, ingests and saves the snapshot.
IngestReport ingest_into_index(const std::string& path, const std::filesystem::path& dir, const AppConfig& cfg);

/// Features of one (question, indexed chunk) pair.
rerank::Features pair_features(const std::string& question, const store::VectorRecord& record,
                               const rag::EngineConfig& cfg);

/// Reads a training file. Each line is either
///   {"question": "...", "chunk_id": "...", "label": 0|1}
/// (features computed against the index) or
///   {"features": [f1, f2, f3, f4], "label": 0|1}.
std::vector<rerank::Example> load_training_set(const std::filesystem::path& file, const rag::Index& index,
                                               const rag::EngineConfig& cfg);

}  // namespace lexrag::pipeline
