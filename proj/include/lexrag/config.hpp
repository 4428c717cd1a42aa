#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "lexrag/chunker.hpp"
#include "lexrag/ingest.hpp"
#include "lexrag/rag.hpp"
#include "lexrag/rerank.hpp"

namespace lexrag {

/// Everything the CLI and server read from config.json. The API token is
/// deliberately absent: it only ever comes from LEXRAG_API_TOKEN.
struct AppConfig {
    std::string bind_addr = "127.0.0.1:8080";
    std::filesystem::path index_dir;
    std::filesystem::path static_dir;  // empty: no UI
    ingest::HeadingGrammar grammar;
    chunker::ChunkConfig chunk;
    rerank::TrainConfig train;
    rag::EngineConfig engine;

    /// Overlays the keys present in `j` onto `base`.
    static AppConfig from_json(const nlohmann::json& j, AppConfig base);
    static AppConfig from_json(const nlohmann::json& j);
    static AppConfig load(const std::filesystem::path& file);
    nlohmann::json to_json() const;

    /// Validates every section and copies shared values between them.
    void finalize();
};

}  // namespace lexrag
