#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "lexrag/embedder.hpp"
#include "lexrag/ingest.hpp"

namespace lexrag::store {

using ingest::Span;
using Meta = std::map<std::string, std::string>;

struct VectorRecord {
    std::uint64_t record_id = 0;  // assigned by the store
    std::string chunk_id;
    std::string doc_id;
    std::string path;
    embed::EmbeddingVector vector;
    std::string text;
    Span span;
    Meta meta;
};

struct ScoredChunk {
    std::string chunk_id;
    std::string doc_id;
    std::string path;
    std::string text;
    Span span;
    double cosine_score = 0.0;
    std::optional<double> rerank_score;

    /// The score results are ordered by: rerank if present, else cosine.
    double active_score() const { return rerank_score.value_or(cosine_score); }
};

/// Descending by active score, ties by chunk_id ascending.
bool ranks_before(const ScoredChunk& a, const ScoredChunk& b);

using Filter = std::function<bool(const VectorRecord&)>;

/// Passes records whose meta[key] == value.
Filter meta_equals(std::string key, std::string value);

/// Test hook invoked at named points of save(): "staged" (temp files
/// written), "records_swapped" (records renamed, manifest not yet).
using SaveHook = std::function<void(std::string_view stage)>;

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kRecordsFile = "records.jsonl";

/// Exact brute-force cosine store. Concurrent top_k calls are safe; upsert
/// takes exclusive access and fails fast with StoreLocked if another writer
/// holds it.
class VectorStore {
public:
    explicit VectorStore(std::size_t dim);
    VectorStore(const VectorStore& other);
    VectorStore& operator=(const VectorStore& other);

    std::size_t dim() const { return dim_; }
    std::size_t size() const;
    bool empty() const { return size() == 0; }

    /// Replaces records with an existing chunk_id, appends the rest.
    /// All-or-nothing: a single bad dimension rejects the whole batch.
    std::size_t upsert(std::vector<VectorRecord> records);

    /// Drops every record of `doc_id`; returns how many were removed.
    std::size_t erase_doc(const std::string& doc_id);

    std::vector<ScoredChunk> top_k(const embed::EmbeddingVector& query, std::size_t k,
                                   const Filter& filter = {}) const;

    std::optional<VectorRecord> get(const std::string& chunk_id) const;
    std::vector<VectorRecord> records() const;
    std::set<std::string> doc_ids() const;

    void save(const std::filesystem::path& dir, const SaveHook& hook = {}) const;
    static VectorStore load(const std::filesystem::path& dir);

private:
    std::size_t dim_;
    std::uint64_t next_id_ = 0;
    std::vector<VectorRecord> records_;
    std::unordered_map<std::string, std::size_t> by_chunk_;
    mutable std::shared_mutex data_mutex_;
    std::mutex writer_mutex_;
};

/// Cross-process exclusive writer lock on an index directory.
class WriterLock {
public:
    /// Throws Error{StoreLocked} when another process or handle holds it.
    explicit WriterLock(const std::filesystem::path& dir);
    ~WriterLock();
    WriterLock(const WriterLock&) = delete;
    WriterLock& operator=(const WriterLock&) = delete;

private:
    int fd_ = -1;
};

bool has_manifest(const std::filesystem::path& dir);

nlohmann::json to_json(const ScoredChunk& c);
nlohmann::json to_json(const VectorRecord& r, bool include_vector);

}  // namespace lexrag::store
