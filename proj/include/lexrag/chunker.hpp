#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lexrag/ingest.hpp"

namespace lexrag::chunker {

using ingest::Span;

struct Token {
    std::string text;
    Span span;
};

struct ChunkConfig {
    std::size_t max_tokens = 180;
    std::size_t overlap_tokens = 30;
    bool respect_boundaries = true;

    /// Throws Error{InvalidConfig} unless 0 <= overlap < max.
    void validate() const;
};

struct Chunk {
    std::string chunk_id;
    std::string doc_id;
    std::string text;
    Span span;
    std::size_t token_count = 0;
    std::string path;
};

/// Half-open token index range [first, last).
using Window = std::pair<std::size_t, std::size_t>;

std::vector<Token> tokenize(std::string_view clean_text);

/// Sliding windows over `n` tokens; the last window is the first to reach n.
std::vector<Window> windows(std::size_t n, const ChunkConfig& cfg);

/// Text regions that chunks may not cross: one per article and schedule,
/// plus the gaps between them. A single region when boundaries are ignored.
std::vector<Span> segments(const ingest::CleanDocument& doc, bool respect_boundaries);

std::vector<Chunk> chunk(const ingest::CleanDocument& doc, const ChunkConfig& cfg);

std::string make_chunk_id(const std::string& doc_id, std::size_t seq);

}  // namespace lexrag::chunker
