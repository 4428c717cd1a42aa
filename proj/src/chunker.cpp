#include "lexrag/chunker.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "lexrag/error.hpp"

namespace lexrag::chunker {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

void collect_boundaries(const ingest::StructNode& node, std::set<std::size_t>& out) {
    if (node.kind == ingest::NodeKind::article || node.kind == ingest::NodeKind::schedule) {
        out.insert(node.span.start);
        out.insert(node.span.end);
        return;  // clauses stay inside their article
    }
    for (const auto& child : node.children) collect_boundaries(child, out);
}

}  // namespace

void ChunkConfig::validate() const {
    if (max_tokens == 0) throw Error(ErrorKind::InvalidConfig, "max_tokens must be positive");
    if (overlap_tokens >= max_tokens) {
        throw Error(ErrorKind::InvalidConfig, "overlap_tokens (" + std::to_string(overlap_tokens) +
                                                  ") must be smaller than max_tokens (" +
                                                  std::to_string(max_tokens) + ")");
    }
}

std::vector<Token> tokenize(std::string_view clean_text) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    while (i < clean_text.size()) {
        while (i < clean_text.size() && is_space(clean_text[i])) ++i;
        const auto start = i;
        while (i < clean_text.size() && !is_space(clean_text[i])) ++i;
        if (i > start) tokens.push_back({std::string(clean_text.substr(start, i - start)), {start, i}});
    }
    return tokens;
}

std::vector<Window> windows(std::size_t n, const ChunkConfig& cfg) {
    cfg.validate();
    std::vector<Window> out;
    const std::size_t stride = cfg.max_tokens - cfg.overlap_tokens;
    for (std::size_t start = 0; start < n; start += stride) {
        const std::size_t end = std::min(start + cfg.max_tokens, n);
        out.emplace_back(start, end);
        if (end == n) break;
    }
    return out;
}

std::vector<Span> segments(const ingest::CleanDocument& doc, bool respect_boundaries) {
    const std::size_t len = doc.clean_text.size();
    if (!respect_boundaries) return {Span{0, len}};
    std::set<std::size_t> cuts{0, len};
    collect_boundaries(doc.structure, cuts);
    std::vector<Span> out;
    for (auto it = cuts.begin(); std::next(it) != cuts.end(); ++it) {
        const auto next = *std::next(it);
        if (next > *it) out.push_back({*it, next});
    }
    return out;
}

std::string make_chunk_id(const std::string& doc_id, std::size_t seq) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%05zu", seq);
    return doc_id + ":" + buf;
}

std::vector<Chunk> chunk(const ingest::CleanDocument& doc, const ChunkConfig& cfg) {
    cfg.validate();
    const auto tokens = tokenize(doc.clean_text);
    std::vector<Chunk> chunks;
    std::size_t t = 0;
    for (const auto& seg : segments(doc, cfg.respect_boundaries)) {
        const auto first = t;
        while (t < tokens.size() && tokens[t].span.start < seg.end) ++t;
        const std::size_t n = t - first;
        for (const auto& [a, b] : windows(n, cfg)) {
            const Span span{tokens[first + a].span.start, tokens[first + b - 1].span.end};
            Chunk c;
            c.chunk_id = make_chunk_id(doc.doc_id, chunks.size());
            c.doc_id = doc.doc_id;
            c.text = doc.clean_text.substr(span.start, span.length());
            c.span = span;
            c.token_count = b - a;
            c.path = ingest::structure_path(ingest::chain_at(doc.structure, span.start));
            chunks.push_back(std::move(c));
        }
    }
    return chunks;
}

}  // namespace lexrag::chunker
