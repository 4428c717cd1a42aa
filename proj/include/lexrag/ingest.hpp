#pragma once

// Document ingestion: page furniture removal, text normalization and legal
// structure detection over extracted pages.

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace lexrag::ingest {

struct PageText {
    int page_no = 0;  // 1-based
    std::vector<std::string> lines;
};

struct Document {
    std::string doc_id;
    std::string title;
    std::string source_uri;
    std::vector<PageText> pages;
    std::vector<std::string> ingest_warnings;
};

/// Half-open byte range [start, end) into a UTF-8 string.
struct Span {
    std::size_t start = 0;
    std::size_t end = 0;

    std::size_t length() const { return end - start; }
    bool contains(const Span& o) const { return start <= o.start && o.end <= end; }
    bool operator==(const Span&) const = default;
};

enum class NodeKind { part, article, schedule, clause, paragraph };

std::string_view to_string(NodeKind kind);

struct StructNode {
    NodeKind kind = NodeKind::paragraph;
    std::string label;
    std::string title;
    Span span;
    std::vector<StructNode> children;
};

struct RemovedLine {
    int page_no = 0;
    std::string line;
};

struct CleanDocument {
    std::string doc_id;
    std::string title;
    std::string source_uri;
    std::string clean_text;
    StructNode structure;
    std::vector<RemovedLine> removed_furniture;
    std::vector<std::string> warnings;
    std::size_t page_count = 0;
};

/// Line-anchored heading patterns (ECMAScript regex). The defaults follow the
/// Constitution of India layout; other layouts can be loaded from config.
struct HeadingGrammar {
    std::string part = R"(^PART\s+([IVXLCDM]+[A-Z]?)\b)";
    std::string article = R"(^(\d{1,3}[A-Z]{0,2})\.\s+(.*))";
    std::string schedule =
        R"(^(FIRST|SECOND|THIRD|FOURTH|FIFTH|SIXTH|SEVENTH|EIGHTH|NINTH|TENTH|ELEVENTH|TWELFTH)\s+SCHEDULE\b)";
    std::string clause = R"(^\((\d{1,2}|[a-z])\))";

    static HeadingGrammar from_json(const nlohmann::json& j);
};

struct StripResult {
    std::vector<PageText> pages;
    std::vector<RemovedLine> removed;
};

/// Key used to compare candidate furniture lines across pages: trimmed,
/// whitespace collapsed, lowercased, digits replaced by '#'.
std::string furniture_key(std::string_view line);

/// True for lines that are only a page number (digits or roman numerals),
/// optionally wrapped in one decoration character per side.
bool is_page_number_line(std::string_view line);

StripResult strip_furniture(const std::vector<PageText>& pages);

std::string normalize_text(std::string_view raw);

StructNode detect_structure(std::string_view clean_text, const HeadingGrammar& grammar = {});

/// Renders a root-to-leaf chain, e.g. "Part III / Article 14 / Clause (1)".
std::string structure_path(const std::vector<const StructNode*>& chain);

/// Root-to-deepest chain of nodes whose span contains `offset`, root excluded.
std::vector<const StructNode*> chain_at(const StructNode& root, std::size_t offset);

/// Splits plain text into pages on form feeds (U+000C).
std::vector<PageText> pages_from_plain_text(std::string_view text);

/// strip_furniture -> join pages -> normalize_text -> detect_structure.
CleanDocument clean_document(const Document& doc, const HeadingGrammar& grammar = {});

/// Reads a .pdf (by magic bytes) or UTF-8 text file into a Document.
Document load_document(const std::string& path, std::string doc_id = {});

/// Derives an index-safe identifier from a file name.
std::string doc_id_from_path(const std::string& path);

nlohmann::json to_json(const StructNode& node);
nlohmann::json to_json(const CleanDocument& doc);

}  // namespace lexrag::ingest
