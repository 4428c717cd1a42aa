#include "lexrag/ingest.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <sstream>

#include "lexrag/error.hpp"
#include "lexrag/pdf.hpp"
#include "lexrag/text.hpp"

namespace lexrag::ingest {

namespace {

constexpr std::size_t kCandidateZone = 3;

std::string nfc(std::string_view s) {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) return std::string(s);
    const auto u = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
    icu::UnicodeString out = norm->normalize(u, status);
    if (U_FAILURE(status)) return std::string(s);
    std::string result;
    out.toUTF8String(result);
    return result;
}

UChar32 first_code_point(std::string_view s) {
    if (s.empty()) return U_SENTINEL;
    int32_t i = 0;
    UChar32 c = 0;
    U8_NEXT(reinterpret_cast<const uint8_t*>(s.data()), i, static_cast<int32_t>(s.size()), c);
    return c;
}

UChar32 last_code_point(std::string_view s) {
    if (s.empty()) return U_SENTINEL;
    auto i = static_cast<int32_t>(s.size());
    UChar32 c = 0;
    U8_PREV(reinterpret_cast<const uint8_t*>(s.data()), 0, i, c);
    return c;
}

std::string map_quotes(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i + 2 < s.size() && static_cast<unsigned char>(s[i]) == 0xE2 &&
            static_cast<unsigned char>(s[i + 1]) == 0x80) {
            const auto third = static_cast<unsigned char>(s[i + 2]);
            if (third >= 0x98 && third <= 0x9B) {
                out.push_back('\'');
                i += 2;
                continue;
            }
            if (third >= 0x9C && third <= 0x9F) {
                out.push_back('"');
                i += 2;
                continue;
            }
        }
        out.push_back(s[i]);
    }
    return out;
}

std::string collapse_line(std::string_view line) {
    std::string out;
    out.reserve(line.size());
    bool pending_space = false;
    for (char c : line) {
        if (c == ' ' || c == '\t') {
            pending_space = true;
            continue;
        }
        if (pending_space && !out.empty()) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    }
    return std::string(text::trim(out));
}

bool ends_with_letter_hyphen(std::string_view line) {
    if (line.size() < 2 || line.back() != '-') return false;
    return u_isalpha(last_code_point(line.substr(0, line.size() - 1)));
}

bool starts_lowercase(std::string_view line) {
    const auto c = first_code_point(line);
    return c >= 0 && u_islower(c);
}

int ceil_sixty_percent(std::size_t n) { return static_cast<int>((6 * n + 9) / 10); }

std::string remainder_title(const std::string& line, std::size_t matched) {
    std::string_view rest = std::string_view(line).substr(matched);
    rest = text::trim(rest);
    // Drop a leading separator such as "-" or an en/em dash.
    for (std::string_view sep : {"—", "–", "-", ":", "."}) {
        if (rest.substr(0, sep.size()) == sep) {
            rest = text::trim(rest.substr(sep.size()));
            break;
        }
    }
    return std::string(rest);
}

struct FlatNode {
    NodeKind kind;
    std::string label;
    std::string title;
    std::size_t start;
    std::size_t end = 0;
    int parent;  // -1 = root
};

int level(NodeKind k) {
    switch (k) {
        case NodeKind::part:
        case NodeKind::schedule: return 1;
        case NodeKind::article: return 2;
        case NodeKind::clause: return 3;
        case NodeKind::paragraph: return 0;
    }
    return 0;
}

StructNode build_subtree(const std::vector<FlatNode>& flat, int idx) {
    StructNode node;
    const auto& f = flat[static_cast<std::size_t>(idx)];
    node.kind = f.kind;
    node.label = f.label;
    node.title = f.title;
    node.span = {f.start, f.end};
    for (std::size_t i = 0; i < flat.size(); ++i) {
        if (flat[i].parent == idx) node.children.push_back(build_subtree(flat, static_cast<int>(i)));
    }
    return node;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::string_view to_string(NodeKind kind) {
    switch (kind) {
        case NodeKind::part: return "part";
        case NodeKind::article: return "article";
        case NodeKind::schedule: return "schedule";
        case NodeKind::clause: return "clause";
        case NodeKind::paragraph: return "paragraph";
    }
    return "paragraph";
}

HeadingGrammar HeadingGrammar::from_json(const nlohmann::json& j) {
    HeadingGrammar g;
    g.part = j.value("part", g.part);
    g.article = j.value("article", g.article);
    g.schedule = j.value("schedule", g.schedule);
    g.clause = j.value("clause", g.clause);
    return g;
}

std::string furniture_key(std::string_view line) {
    std::string key;
    bool pending_space = false;
    for (char c : text::trim(line)) {
        if (c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
            pending_space = true;
            continue;
        }
        if (pending_space) key.push_back(' ');
        pending_space = false;
        if (c >= '0' && c <= '9') {
            key.push_back('#');
        } else if (c >= 'A' && c <= 'Z') {
            key.push_back(static_cast<char>(c - 'A' + 'a'));
        } else {
            key.push_back(c);
        }
    }
    return key;
}

bool is_page_number_line(std::string_view line) {
    static const std::regex pattern(
        R"(^(?:-|–|—|\(|\[|\)|\])?\s*(?:\d{1,4}|[ivxlcdmIVXLCDM]{1,7})\s*(?:-|–|—|\(|\[|\)|\])?$)");
    const auto t = text::trim(line);
    return !t.empty() && std::regex_match(t.begin(), t.end(), pattern);
}

StripResult strip_furniture(const std::vector<PageText>& pages) {
    // Candidate line indices per page: first and last three non-blank lines.
    std::vector<std::set<std::size_t>> candidates(pages.size());
    for (std::size_t p = 0; p < pages.size(); ++p) {
        std::vector<std::size_t> non_blank;
        for (std::size_t i = 0; i < pages[p].lines.size(); ++i) {
            if (!text::is_blank(pages[p].lines[i])) non_blank.push_back(i);
        }
        const auto n = non_blank.size();
        for (std::size_t i = 0; i < n; ++i) {
            if (i < kCandidateZone || i + kCandidateZone >= n) candidates[p].insert(non_blank[i]);
        }
    }

    std::set<std::string> furniture_keys;
    if (pages.size() >= 3) {
        std::map<std::string, std::set<std::size_t>> pages_by_key;
        for (std::size_t p = 0; p < pages.size(); ++p) {
            for (auto i : candidates[p]) pages_by_key[furniture_key(pages[p].lines[i])].insert(p);
        }
        const auto threshold = static_cast<std::size_t>(ceil_sixty_percent(pages.size()));
        for (const auto& [key, on_pages] : pages_by_key) {
            if (on_pages.size() >= threshold) furniture_keys.insert(key);
        }
    }

    StripResult result;
    result.pages.reserve(pages.size());
    for (std::size_t p = 0; p < pages.size(); ++p) {
        PageText kept{pages[p].page_no, {}};
        for (std::size_t i = 0; i < pages[p].lines.size(); ++i) {
            const auto& line = pages[p].lines[i];
            const bool remove = candidates[p].count(i) &&
                                (furniture_keys.count(furniture_key(line)) || is_page_number_line(line));
            if (remove) {
                result.removed.push_back({pages[p].page_no, line});
            } else {
                kept.lines.push_back(line);
            }
        }
        result.pages.push_back(std::move(kept));
    }
    return result;
}

std::string normalize_text(std::string_view raw) {
    std::string s = nfc(raw);

    std::string lf;
    lf.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\r') {
            lf.push_back('\n');
            if (i + 1 < s.size() && s[i + 1] == '\n') ++i;
        } else {
            lf.push_back(s[i]);
        }
    }
    s = map_quotes(lf);

    std::vector<std::string> lines;
    for (auto line : text::split_lines(s)) lines.push_back(collapse_line(line));

    // Hyphenation repair: "fun-" + "damental" -> "fundamental".
    std::vector<std::string> joined;
    for (auto& line : lines) {
        if (!joined.empty() && ends_with_letter_hyphen(joined.back()) && starts_lowercase(line)) {
            joined.back().pop_back();
            joined.back() += line;
        } else {
            joined.push_back(std::move(line));
        }
    }

    // Runs of three or more blank lines collapse to one.
    std::vector<std::string_view> kept;
    std::size_t blank_run = 0;
    auto flush_blanks = [&] {
        const std::size_t keep = blank_run >= 3 ? 1 : blank_run;
        kept.insert(kept.end(), keep, std::string_view());
        blank_run = 0;
    };
    for (const auto& line : joined) {
        if (line.empty()) {
            ++blank_run;
            continue;
        }
        flush_blanks();
        kept.push_back(line);
    }
    flush_blanks();

    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < kept.size(); ++i) {
        if (i > 0) out.push_back('\n');
        out += kept[i];
    }
    return nfc(out);
}

StructNode detect_structure(std::string_view clean_text, const HeadingGrammar& grammar) {
    const std::regex part_re(grammar.part);
    const std::regex article_re(grammar.article);
    const std::regex schedule_re(grammar.schedule);
    const std::regex clause_re(grammar.clause);

    std::vector<FlatNode> flat;
    int current_part = -1;
    int current_article = -1;
    bool in_schedule = false;

    auto close_open = [&](std::size_t at, int min_level) {
        // Every open node at `min_level` or deeper ends where this heading starts.
        for (auto& n : flat) {
            if (n.end == 0 && level(n.kind) >= min_level) n.end = at;
        }
    };

    std::size_t offset = 0;
    for (auto line_view : text::split_lines(clean_text)) {
        const std::string line(line_view);
        const std::size_t start = offset;
        offset += line.size() + 1;
        std::smatch m;
        if (std::regex_search(line, m, part_re)) {
            close_open(start, 1);
            flat.push_back({NodeKind::part, m[1].str(), remainder_title(line, m.length(0)), start, 0, -1});
            current_part = static_cast<int>(flat.size()) - 1;
            current_article = -1;
            in_schedule = false;
        } else if (std::regex_search(line, m, schedule_re)) {
            close_open(start, 1);
            flat.push_back({NodeKind::schedule, m[1].str(), remainder_title(line, m.length(0)), start, 0, -1});
            current_part = -1;
            current_article = -1;
            in_schedule = true;
        } else if (!in_schedule && std::regex_search(line, m, article_re)) {
            close_open(start, 2);
            const std::string title = m.size() > 2 ? std::string(text::trim(m[2].str())) : std::string();
            flat.push_back({NodeKind::article, m[1].str(), title, start, 0, current_part});
            current_article = static_cast<int>(flat.size()) - 1;
        } else if (!in_schedule && current_article >= 0 && std::regex_search(line, m, clause_re)) {
            close_open(start, 3);
            flat.push_back({NodeKind::clause, m[0].str(), "", start, 0, current_article});
        }
    }
    for (auto& n : flat) {
        if (n.end == 0) n.end = clean_text.size();
    }

    StructNode root;
    root.kind = NodeKind::paragraph;
    root.span = {0, clean_text.size()};
    for (std::size_t i = 0; i < flat.size(); ++i) {
        if (flat[i].parent == -1) root.children.push_back(build_subtree(flat, static_cast<int>(i)));
    }
    return root;
}

std::string structure_path(const std::vector<const StructNode*>& chain) {
    std::string out;
    for (const auto* node : chain) {
        std::string segment;
        switch (node->kind) {
            case NodeKind::part: segment = "Part " + node->label; break;
            case NodeKind::article: segment = "Article " + node->label; break;
            case NodeKind::schedule: segment = node->label + " Schedule"; break;
            case NodeKind::clause: segment = "Clause " + node->label; break;
            case NodeKind::paragraph: continue;
        }
        if (!out.empty()) out += " / ";
        out += segment;
    }
    return out;
}

std::vector<const StructNode*> chain_at(const StructNode& root, std::size_t offset) {
    std::vector<const StructNode*> chain;
    const StructNode* node = &root;
    while (true) {
        const StructNode* next = nullptr;
        for (const auto& child : node->children) {
            if (child.span.start <= offset && offset < child.span.end) {
                next = &child;
                break;
            }
        }
        if (!next) break;
        chain.push_back(next);
        node = next;
    }
    return chain;
}

std::vector<PageText> pages_from_plain_text(std::string_view text_in) {
    std::vector<PageText> pages;
    std::size_t start = 0;
    int page_no = 1;
    while (start <= text_in.size()) {
        auto ff = text_in.find('\f', start);
        const bool last = ff == std::string_view::npos;
        if (last) ff = text_in.size();
        const auto body = text_in.substr(start, ff - start);
        if (!(last && body.empty() && !pages.empty())) {
            PageText page{page_no++, {}};
            for (auto line : text::split_lines(body)) {
                if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
                page.lines.emplace_back(line);
            }
            pages.push_back(std::move(page));
        }
        if (last) break;
        start = ff + 1;
    }
    return pages;
}

CleanDocument clean_document(const Document& doc, const HeadingGrammar& grammar) {
    CleanDocument out;
    out.doc_id = doc.doc_id;
    out.title = doc.title;
    out.source_uri = doc.source_uri;
    out.page_count = doc.pages.size();
    out.warnings = doc.ingest_warnings;

    auto stripped = strip_furniture(doc.pages);
    out.removed_furniture = std::move(stripped.removed);

    std::string joined;
    for (const auto& page : stripped.pages) {
        for (const auto& line : page.lines) {
            if (line.find("\xEF\xBF\xBD") != std::string::npos) {
                out.warnings.push_back("page " + std::to_string(page.page_no) +
                                       ": replacement characters in extracted text");
                break;
            }
        }
        for (const auto& line : page.lines) {
            joined += line;
            joined.push_back('\n');
        }
    }
    out.clean_text = normalize_text(joined);
    out.structure = detect_structure(out.clean_text, grammar);
    if (out.structure.children.empty() && !out.clean_text.empty()) {
        out.warnings.push_back("no structural headings detected");
    }
    return out;
}

std::string doc_id_from_path(const std::string& path) {
    const std::string stem = std::filesystem::path(path).stem().string();
    std::string id;
    bool gap = false;
    for (char c : stem) {
        const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-';
        if (!keep) {
            gap = !id.empty();
            continue;
        }
        if (gap) id.push_back('_');
        gap = false;
        id.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
    }
    return id.empty() ? "doc" : id;
}

Document load_document(const std::string& path, std::string doc_id) {
    const std::string bytes = read_file(path);
    Document doc;
    doc.doc_id = doc_id.empty() ? doc_id_from_path(path) : std::move(doc_id);
    doc.source_uri = path;
    if (bytes.substr(0, std::min<std::size_t>(bytes.size(), 1024)).find("%PDF-") != std::string::npos) {
        auto pdf = read_pdf(bytes);
        doc.pages = std::move(pdf.pages);
        doc.title = pdf.title;
        doc.ingest_warnings = std::move(pdf.warnings);
    } else {
        doc.pages = pages_from_plain_text(bytes);
    }
    if (doc.title.empty()) doc.title = std::filesystem::path(path).stem().string();
    return doc;
}

nlohmann::json to_json(const StructNode& node) {
    nlohmann::json children = nlohmann::json::array();
    for (const auto& c : node.children) children.push_back(to_json(c));
    return {{"kind", to_string(node.kind)},
            {"label", node.label},
            {"title", node.title},
            {"span", {node.span.start, node.span.end}},
            {"children", std::move(children)}};
}

nlohmann::json to_json(const CleanDocument& doc) {
    nlohmann::json removed = nlohmann::json::array();
    for (const auto& r : doc.removed_furniture) removed.push_back({{"page_no", r.page_no}, {"line", r.line}});
    return {{"doc_id", doc.doc_id},       {"title", doc.title},
            {"source_uri", doc.source_uri}, {"pages", doc.page_count},
            {"clean_text", doc.clean_text}, {"structure", to_json(doc.structure)},
            {"removed_furniture", removed}, {"warnings", doc.warnings}};
}

}  // namespace lexrag::ingest
