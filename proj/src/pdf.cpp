#include "lexrag/pdf.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <type_traits>
#include <unordered_map>
#include <variant>

#include "lexrag/error.hpp"

namespace lexrag::ingest {

namespace {

// ---------------------------------------------------------------------------
// Object model

struct Object;
using Array = std::vector<Object>;
using Dict = std::map<std::string, Object>;

struct Null {};
struct Name {
    std::string value;
};
struct PdfString {
    std::string bytes;
};
struct Ref {
    int num = 0;
    int gen = 0;
};
struct Keyword {
    std::string value;
};
struct Stream {
    std::shared_ptr<const Dict> dict;
    std::string_view raw;
};

struct Object {
    using Value = std::variant<Null, bool, double, Name, PdfString, std::shared_ptr<Array>,
                               std::shared_ptr<Dict>, Ref, Stream, Keyword>;
    Value v;

    Object() : v(Null{}) {}
    template <typename T>
        requires(!std::is_same_v<std::decay_t<T>, Object>)
    Object(T&& x) : v(std::forward<T>(x)) {}  // NOLINT

    bool is_null() const { return std::holds_alternative<Null>(v); }
    const Name* name() const { return std::get_if<Name>(&v); }
    const PdfString* str() const { return std::get_if<PdfString>(&v); }
    const Ref* ref() const { return std::get_if<Ref>(&v); }
    const Stream* stream() const { return std::get_if<Stream>(&v); }
    const Keyword* keyword() const { return std::get_if<Keyword>(&v); }
    const Array* array() const {
        const auto* p = std::get_if<std::shared_ptr<Array>>(&v);
        return p ? p->get() : nullptr;
    }
    const Dict* dict() const {
        if (const auto* p = std::get_if<std::shared_ptr<Dict>>(&v)) return p->get();
        if (const auto* s = stream()) return s->dict.get();
        return nullptr;
    }
    std::optional<double> number() const {
        if (const auto* d = std::get_if<double>(&v)) return *d;
        return std::nullopt;
    }
};

const Object kNull;

const Object& dict_get(const Dict* d, const std::string& key) {
    if (!d) return kNull;
    auto it = d->find(key);
    return it == d->end() ? kNull : it->second;
}

[[noreturn]] void malformed(const std::string& what) {
    throw Error(ErrorKind::MalformedPdf, "malformed PDF: " + what);
}

// ---------------------------------------------------------------------------
// Lexer / parser

bool is_ws(char c) { return c == 0 || c == '\t' || c == '\n' || c == '\f' || c == '\r' || c == ' '; }
bool is_delim(char c) {
    return c == '(' || c == ')' || c == '<' || c == '>' || c == '[' || c == ']' || c == '{' || c == '}' ||
           c == '/' || c == '%';
}
int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

class Parser {
public:
    explicit Parser(std::string_view s, std::size_t pos = 0) : s_(s), pos_(pos) {}

    std::size_t pos() const { return pos_; }
    void seek(std::size_t p) { pos_ = p; }
    bool at_end() {
        skip_ws();
        return pos_ >= s_.size();
    }

    void skip_ws() {
        while (pos_ < s_.size()) {
            if (is_ws(s_[pos_])) {
                ++pos_;
            } else if (s_[pos_] == '%') {
                while (pos_ < s_.size() && s_[pos_] != '\n' && s_[pos_] != '\r') ++pos_;
            } else {
                break;
            }
        }
    }

    /// Parses one object. With `allow_refs`, "n g R" sequences become Ref.
    Object parse(bool allow_refs = true, int depth = 0) {
        if (depth > 256) malformed("nesting too deep");
        skip_ws();
        if (pos_ >= s_.size()) malformed("unexpected end of data");
        const char c = s_[pos_];
        if (c == '/') return parse_name();
        if (c == '(') return parse_literal();
        if (c == '<') {
            if (pos_ + 1 < s_.size() && s_[pos_ + 1] == '<') return parse_dict(allow_refs, depth);
            return parse_hex();
        }
        if (c == '[') {
            ++pos_;
            auto arr = std::make_shared<Array>();
            while (true) {
                skip_ws();
                if (pos_ >= s_.size()) malformed("unterminated array");
                if (s_[pos_] == ']') {
                    ++pos_;
                    break;
                }
                arr->push_back(parse(allow_refs, depth + 1));
            }
            return Object(std::move(arr));
        }
        if (c == ']' || c == '>' || c == ')' || c == '{' || c == '}') {
            ++pos_;
            return Object(Keyword{std::string(1, c)});
        }
        if (c == '+' || c == '-' || c == '.' || (c >= '0' && c <= '9')) {
            const auto start = pos_;
            const double first = parse_number();
            if (allow_refs && is_integer_token(start)) {
                const auto save = pos_;
                skip_ws();
                const auto gen_start = pos_;
                if (pos_ < s_.size() && s_[pos_] >= '0' && s_[pos_] <= '9') {
                    const double gen = parse_number();
                    if (is_integer_token(gen_start)) {
                        skip_ws();
                        if (pos_ < s_.size() && s_[pos_] == 'R' &&
                            (pos_ + 1 >= s_.size() || is_ws(s_[pos_ + 1]) || is_delim(s_[pos_ + 1]))) {
                            ++pos_;
                            return Object(Ref{static_cast<int>(first), static_cast<int>(gen)});
                        }
                    }
                }
                pos_ = save;
            }
            return Object(first);
        }
        const auto start = pos_;
        while (pos_ < s_.size() && !is_ws(s_[pos_]) && !is_delim(s_[pos_])) ++pos_;
        if (pos_ == start) {
            ++pos_;
            return Object(Keyword{std::string(1, c)});
        }
        const auto word = s_.substr(start, pos_ - start);
        if (word == "true") return Object(true);
        if (word == "false") return Object(false);
        if (word == "null") return Object(Null{});
        return Object(Keyword{std::string(word)});
    }

private:
    bool is_integer_token(std::size_t start) const {
        for (auto i = start; i < pos_; ++i) {
            if (s_[i] == '.') return false;
        }
        return true;
    }

    double parse_number() {
        const auto start = pos_;
        if (s_[pos_] == '+' || s_[pos_] == '-') ++pos_;
        while (pos_ < s_.size() && ((s_[pos_] >= '0' && s_[pos_] <= '9') || s_[pos_] == '.')) ++pos_;
        std::string tok(s_.substr(start, pos_ - start));
        if (tok == "+" || tok == "-" || tok == "." || tok.empty()) return 0.0;
        try {
            return std::stod(tok);
        } catch (const std::exception&) {
            return 0.0;
        }
    }

    Object parse_name() {
        ++pos_;
        std::string out;
        while (pos_ < s_.size() && !is_ws(s_[pos_]) && !is_delim(s_[pos_])) {
            if (s_[pos_] == '#' && pos_ + 2 < s_.size() && hex_value(s_[pos_ + 1]) >= 0 &&
                hex_value(s_[pos_ + 2]) >= 0) {
                out.push_back(static_cast<char>(hex_value(s_[pos_ + 1]) * 16 + hex_value(s_[pos_ + 2])));
                pos_ += 3;
            } else {
                out.push_back(s_[pos_++]);
            }
        }
        return Object(Name{std::move(out)});
    }

    Object parse_literal() {
        ++pos_;
        std::string out;
        int depth = 1;
        while (pos_ < s_.size()) {
            char c = s_[pos_++];
            if (c == '\\') {
                if (pos_ >= s_.size()) break;
                char e = s_[pos_++];
                switch (e) {
                    case 'n': out.push_back('\n'); break;
                    case 'r': out.push_back('\r'); break;
                    case 't': out.push_back('\t'); break;
                    case 'b': out.push_back('\b'); break;
                    case 'f': out.push_back('\f'); break;
                    case '\r':
                        if (pos_ < s_.size() && s_[pos_] == '\n') ++pos_;
                        break;
                    case '\n': break;
                    default:
                        if (e >= '0' && e <= '7') {
                            int v = e - '0';
                            for (int k = 0; k < 2 && pos_ < s_.size() && s_[pos_] >= '0' && s_[pos_] <= '7'; ++k) {
                                v = v * 8 + (s_[pos_++] - '0');
                            }
                            out.push_back(static_cast<char>(v & 0xFF));
                        } else {
                            out.push_back(e);
                        }
                }
                continue;
            }
            if (c == '(') {
                ++depth;
            } else if (c == ')') {
                if (--depth == 0) return Object(PdfString{std::move(out)});
            } else if (c == '\r') {
                if (pos_ < s_.size() && s_[pos_] == '\n') ++pos_;
                c = '\n';
            }
            out.push_back(c);
        }
        malformed("unterminated string");
    }

    Object parse_hex() {
        ++pos_;
        std::string out;
        int hi = -1;
        while (pos_ < s_.size() && s_[pos_] != '>') {
            const int v = hex_value(s_[pos_++]);
            if (v < 0) continue;
            if (hi < 0) {
                hi = v;
            } else {
                out.push_back(static_cast<char>(hi * 16 + v));
                hi = -1;
            }
        }
        if (pos_ >= s_.size()) malformed("unterminated hex string");
        ++pos_;
        if (hi >= 0) out.push_back(static_cast<char>(hi * 16));
        return Object(PdfString{std::move(out)});
    }

    Object parse_dict(bool allow_refs, int depth) {
        pos_ += 2;
        auto d = std::make_shared<Dict>();
        while (true) {
            skip_ws();
            if (pos_ + 1 >= s_.size()) malformed("unterminated dictionary");
            if (s_[pos_] == '>' && s_[pos_ + 1] == '>') {
                pos_ += 2;
                break;
            }
            Object key = parse(false, depth + 1);
            if (!key.name()) malformed("dictionary key is not a name");
            (*d)[key.name()->value] = parse(allow_refs, depth + 1);
        }
        return Object(std::move(d));
    }

    std::string_view s_;
    std::size_t pos_;
};

// ---------------------------------------------------------------------------
// Filters

std::string inflate_bytes(std::string_view in, bool& truncated) {
    truncated = false;
    z_stream zs{};
    if (inflateInit(&zs) != Z_OK) malformed("zlib init failed");
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(in.data()));
    zs.avail_in = static_cast<uInt>(in.size());
    std::string out;
    std::array<char, 16384> buf{};
    int rc = Z_OK;
    while (rc == Z_OK) {
        zs.next_out = reinterpret_cast<Bytef*>(buf.data());
        zs.avail_out = static_cast<uInt>(buf.size());
        rc = inflate(&zs, Z_NO_FLUSH);
        out.append(buf.data(), buf.size() - zs.avail_out);
        if (rc == Z_BUF_ERROR && zs.avail_in == 0) break;
    }
    if (rc != Z_STREAM_END) truncated = true;
    inflateEnd(&zs);
    if (rc != Z_STREAM_END && out.empty()) malformed("corrupt Flate stream");
    return out;
}

std::string ascii_hex_decode(std::string_view in) {
    std::string out;
    int hi = -1;
    for (char c : in) {
        if (c == '>') break;
        const int v = hex_value(c);
        if (v < 0) continue;
        if (hi < 0) {
            hi = v;
        } else {
            out.push_back(static_cast<char>(hi * 16 + v));
            hi = -1;
        }
    }
    if (hi >= 0) out.push_back(static_cast<char>(hi * 16));
    return out;
}

std::string ascii85_decode(std::string_view in) {
    std::string out;
    std::uint32_t tuple = 0;
    int count = 0;
    std::size_t i = 0;
    if (in.substr(0, 2) == "<~") i = 2;
    for (; i < in.size(); ++i) {
        const char c = in[i];
        if (c == '~') break;
        if (is_ws(c)) continue;
        if (c == 'z' && count == 0) {
            out.append(4, '\0');
            continue;
        }
        if (c < '!' || c > 'u') malformed("invalid ASCII85 data");
        tuple = tuple * 85 + static_cast<std::uint32_t>(c - '!');
        if (++count == 5) {
            for (int k = 3; k >= 0; --k) out.push_back(static_cast<char>((tuple >> (8 * k)) & 0xFF));
            tuple = 0;
            count = 0;
        }
    }
    if (count > 1) {
        for (int k = count; k < 5; ++k) tuple = tuple * 85 + 84;
        for (int k = 0; k < count - 1; ++k) out.push_back(static_cast<char>((tuple >> (8 * (3 - k))) & 0xFF));
    }
    return out;
}

std::string run_length_decode(std::string_view in) {
    std::string out;
    std::size_t i = 0;
    while (i < in.size()) {
        const auto len = static_cast<unsigned char>(in[i++]);
        if (len == 128) break;
        if (len < 128) {
            const std::size_t n = std::min<std::size_t>(len + 1u, in.size() - i);
            out.append(in.substr(i, n));
            i += n;
        } else if (i < in.size()) {
            out.append(257u - len, in[i++]);
        }
    }
    return out;
}

std::string png_unpredict(const std::string& data, int columns, int colors, int bpc) {
    const int bpp = std::max(1, colors * bpc / 8);
    const std::size_t row_len = static_cast<std::size_t>((columns * colors * bpc + 7) / 8);
    std::string out;
    std::string prev(row_len, '\0');
    std::size_t i = 0;
    while (i + 1 + row_len <= data.size()) {
        const int type = static_cast<unsigned char>(data[i]);
        std::string row = data.substr(i + 1, row_len);
        for (std::size_t k = 0; k < row_len; ++k) {
            const int left = k >= static_cast<std::size_t>(bpp) ? static_cast<unsigned char>(row[k - bpp]) : 0;
            const int up = static_cast<unsigned char>(prev[k]);
            const int ul = k >= static_cast<std::size_t>(bpp) ? static_cast<unsigned char>(prev[k - bpp]) : 0;
            int add = 0;
            switch (type) {
                case 1: add = left; break;
                case 2: add = up; break;
                case 3: add = (left + up) / 2; break;
                case 4: {
                    const int p = left + up - ul;
                    const int pa = std::abs(p - left), pb = std::abs(p - up), pc = std::abs(p - ul);
                    add = (pa <= pb && pa <= pc) ? left : (pb <= pc ? up : ul);
                    break;
                }
                default: break;
            }
            row[k] = static_cast<char>((static_cast<unsigned char>(row[k]) + add) & 0xFF);
        }
        out += row;
        prev = row;
        i += 1 + row_len;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Document

class PdfDocument {
public:
    explicit PdfDocument(std::string_view bytes) : bytes_(bytes) {
        if (bytes_.substr(0, std::min<std::size_t>(bytes_.size(), 1024)).find("%PDF-") == std::string_view::npos) {
            malformed("missing %PDF header");
        }
        scan_objects();
        if (objects_.empty()) malformed("no objects found");
        load_object_streams();
        find_trailer();
    }

    const Object& resolve(const Object& o, int depth = 0) const {
        if (const auto* r = o.ref()) {
            if (depth > 32) return kNull;
            auto it = objects_.find(r->num);
            if (it == objects_.end()) return kNull;
            return resolve(it->second, depth + 1);
        }
        return o;
    }

    const Dict* resolve_dict(const Object& o) const { return resolve(o).dict(); }

    const Dict& trailer() const { return *trailer_; }
    std::vector<std::string>& warnings() { return warnings_; }

    std::string decode_stream(const Stream& s) {
        std::string data(s.raw);
        const Object& filter = resolve(dict_get(s.dict.get(), "Filter"));
        const Object& parms = resolve(dict_get(s.dict.get(), "DecodeParms"));
        std::vector<std::string> filters;
        std::vector<const Dict*> parm_list;
        if (const auto* n = filter.name()) {
            filters.push_back(n->value);
            parm_list.push_back(parms.dict());
        } else if (const auto* a = filter.array()) {
            for (std::size_t i = 0; i < a->size(); ++i) {
                if (const auto* n2 = resolve((*a)[i]).name()) filters.push_back(n2->value);
                const Dict* p = nullptr;
                if (const auto* pa = parms.array(); pa && i < pa->size()) p = resolve((*pa)[i]).dict();
                parm_list.push_back(p);
            }
        }
        for (std::size_t i = 0; i < filters.size(); ++i) {
            const auto& f = filters[i];
            if (f == "FlateDecode" || f == "Fl") {
                bool truncated = false;
                data = inflate_bytes(data, truncated);
                if (truncated) warnings_.push_back("truncated compressed stream; text may be incomplete");
                const Dict* p = i < parm_list.size() ? parm_list[i] : nullptr;
                const auto predictor = resolve(dict_get(p, "Predictor")).number().value_or(1);
                if (predictor >= 10) {
                    data = png_unpredict(data, static_cast<int>(resolve(dict_get(p, "Columns")).number().value_or(1)),
                                         static_cast<int>(resolve(dict_get(p, "Colors")).number().value_or(1)),
                                         static_cast<int>(resolve(dict_get(p, "BitsPerComponent")).number().value_or(8)));
                }
            } else if (f == "ASCIIHexDecode" || f == "AHx") {
                data = ascii_hex_decode(data);
            } else if (f == "ASCII85Decode" || f == "A85") {
                data = ascii85_decode(data);
            } else if (f == "RunLengthDecode" || f == "RL") {
                data = run_length_decode(data);
            } else {
                throw Error(ErrorKind::MalformedPdf, "unsupported stream filter " + f);
            }
        }
        return data;
    }

    std::vector<const Dict*> pages() const {
        std::vector<const Dict*> out;
        const Dict* root = resolve_dict(dict_get(trailer_.get(), "Root"));
        if (!root) {
            for (const auto& [num, obj] : objects_) {
                const Dict* d = resolve_dict(obj);
                const auto* type = dict_get(d, "Type").name();
                if (type && type->value == "Catalog") {
                    root = d;
                    break;
                }
            }
        }
        if (!root) malformed("missing document catalog");
        std::set<const Dict*> seen;
        collect_pages(dict_get(root, "Pages"), out, seen, 0);
        return out;
    }

    /// Looks up an inheritable page attribute through the /Parent chain.
    const Object& inherited(const Dict* page, const std::string& key) const {
        for (int depth = 0; page && depth < 64; ++depth) {
            const Object& v = dict_get(page, key);
            if (!v.is_null()) return resolve(v);
            page = resolve_dict(dict_get(page, "Parent"));
        }
        return kNull;
    }

private:
    void collect_pages(const Object& node_ref, std::vector<const Dict*>& out, std::set<const Dict*>& seen,
                       int depth) const {
        const Dict* node = resolve_dict(node_ref);
        if (!node || depth > 64 || seen.count(node)) return;
        seen.insert(node);
        const auto* type = dict_get(node, "Type").name();
        const Object& kids = resolve(dict_get(node, "Kids"));
        if ((type && type->value == "Pages") || (kids.array() && !(type && type->value == "Page"))) {
            if (const auto* a = kids.array()) {
                for (const auto& kid : *a) collect_pages(kid, out, seen, depth + 1);
            }
        } else {
            out.push_back(node);
        }
    }

    void scan_objects() {
        // Linear scan for "N G obj" headers: tolerant of broken xref tables.
        std::size_t pos = 0;
        while ((pos = bytes_.find("obj", pos)) != std::string_view::npos) {
            const std::size_t kw = pos;
            pos += 3;
            if (kw > 0 && bytes_[kw - 1] == 'd') continue;  // "endobj"
            if (pos < bytes_.size() && !is_ws(bytes_[pos]) && !is_delim(bytes_[pos])) continue;
            std::size_t p = kw;
            auto back_int = [&](int& value) -> bool {
                while (p > 0 && is_ws(bytes_[p - 1])) --p;
                const auto end = p;
                while (p > 0 && bytes_[p - 1] >= '0' && bytes_[p - 1] <= '9') --p;
                if (p == end || end - p > 10) return false;
                value = std::stoi(std::string(bytes_.substr(p, end - p)));
                return true;
            };
            int gen = 0;
            int num = 0;
            if (!back_int(gen) || !back_int(num)) continue;
            if (p > 0 && !is_ws(bytes_[p - 1]) && !is_delim(bytes_[p - 1])) continue;
            try {
                Parser parser(bytes_, pos);
                Object obj = parser.parse();
                std::size_t after = parser.pos();
                Parser look(bytes_, after);
                look.skip_ws();
                after = look.pos();
                if (bytes_.substr(after, 6) == "stream" && obj.dict()) {
                    obj = make_stream(obj, after + 6);
                }
                objects_[num] = std::move(obj);
            } catch (const Error&) {
                warnings_.push_back("skipped unparsable object " + std::to_string(num));
            }
        }
    }

    Object make_stream(const Object& dict_obj, std::size_t data_pos) {
        if (data_pos < bytes_.size() && bytes_[data_pos] == '\r') ++data_pos;
        if (data_pos < bytes_.size() && bytes_[data_pos] == '\n') ++data_pos;
        auto dict = std::make_shared<Dict>(*dict_obj.dict());
        std::size_t end = std::string_view::npos;
        if (auto len = dict_get(dict.get(), "Length").number()) {
            const auto n = static_cast<std::size_t>(std::max(0.0, *len));
            if (data_pos + n <= bytes_.size()) {
                Parser look(bytes_, data_pos + n);
                look.skip_ws();
                if (bytes_.substr(look.pos(), 9) == "endstream") end = data_pos + n;
            }
        }
        if (end == std::string_view::npos) {
            end = bytes_.find("endstream", data_pos);
            if (end == std::string_view::npos) malformed("unterminated stream");
            if (end > data_pos && bytes_[end - 1] == '\n') --end;
            if (end > data_pos && bytes_[end - 1] == '\r') --end;
        }
        return Object(Stream{std::move(dict), bytes_.substr(data_pos, end - data_pos)});
    }

    void load_object_streams() {
        std::vector<std::pair<int, Stream>> streams;
        for (const auto& [num, obj] : objects_) {
            const auto* s = obj.stream();
            if (!s) continue;
            const auto* type = dict_get(s->dict.get(), "Type").name();
            if (type && type->value == "ObjStm") streams.emplace_back(num, *s);
        }
        for (const auto& [num, s] : streams) {
            std::string data;
            try {
                data = decode_stream(s);
            } catch (const Error&) {
                warnings_.push_back("unreadable object stream " + std::to_string(num));
                continue;
            }
            storage_.push_back(std::make_unique<std::string>(std::move(data)));
            std::string_view view = *storage_.back();
            const int n = static_cast<int>(dict_get(s.dict.get(), "N").number().value_or(0));
            const auto first = static_cast<std::size_t>(dict_get(s.dict.get(), "First").number().value_or(0));
            try {
                Parser header(view);
                std::vector<std::pair<int, std::size_t>> entries;
                for (int i = 0; i < n; ++i) {
                    const auto a = header.parse(false).number();
                    const auto b = header.parse(false).number();
                    if (!a || !b) break;
                    entries.emplace_back(static_cast<int>(*a), static_cast<std::size_t>(*b));
                }
                for (const auto& [objnum, off] : entries) {
                    if (objects_.count(objnum)) continue;
                    Parser body(view, first + off);
                    objects_[objnum] = body.parse();
                }
            } catch (const Error&) {
                warnings_.push_back("corrupt object stream " + std::to_string(num));
            }
        }
    }

    void find_trailer() {
        // Merge all classic trailers (earliest first) so later updates win.
        auto merged = std::make_shared<Dict>();
        std::size_t pos = 0;
        while ((pos = bytes_.find("trailer", pos)) != std::string_view::npos) {
            pos += 7;
            try {
                Parser p(bytes_, pos);
                Object t = p.parse();
                if (const auto* d = t.dict()) {
                    for (const auto& [k, v] : *d) (*merged)[k] = v;
                }
            } catch (const Error&) {
            }
        }
        for (const auto& [num, obj] : objects_) {
            const auto* s = obj.stream();
            if (!s) continue;
            const auto* type = dict_get(s->dict.get(), "Type").name();
            if (type && type->value == "XRef") {
                for (const auto& [k, v] : *s->dict) {
                    if (k == "Root" || k == "Info" || k == "Encrypt" || k == "ID") (*merged)[k] = v;
                }
            }
        }
        if (merged->count("Encrypt")) {
            throw Error(ErrorKind::EncryptedPdf, "PDF is encrypted; password-protected documents are not supported");
        }
        trailer_ = std::move(merged);
    }

    std::string_view bytes_;
    std::map<int, Object> objects_;
    std::vector<std::unique_ptr<std::string>> storage_;
    std::shared_ptr<Dict> trailer_;
    std::vector<std::string> warnings_;
};

// ---------------------------------------------------------------------------
// Text encoding

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

std::string utf16be_to_utf8(std::string_view s) {
    std::string out;
    for (std::size_t i = 0; i + 1 < s.size(); i += 2) {
        std::uint32_t u = (static_cast<unsigned char>(s[i]) << 8) | static_cast<unsigned char>(s[i + 1]);
        if (u >= 0xD800 && u <= 0xDBFF && i + 3 < s.size()) {
            const std::uint32_t lo = (static_cast<unsigned char>(s[i + 2]) << 8) | static_cast<unsigned char>(s[i + 3]);
            if (lo >= 0xDC00 && lo <= 0xDFFF) {
                u = 0x10000 + ((u - 0xD800) << 10) + (lo - 0xDC00);
                i += 2;
            }
        }
        append_utf8(out, u);
    }
    return out;
}

// Windows-1252 code points for 0x80..0x9F.
constexpr std::array<std::uint16_t, 32> kWinAnsiHigh = {
    0x20AC, 0xFFFD, 0x201A, 0x0192, 0x201E, 0x2026, 0x2020, 0x2021, 0x02C6, 0x2030, 0x0160,
    0x2039, 0x0152, 0xFFFD, 0x017D, 0xFFFD, 0xFFFD, 0x2018, 0x2019, 0x201C, 0x201D, 0x2022,
    0x2013, 0x2014, 0x02DC, 0x2122, 0x0161, 0x203A, 0x0153, 0xFFFD, 0x017E, 0x0178};

std::uint32_t win_ansi(unsigned char c) {
    if (c >= 0x80 && c <= 0x9F) return kWinAnsiHigh[c - 0x80];
    return c;
}

std::uint32_t standard_encoding(unsigned char c) {
    switch (c) {
        case 0x27: return 0x2019;
        case 0x60: return 0x2018;
        case 0xA1: return 0x00A1;
        case 0xA9: return 0x0027;
        case 0xAA: return 0x201C;
        case 0xAE: return 0xFB01;
        case 0xAF: return 0xFB02;
        case 0xB1: return 0x2013;
        case 0xB7: return 0x2022;
        case 0xBA: return 0x201D;
        case 0xD0: return 0x2014;
        default: break;
    }
    return c < 0x80 ? c : 0xFFFD;
}

std::uint32_t pdf_doc_encoding(unsigned char c) {
    switch (c) {
        case 0x8D: return 0x201C;
        case 0x8E: return 0x201D;
        case 0x8F: return 0x2018;
        case 0x90: return 0x2019;
        case 0x84: return 0x2014;
        case 0x85: return 0x2013;
        case 0x80: return 0x2022;
        default: break;
    }
    return c;
}

std::optional<std::uint32_t> glyph_name_to_unicode(const std::string& name) {
    static const std::unordered_map<std::string, std::uint32_t> table = {
        {"space", 0x20},         {"exclam", 0x21},       {"quotedbl", 0x22},      {"numbersign", 0x23},
        {"dollar", 0x24},        {"percent", 0x25},      {"ampersand", 0x26},     {"quotesingle", 0x27},
        {"parenleft", 0x28},     {"parenright", 0x29},   {"asterisk", 0x2A},      {"plus", 0x2B},
        {"comma", 0x2C},         {"hyphen", 0x2D},       {"period", 0x2E},        {"slash", 0x2F},
        {"zero", 0x30},          {"one", 0x31},          {"two", 0x32},           {"three", 0x33},
        {"four", 0x34},          {"five", 0x35},         {"six", 0x36},           {"seven", 0x37},
        {"eight", 0x38},         {"nine", 0x39},         {"colon", 0x3A},         {"semicolon", 0x3B},
        {"less", 0x3C},          {"equal", 0x3D},        {"greater", 0x3E},       {"question", 0x3F},
        {"at", 0x40},            {"bracketleft", 0x5B},  {"backslash", 0x5C},     {"bracketright", 0x5D},
        {"asciicircum", 0x5E},   {"underscore", 0x5F},   {"grave", 0x60},         {"braceleft", 0x7B},
        {"bar", 0x7C},           {"braceright", 0x7D},   {"asciitilde", 0x7E},    {"quoteleft", 0x2018},
        {"quoteright", 0x2019},  {"quotedblleft", 0x201C}, {"quotedblright", 0x201D}, {"quotesinglbase", 0x201A},
        {"quotedblbase", 0x201E}, {"endash", 0x2013},    {"emdash", 0x2014},      {"bullet", 0x2022},
        {"ellipsis", 0x2026},    {"section", 0x00A7},    {"paragraph", 0x00B6},   {"fi", 0xFB01},
        {"fl", 0xFB02},          {"ff", 0xFB00},         {"ffi", 0xFB03},         {"ffl", 0xFB04},
        {"dagger", 0x2020},      {"daggerdbl", 0x2021},  {"copyright", 0x00A9},   {"registered", 0x00AE},
        {"trademark", 0x2122},   {"degree", 0x00B0},     {"minus", 0x2212},       {"nbspace", 0x00A0},
        {"eacute", 0x00E9},      {"egrave", 0x00E8},     {"aacute", 0x00E1},      {"agrave", 0x00E0},
        {"ccedilla", 0x00E7},    {"udieresis", 0x00FC},  {"odieresis", 0x00F6},   {"adieresis", 0x00E4},
        {"Eacute", 0x00C9},      {"germandbls", 0x00DF}, {"rupee", 0x20B9},       {"periodcentered", 0x00B7},
    };
    if (auto it = table.find(name); it != table.end()) return it->second;
    if (name.size() == 1 && std::isalpha(static_cast<unsigned char>(name[0]))) {
        return static_cast<std::uint32_t>(static_cast<unsigned char>(name[0]));
    }
    auto parse_hex_cp = [](std::string_view h) -> std::optional<std::uint32_t> {
        if (h.empty() || h.size() > 6) return std::nullopt;
        std::uint32_t v = 0;
        for (char c : h) {
            const int d = hex_value(c);
            if (d < 0) return std::nullopt;
            v = v * 16 + static_cast<std::uint32_t>(d);
        }
        return v;
    };
    if (name.size() == 7 && name.rfind("uni", 0) == 0) return parse_hex_cp(std::string_view(name).substr(3));
    if (name.size() >= 5 && name[0] == 'u') return parse_hex_cp(std::string_view(name).substr(1));
    return std::nullopt;
}

std::string decode_text_string(const std::string& bytes) {
    if (bytes.size() >= 2 && static_cast<unsigned char>(bytes[0]) == 0xFE &&
        static_cast<unsigned char>(bytes[1]) == 0xFF) {
        return utf16be_to_utf8(std::string_view(bytes).substr(2));
    }
    std::string out;
    for (char c : bytes) append_utf8(out, pdf_doc_encoding(static_cast<unsigned char>(c)));
    return out;
}

struct Font {
    int code_bytes = 1;
    std::map<std::uint32_t, std::string> to_unicode;
    std::array<std::uint32_t, 256> simple_map{};
    bool has_simple_map = false;
    std::map<std::uint32_t, double> widths;  // glyph space units (1/1000 em)
    double default_width = 500.0;
};

void parse_cmap(std::string_view cmap, Font& font) {
    Parser p(cmap);
    std::vector<Object> operands;
    auto code_of = [](const std::string& b) {
        std::uint32_t v = 0;
        for (char c : b) v = (v << 8) | static_cast<unsigned char>(c);
        return v;
    };
    while (!p.at_end()) {
        Object o;
        try {
            o = p.parse(false);
        } catch (const Error&) {
            break;
        }
        const auto* kw = o.keyword();
        if (!kw) {
            operands.push_back(std::move(o));
            continue;
        }
        if (kw->value == "endbfchar") {
            for (std::size_t i = 0; i + 1 < operands.size(); i += 2) {
                const auto* src = operands[i].str();
                const auto* dst = operands[i + 1].str();
                if (src && dst) font.to_unicode[code_of(src->bytes)] = utf16be_to_utf8(dst->bytes);
            }
        } else if (kw->value == "endbfrange") {
            for (std::size_t i = 0; i + 2 < operands.size(); i += 3) {
                const auto* lo = operands[i].str();
                const auto* hi = operands[i + 1].str();
                if (!lo || !hi) continue;
                const auto a = code_of(lo->bytes);
                const auto b = code_of(hi->bytes);
                if (b < a || b - a > 0xFFFF) continue;
                if (const auto* dst = operands[i + 2].str()) {
                    std::string base = dst->bytes;
                    for (std::uint32_t c = a; c <= b; ++c) {
                        font.to_unicode[c] = utf16be_to_utf8(base);
                        if (!base.empty()) {
                            // Increment the last UTF-16 unit.
                            std::size_t k = base.size() - 1;
                            base[k] = static_cast<char>(static_cast<unsigned char>(base[k]) + 1);
                            if (base[k] == 0 && k > 0) base[k - 1] = static_cast<char>(base[k - 1] + 1);
                        }
                    }
                } else if (const auto* arr = operands[i + 2].array()) {
                    for (std::uint32_t c = a; c <= b && c - a < arr->size(); ++c) {
                        if (const auto* s = (*arr)[c - a].str()) font.to_unicode[c] = utf16be_to_utf8(s->bytes);
                    }
                }
            }
        } else if (kw->value == "endcodespacerange") {
            if (!operands.empty()) {
                if (const auto* s = operands[0].str(); s && !s->bytes.empty()) {
                    font.code_bytes = static_cast<int>(s->bytes.size());
                }
            }
        }
        operands.clear();
    }
}

Font load_font(PdfDocument& doc, const Dict* fd) {
    Font font;
    const auto* subtype = dict_get(fd, "Subtype").name();
    const bool type0 = subtype && subtype->value == "Type0";
    if (type0) {
        font.code_bytes = 2;
        font.default_width = 1000.0;
        const Object& desc_arr = doc.resolve(dict_get(fd, "DescendantFonts"));
        const Dict* desc = nullptr;
        if (const auto* a = desc_arr.array(); a && !a->empty()) desc = doc.resolve_dict((*a)[0]);
        if (desc) {
            font.default_width = doc.resolve(dict_get(desc, "DW")).number().value_or(1000.0);
            if (const auto* w = doc.resolve(dict_get(desc, "W")).array()) {
                std::size_t i = 0;
                while (i < w->size()) {
                    const auto first = doc.resolve((*w)[i]).number();
                    if (!first || i + 1 >= w->size()) break;
                    const Object& next = doc.resolve((*w)[i + 1]);
                    if (const auto* list = next.array()) {
                        for (std::size_t k = 0; k < list->size(); ++k) {
                            font.widths[static_cast<std::uint32_t>(*first) + static_cast<std::uint32_t>(k)] =
                                doc.resolve((*list)[k]).number().value_or(font.default_width);
                        }
                        i += 2;
                    } else {
                        if (i + 2 >= w->size()) break;
                        const auto last = next.number().value_or(*first);
                        const auto width = doc.resolve((*w)[i + 2]).number().value_or(font.default_width);
                        for (auto c = static_cast<std::uint32_t>(*first); c <= static_cast<std::uint32_t>(last) &&
                                                                        c - static_cast<std::uint32_t>(*first) < 0x10000;
                             ++c) {
                            font.widths[c] = width;
                        }
                        i += 3;
                    }
                }
            }
        }
    } else {
        const auto first_char = doc.resolve(dict_get(fd, "FirstChar")).number().value_or(0);
        if (const auto* w = doc.resolve(dict_get(fd, "Widths")).array()) {
            for (std::size_t k = 0; k < w->size(); ++k) {
                font.widths[static_cast<std::uint32_t>(first_char) + static_cast<std::uint32_t>(k)] =
                    doc.resolve((*w)[k]).number().value_or(500.0);
            }
        }
        const auto* base_font = dict_get(fd, "BaseFont").name();
        if (base_font && base_font->value.find("Courier") != std::string::npos) font.default_width = 600.0;

        // Simple font encoding: base table plus /Differences.
        std::string base = "StandardEncoding";
        if (subtype && subtype->value == "TrueType") base = "WinAnsiEncoding";
        const Object& enc = doc.resolve(dict_get(fd, "Encoding"));
        const Array* differences = nullptr;
        if (const auto* n = enc.name()) {
            base = n->value;
        } else if (const auto* ed = enc.dict()) {
            if (const auto* bn = dict_get(ed, "BaseEncoding").name()) base = bn->value;
            differences = doc.resolve(dict_get(ed, "Differences")).array();
        }
        for (int c = 0; c < 256; ++c) {
            const auto uc = static_cast<unsigned char>(c);
            font.simple_map[static_cast<std::size_t>(c)] =
                base == "StandardEncoding" ? standard_encoding(uc) : win_ansi(uc);
        }
        if (differences) {
            std::uint32_t code = 0;
            for (const auto& item : *differences) {
                if (auto n = item.number()) {
                    code = static_cast<std::uint32_t>(*n);
                } else if (const auto* gn = item.name()) {
                    if (code < 256) {
                        font.simple_map[code] = glyph_name_to_unicode(gn->value).value_or(0xFFFD);
                    }
                    ++code;
                }
            }
        }
        font.has_simple_map = true;
    }
    const Object& tu = doc.resolve(dict_get(fd, "ToUnicode"));
    if (const auto* s = tu.stream()) {
        try {
            parse_cmap(doc.decode_stream(*s), font);
        } catch (const Error&) {
            doc.warnings().push_back("unreadable ToUnicode map");
        }
        if (type0) font.code_bytes = std::max(font.code_bytes, 1);
    }
    return font;
}

// ---------------------------------------------------------------------------
// Content stream interpretation

struct Matrix {
    double a = 1, b = 0, c = 0, d = 1, e = 0, f = 0;

    Matrix operator*(const Matrix& m) const {
        return {a * m.a + b * m.c,        a * m.b + b * m.d,        c * m.a + d * m.c,
                c * m.b + d * m.d,        e * m.a + f * m.c + m.e, e * m.b + f * m.d + m.f};
    }
    static Matrix translate(double x, double y) { return {1, 0, 0, 1, x, y}; }
};

struct TextRun {
    double x0 = 0, y = 0, x1 = 0, size = 0;
    std::string text;
    std::size_t order = 0;
};

struct GState {
    Matrix ctm;
    double char_spacing = 0, word_spacing = 0, h_scale = 1, leading = 0, rise = 0, font_size = 0;
    const Font* font = nullptr;
};

class PageInterpreter {
public:
    PageInterpreter(PdfDocument& doc, std::map<const Dict*, Font>& font_cache)
        : doc_(doc), font_cache_(font_cache) {}

    void run(std::string_view content, const Dict* resources, const Matrix& base, int depth = 0) {
        if (depth > 16) return;
        GState saved = gs_;
        gs_.ctm = base;
        std::vector<GState> stack;
        Parser p(content);
        std::vector<Object> operands;
        while (true) {
            Object o;
            try {
                if (p.at_end()) break;
                o = p.parse(false);
            } catch (const Error&) {
                doc_.warnings().push_back("content stream parse error; page text may be incomplete");
                break;
            }
            const auto* kw = o.keyword();
            if (!kw) {
                operands.push_back(std::move(o));
                continue;
            }
            const std::string& op = kw->value;
            auto num = [&](std::size_t i) -> double {
                if (i >= operands.size()) return 0.0;
                return operands[i].number().value_or(0.0);
            };
            if (op == "q") {
                stack.push_back(gs_);
            } else if (op == "Q") {
                if (!stack.empty()) {
                    gs_ = stack.back();
                    stack.pop_back();
                }
            } else if (op == "cm" && operands.size() >= 6) {
                gs_.ctm = Matrix{num(0), num(1), num(2), num(3), num(4), num(5)} * gs_.ctm;
            } else if (op == "BT") {
                tm_ = tlm_ = Matrix{};
            } else if (op == "Tf" && operands.size() >= 2) {
                gs_.font_size = num(1);
                gs_.font = nullptr;
                if (const auto* n = operands[0].name()) gs_.font = font_for(resources, n->value);
            } else if (op == "Tc") {
                gs_.char_spacing = num(0);
            } else if (op == "Tw") {
                gs_.word_spacing = num(0);
            } else if (op == "Tz") {
                gs_.h_scale = num(0) / 100.0;
            } else if (op == "TL") {
                gs_.leading = num(0);
            } else if (op == "Ts") {
                gs_.rise = num(0);
            } else if (op == "Td") {
                tlm_ = Matrix::translate(num(0), num(1)) * tlm_;
                tm_ = tlm_;
            } else if (op == "TD") {
                gs_.leading = -num(1);
                tlm_ = Matrix::translate(num(0), num(1)) * tlm_;
                tm_ = tlm_;
            } else if (op == "Tm" && operands.size() >= 6) {
                tlm_ = tm_ = Matrix{num(0), num(1), num(2), num(3), num(4), num(5)};
            } else if (op == "T*") {
                next_line();
            } else if (op == "Tj" && !operands.empty()) {
                if (const auto* s = operands[0].str()) show({s}, {});
            } else if (op == "'" && !operands.empty()) {
                next_line();
                if (const auto* s = operands.back().str()) show({s}, {});
            } else if (op == "\"" && operands.size() >= 3) {
                gs_.word_spacing = num(0);
                gs_.char_spacing = num(1);
                next_line();
                if (const auto* s = operands[2].str()) show({s}, {});
            } else if (op == "TJ" && !operands.empty()) {
                if (const auto* arr = operands[0].array()) show_array(*arr);
            } else if (op == "Do" && !operands.empty()) {
                if (const auto* n = operands[0].name()) do_xobject(resources, n->value, depth);
            } else if (op == "BI") {
                skip_inline_image(p, content);
                drawable_ = true;
            } else if (op == "S" || op == "s" || op == "f" || op == "F" || op == "f*" || op == "B" ||
                       op == "B*" || op == "b" || op == "b*" || op == "sh") {
                drawable_ = true;
            }
            operands.clear();
        }
        gs_ = saved;
    }

    bool drawable() const { return drawable_; }
    std::vector<TextRun>& runs() { return runs_; }

private:
    const Font* font_for(const Dict* resources, const std::string& name) {
        const Dict* fonts = doc_.resolve_dict(dict_get(resources, "Font"));
        const Dict* fd = doc_.resolve_dict(dict_get(fonts, name));
        if (!fd) {
            doc_.warnings().push_back("missing font resource /" + name);
            return nullptr;
        }
        auto it = font_cache_.find(fd);
        if (it == font_cache_.end()) it = font_cache_.emplace(fd, load_font(doc_, fd)).first;
        return &it->second;
    }

    void next_line() {
        tlm_ = Matrix::translate(0, -gs_.leading) * tlm_;
        tm_ = tlm_;
    }

    /// Decodes one string operand, advancing the text matrix glyph by glyph.
    void decode_into(const std::string& bytes, std::string& out) {
        const Font* font = gs_.font;
        const int nbytes = font ? font->code_bytes : 1;
        for (std::size_t i = 0; i + static_cast<std::size_t>(nbytes) <= bytes.size(); i += static_cast<std::size_t>(nbytes)) {
            std::uint32_t code = 0;
            for (int k = 0; k < nbytes; ++k) code = (code << 8) | static_cast<unsigned char>(bytes[i + static_cast<std::size_t>(k)]);
            if (font && !font->to_unicode.empty()) {
                if (auto it = font->to_unicode.find(code); it != font->to_unicode.end()) {
                    out += it->second;
                } else if (font->has_simple_map) {
                    append_utf8(out, font->simple_map[code & 0xFF]);
                } else {
                    append_utf8(out, 0xFFFD);
                    missing_glyphs_ = true;
                }
            } else if (font && font->has_simple_map) {
                const auto cp = font->simple_map[code & 0xFF];
                if (cp == 0xFFFD) missing_glyphs_ = true;
                if (cp != 0) append_utf8(out, cp);
            } else if (nbytes == 1) {
                append_utf8(out, win_ansi(static_cast<unsigned char>(code)));
            } else {
                append_utf8(out, 0xFFFD);
                missing_glyphs_ = true;
            }
            double w0 = font ? font->default_width : 500.0;
            if (font) {
                if (auto it = font->widths.find(code); it != font->widths.end()) w0 = it->second;
            }
            double tx = (w0 / 1000.0 * gs_.font_size + gs_.char_spacing) * gs_.h_scale;
            if (nbytes == 1 && code == 32) tx += gs_.word_spacing * gs_.h_scale;
            tm_ = Matrix::translate(tx, 0) * tm_;
        }
    }

    void show(const std::vector<const PdfString*>& strings, const std::vector<double>&) {
        TextRun run = begin_run();
        for (const auto* s : strings) decode_into(s->bytes, run.text);
        end_run(std::move(run));
    }

    void show_array(const Array& arr) {
        TextRun run = begin_run();
        for (const auto& item : arr) {
            if (const auto* s = item.str()) {
                decode_into(s->bytes, run.text);
            } else if (auto n = item.number()) {
                const double tx = -*n / 1000.0 * gs_.font_size * gs_.h_scale;
                tm_ = Matrix::translate(tx, 0) * tm_;
                // A large negative kerning adjustment stands in for a space glyph.
                if (*n < -200 && !run.text.empty() && run.text.back() != ' ') run.text.push_back(' ');
            }
        }
        end_run(std::move(run));
    }

    TextRun begin_run() {
        const Matrix m = Matrix::translate(0, gs_.rise) * tm_ * gs_.ctm;
        TextRun run;
        run.x0 = m.e;
        run.y = m.f;
        run.size = std::abs(gs_.font_size) * std::max(std::hypot(m.c, m.d), 1e-9);
        return run;
    }

    void end_run(TextRun run) {
        const Matrix m = Matrix::translate(0, gs_.rise) * tm_ * gs_.ctm;
        run.x1 = m.e;
        if (run.text.empty()) return;
        if (!missing_warned_ && missing_glyphs_) {
            doc_.warnings().push_back("unmapped glyphs replaced with U+FFFD");
            missing_warned_ = true;
        }
        run.order = runs_.size();
        runs_.push_back(std::move(run));
    }

    void do_xobject(const Dict* resources, const std::string& name, int depth) {
        const Dict* xobjects = doc_.resolve_dict(dict_get(resources, "XObject"));
        const Object& xo = doc_.resolve(dict_get(xobjects, name));
        const auto* s = xo.stream();
        if (!s) return;
        const auto* subtype = dict_get(s->dict.get(), "Subtype").name();
        if (subtype && subtype->value == "Image") {
            drawable_ = true;
            return;
        }
        if (subtype && subtype->value == "Form") {
            Matrix form;
            if (const auto* m = doc_.resolve(dict_get(s->dict.get(), "Matrix")).array(); m && m->size() == 6) {
                auto v = [&](std::size_t i) { return doc_.resolve((*m)[i]).number().value_or(0.0); };
                form = Matrix{v(0), v(1), v(2), v(3), v(4), v(5)};
            }
            const Dict* form_res = doc_.resolve_dict(dict_get(s->dict.get(), "Resources"));
            std::string data = doc_.decode_stream(*s);
            const Matrix saved_tm = tm_, saved_tlm = tlm_;
            run(data, form_res ? form_res : resources, form * gs_.ctm, depth + 1);
            tm_ = saved_tm;
            tlm_ = saved_tlm;
        }
    }

    static void skip_inline_image(Parser& p, std::string_view content) {
        // Skip "key value ... ID <binary> EI".
        auto pos = content.find("ID", p.pos());
        if (pos == std::string_view::npos) {
            p.seek(content.size());
            return;
        }
        pos += 3;
        while (pos + 2 <= content.size()) {
            const auto ei = content.find("EI", pos);
            if (ei == std::string_view::npos) {
                p.seek(content.size());
                return;
            }
            const bool before_ok = ei > 0 && is_ws(content[ei - 1]);
            const bool after_ok = ei + 2 >= content.size() || is_ws(content[ei + 2]);
            if (before_ok && after_ok) {
                p.seek(ei + 2);
                return;
            }
            pos = ei + 2;
        }
        p.seek(content.size());
    }

    PdfDocument& doc_;
    std::map<const Dict*, Font>& font_cache_;
    GState gs_;
    Matrix tm_, tlm_;
    std::vector<TextRun> runs_;
    bool drawable_ = false;
    bool missing_glyphs_ = false;
    bool missing_warned_ = false;
};

bool all_space(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; });
}

/// Groups runs into baseline-aligned lines, top to bottom, left to right.
std::vector<std::string> assemble_lines(std::vector<TextRun> runs) {
    std::stable_sort(runs.begin(), runs.end(), [](const TextRun& a, const TextRun& b) { return a.y > b.y; });
    std::vector<std::vector<TextRun>> lines;
    double line_y = 0;
    for (auto& r : runs) {
        const double tol = std::max(0.5 * r.size, 1.0);
        if (lines.empty() || std::abs(r.y - line_y) > tol) {
            lines.emplace_back();
            line_y = r.y;
        }
        lines.back().push_back(std::move(r));
    }
    std::vector<std::string> out;
    for (auto& line : lines) {
        std::stable_sort(line.begin(), line.end(), [](const TextRun& a, const TextRun& b) { return a.x0 < b.x0; });
        std::string text;
        const TextRun* prev = nullptr;
        for (const auto& r : line) {
            if (prev && !text.empty() && text.back() != ' ' && r.text.front() != ' ') {
                const double gap = r.x0 - prev->x1;
                if (gap > 0.15 * std::max(r.size, prev->size)) text.push_back(' ');
            }
            text += r.text;
            prev = &r;
        }
        // Embedded newlines from literal strings become separate lines.
        std::size_t start = 0;
        while (true) {
            const auto nl = text.find('\n', start);
            const auto piece = text.substr(start, nl == std::string::npos ? std::string::npos : nl - start);
            if (!all_space(piece)) out.push_back(piece);
            if (nl == std::string::npos) break;
            start = nl + 1;
        }
    }
    return out;
}

std::string content_of(PdfDocument& doc, const Dict* page) {
    const Object& contents = doc.resolve(dict_get(page, "Contents"));
    std::string data;
    if (const auto* s = contents.stream()) {
        data = doc.decode_stream(*s);
    } else if (const auto* a = contents.array()) {
        for (const auto& part : *a) {
            if (const auto* s2 = doc.resolve(part).stream()) {
                data += doc.decode_stream(*s2);
                data.push_back('\n');
            }
        }
    }
    return data;
}

}  // namespace

PdfExtraction read_pdf(std::string_view bytes) {
    PdfDocument doc(bytes);
    PdfExtraction result;

    if (const Dict* info = doc.resolve_dict(dict_get(&doc.trailer(), "Info"))) {
        if (const auto* t = doc.resolve(dict_get(info, "Title")).str()) result.title = decode_text_string(t->bytes);
    }

    const auto pages = doc.pages();
    if (pages.empty()) throw Error(ErrorKind::EmptyDocument, "PDF has no pages");

    std::map<const Dict*, Font> font_cache;
    for (std::size_t i = 0; i < pages.size(); ++i) {
        const int page_no = static_cast<int>(i) + 1;
        const Dict* resources = doc.inherited(pages[i], "Resources").dict();
        PageInterpreter interp(doc, font_cache);
        interp.run(content_of(doc, pages[i]), resources, Matrix{});
        auto lines = assemble_lines(std::move(interp.runs()));
        if (lines.empty()) {
            if (interp.drawable()) {
                throw Error(ErrorKind::NoTextLayer,
                            "page " + std::to_string(page_no) + " has no text layer (scanned image?); OCR is not supported");
            }
            doc.warnings().push_back("page " + std::to_string(page_no) + " is blank; skipped");
            continue;
        }
        result.pages.push_back({page_no, std::move(lines)});
    }
    if (result.pages.empty()) throw Error(ErrorKind::EmptyDocument, "PDF contains no text");
    result.warnings = std::move(doc.warnings());
    return result;
}

std::vector<PageText> extract_pages(std::string_view bytes) { return read_pdf(bytes).pages; }

}  // namespace lexrag::ingest
