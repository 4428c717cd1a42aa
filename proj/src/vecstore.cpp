#include "lexrag/vecstore.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lexrag/error.hpp"

namespace lexrag::store {

namespace fs = std::filesystem;

namespace {

constexpr const char* kSnapshotLock = ".snapshot.lock";
constexpr const char* kWriterLock = ".writer.lock";

/// flock(2) held for the lifetime of the object.
class FileLock {
public:
    FileLock(const fs::path& path, int operation) {
        fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
        if (fd_ < 0) throw Error(ErrorKind::IoFailure, "cannot open lock file " + path.string());
        if (::flock(fd_, operation) != 0) {
            ::close(fd_);
            fd_ = -1;
            if (operation & LOCK_NB) throw Error(ErrorKind::StoreLocked, "index is locked by another writer");
            throw Error(ErrorKind::IoFailure, "cannot lock " + path.string());
        }
    }
    ~FileLock() {
        if (fd_ >= 0) {
            ::flock(fd_, LOCK_UN);
            ::close(fd_);
        }
    }
    FileLock(const FileLock&) = delete;
    FileLock& operator=(const FileLock&) = delete;

private:
    int fd_ = -1;
};

void write_synced(const fs::path& path, const std::string& data) {
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
    std::size_t off = 0;
    while (off < data.size()) {
        const auto n = ::write(fd, data.data() + off, data.size() - off);
        if (n <= 0) {
            ::close(fd);
            throw Error(ErrorKind::IoFailure, "short write to " + path.string());
        }
        off += static_cast<std::size_t>(n);
    }
    ::fsync(fd);
    ::close(fd);
}

std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string record_line(const VectorRecord& r) {
    nlohmann::ordered_json j;
    j["record_id"] = r.record_id;
    j["chunk_id"] = r.chunk_id;
    j["doc_id"] = r.doc_id;
    j["path"] = r.path;
    j["span"] = {r.span.start, r.span.end};
    j["text"] = r.text;
    j["meta"] = r.meta;
    std::string line = j.dump();
    line.pop_back();  // reopen the object to append the vector verbatim
    line += ",\"vector\":[";
    for (std::size_t i = 0; i < r.vector.values.size(); ++i) {
        if (i) line.push_back(',');
        line += format_real(r.vector.values[i]);
    }
    line += "]}";
    return line;
}

[[noreturn]] void corrupt(const fs::path& dir, const std::string& what) {
    throw Error(ErrorKind::CorruptStore, "corrupt store at " + dir.string() + ": " + what);
}

std::string read_all(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

bool ranks_before(const ScoredChunk& a, const ScoredChunk& b) {
    const double sa = a.active_score();
    const double sb = b.active_score();
    if (sa != sb) return sa > sb;
    return a.chunk_id < b.chunk_id;
}

Filter meta_equals(std::string key, std::string value) {
    return [key = std::move(key), value = std::move(value)](const VectorRecord& r) {
        auto it = r.meta.find(key);
        return it != r.meta.end() && it->second == value;
    };
}

VectorStore::VectorStore(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw Error(ErrorKind::InvalidConfig, "store dimension must be positive");
}

VectorStore::VectorStore(const VectorStore& other) : dim_(other.dim_) {
    std::shared_lock lock(other.data_mutex_);
    next_id_ = other.next_id_;
    records_ = other.records_;
    by_chunk_ = other.by_chunk_;
}

VectorStore& VectorStore::operator=(const VectorStore& other) {
    if (this == &other) return *this;
    VectorStore copy(other);
    std::unique_lock lock(data_mutex_);
    dim_ = copy.dim_;
    next_id_ = copy.next_id_;
    records_ = std::move(copy.records_);
    by_chunk_ = std::move(copy.by_chunk_);
    return *this;
}

std::size_t VectorStore::size() const {
    std::shared_lock lock(data_mutex_);
    return records_.size();
}

std::size_t VectorStore::upsert(std::vector<VectorRecord> records) {
    for (const auto& r : records) {
        if (r.vector.dim() != dim_) {
            throw Error(ErrorKind::DimMismatch, "record " + r.chunk_id + " has dimension " +
                                                    std::to_string(r.vector.dim()) + ", store expects " +
                                                    std::to_string(dim_));
        }
        for (double x : r.vector.values) {
            if (!std::isfinite(x)) throw Error(ErrorKind::DimMismatch, "record " + r.chunk_id + " has non-finite values");
        }
    }
    std::unique_lock writer(writer_mutex_, std::try_to_lock);
    if (!writer.owns_lock()) throw Error(ErrorKind::StoreLocked, "another writer is updating the store");
    std::unique_lock lock(data_mutex_);
    for (auto& r : records) {
        if (auto it = by_chunk_.find(r.chunk_id); it != by_chunk_.end()) {
            r.record_id = records_[it->second].record_id;
            records_[it->second] = std::move(r);
        } else {
            r.record_id = next_id_++;
            by_chunk_.emplace(r.chunk_id, records_.size());
            records_.push_back(std::move(r));
        }
    }
    return records.size();
}

std::size_t VectorStore::erase_doc(const std::string& doc_id) {
    std::unique_lock writer(writer_mutex_, std::try_to_lock);
    if (!writer.owns_lock()) throw Error(ErrorKind::StoreLocked, "another writer is updating the store");
    std::unique_lock lock(data_mutex_);
    const auto before = records_.size();
    std::erase_if(records_, [&](const VectorRecord& r) { return r.doc_id == doc_id; });
    by_chunk_.clear();
    for (std::size_t i = 0; i < records_.size(); ++i) by_chunk_.emplace(records_[i].chunk_id, i);
    return before - records_.size();
}

std::vector<ScoredChunk> VectorStore::top_k(const embed::EmbeddingVector& query, std::size_t k,
                                            const Filter& filter) const {
    if (query.dim() != dim_) {
        throw Error(ErrorKind::DimMismatch, "query has dimension " + std::to_string(query.dim()) +
                                                ", store expects " + std::to_string(dim_));
    }
    if (k == 0) return {};
    std::shared_lock lock(data_mutex_);
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(records_.size());
    for (std::size_t i = 0; i < records_.size(); ++i) {
        if (filter && !filter(records_[i])) continue;
        scored.emplace_back(embed::cosine(query.values, records_[i].vector.values), i);
    }
    const auto cmp = [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return records_[a.second].chunk_id < records_[b.second].chunk_id;
    };
    const auto n = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), cmp);
    std::vector<ScoredChunk> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = records_[scored[i].second];
        out.push_back({r.chunk_id, r.doc_id, r.path, r.text, r.span, scored[i].first, std::nullopt});
    }
    return out;
}

std::optional<VectorRecord> VectorStore::get(const std::string& chunk_id) const {
    std::shared_lock lock(data_mutex_);
    auto it = by_chunk_.find(chunk_id);
    if (it == by_chunk_.end()) return std::nullopt;
    return records_[it->second];
}

std::vector<VectorRecord> VectorStore::records() const {
    std::shared_lock lock(data_mutex_);
    return records_;
}

std::set<std::string> VectorStore::doc_ids() const {
    std::shared_lock lock(data_mutex_);
    std::set<std::string> out;
    for (const auto& r : records_) out.insert(r.doc_id);
    return out;
}

void VectorStore::save(const fs::path& dir, const SaveHook& hook) const {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::IoFailure, "cannot create " + dir.string() + ": " + ec.message());

    std::string records_blob;
    std::size_t count = 0;
    {
        std::shared_lock lock(data_mutex_);
        for (const auto& r : records_) {
            records_blob += record_line(r);
            records_blob.push_back('\n');
        }
        count = records_.size();
    }
    nlohmann::ordered_json manifest;
    manifest["version"] = 1;
    manifest["dim"] = dim_;
    manifest["metric"] = "cosine";
    manifest["count"] = count;

    const auto records_tmp = dir / (std::string(kRecordsFile) + ".tmp");
    const auto manifest_tmp = dir / (std::string(kManifestFile) + ".tmp");
    write_synced(records_tmp, records_blob);
    write_synced(manifest_tmp, manifest.dump() + "\n");
    if (hook) hook("staged");

    // Readers hold the shared snapshot lock for their whole load, so the two
    // renames below are observed together or not at all.
    FileLock swap(dir / kSnapshotLock, LOCK_EX);
    fs::rename(records_tmp, dir / kRecordsFile, ec);
    if (ec) throw Error(ErrorKind::IoFailure, "cannot publish records: " + ec.message());
    if (hook) hook("records_swapped");
    fs::rename(manifest_tmp, dir / kManifestFile, ec);
    if (ec) throw Error(ErrorKind::IoFailure, "cannot publish manifest: " + ec.message());
}

VectorStore VectorStore::load(const fs::path& dir) {
    if (!fs::is_directory(dir)) corrupt(dir, "missing manifest (directory does not exist)");
    FileLock snapshot(dir / kSnapshotLock, LOCK_SH);
    const auto manifest_path = dir / kManifestFile;
    if (!fs::exists(manifest_path)) corrupt(dir, "missing manifest");
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_all(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        corrupt(dir, std::string("unreadable manifest: ") + e.what());
    }
    if (!manifest.is_object() || manifest.value("version", 0) != 1) corrupt(dir, "unsupported manifest version");
    if (manifest.value("metric", std::string()) != "cosine") corrupt(dir, "unsupported metric");
    const auto dim = manifest.value("dim", std::size_t{0});
    const auto count = manifest.value("count", std::size_t{0});
    if (dim == 0) corrupt(dir, "manifest dimension missing");

    const auto records_path = dir / kRecordsFile;
    if (!fs::exists(records_path)) corrupt(dir, "missing records file");
    const std::string blob = read_all(records_path);

    VectorStore store(dim);
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < blob.size()) {
        auto nl = blob.find('\n', start);
        if (nl == std::string::npos) nl = blob.size();
        const std::string_view line(blob.data() + start, nl - start);
        start = nl + 1;
        if (line.empty()) continue;
        ++line_no;
        VectorRecord r;
        try {
            const auto j = nlohmann::json::parse(line);
            r.record_id = j.at("record_id").get<std::uint64_t>();
            r.chunk_id = j.at("chunk_id").get<std::string>();
            r.doc_id = j.at("doc_id").get<std::string>();
            r.path = j.at("path").get<std::string>();
            r.span = {j.at("span").at(0).get<std::size_t>(), j.at("span").at(1).get<std::size_t>()};
            r.text = j.at("text").get<std::string>();
            r.meta = j.at("meta").get<Meta>();
            r.vector.values = j.at("vector").get<std::vector<double>>();
        } catch (const nlohmann::json::exception& e) {
            corrupt(dir, "record line " + std::to_string(line_no) + ": " + e.what());
        }
        if (r.vector.dim() != dim) corrupt(dir, "record line " + std::to_string(line_no) + " has wrong dimension");
        r.vector.normalized = std::abs(embed::l2_norm(r.vector.values) - 1.0) <= 1e-9;
        if (store.by_chunk_.count(r.chunk_id)) corrupt(dir, "duplicate chunk_id " + r.chunk_id);
        store.next_id_ = std::max(store.next_id_, r.record_id + 1);
        store.by_chunk_.emplace(r.chunk_id, store.records_.size());
        store.records_.push_back(std::move(r));
    }
    if (store.records_.size() != count) {
        corrupt(dir, "manifest count " + std::to_string(count) + " but " + std::to_string(store.records_.size()) +
                         " records found");
    }
    return store;
}

WriterLock::WriterLock(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    const auto path = dir / kWriterLock;
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
        ::close(fd_);
        fd_ = -1;
        throw Error(ErrorKind::StoreLocked, "index " + dir.string() + " is locked by another writer");
    }
}

WriterLock::~WriterLock() {
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

bool has_manifest(const fs::path& dir) { return fs::exists(dir / kManifestFile); }

nlohmann::json to_json(const ScoredChunk& c) {
    nlohmann::json j = {{"chunk_id", c.chunk_id},
                        {"doc_id", c.doc_id},
                        {"path", c.path},
                        {"text", c.text},
                        {"span", {c.span.start, c.span.end}},
                        {"cosine_score", c.cosine_score}};
    j["rerank_score"] = c.rerank_score ? nlohmann::json(*c.rerank_score) : nlohmann::json(nullptr);
    return j;
}

nlohmann::json to_json(const VectorRecord& r, bool include_vector) {
    nlohmann::json j = {{"record_id", r.record_id}, {"chunk_id", r.chunk_id}, {"doc_id", r.doc_id},
                        {"path", r.path},           {"span", {r.span.start, r.span.end}},
                        {"text", r.text},           {"meta", r.meta}};
    if (include_vector) j["vector"] = r.vector.values;
    return j;
}

}  // namespace lexrag::store
