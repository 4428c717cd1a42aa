#include "lexrag/pipeline.hpp"

#include <fstream>

#include "lexrag/chunker.hpp"
#include "lexrag/embedder.hpp"
#include "lexrag/error.hpp"
#include "lexrag/text.hpp"

namespace lexrag::pipeline {

nlohmann::json IngestReport::to_json() const {
    return {{"doc_id", doc_id}, {"pages", pages}, {"chunks", chunks}, {"warnings", warnings}};
}

IngestReport ingest_document(const ingest::Document& doc, store::VectorStore& s, const AppConfig& cfg) {
    cfg.chunk.validate();
    cfg.engine.embedder.validate();
    if (s.dim() != cfg.engine.embedder.dim) {
        throw Error(ErrorKind::DimMismatch, "index dimension " + std::to_string(s.dim()) +
                                                " differs from embedder dimension " +
                                                std::to_string(cfg.engine.embedder.dim));
    }
    const auto clean = ingest::clean_document(doc, cfg.grammar);
    const auto chunks = chunker::chunk(clean, cfg.chunk);

    std::vector<std::string> texts;
    texts.reserve(chunks.size());
    for (const auto& c : chunks) texts.push_back(c.text);
    auto vectors = embed::embed_batch(texts, cfg.engine.embedder);

    std::vector<store::VectorRecord> records;
    records.reserve(chunks.size());
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        store::VectorRecord r;
        r.chunk_id = chunks[i].chunk_id;
        r.doc_id = chunks[i].doc_id;
        r.path = chunks[i].path;
        r.text = chunks[i].text;
        r.span = chunks[i].span;
        r.vector = std::move(vectors[i]);
        r.meta["token_count"] = std::to_string(chunks[i].token_count);
        records.push_back(std::move(r));
    }
    s.erase_doc(clean.doc_id);
    s.upsert(std::move(records));

    IngestReport report;
    report.doc_id = clean.doc_id;
    report.pages = clean.page_count;
    report.chunks = chunks.size();
    report.warnings = clean.warnings;
    return report;
}

IngestReport ingest_path(const std::string& path, store::VectorStore& s, const AppConfig& cfg, std::string doc_id) {
    return ingest_document(ingest::load_document(path, std::move(doc_id)), s, cfg);
}

store::VectorStore open_or_create(const std::filesystem::path& dir, std::size_t dim) {
    if (store::has_manifest(dir)) return store::VectorStore::load(dir);
    return store::VectorStore(dim);
}

IngestReport ingest_into_index(const std::string& path, const std::filesystem::path& dir, const AppConfig& cfg) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::IoFailure, "cannot create index directory " + dir.string() + ": " + ec.message());
    store::WriterLock lock(dir);
    auto s = open_or_create(dir, cfg.engine.embedder.dim);
    auto report = ingest_path(path, s, cfg);
    s.save(dir);
    return report;
}

rerank::Features pair_features(const std::string& question, const store::VectorRecord& record,
                               const rag::EngineConfig& cfg) {
    const auto q = embed::embed_text(question, cfg.embedder);
    store::ScoredChunk c;
    c.chunk_id = record.chunk_id;
    c.doc_id = record.doc_id;
    c.path = record.path;
    c.text = record.text;
    c.span = record.span;
    c.cosine_score = embed::cosine(q.values, record.vector.values);
    return rerank::features(text::word_tokens(question), c, cfg.feature_context());
}

std::vector<rerank::Example> load_training_set(const std::filesystem::path& file, const rag::Index& index,
                                               const rag::EngineConfig& cfg) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot read training file " + file.string());
    std::vector<rerank::Example> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::is_blank(line)) continue;
        const auto where = file.string() + ":" + std::to_string(line_no);
        try {
            const auto j = nlohmann::json::parse(line);
            rerank::Example ex;
            ex.label = j.at("label").get<int>();
            if (ex.label != 0 && ex.label != 1) throw Error(ErrorKind::InvalidConfig, where + ": label must be 0 or 1");
            if (j.contains("features")) {
                const auto f = j.at("features").get<std::vector<double>>();
                if (f.size() != rerank::kFeatureCount) {
                    throw Error(ErrorKind::InvalidConfig, where + ": expected 4 features");
                }
                std::copy(f.begin(), f.end(), ex.x.begin());
            } else {
                const auto chunk_id = j.at("chunk_id").get<std::string>();
                const auto record = index.store.get(chunk_id);
                if (!record) throw Error(ErrorKind::NotFound, where + ": unknown chunk_id " + chunk_id);
                ex.x = pair_features(j.at("question").get<std::string>(), *record, cfg);
            }
            out.push_back(ex);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::InvalidConfig, where + ": " + e.what());
        }
    }
    return out;
}

}  // namespace lexrag::pipeline
