#include "lexrag/rag.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "lexrag/error.hpp"
#include "lexrag/text.hpp"

namespace lexrag::rag {

namespace {

std::string block_label(const store::ScoredChunk& c) { return c.path.empty() ? c.doc_id : c.path; }

std::string render_block(const store::ScoredChunk& c) { return "[" + block_label(c) + "] " + c.text; }

std::string render_prompt(std::string_view question, const std::vector<store::ScoredChunk>& blocks) {
    std::string out(kPromptHeader);
    out += "\n\nContext:\n";
    for (const auto& c : blocks) {
        out += render_block(c);
        out += "\n";
    }
    out += "\nQuestion: ";
    out += question;
    out += "\nAnswer:";
    return out;
}

bool document_order(const store::ScoredChunk& a, const store::ScoredChunk& b) {
    if (a.doc_id != b.doc_id) return a.doc_id < b.doc_id;
    if (a.span.start != b.span.start) return a.span.start < b.span.start;
    return a.chunk_id < b.chunk_id;
}

nlohmann::json retrieved_json(const std::vector<store::ScoredChunk>& retrieved) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : retrieved) arr.push_back(store::to_json(c));
    return arr;
}

}  // namespace

Index Index::open(const std::filesystem::path& dir) {
    if (!store::has_manifest(dir)) {
        throw Error(ErrorKind::EmptyIndex, "missing index at " + dir.string() + " (no manifest; run ingest first)");
    }
    auto s = store::VectorStore::load(dir);
    std::optional<rerank::RerankModel> model;
    if (std::filesystem::exists(dir / kRerankerFile)) model = rerank::RerankModel::load(dir / kRerankerFile);
    return Index(std::move(s), std::move(model));
}

std::string_view to_string(Backend b) { return b == Backend::remote ? "remote" : "stub"; }

Backend backend_from_string(std::string_view s) {
    if (s == "stub") return Backend::stub;
    if (s == "remote") return Backend::remote;
    throw Error(ErrorKind::InvalidConfig, "unknown backend: " + std::string(s));
}

void GenParams::validate() const {
    if (max_new_tokens == 0) throw Error(ErrorKind::InvalidConfig, "max_new_tokens must be positive");
    if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
        throw Error(ErrorKind::InvalidConfig, "temperature must be non-negative");
    }
}

nlohmann::json EngineConfig::to_json() const {
    return {{"embedder", embedder.to_json()},
            {"max_tokens", max_tokens},
            {"k", k},
            {"rerank", rerank},
            {"rerank_pool", rerank_pool},
            {"budget_tokens", budget_tokens},
            {"backend", rag::to_string(backend)},
            {"max_new_tokens", gen.max_new_tokens},
            {"temperature", gen.temperature}};
}

std::vector<store::ScoredChunk> retrieve(std::string_view question, std::size_t k, bool rerank_enabled,
                                         const Index& index, const EngineConfig& cfg) {
    if (index.store.empty()) throw Error(ErrorKind::EmptyIndex, "the index holds no chunks; ingest a document first");
    if (k == 0) throw Error(ErrorKind::InvalidConfig, "k must be at least 1");
    const auto query = embed::embed_text(question, cfg.embedder);
    const std::size_t pool = rerank_enabled ? std::max(k, cfg.rerank_pool) : k;
    auto hits = index.store.top_k(query, pool);
    if (rerank_enabled) {
        hits = rerank::rerank(std::move(hits), question, index.model ? &*index.model : nullptr, cfg.feature_context());
    }
    if (hits.size() > k) hits.resize(k);
    return hits;
}

PromptBundle build_prompt(std::string_view question, const std::vector<store::ScoredChunk>& candidates,
                          std::size_t budget_tokens) {
    PromptBundle bundle;
    bundle.budget = budget_tokens;
    const std::size_t base = text::count_whitespace_tokens(render_prompt(question, {}));
    if (base > budget_tokens) {
        throw Error(ErrorKind::BudgetTooSmall, "prompt template and question need " + std::to_string(base) +
                                                   " tokens, budget is " + std::to_string(budget_tokens));
    }
    // Each block sits on its own line(s), so token counts add up exactly.
    std::size_t used = base;
    std::vector<store::ScoredChunk> admitted;
    for (const auto& c : candidates) {
        const std::size_t cost = text::count_whitespace_tokens(render_block(c));
        if (used + cost > budget_tokens) break;
        used += cost;
        admitted.push_back(c);
    }
    if (admitted.size() < candidates.size()) {
        bundle.warnings.push_back(std::to_string(candidates.size() - admitted.size()) +
                                  " candidate chunk(s) dropped to fit the token budget");
    }
    if (admitted.empty()) bundle.warnings.push_back("empty context: no chunks admitted");
    std::stable_sort(admitted.begin(), admitted.end(), document_order);
    bundle.prompt_text = render_prompt(question, admitted);
    bundle.token_count = text::count_whitespace_tokens(bundle.prompt_text);
    for (const auto& c : admitted) bundle.included.push_back({c.chunk_id, c.path});
    bundle.included_chunks = std::move(admitted);
    return bundle;
}

std::vector<std::string> split_sentences(std::string_view s) {
    std::vector<std::string> out;
    auto emit = [&](std::size_t b, std::size_t e) {
        const auto piece = text::trim(s.substr(b, e - b));
        if (!piece.empty()) out.emplace_back(piece);
    };
    std::size_t start = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (c == '\n') {
            emit(start, i);
            start = i + 1;
        } else if ((c == '.' || c == '?' || c == '!') && i + 1 < s.size() &&
                   (s[i + 1] == ' ' || s[i + 1] == '\t' || s[i + 1] == '\n' || s[i + 1] == '\r')) {
            emit(start, i + 1);
            start = i + 1;
        }
    }
    emit(start, s.size());
    return out;
}

double overlap_f1(std::string_view a, std::string_view b) {
    const auto ta = text::word_tokens(a);
    const auto tb = text::word_tokens(b);
    if (ta.empty() || tb.empty()) return 0.0;
    std::map<std::string, std::size_t> ca;
    for (const auto& t : ta) ++ca[t];
    std::size_t overlap = 0;
    for (const auto& t : tb) {
        if (auto it = ca.find(t); it != ca.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) return 0.0;
    const double p = static_cast<double>(overlap) / static_cast<double>(ta.size());
    const double r = static_cast<double>(overlap) / static_cast<double>(tb.size());
    return 2.0 * p * r / (p + r);
}

StubAnswer generate_stub(const PromptBundle& prompt, std::string_view question) {
    std::optional<StubAnswer> best;
    double best_score = -1.0;
    for (const auto& c : prompt.included_chunks) {
        for (const auto& sentence : split_sentences(c.text)) {
            const double score = overlap_f1(sentence, question);
            if (score > best_score) {
                best_score = score;
                best = StubAnswer{sentence, {c.chunk_id, c.path}};
            }
        }
    }
    if (!best) throw Error(ErrorKind::NoContext, "no context sentences to answer from");
    return *best;
}

std::string generate_remote(const PromptBundle& prompt, const GenParams& params, const std::string& base_url,
                            std::chrono::milliseconds timeout, const http::RetryPolicy& retry) {
    params.validate();
    if (base_url.empty()) throw Error(ErrorKind::InvalidConfig, "remote backend requires a base URL");
    const nlohmann::json body = {
        {"inputs", prompt.prompt_text},
        {"parameters", {{"max_new_tokens", params.max_new_tokens}, {"temperature", params.temperature}}}};
    const auto response =
        http::post_json(base_url, "/generate", body, timeout, retry, http::env_or_empty("LEXRAG_GEN_TOKEN"));
    const auto it = response.find("generated_text");
    if (!response.is_object() || it == response.end() || !it->is_string()) {
        throw Error(ErrorKind::RemoteProtocol, "generation response lacks a \"generated_text\" string");
    }
    return it->get<std::string>();
}

AnswerResult answer(std::string_view question, const Index& index, const EngineConfig& cfg) {
    const auto started = std::chrono::steady_clock::now();
    if (index.store.empty()) throw Error(ErrorKind::EmptyIndex, "the index holds no chunks; ingest a document first");

    AnswerResult result;
    result.backend = cfg.backend;
    result.retrieved = retrieve(question, cfg.k, cfg.rerank, index, cfg);
    try {
        const auto prompt = build_prompt(question, result.retrieved, cfg.budget_tokens);
        result.warnings = prompt.warnings;
        if (cfg.backend == Backend::stub) {
            auto stub = generate_stub(prompt, question);
            result.answer = std::move(stub.answer);
            result.citations.push_back(std::move(stub.citation));
        } else {
            result.answer = generate_remote(prompt, cfg.gen, cfg.gen_base_url,
                                            std::chrono::milliseconds(cfg.gen_timeout_ms), cfg.retry);
            if (result.answer.empty()) throw Error(ErrorKind::RemoteProtocol, "remote backend returned an empty answer");
            result.citations = prompt.included;
        }
    } catch (const Error& e) {
        // Later-stage failures still report what retrieval found.
        throw Error(e.kind(), e.what(), {{"retrieved", retrieved_json(result.retrieved)}});
    }
    result.latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    return result;
}

nlohmann::json to_json(const Citation& c) { return {{"chunk_id", c.chunk_id}, {"path", c.path}}; }

nlohmann::json to_json(const AnswerResult& r) {
    nlohmann::json citations = nlohmann::json::array();
    for (const auto& c : r.citations) citations.push_back(to_json(c));
    return {{"answer", r.answer},
            {"citations", citations},
            {"retrieved", retrieved_json(r.retrieved)},
            {"backend", to_string(r.backend)},
            {"latency_ms", r.latency_ms},
            {"warnings", r.warnings}};
}

}  // namespace lexrag::rag
