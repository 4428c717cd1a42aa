#include "lexrag/embedder.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <map>

#include "lexrag/error.hpp"
#include "lexrag/text.hpp"

namespace lexrag::embed {

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::vector<EmbeddingVector> remote_group(const std::vector<std::string>& texts, std::size_t first,
                                          std::size_t last, const EmbedderConfig& cfg) {
    nlohmann::json inputs = nlohmann::json::array();
    for (auto i = first; i < last; ++i) inputs.push_back(texts[i]);
    const auto response = http::post_json(cfg.remote_base_url, "/embed", {{"inputs", inputs}},
                                          std::chrono::milliseconds(cfg.timeout_ms), cfg.retry,
                                          http::env_or_empty("LEXRAG_EMBED_TOKEN"));
    const auto it = response.find("embeddings");
    if (it == response.end() || !it->is_array()) {
        throw Error(ErrorKind::RemoteProtocol, "embedding response lacks an \"embeddings\" array");
    }
    if (it->size() != last - first) {
        throw Error(ErrorKind::RemoteProtocol, "embedding response has " + std::to_string(it->size()) +
                                                   " rows for " + std::to_string(last - first) + " inputs");
    }
    std::vector<EmbeddingVector> out;
    out.reserve(it->size());
    for (const auto& row : *it) {
        if (!row.is_array()) throw Error(ErrorKind::RemoteProtocol, "embedding row is not an array");
        if (row.size() != cfg.dim) {
            throw Error(ErrorKind::DimMismatch, "remote returned " + std::to_string(row.size()) +
                                                    " values, expected " + std::to_string(cfg.dim));
        }
        EmbeddingVector v;
        v.values.reserve(row.size());
        for (const auto& x : row) {
            if (!x.is_number() || !std::isfinite(x.get<double>())) {
                throw Error(ErrorKind::RemoteProtocol, "embedding contains a non-finite or non-numeric value");
            }
            v.values.push_back(x.get<double>());
        }
        v.normalized = std::abs(l2_norm(v.values) - 1.0) <= 1e-9;
        out.push_back(std::move(v));
    }
    return out;
}

}  // namespace

void EmbedderConfig::validate() const {
    if (dim < 8) throw Error(ErrorKind::InvalidConfig, "embedding dim must be at least 8");
    if (max_batch == 0) throw Error(ErrorKind::InvalidConfig, "max_batch must be positive");
    if (timeout_ms <= 0) throw Error(ErrorKind::InvalidConfig, "timeout_ms must be positive");
    if (provider == Provider::remote && remote_base_url.empty()) {
        throw Error(ErrorKind::InvalidConfig, "remote embedding provider requires remote_base_url");
    }
}

EmbedderConfig EmbedderConfig::from_json(const nlohmann::json& j, EmbedderConfig base) {
    if (j.contains("provider")) {
        const auto p = j.at("provider").get<std::string>();
        if (p == "local_hashed") {
            base.provider = Provider::local_hashed;
        } else if (p == "remote") {
            base.provider = Provider::remote;
        } else {
            throw Error(ErrorKind::InvalidConfig, "unknown embedding provider: " + p);
        }
    }
    base.dim = j.value("dim", base.dim);
    base.remote_base_url = j.value("remote_base_url", base.remote_base_url);
    base.timeout_ms = j.value("timeout_ms", base.timeout_ms);
    base.max_batch = j.value("max_batch", base.max_batch);
    return base;
}

EmbedderConfig EmbedderConfig::from_json(const nlohmann::json& j) { return from_json(j, EmbedderConfig{}); }

nlohmann::json EmbedderConfig::to_json() const {
    return {{"provider", provider == Provider::remote ? "remote" : "local_hashed"},
            {"dim", dim},
            {"remote_base_url", remote_base_url},
            {"timeout_ms", timeout_ms},
            {"max_batch", max_batch}};
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = kFnvOffset;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= kFnvPrime;
    }
    return h;
}

EmbeddingVector embed_tokens_hashed(const std::vector<std::string>& tokens, std::size_t dim) {
    if (dim < 8) throw Error(ErrorKind::InvalidConfig, "embedding dim must be at least 8");
    // Sorted distinct tokens: accumulation order is independent of input order.
    std::map<std::string, std::size_t> counts;
    for (const auto& t : tokens) ++counts[text::ascii_lower(t)];

    EmbeddingVector v;
    v.values.assign(dim, 0.0);
    for (const auto& [token, count] : counts) {
        const auto h = fnv1a64(token);
        const auto index = static_cast<std::size_t>(h % dim);
        const double sign = (h >> 63) == 0 ? 1.0 : -1.0;
        v.values[index] += sign * (1.0 + std::log(static_cast<double>(count)));
    }
    const double norm = l2_norm(v.values);
    if (norm > 0.0) {
        for (auto& x : v.values) x /= norm;
        v.normalized = true;
    }
    return v;
}

EmbeddingVector embed_text(std::string_view text_in, const EmbedderConfig& cfg) {
    cfg.validate();
    if (cfg.provider == Provider::local_hashed) return embed_tokens_hashed(text::word_tokens(text_in), cfg.dim);
    return remote_group({std::string(text_in)}, 0, 1, cfg).front();
}

std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts, const EmbedderConfig& cfg) {
    cfg.validate();
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    if (cfg.provider == Provider::local_hashed) {
        for (const auto& t : texts) out.push_back(embed_tokens_hashed(text::word_tokens(t), cfg.dim));
        return out;
    }
    // Groups of max_batch, at most max_concurrency requests in flight.
    std::vector<std::pair<std::size_t, std::size_t>> groups;
    for (std::size_t i = 0; i < texts.size(); i += cfg.max_batch) {
        groups.emplace_back(i, std::min(i + cfg.max_batch, texts.size()));
    }
    const std::size_t wave = std::max<std::size_t>(1, cfg.max_concurrency);
    for (std::size_t g = 0; g < groups.size(); g += wave) {
        std::vector<std::future<std::vector<EmbeddingVector>>> inflight;
        for (auto k = g; k < std::min(g + wave, groups.size()); ++k) {
            inflight.push_back(std::async(std::launch::async, remote_group, std::cref(texts), groups[k].first,
                                          groups[k].second, std::cref(cfg)));
        }
        // get() rethrows; any failing group fails the whole batch.
        for (auto& f : inflight) {
            for (auto& v : f.get()) out.push_back(std::move(v));
        }
    }
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    const auto n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double cosine(std::span<const double> a, std::span<const double> b) {
    const double na = l2_norm(a);
    const double nb = l2_norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

}  // namespace lexrag::embed
