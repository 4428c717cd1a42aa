#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lexrag/http_client.hpp"

namespace lexrag::embed {

struct EmbeddingVector {
    std::vector<double> values;
    bool normalized = false;

    std::size_t dim() const { return values.size(); }
};

enum class Provider { local_hashed, remote };

struct EmbedderConfig {
    Provider provider = Provider::local_hashed;
    std::size_t dim = 256;
    std::string remote_base_url;
    int timeout_ms = 10000;
    std::size_t max_batch = 32;
    std::size_t max_concurrency = 4;
    http::RetryPolicy retry;

    /// Throws Error{InvalidConfig}.
    void validate() const;
    static EmbedderConfig from_json(const nlohmann::json& j, EmbedderConfig base);
    static EmbedderConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

/// 64-bit FNV-1a over the raw bytes.
std::uint64_t fnv1a64(std::string_view bytes);

/// Signed feature hashing with sublinear term frequency, L2-normalized.
EmbeddingVector embed_tokens_hashed(const std::vector<std::string>& tokens, std::size_t dim);

EmbeddingVector embed_text(std::string_view text, const EmbedderConfig& cfg);

/// Order-preserving; remote requests go out in groups of at most max_batch.
std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts, const EmbedderConfig& cfg);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

/// Cosine similarity; 0 when either vector has zero norm.
double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace lexrag::embed
