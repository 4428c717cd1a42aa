#pragma once

// Numeric kernels (softmax, scaled dot-product attention, cross-entropy, SGD)
// and the two re-rankers built on them: a parameter-free attention-pool scorer
// and a logistic model trained by mini-batch SGD.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lexrag/vecstore.hpp"

namespace lexrag::rerank {

/// Dense row-major matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    static Matrix from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

struct AttentionInput {
    Matrix queries;  // m x d
    Matrix keys;     // n x d
    Matrix values;   // n x d_v
    std::size_t d_k = 0;
};

/// One classification example: predicted distribution and one-hot target.
struct LossSample {
    std::vector<double> p;
    std::vector<double> y;
};

inline constexpr std::size_t kFeatureCount = 4;
using Features = std::array<double, kFeatureCount>;

struct RerankModel {
    Features w{};
    double b = 0.0;

    static const std::array<std::string_view, kFeatureCount>& feature_names();
    double score(const Features& x) const;  // sigmoid(w.x + b)

    nlohmann::json to_json() const;
    static RerankModel from_json(const nlohmann::json& j);
    void save(const std::filesystem::path& file) const;
    static RerankModel load(const std::filesystem::path& file);
};

struct TrainConfig {
    double learning_rate = 0.1;
    std::size_t epochs = 200;
    std::size_t batch_size = 16;
    std::uint64_t seed = 42;
    bool shuffle = true;

    /// Throws Error{InvalidConfig} for non-positive learning rate, epochs or batch size.
    void validate() const;
};

struct Example {
    Features x{};
    int label = 0;
};

struct TrainResult {
    RerankModel model;
    std::vector<double> loss_history;  // mean loss per epoch
};

struct Gradient {
    Features dw{};
    double db = 0.0;
};

/// Inputs to the feature extractor that are not part of the candidate.
struct FeatureContext {
    std::size_t dim = 256;         // token embedding dimension
    std::size_t max_tokens = 180;  // chunker window size, for length normalization
};

std::vector<double> softmax(std::span<const double> x);

Matrix attention(const AttentionInput& input);

double cross_entropy(const LossSample& sample);

std::vector<double> sgd_step(std::span<const double> theta, std::span<const double> grad, double learning_rate);

double sigmoid(double z);

/// Binary cross-entropy of the logistic model on one example.
double example_loss(const RerankModel& model, const Example& ex);

/// Analytic gradient of example_loss: (p - y) x and (p - y).
Gradient example_gradient(const RerankModel& model, const Example& ex);

TrainResult train_reranker(const std::vector<Example>& dataset, const TrainConfig& cfg);

/// Hashed singleton-token embeddings, one row per token.
Matrix token_matrix(const std::vector<std::string>& tokens, std::size_t dim);

/// Mean agreement of each question token with its attention-weighted view of
/// the chunk tokens. Empty inputs score 0.
double attention_pool(const Matrix& question_vecs, const Matrix& chunk_vecs);

double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b);

Features features(const std::vector<std::string>& question_tokens, const store::ScoredChunk& chunk,
                  const FeatureContext& ctx);

/// Scores every candidate (model probability, or attention pool without a
/// model) and sorts by that score, ties by chunk_id.
std::vector<store::ScoredChunk> rerank(std::vector<store::ScoredChunk> candidates, std::string_view question,
                                       const RerankModel* model, const FeatureContext& ctx);

}  // namespace lexrag::rerank
