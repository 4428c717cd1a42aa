#include "lexrag/rerank.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "lexrag/embedder.hpp"
#include "lexrag/error.hpp"
#include "lexrag/text.hpp"

namespace lexrag::rerank {

namespace {

constexpr double kProbFloor = 1e-12;

/// Unbiased integer in [0, bound) from a 64-bit Mersenne Twister; unlike
/// std::uniform_int_distribution this is identical across standard libraries.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r = 0;
    do {
        r = rng();
    } while (r >= limit);
    return r % bound;
}

double linear(const RerankModel& m, const Features& x) {
    double z = m.b;
    for (std::size_t i = 0; i < kFeatureCount; ++i) z += m.w[i] * x[i];
    return z;
}

RerankModel model_of(const std::vector<double>& theta) {
    RerankModel m;
    std::copy_n(theta.begin(), kFeatureCount, m.w.begin());
    m.b = theta[kFeatureCount];
    return m;
}

}  // namespace

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
    const std::size_t cols = rows.empty() ? 0 : rows.front().size();
    Matrix m(rows.size(), cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != cols) throw Error(ErrorKind::ShapeMismatch, "ragged matrix rows");
        std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
    }
    return m;
}

const std::array<std::string_view, kFeatureCount>& RerankModel::feature_names() {
    static const std::array<std::string_view, kFeatureCount> names = {"cosine_pooled", "attention_pool", "jaccard",
                                                                      "len_norm"};
    return names;
}

double RerankModel::score(const Features& x) const { return sigmoid(linear(*this, x)); }

nlohmann::json RerankModel::to_json() const {
    nlohmann::ordered_json j;
    j["version"] = 1;
    j["w"] = w;
    j["b"] = b;
    j["features"] = feature_names();
    return nlohmann::json::parse(j.dump());
}

RerankModel RerankModel::from_json(const nlohmann::json& j) {
    try {
        if (j.at("version").get<int>() != 1) throw Error(ErrorKind::InvalidConfig, "unsupported reranker version");
        const auto names = j.at("features").get<std::vector<std::string>>();
        if (names.size() != kFeatureCount ||
            !std::equal(names.begin(), names.end(), feature_names().begin())) {
            throw Error(ErrorKind::InvalidConfig, "reranker feature list does not match");
        }
        const auto w = j.at("w").get<std::vector<double>>();
        if (w.size() != kFeatureCount) throw Error(ErrorKind::InvalidConfig, "reranker needs 4 weights");
        RerankModel m;
        std::copy(w.begin(), w.end(), m.w.begin());
        m.b = j.at("b").get<double>();
        for (double v : w) {
            if (!std::isfinite(v)) throw Error(ErrorKind::InvalidConfig, "non-finite reranker weight");
        }
        if (!std::isfinite(m.b)) throw Error(ErrorKind::InvalidConfig, "non-finite reranker bias");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidConfig, std::string("malformed reranker model: ") + e.what());
    }
}

void RerankModel::save(const std::filesystem::path& file) const {
    std::ofstream out(file);
    if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + file.string());
    out << nlohmann::ordered_json::parse(to_json().dump()).dump(2) << "\n";
}

RerankModel RerankModel::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot read " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return from_json(nlohmann::json::parse(ss.str()));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidConfig, std::string("malformed reranker model: ") + e.what());
    }
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw Error(ErrorKind::InvalidConfig, "learning rate must be positive");
    }
    if (epochs == 0) throw Error(ErrorKind::InvalidConfig, "epochs must be positive");
    if (batch_size == 0) throw Error(ErrorKind::InvalidConfig, "batch size must be positive");
}

std::vector<double> softmax(std::span<const double> x) {
    if (x.empty()) throw Error(ErrorKind::EmptyInput, "softmax of an empty vector");
    const double mx = *std::max_element(x.begin(), x.end());
    std::vector<double> out(x.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = std::exp(x[i] - mx);
        sum += out[i];
    }
    for (auto& v : out) v /= sum;
    return out;
}

Matrix attention(const AttentionInput& in) {
    const auto& q = in.queries;
    const auto& k = in.keys;
    const auto& v = in.values;
    if (k.rows() == 0 || q.cols() != k.cols() || k.rows() != v.rows() || in.d_k == 0) {
        throw Error(ErrorKind::ShapeMismatch, "attention needs Q (m x d), K (n x d), V (n x d_v) with n >= 1");
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(in.d_k));
    Matrix out(q.rows(), v.cols());
    std::vector<double> scores(k.rows());
    for (std::size_t i = 0; i < q.rows(); ++i) {
        for (std::size_t j = 0; j < k.rows(); ++j) scores[j] = embed::dot(q.row(i), k.row(j)) * scale;
        const auto weights = softmax(scores);
        auto dst = out.row(i);
        for (std::size_t j = 0; j < k.rows(); ++j) {
            const auto src = v.row(j);
            for (std::size_t c = 0; c < v.cols(); ++c) dst[c] += weights[j] * src[c];
        }
    }
    return out;
}

double cross_entropy(const LossSample& s) {
    if (s.p.empty() || s.p.size() != s.y.size()) {
        throw Error(ErrorKind::InvalidDistribution, "p and y must be non-empty and of equal length");
    }
    double sum = 0.0;
    int ones = 0;
    for (std::size_t i = 0; i < s.p.size(); ++i) {
        if (!(s.p[i] >= 0.0) || !std::isfinite(s.p[i])) {
            throw Error(ErrorKind::InvalidDistribution, "probabilities must be finite and non-negative");
        }
        sum += s.p[i];
        if (s.y[i] == 1.0) {
            ++ones;
        } else if (s.y[i] != 0.0) {
            throw Error(ErrorKind::InvalidDistribution, "y must be one-hot");
        }
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorKind::InvalidDistribution, "probabilities must sum to 1");
    if (ones != 1) throw Error(ErrorKind::InvalidDistribution, "y must be one-hot");
    double loss = 0.0;
    for (std::size_t i = 0; i < s.p.size(); ++i) {
        if (s.y[i] == 1.0) loss -= std::log(std::clamp(s.p[i], kProbFloor, 1.0));
    }
    return loss;
}

std::vector<double> sgd_step(std::span<const double> theta, std::span<const double> grad, double learning_rate) {
    if (theta.size() != grad.size()) throw Error(ErrorKind::ShapeMismatch, "theta and gradient lengths differ");
    if (!(learning_rate > 0.0)) throw Error(ErrorKind::InvalidConfig, "learning rate must be positive");
    std::vector<double> out(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) out[i] = theta[i] - learning_rate * grad[i];
    return out;
}

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double example_loss(const RerankModel& model, const Example& ex) {
    const double p = model.score(ex.x);
    return cross_entropy({{1.0 - p, p}, {ex.label == 0 ? 1.0 : 0.0, ex.label == 1 ? 1.0 : 0.0}});
}

Gradient example_gradient(const RerankModel& model, const Example& ex) {
    const double residual = model.score(ex.x) - static_cast<double>(ex.label);
    Gradient g;
    for (std::size_t i = 0; i < kFeatureCount; ++i) g.dw[i] = residual * ex.x[i];
    g.db = residual;
    return g;
}

TrainResult train_reranker(const std::vector<Example>& dataset, const TrainConfig& cfg) {
    cfg.validate();
    if (dataset.empty()) throw Error(ErrorKind::EmptyDataset, "training set is empty");
    for (const auto& ex : dataset) {
        if (ex.label != 0 && ex.label != 1) throw Error(ErrorKind::InvalidConfig, "labels must be 0 or 1");
    }

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainResult result;
    std::vector<double> theta(kFeatureCount + 1, 0.0);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.shuffle) {
            for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[bounded(rng, i)]);
        }
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(start + cfg.batch_size, order.size());
            const RerankModel model = model_of(theta);
            std::vector<double> grad(kFeatureCount + 1, 0.0);
            for (std::size_t i = start; i < end; ++i) {
                const auto& ex = dataset[order[i]];
                epoch_loss += example_loss(model, ex);
                const auto g = example_gradient(model, ex);
                for (std::size_t f = 0; f < kFeatureCount; ++f) grad[f] += g.dw[f];
                grad[kFeatureCount] += g.db;
            }
            const double n = static_cast<double>(end - start);
            for (auto& g : grad) g /= n;
            theta = sgd_step(theta, grad, cfg.learning_rate);
        }
        epoch_loss /= static_cast<double>(order.size());
        if (!std::isfinite(epoch_loss) ||
            !std::all_of(theta.begin(), theta.end(), [](double t) { return std::isfinite(t); })) {
            throw Error(ErrorKind::NonFiniteLoss, "training diverged at epoch " + std::to_string(epoch + 1));
        }
        result.loss_history.push_back(epoch_loss);
    }
    result.model = model_of(theta);
    return result;
}

Matrix token_matrix(const std::vector<std::string>& tokens, std::size_t dim) {
    Matrix m(tokens.size(), dim);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto v = embed::embed_tokens_hashed({tokens[i]}, dim);
        std::copy(v.values.begin(), v.values.end(), m.row(i).begin());
    }
    return m;
}

double attention_pool(const Matrix& question_vecs, const Matrix& chunk_vecs) {
    if (question_vecs.rows() == 0 || chunk_vecs.rows() == 0) return 0.0;
    const auto attended =
        attention({question_vecs, chunk_vecs, chunk_vecs, question_vecs.cols()});
    double sum = 0.0;
    for (std::size_t i = 0; i < question_vecs.rows(); ++i) sum += embed::dot(question_vecs.row(i), attended.row(i));
    return sum / static_cast<double>(question_vecs.rows());
}

double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    const std::set<std::string> sa(a.begin(), a.end());
    const std::set<std::string> sb(b.begin(), b.end());
    if (sa.empty() && sb.empty()) return 0.0;
    std::size_t inter = 0;
    for (const auto& t : sa) inter += sb.count(t);
    return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

Features features(const std::vector<std::string>& question_tokens, const store::ScoredChunk& chunk,
                  const FeatureContext& ctx) {
    const auto chunk_tokens = text::word_tokens(chunk.text);
    Features f{};
    f[0] = chunk.cosine_score;
    f[1] = attention_pool(token_matrix(question_tokens, ctx.dim), token_matrix(chunk_tokens, ctx.dim));
    f[2] = jaccard(question_tokens, chunk_tokens);
    const auto count = static_cast<double>(text::count_whitespace_tokens(chunk.text));
    f[3] = std::log1p(count) / std::log1p(static_cast<double>(std::max<std::size_t>(ctx.max_tokens, 1)));
    return f;
}

std::vector<store::ScoredChunk> rerank(std::vector<store::ScoredChunk> candidates, std::string_view question,
                                       const RerankModel* model, const FeatureContext& ctx) {
    if (candidates.empty()) return candidates;
    const auto q_tokens = text::word_tokens(question);
    if (model) {
        for (auto& c : candidates) c.rerank_score = model->score(features(q_tokens, c, ctx));
    } else {
        const auto q_vecs = token_matrix(q_tokens, ctx.dim);
        for (auto& c : candidates) {
            c.rerank_score = attention_pool(q_vecs, token_matrix(text::word_tokens(c.text), ctx.dim));
        }
    }
    std::sort(candidates.begin(), candidates.end(), store::ranks_before);
    return candidates;
}

}  // namespace lexrag::rerank
