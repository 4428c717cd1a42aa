#include "lexrag/config.hpp"

#include <fstream>
#include <sstream>

#include "lexrag/error.hpp"

namespace lexrag {

namespace {

const nlohmann::json& section(const nlohmann::json& j, const char* name) {
    static const nlohmann::json empty = nlohmann::json::object();
    const auto it = j.find(name);
    if (it == j.end()) return empty;
    if (!it->is_object()) throw Error(ErrorKind::InvalidConfig, std::string("config section \"") + name + "\" must be an object");
    return *it;
}

}  // namespace

AppConfig AppConfig::from_json(const nlohmann::json& j) { return from_json(j, AppConfig{}); }

AppConfig AppConfig::from_json(const nlohmann::json& j, AppConfig base) {
    if (!j.is_object()) throw Error(ErrorKind::InvalidConfig, "config must be a JSON object");
    try {
        const auto& server = section(j, "server");
        if (server.contains("auth_token") || j.contains("auth_token")) {
            throw Error(ErrorKind::InvalidConfig, "auth_token is read from LEXRAG_API_TOKEN only, not from config files");
        }
        base.bind_addr = server.value("bind_addr", base.bind_addr);
        if (server.contains("index_dir")) base.index_dir = server.at("index_dir").get<std::string>();
        if (server.contains("static_dir")) base.static_dir = server.at("static_dir").get<std::string>();

        if (j.contains("grammar")) base.grammar = ingest::HeadingGrammar::from_json(section(j, "grammar"));

        const auto& ch = section(j, "chunker");
        base.chunk.max_tokens = ch.value("max_tokens", base.chunk.max_tokens);
        base.chunk.overlap_tokens = ch.value("overlap_tokens", base.chunk.overlap_tokens);
        base.chunk.respect_boundaries = ch.value("respect_boundaries", base.chunk.respect_boundaries);

        base.engine.embedder = embed::EmbedderConfig::from_json(section(j, "embedder"), base.engine.embedder);

        const auto& r = section(j, "rag");
        base.engine.k = r.value("k", base.engine.k);
        base.engine.rerank = r.value("rerank", base.engine.rerank);
        base.engine.rerank_pool = r.value("rerank_pool", base.engine.rerank_pool);
        base.engine.budget_tokens = r.value("budget_tokens", base.engine.budget_tokens);
        if (r.contains("backend")) base.engine.backend = rag::backend_from_string(r.at("backend").get<std::string>());
        base.engine.gen.max_new_tokens = r.value("max_new_tokens", base.engine.gen.max_new_tokens);
        base.engine.gen.temperature = r.value("temperature", base.engine.gen.temperature);
        base.engine.gen_base_url = r.value("gen_base_url", base.engine.gen_base_url);
        base.engine.gen_timeout_ms = r.value("gen_timeout_ms", base.engine.gen_timeout_ms);

        const auto& t = section(j, "train");
        base.train.learning_rate = t.value("learning_rate", base.train.learning_rate);
        base.train.epochs = t.value("epochs", base.train.epochs);
        base.train.batch_size = t.value("batch_size", base.train.batch_size);
        base.train.seed = t.value("seed", base.train.seed);
        base.train.shuffle = t.value("shuffle", base.train.shuffle);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidConfig, std::string("bad config value: ") + e.what());
    }
    return base;
}

AppConfig AppConfig::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorKind::InvalidConfig, "cannot read config file " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidConfig, "config file " + file.string() + " is not valid JSON: " + e.what());
    }
    return from_json(j);
}

nlohmann::json AppConfig::to_json() const {
    return {{"server", {{"bind_addr", bind_addr}, {"index_dir", index_dir.string()}, {"static_dir", static_dir.string()}}},
            {"grammar",
             {{"part", grammar.part},
              {"article", grammar.article},
              {"schedule", grammar.schedule},
              {"clause", grammar.clause}}},
            {"chunker",
             {{"max_tokens", chunk.max_tokens},
              {"overlap_tokens", chunk.overlap_tokens},
              {"respect_boundaries", chunk.respect_boundaries}}},
            {"embedder", engine.embedder.to_json()},
            {"rag",
             {{"k", engine.k},
              {"rerank", engine.rerank},
              {"rerank_pool", engine.rerank_pool},
              {"budget_tokens", engine.budget_tokens},
              {"backend", rag::to_string(engine.backend)},
              {"max_new_tokens", engine.gen.max_new_tokens},
              {"temperature", engine.gen.temperature},
              {"gen_base_url", engine.gen_base_url},
              {"gen_timeout_ms", engine.gen_timeout_ms}}},
            {"train",
             {{"learning_rate", train.learning_rate},
              {"epochs", train.epochs},
              {"batch_size", train.batch_size},
              {"seed", train.seed},
              {"shuffle", train.shuffle}}}};
}

void AppConfig::finalize() {
    chunk.validate();
    engine.embedder.validate();
    engine.gen.validate();
    train.validate();
    if (engine.k == 0) throw Error(ErrorKind::InvalidConfig, "k must be at least 1");
    if (engine.gen_timeout_ms <= 0) throw Error(ErrorKind::InvalidConfig, "gen_timeout_ms must be positive");
    engine.max_tokens = chunk.max_tokens;
}

}  // namespace lexrag
