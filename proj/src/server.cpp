#include "lexrag/server.hpp"

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "httplib.h"
#include "lexrag/evalkit.hpp"
#include "lexrag/ingest.hpp"
#include "lexrag/pipeline.hpp"
#include "lexrag/rag.hpp"

namespace lexrag::server {

namespace {

constexpr const char* kJson = "application/json";

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), kJson);
}

void send_error(httplib::Response& res, const Error& e) { send_json(res, status_for(e.kind()), error_body(e)); }

nlohmann::json parse_body(const httplib::Request& req) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception&) {
        throw Error(ErrorKind::BadRequest, "request body is not valid JSON");
    }
    if (!j.is_object()) throw Error(ErrorKind::BadRequest, "request body must be a JSON object");
    return j;
}

template <typename T>
T field(const nlohmann::json& j, const char* key, T fallback) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw Error(ErrorKind::BadRequest, std::string("field \"") + key + "\" has the wrong type");
    }
}

std::string required_question(const nlohmann::json& j) {
    const auto q = field<std::string>(j, "question", "");
    if (q.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw Error(ErrorKind::BadRequest, "\"question\" must be a non-empty string");
    }
    return q;
}

std::size_t positive_k(const nlohmann::json& j, std::size_t fallback) {
    const auto k = field<long long>(j, "k", static_cast<long long>(fallback));
    if (k < 1) throw Error(ErrorKind::BadRequest, "\"k\" must be at least 1");
    return static_cast<std::size_t>(k);
}

std::pair<std::string, int> split_bind_addr(const std::string& addr) {
    const auto colon = addr.rfind(':');
    if (colon == std::string::npos) throw Error(ErrorKind::InvalidConfig, "bind_addr must be host:port, got " + addr);
    try {
        std::size_t used = 0;
        const int port = std::stoi(addr.substr(colon + 1), &used);
        if (used != addr.size() - colon - 1 || port < 0 || port > 65535) throw std::out_of_range("port");
        return {addr.substr(0, colon), port};
    } catch (const std::exception&) {
        throw Error(ErrorKind::InvalidConfig, "bad port in bind_addr " + addr);
    }
}

}  // namespace

int status_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::BadRequest:
        case ErrorKind::InvalidConfig:
        case ErrorKind::MalformedPdf:
        case ErrorKind::EncryptedPdf:
        case ErrorKind::NoTextLayer:
        case ErrorKind::EmptyDocument:
        case ErrorKind::BudgetTooSmall:
        case ErrorKind::NoContext:
        case ErrorKind::EmptyGoldSet:
        case ErrorKind::EmptyRelevant:
        case ErrorKind::EmptyInput:
        case ErrorKind::ShapeMismatch:
        case ErrorKind::InvalidDistribution:
        case ErrorKind::EmptyDataset:
            return 400;
        case ErrorKind::NotFound:
            return 404;
        case ErrorKind::EmptyIndex:
        case ErrorKind::StoreLocked:
            return 409;
        case ErrorKind::RemoteUnavailable:
        case ErrorKind::RemoteProtocol:
        case ErrorKind::DimMismatch:
            return 502;
        case ErrorKind::Timeout:
            return 504;
        default:
            return 500;
    }
}

nlohmann::json error_body(const Error& e) {
    nlohmann::json inner = {{"kind", to_string(e.kind())}, {"message", e.what()}};
    if (!e.detail().is_null()) inner["detail"] = e.detail();
    return {{"error", inner}};
}

struct Server::Impl {
    AppConfig cfg;
    std::string token;
    httplib::Server http;

    mutable std::mutex snapshot_mutex;
    std::shared_ptr<const rag::Index> current;  // null until the first ingest
    std::mutex ingest_mutex;

    Impl(AppConfig c, std::string t) : cfg(std::move(c)), token(std::move(t)) {
        cfg.finalize();
        if (cfg.index_dir.empty()) throw Error(ErrorKind::InvalidConfig, "server needs an index directory");
        std::error_code ec;
        std::filesystem::create_directories(cfg.index_dir, ec);
        if (ec) throw Error(ErrorKind::IoFailure, "cannot create index directory " + cfg.index_dir.string());
        if (store::has_manifest(cfg.index_dir)) {
            current = std::make_shared<const rag::Index>(rag::Index::open(cfg.index_dir));
        }
        http.set_socket_options([](socket_t sock) {
            int yes = 1;
            setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
        });
        routes();
    }

    std::shared_ptr<const rag::Index> snapshot() const {
        std::lock_guard lock(snapshot_mutex);
        return current;
    }

    std::shared_ptr<const rag::Index> require_index() const {
        auto s = snapshot();
        if (!s || s->store.empty()) {
            throw Error(ErrorKind::EmptyIndex, "no index loaded; ingest a document first");
        }
        return s;
    }

    bool authorized(const httplib::Request& req) const {
        if (token.empty()) return true;
        return req.get_header_value("Authorization") == "Bearer " + token;
    }

    template <typename F>
    httplib::Server::Handler guarded(F f) {
        return [f](const httplib::Request& req, httplib::Response& res) {
            try {
                f(req, res);
            } catch (const Error& e) {
                send_error(res, e);
            } catch (const std::exception& e) {
                send_error(res, Error(ErrorKind::IoFailure, e.what()));
            }
        };
    }

    void routes() {
        http.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
            const bool api = req.path.rfind("/v1/", 0) == 0;
            if (!api || req.path == "/v1/health" || authorized(req)) return httplib::Server::HandlerResponse::Unhandled;
            send_json(res, 401, {{"error", {{"kind", "unauthorized"}, {"message", "missing or invalid bearer token"}}}});
            return httplib::Server::HandlerResponse::Handled;
        });

        http.Get("/v1/health", guarded([this](const httplib::Request&, httplib::Response& res) {
            const auto s = snapshot();
            send_json(res, 200, {{"status", "ok"}, {"index_count", s ? s->store.size() : 0}});
        }));

        http.Get("/v1/stats", guarded([this](const httplib::Request&, httplib::Response& res) {
            const auto s = snapshot();
            send_json(res, 200,
                      {{"docs", s ? s->store.doc_ids().size() : 0},
                       {"chunks", s ? s->store.size() : 0},
                       {"dim", s ? s->store.dim() : cfg.engine.embedder.dim},
                       {"reranker_loaded", s && s->model.has_value()}});
        }));

        http.Get(R"(/v1/chunks/(.+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto id = req.matches[1].str();
            const auto s = snapshot();
            const auto record = s ? s->store.get(id) : std::nullopt;
            if (!record) throw Error(ErrorKind::NotFound, "unknown chunk id: " + id);
            send_json(res, 200, store::to_json(*record, true));
        }));

        http.Post("/v1/query", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto body = parse_body(req);
            const auto question = required_question(body);
            const auto k = positive_k(body, cfg.engine.k);
            const bool rr = field<bool>(body, "rerank", cfg.engine.rerank);
            const auto index = require_index();
            nlohmann::json results = nlohmann::json::array();
            for (const auto& hit : rag::retrieve(question, k, rr, *index, cfg.engine)) {
                results.push_back(store::to_json(hit));
            }
            send_json(res, 200, {{"results", results}});
        }));

        http.Post("/v1/answer", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto body = parse_body(req);
            auto engine = cfg.engine;
            const auto question = required_question(body);
            engine.k = positive_k(body, engine.k);
            engine.rerank = field<bool>(body, "rerank", engine.rerank);
            if (body.contains("backend")) engine.backend = rag::backend_from_string(field<std::string>(body, "backend", ""));
            const auto max_new = field<long long>(body, "max_new_tokens", static_cast<long long>(engine.gen.max_new_tokens));
            if (max_new < 1) throw Error(ErrorKind::BadRequest, "\"max_new_tokens\" must be positive");
            engine.gen.max_new_tokens = static_cast<std::size_t>(max_new);
            engine.gen.temperature = field<double>(body, "temperature", engine.gen.temperature);
            if (!(engine.gen.temperature >= 0.0)) throw Error(ErrorKind::BadRequest, "\"temperature\" must be >= 0");
            const auto index = require_index();
            send_json(res, 200, rag::to_json(rag::answer(question, *index, engine)));
        }));

        http.Post("/v1/eval", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto body = parse_body(req);
            std::vector<evalkit::GoldItem> gold;
            if (body.contains("gold")) {
                if (!body.at("gold").is_array()) throw Error(ErrorKind::BadRequest, "\"gold\" must be an array");
                std::string lines;
                for (const auto& item : body.at("gold")) lines += item.dump() + "\n";
                gold = evalkit::parse_gold(lines);
            } else {
                throw Error(ErrorKind::BadRequest, "body needs a \"gold\" array");
            }
            const auto k = positive_k(body, cfg.engine.k);
            const auto index = require_index();
            send_json(res, 200, evalkit::to_json(evalkit::run_eval(gold, *index, cfg.engine, k)));
        }));

        http.Post("/v1/ingest", guarded([this](const httplib::Request& req, httplib::Response& res) {
            std::unique_lock busy(ingest_mutex, std::try_to_lock);
            if (!busy.owns_lock()) throw Error(ErrorKind::StoreLocked, "another ingest is in progress");
            if (req.is_multipart_form_data()) {
                if (!req.has_file("file")) throw Error(ErrorKind::BadRequest, "multipart upload needs a \"file\" part");
                const auto file = req.get_file_value("file");
                const auto name = file.filename.empty() ? std::string("upload.txt") : file.filename;
                const auto doc_id = ingest::doc_id_from_path(name);
                const auto tmp = cfg.index_dir / (".upload-" + doc_id);
                {
                    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
                    out << file.content;
                    if (!out) throw Error(ErrorKind::IoFailure, "cannot stage upload");
                }
                struct Cleanup {
                    std::filesystem::path p;
                    ~Cleanup() {
                        std::error_code ec;
                        std::filesystem::remove(p, ec);
                    }
                } cleanup{tmp};
                send_json(res, 200, ingest_locked(tmp.string(), doc_id).to_json());
            } else {
                const auto body = parse_body(req);
                const auto path = field<std::string>(body, "path", "");
                if (path.empty()) throw Error(ErrorKind::BadRequest, "body needs \"path\" or a multipart file");
                send_json(res, 200, ingest_locked(path, {}).to_json());
            }
        }));

        if (!cfg.static_dir.empty()) {
            if (!http.set_mount_point("/", cfg.static_dir.string())) {
                throw Error(ErrorKind::InvalidConfig, "static_dir does not exist: " + cfg.static_dir.string());
            }
        }
    }

    pipeline::IngestReport ingest_locked(const std::string& path, const std::string& doc_id) {
        store::WriterLock lock(cfg.index_dir);
        const auto prev = snapshot();
        store::VectorStore next = prev ? prev->store : store::VectorStore(cfg.engine.embedder.dim);
        auto report = pipeline::ingest_path(path, next, cfg, doc_id);
        next.save(cfg.index_dir);
        std::optional<rerank::RerankModel> model;
        if (prev) {
            model = prev->model;
        } else if (std::filesystem::exists(cfg.index_dir / rag::kRerankerFile)) {
            model = rerank::RerankModel::load(cfg.index_dir / rag::kRerankerFile);
        }
        auto fresh = std::make_shared<const rag::Index>(std::move(next), std::move(model));
        std::lock_guard swap(snapshot_mutex);
        current = std::move(fresh);
        return report;
    }
};

Server::Server(AppConfig cfg, std::string auth_token)
    : impl_(std::make_unique<Impl>(std::move(cfg), std::move(auth_token))) {}

Server::~Server() { stop(); }

int Server::bind() {
    const auto [host, port] = split_bind_addr(impl_->cfg.bind_addr);
    if (port == 0) {
        const int bound = impl_->http.bind_to_any_port(host);
        if (bound < 0) throw Error(ErrorKind::BindFailure, "cannot bind " + host);
        return bound;
    }
    if (!impl_->http.bind_to_port(host, port)) throw Error(ErrorKind::BindFailure, "cannot bind " + impl_->cfg.bind_addr);
    return port;
}

void Server::run() { impl_->http.listen_after_bind(); }

void Server::stop() {
    if (impl_) impl_->http.stop();
}

void Server::wait_until_ready() const { impl_->http.wait_until_ready(); }

void serve(const AppConfig& cfg, const std::string& auth_token) {
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    Server server(cfg, auth_token);
    const int port = server.bind();
    std::cerr << "lexrag listening on " << split_bind_addr(cfg.bind_addr).first << ":" << port
              << (auth_token.empty() ? " (auth disabled)" : "") << "\n";

    std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        server.stop();
    });
    server.run();
    // Server stopped on its own: wake the waiter.
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
}

}  // namespace lexrag::server
