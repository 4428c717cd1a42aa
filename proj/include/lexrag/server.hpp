#pragma once

#include <memory>
#include <string>

#include "json.hpp"
#include "lexrag/config.hpp"
#include "lexrag/error.hpp"

namespace lexrag::server {

/// HTTP status for an error kind.
int status_for(ErrorKind kind);

/// {"error": {"kind": ..., "message": ...}} plus "detail" when present.
nlohmann::json error_body(const Error& e);

/// REST front end over one index directory. Queries read an immutable
/// snapshot; an ingest builds the next snapshot and swaps it in.
class Server {
public:
    /// Loads the index in cfg.index_dir if one exists (CorruptStore
    /// propagates). An empty auth_token disables authentication.
    Server(AppConfig cfg, std::string auth_token);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds to cfg.bind_addr ("host:port", port 0 picks a free one) and
    /// returns the bound port. Throws Error{BindFailure}.
    int bind();

    /// Serves until stop() is called.
    void run();
    void stop();
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// bind + run, stopping cleanly on SIGINT or SIGTERM.
void serve(const AppConfig& cfg, const std::string& auth_token);

}  // namespace lexrag::server
