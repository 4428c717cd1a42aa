#include "lexrag/http_client.hpp"

#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "lexrag/error.hpp"

namespace lexrag::http {

Endpoint parse_base_url(const std::string& base_url) {
    const auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error(ErrorKind::InvalidConfig, "base URL must include a scheme: " + base_url);
    }
    const auto path_start = base_url.find('/', scheme_end + 3);
    Endpoint ep;
    if (path_start == std::string::npos) {
        ep.scheme_host_port = base_url;
    } else {
        ep.scheme_host_port = base_url.substr(0, path_start);
        ep.path_prefix = base_url.substr(path_start);
        while (!ep.path_prefix.empty() && ep.path_prefix.back() == '/') ep.path_prefix.pop_back();
    }
    return ep;
}

std::string env_or_empty(const char* name) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string();
}

nlohmann::json post_json(const std::string& base_url, const std::string& path, const nlohmann::json& body,
                         std::chrono::milliseconds timeout, const RetryPolicy& retry,
                         const std::string& bearer_token) {
    const auto ep = parse_base_url(base_url);
    httplib::Client client(ep.scheme_host_port);
    const auto secs = static_cast<time_t>(timeout.count() / 1000);
    const auto usecs = static_cast<time_t>((timeout.count() % 1000) * 1000);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    httplib::Headers headers;
    if (!bearer_token.empty()) headers.emplace("Authorization", "Bearer " + bearer_token);

    const std::string payload = body.dump();
    const std::string target = ep.path_prefix + path;
    std::string last_failure = "no attempts made";
    bool last_timed_out = false;
    auto backoff = retry.initial_backoff;
    const int attempts = std::max(1, retry.attempts);

    for (int attempt = 1; attempt <= attempts; ++attempt) {
        const auto started = std::chrono::steady_clock::now();
        auto res = client.Post(target, headers, payload, "application/json");
        const auto elapsed = std::chrono::steady_clock::now() - started;
        if (res && res->status == 200) {
            try {
                return nlohmann::json::parse(res->body);
            } catch (const nlohmann::json::exception& e) {
                throw Error(ErrorKind::RemoteProtocol, base_url + target + ": response is not JSON: " + e.what());
            }
        }
        if (res) {
            last_timed_out = false;
            last_failure = "HTTP " + std::to_string(res->status);
        } else {
            const auto err = res.error();
            last_timed_out = err == httplib::Error::ConnectionTimeout ||
                             (err == httplib::Error::Read && elapsed >= timeout);
            last_failure = httplib::to_string(err);
        }
        if (attempt < attempts) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
    const std::string msg = base_url + target + " failed after " + std::to_string(attempts) +
                            " attempts: " + last_failure;
    throw Error(last_timed_out ? ErrorKind::Timeout : ErrorKind::RemoteUnavailable, msg);
}

}  // namespace lexrag::http
