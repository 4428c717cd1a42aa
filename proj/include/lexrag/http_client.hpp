#pragma once

#include <chrono>
#include <string>

#include "json.hpp"

namespace lexrag::http {

/// Attempts are spaced by `initial_backoff`, doubling each time.
struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
};

struct Endpoint {
    std::string scheme_host_port;  // "http://host:port"
    std::string path_prefix;       // "" or "/prefix"
};

/// Splits "http://host:port/prefix" into its origin and path prefix.
Endpoint parse_base_url(const std::string& base_url);

/// POSTs JSON and returns the parsed 200 response body.
/// Throws Error{RemoteUnavailable} when every attempt fails to connect or
/// returns a non-200 status, Error{Timeout} when the last attempt timed out,
/// and Error{RemoteProtocol} when a 200 body is not JSON.
nlohmann::json post_json(const std::string& base_url, const std::string& path, const nlohmann::json& body,
                         std::chrono::milliseconds timeout, const RetryPolicy& retry,
                         const std::string& bearer_token = {});

/// Value of an environment variable, or "" when unset.
std::string env_or_empty(const char* name);

}  // namespace lexrag::http
