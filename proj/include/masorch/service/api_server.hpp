#pragma once

// HTTP+JSON service under /v1 consumed by the web console.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "masorch/evaluation.hpp"
#include "masorch/gateway.hpp"

namespace masorch::service {

inline constexpr int kDefaultPort = 8080;
inline constexpr std::size_t kMaxUploadBytes = 25u * 1024u * 1024u;
inline constexpr std::size_t kResultsPageSize = 100;

struct ServerOptions {
    std::string host = "127.0.0.1";
    int port = kDefaultPort;  // 0 picks a free port
    int max_running_jobs = 1;
    gateway::EndpointConfig base = gateway::mock_endpoint();
    std::optional<gateway::EndpointConfig> judge;
    std::filesystem::path workspace;  // quicktest uploads; defaults to a temp dir
    std::filesystem::path data_dir;   // relative job paths resolve here
    std::string cors_origin = "*";
};

class ApiServer {
public:
    ApiServer(gateway::Gateway& gateway, ServerOptions options);
    ~ApiServer();

    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    /// False when the address cannot be bound (e.g. port in use).
    bool bind();
    [[nodiscard]] int port() const;
    /// Serves until stop(). Requires a successful bind().
    void serve();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace masorch::service
