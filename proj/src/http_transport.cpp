#include <chrono>
#include <regex>

#include <httplib.h>

#include "masorch/gateway.hpp"

namespace masorch::gateway {

WireReply HttpTransport::post(const WireRequest& request) {
    static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
    WireReply reply;
    std::smatch m;
    if (!std::regex_match(request.url, m, kUrl)) {
        reply.transport_error = "unsupported URL '" + request.url + "'";
        return reply;
    }
    const std::string origin = m.str(1);
    const std::string path = m[2].matched ? m.str(2) : "/";

    const auto start = std::chrono::steady_clock::now();
    httplib::Client client(origin);
    const auto timeout = std::chrono::milliseconds(request.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    httplib::Headers headers;
    if (!request.api_key.empty()) headers.emplace("Authorization", "Bearer " + request.api_key);

    auto res = client.Post(path, headers, request.body, "application/json");
    reply.elapsed_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    if (!res) {
        reply.transport_error = httplib::to_string(res.error());
        return reply;
    }
    reply.status = res->status;
    reply.body = res->body;
    return reply;
}

}  // namespace masorch::gateway
