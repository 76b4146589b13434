#pragma once

// Uniform access to OpenAI-compatible chat-completion endpoints, live or mock.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "masorch/dataset.hpp"

namespace masorch::gateway {

/// Infrastructure settings of one endpoint. Defaults match the benchmark run
/// settings (1024 max tokens, temperature 0.1). A base_url with the scheme
/// "mock://" selects the in-process scripted backend.
struct EndpointConfig {
    std::string name = "default";
    std::string base_url;
    std::string model_id;
    std::string api_key_env;  // name of the environment variable holding the key
    int max_tokens = 1024;
    double temperature = 0.1;
    int timeout_ms = 60000;
    int max_retries = 2;
    int backoff_ms = 500;
    int max_concurrency = 8;
    bool inline_media = false;   // send local images as base64 data URLs
    std::string mock_script;     // path to a MockScript file (mock:// only)

    [[nodiscard]] bool is_mock() const { return base_url.rfind("mock://", 0) == 0; }
    void validate() const;
};

nlohmann::ordered_json to_json(const EndpointConfig& cfg);
EndpointConfig endpoint_from_json(const nlohmann::json& j);
EndpointConfig mock_endpoint(std::string name = "mock", std::string script_path = {});

enum class Role { system, user, assistant };

struct TextPart {
    std::string text;
};

struct ImagePart {
    dataset::MediaRef media;
};

struct FramesPart {
    dataset::MediaRef media;
    std::vector<int> frames;
};

using Part = std::variant<TextPart, ImagePart, FramesPart>;

struct ChatMessage {
    Role role = Role::user;
    std::vector<Part> parts;

    static ChatMessage system(std::string text) { return {Role::system, {TextPart{std::move(text)}}}; }
    static ChatMessage user(std::string text) { return {Role::user, {TextPart{std::move(text)}}}; }
};

/// Image parts for each image, one frames part per video (frames chosen by the
/// uniform sampler within `budget`).
std::vector<Part> media_parts(const std::vector<dataset::MediaRef>& media, dataset::FrameBudget budget = {});

enum class FinishReason { stop, length, error };

struct ChatResponse {
    std::string text;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    std::int64_t latency_ms = 0;
    FinishReason finish_reason = FinishReason::stop;
};

std::string_view to_string(FinishReason r);
std::string_view to_string(Role r);

/// ceil(code points / 4); used when a backend reports no usage.
std::int64_t estimate_tokens(std::string_view text);

/// The chat-completions request body: model, messages, max_tokens, temperature.
nlohmann::ordered_json build_request_body(const EndpointConfig& endpoint, const std::vector<ChatMessage>& messages);

/// Stable digest of the message list, used in transcripts and the mock backend.
std::string messages_digest(const std::vector<ChatMessage>& messages);

struct LedgerEntry {
    std::string endpoint;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    std::int64_t latency_ms = 0;
    bool ok = true;
    std::string error;
};

/// Append-only record of every attempt made through a gateway. Safe to share
/// across threads.
class UsageLedger {
public:
    void append(LedgerEntry entry);
    [[nodiscard]] std::vector<LedgerEntry> entries() const;
    [[nodiscard]] std::size_t size() const;
    [[nodiscard]] std::int64_t total_prompt_tokens() const;
    [[nodiscard]] std::int64_t total_completion_tokens() const;

private:
    mutable std::mutex mu_;
    std::vector<LedgerEntry> entries_;
};

struct WireRequest {
    std::string url;  // full URL of the chat-completions route
    std::string api_key;
    std::string body;
    int timeout_ms = 60000;
};

struct WireReply {
    int status = 0;
    std::string body;
    std::int64_t elapsed_ms = 0;
    std::string transport_error;  // non-empty when no HTTP response was received
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual WireReply post(const WireRequest& request) = 0;
};

/// HTTP(S) transport backed by cpp-httplib.
class HttpTransport : public Transport {
public:
    WireReply post(const WireRequest& request) override;
};

struct Diagnostic {
    bool reachable = false;
    std::int64_t round_trip_ms = 0;
    std::string detail;
};

nlohmann::ordered_json to_json(const Diagnostic& d);

/// Sends chat completions with bounded per-endpoint concurrency, retry on
/// transport faults, and per-attempt usage capture.
class Gateway {
public:
    Gateway();

    /// Overrides the transport used for one endpoint name (tests, stubs).
    void set_transport(const std::string& endpoint_name, std::shared_ptr<Transport> transport);

    /// Returns the transport serving `endpoint`, creating it on first use.
    std::shared_ptr<Transport> transport_for(const EndpointConfig& endpoint);

    /// Retries transport-level failures (no response, 429, 5xx) up to
    /// max_retries times. Throws ApiError when exhausted or on auth/4xx,
    /// ProtocolError on a malformed payload, InvalidInput on empty messages.
    ChatResponse complete(const EndpointConfig& endpoint, const std::vector<ChatMessage>& messages,
                          UsageLedger* ledger = nullptr);

    /// One-token "ping" completion. Never throws.
    Diagnostic check_connectivity(const EndpointConfig& endpoint);

    using Sleeper = std::function<void(int ms)>;
    void set_sleeper(Sleeper sleeper) { sleeper_ = std::move(sleeper); }

private:
    class Limiter;
    std::shared_ptr<Limiter> limiter_for(const EndpointConfig& endpoint);

    std::mutex mu_;
    std::map<std::string, std::shared_ptr<Transport>> transports_;
    std::map<std::string, std::shared_ptr<Limiter>> limiters_;
    Sleeper sleeper_;
};

}  // namespace masorch::gateway
