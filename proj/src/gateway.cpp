#include "masorch/gateway.hpp"

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <thread>

#include <fmt/format.h>

#include "masorch/digest.hpp"
#include "masorch/error.hpp"
#include "masorch/mock_backend.hpp"
#include "masorch/text.hpp"

namespace masorch::gateway {

using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Endpoint config

void EndpointConfig::validate() const {
    if (name.empty()) throw InvalidInput("endpoint name must not be empty");
    if (base_url.empty()) throw InvalidInput("endpoint base_url must not be empty");
    if (max_tokens < 1) throw InvalidInput("max_tokens must be positive");
    if (!std::isfinite(temperature) || temperature < 0.0) throw InvalidInput("temperature must be finite and >= 0");
    if (timeout_ms < 1) throw InvalidInput("timeout_ms must be positive");
    if (max_retries < 0) throw InvalidInput("max_retries must be >= 0");
    if (backoff_ms < 1) throw InvalidInput("backoff_ms must be positive");
    if (max_concurrency < 1) throw InvalidInput("max_concurrency must be positive");
}

ordered_json to_json(const EndpointConfig& c) {
    ordered_json j;
    j["name"] = c.name;
    j["base_url"] = c.base_url;
    j["model_id"] = c.model_id;
    j["api_key_env"] = c.api_key_env;
    j["max_tokens"] = c.max_tokens;
    j["temperature"] = c.temperature;
    j["timeout_ms"] = c.timeout_ms;
    j["max_retries"] = c.max_retries;
    j["backoff_ms"] = c.backoff_ms;
    j["max_concurrency"] = c.max_concurrency;
    j["inline_media"] = c.inline_media;
    j["mock_script"] = c.mock_script;
    return j;
}

EndpointConfig endpoint_from_json(const json& j) {
    if (!j.is_object()) throw InvalidInput("endpoint config must be a JSON object");
    EndpointConfig c;
    try {
        c.name = j.value("name", c.name);
        c.base_url = j.value("base_url", c.base_url);
        c.model_id = j.value("model_id", c.model_id);
        c.api_key_env = j.value("api_key_env", c.api_key_env);
        c.max_tokens = j.value("max_tokens", c.max_tokens);
        c.temperature = j.value("temperature", c.temperature);
        c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
        c.max_retries = j.value("max_retries", c.max_retries);
        c.backoff_ms = j.value("backoff_ms", c.backoff_ms);
        c.max_concurrency = j.value("max_concurrency", c.max_concurrency);
        c.inline_media = j.value("inline_media", c.inline_media);
        c.mock_script = j.value("mock_script", c.mock_script);
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("endpoint config: ") + e.what());
    }
    c.validate();
    return c;
}

EndpointConfig mock_endpoint(std::string name, std::string script_path) {
    EndpointConfig c;
    c.name = std::move(name);
    c.base_url = "mock://" + c.name;
    c.model_id = "mock-vlm";
    c.backoff_ms = 1;
    c.mock_script = std::move(script_path);
    return c;
}

// ---------------------------------------------------------------------------
// Messages

std::vector<Part> media_parts(const std::vector<dataset::MediaRef>& media, dataset::FrameBudget budget) {
    std::vector<Part> parts;
    for (const auto& m : media) {
        if (m.kind == dataset::MediaKind::image) {
            parts.emplace_back(ImagePart{m});
        } else if (m.kind == dataset::MediaKind::video && m.frame_count) {
            parts.emplace_back(FramesPart{m, dataset::sample_frames(*m.frame_count, budget)});
        }
    }
    return parts;
}

std::string_view to_string(FinishReason r) {
    switch (r) {
        case FinishReason::stop: return "stop";
        case FinishReason::length: return "length";
        case FinishReason::error: return "error";
    }
    return "stop";
}

std::string_view to_string(Role r) {
    switch (r) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "user";
}

std::int64_t estimate_tokens(std::string_view text) {
    return static_cast<std::int64_t>((text::utf8_length(text) + 3) / 4);
}

namespace {

std::string image_url(const dataset::MediaRef& media, bool inline_media) {
    if (!inline_media || media.uri.find("://") != std::string::npos) return media.uri;
    std::ifstream in(media.uri, std::ios::binary);
    if (!in) return media.uri;
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::string ext = std::filesystem::path(media.uri).extension().string();
    if (!ext.empty()) ext.erase(0, 1);
    if (ext == "jpg") ext = "jpeg";
    return "data:image/" + (ext.empty() ? std::string("png") : ext) + ";base64," + base64_encode(bytes);
}

ordered_json image_part(const std::string& url) {
    ordered_json p;
    p["type"] = "image_url";
    p["image_url"] = ordered_json{{"url", url}};
    return p;
}

ordered_json content_of(const ChatMessage& m, bool inline_media) {
    if (m.parts.size() == 1 && std::holds_alternative<TextPart>(m.parts.front()))
        return std::get<TextPart>(m.parts.front()).text;
    ordered_json arr = ordered_json::array();
    for (const auto& part : m.parts) {
        if (const auto* t = std::get_if<TextPart>(&part)) {
            ordered_json p;
            p["type"] = "text";
            p["text"] = t->text;
            arr.push_back(std::move(p));
        } else if (const auto* img = std::get_if<ImagePart>(&part)) {
            arr.push_back(image_part(image_url(img->media, inline_media)));
        } else if (const auto* fr = std::get_if<FramesPart>(&part)) {
            // Frames travel as references; the engine never decodes video.
            for (int idx : fr->frames) arr.push_back(image_part(fmt::format("{}#frame={}", fr->media.uri, idx)));
        }
    }
    return arr;
}

std::string all_text(const std::vector<ChatMessage>& messages) {
    std::string out;
    for (const auto& m : messages) {
        for (const auto& p : m.parts) {
            if (const auto* t = std::get_if<TextPart>(&p)) {
                if (!out.empty()) out.push_back('\n');
                out += t->text;
            }
        }
    }
    return out;
}

ordered_json messages_json(const std::vector<ChatMessage>& messages, bool inline_media) {
    ordered_json arr = ordered_json::array();
    for (const auto& m : messages) {
        ordered_json mj;
        mj["role"] = std::string(to_string(m.role));
        mj["content"] = content_of(m, inline_media);
        arr.push_back(std::move(mj));
    }
    return arr;
}

std::string chat_url(const std::string& base) {
    std::string b = base;
    while (!b.empty() && b.back() == '/') b.pop_back();
    return b + "/chat/completions";
}

}  // namespace

ordered_json build_request_body(const EndpointConfig& endpoint, const std::vector<ChatMessage>& messages) {
    ordered_json body;
    body["model"] = endpoint.model_id;
    body["messages"] = messages_json(messages, endpoint.inline_media);
    body["max_tokens"] = endpoint.max_tokens;
    body["temperature"] = endpoint.temperature;
    return body;
}

std::string messages_digest(const std::vector<ChatMessage>& messages) {
    return short_digest(messages_json(messages, false).dump(-1, ' ', false, json::error_handler_t::replace));
}

// ---------------------------------------------------------------------------
// Ledger

void UsageLedger::append(LedgerEntry entry) {
    std::lock_guard lock(mu_);
    entries_.push_back(std::move(entry));
}

std::vector<LedgerEntry> UsageLedger::entries() const {
    std::lock_guard lock(mu_);
    return entries_;
}

std::size_t UsageLedger::size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
}

std::int64_t UsageLedger::total_prompt_tokens() const {
    std::lock_guard lock(mu_);
    std::int64_t t = 0;
    for (const auto& e : entries_) t += e.prompt_tokens;
    return t;
}

std::int64_t UsageLedger::total_completion_tokens() const {
    std::lock_guard lock(mu_);
    std::int64_t t = 0;
    for (const auto& e : entries_) t += e.completion_tokens;
    return t;
}

ordered_json to_json(const Diagnostic& d) {
    ordered_json j;
    j["reachable"] = d.reachable;
    j["round_trip_ms"] = d.round_trip_ms;
    j["detail"] = d.detail;
    return j;
}

// ---------------------------------------------------------------------------
// Gateway

class Gateway::Limiter {
public:
    explicit Limiter(int capacity) : available_(capacity) {}

    void acquire() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [this] { return available_ > 0; });
        --available_;
    }

    void release() {
        {
            std::lock_guard lock(mu_);
            ++available_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    int available_;
};

namespace {

class SlotGuard {
public:
    template <typename L>
    explicit SlotGuard(L& limiter) : release_([&limiter] { limiter.release(); }) {
        limiter.acquire();
    }
    ~SlotGuard() { release_(); }
    SlotGuard(const SlotGuard&) = delete;
    SlotGuard& operator=(const SlotGuard&) = delete;

private:
    std::function<void()> release_;
};

bool transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

Gateway::Gateway()
    : sleeper_([](int ms) { std::this_thread::sleep_for(std::chrono::milliseconds(ms)); }) {}

void Gateway::set_transport(const std::string& endpoint_name, std::shared_ptr<Transport> transport) {
    std::lock_guard lock(mu_);
    transports_[endpoint_name] = std::move(transport);
}

std::shared_ptr<Transport> Gateway::transport_for(const EndpointConfig& endpoint) {
    std::lock_guard lock(mu_);
    if (auto it = transports_.find(endpoint.name); it != transports_.end()) return it->second;
    std::shared_ptr<Transport> t;
    if (endpoint.is_mock()) {
        t = std::make_shared<MockTransport>(endpoint.mock_script.empty() ? MockScript::builtin()
                                                                         : MockScript::load(endpoint.mock_script));
    } else {
        t = std::make_shared<HttpTransport>();
    }
    transports_[endpoint.name] = t;
    return t;
}

std::shared_ptr<Gateway::Limiter> Gateway::limiter_for(const EndpointConfig& endpoint) {
    std::lock_guard lock(mu_);
    auto& slot = limiters_[endpoint.name];
    if (!slot) slot = std::make_shared<Limiter>(endpoint.max_concurrency);
    return slot;
}

ChatResponse Gateway::complete(const EndpointConfig& endpoint, const std::vector<ChatMessage>& messages,
                               UsageLedger* ledger) {
    if (messages.empty()) throw InvalidInput("complete: messages must not be empty");
    for (const auto& m : messages) {
        if (m.parts.empty()) throw InvalidInput("complete: every message needs at least one part");
        for (const auto& p : m.parts) {
            if (const auto* fr = std::get_if<FramesPart>(&p); fr && fr->media.kind != dataset::MediaKind::video)
                throw InvalidInput("complete: frame references require a video");
        }
    }

    auto transport = transport_for(endpoint);
    auto limiter = limiter_for(endpoint);
    SlotGuard slot(*limiter);

    WireRequest request;
    request.url = chat_url(endpoint.base_url);
    request.body = build_request_body(endpoint, messages).dump(-1, ' ', false, json::error_handler_t::replace);
    request.timeout_ms = endpoint.timeout_ms;
    if (!endpoint.api_key_env.empty()) {
        if (const char* key = std::getenv(endpoint.api_key_env.c_str())) request.api_key = key;
    }

    auto record_failure = [&](std::int64_t elapsed, const std::string& what) {
        if (ledger) ledger->append({endpoint.name, 0, 0, elapsed, false, what});
    };

    std::string last_error;
    for (int attempt = 0; attempt <= endpoint.max_retries; ++attempt) {
        if (attempt > 0) sleeper_(endpoint.backoff_ms << std::min(attempt - 1, 10));
        const WireReply reply = transport->post(request);

        if (!reply.transport_error.empty()) {
            last_error = "transport error: " + reply.transport_error;
            record_failure(reply.elapsed_ms, last_error);
            continue;
        }
        if (reply.status == 401 || reply.status == 403) {
            const std::string what = fmt::format("authentication failed (HTTP {})", reply.status);
            record_failure(reply.elapsed_ms, what);
            throw ApiError(what);
        }
        if (transient_status(reply.status)) {
            last_error = fmt::format("HTTP {}", reply.status);
            record_failure(reply.elapsed_ms, last_error);
            continue;
        }
        if (reply.status < 200 || reply.status >= 300) {
            const std::string what = fmt::format("HTTP {}: {}", reply.status, reply.body.substr(0, 200));
            record_failure(reply.elapsed_ms, what);
            throw ApiError(what);
        }

        ChatResponse out;
        try {
            const json doc = json::parse(reply.body);
            const json& choice = doc.at("choices").at(0);
            const json& content = choice.at("message").at("content");
            if (!content.is_string()) throw ProtocolError("choices[0].message.content is not a string");
            out.text = content.get<std::string>();
            const std::string finish = choice.value("finish_reason", std::string("stop"));
            out.finish_reason = finish == "length" ? FinishReason::length : FinishReason::stop;
            const auto usage = doc.find("usage");
            if (usage != doc.end() && usage->is_object() && usage->contains("prompt_tokens") &&
                usage->contains("completion_tokens")) {
                out.prompt_tokens = usage->at("prompt_tokens").get<std::int64_t>();
                out.completion_tokens = usage->at("completion_tokens").get<std::int64_t>();
            } else {
                out.prompt_tokens = estimate_tokens(all_text(messages));
                out.completion_tokens = estimate_tokens(out.text);
            }
        } catch (const ProtocolError& e) {
            record_failure(reply.elapsed_ms, e.what());
            throw;
        } catch (const json::exception& e) {
            const std::string what = std::string("malformed chat-completions payload: ") + e.what();
            record_failure(reply.elapsed_ms, what);
            throw ProtocolError(what);
        }
        out.latency_ms = reply.elapsed_ms;
        if (ledger) ledger->append({endpoint.name, out.prompt_tokens, out.completion_tokens, out.latency_ms, true, {}});
        return out;
    }
    throw ApiError(fmt::format("{} failed after {} attempts: {}", endpoint.name, endpoint.max_retries + 1, last_error));
}

Diagnostic Gateway::check_connectivity(const EndpointConfig& endpoint) {
    Diagnostic d;
    const auto start = std::chrono::steady_clock::now();
    try {
        EndpointConfig probe = endpoint;
        probe.max_tokens = 1;
        probe.max_retries = 0;
        const auto reply = complete(probe, {ChatMessage::user("ping")});
        d.reachable = true;
        d.detail = fmt::format("ok: model replied with {} completion token(s)", reply.completion_tokens);
    } catch (const std::exception& e) {
        d.reachable = false;
        d.detail = e.what();
    }
    d.round_trip_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    return d;
}

}  // namespace masorch::gateway
