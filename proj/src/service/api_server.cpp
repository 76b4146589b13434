#include "masorch/service/api_server.hpp"

#include <sys/socket.h>

#include <fstream>
#include <mutex>

#include <fmt/format.h>
#include <httplib.h>

#include "masorch/assets.hpp"
#include "masorch/campaign.hpp"
#include "masorch/digest.hpp"
#include "masorch/engine.hpp"
#include "masorch/error.hpp"
#include "masorch/service/canvas.hpp"
#include "masorch/service/jobs.hpp"
#include "masorch/service/method_registry.hpp"

namespace masorch::service {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void send_json(httplib::Response& res, int status, const ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(-1, ' ', false, json::error_handler_t::replace), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view message) {
    send_json(res, status, ordered_json{{"error", message}});
}

json parse_body(const std::string& body) {
    try {
        return json::parse(body);
    } catch (const json::parse_error& e) {
        throw InvalidInput(std::string("malformed JSON body: ") + e.what());
    }
}

std::vector<dataset::Option> parse_options(const json& j) {
    std::vector<dataset::Option> out;
    if (j.is_null()) return out;
    if (j.is_string()) return dataset::parse_inline_options(j.get<std::string>());
    if (!j.is_array()) throw InvalidInput("options must be a list or an inline string");
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto& o = j[i];
        dataset::Option opt;
        if (o.is_string()) {
            opt.label = static_cast<char>('A' + i);
            opt.text = o.get<std::string>();
        } else if (o.is_object()) {
            const auto label = o.at("label").get<std::string>();
            if (label.size() != 1) throw InvalidInput("option labels are single letters");
            opt.label = label[0];
            opt.text = o.at("text").get<std::string>();
        } else {
            throw InvalidInput("option entries must be strings or {label, text}");
        }
        out.push_back(std::move(opt));
    }
    return out;
}

ordered_json record_row(const run::CheckpointRecord& r) {
    ordered_json j;
    j["sample_id"] = r.sample_id;
    j["method"] = r.topology.label();
    j["config_hash"] = r.config_hash;
    j["protocol"] = std::string(eval::to_string(r.protocol));
    j["status"] = r.verdict ? std::string(eval::to_string(r.verdict->status)) : std::string();
    j["extracted_label"] = r.verdict && r.verdict->extracted_label
                               ? ordered_json(std::string(1, *r.verdict->extracted_label))
                               : ordered_json(nullptr);
    j["answer"] = r.result.answer;
    j["termination_reason"] = std::string(topology::to_string(r.result.termination));
    j["calls"] = r.result.usage.calls;
    j["prompt_tokens"] = r.result.usage.prompt_tokens;
    j["completion_tokens"] = r.result.usage.completion_tokens;
    j["latency_ms"] = r.result.usage.wall_ms;
    return j;
}

}  // namespace

struct ApiServer::Impl {
    Impl(gateway::Gateway& gw, ServerOptions opts) : gateway(gw), options(std::move(opts)), jobs(gw, options.max_running_jobs) {
        if (options.workspace.empty()) options.workspace = std::filesystem::temp_directory_path() / "masorch-uploads";
        if (options.data_dir.empty()) options.data_dir = std::filesystem::current_path();
        routes();
    }

    gateway::Gateway& gateway;
    ServerOptions options;
    JobManager jobs;
    httplib::Server http;
    std::mutex endpoints_mu;
    int bound_port = -1;

    ordered_json endpoints_json() {
        std::lock_guard lock(endpoints_mu);
        return ordered_json{{"base", gateway::to_json(options.base)},
                            {"judge", options.judge ? gateway::to_json(*options.judge) : ordered_json(nullptr)}};
    }

    template <typename Fn>
    httplib::Server::Handler guarded(Fn fn) {
        return [fn](const httplib::Request& req, httplib::Response& res) {
            try {
                fn(req, res);
            } catch (const InvalidInput& e) {
                send_error(res, 400, e.what());
            } catch (const ParseError& e) {
                send_error(res, 400, e.what());
            } catch (const SchemaViolation& e) {
                send_error(res, 400, e.what());
            } catch (const IOFailure& e) {
                send_error(res, 400, e.what());
            } catch (const json::exception& e) {
                send_error(res, 400, e.what());
            } catch (const std::exception& e) {
                send_error(res, 500, e.what());
            }
        };
    }

    void routes() {
        http.set_socket_options([](socket_t sock) {
            int yes = 1;
            setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
        });
        http.set_payload_max_length(kMaxUploadBytes + 1024 * 1024);
        const std::string origin = options.cors_origin;
        http.set_default_headers({{"Access-Control-Allow-Origin", origin},
                                  {"Access-Control-Allow-Methods", "GET, POST, PUT, DELETE, OPTIONS"},
                                  {"Access-Control-Allow-Headers", "Content-Type, Idempotency-Key"}});
        http.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

        http.Get("/v1/methods", guarded([](const httplib::Request&, httplib::Response& res) {
            ordered_json arr = ordered_json::array();
            for (const auto& d : method_registry()) arr.push_back(to_json(d));
            send_json(res, 200, arr);
        }));

        http.Get("/v1/guide", guarded([this](const httplib::Request&, httplib::Response& res) { guide(res); }));

        http.Get("/v1/endpoints",
                 guarded([this](const httplib::Request&, httplib::Response& res) { send_json(res, 200, endpoints_json()); }));

        http.Put("/v1/endpoints", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto body = parse_body(req.body);
            if (!body.is_object()) throw InvalidInput("body must be an object");
            std::optional<gateway::EndpointConfig> base;
            std::optional<std::optional<gateway::EndpointConfig>> judge;
            if (auto it = body.find("base"); it != body.end()) {
                base = gateway::endpoint_from_json(*it);
                base->validate();
            }
            if (auto it = body.find("judge"); it != body.end()) {
                if (it->is_null()) {
                    judge.emplace(std::nullopt);
                } else {
                    auto ep = gateway::endpoint_from_json(*it);
                    ep.validate();
                    judge.emplace(std::move(ep));
                }
            }
            {
                std::lock_guard lock(endpoints_mu);
                if (base) options.base = *base;
                if (judge) options.judge = *judge;
            }
            send_json(res, 200, endpoints_json());
        }));

        http.Post("/v1/endpoints/test", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto ep = gateway::endpoint_from_json(parse_body(req.body));
            ep.validate();
            send_json(res, 200, gateway::to_json(gateway.check_connectivity(ep)));
        }));

        http.Post("/v1/quicktest",
                  guarded([this](const httplib::Request& req, httplib::Response& res) { quicktest(req, res); }));

        http.Post("/v1/topologies/compile", guarded([](const httplib::Request& req, httplib::Response& res) {
            const auto graph = canvas_from_json(parse_body(req.body));
            const auto compiled = compile_canvas(graph);
            if (!compiled.ok()) {
                ordered_json errs = ordered_json::array();
                for (const auto& e : compiled.errors)
                    errs.push_back({{"node_id", e.node_id.empty() ? ordered_json(nullptr) : ordered_json(e.node_id)},
                                    {"message", e.message}});
                send_json(res, 422, ordered_json{{"errors", errs}});
                return;
            }
            send_json(res, 200, topology::to_json(*compiled.config));
        }));

        http.Post("/v1/jobs", guarded([this](const httplib::Request& req, httplib::Response& res) { submit(req, res); }));

        http.Get(R"(/v1/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto st = jobs.state(req.matches[1]);
            if (!st) return send_error(res, 404, "unknown job");
            send_json(res, 200, to_json(*st));
        }));

        http.Get(R"(/v1/jobs/([^/]+)/results)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            results(req, res);
        }));

        http.Delete(R"(/v1/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            if (!jobs.cancel(req.matches[1])) return send_error(res, 404, "unknown job");
            send_json(res, 200, to_json(*jobs.state(req.matches[1])));
        }));
    }

    void guide(httplib::Response& res) {
        ordered_json bundle = ordered_json::parse(assets::guide_bundle);
        bundle["methods"] = ordered_json::array();
        for (const auto& d : method_registry()) bundle["methods"].push_back(to_json(d));
        bundle["protocols"] = ordered_json::array();
        for (auto p : {eval::Protocol::VLM_SJ, eval::Protocol::VLM_EC, eval::Protocol::RULE_MR, eval::Protocol::RULE_FL,
                       eval::Protocol::RULE_EM})
            bundle["protocols"].push_back(
                {{"id", std::string(eval::to_string(p))}, {"judge_backed", eval::is_judge_backed(p)}});
        send_json(res, 200, bundle);
    }

    std::filesystem::path store_upload(const httplib::MultipartFormData& file) {
        if (file.content.size() > kMaxUploadBytes) throw InvalidInput("upload exceeds the 25 MB cap");
        std::filesystem::create_directories(options.workspace);
        std::string ext = std::filesystem::path(file.filename).extension().string();
        if (ext.empty() || ext.size() > 8) ext = ".bin";
        const auto path = options.workspace / (short_digest(file.content, 24) + ext);
        if (!std::filesystem::exists(path)) {
            const auto tmp = path.string() + ".part";
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            out.write(file.content.data(), static_cast<std::streamsize>(file.content.size()));
            out.close();
            if (!out) throw IOFailure("cannot store upload");
            std::filesystem::rename(tmp, path);
        }
        return path;
    }

    void quicktest(const httplib::Request& req, httplib::Response& res) {
        json body;
        std::vector<dataset::MediaRef> uploads;
        if (req.is_multipart_form_data()) {
            if (!req.has_file("payload")) throw InvalidInput("multipart quicktest needs a 'payload' JSON field");
            body = parse_body(req.get_file_value("payload").content);
            for (const auto& f : req.get_file_values("image")) {
                if (f.content.empty()) continue;
                uploads.push_back({dataset::MediaKind::image, store_upload(f).string(), std::nullopt});
            }
        } else {
            body = parse_body(req.body);
        }
        if (!body.is_object()) throw InvalidInput("body must be an object");

        topology::TopologyConfig cfg;
        if (auto it = body.find("topology"); it != body.end() && !it->is_null()) {
            cfg = topology::config_from_json(*it);
        } else {
            cfg = config_from_params(body.at("method").get<std::string>(), body.value("params", json::object()));
        }

        dataset::NormalizedSample sample;
        sample.id = "quicktest";
        sample.dataset_name = "quicktest";
        sample.question_text = body.at("question").get<std::string>();
        sample.options = parse_options(body.value("options", json()));
        if (auto it = body.find("gold_label"); it != body.end() && !it->is_null()) {
            const auto g = it->get<std::string>();
            if (g.size() != 1) throw InvalidInput("gold_label must be one letter");
            sample.gold_label = g[0];
        }
        if (sample.options.empty()) sample.answer_type = dataset::AnswerType::OpenEnded;
        else if (!sample.gold_label) sample.answer_type = dataset::AnswerType::MRQ;
        if (auto it = body.find("media"); it != body.end() && it->is_array()) {
            for (const auto& m : *it) {
                dataset::MediaRef ref;
                ref.kind = dataset::media_kind_from_string(m.at("kind").get<std::string>());
                ref.uri = m.at("uri").get<std::string>();
                if (auto fc = m.find("frame_count"); fc != m.end() && !fc->is_null()) ref.frame_count = fc->get<int>();
                sample.media.push_back(std::move(ref));
            }
        }
        for (auto& u : uploads) sample.media.push_back(std::move(u));

        gateway::EndpointConfig endpoint;
        if (auto it = body.find("endpoint"); it != body.end() && !it->is_null()) {
            endpoint = gateway::endpoint_from_json(*it);
        } else {
            std::lock_guard lock(endpoints_mu);
            endpoint = options.base;
        }
        endpoint.validate();

        topology::Engine engine(gateway);
        const auto result = engine.run(cfg, sample, endpoint);

        ordered_json out;
        out["answer"] = result.answer;
        out["label"] = result.topology.label();
        out["profile"] = ordered_json{{"latency_ms", result.usage.wall_ms},
                                      {"calls", result.usage.calls},
                                      {"tokens", result.usage.total_tokens()},
                                      {"prompt_tokens", result.usage.prompt_tokens},
                                      {"completion_tokens", result.usage.completion_tokens},
                                      {"agents", result.topology.effective_agents()},
                                      {"rounds", result.topology.effective_rounds()},
                                      {"termination_reason", std::string(topology::to_string(result.termination))}};
        out["topology"] = topology::to_json(result.topology);
        if (sample.answer_type == dataset::AnswerType::MCQ) {
            const auto v = eval::evaluate_rule(eval::Protocol::RULE_MR, sample, result.answer);
            out["verdict"] = eval::to_json(v);
        }
        out["transcript"] = topology::to_json(result)["transcript"];
        send_json(res, 200, out);
    }

    void submit(const httplib::Request& req, httplib::Response& res) {
        json body = parse_body(req.body);
        if (!body.is_object()) throw InvalidInput("body must be an object");
        std::string key = req.get_header_value("Idempotency-Key");
        if (auto it = body.find("idempotency_key"); key.empty() && it != body.end() && it->is_string())
            key = it->get<std::string>();
        body.erase("idempotency_key");
        {
            std::lock_guard lock(endpoints_mu);
            if (!body.contains("endpoint") || body["endpoint"].is_null())
                body["endpoint"] = json::parse(gateway::to_json(options.base).dump());
            if ((!body.contains("judge") || body["judge"].is_null()) && options.judge)
                body["judge"] = json::parse(eval::to_json(eval::JudgeConfig{*options.judge, true, {}}).dump());
        }
        auto config = run::campaign_from_json(body, options.data_dir);
        if (!std::filesystem::exists(config.dataset_path))
            throw InvalidInput("dataset " + config.dataset_path.string() + " does not exist");
        const auto id = jobs.submit(std::move(config), key);
        send_json(res, 202, ordered_json{{"job_id", id}});
    }

    void results(const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        std::size_t page = 0;
        if (req.has_param("page")) {
            try {
                page = std::stoul(req.get_param_value("page"));
            } catch (const std::exception&) {
                throw InvalidInput("page must be a non-negative integer");
            }
        }
        const auto st = jobs.state(id);
        const auto p = jobs.results(id, page, kResultsPageSize);
        if (!st || !p) return send_error(res, 404, "unknown job");
        ordered_json out;
        out["job_id"] = id;
        out["phase"] = std::string(to_string(st->phase));
        out["summary"] = st->summary ? run::to_json(*st->summary) : ordered_json(nullptr);
        out["page"] = page;
        out["page_size"] = kResultsPageSize;
        out["total_records"] = p->total_records;
        out["records"] = ordered_json::array();
        for (const auto& r : p->records) out["records"].push_back(record_row(r));
        send_json(res, 200, out);
    }
};

ApiServer::ApiServer(gateway::Gateway& gateway, ServerOptions options)
    : impl_(std::make_unique<Impl>(gateway, std::move(options))) {}

ApiServer::~ApiServer() { stop(); }

bool ApiServer::bind() {
    if (impl_->options.port == 0) {
        impl_->bound_port = impl_->http.bind_to_any_port(impl_->options.host);
        return impl_->bound_port > 0;
    }
    if (!impl_->http.bind_to_port(impl_->options.host, impl_->options.port)) return false;
    impl_->bound_port = impl_->options.port;
    return true;
}

int ApiServer::port() const { return impl_->bound_port; }

void ApiServer::serve() { impl_->http.listen_after_bind(); }

void ApiServer::stop() {
    if (impl_->http.is_running()) impl_->http.stop();
}

}  // namespace masorch::service
