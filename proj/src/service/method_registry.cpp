#include "masorch/service/method_registry.hpp"

#include <fmt/format.h>

#include "masorch/error.hpp"

namespace masorch::service {

using nlohmann::json;
using nlohmann::ordered_json;
using topology::Method;

namespace {

ParamSpec agents_param(int min) { return {"agents", "int", min, 10, 3, {}}; }
ParamSpec rounds_param() { return {"rounds", "int", 1, 5, 2, {}}; }
ParamSpec turns_param() { return {"max_turns", "int", 1, 10, 3, {}}; }
ParamSpec role_mode_param() { return {"role_mode", "enum", 0, 0, "none", {"none", "fixed", "dynamic"}}; }
ParamSpec roster_param() { return {"role_roster", "string_list", 0, 0, json::array(), {}}; }

std::vector<ParamSpec> params_for(Method m) {
    std::vector<ParamSpec> p;
    switch (m) {
        case Method::single:
        case Method::cot: break;
        case Method::self_consistency: p = {agents_param(1)}; break;
        case Method::conversational: p = {turns_param()}; break;
        case Method::meta_prompting: p = {agents_param(1)}; break;
        case Method::colacare: p = {agents_param(2)}; break;
        default: p = {agents_param(2), rounds_param()}; break;
    }
    p.push_back(role_mode_param());
    p.push_back(roster_param());
    return p;
}

MethodDescriptor executable(int row, Method m, std::string category, Taxonomy t) {
    MethodDescriptor d;
    d.method_id = std::string(topology::method_id(m));
    d.display_name = std::string(topology::method_name(m));
    d.category = std::move(category);
    d.table_row = row;
    d.taxonomy = std::move(t);
    d.params = params_for(m);
    d.executable = true;
    d.method = m;
    return d;
}

MethodDescriptor listed(int row, std::string id, std::string name, Taxonomy t) {
    MethodDescriptor d;
    d.method_id = std::move(id);
    d.display_name = std::move(name);
    d.category = "medical";
    d.table_row = row;
    d.taxonomy = std::move(t);
    return d;
}

std::vector<MethodDescriptor> build() {
    std::vector<MethodDescriptor> v;
    v.push_back(executable(1, Method::single, "single-agent",
                           {"Single", "Fixed", false, "No", "Direct Output", "No"}));
    v.push_back(executable(2, Method::cot, "single-agent", {"Single", "Fixed", false, "No", "Direct Output", "No"}));
    v.push_back(executable(3, Method::self_consistency, "general",
                           {"Independent", "Fixed", false, "No", "Voting", "No"}));
    v.push_back(executable(4, Method::debate, "general", {"Debate", "Fixed", false, "Iterative", "Consensus", "No"}));
    v.push_back(executable(5, Method::discussion, "general",
                           {"Discussion", "Fixed", false, "Iterative", "Consensus", "No"}));
    v.push_back(executable(6, Method::reconcile, "general",
                           {"Round-Table", "Fixed", false, "Iterative", "Consensus", "No"}));
    v.push_back(executable(7, Method::dylan, "general",
                           {"Dynamic Graph", "Dynamic", false, "Iterative", "Aggregation", "No"}));
    v.push_back(executable(8, Method::conversational, "general",
                           {"Conversational", "Dynamic", true, "Iterative", "Termination Condition", "Feedback Driven"}));
    v.push_back(executable(9, Method::meta_prompting, "general",
                           {"Hub-and-Spoke", "Dynamic", true, "Iterative", "Synthesis", "No"}));
    v.push_back(executable(10, Method::medagents, "medical",
                           {"Collaborative", "Dynamic", false, "Iterative", "Consensus", "No"}));
    v.push_back(executable(11, Method::mdagents, "medical",
                           {"Adaptive", "Dynamic", false, "Complexity-Aware", "Consensus", "No"}));
    v.push_back(executable(12, Method::mdteamgpt, "medical",
                           {"Residual Discussion", "Dynamic", true, "Self-Evolving", "Consensus", "Experience KB"}));
    v.push_back(executable(13, Method::colacare, "medical",
                           {"Blackboard", "Fixed", false, "Conflict Resolution", "Consensus", "Medical KB"}));
    v.push_back(listed(14, "lins", "LINS",
                       {"Iterative Pipeline", "Fixed", false, "Iterative Retrieval", "Citation Synthesis", "PubMed DB"}));
    v.push_back(listed(15, "medagentaudit", "MedAgentAudit",
                       {"Monitored Discussion", "Fixed", false, "Failure Diagnosis", "Error Quantification", "No"}));
    v.push_back(listed(16, "medla", "MedLA",
                       {"Logic-Graph Based", "Dynamic", false, "Self-Correction", "Logical Consensus", "Medical KB"}));
    v.push_back(listed(17, "cxragent", "CXRAgent",
                       {"Director-Orchestrated", "Dynamic", true, "Multi-Stage Refinement",
                        "Orchestrated Finalization", "No"}));
    v.push_back(listed(18, "moma", "MoMA",
                       {"MoE-Inspired", "Dynamic", false, "Feature-Adaptive", "Gated Aggregation", "No"}));
    v.push_back(listed(19, "medorch", "MedOrch",
                       {"Mediator-Guided", "Dynamic", false, "Mediator-Refinement", "Mediator-Synthesis", "No"}));
    return v;
}

int int_param(const json& params, const ParamSpec& spec) {
    const auto it = params.find(spec.name);
    if (it == params.end() || it->is_null()) return spec.default_value.get<int>();
    if (!it->is_number_integer()) throw InvalidInput(fmt::format("parameter '{}' must be an integer", spec.name));
    const int v = it->get<int>();
    if (v < spec.min || v > spec.max)
        throw InvalidInput(fmt::format("parameter '{}' must be in [{}, {}], got {}", spec.name, spec.min, spec.max, v));
    return v;
}

}  // namespace

const std::vector<MethodDescriptor>& method_registry() {
    static const std::vector<MethodDescriptor> registry = build();
    return registry;
}

const MethodDescriptor* find_method(std::string_view method_id) {
    for (const auto& d : method_registry()) {
        if (d.method_id == method_id) return &d;
    }
    return nullptr;
}

ordered_json to_json(const MethodDescriptor& d) {
    ordered_json j;
    j["method_id"] = d.method_id;
    j["display_name"] = d.display_name;
    j["category"] = d.category;
    j["table_row"] = d.table_row;
    j["taxonomy"] = ordered_json{{"interaction", d.taxonomy.interaction}, {"role", d.taxonomy.role},
                                 {"tool", d.taxonomy.tool},               {"adaptivity", d.taxonomy.adaptivity},
                                 {"decision", d.taxonomy.decision},       {"retrieval", d.taxonomy.retrieval}};
    j["params"] = ordered_json::array();
    for (const auto& p : d.params) {
        ordered_json pj{{"name", p.name}, {"type", p.type}};
        if (p.type == "int") {
            pj["min"] = p.min;
            pj["max"] = p.max;
        }
        if (!p.choices.empty()) pj["choices"] = p.choices;
        pj["default"] = p.default_value;
        j["params"].push_back(std::move(pj));
    }
    j["executable"] = d.executable;
    return j;
}

topology::TopologyConfig config_from_params(std::string_view method_id, const json& params) {
    const auto* d = find_method(method_id);
    if (d == nullptr) throw InvalidInput(fmt::format("unknown method '{}'", method_id));
    if (!d->executable) throw InvalidInput(fmt::format("method '{}' is catalogued but not executable", method_id));
    if (!params.is_null() && !params.is_object()) throw InvalidInput("params must be an object");
    const json p = params.is_null() ? json::object() : params;

    topology::TopologyConfig cfg;
    cfg.method = *d->method;
    for (const auto& spec : d->params) {
        if (spec.name == "agents") cfg.num_agents = int_param(p, spec);
        else if (spec.name == "rounds") cfg.num_rounds = int_param(p, spec);
        else if (spec.name == "max_turns") cfg.max_turns = int_param(p, spec);
    }
    if (auto it = p.find("role_mode"); it != p.end() && !it->is_null()) {
        if (!it->is_string()) throw InvalidInput("parameter 'role_mode' must be a string");
        cfg.role_mode = topology::role_mode_from_string(it->get<std::string>());
    }
    if (auto it = p.find("role_roster"); it != p.end() && !it->is_null()) {
        try {
            cfg.role_roster = it->get<std::vector<std::string>>();
        } catch (const json::exception&) {
            throw InvalidInput("parameter 'role_roster' must be a list of strings");
        }
    }
    cfg.validate();
    return cfg;
}

}  // namespace masorch::service
