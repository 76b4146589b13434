#include "masorch/service/canvas.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>

#include <fmt/format.h>

#include "masorch/error.hpp"
#include "masorch/text.hpp"

namespace masorch::service {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string_view to_string(NodeKind k) {
    switch (k) {
        case NodeKind::agent: return "agent";
        case NodeKind::aggregator: return "aggregator";
        case NodeKind::adjudicator: return "adjudicator";
    }
    return "agent";
}

NodeKind kind_from_string(const std::string& s) {
    if (s == "agent") return NodeKind::agent;
    if (s == "aggregator") return NodeKind::aggregator;
    if (s == "adjudicator") return NodeKind::adjudicator;
    throw InvalidInput("unknown node kind '" + s + "'");
}

}  // namespace

CanvasGraph canvas_from_json(const json& j) {
    if (!j.is_object()) throw InvalidInput("canvas graph must be a JSON object");
    CanvasGraph g;
    try {
        for (const auto& n : j.at("nodes")) {
            CanvasNode node;
            node.node_id = n.at("node_id").get<std::string>();
            node.kind = kind_from_string(n.at("kind").get<std::string>());
            if (auto it = n.find("role_name"); it != n.end() && !it->is_null()) node.role_name = it->get<std::string>();
            g.nodes.push_back(std::move(node));
        }
        for (const auto& e : j.value("edges", json::array())) {
            if (e.is_array() && e.size() == 2) {
                g.edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
            } else {
                g.edges.emplace_back(e.at("from").get<std::string>(), e.at("to").get<std::string>());
            }
        }
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("canvas graph: ") + e.what());
    }
    return g;
}

ordered_json to_json(const CanvasGraph& g) {
    ordered_json j;
    j["nodes"] = ordered_json::array();
    for (const auto& n : g.nodes)
        j["nodes"].push_back({{"node_id", n.node_id}, {"kind", to_string(n.kind)}, {"role_name", n.role_name}});
    j["edges"] = ordered_json::array();
    for (const auto& [from, to] : g.edges) j["edges"].push_back({{"from", from}, {"to", to}});
    return j;
}

CompileResult compile_canvas(const CanvasGraph& graph) {
    CompileResult out;
    auto fail = [&out](std::string node, std::string msg) { out.errors.push_back({std::move(node), std::move(msg)}); };

    std::map<std::string, const CanvasNode*> by_id;
    for (const auto& n : graph.nodes) {
        if (n.node_id.empty()) fail("", "node with empty node_id");
        else if (!by_id.emplace(n.node_id, &n).second) fail(n.node_id, "duplicate node_id");
    }
    if (graph.nodes.empty()) {
        fail("", "graph is empty");
        return out;
    }

    std::map<std::string, std::vector<std::string>> succ;
    std::map<std::string, int> indeg;
    std::map<std::string, int> outdeg;
    std::set<std::pair<std::string, std::string>> seen_edges;
    for (const auto& [id, _] : by_id) indeg[id] = 0;
    for (const auto& [from, to] : graph.edges) {
        const bool from_ok = by_id.count(from) > 0;
        const bool to_ok = by_id.count(to) > 0;
        if (!from_ok) fail(from, fmt::format("edge {} -> {} starts at an unknown node", from, to));
        if (!to_ok) fail(from_ok ? from : to, fmt::format("edge {} -> {} ends at an unknown node", from, to));
        if (!from_ok || !to_ok) continue;
        if (from == to) {
            fail(from, "self-loop forms a cycle");
            continue;
        }
        if (!seen_edges.insert({from, to}).second) continue;
        succ[from].push_back(to);
        ++indeg[to];
        ++outdeg[from];
    }

    const auto agents = std::count_if(graph.nodes.begin(), graph.nodes.end(),
                                      [](const CanvasNode& n) { return n.kind == NodeKind::agent; });
    if (agents == 0) fail("", "graph needs at least one agent node");

    std::vector<std::string> sinks;
    for (const auto& [id, node] : by_id) {
        if (outdeg[id] == 0) sinks.push_back(id);
        if (node->kind != NodeKind::agent && outdeg[id] > 0)
            fail(id, fmt::format("{} node must be terminal but has outgoing edges", to_string(node->kind)));
    }
    const auto terminal_kinds = std::count_if(graph.nodes.begin(), graph.nodes.end(),
                                              [](const CanvasNode& n) { return n.kind != NodeKind::agent; });
    if (terminal_kinds == 0) fail("", "graph needs one aggregator or adjudicator node");
    if (sinks.size() > 1) {
        for (const auto& s : sinks) {
            if (by_id[s]->kind == NodeKind::agent) fail(s, "agent output reaches no aggregator");
            else if (terminal_kinds > 1) fail(s, "more than one terminal node");
        }
    }

    // Kahn's algorithm; longest-path depth for agents.
    std::map<std::string, int> depth;
    std::map<std::string, int> remaining = indeg;
    std::deque<std::string> ready;
    for (const auto& n : graph.nodes) {
        if (by_id[n.node_id] == &n && remaining[n.node_id] == 0) ready.push_back(n.node_id);
    }
    std::size_t visited = 0;
    while (!ready.empty()) {
        const std::string id = ready.front();
        ready.pop_front();
        ++visited;
        for (const auto& nxt : succ[id]) {
            depth[nxt] = std::max(depth[nxt], depth[id] + 1);
            if (--remaining[nxt] == 0) ready.push_back(nxt);
        }
    }
    if (visited < by_id.size()) {
        for (const auto& [id, left] : remaining) {
            if (left > 0) fail(id, "node is part of a cycle");
        }
    }
    if (!out.errors.empty()) return out;

    const auto& sink = *by_id[sinks.front()];
    std::map<int, std::vector<const CanvasNode*>> layers;
    for (const auto& n : graph.nodes) {
        if (n.kind == NodeKind::agent) layers[depth[n.node_id]].push_back(&n);
    }
    const int rounds = static_cast<int>(layers.size());
    const std::vector<const CanvasNode*>* widest = nullptr;
    for (const auto& [_, layer] : layers) {
        if (widest == nullptr || layer.size() > widest->size()) widest = &layer;
    }
    const int width = static_cast<int>(widest->size());

    topology::TopologyConfig cfg;
    if (width == 1) {
        cfg.method = topology::Method::single;
        cfg.num_agents = 1;
        cfg.num_rounds = 1;
    } else {
        cfg.method = sink.kind == NodeKind::adjudicator ? topology::Method::discussion : topology::Method::debate;
        cfg.num_agents = width;
        cfg.num_rounds = rounds;
    }
    std::vector<std::string> roster;
    for (const auto* n : *widest) {
        const std::string role(text::trim(n->role_name));
        if (!role.empty() && role != topology::kGeneralAssistant) roster.push_back(role);
    }
    if (!roster.empty()) {
        if (roster.size() != widest->size()) {
            for (const auto* n : *widest) {
                if (text::trim(n->role_name).empty()) fail(n->node_id, "agent has no role while its peers do");
            }
            return out;
        }
        cfg.role_mode = topology::RoleMode::fixed;
        cfg.role_roster = std::move(roster);
    }
    try {
        cfg.validate();
    } catch (const InvalidInput& e) {
        fail(sink.node_id, e.what());
        return out;
    }
    out.config = std::move(cfg);
    return out;
}

}  // namespace masorch::service
