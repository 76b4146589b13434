#pragma once

// Node graphs drawn in the builder, compiled onto executable method templates.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "masorch/topology.hpp"

namespace masorch::service {

enum class NodeKind { agent, aggregator, adjudicator };

struct CanvasNode {
    std::string node_id;
    NodeKind kind = NodeKind::agent;
    std::string role_name;
};

struct CanvasGraph {
    std::vector<CanvasNode> nodes;
    std::vector<std::pair<std::string, std::string>> edges;  // (from, to)
};

/// Throws InvalidInput on a structurally malformed body.
CanvasGraph canvas_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const CanvasGraph& g);

struct NodeError {
    std::string node_id;  // empty for graph-level problems
    std::string message;
};

struct CompileResult {
    std::optional<topology::TopologyConfig> config;
    std::vector<NodeError> errors;

    [[nodiscard]] bool ok() const { return config.has_value(); }
};

/// The graph must be acyclic with at least one agent and exactly one terminal
/// node, which is an aggregator or adjudicator. Agents are layered by their
/// longest path from a source: the number of layers gives R and the widest
/// layer gives A. An aggregator sink maps to Debate, an adjudicator sink to
/// Discussion, and a graph with one agent per layer to the single-agent
/// baseline. Named roles become a fixed roster taken from the widest layer.
CompileResult compile_canvas(const CanvasGraph& graph);

}  // namespace masorch::service
