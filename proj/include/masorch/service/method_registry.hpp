#pragma once

// Catalogue of collaboration methods: taxonomy, parameter schemas for form
// generation, and whether the engine can execute them.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "masorch/topology.hpp"

namespace masorch::service {

struct Taxonomy {
    std::string interaction;
    std::string role;
    bool tool = false;
    std::string adaptivity;
    std::string decision;
    std::string retrieval;
};

struct ParamSpec {
    std::string name;
    std::string type;  // "int", "enum" or "string_list"
    int min = 0;
    int max = 0;
    nlohmann::json default_value;
    std::vector<std::string> choices;
};

struct MethodDescriptor {
    std::string method_id;
    std::string display_name;
    std::string category;  // "single-agent", "general", "medical"
    int table_row = 0;
    Taxonomy taxonomy;
    std::vector<ParamSpec> params;
    bool executable = false;
    std::optional<topology::Method> method;
};

/// All 19 descriptors in catalogue order.
const std::vector<MethodDescriptor>& method_registry();
const MethodDescriptor* find_method(std::string_view method_id);

nlohmann::ordered_json to_json(const MethodDescriptor& d);

/// Builds a config from a method id and form parameters (agents, rounds,
/// max_turns, role_mode, role_roster). Throws InvalidInput for unknown or
/// taxonomy-only methods and out-of-range values.
topology::TopologyConfig config_from_params(std::string_view method_id, const nlohmann::json& params);

}  // namespace masorch::service
