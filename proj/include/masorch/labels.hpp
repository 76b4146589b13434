#pragma once

#include <string>
#include <string_view>

#include "masorch/topology.hpp"

namespace masorch::topology {

struct ParsedLabel {
    Method method = Method::single;
    int agents = 1;
    int rounds = 1;

    bool operator==(const ParsedLabel&) const = default;
};

/// "<Name>-A<agents>-R<rounds>", e.g. config_label(debate, 6, 2) == "Debate-A6-R2".
std::string config_label(Method method, int agents, int rounds);

/// Exact inverse of config_label. Throws ParseError on anything else.
ParsedLabel parse_label(std::string_view label);

}  // namespace masorch::topology
