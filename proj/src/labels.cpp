#include "masorch/labels.hpp"

#include <charconv>

#include <fmt/format.h>

#include "masorch/error.hpp"

namespace masorch::topology {

std::string config_label(Method method, int agents, int rounds) {
    return fmt::format("{}-A{}-R{}", method_name(method), agents, rounds);
}

namespace {

int parse_positive(std::string_view digits, std::string_view label) {
    if (digits.empty() || digits.front() == '0') throw ParseError("malformed label '" + std::string(label) + "'");
    int value = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || value < 1)
        throw ParseError("malformed label '" + std::string(label) + "'");
    return value;
}

}  // namespace

ParsedLabel parse_label(std::string_view label) {
    const auto r_pos = label.rfind("-R");
    if (r_pos == std::string_view::npos) throw ParseError("malformed label '" + std::string(label) + "'");
    const auto a_pos = label.rfind("-A", r_pos);
    if (a_pos == std::string_view::npos || a_pos == 0) throw ParseError("malformed label '" + std::string(label) + "'");

    const auto name = label.substr(0, a_pos);
    const auto method = method_from_name(name);
    if (!method) throw ParseError("unknown method name in label '" + std::string(label) + "'");

    ParsedLabel out;
    out.method = *method;
    out.agents = parse_positive(label.substr(a_pos + 2, r_pos - a_pos - 2), label);
    out.rounds = parse_positive(label.substr(r_pos + 2), label);
    return out;
}

}  // namespace masorch::topology
