#include <algorithm>
#include <regex>

#include "masorch/evaluation.hpp"
#include "masorch/text.hpp"

namespace masorch::eval {

namespace {

// Prefix words match in any case; the letter itself must be uppercase so that
// "Answer: a fever" is not read as option A.
const std::regex& answer_prefix_re() {
    static const std::regex re(
        R"(\b([Ff][Ii][Nn][Aa][Ll]\s+)?[Aa][Nn][Ss][Ww][Ee][Rr]\s*([Ii][Ss]|:)?\s*\(?([A-E])\)?\b)");
    return re;
}

const std::regex& bracket_re() {
    static const std::regex re(R"(\(([A-E])\)|\[([A-E])\])");
    return re;
}

const std::regex& letter_line_re() {
    static const std::regex re(R"(^\s*([A-E])[.):]?\s*$)");
    return re;
}

bool accepted(char c, const std::vector<dataset::Option>& options) {
    if (c < 'A' || c > 'E') return false;
    if (options.empty()) return true;
    return std::any_of(options.begin(), options.end(), [c](const dataset::Option& o) { return o.label == c; });
}

std::optional<char> first_regex_letter(const std::string& s, const std::regex& re,
                                       const std::vector<dataset::Option>& options) {
    for (auto it = std::sregex_iterator(s.begin(), s.end(), re); it != std::sregex_iterator(); ++it) {
        const auto& m = *it;
        for (std::size_t g = m.size(); g-- > 1;) {
            if (!m[g].matched || m[g].length() != 1) continue;
            const char c = m[g].str()[0];
            if (c >= 'A' && c <= 'E') {
                if (accepted(c, options)) return c;
                break;
            }
        }
    }
    return std::nullopt;
}

}  // namespace

Extraction rule_mr_match(std::string_view text, const std::vector<dataset::Option>& options) {
    const std::string s(text);

    if (auto c = first_regex_letter(s, answer_prefix_re(), options)) return {c, 1};
    if (auto c = first_regex_letter(s, bracket_re(), options)) return {c, 2};

    for (const auto& line : text::split_lines(s)) {
        std::smatch m;
        if (std::regex_match(line, m, letter_line_re()) && accepted(m.str(1)[0], options)) return {m.str(1)[0], 3};
    }

    std::vector<const dataset::Option*> by_length;
    for (const auto& o : options) by_length.push_back(&o);
    std::stable_sort(by_length.begin(), by_length.end(), [](const dataset::Option* a, const dataset::Option* b) {
        return text::normalize_words(a->text).size() > text::normalize_words(b->text).size();
    });
    const std::string haystack = " " + text::normalize_words(s) + " ";
    for (const auto* o : by_length) {
        const std::string needle = text::normalize_words(o->text);
        if (needle.empty()) continue;
        if (haystack.find(" " + needle + " ") != std::string::npos) return {o->label, 4};
    }
    return {};
}

std::optional<char> rule_fl_extract(std::string_view text) {
    for (char c : text) {
        if (c >= 'A' && c <= 'E') return c;
    }
    return std::nullopt;
}

Status rule_em_match(std::string_view text, char gold_label) {
    const std::string t = text::trim(text);
    if (t.size() == 1 && t[0] == gold_label) return Status::Correct;
    if (t.size() == 1 && t[0] >= 'A' && t[0] <= 'E') return Status::Wrong;
    return Status::FormatError;
}

Status parse_sj_reply(std::string_view reply, const VerdictTokens& tokens) {
    struct Candidate {
        const std::string* token;
        Status status;
    };
    const Candidate candidates[] = {{&tokens.correct, Status::Correct},
                                    {&tokens.wrong, Status::Wrong},
                                    {&tokens.ambiguous, Status::Ambiguous}};
    std::size_t best = std::string_view::npos;
    Status status = Status::Ambiguous;
    for (const auto& c : candidates) {
        const std::size_t pos = text::find_word(reply, *c.token);
        if (pos < best) {
            best = pos;
            status = c.status;
        }
    }
    return status;
}

std::optional<char> parse_ec_reply(std::string_view reply) {
    const std::string t = text::trim(reply);
    if (t.size() == 1 && t[0] >= 'A' && t[0] <= 'E') return t[0];
    return std::nullopt;
}

}  // namespace masorch::eval
