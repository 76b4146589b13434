#include <algorithm>
#include <map>
#include <numeric>
#include <regex>

#include <fmt/format.h>

#include "masorch/digest.hpp"
#include "masorch/evaluation.hpp"
#include "masorch/text.hpp"
#include "masorch/voting.hpp"
#include "run_context.hpp"

namespace masorch::topology::detail {

namespace {

std::string answer_instruction(const dataset::NormalizedSample& s) {
    if (s.options.empty()) return "Give a short rationale, then finish with a line of the form 'Answer: <your answer>'.";
    return "Give a short rationale, then finish with a line of the form 'Answer: (X)' where X is the option letter.";
}

std::optional<char> letter_of(const RunContext& ctx, std::string_view reply) {
    return eval::rule_mr_extract(reply, ctx.sample().options);
}

// One line per peer: the extracted letter plus the first line of the reply.
// Aggregators see these instead of full transcripts.
std::string brief(const RunContext& ctx, std::string_view reply) {
    std::string first;
    for (const auto& line : text::split_lines(reply)) {
        first = text::trim(line);
        if (!first.empty()) break;
    }
    if (first.size() > 160) first = first.substr(0, 157) + "...";
    const auto l = letter_of(ctx, reply);
    return l ? fmt::format("({}) {}", *l, first) : first;
}

std::string peer_lines(const RunContext& ctx, const std::vector<AgentSpec>& agents,
                       const std::vector<std::string>& replies, const std::vector<int>& which = {}) {
    std::string out;
    auto add = [&](std::size_t i) {
        out += fmt::format("- Agent {} ({}): {}\n", agents[i].agent_id + 1, agents[i].role_name, brief(ctx, replies[i]));
    };
    if (which.empty()) {
        for (std::size_t i = 0; i < replies.size(); ++i) add(i);
    } else {
        for (int i : which) add(static_cast<std::size_t>(i));
    }
    return out;
}

// First of the given words (case-insensitive, word-bounded) by position.
std::optional<std::size_t> first_keyword(std::string_view reply, const std::vector<std::string_view>& words) {
    const std::string lower = text::to_lower(reply);
    std::size_t best_pos = std::string::npos;
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < words.size(); ++i) {
        const std::size_t pos = text::find_word(lower, text::to_lower(words[i]));
        if (pos < best_pos) {
            best_pos = pos;
            best = i;
        }
    }
    return best;
}

AgentSpec hub(int id, std::string role) { return {id, role, role_preamble(role)}; }

// ---------------------------------------------------------------------------

Outcome direct(RunContext& ctx, const AgentSpec& agent, bool cot, int round = 1) {
    std::string instruction = answer_instruction(ctx.sample());
    if (cot) {
        instruction =
            "Think step by step. First describe the relevant visual findings in the image, then reason from those "
            "findings to the diagnosis, citing the visual evidence for each step. " +
            instruction;
    }
    return {ctx.ask(round, agent, instruction), Termination::completed};
}

Outcome self_consistency(RunContext& ctx, const std::vector<AgentSpec>& agents, int n) {
    std::vector<std::string> replies;
    std::vector<char> votes;
    std::vector<std::size_t> voter;
    for (int i = 0; i < n; ++i) {
        const auto& agent = agents[static_cast<std::size_t>(i) % agents.size()];
        replies.push_back(ctx.ask(1, agent,
                                  fmt::format("This is reasoning path {} of {}. Reason independently. {}", i + 1, n,
                                              answer_instruction(ctx.sample()))));
        if (auto l = letter_of(ctx, replies.back())) {
            votes.push_back(*l);
            voter.push_back(replies.size() - 1);
        } else {
            ctx.annotate_last("format_failure");
        }
    }
    if (votes.empty()) return {"", Termination::protocol_error};
    const char winner = majority_vote(votes);
    const auto first = std::find(votes.begin(), votes.end(), winner) - votes.begin();
    return {replies[voter[static_cast<std::size_t>(first)]], Termination::completed};
}

Outcome debate(RunContext& ctx, const std::vector<AgentSpec>& agents, int rounds, int round_offset = 0) {
    const std::size_t a = agents.size();
    std::vector<std::string> latest(a);
    for (int r = 1; r <= rounds; ++r) {
        std::vector<std::string> next(a);
        for (std::size_t i = 0; i < a; ++i) {
            std::string instruction;
            if (r == 1) {
                instruction = "Answer independently. " + answer_instruction(ctx.sample());
            } else {
                instruction = "Latest answers from the other agents:\n";
                for (std::size_t j = 0; j < a; ++j) {
                    if (j != i)
                        instruction += fmt::format("- Agent {} ({}): {}\n", agents[j].agent_id + 1, agents[j].role_name,
                                                   brief(ctx, latest[j]));
                }
                instruction += fmt::format("Your previous answer: {}\nDebate round {} of {}. Critique the other "
                                           "answers, then give your updated answer. {}",
                                           brief(ctx, latest[i]), r, rounds, answer_instruction(ctx.sample()));
            }
            next[i] = ctx.ask(round_offset + r, agents[i], instruction);
        }
        latest = std::move(next);
    }
    const std::string verdict =
        ctx.ask(round_offset + rounds, hub(static_cast<int>(a), "Aggregator"),
                "You are the aggregator of a debate. Final answers of the agents:\n" + peer_lines(ctx, agents, latest) +
                    "Synthesize the consensus answer. " + answer_instruction(ctx.sample()));
    return {verdict, Termination::completed};
}

Outcome discussion(RunContext& ctx, const std::vector<AgentSpec>& agents, int rounds) {
    const std::size_t a = agents.size();
    const AgentSpec adjudicator = hub(static_cast<int>(a), "Adjudicator");
    std::vector<std::string> latest(a);
    std::string summary;
    for (int r = 1; r <= rounds; ++r) {
        std::vector<std::string> next(a);
        for (std::size_t i = 0; i < a; ++i) {
            std::string instruction;
            if (r == 1) {
                instruction = "Share your independent assessment. " + answer_instruction(ctx.sample());
            } else {
                instruction = fmt::format(
                    "The adjudicator's summary of round {}:\n{}\nYour previous answer: {}\nDiscussion round {} of {}. "
                    "Respond to the summary and give your current answer. {}",
                    r - 1, brief(ctx, summary), brief(ctx, latest[i]), r, rounds, answer_instruction(ctx.sample()));
            }
            next[i] = ctx.ask(r, agents[i], instruction);
        }
        latest = std::move(next);
        const bool last = r == rounds;
        summary = ctx.ask(
            r, adjudicator,
            fmt::format("You are the adjudicator of a panel discussion. Answers in round {}:\n{}{}", r,
                        peer_lines(ctx, agents, latest),
                        last ? "Issue the final verdict. " + answer_instruction(ctx.sample())
                             : std::string("Summarize the points of agreement and disagreement for the panel, and "
                                           "state the currently favored answer.")));
    }
    return {summary, Termination::completed};
}

struct Vote {
    char label;
    double confidence;
};

std::optional<Vote> parse_structured_vote(const RunContext& ctx, std::string_view reply) {
    static const std::regex re(R"(ANSWER:\s*([A-E])\s*\|\s*CONFIDENCE:\s*([0-9.]+))", std::regex::icase);
    const std::string s(reply);
    std::smatch m;
    if (!std::regex_search(s, m, re)) return std::nullopt;
    const char label = static_cast<char>(std::toupper(static_cast<unsigned char>(m.str(1)[0])));
    const auto& opts = ctx.sample().options;
    if (!opts.empty() && std::none_of(opts.begin(), opts.end(), [label](const auto& o) { return o.label == label; }))
        return std::nullopt;
    double c = 0.0;
    try {
        std::size_t used = 0;
        c = std::stod(m.str(2), &used);
        if (used != m.str(2).size()) return std::nullopt;
    } catch (const std::exception&) {
        return std::nullopt;
    }
    if (!(c >= 0.0 && c <= 1.0)) return std::nullopt;
    return Vote{label, c};
}

Outcome reconcile(RunContext& ctx, const std::vector<AgentSpec>& agents, int max_rounds) {
    const std::size_t a = agents.size();
    const std::string format =
        "State your answer and your confidence as one line of the form 'ANSWER: <letter> | CONFIDENCE: <number "
        "between 0 and 1>', then explain briefly.";
    std::vector<std::string> replies(a);
    std::vector<std::optional<Vote>> votes(a);

    auto collect = [&](int round, const std::string& context) {
        for (std::size_t i = 0; i < a; ++i) {
            replies[i] = ctx.ask(round, agents[i], context + format);
            votes[i] = parse_structured_vote(ctx, replies[i]);
            if (!votes[i]) ctx.annotate_last("format_failure");
        }
    };
    auto unanimous = [&] {
        return std::all_of(votes.begin(), votes.end(), [&](const auto& v) { return v && v->label == votes[0]->label; });
    };

    collect(0, "Round-table discussion, opening round. ");
    for (int r = 1; r <= max_rounds && !unanimous(); ++r) {
        std::map<char, std::vector<std::string>> grouped;
        for (std::size_t i = 0; i < a; ++i) {
            if (votes[i])
                grouped[votes[i]->label].push_back(fmt::format("agent {} ({:.2f})", agents[i].agent_id + 1, votes[i]->confidence));
        }
        std::string context = fmt::format("Round-table reconciliation round {} of {}. Current answers, grouped:\n", r, max_rounds);
        for (const auto& [label, members] : grouped) {
            std::string joined;
            for (const auto& m : members) joined += (joined.empty() ? "" : ", ") + m;
            context += fmt::format("- {}: {}\n", label, joined);
        }
        context += "Weigh the other agents' answers and confidences, then reconsider. ";
        collect(r, context);
    }

    std::vector<Ballot> ballots;
    std::vector<std::size_t> owner;
    for (std::size_t i = 0; i < a; ++i) {
        if (votes[i]) {
            ballots.push_back({votes[i]->label, votes[i]->confidence});
            owner.push_back(i);
        }
    }
    if (ballots.empty()) return {"", Termination::protocol_error};
    const char winner = confidence_weighted_vote(ballots);
    for (std::size_t b = 0; b < ballots.size(); ++b) {
        if (ballots[b].label == winner) return {replies[owner[b]], Termination::completed};
    }
    return {"", Termination::protocol_error};
}

Outcome dylan(RunContext& ctx, const std::vector<AgentSpec>& agents, int rounds) {
    std::vector<int> active(agents.size());
    std::iota(active.begin(), active.end(), 0);
    std::vector<std::string> replies;
    std::vector<std::optional<char>> letters;
    std::vector<int> scores;
    std::string previous;

    for (int r = 1; r <= rounds; ++r) {
        replies.assign(active.size(), {});
        letters.assign(active.size(), std::nullopt);
        for (std::size_t n = 0; n < active.size(); ++n) {
            const auto& agent = agents[static_cast<std::size_t>(active[n])];
            const std::string instruction =
                r == 1 ? "Answer independently. " + answer_instruction(ctx.sample())
                       : fmt::format("Answers of the agents kept after round {}:\n{}Layer {} of {}. Give your answer. {}",
                                     r - 1, previous, r, rounds, answer_instruction(ctx.sample()));
            replies[n] = ctx.ask(r, agent, instruction);
            letters[n] = letter_of(ctx, replies[n]);
            if (!letters[n]) ctx.annotate_last("format_failure");
        }

        std::vector<char> present;
        for (const auto& l : letters) {
            if (l) present.push_back(*l);
        }
        scores.assign(active.size(), 0);
        if (!present.empty()) {
            const char modal = majority_vote(present);
            const auto modal_count = static_cast<int>(std::count(present.begin(), present.end(), modal));
            for (std::size_t n = 0; n < active.size(); ++n) scores[n] = letters[n] == modal ? modal_count : 0;
        }
        if (r == rounds) break;

        std::vector<std::size_t> order(active.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
            if (scores[x] != scores[y]) return scores[x] > scores[y];
            return active[x] < active[y];
        });
        const std::size_t keep = std::max<std::size_t>(2, (active.size() + 1) / 2);
        order.resize(std::min(keep, order.size()));
        std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return active[x] < active[y]; });
        std::vector<int> kept;
        previous.clear();
        for (std::size_t idx : order) {
            kept.push_back(active[idx]);
            const auto& agent = agents[static_cast<std::size_t>(active[idx])];
            previous += fmt::format("- Agent {} ({}, score {}): {}\n", agent.agent_id + 1, agent.role_name, scores[idx],
                                    brief(ctx, replies[idx]));
        }
        active = std::move(kept);
    }

    std::vector<Ballot> ballots;
    std::vector<std::size_t> owner;
    for (std::size_t n = 0; n < active.size(); ++n) {
        if (letters[n] && scores[n] > 0) {
            ballots.push_back({*letters[n], static_cast<double>(scores[n])});
            owner.push_back(n);
        }
    }
    if (ballots.empty()) return {replies.front(), Termination::completed};
    const char winner = weighted_vote(ballots);
    for (std::size_t b = 0; b < ballots.size(); ++b) {
        if (ballots[b].label == winner) return {replies[owner[b]], Termination::completed};
    }
    return {replies.front(), Termination::completed};
}

Outcome conversational(RunContext& ctx, const TopologyConfig& config, const std::vector<AgentSpec>& assigned) {
    AgentSpec solver = hub(0, "clinical expert");
    AgentSpec critic = hub(1, "visual analyst");
    if (config.role_mode != RoleMode::none && assigned.size() >= 2) {
        solver = assigned[0];
        critic = assigned[1];
    }
    std::string answer;
    std::string critique;
    for (int t = 1; t <= config.max_turns; ++t) {
        const std::string ask_solver =
            t == 1 ? "Propose a diagnosis for this case. " + answer_instruction(ctx.sample())
                   : fmt::format("The reviewer's critique of your previous answer:\n{}\nRevise your answer. {}",
                                 brief(ctx, critique), answer_instruction(ctx.sample()));
        answer = ctx.ask(t, solver, ask_solver);
        critique = ctx.ask(t, critic,
                           "Proposed answer from the solver:\n" + brief(ctx, answer) +
                               "\nCheck it against the visual evidence. If it is correct, reply APPROVE. Otherwise "
                               "explain the specific correction.");
        if (first_keyword(critique, {"APPROVE"})) return {answer, Termination::completed};
    }
    return {answer, Termination::round_limit};
}

Outcome meta_prompting(RunContext& ctx, const TopologyConfig& config, const std::vector<AgentSpec>& assigned, int k) {
    const AgentSpec meta = hub(k, "Meta-Doctor");
    const std::string plan = ctx.ask(
        0, meta,
        fmt::format("You coordinate a panel of {} medical experts for this case. List the {} expert roles best suited "
                    "to it, one role per line, with no other text.",
                    k, k));
    std::vector<std::string> roles = parse_role_lines(plan);
    std::vector<AgentSpec> experts;
    if (roles.empty()) {
        ctx.annotate_last("format_failure");
        if (config.role_mode == RoleMode::none) experts = assign_static_roles(RoleMode::fixed, config.role_roster, k);
        else experts = assigned;
    } else {
        for (int i = 0; i < k; ++i) {
            const auto& role = roles[static_cast<std::size_t>(i) % roles.size()];
            experts.push_back({i, role, role_preamble(role)});
        }
    }
    std::vector<std::string> opinions;
    for (const auto& e : experts) {
        opinions.push_back(ctx.ask(1, e,
                                   fmt::format("You are consulted as the {}. Give your expert assessment. {}",
                                               e.role_name, answer_instruction(ctx.sample()))));
    }
    const std::string final_answer = ctx.ask(
        1, meta,
        "Expert opinions:\n" + peer_lines(ctx, experts, opinions) +
            "Weigh each opinion by how relevant the expert's specialty is to the findings (reconciliation weights), "
            "resolve the disagreements, and give the final answer. " +
            answer_instruction(ctx.sample()));
    return {final_answer, Termination::completed};
}

bool approves(std::string_view reply) {
    const auto k = first_keyword(reply, {"APPROVE", "REVISE"});
    return k && *k == 0;
}

Outcome medagents(RunContext& ctx, const std::vector<AgentSpec>& experts, int max_rounds) {
    const std::size_t k = experts.size();
    const AgentSpec synthesizer = hub(static_cast<int>(k), "Report Synthesizer");
    const std::string vote_line =
        "On the last line, vote APPROVE or REVISE: APPROVE if you consider the case settled, REVISE otherwise.";

    std::vector<std::string> analyses(k);
    bool all_approve = true;
    for (std::size_t i = 0; i < k; ++i) {
        analyses[i] = ctx.ask(0, experts[i],
                              fmt::format("You are panelist {} of {}. Analyze the case from your specialty. {} {}", i + 1,
                                          k, answer_instruction(ctx.sample()), vote_line));
        all_approve = all_approve && approves(analyses[i]);
    }
    std::string report = ctx.ask(0, synthesizer,
                                 "Expert analyses:\n" + peer_lines(ctx, experts, analyses) +
                                     "Synthesize them into one report with a single conclusion. " +
                                     answer_instruction(ctx.sample()));
    if (all_approve) return {report, Termination::completed};

    for (int r = 1; r <= max_rounds; ++r) {
        std::vector<std::string> votes(k);
        bool unanimous = true;
        for (std::size_t i = 0; i < k; ++i) {
            votes[i] = ctx.ask(r, experts[i],
                               fmt::format("You are panelist {} of {}. Current report:\n{}\nReview the report. State any "
                                           "objection in one sentence. {}",
                                           i + 1, k, brief(ctx, report), vote_line));
            unanimous = unanimous && approves(votes[i]);
        }
        report = ctx.ask(r, synthesizer,
                         "Current report:\n" + brief(ctx, report) + "\nPanel votes:\n" +
                             peer_lines(ctx, experts, votes) +
                             "Revise the report to address every objection (or finalize it if all approve). " +
                             answer_instruction(ctx.sample()));
        if (unanimous) return {report, Termination::completed};
    }
    return {report, Termination::round_limit};
}

Outcome colacare(RunContext& ctx, const std::vector<AgentSpec>& doctors, int round_offset = 0) {
    const std::size_t k = doctors.size();
    const AgentSpec meta = hub(static_cast<int>(k), "Meta-Doctor");
    std::vector<std::string> reports(k);
    for (std::size_t i = 0; i < k; ++i) {
        reports[i] = ctx.ask(round_offset + 1, doctors[i],
                             "Write your diagnostic report. Anchor every hypothesis to a specific visual anomaly in the "
                             "image. " + answer_instruction(ctx.sample()));
    }
    const std::string synthesis = ctx.ask(round_offset + 1, meta,
                                          "Doctor reports on the shared board:\n" + peer_lines(ctx, doctors, reports) +
                                              "Synthesize them into one diagnosis. " + answer_instruction(ctx.sample()));
    const std::string check = ctx.ask(round_offset + 1, meta,
                                      "Synthesis:\n" + brief(ctx, synthesis) + "\nDoctor reports:\n" +
                                          peer_lines(ctx, doctors, reports) +
                                          "Compare each report with the synthesis. Reply CONFLICT if any report "
                                          "contradicts it, otherwise reply AGREE.");
    const auto verdict = first_keyword(check, {"CONFLICT", "AGREE"});
    if (!verdict) ctx.annotate_last("format_failure");
    if (!verdict || *verdict == 1) return {synthesis, Termination::completed};

    std::vector<std::string> rebuttals(k);
    for (std::size_t i = 0; i < k; ++i) {
        rebuttals[i] = ctx.ask(round_offset + 2, doctors[i],
                               "The synthesis on the board:\n" + brief(ctx, synthesis) +
                                   "\nIt conflicts with at least one report. Defend or revise your report, citing the "
                                   "visual evidence. " + answer_instruction(ctx.sample()));
    }
    const std::string final_answer = ctx.ask(round_offset + 2, meta,
                                             "Rebuttals:\n" + peer_lines(ctx, doctors, rebuttals) +
                                                 "Resolve the conflict and give the final diagnosis. " +
                                                 answer_instruction(ctx.sample()));
    return {final_answer, Termination::completed};
}

Outcome mdagents(RunContext& ctx, const TopologyConfig& config, const std::vector<AgentSpec>& agents) {
    const std::string reply = ctx.ask(0, hub(static_cast<int>(agents.size()), "Triage Coordinator"),
                                      "Classify the complexity of this case as LOW, MODERATE, or HIGH. Reply with one "
                                      "word.");
    const auto level = first_keyword(reply, {"LOW", "MODERATE", "HIGH"});
    if (!level) ctx.annotate_last("format_failure");
    const std::size_t route = level.value_or(1);
    static constexpr std::string_view kRoutes[] = {"low", "moderate", "high"};
    ctx.result().topology.extra["route"] = std::string(kRoutes[route]);
    if (route == 0) return direct(ctx, agents.front(), false);
    if (route == 1) return debate(ctx, agents, config.num_rounds);
    return colacare(ctx, agents);
}

Outcome mdteamgpt(RunContext& ctx, const std::vector<AgentSpec>& specialists, int rounds) {
    const std::size_t a = specialists.size();
    ExperienceStore local;
    ExperienceStore& store = ctx.options().store ? *ctx.options().store : local;
    const auto prior = store.retrieve(ctx.sample().question_text);
    const std::string experience = prior ? "Relevant prior experience: " + prior->reflection_text + "\n" : std::string{};

    const AgentSpec summarizer = hub(static_cast<int>(a), "Residual Summarizer");
    const AgentSpec chief = hub(static_cast<int>(a) + 1, "Chief Physician");
    std::string residual;
    for (int r = 1; r <= rounds; ++r) {
        std::vector<std::string> opinions(a);
        for (std::size_t i = 0; i < a; ++i) {
            const std::string instruction =
                experience +
                (r == 1 ? std::string("Give your specialist opinion. ")
                        : fmt::format("Residual summary after round {}:\n{}\nPeer-review the summary and give your "
                                      "updated opinion. ",
                                      r - 1, brief(ctx, residual))) +
                answer_instruction(ctx.sample());
            opinions[i] = ctx.ask(r, specialists[i], instruction);
        }
        residual = ctx.ask(r, summarizer,
                           "Specialist opinions:\n" + peer_lines(ctx, specialists, opinions) +
                               (r > 1 ? "Previous residual summary: " + brief(ctx, residual) + "\n" : std::string{}) +
                               "Summarize the consensus so far and the residual disagreements.");
    }
    const std::string final_answer = ctx.ask(rounds, chief,
                                             "Residual summary of the team discussion:\n" + brief(ctx, residual) +
                                                 "\nAs chief physician, give the final answer. " +
                                                 answer_instruction(ctx.sample()));
    const std::string reflection = ctx.ask(rounds, chief,
                                           "Final answer: " + brief(ctx, final_answer) +
                                               "\nWrite a short reflection on this case that would help the team on "
                                               "similar future cases.");
    store.append({short_digest(ctx.sample().question_text), reflection});
    return {final_answer, Termination::completed};
}

}  // namespace

Outcome run_recipe(RunContext& ctx, const TopologyConfig& config, const std::vector<AgentSpec>& agents) {
    switch (config.method) {
        case Method::single: return direct(ctx, agents.front(), false);
        case Method::cot: return direct(ctx, agents.front(), true);
        case Method::self_consistency: return self_consistency(ctx, agents, config.num_agents);
        case Method::debate: return debate(ctx, agents, config.num_rounds);
        case Method::discussion: return discussion(ctx, agents, config.num_rounds);
        case Method::reconcile: return reconcile(ctx, agents, config.num_rounds);
        case Method::dylan: return dylan(ctx, agents, config.num_rounds);
        case Method::conversational: return conversational(ctx, config, agents);
        case Method::meta_prompting: return meta_prompting(ctx, config, agents, config.num_agents);
        case Method::medagents: return medagents(ctx, agents, config.num_rounds);
        case Method::mdagents: return mdagents(ctx, config, agents);
        case Method::mdteamgpt: return mdteamgpt(ctx, agents, config.num_rounds);
        case Method::colacare: return colacare(ctx, agents);
    }
    return {"", Termination::protocol_error};
}

}  // namespace masorch::topology::detail
