#include "flowgate/runtime.hpp"

#include <algorithm>
#include <set>

#include "flowgate/logging.hpp"
#include "flowgate/prompts.hpp"

namespace flowgate {

namespace {

std::string trim_copy(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

const AgentSpec* find_role(const std::vector<AgentSpec>& roster, const std::string& name) {
    for (const auto& spec : roster)
        if (spec.role.name == name) return &spec;
    return nullptr;
}

// Exact name match first, then a unique substring occurrence.
std::optional<std::string> match_role_name(const std::string& reply,
                                           const std::vector<AgentSpec>& roster) {
    const std::string trimmed = trim_copy(reply);
    for (const auto& spec : roster)
        if (spec.role.name == trimmed) return spec.role.name;
    std::optional<std::string> unique;
    for (const auto& spec : roster) {
        if (trimmed.find(spec.role.name) != std::string::npos) {
            if (unique) return std::nullopt; // ambiguous
            unique = spec.role.name;
        }
    }
    return unique;
}

std::string selector_history_text(const std::vector<TurnRecord>& turns) {
    std::string out;
    for (const auto& turn : turns) {
        if (!turn.finalized) continue; // rejected attempts stay hidden
        if (!out.empty()) out += "\n\n";
        out += "[" + turn.role_name + "]: " + *turn.finalized;
    }
    return out.empty() ? std::string("(no messages yet)") : out;
}

std::string selector_roster_text(const std::vector<AgentSpec>& roster) {
    std::string out;
    for (const auto& spec : roster) {
        if (!out.empty()) out += "\n";
        out += "- " + spec.role.name + ": " + spec.role.instructions;
    }
    return out;
}

} // namespace

Runtime::Runtime(const BackendRegistry& registry, const RunConfig& config)
    : registry_(registry), config_(config), gate_(registry, config) {
    config_.validate();
}

std::optional<std::string> Runtime::select_next(const RoutingPolicy& policy, const TaskSpec& task,
                                                const std::vector<TurnRecord>& turns,
                                                const std::vector<AgentSpec>& roster) const {
    if (static_cast<int>(turns.size()) >= config_.max_chat_turns) return std::nullopt;
    for (const auto& turn : turns) {
        if (!turn.finalized) continue;
        const AgentSpec* spec = find_role(roster, turn.role_name);
        if (spec && spec->is_decision) return std::nullopt; // conclusion already delivered
    }

    if (const auto* scripted = std::get_if<ScriptedRoute>(&policy)) {
        if (turns.size() >= scripted->sequence.size()) return std::nullopt;
        return scripted->sequence[turns.size()];
    }

    const auto& selector = std::get<SelectorRoute>(policy);
    const std::string_view tmpl =
        selector.template_text.empty() ? prompts::kSelector : selector.template_text;
    const std::string prompt =
        prompts::render_template(tmpl, {{"roster", selector_roster_text(roster)},
                                        {"question", task.question},
                                        {"history", selector_history_text(turns)}});

    const std::string first =
        registry_.generate(selector.backend_id, {user_msg(prompt)}, config_.selector_sampling);
    if (auto name = match_role_name(first, roster)) return name;

    std::string valid_names;
    for (const auto& spec : roster) {
        if (!valid_names.empty()) valid_names += ", ";
        valid_names += spec.role.name;
    }
    const std::string second = registry_.generate(
        selector.backend_id,
        {user_msg(prompt), assistant_msg(first),
         user_msg("That is not a valid role name. Valid names: " + valid_names +
                  ". Reply with one of them and nothing else.")},
        config_.selector_sampling);
    if (auto name = match_role_name(second, roster)) return name;

    const std::string& fallback = roster[turns.size() % roster.size()].role.name;
    log_warn("selector named an unknown role twice ('" + trim_copy(first) + "', '" +
             trim_copy(second) + "'); falling back to round-robin pick '" + fallback + "'");
    return fallback;
}

std::string Runtime::agent_generate(const AgentState& agent, const TaskSpec& task) const {
    return registry_.generate(agent.spec.backend_id, prompts::render_agent_context(agent, task),
                              agent.spec.sampling);
}

void Runtime::broadcast(const std::string& finalized, const RoleSpec& source,
                        std::vector<AgentState>& agents) {
    for (auto& agent : agents) {
        if (agent.spec.role.name == source.name) continue;
        agent.knowledge.push_back(KnowledgeEntry{source.name, finalized});
    }
}

void Runtime::validate_setup(const TaskSpec& task, const std::vector<AgentSpec>& roster,
                             const RoutingPolicy& policy, const IndicatorPool* pool) const {
    if (task.id.empty()) throw ConfigError("task id must be non-empty");
    if (task.question.empty()) throw ConfigError("task '" + task.id + "' has an empty question");
    if (roster.empty()) throw ConfigError("roster must contain at least one agent");

    std::set<std::string> names;
    int decision_count = 0;
    for (const auto& spec : roster) {
        if (spec.role.name.empty()) throw ConfigError("agent role name must be non-empty");
        if (!names.insert(spec.role.name).second)
            throw ConfigError("duplicate role name '" + spec.role.name + "' in roster");
        if (spec.role.instructions.empty())
            throw ConfigError("role '" + spec.role.name + "' has empty instructions");
        if (!registry_.has_chat(spec.backend_id))
            throw ConfigError("role '" + spec.role.name + "' is bound to unknown backend '" +
                              spec.backend_id + "'");
        if (spec.is_decision) ++decision_count;
    }
    if (decision_count != 1)
        throw ConfigError("exactly one decision agent required, roster has " +
                          std::to_string(decision_count));

    if (const auto* scripted = std::get_if<ScriptedRoute>(&policy)) {
        if (scripted->sequence.empty())
            throw ConfigError("scripted routing sequence must be non-empty");
        for (const auto& name : scripted->sequence)
            if (!names.count(name))
                throw ConfigError("scripted routing names unknown role '" + name + "'");
    } else {
        const auto& selector = std::get<SelectorRoute>(policy);
        if (!registry_.has_chat(selector.backend_id))
            throw ConfigError("selector backend '" + selector.backend_id + "' is not registered");
    }

    if (config_.scrutiny) {
        if (config_.zero_shot) {
            if (task.domain_tag != "math" && task.domain_tag != "code")
                throw ConfigError("zero-shot mode has no general indicator for domain '" +
                                  task.domain_tag + "'");
        } else if (!pool || pool->empty()) {
            throw ConfigError("a non-empty indicator pool is required unless zero_shot is set");
        }
    }
}

Trajectory Runtime::run_task(const TaskSpec& task, const std::vector<AgentSpec>& roster,
                             const RoutingPolicy& policy, IndicatorPool* pool) const {
    validate_setup(task, roster, policy, pool);
    if (pool && config_.scrutiny && !config_.zero_shot)
        pool->ensure_condition_embeddings(registry_.embedding());

    std::string decision_role;
    for (const auto& spec : roster)
        if (spec.is_decision) decision_role = spec.role.name;

    std::vector<FallbackEvent> fallback_events;
    std::vector<TrajectoryStep> steps;
    int resets_used = 0;

    for (;;) {
        steps.clear(); // a reset discards the aborted segment
        std::vector<AgentState> states;
        states.reserve(roster.size());
        for (const auto& spec : roster) states.push_back(AgentState{spec, {}});
        std::vector<TurnRecord> turns;

        while (auto role = select_next(policy, task, turns, roster)) {
            AgentState* agent = nullptr;
            for (auto& s : states)
                if (s.spec.role.name == *role) agent = &s;
            if (!agent) throw ConfigError("routing selected unknown role '" + *role + "'");

            const std::string candidate = agent_generate(*agent, task);
            GateOutcome outcome = gate_.rectify_or_reject(*agent, candidate, task, pool);
            const bool passed = outcome.status == GateStatus::Passed;
            steps.push_back(TrajectoryStep{*role, std::move(outcome)});

            if (passed) {
                const std::string& finalized = steps.back().outcome.accepted_text();
                turns.push_back(TurnRecord{*role, finalized});
                broadcast(finalized, agent->spec.role, states);
            } else {
                turns.push_back(TurnRecord{*role, std::nullopt});
            }
        }

        int valid_messages = 0;
        for (const auto& turn : turns)
            if (turn.finalized && turn.role_name != decision_role) ++valid_messages;

        const FallbackDecision decision =
            check_fallback(valid_messages, config_.gamma, resets_used, config_.reset_budget);
        if (decision == FallbackDecision::Reset) {
            fallback_events.push_back(FallbackEvent{
                static_cast<int>(steps.size()),
                "segment kept " + std::to_string(valid_messages) +
                    " valid messages, below threshold gamma=" + std::to_string(config_.gamma) +
                    "; system reset " + std::to_string(resets_used + 1) + " of " +
                    std::to_string(config_.reset_budget)});
            ++resets_used;
            continue;
        }
        if (decision == FallbackDecision::BudgetExhausted)
            log_warn("task '" + task.id + "': surviving messages below gamma with no reset " +
                     "budget left; proceeding with what survives");
        break;
    }

    Trajectory trajectory;
    trajectory.task = task;
    trajectory.steps = std::move(steps);
    trajectory.fallback_events = std::move(fallback_events);
    for (auto it = trajectory.steps.rbegin(); it != trajectory.steps.rend(); ++it) {
        if (it->role_name == decision_role && it->outcome.status == GateStatus::Passed) {
            trajectory.final_answer = it->outcome.accepted_text();
            break;
        }
    }
    return trajectory;
}

} // namespace flowgate
