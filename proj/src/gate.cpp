#include "flowgate/gate.hpp"

#include "flowgate/prompts.hpp"

namespace flowgate {

const char* fallback_decision_name(FallbackDecision decision) {
    switch (decision) {
    case FallbackDecision::Proceed: return "proceed";
    case FallbackDecision::Reset: return "reset";
    case FallbackDecision::BudgetExhausted: return "budget_exhausted";
    }
    return "?";
}

FallbackDecision check_fallback(int valid_message_count, int gamma, int resets_used,
                                int reset_budget) {
    if (valid_message_count >= gamma) return FallbackDecision::Proceed;
    return resets_used < reset_budget ? FallbackDecision::Reset
                                      : FallbackDecision::BudgetExhausted;
}

Gate::Gate(const BackendRegistry& registry, const RunConfig& config)
    : registry_(registry), config_(config), rectifier_(registry, config) {}

std::vector<RetrievalHit> Gate::active_indicators(const AgentState& agent,
                                                  const std::string& candidate,
                                                  const TaskSpec& task,
                                                  const IndicatorPool* pool) const {
    if (config_.zero_shot) {
        // the general indicator always triggers; no retrieval involved
        return {RetrievalHit{general_indicator(task.domain_tag), 1.0, 1, 0}};
    }
    if (!pool || pool->empty())
        throw ContractError("gate needs a non-empty indicator pool unless zero_shot is set");
    const KeywordSets keywords =
        rectifier_.extract_keywords(task, agent.spec.role, candidate);
    const std::vector<double> query = rectifier_.build_query(keywords);
    return pool->retrieve_top_k(query, config_.k_act);
}

GateOutcome Gate::rectify_or_reject(const AgentState& agent, const std::string& initial_candidate,
                                    const TaskSpec& task, const IndicatorPool* pool) const {
    GateOutcome outcome;

    if (!config_.scrutiny) {
        // pass-through mode: no auditing, the initial candidate is final
        outcome.status = GateStatus::Passed;
        outcome.accepted_iteration = 0;
        outcome.history.push_back(GateIteration{initial_candidate, {}, AggregateVerdict{}});
        return outcome;
    }

    std::string candidate = initial_candidate;
    for (int t = 0; t <= config_.t_max; ++t) {
        try {
            const auto hits = active_indicators(agent, candidate, task, pool);
            const auto verdicts =
                rectifier_.evaluate_all(candidate, task, agent.spec.role, hits);
            AggregateVerdict aggregate = aggregate_verdicts(verdicts);

            GateIteration iteration;
            iteration.candidate = candidate;
            for (const auto& hit : hits) iteration.active_indicators.push_back(hit.indicator.name);
            iteration.aggregate = aggregate;
            outcome.history.push_back(std::move(iteration));

            if (!aggregate.error_state) {
                outcome.status = GateStatus::Passed;
                outcome.accepted_iteration = t;
                return outcome;
            }
            if (t == config_.t_max) break; // budget exhausted; discard

            // Retry: regenerate conditioned on this round's feedback only;
            // the previous attempt stays visible as the assistant turn.
            const std::string feedback = render_feedback(aggregate, t + 1);
            std::vector<ChatMessage> messages = prompts::render_agent_context(agent, task);
            messages.push_back(assistant_msg(candidate));
            messages.push_back(user_msg(feedback));
            candidate =
                registry_.generate(agent.spec.backend_id, messages, agent.spec.sampling);
        } catch (const ContractError&) {
            throw;
        } catch (const Error& e) {
            throw BackendError("while gating output of '" + agent.spec.role.name +
                               "' at iteration " + std::to_string(t) + ": " + e.what());
        }
    }

    outcome.status = GateStatus::Rejected;
    return outcome;
}

} // namespace flowgate
