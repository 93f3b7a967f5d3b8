#pragma once

#include <string>

#include "flowgate/backends.hpp"
#include "flowgate/domain.hpp"
#include "flowgate/indicator_pool.hpp"
#include "flowgate/rectifier.hpp"

namespace flowgate {

enum class FallbackDecision { Proceed, Reset, BudgetExhausted };

const char* fallback_decision_name(FallbackDecision decision);

// Reset fires while the surviving message count is below gamma and budget
// remains; an under-threshold segment with no budget left is BudgetExhausted.
FallbackDecision check_fallback(int valid_message_count, int gamma, int resets_used,
                                int reset_budget);

// The Pass/Retry/Reject loop around one intercepted output. Iteration 0 is
// the initial candidate; t_max bounds regenerations, so at most t_max+1
// scrutiny rounds and t_max regenerations happen per output.
class Gate {
public:
    Gate(const BackendRegistry& registry, const RunConfig& config);

    // pool may be null only in zero-shot mode (the bundled general indicator
    // is the whole active set then). The agent's knowledge is read, never
    // written. Backend failures propagate with iteration context attached.
    GateOutcome rectify_or_reject(const AgentState& agent, const std::string& initial_candidate,
                                  const TaskSpec& task, const IndicatorPool* pool) const;

private:
    std::vector<RetrievalHit> active_indicators(const AgentState& agent,
                                                const std::string& candidate,
                                                const TaskSpec& task,
                                                const IndicatorPool* pool) const;

    const BackendRegistry& registry_;
    RunConfig config_;
    Rectifier rectifier_;
};

} // namespace flowgate
