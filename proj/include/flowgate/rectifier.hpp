#pragma once

#include <string>
#include <vector>

#include "flowgate/backends.hpp"
#include "flowgate/domain.hpp"
#include "flowgate/indicator_pool.hpp"

namespace flowgate {

struct KeywordSets {
    std::vector<std::string> scenario; // task scenarios, trimmed, non-empty
    std::vector<std::string> action;   // action types proposed by the agent
};

// Per-output scrutiny: keyword extraction, query building, per-indicator
// evaluation and zero-tolerance aggregation. Stateless given the registry;
// safe to share across concurrent runs.
class Rectifier {
public:
    Rectifier(const BackendRegistry& registry, const RunConfig& config);

    // Asks the rectifier model for {"scenario": [...], "action": [...]}.
    // One re-ask on malformed JSON, then degenerate empty sets (logged).
    KeywordSets extract_keywords(const TaskSpec& task, const RoleSpec& role,
                                 const std::string& candidate) const;

    // Embeds scenario then action keywords joined with newlines; both-empty
    // falls back to embedding a fixed generic phrase.
    std::vector<double> build_query(const KeywordSets& keywords) const;

    // One auditor call for one indicator. Malformed output after a re-ask is
    // a non-violation (fail-open) unless configured fail-closed.
    Verdict evaluate_indicator(const std::string& candidate, const TaskSpec& task,
                               const RoleSpec& role, const Indicator& indicator) const;

    // Evaluates every hit; results come back in retrieval-rank order even
    // when evaluations fan out concurrently (eval_parallelism > 1).
    std::vector<Verdict> evaluate_all(const std::string& candidate, const TaskSpec& task,
                                      const RoleSpec& role,
                                      const std::vector<RetrievalHit>& hits) const;

private:
    std::string ask_with_reask(const std::string& prompt, bool& reasked,
                               std::string& first_reply) const;

    const BackendRegistry& registry_;
    RunConfig config_;
};

// Zero-tolerance aggregation: error_state is the OR over violation flags;
// feedback lists exactly the violated verdicts in the given (rank) order.
AggregateVerdict aggregate_verdicts(const std::vector<Verdict>& verdicts);

// Auditor-feedback block sent back to the agent. attempt is 1-based.
// Calling this with a clean aggregate is a contract violation.
std::string render_feedback(const AggregateVerdict& aggregate, int attempt);

} // namespace flowgate
