#pragma once

#include <string>
#include <vector>

#include "flowgate/backends.hpp"
#include "flowgate/domain.hpp"
#include "flowgate/indicator_pool.hpp"
#include "flowgate/runtime.hpp"

namespace flowgate {

struct MinedCandidate {
    Indicator indicator;
    std::string source_task_id;
    std::string source_role;
};

struct MineCallResult {
    std::vector<MinedCandidate> candidates; // capped at kMaxCandidatesPerCall
    int parse_failures = 0;
    int overflow_dropped = 0;
};

struct PoolStats {
    int tasks = 0;
    int failures = 0;
    int candidates = 0; // == inserted + duplicates_dropped + parse_failures
    int inserted = 0;
    int duplicates_dropped = 0;
    int parse_failures = 0;
};

// Offline failure-driven pool construction: plain (ungated) roll-outs,
// teacher mining on wrong answers, dedup-gated insertion.
class Miner {
public:
    static constexpr int kMaxCandidatesPerCall = 5;

    Miner(const BackendRegistry& registry, const RunConfig& config);

    // Plain MAS roll-outs (scrutiny disabled); keeps trajectories whose
    // normalized answer diverges from gold, including missing answers.
    // Backend failures skip the task with a logged record, never abort.
    std::vector<Trajectory> collect_failures(const std::vector<TaskSpec>& dataset,
                                             const std::vector<AgentSpec>& roster,
                                             const RoutingPolicy& policy) const;

    // Teacher pass over one agent step of one failed trajectory. The NO_ERROR
    // sentinel yields no candidates; malformed JSON after one re-ask is
    // recorded as a parse failure.
    MineCallResult mine_indicators(const Trajectory& failure, std::size_t step_index) const;

    // Full sweep. The pool file is appended per insert (a partial file is
    // valid line-delimited JSON); per-candidate decisions go to the build log.
    PoolStats build_pool(const std::vector<TaskSpec>& dataset,
                         const std::vector<AgentSpec>& roster, const RoutingPolicy& policy,
                         const std::string& pool_out_path,
                         const std::string& build_log_path = "") const;

private:
    const BackendRegistry& registry_;
    RunConfig config_;
};

} // namespace flowgate
