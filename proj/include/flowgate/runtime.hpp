#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "flowgate/backends.hpp"
#include "flowgate/domain.hpp"
#include "flowgate/gate.hpp"
#include "flowgate/indicator_pool.hpp"

namespace flowgate {

struct ScriptedRoute {
    std::vector<std::string> sequence; // role names, consumed one per turn
};

struct SelectorRoute {
    std::string backend_id;
    std::string template_text; // empty = bundled selector template
};

using RoutingPolicy = std::variant<ScriptedRoute, SelectorRoute>;

// One chat turn. A rejected turn consumes its slot but leaves no finalized
// text; only finalized turns are visible to the selector and to broadcast.
struct TurnRecord {
    std::string role_name;
    std::optional<std::string> finalized;
};

// Turn-taking MAS execution with gated broadcast and global fallback.
// One run_task call is single-threaded; many calls may run concurrently over
// a shared pre-embedded pool and thread-safe backends.
class Runtime {
public:
    Runtime(const BackendRegistry& registry, const RunConfig& config);

    // Next speaker, or nullopt to terminate (decision agent has spoken, turn
    // budget exhausted, or a scripted sequence ran out).
    std::optional<std::string> select_next(const RoutingPolicy& policy, const TaskSpec& task,
                                           const std::vector<TurnRecord>& turns,
                                           const std::vector<AgentSpec>& roster) const;

    std::string agent_generate(const AgentState& agent, const TaskSpec& task) const;

    // Appends the finalized message to every agent's knowledge except the
    // speaker's own (its attempts already live in its generation context).
    static void broadcast(const std::string& finalized, const RoleSpec& source,
                          std::vector<AgentState>& agents);

    // Full loop: select -> generate -> gate -> broadcast, then the fallback
    // check; a reset clears agent knowledge, turns and steps, and reruns.
    // Configuration problems surface before any backend call.
    Trajectory run_task(const TaskSpec& task, const std::vector<AgentSpec>& roster,
                        const RoutingPolicy& policy, IndicatorPool* pool) const;

    const RunConfig& config() const { return config_; }

private:
    void validate_setup(const TaskSpec& task, const std::vector<AgentSpec>& roster,
                        const RoutingPolicy& policy, const IndicatorPool* pool) const;

    const BackendRegistry& registry_;
    RunConfig config_;
    Gate gate_;
};

} // namespace flowgate
