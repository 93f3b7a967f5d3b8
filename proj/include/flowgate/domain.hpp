#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "flowgate/errors.hpp"

namespace flowgate {

// Insertion-ordered JSON everywhere: file outputs must re-serialize
// byte-identically across runs.
using json = nlohmann::ordered_json;

struct SamplingParams {
    double temperature = 0.7;
    int max_tokens = 2048;
};

struct TaskSpec {
    std::string id;
    std::string question;
    std::optional<std::string> gold_answer;
    std::string domain_tag = "math"; // "math" | "code" | free-form
};

struct RoleSpec {
    std::string name;
    std::string instructions;
};

// A finalized (post-gate) message as observed by one agent.
struct KnowledgeEntry {
    std::string source_role;
    std::string content;
};

struct AgentSpec {
    RoleSpec role;
    std::string backend_id;
    SamplingParams sampling;
    bool is_decision = false; // exactly one per roster
};

struct AgentState {
    AgentSpec spec;
    std::vector<KnowledgeEntry> knowledge; // append-only within a run segment
};

// A named failure pattern; the unit of retrieval and verification.
// Two embedding keys are kept separately: the trigger condition drives
// retrieval, definition+condition drives dedup.
struct Indicator {
    std::string name;
    std::string definition;
    std::string trigger_condition;
    std::optional<std::string> domain_tag;
    std::optional<std::string> example_error;
    std::optional<std::vector<double>> embedding_condition;
    std::optional<std::vector<double>> embedding_dedup;
};

// One auditor evaluation of one candidate against one indicator.
struct Verdict {
    std::string indicator_name;
    bool violated = false;
    std::string rationale; // actionable diagnostic (suggestion + auditor's note)
    std::map<std::string, std::string> raw_fields;
};

struct FeedbackItem {
    std::string indicator_name;
    std::string rationale;
    std::string suggestion;
};

// error_state is true iff feedback is non-empty (zero-tolerance aggregation).
struct AggregateVerdict {
    bool error_state = false;
    std::vector<FeedbackItem> feedback;
};

enum class GateStatus { Passed, Rejected };

struct GateIteration {
    std::string candidate;
    std::vector<std::string> active_indicators; // retrieval-rank order
    AggregateVerdict aggregate;
};

struct GateOutcome {
    GateStatus status = GateStatus::Rejected;
    std::optional<int> accepted_iteration; // present iff Passed
    std::vector<GateIteration> history;    // one entry per scrutiny round

    const std::string& accepted_text() const; // throws ContractError unless Passed
};

struct FallbackEvent {
    int step_index = 0;
    std::string reason;
};

struct TrajectoryStep {
    std::string role_name;
    GateOutcome outcome;
};

struct Trajectory {
    TaskSpec task;
    std::vector<TrajectoryStep> steps; // final segment only; a reset discards steps
    std::vector<FallbackEvent> fallback_events;
    std::optional<std::string> final_answer;
};

// All runtime knobs. Field defaults are the reference operating point.
struct RunConfig {
    int t_max = 3;           // max regenerations per intercepted output
    int k_act = 5;           // retrieved indicators per scrutiny round
    int k_dedup = 20;        // neighbors consulted by the dedup gate
    int gamma = 1;           // minimum surviving messages before fallback
    int max_chat_turns = 6;  // per run segment
    bool zero_shot = false;  // use the bundled general indicator, no pool
    int reset_budget = 1;    // global fallbacks allowed per task
    int embedding_dim = 8;
    bool scrutiny = true;    // off = plain pass-through (no rectification at all)

    std::string rectifier_backend = "rectifier";
    std::string teacher_backend = "teacher";
    std::string dedup_backend = "dedup";
    SamplingParams rectifier_sampling{0.0, 1024};
    SamplingParams selector_sampling{0.0, 64};
    int eval_parallelism = 1; // per-candidate indicator evaluations in flight
    bool fail_closed = false; // unparseable auditor output counts as violation
    bool mine_decision_agent = false;
    std::string math_auditor_template; // empty = bundled default
    std::string code_auditor_template;

    void validate() const; // throws ConfigError on out-of-range knobs
};

// |a ∩ b| / |a ∪ b|; both-empty is defined as 1.0.
double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

// u·v / (|u||v|), clamped to [-1, 1]. Throws DimensionError on size mismatch,
// ContractError on a zero-norm input.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

// Canonical form for exact-match grading: innermost boxed{...} content if
// present, whitespace runs collapsed, trailing periods stripped.
std::string normalize_answer(std::string_view raw);

// JSON round-trip for trajectory files and reports.
void to_json(json& j, const Verdict& v);
void from_json(const json& j, Verdict& v);
void to_json(json& j, const FeedbackItem& f);
void from_json(const json& j, FeedbackItem& f);
void to_json(json& j, const AggregateVerdict& a);
void from_json(const json& j, AggregateVerdict& a);
void to_json(json& j, const GateIteration& it);
void from_json(const json& j, GateIteration& it);
void to_json(json& j, const GateOutcome& o);
void from_json(const json& j, GateOutcome& o);
void to_json(json& j, const TaskSpec& t);
void from_json(const json& j, TaskSpec& t);
void to_json(json& j, const Trajectory& t);
void from_json(const json& j, Trajectory& t);

} // namespace flowgate
