#include "flowgate/domain.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace flowgate {

const std::string& GateOutcome::accepted_text() const {
    if (status != GateStatus::Passed || history.empty())
        throw ContractError("accepted_text() called on a non-Passed gate outcome");
    return history.back().candidate;
}

void RunConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(std::string("invalid run config: ") + what);
    };
    require(t_max >= 0, "t_max must be >= 0");
    require(k_act > 0, "k_act must be positive");
    require(k_dedup > 0, "k_dedup must be positive");
    require(gamma >= 0, "gamma must be >= 0");
    require(max_chat_turns > 0, "max_chat_turns must be positive");
    require(reset_budget >= 0, "reset_budget must be >= 0");
    require(embedding_dim > 0, "embedding_dim must be positive");
    require(eval_parallelism > 0, "eval_parallelism must be positive");
    require(std::isfinite(rectifier_sampling.temperature) && rectifier_sampling.temperature >= 0,
            "rectifier temperature must be finite and >= 0");
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 1.0; // identical (empty) profiles
    std::size_t intersection = 0;
    for (const auto& x : a)
        if (b.count(x)) ++intersection;
    const std::size_t uni = a.size() + b.size() - intersection;
    return static_cast<double>(intersection) / static_cast<double>(uni);
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size())
        throw DimensionError("cosine_similarity: dimension mismatch (" +
                             std::to_string(u.size()) + " vs " + std::to_string(v.size()) + ")");
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0.0 || nv == 0.0)
        throw ContractError("cosine_similarity: zero-norm input");
    const double cos = dot / (std::sqrt(nu) * std::sqrt(nv));
    return std::clamp(cos, -1.0, 1.0);
}

namespace {

bool is_space(char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
}

// Content of the balanced {...} group following "boxed"; nullopt when absent
// or unbalanced.
std::optional<std::string> boxed_content(std::string_view text) {
    const std::size_t at = text.find("boxed{");
    if (at == std::string_view::npos) return std::nullopt;
    std::size_t i = at + 5; // index of '{'
    int depth = 0;
    const std::size_t open = i;
    for (; i < text.size(); ++i) {
        if (text[i] == '{') {
            ++depth;
        } else if (text[i] == '}') {
            --depth;
            if (depth == 0) return std::string(text.substr(open + 1, i - open - 1));
        }
    }
    return std::nullopt;
}

} // namespace

std::string normalize_answer(std::string_view raw) {
    std::string body(raw);
    // peel nested boxed{} groups down to the innermost one
    while (auto inner = boxed_content(body)) body = *inner;

    std::string collapsed;
    collapsed.reserve(body.size());
    bool pending_space = false;
    for (char c : body) {
        if (is_space(c)) {
            pending_space = !collapsed.empty();
            continue;
        }
        if (pending_space) {
            collapsed.push_back(' ');
            pending_space = false;
        }
        collapsed.push_back(c);
    }
    while (!collapsed.empty() && (collapsed.back() == '.' || collapsed.back() == ' '))
        collapsed.pop_back();
    return collapsed;
}

void to_json(json& j, const Verdict& v) {
    j = json{{"indicator", v.indicator_name}, {"violated", v.violated}, {"rationale", v.rationale}};
    json raw = json::object();
    for (const auto& [k, val] : v.raw_fields) raw[k] = val;
    j["raw_fields"] = std::move(raw);
}

void from_json(const json& j, Verdict& v) {
    j.at("indicator").get_to(v.indicator_name);
    j.at("violated").get_to(v.violated);
    j.at("rationale").get_to(v.rationale);
    v.raw_fields.clear();
    if (j.contains("raw_fields"))
        for (const auto& [k, val] : j.at("raw_fields").items())
            v.raw_fields[k] = val.get<std::string>();
}

void to_json(json& j, const FeedbackItem& f) {
    j = json{{"indicator", f.indicator_name}, {"rationale", f.rationale}, {"suggestion", f.suggestion}};
}

void from_json(const json& j, FeedbackItem& f) {
    j.at("indicator").get_to(f.indicator_name);
    j.at("rationale").get_to(f.rationale);
    j.at("suggestion").get_to(f.suggestion);
}

void to_json(json& j, const AggregateVerdict& a) {
    j = json{{"error_state", a.error_state}, {"feedback", a.feedback}};
}

void from_json(const json& j, AggregateVerdict& a) {
    j.at("error_state").get_to(a.error_state);
    a.feedback = j.at("feedback").get<std::vector<FeedbackItem>>();
}

void to_json(json& j, const GateIteration& it) {
    j = json{{"candidate", it.candidate},
             {"active_indicators", it.active_indicators},
             {"aggregate", it.aggregate}};
}

void from_json(const json& j, GateIteration& it) {
    j.at("candidate").get_to(it.candidate);
    it.active_indicators = j.at("active_indicators").get<std::vector<std::string>>();
    j.at("aggregate").get_to(it.aggregate);
}

void to_json(json& j, const GateOutcome& o) {
    j = json{{"status", o.status == GateStatus::Passed ? "passed" : "rejected"}};
    if (o.accepted_iteration) j["accepted_iteration"] = *o.accepted_iteration;
    j["history"] = o.history;
}

void from_json(const json& j, GateOutcome& o) {
    const std::string status = j.at("status").get<std::string>();
    if (status == "passed")
        o.status = GateStatus::Passed;
    else if (status == "rejected")
        o.status = GateStatus::Rejected;
    else
        throw ParseError("unknown gate status '" + status + "'");
    o.accepted_iteration.reset();
    if (j.contains("accepted_iteration")) o.accepted_iteration = j.at("accepted_iteration").get<int>();
    o.history = j.at("history").get<std::vector<GateIteration>>();
}

void to_json(json& j, const TaskSpec& t) {
    j = json{{"id", t.id}, {"question", t.question}};
    if (t.gold_answer) j["gold_answer"] = *t.gold_answer;
    j["domain_tag"] = t.domain_tag;
}

void from_json(const json& j, TaskSpec& t) {
    j.at("id").get_to(t.id);
    j.at("question").get_to(t.question);
    t.gold_answer.reset();
    if (j.contains("gold_answer") && !j.at("gold_answer").is_null())
        t.gold_answer = j.at("gold_answer").get<std::string>();
    t.domain_tag = j.value("domain_tag", std::string("math"));
}

void to_json(json& j, const Trajectory& t) {
    j = json{{"task", t.task}};
    json steps = json::array();
    for (const auto& s : t.steps) steps.push_back(json{{"role", s.role_name}, {"outcome", s.outcome}});
    j["steps"] = std::move(steps);
    json events = json::array();
    for (const auto& e : t.fallback_events)
        events.push_back(json{{"step_index", e.step_index}, {"reason", e.reason}});
    j["fallback_events"] = std::move(events);
    if (t.final_answer)
        j["final_answer"] = *t.final_answer;
    else
        j["final_answer"] = nullptr;
}

void from_json(const json& j, Trajectory& t) {
    j.at("task").get_to(t.task);
    t.steps.clear();
    for (const auto& s : j.at("steps")) {
        TrajectoryStep step;
        s.at("role").get_to(step.role_name);
        s.at("outcome").get_to(step.outcome);
        t.steps.push_back(std::move(step));
    }
    t.fallback_events.clear();
    for (const auto& e : j.at("fallback_events")) {
        FallbackEvent ev;
        e.at("step_index").get_to(ev.step_index);
        e.at("reason").get_to(ev.reason);
        t.fallback_events.push_back(std::move(ev));
    }
    t.final_answer.reset();
    if (j.contains("final_answer") && !j.at("final_answer").is_null())
        t.final_answer = j.at("final_answer").get<std::string>();
}

} // namespace flowgate
