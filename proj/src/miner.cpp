#include "flowgate/miner.hpp"

#include <cctype>
#include <fstream>

#include "flowgate/logging.hpp"
#include "flowgate/prompts.hpp"
#include "json_scan.hpp"

namespace flowgate {

namespace {

std::string strip_decoration(const std::string& s) {
    std::size_t b = 0, e = s.size();
    auto skip = [&](char c) {
        return std::isspace(static_cast<unsigned char>(c)) || c == '`' || c == '"' || c == '\'';
    };
    while (b < e && skip(s[b])) ++b;
    while (e > b && skip(s[e - 1])) --e;
    return s.substr(b, e - b);
}

// Teacher output is told to double-escape backslashes inside JSON strings;
// after JSON decoding that leaves doubled backslashes, collapsed here once.
std::string unescape_latex(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\' && i + 1 < s.size() && s[i + 1] == '\\') {
            out.push_back('\\');
            ++i;
        } else {
            out.push_back(s[i]);
        }
    }
    return out;
}

std::string to_upper_snake(const std::string& s) {
    std::string out;
    bool last_underscore = false;
    for (char c : s) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
            last_underscore = false;
        } else if (!out.empty() && !last_underscore) {
            out.push_back('_');
            last_underscore = true;
        }
    }
    while (!out.empty() && out.back() == '_') out.pop_back();
    return out;
}

std::string step_output_text(const TrajectoryStep& step) {
    if (step.outcome.history.empty()) return "";
    return step.outcome.history.back().candidate;
}

std::optional<std::string> json_string_field(const json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_string()) return std::nullopt;
    return j.at(key).get<std::string>();
}

} // namespace

Miner::Miner(const BackendRegistry& registry, const RunConfig& config)
    : registry_(registry), config_(config) {}

std::vector<Trajectory> Miner::collect_failures(const std::vector<TaskSpec>& dataset,
                                                const std::vector<AgentSpec>& roster,
                                                const RoutingPolicy& policy) const {
    RunConfig plain = config_;
    plain.scrutiny = false; // roll-outs are ungated while mining
    const Runtime runtime(registry_, plain);

    std::vector<Trajectory> failures;
    for (const auto& task : dataset) {
        if (!task.gold_answer)
            throw ConfigError("task '" + task.id + "' has no gold answer; mining needs one");
        Trajectory trajectory;
        try {
            trajectory = runtime.run_task(task, roster, policy, nullptr);
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            log_warn("skipping task '" + task.id + "' during failure collection: " + e.what());
            continue;
        }
        const bool wrong = !trajectory.final_answer ||
                           normalize_answer(*trajectory.final_answer) !=
                               normalize_answer(*task.gold_answer);
        if (wrong) failures.push_back(std::move(trajectory));
    }
    return failures;
}

MineCallResult Miner::mine_indicators(const Trajectory& failure, std::size_t step_index) const {
    if (!failure.task.gold_answer)
        throw ContractError("mine_indicators needs a trajectory with a gold answer");
    if (step_index >= failure.steps.size())
        throw ContractError("step index " + std::to_string(step_index) +
                            " out of range for trajectory with " +
                            std::to_string(failure.steps.size()) + " steps");

    const TrajectoryStep& step = failure.steps[step_index];
    const std::string prompt = prompts::render_template(
        prompts::kTeacher, {{"problem", failure.task.question},
                            {"solution", *failure.task.gold_answer},
                            {"agent_role", step.role_name},
                            {"output", step_output_text(step)}});

    MineCallResult result;
    auto parse_reply = [&](const std::string& reply) -> bool {
        if (strip_decoration(reply) == "NO_ERROR") return true; // nothing to mine
        const auto arr = detail::extract_json_array(reply);
        if (!arr) return false;
        for (const auto& item : *arr) {
            if (!item.is_object()) {
                ++result.parse_failures;
                log_warn("teacher emitted a non-object entry for task '" + failure.task.id +
                         "'; counted as parse failure");
                continue;
            }
            const auto name = json_string_field(item, "name");
            const auto definition = json_string_field(item, "detailed_definition");
            std::optional<std::string> trigger;
            if (item.contains("evaluator_prompt") && item.at("evaluator_prompt").is_object())
                trigger = json_string_field(item.at("evaluator_prompt"), "trigger_condition");
            if (!trigger) trigger = json_string_field(item, "trigger_condition");
            if (!name || !definition || !trigger || name->empty() || definition->empty() ||
                trigger->empty()) {
                ++result.parse_failures;
                log_warn("teacher candidate for task '" + failure.task.id +
                         "' is missing name/definition/trigger; counted as parse failure");
                continue;
            }
            if (static_cast<int>(result.candidates.size()) >= kMaxCandidatesPerCall) {
                ++result.overflow_dropped;
                continue;
            }
            Indicator ind;
            const std::string normalized = to_upper_snake(*name);
            if (normalized != *name)
                log_warn("teacher name '" + *name + "' normalized to '" + normalized + "'");
            ind.name = normalized;
            ind.definition = unescape_latex(*definition);
            ind.trigger_condition = unescape_latex(*trigger);
            if (const auto tag = json_string_field(item, "domain_tag")) ind.domain_tag = *tag;
            if (const auto example = json_string_field(item, "example_error"))
                ind.example_error = unescape_latex(*example);
            result.candidates.push_back(
                MinedCandidate{std::move(ind), failure.task.id, step.role_name});
        }
        return true;
    };

    const std::string first =
        registry_.generate(config_.teacher_backend, {user_msg(prompt)}, config_.rectifier_sampling);
    if (parse_reply(first)) {
        if (result.overflow_dropped > 0)
            log_warn("teacher returned more than " + std::to_string(kMaxCandidatesPerCall) +
                     " candidates for task '" + failure.task.id + "'; dropped " +
                     std::to_string(result.overflow_dropped));
        return result;
    }

    const std::string second = registry_.generate(
        config_.teacher_backend,
        {user_msg(prompt), assistant_msg(first), user_msg(std::string(prompts::kReaskNudge))},
        config_.rectifier_sampling);
    result = MineCallResult{};
    if (parse_reply(second)) {
        if (result.overflow_dropped > 0)
            log_warn("teacher returned more than " + std::to_string(kMaxCandidatesPerCall) +
                     " candidates for task '" + failure.task.id + "'; dropped " +
                     std::to_string(result.overflow_dropped));
        return result;
    }

    log_warn("teacher reply for task '" + failure.task.id + "' step " +
             std::to_string(step_index) + " was unparseable twice");
    return MineCallResult{{}, 1, 0};
}

PoolStats Miner::build_pool(const std::vector<TaskSpec>& dataset,
                            const std::vector<AgentSpec>& roster, const RoutingPolicy& policy,
                            const std::string& pool_out_path,
                            const std::string& build_log_path) const {
    std::string decision_role;
    for (const auto& spec : roster)
        if (spec.is_decision) decision_role = spec.role.name;

    PoolStats stats;
    stats.tasks = static_cast<int>(dataset.size());

    const std::vector<Trajectory> failures = collect_failures(dataset, roster, policy);
    stats.failures = static_cast<int>(failures.size());

    // truncate up front so a rebuild is byte-identical; append per insert so
    // an interrupted sweep still leaves a valid line-delimited file
    std::ofstream pool_out(pool_out_path, std::ios::trunc);
    if (!pool_out) throw Error("cannot write pool file '" + pool_out_path + "'");
    std::ofstream log_out;
    if (!build_log_path.empty()) {
        log_out.open(build_log_path, std::ios::trunc);
        if (!log_out) throw Error("cannot write build log '" + build_log_path + "'");
    }
    auto log_decision = [&](const MinedCandidate& cand, const std::string& decision) {
        if (!log_out.is_open()) return;
        log_out << json{{"task", cand.source_task_id},
                        {"role", cand.source_role},
                        {"name", cand.indicator.name},
                        {"decision", decision}}
                       .dump()
                << "\n";
        log_out.flush();
    };

    IndicatorPool pool(config_.embedding_dim);
    for (const auto& failure : failures) {
        for (std::size_t i = 0; i < failure.steps.size(); ++i) {
            if (!config_.mine_decision_agent && failure.steps[i].role_name == decision_role)
                continue; // the decider's error is typically derivative
            MineCallResult mined = mine_indicators(failure, i);
            stats.candidates += static_cast<int>(mined.candidates.size()) + mined.parse_failures;
            stats.parse_failures += mined.parse_failures;
            for (auto& cand : mined.candidates) {
                const bool inserted =
                    insert_with_dedup(pool, cand.indicator, registry_, config_.dedup_backend,
                                      config_.k_dedup);
                if (inserted) {
                    ++stats.inserted;
                    pool_out << IndicatorPool::indicator_to_json(pool.entries().back()).dump()
                             << "\n";
                    pool_out.flush();
                    log_decision(cand, "inserted");
                } else {
                    ++stats.duplicates_dropped;
                    log_decision(cand, "duplicate");
                }
            }
        }
    }
    return stats;
}

} // namespace flowgate
