#include "flowgate/rectifier.hpp"

#include <atomic>
#include <thread>

#include "flowgate/logging.hpp"
#include "flowgate/prompts.hpp"
#include "json_scan.hpp"

namespace flowgate {

namespace {

// Query text used when the keyword extractor produced nothing.
constexpr std::string_view kGenericQueryText = "general reasoning step";

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

bool trivial_field(const std::string& s) {
    const std::string t = trim(s);
    return t.empty() || t == "N/A" || t == "n/a";
}

std::optional<std::vector<std::string>> parse_string_list(const json& j, const char* key) {
    if (!j.contains(key)) return std::vector<std::string>{};
    if (!j.at(key).is_array()) return std::nullopt;
    std::vector<std::string> out;
    for (const auto& item : j.at(key)) {
        if (!item.is_string()) return std::nullopt;
        std::string entry = trim(item.get<std::string>());
        if (!entry.empty()) out.push_back(std::move(entry));
    }
    return out;
}

std::optional<KeywordSets> parse_keywords(const std::string& reply) {
    const auto obj = detail::extract_json_object(reply);
    if (!obj) return std::nullopt;
    auto scenario = parse_string_list(*obj, "scenario");
    auto action = parse_string_list(*obj, "action");
    if (!scenario || !action) return std::nullopt;
    return KeywordSets{std::move(*scenario), std::move(*action)};
}

std::string field_as_text(const json& j, const char* key) {
    if (!j.contains(key)) return "";
    const auto& v = j.at(key);
    return v.is_string() ? v.get<std::string>() : v.dump();
}

struct ParsedVerdict {
    bool is_flawed = false;
    std::string evidence_quote, analysis, suggestion, impact_assessment;
};

std::optional<ParsedVerdict> parse_verdict(const std::string& reply) {
    const auto obj = detail::extract_json_object(reply);
    if (!obj || !obj->contains("is_flawed")) return std::nullopt;
    ParsedVerdict parsed;
    const auto& flag = obj->at("is_flawed");
    if (flag.is_boolean()) {
        parsed.is_flawed = flag.get<bool>();
    } else if (flag.is_string()) {
        std::string s = trim(flag.get<std::string>());
        for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (s == "true")
            parsed.is_flawed = true;
        else if (s == "false")
            parsed.is_flawed = false;
        else
            return std::nullopt;
    } else {
        return std::nullopt;
    }
    parsed.evidence_quote = field_as_text(*obj, "evidence_quote");
    parsed.analysis = field_as_text(*obj, "analysis");
    parsed.suggestion = field_as_text(*obj, "suggestion");
    parsed.impact_assessment = field_as_text(*obj, "impact_assessment");
    return parsed;
}

// The actionable diagnostic handed back to the agent: the fix first, the
// auditor's reasoning attached.
std::string compose_rationale(const ParsedVerdict& parsed) {
    const bool has_suggestion = !trivial_field(parsed.suggestion);
    const bool has_analysis = !trivial_field(parsed.analysis);
    if (has_suggestion && has_analysis)
        return parsed.suggestion + "\n\n(Auditor's Note: " + parsed.analysis + ")";
    if (has_suggestion) return parsed.suggestion;
    if (has_analysis) return parsed.analysis;
    return "";
}

} // namespace

Rectifier::Rectifier(const BackendRegistry& registry, const RunConfig& config)
    : registry_(registry), config_(config) {}

KeywordSets Rectifier::extract_keywords(const TaskSpec& task, const RoleSpec& role,
                                        const std::string& candidate) const {
    const std::string prompt = prompts::render_template(
        prompts::kKeywordExtraction,
        {{"task", task.question}, {"role", role.name}, {"agent_output", candidate}});

    const std::string first =
        registry_.generate(config_.rectifier_backend, {user_msg(prompt)}, config_.rectifier_sampling);
    if (auto parsed = parse_keywords(first)) return *parsed;

    const std::string second = registry_.generate(
        config_.rectifier_backend,
        {user_msg(prompt), assistant_msg(first), user_msg(std::string(prompts::kReaskNudge))},
        config_.rectifier_sampling);
    if (auto parsed = parse_keywords(second)) return *parsed;

    log_warn("keyword extraction for task '" + task.id +
             "' returned unparseable JSON twice; continuing with empty keyword sets");
    return {};
}

std::vector<double> Rectifier::build_query(const KeywordSets& keywords) const {
    std::string joined;
    for (const auto& kw : keywords.scenario) {
        if (!joined.empty()) joined += "\n";
        joined += kw;
    }
    for (const auto& kw : keywords.action) {
        if (!joined.empty()) joined += "\n";
        joined += kw;
    }
    if (joined.empty()) joined = std::string(kGenericQueryText);
    return registry_.embedding().embed(joined);
}

Verdict Rectifier::evaluate_indicator(const std::string& candidate, const TaskSpec& task,
                                      const RoleSpec& role, const Indicator& indicator) const {
    const bool code_domain = task.domain_tag == "code";
    std::string_view tmpl = code_domain ? prompts::kCodeAuditor : prompts::kMathAuditor;
    if (code_domain && !config_.code_auditor_template.empty())
        tmpl = config_.code_auditor_template;
    else if (!code_domain && !config_.math_auditor_template.empty())
        tmpl = config_.math_auditor_template;

    const std::string prompt =
        prompts::render_template(tmpl, {{"trigger_condition", indicator.trigger_condition},
                                        {"task", task.question},
                                        {"role", role.name},
                                        {"agent_output", candidate}});

    const std::string first =
        registry_.generate(config_.rectifier_backend, {user_msg(prompt)}, config_.rectifier_sampling);
    std::optional<ParsedVerdict> parsed = parse_verdict(first);
    if (!parsed) {
        const std::string second = registry_.generate(
            config_.rectifier_backend,
            {user_msg(prompt), assistant_msg(first), user_msg(std::string(prompts::kReaskNudge))},
            config_.rectifier_sampling);
        parsed = parse_verdict(second);
    }

    Verdict verdict;
    verdict.indicator_name = indicator.name;
    if (!parsed) {
        // a broken auditor must not invent violations against healthy output
        verdict.violated = config_.fail_closed;
        verdict.rationale =
            config_.fail_closed ? "auditor output was unparseable; failing closed" : "";
        verdict.raw_fields["parse_error"] = "auditor reply was not valid JSON after one re-ask";
        log_warn("auditor verdict for indicator '" + indicator.name +
                 "' was unparseable twice; " +
                 (config_.fail_closed ? "counting as violation (fail-closed)"
                                      : "counting as non-violation (fail-open)"));
        return verdict;
    }

    verdict.violated = parsed->is_flawed;
    verdict.rationale = parsed->is_flawed ? compose_rationale(*parsed) : "";
    verdict.raw_fields["evidence_quote"] = parsed->evidence_quote;
    verdict.raw_fields["analysis"] = parsed->analysis;
    verdict.raw_fields["suggestion"] = parsed->suggestion;
    verdict.raw_fields["impact_assessment"] = parsed->impact_assessment;
    return verdict;
}

std::vector<Verdict> Rectifier::evaluate_all(const std::string& candidate, const TaskSpec& task,
                                             const RoleSpec& role,
                                             const std::vector<RetrievalHit>& hits) const {
    std::vector<Verdict> verdicts(hits.size());
    if (hits.empty()) return verdicts;

    const int workers = std::min<int>(config_.eval_parallelism, static_cast<int>(hits.size()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < hits.size(); ++i)
            verdicts[i] = evaluate_indicator(candidate, task, role, hits[i].indicator);
        return verdicts;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= hits.size()) return;
            try {
                verdicts[i] = evaluate_indicator(candidate, task, role, hits[i].indicator);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(workers));
    for (int i = 0; i < workers; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (failure) std::rethrow_exception(failure);
    return verdicts; // index order == rank order
}

AggregateVerdict aggregate_verdicts(const std::vector<Verdict>& verdicts) {
    AggregateVerdict aggregate;
    for (const auto& v : verdicts) {
        if (!v.violated) continue;
        aggregate.error_state = true;
        aggregate.feedback.push_back(
            FeedbackItem{v.indicator_name, v.rationale, v.raw_fields.count("suggestion")
                                                            ? v.raw_fields.at("suggestion")
                                                            : std::string()});
    }
    return aggregate;
}

std::string render_feedback(const AggregateVerdict& aggregate, int attempt) {
    if (!aggregate.error_state)
        throw ContractError("render_feedback called with a clean aggregate verdict");

    std::string out = "An external auditor has reviewed your previous output (Attempt " +
                      std::to_string(attempt) +
                      ") and flagged some potential issues. Please review the following "
                      "suggestions critically:\n";
    for (const auto& item : aggregate.feedback) {
        out += "\n- [" + item.indicator_name + "]: ";
        for (std::size_t i = 0; i < item.rationale.size(); ++i) {
            const char c = item.rationale[i];
            out.push_back(c);
            if (c == '\n' && i + 1 < item.rationale.size() && item.rationale[i + 1] != '\n')
                out += "  ";
        }
        out += "\n";
    }
    out += "\n**Instruction**:\n\n"
           "1. If you agree with the advice, please refine your solution.\n\n"
           "2. **If you are confident your original logic is correct, you may ignore this "
           "advice.**\n\n"
           "3. Please output the corrected solution.";
    return out;
}

} // namespace flowgate
