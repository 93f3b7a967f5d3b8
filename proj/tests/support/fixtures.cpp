#include "support/fixtures.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "flowgate/gate.hpp"
#include "flowgate/prompts.hpp"
#include "flowgate/rectifier.hpp"

namespace testsupport {

namespace fs = std::filesystem;

void ScriptBuilder::add(const std::string& backend_id, const std::vector<ChatMessage>& messages,
                        double temperature, const std::string& response) {
    TranscriptRecord rec;
    rec.key_digest = chat_request_digest(backend_id, messages, temperature);
    rec.request = chat_request_json(backend_id, messages, temperature);
    rec.response = response;
    store_->add(std::move(rec));
}

std::string verdict_json(bool flawed, const std::string& suggestion, const std::string& analysis) {
    return json{{"evidence_quote", flawed ? "quoted part" : "N/A"},
                {"analysis", analysis},
                {"suggestion", suggestion},
                {"impact_assessment", flawed ? "YES, the final answer changes" : "NO"},
                {"is_flawed", flawed}}
        .dump();
}

std::string keywords_json(const std::vector<std::string>& scenario,
                          const std::vector<std::string>& action) {
    return json{{"scenario", scenario}, {"action", action}}.dump();
}

BackendRegistry make_scripted_registry(std::shared_ptr<const TranscriptStore> store,
                                       const RunConfig& config,
                                       const std::vector<std::string>& chat_ids,
                                       std::uint64_t seed) {
    BackendRegistry registry;
    for (const auto& id : chat_ids)
        registry.register_chat(id, std::make_shared<ScriptedChatBackend>(id, store));
    registry.set_embedding(std::make_shared<CachingEmbeddingBackend>(
        std::make_shared<ScriptedEmbeddingBackend>(seed, config.embedding_dim)));
    return registry;
}

AgentSpec make_agent(const std::string& name, const std::string& backend_id, bool decision,
                     double temperature) {
    AgentSpec spec;
    spec.role.name = name;
    spec.role.instructions = "You are " + name + ". Work the task carefully.";
    spec.backend_id = backend_id;
    spec.sampling = SamplingParams{temperature, 2048};
    spec.is_decision = decision;
    return spec;
}

void script_agent_turn(ScriptBuilder& builder, const AgentSpec& agent, const TaskSpec& task,
                       const std::vector<KnowledgeEntry>& knowledge,
                       const std::string& response) {
    const AgentState state{agent, knowledge};
    builder.add(agent.backend_id, prompts::render_agent_context(state, task),
                agent.sampling.temperature, response);
}

void script_zero_shot_rounds(ScriptBuilder& builder, const RunConfig& config,
                             const AgentSpec& agent, const TaskSpec& task,
                             const std::vector<std::string>& candidates,
                             const std::vector<bool>& flawed,
                             const std::vector<KnowledgeEntry>& knowledge) {
    const Indicator general = general_indicator(task.domain_tag);
    for (std::size_t t = 0; t < candidates.size(); ++t) {
        const std::string prompt = prompts::render_template(
            prompts::kMathAuditor, {{"trigger_condition", general.trigger_condition},
                                    {"task", task.question},
                                    {"role", agent.role.name},
                                    {"agent_output", candidates[t]}});
        builder.add(config.rectifier_backend, {user_msg(prompt)},
                    config.rectifier_sampling.temperature,
                    verdict_json(flawed.at(t), "Rework step " + std::to_string(t),
                                 "Round " + std::to_string(t) + " diagnostic"));
    }

    // regenerations between flawed rounds, computed through the real
    // rectifier so feedback strings match byte for byte
    const BackendRegistry registry = make_scripted_registry(
        builder.store(), config, {agent.backend_id, config.rectifier_backend});
    const Rectifier rectifier(registry, config);
    const AgentState state{agent, knowledge};
    for (std::size_t t = 0; t + 1 < candidates.size(); ++t) {
        if (!flawed.at(t)) break; // gate stops at the first clean round
        const Verdict verdict =
            rectifier.evaluate_indicator(candidates[t], task, agent.role, general);
        const std::string feedback =
            render_feedback(aggregate_verdicts({verdict}), static_cast<int>(t) + 1);
        std::vector<ChatMessage> messages = prompts::render_agent_context(state, task);
        messages.push_back(assistant_msg(candidates[t]));
        messages.push_back(user_msg(feedback));
        builder.add(agent.backend_id, messages, agent.sampling.temperature, candidates[t + 1]);
    }
}

namespace {

Indicator plain_indicator(const std::string& name, const std::string& definition,
                          const std::string& trigger) {
    Indicator ind;
    ind.name = name;
    ind.definition = definition;
    ind.trigger_condition = trigger;
    ind.domain_tag = "math";
    return ind;
}

} // namespace

GoldenScenario build_golden_scenario() {
    GoldenScenario scenario;

    scenario.task.id = "case-sqrt-count";
    scenario.task.question =
        "For how many real values of x is sqrt(120 - sqrt(x)) an integer?";
    scenario.task.gold_answer = "11";
    scenario.task.domain_tag = "math";

    scenario.solver = make_agent("MathSolver", "agents");
    scenario.solver.role.instructions =
        "You are MathSolver. Solve the problem step by step and finish with the final answer "
        "in boxed{...} form.";
    scenario.decider = make_agent("Decider", "agents", /*decision=*/true);
    scenario.decider.role.instructions =
        "You are Decider. Review the discussion and state the final answer in boxed{...} form.";

    scenario.config = RunConfig{};
    scenario.config.rectifier_backend = "rect";
    scenario.route = ScriptedRoute{{"MathSolver", "Decider"}};

    scenario.pool_entries = {
        plain_indicator("SQUARE_ROOT_MANIPULATION_CHECK",
                        "Radical expressions manipulated into contradictions about divisibility "
                        "or integer properties.",
                        "When the agent manipulates expressions in radical form together with "
                        "divisibility or integer constraints."),
        plain_indicator("INTEGER_CONDITION_MISMANAGEMENT",
                        "Integer range restricted without justification, dropping valid values "
                        "such as zero.",
                        "When the agent enumerates integer solutions under a range constraint."),
        plain_indicator("MODULAR_ARITHMETIC_CONTEXT_CHECK",
                        "Arithmetic constraints transplanted out of context, losing admissible "
                        "cases.",
                        "When the agent derives value ranges from squared or modular relations."),
        plain_indicator("MISSING_CHECK_FOR_INTEGER_SOLUTIONS",
                        "Solutions asserted integral without verifying integrality.",
                        "When the agent claims integer solutions to an equation."),
        plain_indicator("LACK_OF_COMPREHENSIVE_OPTION_ELIMINATION",
                        "Candidate cases discarded without testing each one.",
                        "When the agent eliminates candidate values from a finite set."),
    };

    scenario.solver_o0 =
        "Let sqrt(120 - sqrt(x)) = n with n a positive integer. Then sqrt(x) = 120 - n^2 needs "
        "120 - n^2 >= 0, so n ranges over 1..10, giving 10 values. Final answer: boxed{10}";
    scenario.solver_o1 =
        "Allowing any integer n with n^2 <= 120 gives n in -10..10, which is 21 values. "
        "Final answer: boxed{21}";
    scenario.solver_o2 =
        "The square root is non-negative, so n ranges over the non-negative integers 0..10, "
        "giving 11 real values of x. Final answer: boxed{11}";
    scenario.decider_output = "The team agrees on the count. Final answer: boxed{11}";

    ScriptBuilder builder;

    // solver's initial turn (empty knowledge)
    script_agent_turn(builder, scenario.solver, scenario.task, {}, scenario.solver_o0);

    const RunConfig& config = scenario.config;
    const auto keyword_fixture = [&](const std::string& candidate, const RoleSpec& role,
                                     const std::string& reply) {
        const std::string prompt = prompts::render_template(
            prompts::kKeywordExtraction, {{"task", scenario.task.question},
                                          {"role", role.name},
                                          {"agent_output", candidate}});
        builder.add(config.rectifier_backend, {user_msg(prompt)},
                    config.rectifier_sampling.temperature, reply);
    };
    const auto eval_fixture = [&](const std::string& candidate, const RoleSpec& role,
                                  const Indicator& indicator, const std::string& reply) {
        const std::string prompt = prompts::render_template(
            prompts::kMathAuditor, {{"trigger_condition", indicator.trigger_condition},
                                    {"task", scenario.task.question},
                                    {"role", role.name},
                                    {"agent_output", candidate}});
        builder.add(config.rectifier_backend, {user_msg(prompt)},
                    config.rectifier_sampling.temperature, reply);
    };

    // round 0: positive-only enumeration flagged by two indicators
    keyword_fixture(scenario.solver_o0, scenario.solver.role,
                    keywords_json({"square root expressions", "integer counting"},
                                  {"range enumeration"}));
    for (const auto& ind : scenario.pool_entries) {
        std::string reply = verdict_json(false);
        if (ind.name == "INTEGER_CONDITION_MISMANAGEMENT")
            reply = verdict_json(true, "Allow n to be in Z (including 0) and re-evaluate the "
                                       "range of n under 120 - n^2 >= 0.",
                                 "n = 0 is a valid integer and is excluded by assuming n is "
                                 "strictly positive.");
        else if (ind.name == "MODULAR_ARITHMETIC_CONTEXT_CHECK")
            reply = verdict_json(true, "Allow n to be zero as well, since the expression can be "
                                       "zero and still be an integer.",
                                 "The expression being an integer does not require n to be "
                                 "strictly positive.");
        eval_fixture(scenario.solver_o0, scenario.solver.role, ind, reply);
    }

    // round 1: over-expansion to negatives flagged by the radical check
    keyword_fixture(scenario.solver_o1, scenario.solver.role,
                    keywords_json({"square root manipulation"}, {"algebraic simplification"}));
    for (const auto& ind : scenario.pool_entries) {
        std::string reply = verdict_json(false);
        if (ind.name == "SQUARE_ROOT_MANIPULATION_CHECK")
            reply = verdict_json(true, "Restrict n to non-negative integers since the square "
                                       "root function only yields non-negative results.",
                                 "Negative n cannot equal a principal square root, so half of "
                                 "the enumerated range is invalid.");
        eval_fixture(scenario.solver_o1, scenario.solver.role, ind, reply);
    }

    // round 2: clean
    keyword_fixture(scenario.solver_o2, scenario.solver.role,
                    keywords_json({"square root expressions"}, {"final verification"}));
    for (const auto& ind : scenario.pool_entries)
        eval_fixture(scenario.solver_o2, scenario.solver.role, ind, verdict_json(false));

    // regenerations, computed through the real scrutiny path so the injected
    // feedback strings match exactly
    {
        BackendRegistry registry = make_scripted_registry(
            builder.store(), config, {"agents", config.rectifier_backend});
        const Rectifier rectifier(registry, config);
        IndicatorPool pool(config.embedding_dim);
        for (const auto& ind : scenario.pool_entries) pool.append(ind);
        pool.ensure_condition_embeddings(registry.embedding());
        const AgentState solver_state{scenario.solver, {}};

        const auto scripted_round = [&](const std::string& candidate, int attempt,
                                        const std::string& next_candidate) {
            const KeywordSets keywords =
                rectifier.extract_keywords(scenario.task, scenario.solver.role, candidate);
            const auto hits = pool.retrieve_top_k(rectifier.build_query(keywords), config.k_act);
            const auto verdicts =
                rectifier.evaluate_all(candidate, scenario.task, scenario.solver.role, hits);
            const std::string feedback =
                render_feedback(aggregate_verdicts(verdicts), attempt);
            std::vector<ChatMessage> messages =
                prompts::render_agent_context(solver_state, scenario.task);
            messages.push_back(assistant_msg(candidate));
            messages.push_back(user_msg(feedback));
            builder.add("agents", messages, scenario.solver.sampling.temperature, next_candidate);
        };
        scripted_round(scenario.solver_o0, 1, scenario.solver_o1);
        scripted_round(scenario.solver_o1, 2, scenario.solver_o2);
    }

    // decider turn: sees the solver's finalized message, passes at once
    const std::vector<KnowledgeEntry> decider_knowledge{{"MathSolver", scenario.solver_o2}};
    script_agent_turn(builder, scenario.decider, scenario.task, decider_knowledge,
                      scenario.decider_output);
    keyword_fixture(scenario.decider_output, scenario.decider.role,
                    keywords_json({"answer consolidation"}, {"final decision"}));
    for (const auto& ind : scenario.pool_entries)
        eval_fixture(scenario.decider_output, scenario.decider.role, ind, verdict_json(false));

    scenario.transcript = builder.store();
    return scenario;
}

IndicatorPool GoldenScenario::make_pool() const {
    IndicatorPool pool(config.embedding_dim);
    for (const auto& ind : pool_entries) pool.append(ind);
    return pool;
}

BackendRegistry GoldenScenario::make_registry() const {
    return make_scripted_registry(transcript, config, {"agents", config.rectifier_backend});
}

AppConfig GoldenScenario::make_app_config() const {
    AppConfig app;
    app.run = config;
    app.embedding.kind = "scripted";
    app.embedding.dim = config.embedding_dim;
    app.embedding.seed = 42;
    app.transcript_path = "transcript.jsonl";
    app.backends.push_back(BackendDef{"agents", "scripted", "", "", "", json::object()});
    app.backends.push_back(
        BackendDef{config.rectifier_backend, "scripted", "", "", "", json::object()});
    for (const AgentSpec& spec : roster()) {
        AgentDef def;
        def.name = spec.role.name;
        def.backend = spec.backend_id;
        def.decision = spec.is_decision;
        def.temperature = spec.sampling.temperature;
        def.max_tokens = spec.sampling.max_tokens;
        def.instructions = spec.role.instructions;
        app.agents.push_back(std::move(def));
    }
    app.routing.kind = "scripted";
    app.routing.sequence = route.sequence;
    app.default_domain = "math";
    return app;
}

void GoldenScenario::write_files(const std::string& dir) const {
    fs::create_directories(dir);
    TranscriptStore copy = *transcript;
    copy.save((fs::path(dir) / "transcript.jsonl").string());

    IndicatorPool pool = make_pool();
    pool.save((fs::path(dir) / "pool.jsonl").string());

    std::ofstream dataset((fs::path(dir) / "dataset.jsonl").string(), std::ios::trunc);
    dataset << json{{"id", task.id},
                    {"question", task.question},
                    {"gold_answer", *task.gold_answer},
                    {"domain_tag", task.domain_tag}}
                   .dump()
            << "\n";
    dataset.close();

    std::ofstream config_file((fs::path(dir) / "config.ini").string(), std::ios::trunc);
    config_file << make_app_config().to_ini();
}

TempDir::TempDir(const std::string& tag) {
    static std::atomic<unsigned> counter{0};
    std::random_device rd;
    const auto unique = std::to_string(rd()) + "-" + std::to_string(counter.fetch_add(1));
    path_ = (fs::temp_directory_path() / ("flowgate-" + tag + "-" + unique)).string();
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

std::string TempDir::file(const std::string& name) const {
    return (fs::path(path_) / name).string();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace testsupport
