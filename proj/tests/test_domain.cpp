#include "doctest.h"

#include <cmath>
#include <random>

#include "flowgate/domain.hpp"

using namespace flowgate;

TEST_CASE("jaccard closed forms") {
    CHECK(jaccard({"x", "y", "z"}, {"x", "y", "z"}) == 1.0);
    CHECK(jaccard({"x"}, {"y"}) == 0.0);
    CHECK(jaccard({"a", "b", "c"}, {"b", "c", "d"}) == 0.5);
    // both-empty profiles are identical by definition
    CHECK(jaccard({}, {}) == 1.0);
    CHECK(jaccard({}, {"a"}) == 0.0);
}

TEST_CASE("jaccard is symmetric and bounded") {
    std::mt19937 rng(7);
    std::uniform_int_distribution<int> size_dist(0, 8);
    std::uniform_int_distribution<int> item_dist(0, 11);
    for (int trial = 0; trial < 200; ++trial) {
        std::set<std::string> a, b;
        for (int i = size_dist(rng); i > 0; --i) a.insert("k" + std::to_string(item_dist(rng)));
        for (int i = size_dist(rng); i > 0; --i) b.insert("k" + std::to_string(item_dist(rng)));
        const double ab = jaccard(a, b);
        CHECK(ab == jaccard(b, a));
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
        if (!a.empty()) CHECK(jaccard(a, a) == 1.0);
    }
}

TEST_CASE("cosine similarity closed forms") {
    CHECK(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{1, 0}) == 1.0);
    CHECK(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == 0.0);
    CHECK(cosine_similarity(std::vector<double>{1, 2, 2}, std::vector<double>{2, 1, 2}) ==
          doctest::Approx(8.0 / 9.0).epsilon(1e-12));
}

TEST_CASE("cosine similarity errors") {
    CHECK_THROWS_AS(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{1, 0, 0}),
                    DimensionError);
    CHECK_THROWS_AS(cosine_similarity(std::vector<double>{0, 0}, std::vector<double>{1, 0}),
                    ContractError);
}

TEST_CASE("cosine similarity is symmetric, scale-invariant and clamped") {
    std::mt19937 rng(13);
    std::uniform_real_distribution<double> coord(-2.0, 2.0);
    std::uniform_real_distribution<double> scale(0.1, 40.0);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> u(5), v(5);
        double nu = 0, nv = 0;
        for (int i = 0; i < 5; ++i) {
            u[i] = coord(rng);
            v[i] = coord(rng);
            nu += u[i] * u[i];
            nv += v[i] * v[i];
        }
        if (nu == 0 || nv == 0) continue;
        const double base = cosine_similarity(u, v);
        CHECK(base == cosine_similarity(v, u));
        CHECK(base >= -1.0);
        CHECK(base <= 1.0);
        const double alpha = scale(rng);
        std::vector<double> scaled = u;
        for (auto& x : scaled) x *= alpha;
        CHECK(cosine_similarity(scaled, v) == doctest::Approx(base).epsilon(1e-9));
    }
}

TEST_CASE("normalize_answer") {
    CHECK(normalize_answer("\\boxed{11}") == "11");
    CHECK(normalize_answer(" 42 ") == "42");
    CHECK(normalize_answer("answer is 7.") == "answer is 7");

    SUBCASE("balanced braces inside the boxed group") {
        CHECK(normalize_answer("\\boxed{\\frac{1}{2}}") == "\\frac{1}{2}");
        CHECK(normalize_answer("the result is $\\boxed{x^{2}+1}$") == "x^{2}+1");
    }
    SUBCASE("nested boxed peels to the innermost") {
        CHECK(normalize_answer("\\boxed{\\boxed{11}}") == "11");
    }
    SUBCASE("whitespace runs collapse") {
        CHECK(normalize_answer("a \n\t b") == "a b");
        CHECK(normalize_answer("") == "");
    }
    SUBCASE("trailing periods strip") {
        CHECK(normalize_answer("7...") == "7");
        CHECK(normalize_answer("7. ") == "7");
    }
    SUBCASE("unbalanced boxed group is left alone") {
        CHECK(normalize_answer("\\boxed{11") == "\\boxed{11");
    }
}

TEST_CASE("run config validation") {
    RunConfig config;
    CHECK_NOTHROW(config.validate());
    CHECK(config.t_max == 3);
    CHECK(config.k_act == 5);
    CHECK(config.k_dedup == 20);
    CHECK(config.gamma == 1);
    CHECK(config.max_chat_turns == 6);
    CHECK(config.reset_budget == 1);

    config.t_max = -1;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config = RunConfig{};
    config.k_act = 0;
    CHECK_THROWS_AS(config.validate(), ConfigError);
}

TEST_CASE("trajectory json round trip") {
    Trajectory trajectory;
    trajectory.task = TaskSpec{"t1", "what is 2+2?", std::string("4"), "math"};
    GateOutcome outcome;
    outcome.status = GateStatus::Passed;
    outcome.accepted_iteration = 1;
    AggregateVerdict flagged;
    flagged.error_state = true;
    flagged.feedback.push_back(FeedbackItem{"IND_A", "fix the sum", "use addition"});
    outcome.history.push_back(GateIteration{"2+2=5", {"IND_A", "IND_B"}, flagged});
    outcome.history.push_back(GateIteration{"2+2=4", {"IND_A"}, AggregateVerdict{}});
    trajectory.steps.push_back(TrajectoryStep{"Solver", outcome});
    trajectory.fallback_events.push_back(FallbackEvent{2, "below threshold"});
    trajectory.final_answer = "4";

    const json j = trajectory;
    const Trajectory back = j.get<Trajectory>();
    CHECK(json(back).dump() == j.dump());
    CHECK(back.steps.size() == 1);
    CHECK(back.steps[0].outcome.accepted_iteration == 1);
    CHECK(back.steps[0].outcome.history[0].aggregate.feedback.size() == 1);
    CHECK(back.final_answer == "4");

    Trajectory unanswered;
    unanswered.task = trajectory.task;
    const Trajectory back2 = json(unanswered).get<Trajectory>();
    CHECK_FALSE(back2.final_answer.has_value());
}

TEST_CASE("accepted_text is gated by status") {
    GateOutcome rejected;
    rejected.status = GateStatus::Rejected;
    rejected.history.push_back(GateIteration{"bad", {}, AggregateVerdict{true, {}}});
    CHECK_THROWS_AS(rejected.accepted_text(), ContractError);
}
