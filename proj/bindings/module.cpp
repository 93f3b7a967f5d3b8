#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "flowgate/analytics.hpp"
#include "flowgate/backends.hpp"
#include "flowgate/domain.hpp"
#include "flowgate/driver.hpp"
#include "flowgate/gate.hpp"
#include "flowgate/indicator_pool.hpp"
#include "flowgate/rectifier.hpp"

namespace py = pybind11;
using namespace flowgate;

namespace {

py::tuple run_command_captured(const std::function<int(std::ostream&, std::ostream&)>& command) {
    std::ostringstream out, err;
    const int code = command(out, err);
    return py::make_tuple(code, out.str(), err.str());
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "gated information flow for multi-agent LLM pipelines (C++ core)";
    m.attr("__version__") = "0.1.0";

    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<DimensionError>(m, "DimensionError");

    m.def("normalize_answer", [](const std::string& raw) { return normalize_answer(raw); },
          py::arg("raw"), "Canonical form for exact-match grading.");
    m.def("jaccard",
          [](const std::set<std::string>& a, const std::set<std::string>& b) {
              return jaccard(a, b);
          },
          py::arg("a"), py::arg("b"));
    m.def("cosine_similarity",
          [](const std::vector<double>& u, const std::vector<double>& v) {
              return cosine_similarity(u, v);
          },
          py::arg("u"), py::arg("v"));

    py::class_<Indicator>(m, "Indicator")
        .def(py::init([](std::string name, std::string definition, std::string trigger_condition,
                         std::optional<std::string> domain_tag,
                         std::optional<std::string> example_error,
                         std::optional<std::vector<double>> embedding_condition,
                         std::optional<std::vector<double>> embedding_dedup) {
                 Indicator ind;
                 ind.name = std::move(name);
                 ind.definition = std::move(definition);
                 ind.trigger_condition = std::move(trigger_condition);
                 ind.domain_tag = std::move(domain_tag);
                 ind.example_error = std::move(example_error);
                 ind.embedding_condition = std::move(embedding_condition);
                 ind.embedding_dedup = std::move(embedding_dedup);
                 return ind;
             }),
             py::arg("name"), py::arg("definition"), py::arg("trigger_condition"),
             py::arg("domain_tag") = py::none(), py::arg("example_error") = py::none(),
             py::arg("embedding_condition") = py::none(), py::arg("embedding_dedup") = py::none())
        .def_readwrite("name", &Indicator::name)
        .def_readwrite("definition", &Indicator::definition)
        .def_readwrite("trigger_condition", &Indicator::trigger_condition)
        .def_readwrite("domain_tag", &Indicator::domain_tag)
        .def_readwrite("example_error", &Indicator::example_error)
        .def_readwrite("embedding_condition", &Indicator::embedding_condition)
        .def_readwrite("embedding_dedup", &Indicator::embedding_dedup)
        .def("__repr__",
             [](const Indicator& ind) { return "<Indicator '" + ind.name + "'>"; });

    m.def("general_indicator", &general_indicator, py::arg("domain_tag"));

    py::class_<RetrievalHit>(m, "RetrievalHit")
        .def_readonly("indicator", &RetrievalHit::indicator)
        .def_readonly("score", &RetrievalHit::score)
        .def_readonly("rank", &RetrievalHit::rank)
        .def_readonly("pool_index", &RetrievalHit::pool_index);

    py::class_<EmbeddingBackend, std::shared_ptr<EmbeddingBackend>>(m, "EmbeddingBackend")
        .def("embed", &EmbeddingBackend::embed, py::arg("text"))
        .def("dimension", &EmbeddingBackend::dimension);
    py::class_<ScriptedEmbeddingBackend, EmbeddingBackend,
               std::shared_ptr<ScriptedEmbeddingBackend>>(m, "ScriptedEmbedder")
        .def(py::init<std::uint64_t, int>(), py::arg("seed"), py::arg("dimension"));

    py::class_<IndicatorPool>(m, "IndicatorPool")
        .def(py::init<int>(), py::arg("dimension"))
        .def_static("load", &IndicatorPool::load, py::arg("path"), py::arg("dimension"))
        .def("save", &IndicatorPool::save, py::arg("path"))
        .def("__len__", &IndicatorPool::size)
        .def("append", &IndicatorPool::append, py::arg("indicator"))
        .def("entries", [](const IndicatorPool& pool) { return pool.entries(); })
        .def("dimension", &IndicatorPool::dimension)
        .def("ensure_condition_embeddings",
             [](IndicatorPool& pool, EmbeddingBackend& embedder) {
                 pool.ensure_condition_embeddings(embedder);
             },
             py::arg("embedder"))
        .def("retrieve_top_k",
             [](const IndicatorPool& pool, const std::vector<double>& query, int k) {
                 return pool.retrieve_top_k(query, k);
             },
             py::arg("query"), py::arg("k"));

    py::enum_<FallbackDecision>(m, "FallbackDecision")
        .value("Proceed", FallbackDecision::Proceed)
        .value("Reset", FallbackDecision::Reset)
        .value("BudgetExhausted", FallbackDecision::BudgetExhausted);
    m.def("check_fallback", &check_fallback, py::arg("valid_message_count"), py::arg("gamma"),
          py::arg("resets_used"), py::arg("reset_budget"));

    py::class_<Verdict>(m, "Verdict")
        .def(py::init([](std::string indicator_name, bool violated, std::string rationale,
                         std::map<std::string, std::string> raw_fields) {
                 Verdict v;
                 v.indicator_name = std::move(indicator_name);
                 v.violated = violated;
                 v.rationale = std::move(rationale);
                 v.raw_fields = std::move(raw_fields);
                 return v;
             }),
             py::arg("indicator_name"), py::arg("violated"), py::arg("rationale") = "",
             py::arg("raw_fields") = std::map<std::string, std::string>{})
        .def_readwrite("indicator_name", &Verdict::indicator_name)
        .def_readwrite("violated", &Verdict::violated)
        .def_readwrite("rationale", &Verdict::rationale)
        .def_readwrite("raw_fields", &Verdict::raw_fields);

    py::class_<FeedbackItem>(m, "FeedbackItem")
        .def_readonly("indicator_name", &FeedbackItem::indicator_name)
        .def_readonly("rationale", &FeedbackItem::rationale)
        .def_readonly("suggestion", &FeedbackItem::suggestion);

    py::class_<AggregateVerdict>(m, "AggregateVerdict")
        .def_readonly("error_state", &AggregateVerdict::error_state)
        .def_readonly("feedback", &AggregateVerdict::feedback);

    m.def("aggregate_verdicts", &aggregate_verdicts, py::arg("verdicts"));
    m.def("render_feedback", &render_feedback, py::arg("aggregate"), py::arg("attempt"));

    py::class_<Trajectory>(m, "Trajectory")
        .def_property_readonly("task_id",
                               [](const Trajectory& t) { return t.task.id; })
        .def_property_readonly("final_answer",
                               [](const Trajectory& t) { return t.final_answer; })
        .def_property_readonly("step_count",
                               [](const Trajectory& t) { return t.steps.size(); })
        .def("to_json", [](const Trajectory& t) { return json(t).dump(); })
        .def_static("from_json",
                    [](const std::string& text) { return json::parse(text).get<Trajectory>(); });

    m.def("load_trajectories",
          [](const std::string& dir) {
              std::vector<std::string> unreadable;
              auto trajectories = load_trajectory_dir(dir, &unreadable);
              if (!unreadable.empty())
                  throw ParseError("unreadable trajectory files: " + unreadable.front());
              return trajectories;
          },
          py::arg("dir"));

    m.def("iteration_histogram",
          [](const std::vector<Trajectory>& trajectories) {
              const IterationHistogram histogram = iteration_histogram(trajectories);
              py::dict out;
              for (const auto& [label, bucket] : histogram.buckets)
                  out[py::str(label)] = py::make_tuple(bucket.count, bucket.fraction);
              return out;
          },
          py::arg("trajectories"));

    py::class_<TaskGrade>(m, "TaskGrade")
        .def_readonly("task_id", &TaskGrade::task_id)
        .def_readonly("correct", &TaskGrade::correct)
        .def_readonly("answered", &TaskGrade::answered)
        .def_readonly("expected", &TaskGrade::expected);
    py::class_<GradeReport>(m, "GradeReport")
        .def_readonly("accuracy", &GradeReport::accuracy)
        .def_readonly("verdicts", &GradeReport::verdicts);
    m.def("grade_run",
          [](const std::vector<Trajectory>& trajectories) { return grade_run(trajectories); },
          py::arg("trajectories"));

    m.def("top_indicator_overlap",
          [](const std::map<std::string, std::vector<Trajectory>>& runs, int top_n) {
              const OverlapMatrix matrix = top_indicator_overlap(runs, top_n);
              return py::make_tuple(matrix.labels, matrix.values);
          },
          py::arg("runs"), py::arg("top_n") = 10);

    // same drivers the CLI uses; returns (exit_code, stdout, stderr)
    m.def("run_command",
          [](const std::string& config, const std::string& dataset, const std::string& pool,
             const std::string& out_dir, int jobs, std::optional<std::uint64_t> seed) {
              RunOptions options{config, dataset, pool, out_dir, jobs, seed};
              return run_command_captured(
                  [&](std::ostream& out, std::ostream& err) { return cmd_run(options, out, err); });
          },
          py::arg("config"), py::arg("dataset"), py::arg("pool") = "", py::arg("out_dir") = "out",
          py::arg("jobs") = 1, py::arg("seed") = py::none());
    m.def("mine_command",
          [](const std::string& config, const std::string& dataset, const std::string& pool_out,
             const std::string& build_log, std::optional<std::uint64_t> seed) {
              MineOptions options{config, dataset, pool_out, build_log, seed};
              return run_command_captured([&](std::ostream& out, std::ostream& err) {
                  return cmd_mine(options, out, err);
              });
          },
          py::arg("config"), py::arg("dataset"), py::arg("pool_out"), py::arg("build_log") = "",
          py::arg("seed") = py::none());
    m.def("stats_command",
          [](const std::string& dir,
             const std::vector<std::pair<std::string, std::string>>& overlap, int top_n,
             const std::string& out_dir) {
              StatsOptions options{dir, overlap, out_dir, top_n};
              return run_command_captured([&](std::ostream& out, std::ostream& err) {
                  return cmd_stats(options, out, err);
              });
          },
          py::arg("dir"), py::arg("overlap") = std::vector<std::pair<std::string, std::string>>{},
          py::arg("top_n") = 10, py::arg("out_dir") = "");
}
