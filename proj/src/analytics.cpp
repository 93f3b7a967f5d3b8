#include "flowgate/analytics.hpp"

#include <algorithm>
#include <iomanip>
#include <set>
#include <sstream>

namespace flowgate {

IterationHistogram iteration_histogram(std::span<const Trajectory> trajectories) {
    std::map<int, long> pass_counts; // accepted iteration -> count
    long rejected = 0;
    long total = 0;
    for (const auto& trajectory : trajectories) {
        for (const auto& step : trajectory.steps) {
            ++total;
            if (step.outcome.status == GateStatus::Passed)
                ++pass_counts[step.outcome.accepted_iteration.value_or(0)];
            else
                ++rejected;
        }
    }

    IterationHistogram histogram;
    histogram.total = total;
    if (total == 0) return histogram;
    for (const auto& [iteration, count] : pass_counts) {
        histogram.buckets.emplace_back(
            "pass@" + std::to_string(iteration + 1),
            HistogramBucket{count, static_cast<double>(count) / static_cast<double>(total)});
    }
    if (rejected > 0)
        histogram.buckets.emplace_back(
            "rejected",
            HistogramBucket{rejected, static_cast<double>(rejected) / static_cast<double>(total)});
    return histogram;
}

namespace {

std::set<std::string> top_indicator_names(const std::vector<Trajectory>& trajectories, int top_n) {
    std::map<std::string, long> frequency;
    for (const auto& trajectory : trajectories)
        for (const auto& step : trajectory.steps)
            for (const auto& iteration : step.outcome.history)
                for (const auto& name : iteration.active_indicators) ++frequency[name];

    std::vector<std::pair<std::string, long>> ranked(frequency.begin(), frequency.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first; // deterministic tie-break
    });

    std::set<std::string> top;
    for (std::size_t i = 0; i < ranked.size() && static_cast<int>(i) < top_n; ++i)
        top.insert(ranked[i].first);
    return top;
}

} // namespace

OverlapMatrix top_indicator_overlap(const std::map<std::string, std::vector<Trajectory>>& runs,
                                    int top_n) {
    if (top_n <= 0) throw ContractError("top_n must be positive");
    OverlapMatrix matrix;
    std::vector<std::set<std::string>> profiles;
    for (const auto& [label, trajectories] : runs) {
        matrix.labels.push_back(label);
        profiles.push_back(top_indicator_names(trajectories, top_n));
    }
    const std::size_t n = matrix.labels.size();
    matrix.values.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            matrix.values[i][j] = jaccard(profiles[i], profiles[j]);
    return matrix;
}

GradeReport grade_run(std::span<const Trajectory> trajectories) {
    GradeReport report;
    long correct = 0;
    for (const auto& trajectory : trajectories) {
        if (!trajectory.task.gold_answer)
            throw ConfigError("task '" + trajectory.task.id +
                              "' has no gold answer; grading needs one");
        TaskGrade grade;
        grade.task_id = trajectory.task.id;
        grade.expected = normalize_answer(*trajectory.task.gold_answer);
        if (trajectory.final_answer) {
            grade.answered = normalize_answer(*trajectory.final_answer);
            grade.correct = grade.answered == grade.expected;
        }
        if (grade.correct) ++correct;
        report.verdicts.push_back(std::move(grade));
    }
    report.accuracy = report.verdicts.empty()
                          ? 0.0
                          : static_cast<double>(correct) /
                                static_cast<double>(report.verdicts.size());
    return report;
}

json histogram_to_json(const IterationHistogram& histogram) {
    json j{{"total", histogram.total}, {"buckets", json::object()}};
    for (const auto& [label, bucket] : histogram.buckets)
        j["buckets"][label] = json{{"count", bucket.count}, {"fraction", bucket.fraction}};
    return j;
}

std::string histogram_table(const IterationHistogram& histogram) {
    std::ostringstream out;
    out << std::left << std::setw(12) << "bucket" << std::right << std::setw(8) << "count"
        << std::setw(10) << "fraction" << "\n";
    for (const auto& [label, bucket] : histogram.buckets) {
        out << std::left << std::setw(12) << label << std::right << std::setw(8) << bucket.count
            << std::setw(10) << std::fixed << std::setprecision(4) << bucket.fraction << "\n";
    }
    out << std::left << std::setw(12) << "total" << std::right << std::setw(8) << histogram.total
        << "\n";
    return out.str();
}

json overlap_to_json(const OverlapMatrix& matrix) {
    return json{{"labels", matrix.labels}, {"matrix", matrix.values}};
}

std::string overlap_csv(const OverlapMatrix& matrix) {
    std::ostringstream out;
    out << "benchmark";
    for (const auto& label : matrix.labels) out << "," << label;
    out << "\n";
    for (std::size_t i = 0; i < matrix.labels.size(); ++i) {
        out << matrix.labels[i];
        for (std::size_t j = 0; j < matrix.labels.size(); ++j)
            out << "," << std::fixed << std::setprecision(6) << matrix.values[i][j];
        out << "\n";
    }
    return out.str();
}

} // namespace flowgate
