#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "flowgate/domain.hpp"

namespace flowgate {

struct HistogramBucket {
    long count = 0;
    double fraction = 0.0;
};

// Buckets keep reporting order: pass@1, pass@2, ... then rejected.
struct IterationHistogram {
    std::vector<std::pair<std::string, HistogramBucket>> buckets;
    long total = 0;
};

// Buckets every gate outcome across all steps: Passed(t) lands in
// pass@(t+1), Rejected in "rejected". Fractions sum to 1 for non-empty input.
IterationHistogram iteration_histogram(std::span<const Trajectory> trajectories);

struct OverlapMatrix {
    std::vector<std::string> labels; // sorted benchmark names
    std::vector<std::vector<double>> values;
};

// Pair-wise Jaccard similarity between each benchmark's top_n most
// frequently retrieved indicator names. Every retrieval occurrence counts,
// including repeats across iterations; frequency ties break by name.
OverlapMatrix top_indicator_overlap(const std::map<std::string, std::vector<Trajectory>>& runs,
                                    int top_n = 10);

struct TaskGrade {
    std::string task_id;
    bool correct = false;
    std::string answered;   // normalized; empty when no final answer
    std::string expected;   // normalized gold
};

struct GradeReport {
    double accuracy = 0.0;
    std::vector<TaskGrade> verdicts;
};

// Exact-match grading after normalization; a missing final answer is wrong.
// Every task must carry a gold answer.
GradeReport grade_run(std::span<const Trajectory> trajectories);

// Report renderers used by the CLI.
json histogram_to_json(const IterationHistogram& histogram);
std::string histogram_table(const IterationHistogram& histogram);
json overlap_to_json(const OverlapMatrix& matrix);
std::string overlap_csv(const OverlapMatrix& matrix);

} // namespace flowgate
