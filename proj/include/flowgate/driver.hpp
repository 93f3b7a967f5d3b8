#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "flowgate/domain.hpp"

namespace flowgate {

// Line-delimited JSON rows {id, question, gold_answer?, domain_tag?}.
// Errors name the offending line. require_gold makes gold_answer mandatory.
std::vector<TaskSpec> load_dataset(const std::string& path, const std::string& default_domain,
                                   bool require_gold);

// Every *.json / *.jsonl file in dir, each holding one serialized trajectory.
// Unreadable files are appended to `unreadable` and skipped.
std::vector<Trajectory> load_trajectory_dir(const std::string& dir,
                                            std::vector<std::string>* unreadable);

std::string sanitize_filename(const std::string& id);

// Exit codes shared by every command: 0 ok, 1 task failures, 2 bad config.
constexpr int kExitOk = 0;
constexpr int kExitTaskFailure = 1;
constexpr int kExitConfigError = 2;

struct RunOptions {
    std::string config_path;
    std::string dataset_path;
    std::string pool_path; // optional; empty requires zero-shot mode
    std::string out_dir;
    int jobs = 1;
    std::optional<std::uint64_t> seed;
};

// Executes every dataset row, writes one trajectory file per task plus
// report.json / report.txt and the resolved config echo under out_dir.
int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err);

struct MineOptions {
    std::string config_path;
    std::string dataset_path;
    std::string pool_out;
    std::string build_log; // empty = "<pool_out>.log.jsonl"
    std::optional<std::uint64_t> seed;
};

int cmd_mine(const MineOptions& options, std::ostream& out, std::ostream& err);

struct StatsOptions {
    std::string trajectory_dir;
    std::vector<std::pair<std::string, std::string>> overlap_dirs; // label -> dir
    std::string out_dir; // optional; when set, report files are written there
    int top_n = 10;
};

int cmd_stats(const StatsOptions& options, std::ostream& out, std::ostream& err);

struct PoolInspectOptions {
    std::string pool_path;
    int dim = 0; // 0 = infer from the first stored embedding
    std::string query;
    int k = 5;
    std::uint64_t seed = 42;
};

int cmd_pool_inspect(const PoolInspectOptions& options, std::ostream& out, std::ostream& err);

} // namespace flowgate
