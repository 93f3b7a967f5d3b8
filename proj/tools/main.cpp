#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "flowgate/driver.hpp"

namespace {

std::vector<std::pair<std::string, std::string>> parse_overlap_args(
    const std::vector<std::string>& raw) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& arg : raw) {
        const auto eq = arg.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == arg.size())
            throw CLI::ValidationError("--overlap expects label=dir, got '" + arg + "'");
        out.emplace_back(arg.substr(0, eq), arg.substr(eq + 1));
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"flowgate — gated information flow for multi-agent LLM pipelines"};
    app.require_subcommand(1);

    flowgate::RunOptions run_options;
    std::uint64_t run_seed = 0;
    auto* run = app.add_subcommand("run", "run a dataset through the gated multi-agent pipeline");
    run->add_option("--config", run_options.config_path, "config file")->required();
    run->add_option("--dataset", run_options.dataset_path, "dataset (line-delimited JSON)")
        ->required();
    run->add_option("--pool", run_options.pool_path, "indicator pool file");
    run->add_option("--out", run_options.out_dir, "output directory")->required();
    run->add_option("--jobs", run_options.jobs, "parallel tasks")->default_val(1);
    auto* run_seed_opt = run->add_option("--seed", run_seed, "override the scripted embedder seed");

    flowgate::MineOptions mine_options;
    std::uint64_t mine_seed = 0;
    auto* mine = app.add_subcommand("mine", "mine an indicator pool from failed roll-outs");
    mine->add_option("--config", mine_options.config_path, "config file")->required();
    mine->add_option("--dataset", mine_options.dataset_path,
                     "dataset with gold answers (line-delimited JSON)")
        ->required();
    mine->add_option("--pool-out", mine_options.pool_out, "output pool file")->required();
    mine->add_option("--log", mine_options.build_log, "build log path (default <pool-out>.log.jsonl)");
    auto* mine_seed_opt =
        mine->add_option("--seed", mine_seed, "override the scripted embedder seed");

    flowgate::StatsOptions stats_options;
    std::vector<std::string> overlap_raw;
    auto* stats = app.add_subcommand("stats", "iteration histogram and indicator overlap reports");
    stats->add_option("--dir", stats_options.trajectory_dir, "trajectory directory")->required();
    stats->add_option("--overlap", overlap_raw, "label=dir pairs for the overlap matrix");
    stats->add_option("--out", stats_options.out_dir, "write report files here");
    stats->add_option("--top-n", stats_options.top_n, "profile size for overlap")->default_val(10);

    flowgate::PoolInspectOptions inspect_options;
    auto* pool = app.add_subcommand("pool", "pool utilities");
    pool->require_subcommand(1);
    auto* inspect = pool->add_subcommand("inspect", "print pool entries and nearest neighbors");
    inspect->add_option("--pool", inspect_options.pool_path, "pool file")->required();
    inspect->add_option("--dim", inspect_options.dim, "embedding dimension (0 = infer)");
    inspect->add_option("--query", inspect_options.query, "text to embed and look up");
    inspect->add_option("-k,--top-k", inspect_options.k, "neighbors to print")->default_val(5);
    inspect->add_option("--seed", inspect_options.seed, "scripted embedder seed")->default_val(42);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return flowgate::kExitConfigError;
    }

    if (run->parsed()) {
        if (!run_seed_opt->empty()) run_options.seed = run_seed;
        return flowgate::cmd_run(run_options, std::cout, std::cerr);
    }
    if (mine->parsed()) {
        if (!mine_seed_opt->empty()) mine_options.seed = mine_seed;
        return flowgate::cmd_mine(mine_options, std::cout, std::cerr);
    }
    if (stats->parsed()) {
        try {
            stats_options.overlap_dirs = parse_overlap_args(overlap_raw);
        } catch (const CLI::Error& e) {
            std::cerr << e.what() << "\n";
            return flowgate::kExitConfigError;
        }
        return flowgate::cmd_stats(stats_options, std::cout, std::cerr);
    }
    if (pool->parsed() && inspect->parsed())
        return flowgate::cmd_pool_inspect(inspect_options, std::cout, std::cerr);

    return flowgate::kExitConfigError;
}
