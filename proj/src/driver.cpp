#include "flowgate/driver.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>

#include "flowgate/analytics.hpp"
#include "flowgate/config.hpp"
#include "flowgate/indicator_pool.hpp"
#include "flowgate/logging.hpp"
#include "flowgate/miner.hpp"
#include "flowgate/runtime.hpp"

namespace flowgate {

namespace fs = std::filesystem;

std::vector<TaskSpec> load_dataset(const std::string& path, const std::string& default_domain,
                                   bool require_gold) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open dataset '" + path + "'");
    std::vector<TaskSpec> tasks;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (j.is_discarded())
            throw ConfigError("dataset '" + path + "' line " + std::to_string(line_no) +
                              ": invalid JSON");
        TaskSpec task;
        if (!j.contains("id") || !j.at("id").is_string() || j.at("id").get<std::string>().empty())
            throw ConfigError("dataset '" + path + "' line " + std::to_string(line_no) +
                              ": missing non-empty 'id'");
        task.id = j.at("id").get<std::string>();
        if (!j.contains("question") || !j.at("question").is_string() ||
            j.at("question").get<std::string>().empty())
            throw ConfigError("dataset '" + path + "' line " + std::to_string(line_no) + " (id '" +
                              task.id + "'): missing non-empty 'question'");
        task.question = j.at("question").get<std::string>();
        if (j.contains("gold_answer") && !j.at("gold_answer").is_null())
            task.gold_answer = j.at("gold_answer").get<std::string>();
        if (require_gold && !task.gold_answer)
            throw ConfigError("dataset '" + path + "' line " + std::to_string(line_no) + " (id '" +
                              task.id + "'): missing 'gold_answer'");
        task.domain_tag = j.value("domain_tag", default_domain);
        tasks.push_back(std::move(task));
    }
    return tasks;
}

std::vector<Trajectory> load_trajectory_dir(const std::string& dir,
                                            std::vector<std::string>* unreadable) {
    if (!fs::is_directory(dir)) throw ConfigError("'" + dir + "' is not a directory");
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        if (ext == ".json" || ext == ".jsonl") files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());

    std::vector<Trajectory> trajectories;
    for (const auto& file : files) {
        try {
            std::ifstream in(file);
            if (!in) throw ParseError("cannot open file");
            std::string line;
            bool found = false;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                trajectories.push_back(json::parse(line).get<Trajectory>());
                found = true;
                break;
            }
            if (!found) throw ParseError("file holds no trajectory");
        } catch (const std::exception& e) {
            if (unreadable) unreadable->push_back(file + ": " + e.what());
        }
    }
    return trajectories;
}

std::string sanitize_filename(const std::string& id) {
    std::string out;
    for (char c : id)
        out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' ||
                              c == '-'
                          ? c
                          : '_');
    return out.empty() ? std::string("task") : out;
}

namespace {

std::string format_accuracy(double accuracy) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(4) << accuracy;
    return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write '" + path + "'");
    out << content;
}

} // namespace

int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err) {
    try {
        AppConfig config = AppConfig::load(options.config_path);
        if (options.seed) config.embedding.seed = *options.seed;
        if (options.jobs < 1) throw ConfigError("--jobs must be positive");

        const std::vector<TaskSpec> tasks =
            load_dataset(options.dataset_path, config.default_domain, /*require_gold=*/false);

        std::optional<IndicatorPool> pool;
        if (!options.pool_path.empty()) {
            pool = IndicatorPool::load(options.pool_path, config.embedding.dim);
        } else if (config.run.scrutiny && !config.run.zero_shot) {
            throw ConfigError("no pool file given and zero_shot is false; pass --pool or "
                              "set [gate] zero_shot = true");
        }

        const BackendRegistry registry = config.build_registry(config.embedding.seed);
        const std::vector<AgentSpec> roster = config.build_roster();
        const RoutingPolicy policy = config.build_policy();
        const Runtime runtime(registry, config.run);

        fs::create_directories(options.out_dir);
        const fs::path trajectory_dir = fs::path(options.out_dir) / "trajectories";
        fs::create_directories(trajectory_dir);
        write_text_file((fs::path(options.out_dir) / "config.resolved.ini").string(),
                        config.to_ini());

        // embed the pool once up front so parallel tasks share it read-only
        if (pool && config.run.scrutiny && !config.run.zero_shot)
            pool->ensure_condition_embeddings(registry.embedding());

        std::vector<std::optional<Trajectory>> results(tasks.size());
        std::vector<std::string> failures(tasks.size());
        std::atomic<std::size_t> next{0};
        std::atomic<bool> config_failed{false};
        std::string config_failure;
        std::mutex config_failure_mutex;

        auto worker = [&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= tasks.size() || config_failed.load()) return;
                try {
                    Trajectory trajectory =
                        runtime.run_task(tasks[i], roster, policy, pool ? &*pool : nullptr);
                    const fs::path file =
                        trajectory_dir / (sanitize_filename(tasks[i].id) + ".jsonl");
                    write_text_file(file.string(), json(trajectory).dump() + "\n");
                    results[i] = std::move(trajectory);
                } catch (const ConfigError& e) {
                    std::lock_guard<std::mutex> lock(config_failure_mutex);
                    config_failure = e.what();
                    config_failed.store(true);
                    return;
                } catch (const std::exception& e) {
                    failures[i] = e.what();
                }
            }
        };

        const int jobs = std::min<int>(options.jobs, static_cast<int>(std::max<std::size_t>(
                                                         tasks.size(), 1)));
        if (jobs <= 1) {
            worker();
        } else {
            std::vector<std::thread> threads;
            for (int i = 0; i < jobs; ++i) threads.emplace_back(worker);
            for (auto& t : threads) t.join();
        }
        if (config_failed.load()) throw ConfigError(config_failure);

        std::vector<Trajectory> succeeded;
        json failed_list = json::array();
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            if (results[i])
                succeeded.push_back(*results[i]);
            else
                failed_list.push_back(json{{"id", tasks[i].id}, {"error", failures[i]}});
        }

        const IterationHistogram histogram = iteration_histogram(succeeded);
        long fallback_count = 0;
        for (const auto& t : succeeded) fallback_count += static_cast<long>(t.fallback_events.size());
        const bool gradable = !succeeded.empty() &&
                              std::all_of(succeeded.begin(), succeeded.end(), [](const auto& t) {
                                  return t.task.gold_answer.has_value();
                              });

        json report{{"tasks", tasks.size()},
                    {"succeeded", succeeded.size()},
                    {"failed", failed_list},
                    {"fallback_events", fallback_count},
                    {"histogram", histogram_to_json(histogram)}};
        std::ostringstream text;
        text << "tasks: " << tasks.size() << "  succeeded: " << succeeded.size()
             << "  failed: " << failed_list.size() << "\n";
        if (gradable) {
            const GradeReport grades = grade_run(succeeded);
            report["accuracy"] = grades.accuracy;
            json verdicts = json::array();
            for (const auto& g : grades.verdicts)
                verdicts.push_back(json{{"id", g.task_id},
                                        {"correct", g.correct},
                                        {"answered", g.answered},
                                        {"expected", g.expected}});
            report["verdicts"] = std::move(verdicts);
            text << "accuracy: " << format_accuracy(grades.accuracy) << "\n";
        }
        text << "fallback events: " << fallback_count << "\n\n" << histogram_table(histogram);

        write_text_file((fs::path(options.out_dir) / "report.json").string(),
                        report.dump(2) + "\n");
        write_text_file((fs::path(options.out_dir) / "report.txt").string(), text.str());
        out << text.str();

        return failed_list.empty() ? kExitOk : kExitTaskFailure;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitTaskFailure;
    }
}

int cmd_mine(const MineOptions& options, std::ostream& out, std::ostream& err) {
    try {
        AppConfig config = AppConfig::load(options.config_path);
        if (options.seed) config.embedding.seed = *options.seed;

        const std::vector<TaskSpec> tasks =
            load_dataset(options.dataset_path, config.default_domain, /*require_gold=*/true);

        const BackendRegistry registry = config.build_registry(config.embedding.seed);
        const std::vector<AgentSpec> roster = config.build_roster();
        const RoutingPolicy policy = config.build_policy();

        const std::string log_path =
            options.build_log.empty() ? options.pool_out + ".log.jsonl" : options.build_log;
        const Miner miner(registry, config.run);
        const PoolStats stats = miner.build_pool(tasks, roster, policy, options.pool_out, log_path);

        out << "tasks=" << stats.tasks << " failures=" << stats.failures
            << " candidates=" << stats.candidates << " inserted=" << stats.inserted
            << " duplicates_dropped=" << stats.duplicates_dropped
            << " parse_failures=" << stats.parse_failures << "\n";
        out << "pool written to " << options.pool_out << "\n";
        return kExitOk;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitTaskFailure;
    }
}

int cmd_stats(const StatsOptions& options, std::ostream& out, std::ostream& err) {
    try {
        std::vector<std::string> unreadable;
        const std::vector<Trajectory> trajectories =
            load_trajectory_dir(options.trajectory_dir, &unreadable);
        if (trajectories.empty())
            log_warn("no trajectories found in '" + options.trajectory_dir + "'");

        const IterationHistogram histogram = iteration_histogram(trajectories);
        out << histogram_table(histogram);

        json report{{"histogram", histogram_to_json(histogram)}};

        if (!options.overlap_dirs.empty()) {
            std::map<std::string, std::vector<Trajectory>> runs;
            for (const auto& [label, dir] : options.overlap_dirs)
                runs[label] = load_trajectory_dir(dir, &unreadable);
            const OverlapMatrix matrix = top_indicator_overlap(runs, options.top_n);
            out << "\n" << overlap_csv(matrix);
            report["overlap"] = overlap_to_json(matrix);
            if (!options.out_dir.empty()) {
                fs::create_directories(options.out_dir);
                write_text_file((fs::path(options.out_dir) / "overlap.csv").string(),
                                overlap_csv(matrix));
            }
        }

        if (!options.out_dir.empty()) {
            fs::create_directories(options.out_dir);
            write_text_file((fs::path(options.out_dir) / "stats.json").string(),
                            report.dump(2) + "\n");
            write_text_file((fs::path(options.out_dir) / "stats.txt").string(),
                            histogram_table(histogram));
        }

        for (const auto& bad : unreadable) err << "skipped unreadable trajectory: " << bad << "\n";
        return unreadable.empty() ? kExitOk : kExitTaskFailure;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitTaskFailure;
    }
}

int cmd_pool_inspect(const PoolInspectOptions& options, std::ostream& out, std::ostream& err) {
    try {
        int dim = options.dim;
        if (dim <= 0) {
            // infer from the first stored embedding
            std::ifstream in(options.pool_path);
            if (!in) throw ConfigError("cannot open pool file '" + options.pool_path + "'");
            std::string line;
            while (std::getline(in, line) && dim <= 0) {
                if (line.empty()) continue;
                const json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
                if (j.is_discarded()) break;
                if (j.contains("embedding_condition"))
                    dim = static_cast<int>(j.at("embedding_condition").size());
                else if (j.contains("embedding_dedup"))
                    dim = static_cast<int>(j.at("embedding_dedup").size());
            }
            if (dim <= 0)
                throw ConfigError("pool stores no embeddings; pass --dim explicitly");
        }

        IndicatorPool pool = IndicatorPool::load(options.pool_path, dim);
        out << "pool: " << pool.size() << " indicators, dimension " << dim << "\n";
        for (const auto& ind : pool.entries()) {
            out << "- " << ind.name;
            if (ind.domain_tag) out << " [" << *ind.domain_tag << "]";
            std::string def = ind.definition.substr(0, 100);
            for (auto& c : def)
                if (c == '\n') c = ' ';
            out << ": " << def << (ind.definition.size() > 100 ? "..." : "") << "\n";
        }

        if (!options.query.empty()) {
            ScriptedEmbeddingBackend embedder(options.seed, dim);
            pool.ensure_condition_embeddings(embedder);
            const auto hits = pool.retrieve_top_k(embedder.embed(options.query), options.k);
            out << "\nnearest to \"" << options.query << "\":\n";
            for (const auto& hit : hits)
                out << "  " << hit.rank << ". " << std::fixed << std::setprecision(6) << hit.score
                    << "  " << hit.indicator.name << "\n";
        }
        return kExitOk;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitTaskFailure;
    }
}

} // namespace flowgate
