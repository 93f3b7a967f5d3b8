#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "flowgate/backends.hpp"
#include "flowgate/config.hpp"
#include "flowgate/domain.hpp"
#include "flowgate/indicator_pool.hpp"
#include "flowgate/runtime.hpp"

namespace testsupport {

using namespace flowgate;

// Registers scripted responses for exact requests; the digests are computed
// through the same canonicalization the backends use.
class ScriptBuilder {
public:
    ScriptBuilder() : store_(std::make_shared<TranscriptStore>()) {}

    void add(const std::string& backend_id, const std::vector<ChatMessage>& messages,
             double temperature, const std::string& response);

    std::shared_ptr<const TranscriptStore> store() const { return store_; }
    void save(const std::string& path) const { store_->save(path); }

private:
    std::shared_ptr<TranscriptStore> store_;
};

// Wraps a backend, counting calls and capturing every message list sent.
class ProbeChatBackend : public ChatBackend {
public:
    struct Call {
        std::vector<ChatMessage> messages;
        SamplingParams params;
    };

    explicit ProbeChatBackend(std::shared_ptr<ChatBackend> inner) : inner_(std::move(inner)) {}

    std::string generate(const std::vector<ChatMessage>& messages,
                         const SamplingParams& params) override {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            calls_.push_back(Call{messages, params});
        }
        return inner_->generate(messages, params);
    }

    std::vector<Call> calls() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return calls_;
    }
    std::size_t call_count() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return calls_.size();
    }

private:
    std::shared_ptr<ChatBackend> inner_;
    mutable std::mutex mutex_;
    std::vector<Call> calls_;
};

// Auditor reply in the rectifier's JSON contract.
std::string verdict_json(bool flawed, const std::string& suggestion = "N/A",
                         const std::string& analysis = "N/A");

std::string keywords_json(const std::vector<std::string>& scenario,
                          const std::vector<std::string>& action);

// Scripted registry over a shared transcript: one scripted chat backend per
// id plus a caching scripted embedder of the config's dimension.
BackendRegistry make_scripted_registry(std::shared_ptr<const TranscriptStore> store,
                                       const RunConfig& config,
                                       const std::vector<std::string>& chat_ids,
                                       std::uint64_t seed = 42);

AgentSpec make_agent(const std::string& name, const std::string& backend_id,
                     bool decision = false, double temperature = 0.7);

// Registers the fixture for one plain agent turn (context render + response).
void script_agent_turn(ScriptBuilder& builder, const AgentSpec& agent, const TaskSpec& task,
                       const std::vector<KnowledgeEntry>& knowledge, const std::string& response);

// Scripts a zero-shot gate loop for one agent: per-round auditor verdicts
// against the bundled general indicator and the regenerations between flawed
// rounds. candidates[t] is the candidate text scrutinized at round t.
void script_zero_shot_rounds(ScriptBuilder& builder, const RunConfig& config,
                             const AgentSpec& agent, const TaskSpec& task,
                             const std::vector<std::string>& candidates,
                             const std::vector<bool>& flawed,
                             const std::vector<KnowledgeEntry>& knowledge = {});

// Fully scripted two-agent scenario shaped like the bundled walkthrough:
// the solver's first two candidates are flagged, the third passes, the
// decider accepts immediately, and the graded answer normalizes to "11".
struct GoldenScenario {
    TaskSpec task;
    AgentSpec solver;
    AgentSpec decider;
    RunConfig config;
    ScriptedRoute route;
    std::vector<Indicator> pool_entries;
    std::shared_ptr<const TranscriptStore> transcript;

    std::string solver_o0, solver_o1, solver_o2;
    std::string decider_output;

    std::vector<AgentSpec> roster() const { return {solver, decider}; }
    IndicatorPool make_pool() const;
    BackendRegistry make_registry() const;
    AppConfig make_app_config() const;

    // config.ini, dataset.jsonl, pool.jsonl, transcript.jsonl under dir
    void write_files(const std::string& dir) const;
};

GoldenScenario build_golden_scenario();

// Unique temp directory under the system temp root; removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::string& path() const { return path_; }
    std::string file(const std::string& name) const;

private:
    std::string path_;
};

std::string read_file(const std::string& path);

} // namespace testsupport
