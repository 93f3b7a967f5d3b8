#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flowgate/backends.hpp"
#include "flowgate/domain.hpp"
#include "flowgate/runtime.hpp"

namespace flowgate {

struct BackendDef {
    std::string name;
    std::string kind = "scripted"; // "scripted" | "http"
    std::string model;
    std::string base_url_env = "MODEL_BASE_URL";
    std::string api_key_env = "MODEL_API_KEY";
    json extra_body = json::object(); // merged verbatim into each request
};

struct EmbeddingDef {
    std::string kind = "scripted"; // "scripted" | "http"
    int dim = 8;
    std::uint64_t seed = 42;
    std::string model;
    std::string base_url_env = "EMBED_BASE_URL";
    std::string api_key_env = "EMBED_API_KEY";
};

struct AgentDef {
    std::string name;
    std::string backend;
    bool decision = false;
    double temperature = 0.7;
    int max_tokens = 2048;
    std::string instructions;
};

struct RoutingDef {
    std::string kind = "scripted"; // "scripted" | "selector"
    std::vector<std::string> sequence;
    std::string selector_backend;
    std::string selector_template_path;
};

// Whole-run configuration parsed from one sectioned key=value file.
// Relative paths inside the file resolve against the file's directory.
struct AppConfig {
    RunConfig run;
    EmbeddingDef embedding;
    std::vector<BackendDef> backends;
    std::string transcript_path; // shared replay transcript for scripted backends
    std::string record_path;     // when set, every backend call is recorded here
    std::vector<AgentDef> agents;
    RoutingDef routing;
    std::string default_domain = "math";
    std::string base_dir;

    static AppConfig load(const std::string& path);
    static AppConfig parse(const std::string& text, const std::string& base_dir,
                           const std::string& origin);

    // Defaults-resolved echo, suitable for provenance next to run outputs.
    std::string to_ini() const;

    BackendRegistry build_registry(std::optional<std::uint64_t> seed_override = {}) const;
    std::vector<AgentSpec> build_roster() const;
    RoutingPolicy build_policy() const;

    std::string resolve_path(const std::string& path) const;
};

} // namespace flowgate
