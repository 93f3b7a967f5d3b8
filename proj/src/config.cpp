#include "flowgate/config.hpp"

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace flowgate {

namespace {

namespace fs = std::filesystem;

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string unescape_value(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '\\' || i + 1 >= s.size()) {
            out.push_back(s[i]);
            continue;
        }
        switch (s[++i]) {
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case '\\': out.push_back('\\'); break;
        default:
            out.push_back('\\');
            out.push_back(s[i]);
        }
    }
    return out;
}

std::string escape_value(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '\n')
            out += "\\n";
        else if (c == '\t')
            out += "\\t";
        else if (c == '\\')
            out += "\\\\";
        else
            out.push_back(c);
    }
    return out;
}

struct KeyError {
    std::string section, key;
    [[noreturn]] void fail(const std::string& why) const {
        throw ConfigError("config [" + section + "] " + key + ": " + why);
    }
};

bool parse_bool(const std::string& value, const KeyError& at) {
    if (value == "true" || value == "yes" || value == "1") return true;
    if (value == "false" || value == "no" || value == "0") return false;
    at.fail("expected a boolean, got '" + value + "'");
}

long long parse_int(const std::string& value, const KeyError& at) {
    std::size_t consumed = 0;
    long long parsed = 0;
    try {
        parsed = std::stoll(value, &consumed);
    } catch (const std::exception&) {
        at.fail("expected an integer, got '" + value + "'");
    }
    if (consumed != value.size()) at.fail("expected an integer, got '" + value + "'");
    return parsed;
}

std::uint64_t parse_u64(const std::string& value, const KeyError& at) {
    std::size_t consumed = 0;
    std::uint64_t parsed = 0;
    try {
        parsed = std::stoull(value, &consumed);
    } catch (const std::exception&) {
        at.fail("expected an unsigned integer, got '" + value + "'");
    }
    if (consumed != value.size()) at.fail("expected an unsigned integer, got '" + value + "'");
    return parsed;
}

double parse_double(const std::string& value, const KeyError& at) {
    std::size_t consumed = 0;
    double parsed = 0;
    try {
        parsed = std::stod(value, &consumed);
    } catch (const std::exception&) {
        at.fail("expected a number, got '" + value + "'");
    }
    if (consumed != value.size()) at.fail("expected a number, got '" + value + "'");
    return parsed;
}

std::vector<std::string> parse_list(const std::string& value) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(value);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string read_file(const std::string& path, const std::string& what) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + what + " '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string env_or_fail(const std::string& var, const std::string& what) {
    const char* value = std::getenv(var.c_str());
    if (!value || !*value)
        throw ConfigError("environment variable " + var + " is required for " + what);
    return value;
}

std::string env_or_empty(const std::string& var) {
    const char* value = std::getenv(var.c_str());
    return value ? value : "";
}

} // namespace

std::string AppConfig::resolve_path(const std::string& path) const {
    if (path.empty() || base_dir.empty()) return path;
    const fs::path p(path);
    return p.is_absolute() ? path : (fs::path(base_dir) / p).string();
}

AppConfig AppConfig::load(const std::string& path) {
    const std::string text = read_file(path, "config file");
    return parse(text, fs::path(path).parent_path().string(), path);
}

AppConfig AppConfig::parse(const std::string& text, const std::string& base_dir,
                           const std::string& origin) {
    AppConfig config;
    config.base_dir = base_dir;

    std::string section;
    AgentDef* agent = nullptr;
    BackendDef* backend = nullptr;

    std::istringstream in(text);
    std::string raw_line;
    int line_no = 0;
    while (std::getline(in, raw_line)) {
        ++line_no;
        const std::string line = trim(raw_line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;

        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(origin + " line " + std::to_string(line_no) +
                                  ": malformed section header '" + line + "'");
            section = trim(line.substr(1, line.size() - 2));
            agent = nullptr;
            backend = nullptr;
            if (section.rfind("agent.", 0) == 0) {
                config.agents.push_back(AgentDef{});
                agent = &config.agents.back();
                agent->name = section.substr(6);
                if (agent->name.empty())
                    throw ConfigError(origin + " line " + std::to_string(line_no) +
                                      ": agent section needs a name");
            } else if (section.rfind("backend.", 0) == 0) {
                config.backends.push_back(BackendDef{});
                backend = &config.backends.back();
                backend->name = section.substr(8);
                if (backend->name.empty())
                    throw ConfigError(origin + " line " + std::to_string(line_no) +
                                      ": backend section needs a name");
            } else if (section != "gate" && section != "rectifier" && section != "miner" &&
                       section != "embedding" && section != "backends" && section != "routing" &&
                       section != "run") {
                throw ConfigError(origin + " line " + std::to_string(line_no) +
                                  ": unknown section [" + section + "]");
            }
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + " line " + std::to_string(line_no) +
                              ": expected key = value, got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = unescape_value(trim(line.substr(eq + 1)));
        const KeyError at{section, key};

        if (section == "gate") {
            if (key == "t_max") config.run.t_max = static_cast<int>(parse_int(value, at));
            else if (key == "k_act") config.run.k_act = static_cast<int>(parse_int(value, at));
            else if (key == "k_dedup") config.run.k_dedup = static_cast<int>(parse_int(value, at));
            else if (key == "gamma") config.run.gamma = static_cast<int>(parse_int(value, at));
            else if (key == "max_chat_turns")
                config.run.max_chat_turns = static_cast<int>(parse_int(value, at));
            else if (key == "zero_shot") config.run.zero_shot = parse_bool(value, at);
            else if (key == "reset_budget")
                config.run.reset_budget = static_cast<int>(parse_int(value, at));
            else if (key == "scrutiny") config.run.scrutiny = parse_bool(value, at);
            else at.fail("unknown key");
        } else if (section == "rectifier") {
            if (key == "backend") config.run.rectifier_backend = value;
            else if (key == "temperature")
                config.run.rectifier_sampling.temperature = parse_double(value, at);
            else if (key == "max_tokens")
                config.run.rectifier_sampling.max_tokens = static_cast<int>(parse_int(value, at));
            else if (key == "parallelism")
                config.run.eval_parallelism = static_cast<int>(parse_int(value, at));
            else if (key == "fail_closed") config.run.fail_closed = parse_bool(value, at);
            else if (key == "math_template_path")
                config.run.math_auditor_template =
                    read_file(config.resolve_path(value), "math auditor template");
            else if (key == "code_template_path")
                config.run.code_auditor_template =
                    read_file(config.resolve_path(value), "code auditor template");
            else at.fail("unknown key");
        } else if (section == "miner") {
            if (key == "teacher_backend") config.run.teacher_backend = value;
            else if (key == "dedup_backend") config.run.dedup_backend = value;
            else if (key == "mine_decision_agent")
                config.run.mine_decision_agent = parse_bool(value, at);
            else at.fail("unknown key");
        } else if (section == "embedding") {
            if (key == "kind") config.embedding.kind = value;
            else if (key == "dim") config.embedding.dim = static_cast<int>(parse_int(value, at));
            else if (key == "seed") config.embedding.seed = parse_u64(value, at);
            else if (key == "model") config.embedding.model = value;
            else if (key == "base_url_env") config.embedding.base_url_env = value;
            else if (key == "api_key_env") config.embedding.api_key_env = value;
            else at.fail("unknown key");
        } else if (section == "backends") {
            if (key == "transcript") config.transcript_path = value;
            else if (key == "record") config.record_path = value;
            else at.fail("unknown key");
        } else if (section == "routing") {
            if (key == "kind") config.routing.kind = value;
            else if (key == "sequence") config.routing.sequence = parse_list(value);
            else if (key == "selector_backend") config.routing.selector_backend = value;
            else if (key == "selector_template_path") config.routing.selector_template_path = value;
            else at.fail("unknown key");
        } else if (section == "run") {
            if (key == "default_domain") config.default_domain = value;
            else at.fail("unknown key");
        } else if (agent) {
            if (key == "backend") agent->backend = value;
            else if (key == "decision") agent->decision = parse_bool(value, at);
            else if (key == "temperature") agent->temperature = parse_double(value, at);
            else if (key == "max_tokens") agent->max_tokens = static_cast<int>(parse_int(value, at));
            else if (key == "instructions") agent->instructions = value;
            else at.fail("unknown key");
        } else if (backend) {
            if (key == "kind") backend->kind = value;
            else if (key == "model") backend->model = value;
            else if (key == "base_url_env") backend->base_url_env = value;
            else if (key == "api_key_env") backend->api_key_env = value;
            else if (key == "extra_body") {
                json parsed = json::parse(value, nullptr, /*allow_exceptions=*/false);
                if (parsed.is_discarded() || !parsed.is_object())
                    at.fail("extra_body must be a JSON object");
                backend->extra_body = std::move(parsed);
            } else {
                at.fail("unknown key");
            }
        } else {
            throw ConfigError(origin + " line " + std::to_string(line_no) +
                              ": key '" + key + "' outside any section");
        }
    }

    config.run.embedding_dim = config.embedding.dim;
    config.run.validate();
    if (config.embedding.kind != "scripted" && config.embedding.kind != "http")
        throw ConfigError("config [embedding] kind: expected scripted or http, got '" +
                          config.embedding.kind + "'");
    if (config.routing.kind != "scripted" && config.routing.kind != "selector")
        throw ConfigError("config [routing] kind: expected scripted or selector, got '" +
                          config.routing.kind + "'");
    for (const auto& def : config.backends)
        if (def.kind != "scripted" && def.kind != "http")
            throw ConfigError("config [backend." + def.name +
                              "] kind: expected scripted or http, got '" + def.kind + "'");
    return config;
}

std::string AppConfig::to_ini() const {
    std::ostringstream out;
    out << "[gate]\n";
    out << "t_max = " << run.t_max << "\n";
    out << "k_act = " << run.k_act << "\n";
    out << "k_dedup = " << run.k_dedup << "\n";
    out << "gamma = " << run.gamma << "\n";
    out << "max_chat_turns = " << run.max_chat_turns << "\n";
    out << "zero_shot = " << (run.zero_shot ? "true" : "false") << "\n";
    out << "reset_budget = " << run.reset_budget << "\n";
    out << "scrutiny = " << (run.scrutiny ? "true" : "false") << "\n";
    out << "\n[rectifier]\n";
    out << "backend = " << run.rectifier_backend << "\n";
    out << "temperature = " << run.rectifier_sampling.temperature << "\n";
    out << "max_tokens = " << run.rectifier_sampling.max_tokens << "\n";
    out << "parallelism = " << run.eval_parallelism << "\n";
    out << "fail_closed = " << (run.fail_closed ? "true" : "false") << "\n";
    out << "\n[miner]\n";
    out << "teacher_backend = " << run.teacher_backend << "\n";
    out << "dedup_backend = " << run.dedup_backend << "\n";
    out << "mine_decision_agent = " << (run.mine_decision_agent ? "true" : "false") << "\n";
    out << "\n[embedding]\n";
    out << "kind = " << embedding.kind << "\n";
    out << "dim = " << embedding.dim << "\n";
    out << "seed = " << embedding.seed << "\n";
    if (!embedding.model.empty()) out << "model = " << embedding.model << "\n";
    out << "\n[backends]\n";
    if (!transcript_path.empty()) out << "transcript = " << escape_value(transcript_path) << "\n";
    if (!record_path.empty()) out << "record = " << escape_value(record_path) << "\n";
    for (const auto& def : backends) {
        out << "\n[backend." << def.name << "]\n";
        out << "kind = " << def.kind << "\n";
        if (!def.model.empty()) out << "model = " << def.model << "\n";
        if (def.kind == "http") {
            out << "base_url_env = " << def.base_url_env << "\n";
            out << "api_key_env = " << def.api_key_env << "\n";
        }
        if (!def.extra_body.empty()) out << "extra_body = " << def.extra_body.dump() << "\n";
    }
    for (const auto& def : agents) {
        out << "\n[agent." << def.name << "]\n";
        out << "backend = " << def.backend << "\n";
        out << "decision = " << (def.decision ? "true" : "false") << "\n";
        out << "temperature = " << def.temperature << "\n";
        out << "max_tokens = " << def.max_tokens << "\n";
        out << "instructions = " << escape_value(def.instructions) << "\n";
    }
    out << "\n[routing]\n";
    out << "kind = " << routing.kind << "\n";
    if (!routing.sequence.empty()) {
        out << "sequence = ";
        for (std::size_t i = 0; i < routing.sequence.size(); ++i)
            out << (i ? ", " : "") << routing.sequence[i];
        out << "\n";
    }
    if (!routing.selector_backend.empty())
        out << "selector_backend = " << routing.selector_backend << "\n";
    out << "\n[run]\n";
    out << "default_domain = " << default_domain << "\n";
    return out.str();
}

BackendRegistry AppConfig::build_registry(std::optional<std::uint64_t> seed_override) const {
    BackendRegistry registry;

    std::shared_ptr<const TranscriptStore> transcript;
    const bool any_scripted = [&] {
        for (const auto& def : backends)
            if (def.kind == "scripted") return true;
        return false;
    }();
    if (any_scripted) {
        if (transcript_path.empty())
            throw ConfigError("scripted backends need [backends] transcript = <path>");
        transcript = std::make_shared<const TranscriptStore>(
            TranscriptStore::load(resolve_path(transcript_path)));
    }

    for (const auto& def : backends) {
        std::shared_ptr<ChatBackend> built;
        if (def.kind == "scripted") {
            built = std::make_shared<ScriptedChatBackend>(def.name, transcript);
        } else {
            built = std::make_shared<HttpChatBackend>(
                env_or_fail(def.base_url_env, "backend '" + def.name + "'"),
                env_or_empty(def.api_key_env), def.model, def.extra_body);
        }
        if (!record_path.empty())
            built = std::make_shared<RecordingChatBackend>(def.name, std::move(built),
                                                           resolve_path(record_path));
        registry.register_chat(def.name, std::move(built));
    }

    std::shared_ptr<EmbeddingBackend> embedder;
    if (embedding.kind == "scripted") {
        embedder = std::make_shared<ScriptedEmbeddingBackend>(
            seed_override.value_or(embedding.seed), embedding.dim);
    } else {
        embedder = std::make_shared<HttpEmbeddingBackend>(
            env_or_fail(embedding.base_url_env, "the embedding service"),
            env_or_empty(embedding.api_key_env), embedding.model, embedding.dim);
    }
    registry.set_embedding(std::make_shared<CachingEmbeddingBackend>(std::move(embedder)));
    return registry;
}

std::vector<AgentSpec> AppConfig::build_roster() const {
    std::vector<AgentSpec> roster;
    for (const auto& def : agents) {
        AgentSpec spec;
        spec.role.name = def.name;
        spec.role.instructions = def.instructions;
        spec.backend_id = def.backend;
        spec.sampling = SamplingParams{def.temperature, def.max_tokens};
        spec.is_decision = def.decision;
        roster.push_back(std::move(spec));
    }
    return roster;
}

RoutingPolicy AppConfig::build_policy() const {
    if (routing.kind == "scripted") return ScriptedRoute{routing.sequence};
    SelectorRoute selector;
    selector.backend_id = routing.selector_backend;
    if (!routing.selector_template_path.empty())
        selector.template_text =
            read_file(resolve_path(routing.selector_template_path), "selector template");
    return selector;
}

} // namespace flowgate
