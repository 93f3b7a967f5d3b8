#include "flowgate/backends.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <thread>

#include "httplib.h"

#include "flowgate/logging.hpp"
#include "flowgate/sha256.hpp"

namespace flowgate {

const char* chat_role_name(ChatRole role) {
    switch (role) {
    case ChatRole::System: return "system";
    case ChatRole::User: return "user";
    case ChatRole::Assistant: return "assistant";
    }
    return "?";
}

namespace {

ChatRole chat_role_from_name(const std::string& name) {
    if (name == "system") return ChatRole::System;
    if (name == "user") return ChatRole::User;
    if (name == "assistant") return ChatRole::Assistant;
    throw ParseError("unknown chat role '" + name + "'");
}

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// base_url -> (origin for the client, path prefix for requests)
std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
    const auto scheme_end = base_url.find("://");
    const std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto path_start = base_url.find('/', host_start);
    if (path_start == std::string::npos) return {base_url, ""};
    std::string prefix = base_url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {base_url.substr(0, path_start), prefix};
}

json post_json_with_retry(const std::string& base_url, const std::string& api_key,
                          const std::string& endpoint, const json& body,
                          const RetryPolicy& retry) {
    const auto [origin, prefix] = split_base_url(base_url);
    std::string last_error;
    int backoff_ms = retry.initial_backoff_ms;
    for (int attempt = 1; attempt <= retry.attempts; ++attempt) {
        if (attempt > 1) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
            backoff_ms = static_cast<int>(backoff_ms * retry.backoff_factor);
        }
        httplib::Client client(origin);
        client.set_read_timeout(300, 0);
        client.set_connection_timeout(15, 0);
        httplib::Headers headers;
        if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
        auto res = client.Post(prefix + endpoint, headers, body.dump(), "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 512);
            continue;
        }
        try {
            return json::parse(res->body);
        } catch (const std::exception& e) {
            last_error = std::string("response is not JSON: ") + e.what();
        }
    }
    throw BackendError("request to " + base_url + endpoint + " failed after " +
                       std::to_string(retry.attempts) + " attempts; last error: " + last_error);
}

} // namespace

json chat_request_json(const std::string& backend_id,
                       const std::vector<ChatMessage>& messages, double temperature) {
    json msgs = json::array();
    for (const auto& m : messages)
        msgs.push_back(json{{"role", chat_role_name(m.role)}, {"content", m.content}});
    return json{{"backend", backend_id}, {"messages", std::move(msgs)}, {"temperature", temperature}};
}

std::string chat_request_digest(const std::string& backend_id,
                                const std::vector<ChatMessage>& messages, double temperature) {
    return sha256_hex(chat_request_json(backend_id, messages, temperature).dump());
}

// --- TranscriptStore -------------------------------------------------------

json TranscriptStore::record_to_json(const TranscriptRecord& record) {
    return json{{"key_digest", record.key_digest},
                {"request", record.request},
                {"response", record.response},
                {"timestamp", record.timestamp}};
}

TranscriptStore TranscriptStore::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open transcript file '" + path + "'");
    TranscriptStore store;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const std::exception& e) {
            throw ParseError("transcript '" + path + "' line " + std::to_string(line_no) +
                             ": invalid JSON (" + e.what() + ")");
        }
        TranscriptRecord rec;
        try {
            rec.key_digest = j.at("key_digest").get<std::string>();
            rec.request = j.value("request", json::object());
            rec.response = j.at("response").get<std::string>();
            rec.timestamp = j.value("timestamp", std::string());
        } catch (const std::exception& e) {
            throw ParseError("transcript '" + path + "' line " + std::to_string(line_no) +
                             ": missing field (" + e.what() + ")");
        }
        store.add(std::move(rec));
    }
    return store;
}

void TranscriptStore::save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write transcript file '" + path + "'");
    for (const auto& rec : records_) out << record_to_json(rec).dump() << "\n";
}

void TranscriptStore::add(TranscriptRecord record) {
    const auto [it, inserted] = index_.emplace(record.key_digest, records_.size());
    (void)it;
    if (inserted) records_.push_back(std::move(record));
    // duplicate keys keep the first record; replay stays deterministic
}

const TranscriptRecord* TranscriptStore::find(const std::string& key_digest) const {
    const auto it = index_.find(key_digest);
    return it == index_.end() ? nullptr : &records_[it->second];
}

// --- Scripted / recording backends ----------------------------------------

ScriptedChatBackend::ScriptedChatBackend(std::string backend_id,
                                         std::shared_ptr<const TranscriptStore> store)
    : backend_id_(std::move(backend_id)), store_(std::move(store)) {}

std::string ScriptedChatBackend::generate(const std::vector<ChatMessage>& messages,
                                          const SamplingParams& params) {
    const std::string digest = chat_request_digest(backend_id_, messages, params.temperature);
    const TranscriptRecord* rec = store_->find(digest);
    if (!rec) {
        std::string preview = messages.empty() ? std::string("<no messages>")
                                               : messages.back().content.substr(0, 120);
        throw FixtureMissingError("no recorded response for backend '" + backend_id_ +
                                  "' key " + digest + " (last message: \"" + preview + "\")");
    }
    return rec->response;
}

RecordingChatBackend::RecordingChatBackend(std::string backend_id,
                                           std::shared_ptr<ChatBackend> inner,
                                           std::string record_path)
    : backend_id_(std::move(backend_id)), inner_(std::move(inner)),
      record_path_(std::move(record_path)) {}

std::string RecordingChatBackend::generate(const std::vector<ChatMessage>& messages,
                                           const SamplingParams& params) {
    const std::string response = inner_->generate(messages, params);
    TranscriptRecord rec;
    rec.key_digest = chat_request_digest(backend_id_, messages, params.temperature);
    rec.request = chat_request_json(backend_id_, messages, params.temperature);
    rec.response = response;
    rec.timestamp = iso_timestamp();
    {
        std::lock_guard<std::mutex> lock(write_mutex_);
        std::ofstream out(record_path_, std::ios::app);
        if (!out) throw Error("cannot append to transcript file '" + record_path_ + "'");
        out << TranscriptStore::record_to_json(rec).dump() << "\n";
    }
    return response;
}

// --- HTTP backends ---------------------------------------------------------

HttpChatBackend::HttpChatBackend(std::string base_url, std::string api_key, std::string model,
                                 json extra_body, RetryPolicy retry)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)), model_(std::move(model)),
      extra_body_(std::move(extra_body)), retry_(retry) {}

std::string HttpChatBackend::generate(const std::vector<ChatMessage>& messages,
                                      const SamplingParams& params) {
    json body{{"model", model_}, {"messages", json::array()},
              {"temperature", params.temperature}, {"max_tokens", params.max_tokens}};
    for (const auto& m : messages)
        body["messages"].push_back(json{{"role", chat_role_name(m.role)}, {"content", m.content}});
    for (const auto& [k, v] : extra_body_.items()) body[k] = v;

    const json reply = post_json_with_retry(base_url_, api_key_, "/chat/completions", body, retry_);
    try {
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const std::exception& e) {
        throw BackendError(std::string("malformed chat completion response: ") + e.what());
    }
}

HttpEmbeddingBackend::HttpEmbeddingBackend(std::string base_url, std::string api_key,
                                           std::string model, int dimension, RetryPolicy retry)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)), model_(std::move(model)),
      dimension_(dimension), retry_(retry) {}

std::vector<double> HttpEmbeddingBackend::embed(const std::string& text) {
    const json body{{"model", model_}, {"input", text}};
    const json reply = post_json_with_retry(base_url_, api_key_, "/embeddings", body, retry_);
    std::vector<double> vec;
    try {
        vec = reply.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const std::exception& e) {
        throw BackendError(std::string("malformed embeddings response: ") + e.what());
    }
    if (static_cast<int>(vec.size()) != dimension_)
        throw DimensionError("embedding service returned dimension " + std::to_string(vec.size()) +
                             ", configured " + std::to_string(dimension_));
    return vec;
}

// --- Scripted embedder ------------------------------------------------------

ScriptedEmbeddingBackend::ScriptedEmbeddingBackend(std::uint64_t seed, int dimension)
    : seed_(seed), dimension_(dimension) {
    if (dimension <= 0) throw ConfigError("embedding dimension must be positive");
}

std::vector<double> ScriptedEmbeddingBackend::embed(const std::string& text) {
    std::vector<double> vec(static_cast<std::size_t>(dimension_));
    double norm_sq = 0.0;
    for (int i = 0; i < dimension_; ++i) {
        std::string material = "emb:";
        for (int b = 0; b < 8; ++b) material.push_back(static_cast<char>((seed_ >> (b * 8)) & 0xff));
        for (int b = 0; b < 4; ++b)
            material.push_back(static_cast<char>((static_cast<std::uint32_t>(i) >> (b * 8)) & 0xff));
        material.push_back(':');
        material += text;
        const auto digest = sha256(material);
        std::uint64_t word = 0;
        for (int b = 0; b < 8; ++b) word = (word << 8) | digest[b];
        // top 53 bits -> [0,1) -> [-1,1)
        const double unit = static_cast<double>(word >> 11) / 9007199254740992.0;
        vec[static_cast<std::size_t>(i)] = unit * 2.0 - 1.0;
        norm_sq += vec[static_cast<std::size_t>(i)] * vec[static_cast<std::size_t>(i)];
    }
    if (norm_sq == 0.0) {
        vec[0] = 1.0;
        return vec;
    }
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (double& x : vec) x *= inv;
    return vec;
}

// --- Caching embedder --------------------------------------------------------

CachingEmbeddingBackend::CachingEmbeddingBackend(std::shared_ptr<EmbeddingBackend> inner)
    : inner_(std::move(inner)) {}

std::vector<double> CachingEmbeddingBackend::embed(const std::string& text) {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        const auto it = cache_.find(text);
        if (it != cache_.end()) return it->second;
    }
    std::vector<double> vec = inner_->embed(text);
    std::lock_guard<std::mutex> lock(mutex_);
    ++inner_calls_;
    const auto [it, inserted] = cache_.emplace(text, std::move(vec));
    if (!inserted) --inner_calls_; // another thread beat us; keep its vector
    return it->second;
}

std::size_t CachingEmbeddingBackend::cache_size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return cache_.size();
}

std::size_t CachingEmbeddingBackend::inner_calls() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return inner_calls_;
}

// --- Registry ----------------------------------------------------------------

void BackendRegistry::register_chat(const std::string& id, std::shared_ptr<ChatBackend> backend) {
    if (id.empty()) throw ConfigError("backend id must be non-empty");
    if (!backend) throw ConfigError("backend '" + id + "' is null");
    if (!chat_.emplace(id, std::move(backend)).second)
        throw ConfigError("backend id '" + id + "' registered twice");
}

void BackendRegistry::set_embedding(std::shared_ptr<EmbeddingBackend> backend) {
    embedding_ = std::move(backend);
}

bool BackendRegistry::has_chat(const std::string& id) const { return chat_.count(id) > 0; }

ChatBackend& BackendRegistry::chat(const std::string& id) const {
    const auto it = chat_.find(id);
    if (it == chat_.end()) throw UnknownBackendError("unknown backend '" + id + "'");
    return *it->second;
}

EmbeddingBackend& BackendRegistry::embedding() const {
    if (!embedding_) throw ConfigError("no embedding service configured");
    return *embedding_;
}

std::string BackendRegistry::generate(const std::string& backend_id,
                                      const std::vector<ChatMessage>& messages,
                                      const SamplingParams& params) const {
    for (const auto& m : messages)
        if (m.content.empty() && m.role != ChatRole::Assistant)
            throw ContractError("chat message content must be non-empty for " +
                                std::string(chat_role_name(m.role)) + " messages");
    return chat(backend_id).generate(messages, params);
}

} // namespace flowgate
