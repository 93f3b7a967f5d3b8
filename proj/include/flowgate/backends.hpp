#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "flowgate/domain.hpp"

namespace flowgate {

enum class ChatRole { System, User, Assistant };

struct ChatMessage {
    ChatRole role = ChatRole::User;
    std::string content;
};

inline ChatMessage system_msg(std::string content) { return {ChatRole::System, std::move(content)}; }
inline ChatMessage user_msg(std::string content) { return {ChatRole::User, std::move(content)}; }
inline ChatMessage assistant_msg(std::string content) { return {ChatRole::Assistant, std::move(content)}; }

const char* chat_role_name(ChatRole role);

// Generation service. Implementations must be safe for concurrent calls.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string generate(const std::vector<ChatMessage>& messages,
                                 const SamplingParams& params) = 0;
};

// Embedding service with a fixed output dimension.
class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    virtual std::vector<double> embed(const std::string& text) = 0;
    virtual int dimension() const = 0;
};

// Canonical request identity for record/replay: the digest covers exactly
// (backend_id, messages, temperature). max_tokens is delivery detail and
// deliberately excluded.
json chat_request_json(const std::string& backend_id,
                       const std::vector<ChatMessage>& messages,
                       double temperature);
std::string chat_request_digest(const std::string& backend_id,
                                const std::vector<ChatMessage>& messages,
                                double temperature);

struct TranscriptRecord {
    std::string key_digest;
    json request;
    std::string response;
    std::string timestamp; // empty for hand-built fixtures
};

// In-memory transcript keyed by request digest; persisted as line-delimited
// JSON. Replay lookups are repeatable (the same key can be served many times);
// when a file carries several records for one key, the first one wins.
class TranscriptStore {
public:
    TranscriptStore() = default;

    static TranscriptStore load(const std::string& path);
    void save(const std::string& path) const;

    void add(TranscriptRecord record);
    const TranscriptRecord* find(const std::string& key_digest) const;
    std::size_t size() const { return records_.size(); }

    static json record_to_json(const TranscriptRecord& record);

private:
    std::vector<TranscriptRecord> records_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Replays a transcript. Unrecorded requests fail loudly instead of
// fabricating text.
class ScriptedChatBackend : public ChatBackend {
public:
    ScriptedChatBackend(std::string backend_id, std::shared_ptr<const TranscriptStore> store);

    std::string generate(const std::vector<ChatMessage>& messages,
                         const SamplingParams& params) override;

    const std::string& backend_id() const { return backend_id_; }

private:
    std::string backend_id_;
    std::shared_ptr<const TranscriptStore> store_;
};

// Wraps a live backend and appends every exchange to a transcript file, so
// the run can later be replayed bit-identically.
class RecordingChatBackend : public ChatBackend {
public:
    RecordingChatBackend(std::string backend_id, std::shared_ptr<ChatBackend> inner,
                         std::string record_path);

    std::string generate(const std::vector<ChatMessage>& messages,
                         const SamplingParams& params) override;

private:
    std::string backend_id_;
    std::shared_ptr<ChatBackend> inner_;
    std::string record_path_;
    std::mutex write_mutex_;
};

struct RetryPolicy {
    int attempts = 3;
    int initial_backoff_ms = 1000;
    double backoff_factor = 2.0;
};

// OpenAI-compatible chat completions client. base_url includes the API
// prefix, e.g. https://api.openai.com/v1 — the client posts to
// {base_url}/chat/completions.
class HttpChatBackend : public ChatBackend {
public:
    HttpChatBackend(std::string base_url, std::string api_key, std::string model,
                    json extra_body = json::object(), RetryPolicy retry = {});

    std::string generate(const std::vector<ChatMessage>& messages,
                         const SamplingParams& params) override;

private:
    std::string base_url_;
    std::string api_key_;
    std::string model_;
    json extra_body_; // opaque pass-through merged into the request body
    RetryPolicy retry_;
};

// OpenAI-compatible embeddings client; enforces the configured dimension.
class HttpEmbeddingBackend : public EmbeddingBackend {
public:
    HttpEmbeddingBackend(std::string base_url, std::string api_key, std::string model,
                         int dimension, RetryPolicy retry = {});

    std::vector<double> embed(const std::string& text) override;
    int dimension() const override { return dimension_; }

private:
    std::string base_url_;
    std::string api_key_;
    std::string model_;
    int dimension_;
    RetryPolicy retry_;
};

// Deterministic embedder: each component is a seeded hash of the input,
// mapped to [-1, 1), then the vector is L2-normalized. Byte-identical
// output across processes and platforms.
class ScriptedEmbeddingBackend : public EmbeddingBackend {
public:
    ScriptedEmbeddingBackend(std::uint64_t seed, int dimension);

    std::vector<double> embed(const std::string& text) override;
    int dimension() const override { return dimension_; }

private:
    std::uint64_t seed_;
    int dimension_;
};

// Memoizes embed() per distinct input; a hit returns the identical vector.
class CachingEmbeddingBackend : public EmbeddingBackend {
public:
    explicit CachingEmbeddingBackend(std::shared_ptr<EmbeddingBackend> inner);

    std::vector<double> embed(const std::string& text) override;
    int dimension() const override { return inner_->dimension(); }

    std::size_t cache_size() const;
    std::size_t inner_calls() const;

private:
    std::shared_ptr<EmbeddingBackend> inner_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, std::vector<double>> cache_;
    std::size_t inner_calls_ = 0;
};

// Name -> service bindings for one process. Lookups of registered ids never
// fail after construction; unknown ids throw UnknownBackendError.
class BackendRegistry {
public:
    void register_chat(const std::string& id, std::shared_ptr<ChatBackend> backend);
    void set_embedding(std::shared_ptr<EmbeddingBackend> backend);

    bool has_chat(const std::string& id) const;
    ChatBackend& chat(const std::string& id) const;
    EmbeddingBackend& embedding() const;
    bool has_embedding() const { return embedding_ != nullptr; }

    // Validates messages (system/user content non-empty) and dispatches.
    std::string generate(const std::string& backend_id,
                         const std::vector<ChatMessage>& messages,
                         const SamplingParams& params) const;

private:
    std::map<std::string, std::shared_ptr<ChatBackend>> chat_;
    std::shared_ptr<EmbeddingBackend> embedding_;
};

} // namespace flowgate
