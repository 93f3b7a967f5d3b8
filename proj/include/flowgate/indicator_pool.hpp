#pragma once

#include <span>
#include <string>
#include <vector>

#include "flowgate/backends.hpp"
#include "flowgate/domain.hpp"

namespace flowgate {

struct RetrievalHit {
    Indicator indicator;
    double score = 0.0; // cosine against the trigger-condition embedding
    int rank = 0;       // 1-based, no gaps
    std::size_t pool_index = 0;
};

// Ordered store of indicators with exact (linear scan) cosine retrieval.
// Entries keep their insertion order; ties in retrieval score resolve to
// the earlier entry. A loaded pool is immutable while serving; mutation
// happens only in the offline miner.
class IndicatorPool {
public:
    explicit IndicatorPool(int dimension);

    // Line-delimited JSON, one indicator per line. Entries may omit their
    // embeddings; those are computed before first retrieval, not at load.
    static IndicatorPool load(const std::string& path, int dimension);
    void save(const std::string& path) const;

    static json indicator_to_json(const Indicator& indicator);
    static Indicator indicator_from_json(const json& j);

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    int dimension() const { return dimension_; }
    const std::vector<Indicator>& entries() const { return entries_; }

    // Validates invariants (non-empty fields, embedding dimensions) and appends.
    void append(Indicator indicator);

    // Fill missing embeddings in insertion order. Idempotent.
    void ensure_condition_embeddings(EmbeddingBackend& embedder);
    void ensure_dedup_embeddings(EmbeddingBackend& embedder);

    // Top-k by descending cosine similarity between the query and each
    // entry's trigger-condition embedding; returns min(k, size()) hits.
    std::vector<RetrievalHit> retrieve_top_k(std::span<const double> query, int k) const;

    // Same selection over the dedup-key embeddings (definition + condition).
    std::vector<RetrievalHit> nearest_by_dedup_key(std::span<const double> query, int k) const;

private:
    std::vector<RetrievalHit> top_k_by(std::span<const double> query, int k,
                                       bool use_dedup_key) const;

    std::vector<Indicator> entries_;
    int dimension_;
};

// Text embedded for the dedup key: definition, newline, trigger condition.
std::string dedup_key_text(const Indicator& indicator);

// Dedup-gated insertion: embeds the candidate, consults the k_dedup nearest
// existing entries through the dedup backend, and appends the candidate only
// on a NOVEL verdict. Returns whether the candidate was inserted. Backend
// failures propagate before the pool is touched.
bool insert_with_dedup(IndicatorPool& pool, Indicator candidate,
                       const BackendRegistry& registry, const std::string& dedup_backend_id,
                       int k_dedup, const SamplingParams& dedup_sampling = {0.0, 64});

// The bundled always-applicable indicator for pool-free (zero-shot) runs.
// domain_tag must be "math" or "code".
Indicator general_indicator(const std::string& domain_tag);

} // namespace flowgate
