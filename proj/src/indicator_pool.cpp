#include "flowgate/indicator_pool.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>

#include "flowgate/logging.hpp"
#include "flowgate/prompts.hpp"

namespace flowgate {

IndicatorPool::IndicatorPool(int dimension) : dimension_(dimension) {
    if (dimension <= 0) throw ConfigError("pool dimension must be positive");
}

json IndicatorPool::indicator_to_json(const Indicator& ind) {
    json j{{"name", ind.name},
           {"definition", ind.definition},
           {"trigger_condition", ind.trigger_condition}};
    if (ind.domain_tag) j["domain_tag"] = *ind.domain_tag;
    if (ind.example_error) j["example_error"] = *ind.example_error;
    if (ind.embedding_condition) j["embedding_condition"] = *ind.embedding_condition;
    if (ind.embedding_dedup) j["embedding_dedup"] = *ind.embedding_dedup;
    return j;
}

Indicator IndicatorPool::indicator_from_json(const json& j) {
    Indicator ind;
    ind.name = j.at("name").get<std::string>();
    ind.definition = j.at("definition").get<std::string>();
    ind.trigger_condition = j.at("trigger_condition").get<std::string>();
    if (j.contains("domain_tag") && !j.at("domain_tag").is_null())
        ind.domain_tag = j.at("domain_tag").get<std::string>();
    if (j.contains("example_error") && !j.at("example_error").is_null())
        ind.example_error = j.at("example_error").get<std::string>();
    if (j.contains("embedding_condition"))
        ind.embedding_condition = j.at("embedding_condition").get<std::vector<double>>();
    if (j.contains("embedding_dedup"))
        ind.embedding_dedup = j.at("embedding_dedup").get<std::vector<double>>();
    return ind;
}

IndicatorPool IndicatorPool::load(const std::string& path, int dimension) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open pool file '" + path + "'");
    IndicatorPool pool(dimension);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const std::exception& e) {
            throw ParseError("pool '" + path + "' line " + std::to_string(line_no) +
                             ": invalid JSON (" + e.what() + ")");
        }
        Indicator ind;
        try {
            ind = indicator_from_json(j);
        } catch (const json::exception& e) {
            throw ParseError("pool '" + path + "' line " + std::to_string(line_no) +
                             ": " + e.what());
        }
        try {
            pool.append(std::move(ind));
        } catch (const Error& e) {
            throw ParseError("pool '" + path + "' line " + std::to_string(line_no) +
                             ": " + e.what());
        }
    }
    return pool;
}

void IndicatorPool::save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write pool file '" + path + "'");
    for (const auto& ind : entries_) out << indicator_to_json(ind).dump() << "\n";
}

void IndicatorPool::append(Indicator indicator) {
    if (indicator.name.empty() || indicator.definition.empty() ||
        indicator.trigger_condition.empty())
        throw ContractError("indicator requires non-empty name, definition and trigger_condition");
    const auto check_dim = [&](const std::optional<std::vector<double>>& emb, const char* which) {
        if (emb && static_cast<int>(emb->size()) != dimension_)
            throw DimensionError(std::string(which) + " embedding of '" + indicator.name +
                                 "' has dimension " + std::to_string(emb->size()) +
                                 ", pool expects " + std::to_string(dimension_));
    };
    check_dim(indicator.embedding_condition, "condition");
    check_dim(indicator.embedding_dedup, "dedup");
    entries_.push_back(std::move(indicator));
}

void IndicatorPool::ensure_condition_embeddings(EmbeddingBackend& embedder) {
    for (auto& ind : entries_)
        if (!ind.embedding_condition) ind.embedding_condition = embedder.embed(ind.trigger_condition);
}

void IndicatorPool::ensure_dedup_embeddings(EmbeddingBackend& embedder) {
    for (auto& ind : entries_)
        if (!ind.embedding_dedup) ind.embedding_dedup = embedder.embed(dedup_key_text(ind));
}

std::vector<RetrievalHit> IndicatorPool::top_k_by(std::span<const double> query, int k,
                                                  bool use_dedup_key) const {
    if (k <= 0) throw ContractError("retrieval k must be positive");
    if (static_cast<int>(query.size()) != dimension_)
        throw DimensionError("query dimension " + std::to_string(query.size()) +
                             " does not match pool dimension " + std::to_string(dimension_));

    std::vector<double> scores(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& emb = use_dedup_key ? entries_[i].embedding_dedup
                                        : entries_[i].embedding_condition;
        if (!emb)
            throw ContractError("indicator '" + entries_[i].name + "' has no " +
                                (use_dedup_key ? "dedup" : "condition") +
                                " embedding; embed the pool before retrieval");
        scores[i] = cosine_similarity(query, *emb);
    }

    std::vector<std::size_t> order(entries_.size());
    std::iota(order.begin(), order.end(), 0);
    // stable sort keeps insertion order on equal scores (earlier entry wins)
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
    std::vector<RetrievalHit> hits;
    hits.reserve(take);
    for (std::size_t r = 0; r < take; ++r) {
        const std::size_t idx = order[r];
        hits.push_back(RetrievalHit{entries_[idx], scores[idx], static_cast<int>(r + 1), idx});
    }
    return hits;
}

std::vector<RetrievalHit> IndicatorPool::retrieve_top_k(std::span<const double> query, int k) const {
    return top_k_by(query, k, /*use_dedup_key=*/false);
}

std::vector<RetrievalHit> IndicatorPool::nearest_by_dedup_key(std::span<const double> query,
                                                              int k) const {
    return top_k_by(query, k, /*use_dedup_key=*/true);
}

std::string dedup_key_text(const Indicator& indicator) {
    return indicator.definition + "\n" + indicator.trigger_condition;
}

namespace {

std::string render_neighbor_list(const std::vector<RetrievalHit>& neighbors) {
    std::string out;
    for (const auto& hit : neighbors) {
        out += std::to_string(hit.rank) + ". " + hit.indicator.name + " — " +
               hit.indicator.definition + " — " + hit.indicator.trigger_condition + "\n";
    }
    if (!out.empty()) out.pop_back();
    return out;
}

// NOVEL / DUPLICATE, tolerant of whitespace and decoration. Anything else
// counts as NOVEL: the gate biases toward recall.
bool parse_novelty(const std::string& reply) {
    std::string token;
    for (char c : reply) {
        if (std::isalpha(static_cast<unsigned char>(c))) {
            token.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
        } else if (!token.empty()) {
            break;
        }
    }
    if (token == "DUPLICATE") return false;
    if (token != "NOVEL")
        log_warn("dedup gate replied '" + reply.substr(0, 80) + "'; treating candidate as novel");
    return true;
}

} // namespace

bool insert_with_dedup(IndicatorPool& pool, Indicator candidate, const BackendRegistry& registry,
                       const std::string& dedup_backend_id, int k_dedup,
                       const SamplingParams& dedup_sampling) {
    if (k_dedup <= 0) throw ContractError("k_dedup must be positive");
    EmbeddingBackend& embedder = registry.embedding();

    candidate.embedding_dedup = embedder.embed(dedup_key_text(candidate));
    if (!candidate.embedding_condition)
        candidate.embedding_condition = embedder.embed(candidate.trigger_condition);

    if (pool.empty()) {
        pool.append(std::move(candidate));
        return true;
    }

    pool.ensure_dedup_embeddings(embedder);
    const auto neighbors = pool.nearest_by_dedup_key(*candidate.embedding_dedup, k_dedup);

    const std::string prompt = prompts::render_template(
        prompts::kDedupGate, {{"name", candidate.name},
                              {"definition", candidate.definition},
                              {"trigger_condition", candidate.trigger_condition},
                              {"neighbors", render_neighbor_list(neighbors)}});
    const std::string reply =
        registry.generate(dedup_backend_id, {user_msg(prompt)}, dedup_sampling);

    if (!parse_novelty(reply)) return false;
    pool.append(std::move(candidate));
    return true;
}

Indicator general_indicator(const std::string& domain_tag) {
    Indicator ind;
    if (domain_tag == "math") {
        ind.name = "CRITICAL_MATH_LOGIC_AUDIT";
        ind.definition =
            "A focused audit to detect substantive logical fallacies, calculation errors, "
            "or conditional oversights that invalidate the final result.";
        ind.trigger_condition =
            "The Agent is performing mathematical reasoning, derivation, or calculation.";
    } else if (domain_tag == "code") {
        ind.name = "CRITICAL_CODE_CORRECTNESS_CHECK";
        ind.definition =
            "A functional audit focusing on runtime safety, logical integrity, and adherence "
            "to requirements in code implementation.";
        ind.trigger_condition =
            "The Agent is generating, debugging, or analyzing computer code.";
    } else {
        throw ConfigError("no general indicator for domain '" + domain_tag +
                          "' (expected \"math\" or \"code\")");
    }
    ind.domain_tag = domain_tag;
    return ind;
}

} // namespace flowgate
