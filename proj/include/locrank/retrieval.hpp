#pragma once

#include "locrank/code_units.hpp"
#include "locrank/embedding.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace locrank {

struct RankedEntry {
    std::string unit_id;
    double score = 0.0;

    bool operator==(const RankedEntry&) const = default;
};

// Ordered (unit id, score) pairs for one query; scores non-increasing.
struct RankedList {
    std::string query_id;
    std::vector<RankedEntry> entries;

    bool operator==(const RankedList&) const = default;
};

// Immutable flat (exhaustive) similarity index over unit embeddings. Vectors
// are unit-norm, so the dot product used for scoring is the cosine.
class VectorIndex {
public:
    // Embeds document_prefix + source_text for every unit, in input order.
    // A failing provider batch surfaces as ProviderError carrying the failed
    // unit ids; nothing partial is returned.
    static VectorIndex build(const std::vector<CodeUnit>& units, EmbeddingProvider& provider,
                             std::string repo_id, std::string commit_ref);

    static VectorIndex from_entries(std::vector<std::string> unit_ids,
                                    std::vector<EmbeddingVector> vectors,
                                    EmbeddingProviderSpec spec, std::string repo_id,
                                    std::string commit_ref);

    std::size_t size() const { return unit_ids_.size(); }
    int dimension() const { return spec_.dimension; }
    const EmbeddingProviderSpec& spec() const { return spec_; }
    const std::string& repo_id() const { return repo_id_; }
    const std::string& commit_ref() const { return commit_ref_; }
    const std::string& unit_id_at(std::size_t i) const { return unit_ids_[i]; }
    const float* vector_at(std::size_t i) const { return data_.data() + i * spec_.dimension; }

    // Cosine of `query` with entry i, computed with the dispatched kernel.
    float score_at(const EmbeddingVector& query, std::size_t i) const;

    // Single-file persistence: magic, JSON header (spec, snapshot binding,
    // count), raw little-endian float32 vectors in entry order, then a
    // trailing unit-id table.
    void save(const std::filesystem::path& path) const;
    static VectorIndex load(const std::filesystem::path& path);

private:
    EmbeddingProviderSpec spec_;
    std::string repo_id_;
    std::string commit_ref_;
    std::vector<std::string> unit_ids_;
    std::vector<float> data_; // size() * dimension, row-major
};

// Top-k entries by cosine, descending; ties broken by unit_id ascending;
// fewer than top_k entries returns all. Throws ConfigError on dimension
// mismatch.
RankedList retrieve(const VectorIndex& index, const EmbeddingVector& query_vec, int top_k,
                    std::string query_id = "");

// JSON Lines: {"query_id": ..., "ranking": [{"unit_id": ..., "score": ...}]}.
std::string ranked_lists_to_jsonl(const std::vector<RankedList>& lists);
std::vector<RankedList> ranked_lists_from_jsonl(const std::string& jsonl);

} // namespace locrank
