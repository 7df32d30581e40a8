#pragma once

#include "locrank/embedding.hpp"
#include "locrank/rerank.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace locrank {

// One declarative configuration for the whole pipeline. Defaults match the
// published training/inference setup: K=20 consistency filtering, M=15 hard
// negatives, listwise windows of 10 with stride 5, candidate prompts capped
// at 1024 tokens within a 16348-token total.
struct RunConfig {
    // embedding
    std::string embedding_provider = "hash"; // hash | remote
    int embedding_dimension = 256;
    std::string query_prefix;    // set directly or via query_prefix_preset
    std::string document_prefix; // no prefix unless configured
    int max_input_tokens = 8192;
    int max_batch_size = 64;

    // completion
    std::string completion_provider = "identity"; // identity | reverse | oracle | remote
    int completion_max_output_tokens = 128;
    int completion_retries = 2;

    // corpus pipeline
    bool filtering_enabled = true;
    int consistency_k = 20;
    int negatives_m = 15;

    // reranking
    int window_size = 10;
    int stride = 5;
    int per_candidate_max_tokens = 1024;
    int total_max_tokens = 16348;
    std::string rerank_instruction{kDefaultRerankInstruction};

    // evaluation
    std::vector<int> file_ks{1, 3, 5};
    std::vector<int> module_ks{5, 10};
    std::vector<int> function_ks{5, 10};
    double in_price_per_token = 0.0;
    double out_price_per_token = 0.0;

    // every random choice in a run derives from this seed
    std::uint64_t root_seed = 17;

    EmbeddingProviderSpec embedding_spec() const;
    PromptBudget prompt_budget() const;
    RerankOptions rerank_options() const;
};

// Applies one "section.key = value" assignment. Throws ConfigError on unknown
// keys or unparsable values.
void apply_config_entry(RunConfig& config, const std::string& key, const std::string& value);

// Flat key/value text: one assignment per line, '#' comments, blank lines
// ignored. Section membership is spelled as a dotted key prefix.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

} // namespace locrank
