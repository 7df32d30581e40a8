#include "locrank/config.hpp"

#include "locrank/errors.hpp"
#include "locrank/io.hpp"

#include <charconv>
#include <sstream>

namespace locrank {

EmbeddingProviderSpec RunConfig::embedding_spec() const {
    EmbeddingProviderSpec spec;
    spec.provider_name = embedding_provider;
    spec.dimension = embedding_dimension;
    spec.query_prefix = query_prefix;
    spec.document_prefix = document_prefix;
    spec.max_input_tokens = max_input_tokens;
    spec.max_batch_size = max_batch_size;
    return spec;
}

PromptBudget RunConfig::prompt_budget() const {
    PromptBudget budget;
    budget.per_candidate_max_tokens = per_candidate_max_tokens;
    budget.total_max_tokens = total_max_tokens;
    return budget;
}

RerankOptions RunConfig::rerank_options() const {
    RerankOptions options;
    options.window_size = window_size;
    options.stride = stride;
    options.retries = completion_retries;
    options.max_output_tokens = completion_max_output_tokens;
    options.instruction = rerank_instruction;
    return options;
}

namespace {

int parse_int(const std::string& key, const std::string& value) {
    int out = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw ConfigError("config: " + key + " expects an integer, got '" + value + "'");
    }
    return out;
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        double out = std::stod(value, &used);
        if (used != value.size()) {
            throw std::invalid_argument(value);
        }
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: " + key + " expects a number, got '" + value + "'");
    }
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    std::istringstream in(value);
    std::string part;
    while (std::getline(in, part, ',')) {
        while (!part.empty() && part.front() == ' ') part.erase(part.begin());
        while (!part.empty() && part.back() == ' ') part.pop_back();
        if (part.empty()) continue;
        out.push_back(parse_int(key, part));
    }
    if (out.empty()) {
        throw ConfigError("config: " + key + " expects a comma-separated integer list");
    }
    return out;
}

} // namespace

void apply_config_entry(RunConfig& config, const std::string& key,
                        const std::string& value) {
    if (key == "embedding.provider") {
        if (value != "hash" && value != "remote") {
            throw ConfigError("config: unknown embedding provider '" + value + "'");
        }
        config.embedding_provider = value;
    } else if (key == "embedding.dimension") {
        config.embedding_dimension = parse_int(key, value);
    } else if (key == "embedding.query_prefix") {
        config.query_prefix = value;
    } else if (key == "embedding.query_prefix_preset") {
        if (value == "code_search") {
            config.query_prefix = std::string(kCodeSearchQueryPrefix);
        } else if (value == "issue_instruct") {
            config.query_prefix = std::string(kIssueInstructQueryPrefix);
        } else if (value == "none") {
            config.query_prefix.clear();
        } else {
            throw ConfigError("config: unknown query prefix preset '" + value + "'");
        }
    } else if (key == "embedding.document_prefix") {
        config.document_prefix = value;
    } else if (key == "embedding.max_input_tokens") {
        config.max_input_tokens = parse_int(key, value);
    } else if (key == "embedding.max_batch_size") {
        config.max_batch_size = parse_int(key, value);
    } else if (key == "completion.provider") {
        if (value != "identity" && value != "reverse" && value != "oracle" &&
            value != "remote") {
            throw ConfigError("config: unknown completion provider '" + value + "'");
        }
        config.completion_provider = value;
    } else if (key == "completion.max_output_tokens") {
        config.completion_max_output_tokens = parse_int(key, value);
    } else if (key == "completion.retries") {
        config.completion_retries = parse_int(key, value);
    } else if (key == "pipeline.consistency_k") {
        if (value == "none") {
            config.filtering_enabled = false;
        } else {
            config.filtering_enabled = true;
            config.consistency_k = parse_int(key, value);
        }
    } else if (key == "pipeline.negatives_m") {
        config.negatives_m = parse_int(key, value);
    } else if (key == "rerank.window_size") {
        config.window_size = parse_int(key, value);
    } else if (key == "rerank.stride") {
        config.stride = parse_int(key, value);
    } else if (key == "rerank.per_candidate_max_tokens") {
        config.per_candidate_max_tokens = parse_int(key, value);
    } else if (key == "rerank.total_max_tokens") {
        config.total_max_tokens = parse_int(key, value);
    } else if (key == "rerank.instruction") {
        config.rerank_instruction = value;
    } else if (key == "eval.file_ks") {
        config.file_ks = parse_int_list(key, value);
    } else if (key == "eval.module_ks") {
        config.module_ks = parse_int_list(key, value);
    } else if (key == "eval.function_ks") {
        config.function_ks = parse_int_list(key, value);
    } else if (key == "eval.in_price_per_token") {
        config.in_price_per_token = parse_double(key, value);
    } else if (key == "eval.out_price_per_token") {
        config.out_price_per_token = parse_double(key, value);
    } else if (key == "seed") {
        config.root_seed = static_cast<std::uint64_t>(parse_int(key, value));
    } else {
        throw ConfigError("config: unknown key '" + key + "'");
    }
}

RunConfig parse_run_config(const std::string& text) {
    RunConfig config;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        // trim
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) {
            continue;
        }
        auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);

        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected 'key = value'");
        }
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
        while (!value.empty() && (value.front() == ' ' || value.front() == '\t')) {
            value.erase(value.begin());
        }
        apply_config_entry(config, key, value);
    }
    return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    return parse_run_config(io::read_file(path));
}

} // namespace locrank
