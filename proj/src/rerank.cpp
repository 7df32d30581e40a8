#include "locrank/rerank.hpp"

#include "locrank/errors.hpp"
#include "locrank/rng.hpp"
#include "locrank/text.hpp"

#include <json.hpp>

#define CPPHTTPLIB_NO_EXCEPTIONS
#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <set>
#include <sstream>

namespace locrank {

std::size_t PromptBudget::count(std::string_view s) const {
    return token_counter ? token_counter(s) : text::ws_token_count(s);
}

RerankWindow assign_identifiers(const std::string& query_text,
                                const std::vector<CandidateText>& candidates,
                                int window_size) {
    if (candidates.empty()) {
        throw ConfigError("assign_identifiers: empty candidate list");
    }
    if (static_cast<int>(candidates.size()) > window_size) {
        throw ConfigError("assign_identifiers: " + std::to_string(candidates.size()) +
                          " candidates exceed window size " + std::to_string(window_size));
    }
    RerankWindow window;
    window.query_text = query_text;
    int id = 1;
    for (const auto& c : candidates) {
        window.candidates.push_back({id++, c.unit_id, c.text});
    }
    return window;
}

std::size_t BuiltPrompt::total_tokens() const {
    std::size_t total = instruction_tokens + query_tokens;
    for (auto t : candidate_tokens) {
        total += t;
    }
    return total;
}

BuiltPrompt build_prompt(const std::string& query_text, const RerankWindow& window,
                         const PromptBudget& budget, const std::string& instruction) {
    if (window.candidates.empty()) {
        throw ConfigError("build_prompt: empty window");
    }
    if (budget.per_candidate_max_tokens >= budget.total_max_tokens) {
        throw ConfigError("budget: per-candidate cap must be below the total cap");
    }

    BuiltPrompt out;
    out.instruction_tokens = budget.count(instruction);

    std::vector<std::string> blocks;
    std::size_t block_total = 0;
    for (const auto& c : window.candidates) {
        std::string body = text::truncate_ws_tokens(
            c.candidate_text, static_cast<std::size_t>(budget.per_candidate_max_tokens));
        std::string block = "[" + std::to_string(c.identifier) + "]";
        if (!body.empty()) {
            block += " " + body;
        }
        const std::size_t tokens = budget.count(block);
        out.candidate_tokens.push_back(tokens);
        block_total += tokens;
        blocks.push_back(std::move(block));
    }

    const long fixed = static_cast<long>(out.instruction_tokens + block_total);
    const long allowed_query = static_cast<long>(budget.total_max_tokens) - fixed;
    if (allowed_query < 0) {
        throw BudgetError("prompt cannot fit: instruction and candidates need " +
                              std::to_string(fixed) + " tokens, budget is " +
                              std::to_string(budget.total_max_tokens),
                          fixed);
    }

    std::string query_part =
        text::truncate_ws_tokens(query_text, static_cast<std::size_t>(allowed_query));
    out.query_tokens = budget.count(query_part);
    out.query_truncated = query_part.size() < query_text.size();

    std::string prompt = instruction;
    if (!query_part.empty()) {
        prompt += "\n\n" + query_part;
    }
    prompt += "\n";
    for (const auto& block : blocks) {
        prompt += "\n" + block;
    }
    out.text = std::move(prompt);
    return out;
}

RankedPermutation parse_permutation(const std::string& model_output,
                                    const RerankWindow& window) {
    const int n = static_cast<int>(window.candidates.size());
    RankedPermutation out;
    std::set<int> seen;

    for (std::size_t i = 0; i < model_output.size(); ++i) {
        if (model_output[i] != '[') {
            continue;
        }
        std::size_t j = i + 1;
        long value = 0;
        bool any_digit = false;
        while (j < model_output.size() &&
               std::isdigit(static_cast<unsigned char>(model_output[j])) && value < 1000000) {
            value = value * 10 + (model_output[j] - '0');
            any_digit = true;
            ++j;
        }
        if (!any_digit || j >= model_output.size() || model_output[j] != ']') {
            continue;
        }
        i = j;
        const int id = static_cast<int>(value);
        if (id < 1 || id > n || seen.count(id)) {
            continue; // out of range or repeat
        }
        seen.insert(id);
        out.identifiers.push_back(id);
    }
    for (const auto& c : window.candidates) {
        if (!seen.count(c.identifier)) {
            out.identifiers.push_back(c.identifier);
        }
    }
    return out;
}

// ---- Completion providers -----------------------------------------------------

namespace {

// "[k] <text>" blocks of a prompt, in order of appearance. Block text spans
// until the next block marker.
std::vector<std::pair<int, std::string>> parse_prompt_blocks(const std::string& prompt) {
    std::vector<std::pair<int, std::string>> blocks;
    std::istringstream in(prompt);
    std::string line;
    while (std::getline(in, line)) {
        int id = 0;
        std::size_t pos = 0;
        if (!line.empty() && line[0] == '[') {
            std::size_t j = 1;
            while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) {
                id = id * 10 + (line[j] - '0');
                ++j;
            }
            if (j > 1 && j < line.size() && line[j] == ']') {
                pos = j + 1;
                if (pos < line.size() && line[pos] == ' ') {
                    ++pos;
                }
                blocks.emplace_back(id, line.substr(pos));
                continue;
            }
        }
        if (!blocks.empty()) {
            blocks.back().second += "\n" + line;
        }
    }
    return blocks;
}

std::string ranking_string(const std::vector<int>& ids) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i > 0) {
            out += " > ";
        }
        out += "[" + std::to_string(ids[i]) + "]";
    }
    return out;
}

CompletionResult make_result(const std::string& prompt, std::string text) {
    CompletionResult res;
    res.usage.prompt_tokens = text::ws_token_count(prompt);
    res.usage.output_tokens = text::ws_token_count(text);
    res.text = std::move(text);
    return res;
}

} // namespace

CompletionResult IdentityCompletionStub::complete(const std::string& prompt, int) {
    auto blocks = parse_prompt_blocks(prompt);
    std::vector<int> ids;
    for (const auto& [id, _] : blocks) {
        ids.push_back(id);
    }
    return make_result(prompt, ranking_string(ids));
}

CompletionResult ReverseCompletionStub::complete(const std::string& prompt, int) {
    auto blocks = parse_prompt_blocks(prompt);
    std::vector<int> ids;
    for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) {
        ids.push_back(it->first);
    }
    return make_result(prompt, ranking_string(ids));
}

OracleCompletionStub::OracleCompletionStub(std::vector<std::string> gold_texts,
                                           std::string marker)
    : gold_texts_(std::move(gold_texts)), marker_(std::move(marker)) {}

CompletionResult OracleCompletionStub::complete(const std::string& prompt, int) {
    auto blocks = parse_prompt_blocks(prompt);
    auto is_gold = [this](const std::string& block_text) {
        if (!marker_.empty() && block_text.find(marker_) != std::string::npos) {
            return true;
        }
        for (const auto& gold : gold_texts_) {
            // block text is the (possibly truncated) candidate body
            if (gold == block_text || gold.rfind(block_text, 0) == 0 ||
                (!gold.empty() && block_text.rfind(gold, 0) == 0)) {
                return true;
            }
        }
        return false;
    };
    std::vector<int> ids;
    for (const auto& [id, body] : blocks) {
        if (is_gold(body)) {
            ids.push_back(id);
        }
    }
    for (const auto& [id, body] : blocks) {
        if (!is_gold(body)) {
            ids.push_back(id);
        }
    }
    return make_result(prompt, ranking_string(ids));
}

FlakyCompletionStub::FlakyCompletionStub(CompletionProvider& inner,
                                         int failures_before_success)
    : inner_(inner), remaining_failures_(failures_before_success) {}

CompletionResult FlakyCompletionStub::complete(const std::string& prompt,
                                               int max_output_tokens) {
    ++calls_;
    if (remaining_failures_ != 0) {
        if (remaining_failures_ > 0) {
            --remaining_failures_;
        }
        throw ProviderError("transient completion failure", /*retriable=*/true);
    }
    return inner_.complete(prompt, max_output_tokens);
}

RemoteCompletionProvider::RemoteCompletionProvider(const std::string& url_env,
                                                   const std::string& key_env) {
    const char* url = std::getenv(url_env.c_str());
    if (url == nullptr || *url == '\0') {
        throw ConfigError("remote completion provider: " + url_env + " is not set");
    }
    base_url_ = url;
    if (const char* key = std::getenv(key_env.c_str())) {
        api_key_ = key;
    }
}

CompletionResult RemoteCompletionProvider::complete(const std::string& prompt,
                                                    int max_output_tokens) {
    httplib::Client client(base_url_);
    client.set_read_timeout(60, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) {
        headers.emplace("Authorization", "Bearer " + api_key_);
    }
    nlohmann::json body;
    body["prompt"] = prompt;
    body["max_output_tokens"] = max_output_tokens;
    auto res = client.Post("/complete", headers, body.dump(), "application/json");
    if (!res) {
        throw ProviderError("completion endpoint unreachable: " + base_url_,
                            /*retriable=*/true);
    }
    if (res->status >= 500) {
        throw ProviderError("completion endpoint error " + std::to_string(res->status),
                            /*retriable=*/true);
    }
    if (res->status != 200) {
        throw ProviderError("completion endpoint rejected request: " +
                                std::to_string(res->status),
                            /*retriable=*/false);
    }
    nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("completion")) {
        throw ProviderError("completion endpoint returned malformed JSON",
                            /*retriable=*/false);
    }
    CompletionResult out;
    out.text = parsed["completion"].get<std::string>();
    out.usage.prompt_tokens =
        parsed.value("prompt_tokens", text::ws_token_count(prompt));
    out.usage.output_tokens =
        parsed.value("output_tokens", text::ws_token_count(out.text));
    return out;
}

// ---- Reranking ------------------------------------------------------------------

WindowRerankResult rerank_window(const std::string& query_text,
                                 const std::vector<CandidateText>& candidates,
                                 const PromptBudget& budget, CompletionProvider& provider,
                                 const RerankOptions& options) {
    WindowRerankResult result;
    auto window = assign_identifiers(query_text, candidates, options.window_size);
    auto prompt = build_prompt(query_text, window, budget, options.instruction);

    const int attempts = 1 + std::max(0, options.retries);
    for (int attempt = 0; attempt < attempts; ++attempt) {
        ++result.provider_calls;
        try {
            auto completion = provider.complete(prompt.text, options.max_output_tokens);
            result.usage += completion.usage;
            auto perm = parse_permutation(completion.text, window);
            for (int id : perm.identifiers) {
                result.reordered.push_back(candidates[static_cast<std::size_t>(id) - 1]);
            }
            return result;
        } catch (const ProviderError& e) {
            if (!e.retriable()) {
                break;
            }
        }
    }
    // degrade to the retriever's order
    result.reordered = candidates;
    result.fallback = true;
    return result;
}

SlidingRerankResult sliding_window_rerank(
    const std::string& query_text, const RankedList& ranked,
    const std::function<std::string(const std::string& unit_id)>& text_of,
    const PromptBudget& budget, CompletionProvider& provider,
    const RerankOptions& options) {
    if (options.stride < 1) {
        throw ConfigError("sliding_window_rerank: stride must be >= 1");
    }
    if (options.window_size < options.stride) {
        throw ConfigError("sliding_window_rerank: window_size must be >= stride");
    }

    SlidingRerankResult result;
    result.ranked.query_id = ranked.query_id;
    if (ranked.entries.empty()) {
        return result;
    }

    std::vector<CandidateText> working;
    working.reserve(ranked.entries.size());
    for (const auto& e : ranked.entries) {
        working.push_back({e.unit_id, text_of(e.unit_id)});
    }

    const std::size_t n = working.size();
    const std::size_t w = static_cast<std::size_t>(options.window_size);
    std::size_t start = n > w ? n - w : 0;
    while (true) {
        const std::size_t stop = std::min(n, start + w);
        std::vector<CandidateText> slice(working.begin() + static_cast<std::ptrdiff_t>(start),
                                         working.begin() + static_cast<std::ptrdiff_t>(stop));
        auto window_result = rerank_window(query_text, slice, budget, provider, options);
        std::copy(window_result.reordered.begin(), window_result.reordered.end(),
                  working.begin() + static_cast<std::ptrdiff_t>(start));
        result.any_fallback = result.any_fallback || window_result.fallback;
        result.usage += window_result.usage;
        result.provider_calls += window_result.provider_calls;
        if (start == 0) {
            break;
        }
        start = start >= static_cast<std::size_t>(options.stride)
                    ? start - static_cast<std::size_t>(options.stride)
                    : 0;
    }

    result.ranked.entries.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        result.ranked.entries.push_back({working[i].unit_id, 1.0 / double(i + 1)});
    }
    return result;
}

// ---- Training objective ---------------------------------------------------------

double first_token_loss(const std::vector<double>& identifier_logits,
                        int target_identifier) {
    if (identifier_logits.empty()) {
        throw InputError("first_token_loss: empty logits");
    }
    if (target_identifier < 1 ||
        target_identifier > static_cast<int>(identifier_logits.size())) {
        throw InputError("first_token_loss: target identifier out of range");
    }
    for (double v : identifier_logits) {
        if (!std::isfinite(v)) {
            throw InputError("first_token_loss: non-finite logit");
        }
    }
    const double zmax =
        *std::max_element(identifier_logits.begin(), identifier_logits.end());
    double sum = 0.0;
    for (double v : identifier_logits) {
        sum += std::exp(v - zmax);
    }
    const double target = identifier_logits[static_cast<std::size_t>(target_identifier) - 1];
    return -(target - zmax) + std::log(sum);
}

RerankTrainingExample build_training_example(const TrainingTriple& triple,
                                             std::uint64_t seed, const PromptBudget& budget,
                                             int window_size,
                                             const std::string& instruction) {
    const int need = window_size - 1;
    if (static_cast<int>(triple.negatives.size()) < need) {
        throw InputError("build_training_example: triple has " +
                         std::to_string(triple.negatives.size()) + " negatives, needs " +
                         std::to_string(need));
    }

    std::mt19937 gen(static_cast<std::uint32_t>(seed ^ (seed >> 32)));
    auto perm = rng::permutation(triple.negatives.size(), gen);

    std::vector<CandidateText> slots;
    slots.push_back({triple.positive.unit_id, triple.positive.source_text});
    for (int i = 0; i < need; ++i) {
        const auto& neg = triple.negatives[perm[static_cast<std::size_t>(i)]];
        slots.push_back({neg.unit_id, neg.source_text});
    }
    rng::shuffle(slots, gen);

    auto window = assign_identifiers(triple.query_text, slots, window_size);
    auto prompt = build_prompt(triple.query_text, window, budget, instruction);

    RerankTrainingExample example;
    example.prompt_text = prompt.text;
    example.suppress_end_token = true;
    for (const auto& c : window.candidates) {
        if (c.unit_id == triple.positive.unit_id) {
            example.target_identifier = c.identifier;
            break;
        }
    }
    return example;
}

std::string training_examples_to_jsonl(const std::vector<RerankTrainingExample>& examples) {
    std::ostringstream out;
    for (const auto& e : examples) {
        nlohmann::ordered_json j;
        j["prompt_text"] = e.prompt_text;
        j["target_identifier"] = e.target_identifier;
        j["suppress_end_token"] = e.suppress_end_token;
        out << j.dump() << '\n';
    }
    return out.str();
}

std::vector<RerankTrainingExample> training_examples_from_jsonl(const std::string& jsonl) {
    std::vector<RerankTrainingExample> out;
    std::istringstream in(jsonl);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw InputError("training examples jsonl: bad line");
        }
        if (j.contains("header")) {
            continue;
        }
        RerankTrainingExample e;
        e.prompt_text = j.at("prompt_text").get<std::string>();
        e.target_identifier = j.at("target_identifier").get<int>();
        e.suppress_end_token = j.at("suppress_end_token").get<bool>();
        out.push_back(std::move(e));
    }
    return out;
}

} // namespace locrank
