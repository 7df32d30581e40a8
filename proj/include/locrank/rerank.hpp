#pragma once

#include "locrank/corpus.hpp"
#include "locrank/retrieval.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace locrank {

inline constexpr int kDefaultWindowSize = 10;
inline constexpr int kDefaultStride = 5;

inline constexpr std::string_view kDefaultRerankInstruction =
    "You are given a software issue and numbered candidate code snippets. Rank the "
    "candidates from most to least likely to need changing to resolve the issue. "
    "Answer only with identifiers in ranking order, like [2] > [1] > [3].";

struct CandidateText {
    std::string unit_id;
    std::string text;

    bool operator==(const CandidateText&) const = default;
};

struct RerankCandidate {
    int identifier = 0; // 1..n in display order
    std::string unit_id;
    std::string candidate_text;
};

struct RerankWindow {
    std::string query_text;
    std::vector<RerankCandidate> candidates;
};

// Token budgets for prompt assembly. Defaults follow the training setup:
// 1024 tokens per candidate, 16348 total. token_counter may supply an exact
// model tokenizer; whitespace counting is the default.
struct PromptBudget {
    int per_candidate_max_tokens = 1024;
    int total_max_tokens = 16348;
    std::function<std::size_t(std::string_view)> token_counter;

    std::size_t count(std::string_view s) const;
};

// Attaches identifier i to the i-th candidate. Throws ConfigError when the
// list is empty or exceeds window_size.
RerankWindow assign_identifiers(const std::string& query_text,
                                const std::vector<CandidateText>& candidates,
                                int window_size = kDefaultWindowSize);

struct BuiltPrompt {
    std::string text;
    std::size_t instruction_tokens = 0;
    std::size_t query_tokens = 0;
    std::vector<std::size_t> candidate_tokens; // per "[i] <code>" block
    bool query_truncated = false;

    std::size_t total_tokens() const;
};

// Prompt layout: instruction, query, then "[i] <candidate>" blocks in
// identifier order. Candidates are truncated to the per-candidate cap; when
// the assembled prompt still exceeds the total budget, the query (never the
// candidates) loses tokens from the tail. Throws BudgetError carrying the
// minimum feasible total when even an empty query cannot fit.
BuiltPrompt build_prompt(const std::string& query_text, const RerankWindow& window,
                         const PromptBudget& budget,
                         const std::string& instruction = std::string(kDefaultRerankInstruction));

struct RankedPermutation {
    std::vector<int> identifiers; // always a full permutation of the window's ids
};

// Extracts bracketed integers in order of appearance, drops out-of-range ids
// and repeats, then appends missing identifiers in original window order.
// Total: any input repairs to a valid permutation.
RankedPermutation parse_permutation(const std::string& model_output,
                                    const RerankWindow& window);

// ---- Completion providers -----------------------------------------------------

struct CompletionUsage {
    std::size_t prompt_tokens = 0;
    std::size_t output_tokens = 0;

    CompletionUsage& operator+=(const CompletionUsage& other) {
        prompt_tokens += other.prompt_tokens;
        output_tokens += other.output_tokens;
        return *this;
    }
};

struct CompletionResult {
    std::string text;
    CompletionUsage usage;
};

class CompletionProvider {
public:
    virtual ~CompletionProvider() = default;
    virtual CompletionResult complete(const std::string& prompt, int max_output_tokens) = 0;
};

// Echoes "[1] > [2] > ... > [n]": reranking becomes a no-op.
class IdentityCompletionStub : public CompletionProvider {
public:
    CompletionResult complete(const std::string& prompt, int max_output_tokens) override;
};

// Emits the reverse ranking "[n] > ... > [1]".
class ReverseCompletionStub : public CompletionProvider {
public:
    CompletionResult complete(const std::string& prompt, int max_output_tokens) override;
};

// Moves candidates whose block text matches a known gold text (or carries the
// configured marker substring) to the front, keeping the rest in input order.
class OracleCompletionStub : public CompletionProvider {
public:
    explicit OracleCompletionStub(std::vector<std::string> gold_texts,
                                  std::string marker = "");
    CompletionResult complete(const std::string& prompt, int max_output_tokens) override;

private:
    std::vector<std::string> gold_texts_;
    std::string marker_;
};

// Fails with a retriable ProviderError a configurable number of times, then
// delegates. With remaining_failures < 0 it always fails.
class FlakyCompletionStub : public CompletionProvider {
public:
    FlakyCompletionStub(CompletionProvider& inner, int failures_before_success);
    CompletionResult complete(const std::string& prompt, int max_output_tokens) override;
    int calls() const { return calls_; }

private:
    CompletionProvider& inner_;
    int remaining_failures_;
    int calls_ = 0;
};

// HTTP provider: POST {base_url}/complete with {"prompt", "max_output_tokens"},
// expecting {"completion", "prompt_tokens", "output_tokens"}. Endpoint and
// credential come from environment variables.
class RemoteCompletionProvider : public CompletionProvider {
public:
    RemoteCompletionProvider(const std::string& url_env = "COMPLETE_API_URL",
                             const std::string& key_env = "COMPLETE_API_KEY");
    CompletionResult complete(const std::string& prompt, int max_output_tokens) override;

private:
    std::string base_url_;
    std::string api_key_;
};

// ---- Reranking ------------------------------------------------------------------

struct RerankOptions {
    int window_size = kDefaultWindowSize;
    int stride = kDefaultStride;
    int retries = 2; // extra attempts after the first failure
    int max_output_tokens = 128;
    std::string instruction{kDefaultRerankInstruction};
};

struct WindowRerankResult {
    std::vector<CandidateText> reordered;
    bool fallback = false; // provider kept failing; input order preserved
    CompletionUsage usage;
    int provider_calls = 0;
};

// One listwise window: assign identifiers, build the budgeted prompt, ask the
// provider, parse the permutation, reorder. Retriable provider errors are
// retried `retries` times; afterwards the input order is kept and the result
// is flagged.
WindowRerankResult rerank_window(const std::string& query_text,
                                 const std::vector<CandidateText>& candidates,
                                 const PromptBudget& budget, CompletionProvider& provider,
                                 const RerankOptions& options = {});

struct SlidingRerankResult {
    RankedList ranked; // scores are 1/rank
    bool any_fallback = false;
    CompletionUsage usage;
    int provider_calls = 0;
};

// Single back-to-front pass over the ranked list: rerank the last
// window_size candidates, shift toward the front by stride, repeat ending
// with a window at position 0. Strong tail candidates can ride the
// overlapping windows to the head.
SlidingRerankResult sliding_window_rerank(
    const std::string& query_text, const RankedList& ranked,
    const std::function<std::string(const std::string& unit_id)>& text_of,
    const PromptBudget& budget, CompletionProvider& provider,
    const RerankOptions& options = {});

// ---- Training objective ---------------------------------------------------------

// Cross-entropy of the first generated identifier: -log softmax(logits)[target].
// identifier_logits[i] is the logit of identifier i+1.
double first_token_loss(const std::vector<double>& identifier_logits,
                        int target_identifier);

struct RerankTrainingExample {
    std::string prompt_text;
    int target_identifier = 0;
    bool suppress_end_token = true;
};

// Samples window_size-1 negatives without replacement (error when fewer are
// available), shuffles them with the positive, assigns identifiers, builds
// the budgeted prompt, and records the positive's identifier as the target.
RerankTrainingExample build_training_example(
    const TrainingTriple& triple, std::uint64_t seed, const PromptBudget& budget,
    int window_size = kDefaultWindowSize,
    const std::string& instruction = std::string(kDefaultRerankInstruction));

std::string training_examples_to_jsonl(const std::vector<RerankTrainingExample>& examples);
std::vector<RerankTrainingExample> training_examples_from_jsonl(const std::string& jsonl);

} // namespace locrank
