#pragma once

#include "locrank/code_units.hpp"
#include "locrank/retrieval.hpp"

#include <array>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace locrank {

enum class Granularity { file, module, function };

const char* granularity_name(Granularity g);

// File- and module-level gold sets are projections of the gold functions.
struct BenchmarkInstance {
    std::string instance_id;
    std::string query_text;
    std::set<std::string> gold_function_ids;
    std::set<std::string> gold_files;
    std::set<std::string> gold_modules;
};

struct Benchmark {
    std::vector<BenchmarkInstance> instances;
    std::vector<CodeUnit> universe;
    std::vector<std::pair<std::string, std::string>> excluded; // (instance_id, reason)
};

// Loads benchmark JSON Lines ({"instance_id", "query_text",
// "gold_qualified_names", "snapshot"}) and resolves gold names against the
// universe. Instances whose gold names resolve to nothing (e.g. patches that
// only created new functions) are excluded and reported.
Benchmark load_benchmark(const std::string& jsonl, std::vector<CodeUnit> universe);

// Groups a function-level ranking by file or module; the group score is the
// maximum member score; groups sort by score descending, ties by key
// ascending. Throws IntegrityError on ids missing from `units`.
RankedList aggregate_granularity(const RankedList& ranked_functions,
                                 const std::vector<CodeUnit>& units, Granularity g);

// True iff every gold id appears within the first min(k, length) entries.
bool acc_at_k(const RankedList& ranked, const std::set<std::string>& gold, int k);

struct KSchedule {
    std::vector<int> file{1, 3, 5};
    std::vector<int> module{5, 10};
    std::vector<int> function{5, 10};

    const std::vector<int>& of(Granularity g) const;
};

struct GranularityResult {
    std::vector<int> ks;
    std::vector<double> acc_percent;             // rounded to 2 decimals
    std::vector<std::vector<bool>> per_instance; // [k index][instance index]
};

struct EvalReport {
    std::vector<std::string> instance_ids;
    std::vector<std::size_t> num_gold;
    GranularityResult file;
    GranularityResult module;
    GranularityResult function;

    const GranularityResult& of(Granularity g) const;
};

// Scores one ranked function list per instance at every granularity. Ranked
// lists are matched to instances by query_id == instance_id; missing lists
// raise IncompleteRunError carrying the unmatched instance ids.
EvalReport evaluate(const Benchmark& benchmark, const std::vector<RankedList>& ranked_lists,
                    const KSchedule& schedule = {});

// ---- Stratification -----------------------------------------------------------

struct BucketBreakdown {
    std::string label;
    std::size_t count = 0;
    // aligned with the report's k schedules
    std::vector<double> file_acc;
    std::vector<double> module_acc;
    std::vector<double> function_acc;
};

inline constexpr int kNumGoldOpenEnd = std::numeric_limits<int>::max();

// Acc@k per num_gold bucket; default buckets {1}, {2,3}, {4,5}, {6+}.
// Empty buckets are omitted, never reported as zero.
std::vector<BucketBreakdown> stratify_by_num_gold(
    const EvalReport& report,
    const std::vector<std::pair<int, int>>& boundaries = {
        {1, 1}, {2, 3}, {4, 5}, {6, kNumGoldOpenEnd}});

// Acc@k per precomputed bucket assignment (lexical/semantic overlap).
std::vector<BucketBreakdown> stratify_by_bucket(const EvalReport& report,
                                                const std::vector<int>& bucket_of_instance,
                                                const std::vector<std::string>& labels);

// ---- Overlap scores -------------------------------------------------------------

enum class RougeVariant { f1, precision, recall };

// Unigram overlap with clipped counts; tokens are lowercased alphanumeric
// runs. Throws InputError when either side tokenizes to nothing.
double rouge1(const std::string& text_a, const std::string& text_b,
              RougeVariant variant = RougeVariant::f1);

inline const std::vector<double> kLexicalOverlapEdges{0.0, 0.1, 0.2, 0.3, 1.0};
inline const std::vector<double> kSemanticOverlapEdges{0.65, 0.70, 0.75, 0.80, 1.0};

struct BucketAssignment {
    std::vector<int> bucket; // index into [edges[i], edges[i+1]) intervals
    int clamped = 0;         // scores outside the outermost edges
};

// Half-open interval search; scores outside the edges clamp to the nearest
// bucket and are counted. Edges must be strictly increasing.
BucketAssignment overlap_buckets(const std::vector<double>& scores,
                                 const std::vector<double>& edges);

// ---- Cost accounting -------------------------------------------------------------

struct UsageEntry {
    std::string instance_id;
    std::size_t prompt_tokens = 0;
    std::size_t output_tokens = 0;
    int provider_calls = 0;
};

struct UsageLedger {
    std::vector<UsageEntry> entries;

    std::size_t total_prompt_tokens() const;
    std::size_t total_output_tokens() const;
    int total_calls() const;
};

std::string ledger_to_jsonl(const UsageLedger& ledger);
UsageLedger ledger_from_jsonl(const std::string& jsonl);

struct CostTable {
    double in_price_per_token = 0.0;
    double out_price_per_token = 0.0;
    std::vector<std::pair<std::string, double>> per_instance; // (instance_id, cost)
    double total_cost = 0.0;
    double mean_cost = 0.0;
    // function-granularity Acc@10 percent per dollar of mean cost, when an
    // EvalReport with k=10 is attached
    std::optional<double> acc10_per_dollar;
};

CostTable cost_report(const UsageLedger& ledger, double in_price_per_token,
                      double out_price_per_token, const EvalReport* report = nullptr);

// ---- Rendering --------------------------------------------------------------------

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& json_text);
std::string report_to_text(const EvalReport& report);
std::string ksweep_to_csv(const EvalReport& report);
std::string breakdown_to_csv(const std::vector<BucketBreakdown>& breakdown,
                             const EvalReport& report, const std::string& axis_name);

} // namespace locrank
