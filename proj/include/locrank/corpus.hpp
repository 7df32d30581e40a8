#pragma once

#include "locrank/code_units.hpp"
#include "locrank/embedding.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace locrank {

struct PullRequestRecord {
    std::string pr_id;
    std::string repo_id;
    std::string base_commit_ref;
    std::string issue_text; // the query: issue title + body
    std::string diff_text;  // unified diff against base_commit_ref
    bool links_issue = false;
    bool modifies_tests = false;

    bool operator==(const PullRequestRecord&) const = default;
};

struct RepoCandidate {
    std::string repo_id;
    double language_fraction = 0.0;
    std::set<std::string> source_fingerprint; // normalized file-content hashes
};

struct RepoSelectionCriteria {
    double min_language_fraction = 0.80;
    std::set<std::string> exclusion_list;
    double dedup_threshold = 0.90; // Jaccard overlap at or above this is a duplicate
};

// One query plus its positive unit and the pool of unrelated units. Pools are
// shared between the instances of a PR (they are identical by construction).
struct LocalizationInstance {
    std::string instance_id;
    std::string query_text;
    CodeUnit positive_unit;
    std::shared_ptr<const std::vector<CodeUnit>> candidate_pool;
    std::string repo_id;
    std::string pr_id;
};

struct TrainingTriple {
    std::string query_text;
    CodeUnit positive;
    std::vector<CodeUnit> negatives; // descending similarity order
    std::string repo_id;
    std::string pr_id;
    // Original candidate pool, required by iterative mining. Not serialized.
    std::shared_ptr<const std::vector<CodeUnit>> pool;
};

// ---- Diff handling ----------------------------------------------------------

struct DiffHunk {
    std::string file_path; // base-side path, "a/" prefix stripped; empty for added files
    int base_start = 0;
    int base_count = 0;
    int new_start = 0;
    int new_count = 0;
    std::string header; // original "@@" line
    std::vector<std::string> body; // ' ', '-', '+' lines, prefix included
};

// Parses a unified diff. Throws InputError naming the offending hunk header
// or file marker on malformed input.
std::vector<DiffHunk> parse_unified_diff(const std::string& diff_text);

// Base-side line intervals (inclusive) touched by the hunk: every deleted
// line, plus the base line each insertion run follows (clamped to line 1).
std::vector<std::pair<int, int>> hunk_base_intervals(const DiffHunk& hunk);

// Test files are excluded from diff-to-unit mapping.
bool is_test_file(const std::string& file_path);

// ---- Selection --------------------------------------------------------------

// Keeps candidates with language_fraction >= min, not excluded, and not a
// near-duplicate (Jaccard fingerprint overlap >= dedup_threshold) of an
// already-kept repo. First in input order wins.
std::vector<std::string> select_repositories(const std::vector<RepoCandidate>& candidates,
                                             const RepoSelectionCriteria& criteria);

// Keeps records that link an issue AND modify test files.
std::vector<PullRequestRecord> select_pull_requests(
    const std::vector<PullRequestRecord>& records);

// ---- Instance construction --------------------------------------------------

// Units whose span intersects any changed-or-deleted base line range of any
// hunk, in input unit order; units in test files are excluded.
std::vector<CodeUnit> map_diff_to_units(const PullRequestRecord& record,
                                        const std::vector<CodeUnit>& units);

struct InstanceBuildResult {
    std::vector<LocalizationInstance> instances;
    std::string skip_reason; // non-empty iff instances is empty
};

// One instance per modified function. Every instance's pool is all extracted
// units minus ALL modified units, so no gold ever appears among negatives.
InstanceBuildResult build_instances(const PullRequestRecord& record,
                                    const std::vector<CodeUnit>& units);

// ---- Filtering and mining ---------------------------------------------------

// True iff the positive ranks within the top K of (positive + pool) by cosine
// similarity to the query; rank 1 is highest, ties break by unit_id ascending.
bool consistency_filter(const LocalizationInstance& instance, EmbeddingProvider& embedder,
                        int top_k);

// The min(M, |pool|) pool units most similar to the query, descending, ties
// by unit_id ascending.
TrainingTriple mine_hard_negatives(const LocalizationInstance& instance,
                                   EmbeddingProvider& embedder, int m);

// Re-mines every triple's negatives with a different embedder over the
// original pools; output is aligned one-to-one with the input.
std::vector<TrainingTriple> iterative_mine(const std::vector<TrainingTriple>& triples,
                                           EmbeddingProvider& embedder_next, int m);

// ---- Serialization ----------------------------------------------------------

std::string pr_records_to_jsonl(const std::vector<PullRequestRecord>& records);
std::vector<PullRequestRecord> pr_records_from_jsonl(const std::string& jsonl);

std::string instances_to_jsonl(const std::vector<LocalizationInstance>& instances);
std::vector<LocalizationInstance> instances_from_jsonl(const std::string& jsonl);

std::string triples_to_jsonl(const std::vector<TrainingTriple>& triples);
std::vector<TrainingTriple> triples_from_jsonl(const std::string& jsonl);

// ---- End-to-end curation ----------------------------------------------------

struct CurationStatRow {
    std::string pr_id;
    std::size_t query_tokens = 0;
    std::size_t modified_files = 0;
    std::size_t modified_modules = 0;
    std::size_t modified_functions = 0;
};

// CSV with one row per curated PR (query length and edit counts).
std::string curation_stats_to_csv(const std::vector<CurationStatRow>& rows);

struct CurateOptions {
    bool filtering_enabled = true;
    int consistency_k = 20;
    int negatives_m = 15;
};

struct CurateResult {
    std::vector<LocalizationInstance> instances; // retained after filtering
    std::vector<TrainingTriple> triples;
    std::vector<std::pair<std::string, std::string>> skipped; // (pr_id, reason)
    std::vector<CurationStatRow> stats;
    std::size_t records_seen = 0;
    std::size_t records_selected = 0;
    std::size_t instances_built = 0;
};

using UnitsResolver =
    std::function<std::vector<CodeUnit>(const std::string& repo_id,
                                        const std::string& commit_ref)>;

// Runs selection, mapping, instance construction, consistency filtering and
// hard-negative mining over a batch of PR records.
CurateResult curate_corpus(const std::vector<PullRequestRecord>& records,
                           const UnitsResolver& resolve_units, EmbeddingProvider& embedder,
                           const CurateOptions& options);

} // namespace locrank
