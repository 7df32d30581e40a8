#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

namespace locrank {

// Inclusive 1-based line range.
struct LineSpan {
    int start = 0;
    int end = 0;

    bool contains(int line) const { return line >= start && line <= end; }
    int length() const { return end - start + 1; }
    bool operator==(const LineSpan&) const = default;
};

// A repository checkout at a fixed commit. (repo_id, commit_ref) identifies
// the snapshot within a corpus; the checkout itself must already be at that
// commit.
struct RepoSnapshot {
    std::string repo_id;
    std::filesystem::path root_path;
    std::string commit_ref;

    // Validates that root_path is a readable directory. Throws InputError.
    static RepoSnapshot open(std::string repo_id, std::filesystem::path root_path,
                             std::string commit_ref);
};

// One extractable function or method, the atom being ranked.
struct CodeUnit {
    std::string unit_id;
    std::string file_path; // repo-relative, '/'-separated
    std::vector<std::string> module_path; // enclosing class names, outermost first
    std::string function_name;
    std::string qualified_name; // "file.py::Class::...::func", "#k" suffix on duplicates
    LineSpan span;
    std::string source_text; // exact byte range of span

    bool operator==(const CodeUnit&) const = default;
};

struct SkippedFile {
    std::string file_path;
    std::string reason;
};

struct ExtractionResult {
    std::vector<CodeUnit> units;
    std::vector<SkippedFile> skipped;
};

// Stable unit identity: a pure function of (repo_id, commit_ref, qualified_name).
std::string make_unit_id(const std::string& repo_id, const std::string& commit_ref,
                         const std::string& qualified_name);

// Parses one Python source file into code units. `file_path` is the
// repo-relative path used in qualified names. Units are ordered by span.start.
// Throws InputError when the file cannot be tokenized (e.g. an unterminated
// triple-quoted string).
std::vector<CodeUnit> parse_python_units(const std::string& file_path,
                                         const std::string& content,
                                         const std::string& repo_id,
                                         const std::string& commit_ref);

// Walks the snapshot and extracts every named function and method from files
// whose extension is in `extensions` (e.g. {".py"}). Files that fail to parse
// are skipped and reported in the result. Order: file path lexicographic,
// then span.start ascending. Throws InputError if the root is unreadable or
// `extensions` is empty.
ExtractionResult extract_units(const RepoSnapshot& snapshot,
                               const std::set<std::string>& extensions = {".py"});

// Innermost unit whose span contains `line` in `file_path`; nullptr if none.
const CodeUnit* locate_enclosing_unit(const std::vector<CodeUnit>& units,
                                      const std::string& file_path, int line);

// Module-granularity bucket key: the file path plus the class chain.
// Top-level functions bucket under the file itself.
std::string module_key(const CodeUnit& unit);

// JSON Lines serialization, one unit per line, field names as in CodeUnit.
std::string units_to_jsonl(const std::vector<CodeUnit>& units);
std::vector<CodeUnit> units_from_jsonl(const std::string& jsonl);

} // namespace locrank
