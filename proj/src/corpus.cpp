#include "locrank/corpus.hpp"

#include "locrank/errors.hpp"
#include "locrank/kernels/vec_kernels.hpp"
#include "locrank/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

namespace locrank {

// ---- Diff handling ----------------------------------------------------------

namespace {

bool parse_hunk_header(const std::string& line, DiffHunk& hunk) {
    int bs = 0, bc = 1, ns = 0, nc = 1;
    if (std::sscanf(line.c_str(), "@@ -%d,%d +%d,%d @@", &bs, &bc, &ns, &nc) == 4 ||
        std::sscanf(line.c_str(), "@@ -%d +%d,%d @@", &bs, &ns, &nc) == 3 ||
        std::sscanf(line.c_str(), "@@ -%d,%d +%d @@", &bs, &bc, &ns) == 3 ||
        std::sscanf(line.c_str(), "@@ -%d +%d @@", &bs, &ns) == 2) {
        hunk.base_start = bs;
        hunk.base_count = bc;
        hunk.new_start = ns;
        hunk.new_count = nc;
        return true;
    }
    return false;
}

std::string strip_diff_path(std::string s) {
    // "--- a/pkg/x.py\toptional-timestamp"
    auto tab = s.find('\t');
    if (tab != std::string::npos) {
        s = s.substr(0, tab);
    }
    if (s == "/dev/null") {
        return "";
    }
    if (s.rfind("a/", 0) == 0 || s.rfind("b/", 0) == 0) {
        s = s.substr(2);
    }
    return s;
}

} // namespace

std::vector<DiffHunk> parse_unified_diff(const std::string& diff_text) {
    std::vector<DiffHunk> hunks;
    std::istringstream in(diff_text);
    std::string line;

    std::string current_file;
    bool have_file = false;
    bool in_hunk = false;
    int base_left = 0;
    int new_left = 0;

    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (in_hunk) {
            DiffHunk& open = hunks.back();
            if (!line.empty() && line[0] == '\\') {
                continue; // "\ No newline at end of file"
            }
            char c = line.empty() ? ' ' : line[0];
            bool consumed = false;
            if (c == ' ' && base_left > 0 && new_left > 0) {
                --base_left;
                --new_left;
                consumed = true;
            } else if (c == '-' && base_left > 0) {
                --base_left;
                consumed = true;
            } else if (c == '+' && new_left > 0) {
                --new_left;
                consumed = true;
            }
            if (!consumed) {
                throw InputError("truncated or overlong hunk: " + open.header);
            }
            open.body.push_back(line.empty() ? std::string(" ") : line);
            if (base_left == 0 && new_left == 0) {
                in_hunk = false;
            }
            continue;
        }
        if (line.rfind("--- ", 0) == 0) {
            current_file = strip_diff_path(line.substr(4));
            have_file = true;
            continue;
        }
        if (line.rfind("+++ ", 0) == 0) {
            continue; // mapping happens against the base side
        }
        if (line.rfind("@@", 0) == 0) {
            if (!have_file) {
                throw InputError("hunk before any file header: " + line);
            }
            DiffHunk hunk;
            hunk.file_path = current_file;
            hunk.header = line;
            if (!parse_hunk_header(line, hunk)) {
                throw InputError("malformed hunk header: " + line);
            }
            base_left = hunk.base_count;
            new_left = hunk.new_count;
            hunks.push_back(std::move(hunk));
            in_hunk = base_left > 0 || new_left > 0;
            continue;
        }
        // "diff --git", "index", mode lines, commit text: ignored
    }
    if (in_hunk) {
        throw InputError("truncated or overlong hunk: " + hunks.back().header);
    }
    return hunks;
}

std::vector<std::pair<int, int>> hunk_base_intervals(const DiffHunk& hunk) {
    std::vector<std::pair<int, int>> out;
    // cursor = next base line to consume; a zero-length base range means the
    // insertion follows line base_start
    int cursor = hunk.base_count == 0 ? hunk.base_start + 1 : hunk.base_start;
    for (const auto& line : hunk.body) {
        char c = line.empty() ? ' ' : line[0];
        if (c == ' ') {
            ++cursor;
        } else if (c == '-') {
            out.emplace_back(cursor, cursor);
            ++cursor;
        } else if (c == '+') {
            int p = std::max(1, cursor - 1);
            if (out.empty() || out.back() != std::make_pair(p, p)) {
                out.emplace_back(p, p);
            }
        }
    }
    return out;
}

bool is_test_file(const std::string& file_path) {
    std::string_view rest = file_path;
    std::string_view base = rest;
    while (true) {
        auto slash = rest.find('/');
        std::string_view part = slash == std::string_view::npos ? rest : rest.substr(0, slash);
        if (part == "test" || part == "tests" || part == "testing") {
            return true;
        }
        if (slash == std::string_view::npos) {
            base = part;
            break;
        }
        rest = rest.substr(slash + 1);
    }
    if (base.rfind("test_", 0) == 0) {
        return true;
    }
    constexpr std::string_view suffix = "_test.py";
    return base.size() >= suffix.size() &&
           base.substr(base.size() - suffix.size()) == suffix;
}

// ---- Selection --------------------------------------------------------------

namespace {

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) {
        return 0.0; // no evidence of overlap
    }
    std::size_t inter = 0;
    for (const auto& x : a) {
        inter += b.count(x);
    }
    const std::size_t uni = a.size() + b.size() - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

} // namespace

std::vector<std::string> select_repositories(const std::vector<RepoCandidate>& candidates,
                                             const RepoSelectionCriteria& criteria) {
    std::vector<const RepoCandidate*> kept;
    std::vector<std::string> out;
    for (const auto& c : candidates) {
        if (c.language_fraction < criteria.min_language_fraction) {
            continue;
        }
        if (criteria.exclusion_list.count(c.repo_id)) {
            continue;
        }
        bool duplicate = false;
        for (const auto* k : kept) {
            if (jaccard(c.source_fingerprint, k->source_fingerprint) >=
                criteria.dedup_threshold) {
                duplicate = true;
                break;
            }
        }
        if (duplicate) {
            continue;
        }
        kept.push_back(&c);
        out.push_back(c.repo_id);
    }
    return out;
}

std::vector<PullRequestRecord> select_pull_requests(
    const std::vector<PullRequestRecord>& records) {
    std::vector<PullRequestRecord> out;
    for (const auto& r : records) {
        if (r.links_issue && r.modifies_tests) {
            out.push_back(r);
        }
    }
    return out;
}

// ---- Instance construction --------------------------------------------------

std::vector<CodeUnit> map_diff_to_units(const PullRequestRecord& record,
                                        const std::vector<CodeUnit>& units) {
    auto hunks = parse_unified_diff(record.diff_text);
    std::map<std::string, std::vector<std::pair<int, int>>> touched;
    for (const auto& h : hunks) {
        if (h.file_path.empty()) {
            continue; // added file: nothing exists at the base commit
        }
        auto intervals = hunk_base_intervals(h);
        auto& dst = touched[h.file_path];
        dst.insert(dst.end(), intervals.begin(), intervals.end());
    }

    std::vector<CodeUnit> out;
    for (const auto& u : units) {
        if (is_test_file(u.file_path)) {
            continue;
        }
        auto it = touched.find(u.file_path);
        if (it == touched.end()) {
            continue;
        }
        for (const auto& [lo, hi] : it->second) {
            if (u.span.start <= hi && lo <= u.span.end) {
                out.push_back(u);
                break;
            }
        }
    }
    return out;
}

InstanceBuildResult build_instances(const PullRequestRecord& record,
                                    const std::vector<CodeUnit>& units) {
    InstanceBuildResult result;
    auto modified = map_diff_to_units(record, units);
    if (modified.empty()) {
        result.skip_reason = "no existing functions modified";
        return result;
    }
    if (record.issue_text.empty()) {
        result.skip_reason = "empty issue text";
        return result;
    }

    std::set<std::string> modified_ids;
    for (const auto& m : modified) {
        modified_ids.insert(m.unit_id);
    }
    auto pool = std::make_shared<std::vector<CodeUnit>>();
    for (const auto& u : units) {
        if (modified_ids.count(u.unit_id) == 0) {
            pool->push_back(u);
        }
    }
    if (pool->empty()) {
        result.skip_reason = "empty candidate pool";
        return result;
    }

    for (const auto& m : modified) {
        LocalizationInstance inst;
        inst.instance_id = record.pr_id + "/" + m.unit_id;
        inst.query_text = record.issue_text;
        inst.positive_unit = m;
        inst.candidate_pool = pool;
        inst.repo_id = record.repo_id;
        inst.pr_id = record.pr_id;
        result.instances.push_back(std::move(inst));
    }
    return result;
}

// ---- Filtering and mining ---------------------------------------------------

namespace {

struct ScoredPool {
    EmbeddingVector query_vec;
    std::vector<float> pool_sims; // aligned with the instance's pool
};

ScoredPool score_pool(const LocalizationInstance& instance, EmbeddingProvider& embedder) {
    if (!instance.candidate_pool || instance.candidate_pool->empty()) {
        throw InputError("invalid instance: empty candidate pool (" + instance.instance_id +
                         ")");
    }
    ScoredPool scored;
    scored.query_vec = embed_query(instance.query_text, embedder);
    std::vector<std::string> texts;
    texts.reserve(instance.candidate_pool->size());
    for (const auto& u : *instance.candidate_pool) {
        texts.push_back(u.source_text);
    }
    auto vecs = embed_documents(texts, embedder);
    scored.pool_sims.resize(vecs.size());
    for (std::size_t i = 0; i < vecs.size(); ++i) {
        scored.pool_sims[i] =
            kernels::dot_f32(scored.query_vec.values.data(), vecs[i].values.data(),
                             scored.query_vec.values.size());
    }
    return scored;
}

} // namespace

bool consistency_filter(const LocalizationInstance& instance, EmbeddingProvider& embedder,
                        int top_k) {
    if (top_k < 1) {
        throw ConfigError("consistency_filter: K must be >= 1");
    }
    auto scored = score_pool(instance, embedder);
    auto pos_vecs = embed_documents({instance.positive_unit.source_text}, embedder);
    const float pos_sim =
        kernels::dot_f32(scored.query_vec.values.data(), pos_vecs[0].values.data(),
                         scored.query_vec.values.size());

    // Rank of the positive within (positive + pool); ties by unit_id ascending.
    int rank = 1;
    const auto& pool = *instance.candidate_pool;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (scored.pool_sims[i] > pos_sim ||
            (scored.pool_sims[i] == pos_sim &&
             pool[i].unit_id < instance.positive_unit.unit_id)) {
            ++rank;
        }
    }
    return rank <= top_k;
}

TrainingTriple mine_hard_negatives(const LocalizationInstance& instance,
                                   EmbeddingProvider& embedder, int m) {
    if (m < 1) {
        throw ConfigError("mine_hard_negatives: M must be >= 1");
    }
    auto scored = score_pool(instance, embedder);
    const auto& pool = *instance.candidate_pool;

    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scored.pool_sims[a] != scored.pool_sims[b]) {
            return scored.pool_sims[a] > scored.pool_sims[b];
        }
        return pool[a].unit_id < pool[b].unit_id;
    });

    TrainingTriple triple;
    triple.query_text = instance.query_text;
    triple.positive = instance.positive_unit;
    triple.repo_id = instance.repo_id;
    triple.pr_id = instance.pr_id;
    triple.pool = instance.candidate_pool;
    const std::size_t take = std::min(pool.size(), static_cast<std::size_t>(m));
    triple.negatives.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        triple.negatives.push_back(pool[order[i]]);
    }
    return triple;
}

std::vector<TrainingTriple> iterative_mine(const std::vector<TrainingTriple>& triples,
                                           EmbeddingProvider& embedder_next, int m) {
    std::vector<TrainingTriple> out;
    out.reserve(triples.size());
    for (const auto& t : triples) {
        if (!t.pool) {
            throw InputError("iterative_mine: triple is missing its pool reference (" +
                             t.pr_id + ")");
        }
        LocalizationInstance inst;
        inst.instance_id = t.pr_id + "/" + t.positive.unit_id;
        inst.query_text = t.query_text;
        inst.positive_unit = t.positive;
        inst.candidate_pool = t.pool;
        inst.repo_id = t.repo_id;
        inst.pr_id = t.pr_id;
        out.push_back(mine_hard_negatives(inst, embedder_next, m));
    }
    return out;
}

// ---- Serialization ----------------------------------------------------------

namespace {

nlohmann::ordered_json unit_to_json(const CodeUnit& u) {
    nlohmann::ordered_json j;
    j["unit_id"] = u.unit_id;
    j["file_path"] = u.file_path;
    j["module_path"] = u.module_path;
    j["function_name"] = u.function_name;
    j["qualified_name"] = u.qualified_name;
    j["span"] = {{"start", u.span.start}, {"end", u.span.end}};
    j["source_text"] = u.source_text;
    return j;
}

CodeUnit unit_from_json(const nlohmann::json& j) {
    CodeUnit u;
    u.unit_id = j.at("unit_id").get<std::string>();
    u.file_path = j.at("file_path").get<std::string>();
    u.module_path = j.at("module_path").get<std::vector<std::string>>();
    u.function_name = j.at("function_name").get<std::string>();
    u.qualified_name = j.at("qualified_name").get<std::string>();
    u.span.start = j.at("span").at("start").get<int>();
    u.span.end = j.at("span").at("end").get<int>();
    u.source_text = j.at("source_text").get<std::string>();
    return u;
}

std::vector<nlohmann::json> parse_jsonl(const std::string& jsonl, const char* what) {
    std::vector<nlohmann::json> out;
    std::istringstream in(jsonl);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw InputError(std::string(what) + " jsonl: bad JSON at line " +
                             std::to_string(line_no));
        }
        if (j.contains("header")) {
            continue;
        }
        out.push_back(std::move(j));
    }
    return out;
}

} // namespace

std::string pr_records_to_jsonl(const std::vector<PullRequestRecord>& records) {
    std::ostringstream out;
    for (const auto& r : records) {
        nlohmann::ordered_json j;
        j["pr_id"] = r.pr_id;
        j["repo_id"] = r.repo_id;
        j["base_commit_ref"] = r.base_commit_ref;
        j["issue_text"] = r.issue_text;
        j["diff_text"] = r.diff_text;
        j["links_issue"] = r.links_issue;
        j["modifies_tests"] = r.modifies_tests;
        out << j.dump() << '\n';
    }
    return out.str();
}

std::vector<PullRequestRecord> pr_records_from_jsonl(const std::string& jsonl) {
    std::vector<PullRequestRecord> out;
    for (const auto& j : parse_jsonl(jsonl, "pr records")) {
        PullRequestRecord r;
        r.pr_id = j.at("pr_id").get<std::string>();
        r.repo_id = j.at("repo_id").get<std::string>();
        r.base_commit_ref = j.at("base_commit_ref").get<std::string>();
        r.issue_text = j.at("issue_text").get<std::string>();
        r.diff_text = j.at("diff_text").get<std::string>();
        r.links_issue = j.at("links_issue").get<bool>();
        r.modifies_tests = j.at("modifies_tests").get<bool>();
        if (r.links_issue && r.issue_text.empty()) {
            throw InputError("pr record " + r.pr_id + " links an issue but has no issue text");
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::string instances_to_jsonl(const std::vector<LocalizationInstance>& instances) {
    std::ostringstream out;
    for (const auto& inst : instances) {
        nlohmann::ordered_json j;
        j["instance_id"] = inst.instance_id;
        j["query_text"] = inst.query_text;
        j["positive_unit"] = unit_to_json(inst.positive_unit);
        auto pool = nlohmann::ordered_json::array();
        if (inst.candidate_pool) {
            for (const auto& u : *inst.candidate_pool) {
                pool.push_back(unit_to_json(u));
            }
        }
        j["candidate_pool"] = std::move(pool);
        j["provenance"] = {{"repo_id", inst.repo_id}, {"pr_id", inst.pr_id}};
        out << j.dump() << '\n';
    }
    return out.str();
}

std::vector<LocalizationInstance> instances_from_jsonl(const std::string& jsonl) {
    std::vector<LocalizationInstance> out;
    for (const auto& j : parse_jsonl(jsonl, "instances")) {
        LocalizationInstance inst;
        inst.instance_id = j.at("instance_id").get<std::string>();
        inst.query_text = j.at("query_text").get<std::string>();
        inst.positive_unit = unit_from_json(j.at("positive_unit"));
        auto pool = std::make_shared<std::vector<CodeUnit>>();
        for (const auto& u : j.at("candidate_pool")) {
            pool->push_back(unit_from_json(u));
        }
        inst.candidate_pool = std::move(pool);
        inst.repo_id = j.at("provenance").at("repo_id").get<std::string>();
        inst.pr_id = j.at("provenance").at("pr_id").get<std::string>();
        out.push_back(std::move(inst));
    }
    return out;
}

std::string triples_to_jsonl(const std::vector<TrainingTriple>& triples) {
    std::ostringstream out;
    for (const auto& t : triples) {
        nlohmann::ordered_json j;
        j["query_text"] = t.query_text;
        j["positive"] = unit_to_json(t.positive);
        auto negs = nlohmann::ordered_json::array();
        for (const auto& n : t.negatives) {
            negs.push_back(unit_to_json(n));
        }
        j["negatives"] = std::move(negs);
        j["provenance"] = {{"repo_id", t.repo_id}, {"pr_id", t.pr_id}};
        out << j.dump() << '\n';
    }
    return out.str();
}

std::vector<TrainingTriple> triples_from_jsonl(const std::string& jsonl) {
    std::vector<TrainingTriple> out;
    for (const auto& j : parse_jsonl(jsonl, "triples")) {
        TrainingTriple t;
        t.query_text = j.at("query_text").get<std::string>();
        t.positive = unit_from_json(j.at("positive"));
        for (const auto& n : j.at("negatives")) {
            t.negatives.push_back(unit_from_json(n));
        }
        t.repo_id = j.at("provenance").at("repo_id").get<std::string>();
        t.pr_id = j.at("provenance").at("pr_id").get<std::string>();
        out.push_back(std::move(t));
    }
    return out;
}

// ---- End-to-end curation ----------------------------------------------------

std::string curation_stats_to_csv(const std::vector<CurationStatRow>& rows) {
    std::ostringstream out;
    out << "pr_id,query_tokens,modified_files,modified_modules,modified_functions\n";
    for (const auto& r : rows) {
        out << r.pr_id << ',' << r.query_tokens << ',' << r.modified_files << ','
            << r.modified_modules << ',' << r.modified_functions << '\n';
    }
    return out.str();
}

CurateResult curate_corpus(const std::vector<PullRequestRecord>& records,
                           const UnitsResolver& resolve_units, EmbeddingProvider& embedder,
                           const CurateOptions& options) {
    CurateResult result;
    result.records_seen = records.size();
    auto selected = select_pull_requests(records);
    result.records_selected = selected.size();

    std::map<std::pair<std::string, std::string>, std::shared_ptr<std::vector<CodeUnit>>>
        unit_cache;

    for (const auto& rec : selected) {
        auto key = std::make_pair(rec.repo_id, rec.base_commit_ref);
        auto it = unit_cache.find(key);
        if (it == unit_cache.end()) {
            it = unit_cache
                     .emplace(key, std::make_shared<std::vector<CodeUnit>>(
                                       resolve_units(rec.repo_id, rec.base_commit_ref)))
                     .first;
        }
        const auto& units = *it->second;

        InstanceBuildResult built;
        try {
            built = build_instances(rec, units);
        } catch (const InputError& e) {
            result.skipped.emplace_back(rec.pr_id, e.what());
            continue;
        }
        if (built.instances.empty()) {
            result.skipped.emplace_back(rec.pr_id, built.skip_reason);
            continue;
        }
        result.instances_built += built.instances.size();

        CurationStatRow row;
        row.pr_id = rec.pr_id;
        row.query_tokens = text::ws_token_count(rec.issue_text);
        std::set<std::string> files;
        std::set<std::string> modules;
        for (const auto& inst : built.instances) {
            files.insert(inst.positive_unit.file_path);
            modules.insert(module_key(inst.positive_unit));
        }
        row.modified_files = files.size();
        row.modified_modules = modules.size();
        row.modified_functions = built.instances.size();
        result.stats.push_back(std::move(row));

        for (auto& inst : built.instances) {
            if (options.filtering_enabled &&
                !consistency_filter(inst, embedder, options.consistency_k)) {
                continue;
            }
            result.triples.push_back(
                mine_hard_negatives(inst, embedder, options.negatives_m));
            result.instances.push_back(std::move(inst));
        }
    }
    return result;
}

} // namespace locrank
