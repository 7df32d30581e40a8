#include "locrank/evaluation.hpp"

#include "locrank/errors.hpp"
#include "locrank/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace locrank {

const char* granularity_name(Granularity g) {
    switch (g) {
        case Granularity::file: return "file";
        case Granularity::module: return "module";
        case Granularity::function: return "function";
    }
    return "unknown";
}

const std::vector<int>& KSchedule::of(Granularity g) const {
    switch (g) {
        case Granularity::file: return file;
        case Granularity::module: return module;
        default: return function;
    }
}

const GranularityResult& EvalReport::of(Granularity g) const {
    switch (g) {
        case Granularity::file: return file;
        case Granularity::module: return module;
        default: return function;
    }
}

Benchmark load_benchmark(const std::string& jsonl, std::vector<CodeUnit> universe) {
    Benchmark bench;
    bench.universe = std::move(universe);

    std::map<std::string, const CodeUnit*> by_qualified_name;
    for (const auto& u : bench.universe) {
        by_qualified_name.emplace(u.qualified_name, &u);
    }

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
            throw InputError("benchmark jsonl: bad JSON at line " + std::to_string(line_no));
        }
        if (j.contains("header")) {
            continue;
        }
        BenchmarkInstance inst;
        inst.instance_id = j.at("instance_id").get<std::string>();
        inst.query_text = j.at("query_text").get<std::string>();
        std::size_t unresolved = 0;
        for (const auto& name : j.at("gold_qualified_names")) {
            auto it = by_qualified_name.find(name.get<std::string>());
            if (it == by_qualified_name.end()) {
                ++unresolved;
                continue;
            }
            inst.gold_function_ids.insert(it->second->unit_id);
            inst.gold_files.insert(it->second->file_path);
            inst.gold_modules.insert(module_key(*it->second));
        }
        if (inst.gold_function_ids.empty()) {
            bench.excluded.emplace_back(inst.instance_id,
                                        "no existing functions modified (" +
                                            std::to_string(unresolved) +
                                            " gold names unresolved)");
            continue;
        }
        bench.instances.push_back(std::move(inst));
    }
    return bench;
}

RankedList aggregate_granularity(const RankedList& ranked_functions,
                                 const std::vector<CodeUnit>& units, Granularity g) {
    if (g == Granularity::function) {
        return ranked_functions;
    }
    std::map<std::string, const CodeUnit*> by_id;
    for (const auto& u : units) {
        by_id.emplace(u.unit_id, &u);
    }

    // group key -> best score, preserving key order for ties
    std::map<std::string, double> best;
    for (const auto& e : ranked_functions.entries) {
        auto it = by_id.find(e.unit_id);
        if (it == by_id.end()) {
            throw IntegrityError("ranked list references unknown unit " + e.unit_id);
        }
        const std::string key = g == Granularity::file ? it->second->file_path
                                                       : module_key(*it->second);
        auto [pos, inserted] = best.emplace(key, e.score);
        if (!inserted) {
            pos->second = std::max(pos->second, e.score);
        }
    }

    RankedList out;
    out.query_id = ranked_functions.query_id;
    for (const auto& [key, score] : best) {
        out.entries.push_back({key, score});
    }
    std::stable_sort(out.entries.begin(), out.entries.end(),
                     [](const RankedEntry& a, const RankedEntry& b) {
                         if (a.score != b.score) return a.score > b.score;
                         return a.unit_id < b.unit_id;
                     });
    return out;
}

bool acc_at_k(const RankedList& ranked, const std::set<std::string>& gold, int k) {
    if (k < 1) {
        throw ConfigError("acc_at_k: k must be >= 1");
    }
    if (gold.empty()) {
        throw InputError("acc_at_k: empty gold set");
    }
    const std::size_t limit = std::min(ranked.entries.size(), static_cast<std::size_t>(k));
    std::size_t found = 0;
    for (std::size_t i = 0; i < limit; ++i) {
        if (gold.count(ranked.entries[i].unit_id)) {
            ++found;
        }
    }
    return found == gold.size();
}

namespace {

double to_percent(std::size_t hits, std::size_t total) {
    if (total == 0) {
        return 0.0;
    }
    const double pct = 100.0 * static_cast<double>(hits) / static_cast<double>(total);
    return std::round(pct * 100.0) / 100.0;
}

GranularityResult score_granularity(const std::vector<const RankedList*>& lists,
                                    const std::vector<const std::set<std::string>*>& golds,
                                    const std::vector<int>& ks) {
    GranularityResult result;
    result.ks = ks;
    result.per_instance.resize(ks.size());
    result.acc_percent.resize(ks.size());
    for (std::size_t ki = 0; ki < ks.size(); ++ki) {
        std::size_t hits = 0;
        auto& flags = result.per_instance[ki];
        flags.resize(lists.size());
        for (std::size_t i = 0; i < lists.size(); ++i) {
            const bool ok = acc_at_k(*lists[i], *golds[i], ks[ki]);
            flags[i] = ok;
            if (ok) {
                ++hits;
            }
        }
        result.acc_percent[ki] = to_percent(hits, lists.size());
    }
    return result;
}

} // namespace

EvalReport evaluate(const Benchmark& benchmark, const std::vector<RankedList>& ranked_lists,
                    const KSchedule& schedule) {
    std::map<std::string, const RankedList*> by_id;
    for (const auto& list : ranked_lists) {
        by_id.emplace(list.query_id, &list);
    }
    std::vector<std::string> missing;
    for (const auto& inst : benchmark.instances) {
        if (by_id.find(inst.instance_id) == by_id.end()) {
            missing.push_back(inst.instance_id);
        }
    }
    if (!missing.empty()) {
        throw IncompleteRunError("evaluate: missing ranked lists for " +
                                     std::to_string(missing.size()) + " instances",
                                 missing);
    }

    EvalReport report;
    std::vector<RankedList> file_lists, module_lists;
    std::vector<const RankedList*> fn_ptr, file_ptr, module_ptr;
    std::vector<const std::set<std::string>*> fn_gold, file_gold, module_gold;
    file_lists.reserve(benchmark.instances.size());
    module_lists.reserve(benchmark.instances.size());

    for (const auto& inst : benchmark.instances) {
        const RankedList* functions = by_id.at(inst.instance_id);
        report.instance_ids.push_back(inst.instance_id);
        report.num_gold.push_back(inst.gold_function_ids.size());

        file_lists.push_back(
            aggregate_granularity(*functions, benchmark.universe, Granularity::file));
        module_lists.push_back(
            aggregate_granularity(*functions, benchmark.universe, Granularity::module));

        fn_ptr.push_back(functions);
        fn_gold.push_back(&inst.gold_function_ids);
        file_gold.push_back(&inst.gold_files);
        module_gold.push_back(&inst.gold_modules);
    }
    for (const auto& l : file_lists) file_ptr.push_back(&l);
    for (const auto& l : module_lists) module_ptr.push_back(&l);

    report.file = score_granularity(file_ptr, file_gold, schedule.file);
    report.module = score_granularity(module_ptr, module_gold, schedule.module);
    report.function = score_granularity(fn_ptr, fn_gold, schedule.function);
    return report;
}

// ---- Stratification -----------------------------------------------------------

namespace {

BucketBreakdown breakdown_for(const EvalReport& report, const std::string& label,
                              const std::vector<std::size_t>& members) {
    BucketBreakdown out;
    out.label = label;
    out.count = members.size();
    auto fill = [&members](const GranularityResult& g, std::vector<double>& dst) {
        for (std::size_t ki = 0; ki < g.ks.size(); ++ki) {
            std::size_t hits = 0;
            for (auto i : members) {
                if (g.per_instance[ki][i]) {
                    ++hits;
                }
            }
            dst.push_back(to_percent(hits, members.size()));
        }
    };
    fill(report.file, out.file_acc);
    fill(report.module, out.module_acc);
    fill(report.function, out.function_acc);
    return out;
}

} // namespace

std::vector<BucketBreakdown> stratify_by_num_gold(
    const EvalReport& report, const std::vector<std::pair<int, int>>& boundaries) {
    std::vector<BucketBreakdown> out;
    for (const auto& [lo, hi] : boundaries) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < report.num_gold.size(); ++i) {
            const int n = static_cast<int>(report.num_gold[i]);
            if (n >= lo && n <= hi) {
                members.push_back(i);
            }
        }
        if (members.empty()) {
            continue; // absent, never zero
        }
        std::string label = hi == kNumGoldOpenEnd
                                ? std::to_string(lo) + "+"
                                : (lo == hi ? std::to_string(lo)
                                            : std::to_string(lo) + "-" + std::to_string(hi));
        out.push_back(breakdown_for(report, label, members));
    }
    return out;
}

std::vector<BucketBreakdown> stratify_by_bucket(const EvalReport& report,
                                                const std::vector<int>& bucket_of_instance,
                                                const std::vector<std::string>& labels) {
    if (bucket_of_instance.size() != report.instance_ids.size()) {
        throw ConfigError("stratify_by_bucket: assignment length mismatch");
    }
    std::vector<BucketBreakdown> out;
    for (std::size_t b = 0; b < labels.size(); ++b) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < bucket_of_instance.size(); ++i) {
            if (bucket_of_instance[i] == static_cast<int>(b)) {
                members.push_back(i);
            }
        }
        if (members.empty()) {
            continue;
        }
        out.push_back(breakdown_for(report, labels[b], members));
    }
    return out;
}

// ---- Overlap scores -------------------------------------------------------------

double rouge1(const std::string& text_a, const std::string& text_b, RougeVariant variant) {
    auto tokens_a = text::alnum_tokens(text_a);
    auto tokens_b = text::alnum_tokens(text_b);
    if (tokens_a.empty() || tokens_b.empty()) {
        throw InputError("rouge1: text with no tokens");
    }
    std::map<std::string, std::size_t> count_a, count_b;
    for (const auto& t : tokens_a) ++count_a[t];
    for (const auto& t : tokens_b) ++count_b[t];

    std::size_t matches = 0;
    for (const auto& [token, ca] : count_a) {
        auto it = count_b.find(token);
        if (it != count_b.end()) {
            matches += std::min(ca, it->second);
        }
    }
    const double precision = static_cast<double>(matches) / tokens_a.size();
    const double recall = static_cast<double>(matches) / tokens_b.size();
    switch (variant) {
        case RougeVariant::precision: return precision;
        case RougeVariant::recall: return recall;
        case RougeVariant::f1: break;
    }
    if (precision + recall == 0.0) {
        return 0.0;
    }
    return 2.0 * precision * recall / (precision + recall);
}

BucketAssignment overlap_buckets(const std::vector<double>& scores,
                                 const std::vector<double>& edges) {
    if (edges.size() < 2) {
        throw ConfigError("overlap_buckets: need at least two edges");
    }
    for (std::size_t i = 1; i < edges.size(); ++i) {
        if (!(edges[i] > edges[i - 1])) {
            throw ConfigError("overlap_buckets: edges must be strictly increasing");
        }
    }
    const int buckets = static_cast<int>(edges.size()) - 1;
    BucketAssignment out;
    out.bucket.reserve(scores.size());
    for (double s : scores) {
        if (s < edges.front()) {
            out.bucket.push_back(0);
            ++out.clamped;
            continue;
        }
        if (s >= edges.back()) {
            out.bucket.push_back(buckets - 1);
            ++out.clamped;
            continue;
        }
        // half-open [e_i, e_{i+1}): a score exactly at an edge joins the
        // upper bucket
        int b = static_cast<int>(
                    std::upper_bound(edges.begin(), edges.end(), s) - edges.begin()) -
                1;
        if (b >= buckets) {
            b = buckets - 1;
        }
        out.bucket.push_back(b);
    }
    return out;
}

// ---- Cost accounting -------------------------------------------------------------

std::size_t UsageLedger::total_prompt_tokens() const {
    std::size_t total = 0;
    for (const auto& e : entries) total += e.prompt_tokens;
    return total;
}

std::size_t UsageLedger::total_output_tokens() const {
    std::size_t total = 0;
    for (const auto& e : entries) total += e.output_tokens;
    return total;
}

int UsageLedger::total_calls() const {
    int total = 0;
    for (const auto& e : entries) total += e.provider_calls;
    return total;
}

std::string ledger_to_jsonl(const UsageLedger& ledger) {
    std::ostringstream out;
    for (const auto& e : ledger.entries) {
        nlohmann::ordered_json j;
        j["instance_id"] = e.instance_id;
        j["prompt_tokens"] = e.prompt_tokens;
        j["output_tokens"] = e.output_tokens;
        j["provider_calls"] = e.provider_calls;
        out << j.dump() << '\n';
    }
    return out.str();
}

UsageLedger ledger_from_jsonl(const std::string& jsonl) {
    UsageLedger ledger;
    std::istringstream in(jsonl);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw InputError("usage ledger jsonl: bad line");
        }
        if (j.contains("header")) continue;
        UsageEntry e;
        e.instance_id = j.at("instance_id").get<std::string>();
        e.prompt_tokens = j.at("prompt_tokens").get<std::size_t>();
        e.output_tokens = j.at("output_tokens").get<std::size_t>();
        e.provider_calls = j.value("provider_calls", 0);
        ledger.entries.push_back(std::move(e));
    }
    return ledger;
}

CostTable cost_report(const UsageLedger& ledger, double in_price_per_token,
                      double out_price_per_token, const EvalReport* report) {
    if (in_price_per_token < 0.0 || out_price_per_token < 0.0) {
        throw ConfigError("cost_report: prices must be non-negative");
    }
    CostTable table;
    table.in_price_per_token = in_price_per_token;
    table.out_price_per_token = out_price_per_token;
    for (const auto& e : ledger.entries) {
        const double cost = static_cast<double>(e.prompt_tokens) * in_price_per_token +
                            static_cast<double>(e.output_tokens) * out_price_per_token;
        table.per_instance.emplace_back(e.instance_id, cost);
        table.total_cost += cost;
    }
    table.mean_cost =
        ledger.entries.empty() ? 0.0 : table.total_cost / double(ledger.entries.size());

    if (report != nullptr && table.mean_cost > 0.0) {
        for (std::size_t ki = 0; ki < report->function.ks.size(); ++ki) {
            if (report->function.ks[ki] == 10) {
                table.acc10_per_dollar = report->function.acc_percent[ki] / table.mean_cost;
                break;
            }
        }
    }
    return table;
}

// ---- Rendering --------------------------------------------------------------------

namespace {

std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

} // namespace

std::string report_to_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    auto granularity_json = [](const GranularityResult& g) {
        nlohmann::ordered_json out = nlohmann::ordered_json::object();
        for (std::size_t ki = 0; ki < g.ks.size(); ++ki) {
            out["acc@" + std::to_string(g.ks[ki])] = g.acc_percent[ki];
        }
        return out;
    };
    j["instances"] = report.instance_ids.size();
    j["file"] = granularity_json(report.file);
    j["module"] = granularity_json(report.module);
    j["function"] = granularity_json(report.function);

    auto flags_json = [&report](const GranularityResult& g) {
        nlohmann::ordered_json out = nlohmann::ordered_json::object();
        for (std::size_t ki = 0; ki < g.ks.size(); ++ki) {
            nlohmann::ordered_json flags = nlohmann::ordered_json::array();
            for (std::size_t i = 0; i < report.instance_ids.size(); ++i) {
                flags.push_back(static_cast<bool>(g.per_instance[ki][i]));
            }
            out["acc@" + std::to_string(g.ks[ki])] = std::move(flags);
        }
        return out;
    };
    j["per_instance"] = {{"ids", report.instance_ids},
                         {"num_gold", report.num_gold},
                         {"file", flags_json(report.file)},
                         {"module", flags_json(report.module)},
                         {"function", flags_json(report.function)}};
    return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& json_text) {
    auto j = nlohmann::json::parse(json_text, nullptr, false);
    if (j.is_discarded() || !j.contains("per_instance")) {
        throw InputError("not an evaluation report");
    }
    EvalReport report;
    const auto& per = j.at("per_instance");
    report.instance_ids = per.at("ids").get<std::vector<std::string>>();
    report.num_gold = per.at("num_gold").get<std::vector<std::size_t>>();

    auto read_granularity = [&](const char* name) {
        GranularityResult g;
        const auto& accs = j.at(name);
        const auto& flags = per.at(name);
        std::vector<int> ks;
        for (auto it = accs.begin(); it != accs.end(); ++it) {
            ks.push_back(std::stoi(it.key().substr(4))); // "acc@<k>"
        }
        std::sort(ks.begin(), ks.end());
        for (int k : ks) {
            const std::string key = "acc@" + std::to_string(k);
            g.ks.push_back(k);
            g.acc_percent.push_back(accs.at(key).get<double>());
            g.per_instance.push_back(flags.at(key).get<std::vector<bool>>());
        }
        return g;
    };
    report.file = read_granularity("file");
    report.module = read_granularity("module");
    report.function = read_granularity("function");
    return report;
}

std::string report_to_text(const EvalReport& report) {
    std::ostringstream out;
    out << "instances: " << report.instance_ids.size() << "\n";
    out << "granularity";
    const GranularityResult* gs[] = {&report.file, &report.module, &report.function};
    const char* names[] = {"file", "module", "function"};
    // header of all k values in use
    out << "\n";
    for (int gi = 0; gi < 3; ++gi) {
        char line[256];
        std::snprintf(line, sizeof(line), "%-10s", names[gi]);
        out << line;
        for (std::size_t ki = 0; ki < gs[gi]->ks.size(); ++ki) {
            char cell[64];
            std::snprintf(cell, sizeof(cell), "  acc@%-3d %6s", gs[gi]->ks[ki],
                          fmt2(gs[gi]->acc_percent[ki]).c_str());
            out << cell;
        }
        out << "\n";
    }
    return out.str();
}

std::string ksweep_to_csv(const EvalReport& report) {
    std::ostringstream out;
    out << "granularity,k,acc_percent\n";
    const GranularityResult* gs[] = {&report.file, &report.module, &report.function};
    const char* names[] = {"file", "module", "function"};
    for (int gi = 0; gi < 3; ++gi) {
        for (std::size_t ki = 0; ki < gs[gi]->ks.size(); ++ki) {
            out << names[gi] << ',' << gs[gi]->ks[ki] << ','
                << fmt2(gs[gi]->acc_percent[ki]) << '\n';
        }
    }
    return out.str();
}

std::string breakdown_to_csv(const std::vector<BucketBreakdown>& breakdown,
                             const EvalReport& report, const std::string& axis_name) {
    std::ostringstream out;
    out << axis_name << ",count,granularity,k,acc_percent\n";
    for (const auto& bucket : breakdown) {
        auto emit = [&](const char* name, const std::vector<int>& ks,
                        const std::vector<double>& acc) {
            for (std::size_t ki = 0; ki < ks.size(); ++ki) {
                out << bucket.label << ',' << bucket.count << ',' << name << ',' << ks[ki]
                    << ',' << fmt2(acc[ki]) << '\n';
            }
        };
        emit("file", report.file.ks, bucket.file_acc);
        emit("module", report.module.ks, bucket.module_acc);
        emit("function", report.function.ks, bucket.function_acc);
    }
    return out.str();
}

} // namespace locrank
