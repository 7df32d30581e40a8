// Command-line surface: extract, curate, index, localize, eval, report.
// Exit codes: 0 success, 1 pipeline error, 2 usage or configuration error.

#include "locrank/code_units.hpp"
#include "locrank/config.hpp"
#include "locrank/corpus.hpp"
#include "locrank/errors.hpp"
#include "locrank/evaluation.hpp"
#include "locrank/io.hpp"
#include "locrank/rerank.hpp"
#include "locrank/retrieval.hpp"
#include "locrank/text.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using namespace locrank;

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides; // "section.key=value"
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "run configuration file");
    cmd->add_option("--set", args.overrides,
                    "override one config entry, e.g. --set pipeline.negatives_m=5");
}

RunConfig resolve_config(const CommonArgs& args) {
    RunConfig config;
    if (!args.config_path.empty()) {
        config = load_run_config(args.config_path);
    }
    for (const auto& entry : args.overrides) {
        auto eq = entry.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("--set expects key=value, got '" + entry + "'");
        }
        apply_config_entry(config, entry.substr(0, eq), entry.substr(eq + 1));
    }
    return config;
}

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const RunConfig& config,
                                                           EmbeddingProviderSpec spec) {
    if (config.embedding_provider == "remote") {
        return std::make_unique<RemoteEmbeddingProvider>(std::move(spec));
    }
    return std::make_unique<HashEmbeddingProvider>(std::move(spec), config.root_seed);
}

std::unique_ptr<CompletionProvider> make_completion_provider(
    const RunConfig& config, const std::vector<std::string>& oracle_gold_texts) {
    if (config.completion_provider == "reverse") {
        return std::make_unique<ReverseCompletionStub>();
    }
    if (config.completion_provider == "oracle") {
        return std::make_unique<OracleCompletionStub>(oracle_gold_texts);
    }
    if (config.completion_provider == "remote") {
        return std::make_unique<RemoteCompletionProvider>();
    }
    return std::make_unique<IdentityCompletionStub>();
}

// First line of every generated JSONL output: the configuration values the
// run depended on, root seed included.
std::string header_line(const RunConfig& config) {
    nlohmann::ordered_json h;
    h["tool"] = "locrank";
    h["root_seed"] = config.root_seed;
    h["consistency_k"] =
        config.filtering_enabled ? nlohmann::ordered_json(config.consistency_k)
                                 : nlohmann::ordered_json("none");
    h["negatives_m"] = config.negatives_m;
    h["window_size"] = config.window_size;
    h["stride"] = config.stride;
    h["per_candidate_max_tokens"] = config.per_candidate_max_tokens;
    h["total_max_tokens"] = config.total_max_tokens;
    h["embedding_provider"] = config.embedding_provider;
    h["embedding_dimension"] = config.embedding_dimension;
    h["completion_provider"] = config.completion_provider;
    nlohmann::ordered_json wrapped;
    wrapped["header"] = std::move(h);
    return wrapped.dump() + "\n";
}

struct BenchmarkLine {
    std::string instance_id;
    std::string query_text;
    std::vector<std::string> gold_names;
};

std::vector<BenchmarkLine> parse_benchmark_lines(const std::string& jsonl) {
    std::vector<BenchmarkLine> out;
    std::istringstream in(jsonl);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw InputError("benchmark jsonl: bad JSON at line " + std::to_string(line_no));
        }
        if (j.contains("header")) continue;
        BenchmarkLine bl;
        bl.instance_id = j.at("instance_id").get<std::string>();
        bl.query_text = j.at("query_text").get<std::string>();
        if (j.contains("gold_qualified_names")) {
            bl.gold_names = j["gold_qualified_names"].get<std::vector<std::string>>();
        }
        out.push_back(std::move(bl));
    }
    return out;
}

void write_eval_outputs(const fs::path& out_dir, const EvalReport& report) {
    io::write_file(out_dir / "eval_report.json", report_to_json(report));
    io::write_file(out_dir / "report.txt", report_to_text(report));
    io::write_file(out_dir / "ksweep.csv", ksweep_to_csv(report));
}

// ---- extract --------------------------------------------------------------------

struct ExtractArgs {
    std::string repo;
    std::string commit;
    std::string repo_id;
    std::vector<std::string> extensions{".py"};
    std::string out;
};

int run_extract(const ExtractArgs& args) {
    std::string repo_id =
        args.repo_id.empty() ? fs::path(args.repo).filename().string() : args.repo_id;
    auto snapshot = RepoSnapshot::open(repo_id, args.repo, args.commit);
    auto result =
        extract_units(snapshot, {args.extensions.begin(), args.extensions.end()});
    io::write_file(args.out, units_to_jsonl(result.units));
    for (const auto& skipped : result.skipped) {
        std::cerr << "skipped " << skipped.file_path << ": " << skipped.reason << "\n";
    }
    std::cout << "units: " << result.units.size()
              << " skipped_files: " << result.skipped.size() << "\n";
    return 0;
}

// ---- curate ---------------------------------------------------------------------

struct CurateArgs {
    CommonArgs common;
    std::string prs;
    std::string repos;
    std::string out;
    bool stats = false;
    bool rerank_examples = false;
    std::string k_flag; // integer or "none"
    int m_flag = -1;
};

int run_curate(const CurateArgs& args) {
    RunConfig config = resolve_config(args.common);
    if (!args.k_flag.empty()) {
        apply_config_entry(config, "pipeline.consistency_k", args.k_flag);
    }
    if (args.m_flag > 0) {
        config.negatives_m = args.m_flag;
    }

    auto records = pr_records_from_jsonl(io::read_file(args.prs));
    auto provider = make_embedding_provider(config, config.embedding_spec());

    const fs::path repos_root(args.repos);
    if (!fs::is_directory(repos_root)) {
        throw InputError("--repos is not a directory: " + repos_root.string());
    }
    UnitsResolver resolver = [&repos_root](const std::string& repo_id,
                                           const std::string& commit_ref) {
        auto snapshot = RepoSnapshot::open(repo_id, repos_root / repo_id, commit_ref);
        return extract_units(snapshot).units;
    };

    CurateOptions options;
    options.filtering_enabled = config.filtering_enabled;
    options.consistency_k = config.consistency_k;
    options.negatives_m = config.negatives_m;
    auto result = curate_corpus(records, resolver, *provider, options);

    fs::create_directories(args.out);
    const fs::path out_dir(args.out);
    const std::string header = header_line(config);
    io::write_file(out_dir / "instances.jsonl",
                   header + instances_to_jsonl(result.instances));
    io::write_file(out_dir / "triples.jsonl", header + triples_to_jsonl(result.triples));
    {
        std::ostringstream skipped;
        skipped << header;
        for (const auto& [pr_id, reason] : result.skipped) {
            nlohmann::ordered_json j;
            j["pr_id"] = pr_id;
            j["reason"] = reason;
            skipped << j.dump() << '\n';
        }
        io::write_file(out_dir / "skipped.jsonl", skipped.str());
    }
    if (args.stats) {
        io::write_file(out_dir / "stats.csv", curation_stats_to_csv(result.stats));
    }
    if (args.rerank_examples) {
        std::ostringstream examples;
        examples << header;
        std::size_t emitted = 0, short_triples = 0;
        PromptBudget budget = config.prompt_budget();
        for (std::size_t i = 0; i < result.triples.size(); ++i) {
            if (static_cast<int>(result.triples[i].negatives.size()) <
                config.window_size - 1) {
                ++short_triples;
                continue;
            }
            auto example =
                build_training_example(result.triples[i], config.root_seed + i, budget,
                                       config.window_size, config.rerank_instruction);
            nlohmann::ordered_json j;
            j["prompt_text"] = example.prompt_text;
            j["target_identifier"] = example.target_identifier;
            j["suppress_end_token"] = example.suppress_end_token;
            examples << j.dump() << '\n';
            ++emitted;
        }
        io::write_file(out_dir / "rerank_examples.jsonl", examples.str());
        std::cout << "rerank_examples: " << emitted << " short_triples: " << short_triples
                  << "\n";
    }

    std::cout << "records: " << result.records_seen
              << " selected: " << result.records_selected
              << " instances_built: " << result.instances_built
              << " retained: " << result.instances.size()
              << " triples: " << result.triples.size()
              << " skipped_records: " << result.skipped.size() << "\n";
    return 0;
}

// ---- index ----------------------------------------------------------------------

struct IndexArgs {
    CommonArgs common;
    std::string units;
    std::string repo_id;
    std::string commit;
    std::string out;
};

int run_index(const IndexArgs& args) {
    RunConfig config = resolve_config(args.common);
    auto units = units_from_jsonl(io::read_file(args.units));
    auto provider = make_embedding_provider(config, config.embedding_spec());
    auto index = VectorIndex::build(units, *provider, args.repo_id, args.commit);
    index.save(args.out);
    std::cout << "indexed: " << index.size() << " dimension: " << index.dimension() << "\n";
    return 0;
}

// ---- localize -------------------------------------------------------------------

struct LocalizeArgs {
    CommonArgs common;
    std::string index;
    std::string benchmark;
    std::string units;
    int top_k = 100;
    std::string rerank = "off";
    std::string out;
};

int run_localize(const LocalizeArgs& args) {
    RunConfig config = resolve_config(args.common);
    if (args.rerank != "on" && args.rerank != "off") {
        throw ConfigError("--rerank expects on or off");
    }
    if (args.top_k < 1) {
        throw ConfigError("--top-k must be >= 1");
    }
    const bool rerank_on = args.rerank == "on";

    auto index = VectorIndex::load(args.index);
    auto units = units_from_jsonl(io::read_file(args.units));
    const std::string benchmark_jsonl = io::read_file(args.benchmark);
    auto lines = parse_benchmark_lines(benchmark_jsonl);

    std::map<std::string, const CodeUnit*> units_by_id;
    std::map<std::string, const CodeUnit*> units_by_qual;
    for (const auto& u : units) {
        units_by_id.emplace(u.unit_id, &u);
        units_by_qual.emplace(u.qualified_name, &u);
    }

    // queries embed under the index's stored spec; the config only selects
    // the provider implementation
    auto provider = make_embedding_provider(config, index.spec());
    PromptBudget budget = config.prompt_budget();
    RerankOptions rerank_options = config.rerank_options();

    std::vector<RankedList> ranked_lists;
    std::vector<bool> fallback_flags;
    UsageLedger ledger;

    for (const auto& bl : lines) {
        auto qv = embed_query(bl.query_text, *provider);
        auto ranked = retrieve(index, qv, args.top_k, bl.instance_id);
        bool fallback = false;
        if (rerank_on) {
            std::vector<std::string> gold_texts;
            for (const auto& name : bl.gold_names) {
                auto it = units_by_qual.find(name);
                if (it != units_by_qual.end()) {
                    gold_texts.push_back(it->second->source_text);
                }
            }
            auto completion = make_completion_provider(config, gold_texts);
            auto text_of = [&units_by_id](const std::string& unit_id) {
                auto it = units_by_id.find(unit_id);
                if (it == units_by_id.end()) {
                    throw IntegrityError("index references unknown unit " + unit_id);
                }
                return it->second->source_text;
            };
            auto result = sliding_window_rerank(bl.query_text, ranked, text_of, budget,
                                                *completion, rerank_options);
            ranked = std::move(result.ranked);
            fallback = result.any_fallback;
            ledger.entries.push_back({bl.instance_id, result.usage.prompt_tokens,
                                      result.usage.output_tokens, result.provider_calls});
        }
        ranked_lists.push_back(std::move(ranked));
        fallback_flags.push_back(fallback);
    }

    fs::create_directories(args.out);
    const fs::path out_dir(args.out);
    {
        std::ostringstream out;
        out << header_line(config);
        for (std::size_t i = 0; i < ranked_lists.size(); ++i) {
            nlohmann::ordered_json j;
            j["query_id"] = ranked_lists[i].query_id;
            if (fallback_flags[i]) {
                j["fallback"] = true;
            }
            auto ranking = nlohmann::ordered_json::array();
            for (const auto& e : ranked_lists[i].entries) {
                ranking.push_back({{"unit_id", e.unit_id}, {"score", e.score}});
            }
            j["ranking"] = std::move(ranking);
            out << j.dump() << '\n';
        }
        io::write_file(out_dir / "ranked.jsonl", out.str());
    }
    if (rerank_on) {
        io::write_file(out_dir / "usage.jsonl",
                       header_line(config) + ledger_to_jsonl(ledger));
    }

    bool any_golds = false;
    for (const auto& bl : lines) {
        if (!bl.gold_names.empty()) {
            any_golds = true;
            break;
        }
    }
    if (any_golds) {
        auto bench = load_benchmark(benchmark_jsonl, units);
        KSchedule schedule{config.file_ks, config.module_ks, config.function_ks};
        auto report = evaluate(bench, ranked_lists, schedule);
        write_eval_outputs(out_dir, report);
        for (const auto& [id, reason] : bench.excluded) {
            std::cerr << "excluded " << id << ": " << reason << "\n";
        }
        std::cout << "evaluated: " << bench.instances.size()
                  << " excluded: " << bench.excluded.size() << "\n";
    }
    std::cout << "queries: " << lines.size() << " rerank: " << args.rerank << "\n";
    return 0;
}

// ---- eval -----------------------------------------------------------------------

struct EvalArgs {
    CommonArgs common;
    std::string benchmark;
    std::string units;
    std::string ranked;
    std::string out;
};

int run_eval(const EvalArgs& args) {
    RunConfig config = resolve_config(args.common);
    auto units = units_from_jsonl(io::read_file(args.units));
    auto bench = load_benchmark(io::read_file(args.benchmark), std::move(units));
    auto ranked = ranked_lists_from_jsonl(io::read_file(args.ranked));
    KSchedule schedule{config.file_ks, config.module_ks, config.function_ks};
    auto report = evaluate(bench, ranked, schedule);
    fs::create_directories(args.out);
    write_eval_outputs(args.out, report);
    std::cout << "evaluated: " << bench.instances.size()
              << " excluded: " << bench.excluded.size() << "\n";
    return 0;
}

// ---- report ---------------------------------------------------------------------

struct ReportArgs {
    CommonArgs common;
    std::vector<std::string> eval_files;
    std::string benchmark;
    std::string units;
    std::string out;
};

int run_report(const ReportArgs& args) {
    RunConfig config = resolve_config(args.common);

    std::vector<std::string> missing;
    for (const auto& f : args.eval_files) {
        if (!fs::exists(f)) {
            missing.push_back(f);
        }
    }
    if (!missing.empty()) {
        std::cerr << "missing evaluation outputs:\n";
        for (const auto& f : missing) {
            std::cerr << "  " << f << "\n";
        }
        throw ConfigError("report: " + std::to_string(missing.size()) +
                          " evaluation files missing");
    }

    auto units = units_from_jsonl(io::read_file(args.units));
    auto bench = load_benchmark(io::read_file(args.benchmark), std::move(units));
    std::map<std::string, const BenchmarkInstance*> by_id;
    for (const auto& inst : bench.instances) {
        by_id.emplace(inst.instance_id, &inst);
    }
    std::map<std::string, const CodeUnit*> unit_by_id;
    for (const auto& u : bench.universe) {
        unit_by_id.emplace(u.unit_id, &u);
    }

    // overlap scores use raw texts, no prefixes
    EmbeddingProviderSpec overlap_spec = config.embedding_spec();
    overlap_spec.query_prefix.clear();
    overlap_spec.document_prefix.clear();
    auto provider = make_embedding_provider(config, std::move(overlap_spec));

    fs::create_directories(args.out);
    const fs::path out_dir(args.out);

    for (const auto& eval_file : args.eval_files) {
        auto report = report_from_json(io::read_file(eval_file));
        const std::string name = fs::path(eval_file).stem().string();

        io::write_file(out_dir / (name + "_ksweep.csv"), ksweep_to_csv(report));
        io::write_file(out_dir / (name + "_num_gold.csv"),
                       breakdown_to_csv(stratify_by_num_gold(report), report, "num_gold"));

        std::vector<double> lexical, semantic;
        for (const auto& id : report.instance_ids) {
            auto it = by_id.find(id);
            if (it == by_id.end()) {
                throw IntegrityError("report: instance " + id + " not in the benchmark");
            }
            const auto& inst = *it->second;
            std::string gold_concat;
            std::vector<std::string> gold_texts;
            for (const auto& gid : inst.gold_function_ids) {
                const auto* u = unit_by_id.at(gid);
                if (!gold_concat.empty()) gold_concat += "\n";
                gold_concat += u->source_text;
                gold_texts.push_back(u->source_text);
            }
            lexical.push_back(rouge1(inst.query_text, gold_concat));

            auto qv = embed_query(inst.query_text, *provider);
            auto gold_vecs = embed_documents(gold_texts, *provider);
            double mean_cos = 0.0;
            for (const auto& gv : gold_vecs) {
                double dot = 0.0;
                for (std::size_t c = 0; c < gv.values.size(); ++c) {
                    dot += double(qv.values[c]) * double(gv.values[c]);
                }
                mean_cos += dot;
            }
            semantic.push_back(mean_cos / double(gold_vecs.size()));
        }

        auto bucket_labels = [](const std::vector<double>& edges) {
            std::vector<std::string> labels;
            char buf[64];
            for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
                std::snprintf(buf, sizeof(buf), "%.2f-%.2f", edges[i], edges[i + 1]);
                labels.push_back(buf);
            }
            return labels;
        };
        auto lex_assignment = overlap_buckets(lexical, kLexicalOverlapEdges);
        io::write_file(
            out_dir / (name + "_lexical.csv"),
            breakdown_to_csv(stratify_by_bucket(report, lex_assignment.bucket,
                                                bucket_labels(kLexicalOverlapEdges)),
                             report, "rouge1_bucket"));
        auto sem_assignment = overlap_buckets(semantic, kSemanticOverlapEdges);
        io::write_file(
            out_dir / (name + "_semantic.csv"),
            breakdown_to_csv(stratify_by_bucket(report, sem_assignment.bucket,
                                                bucket_labels(kSemanticOverlapEdges)),
                             report, "cosine_bucket"));
        io::write_file(out_dir / (name + "_summary.txt"), report_to_text(report));
        std::cout << name << ": instances " << report.instance_ids.size()
                  << " lexical_clamped " << lex_assignment.clamped << " semantic_clamped "
                  << sem_assignment.clamped << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"retrieve-and-rerank toolkit for software issue localization"};
    app.require_subcommand(1);

    ExtractArgs extract_args;
    auto* cmd_extract = app.add_subcommand("extract", "parse a repository into code units");
    cmd_extract->add_option("--repo", extract_args.repo, "repository checkout")->required();
    cmd_extract->add_option("--commit", extract_args.commit, "base commit ref")->required();
    cmd_extract->add_option("--repo-id", extract_args.repo_id, "repository id");
    cmd_extract->add_option("--ext", extract_args.extensions, "file extensions");
    cmd_extract->add_option("--out", extract_args.out, "output unit inventory (jsonl)")
        ->required();

    CurateArgs curate_args;
    auto* cmd_curate =
        app.add_subcommand("curate", "build contrastive instances and triples from PRs");
    add_common(cmd_curate, curate_args.common);
    cmd_curate->add_option("--prs", curate_args.prs, "PR records (jsonl)")->required();
    cmd_curate->add_option("--repos", curate_args.repos, "directory of checkouts by repo id")
        ->required();
    cmd_curate->add_option("--out", curate_args.out, "output directory")->required();
    cmd_curate->add_flag("--stats", curate_args.stats, "emit stats.csv");
    cmd_curate->add_flag("--rerank-examples", curate_args.rerank_examples,
                         "emit rerank training examples");
    cmd_curate->add_option("--k", curate_args.k_flag,
                           "consistency filter K (integer or 'none')");
    cmd_curate->add_option("--m", curate_args.m_flag, "hard negatives per instance");

    IndexArgs index_args;
    auto* cmd_index = app.add_subcommand("index", "embed a unit inventory into a flat index");
    add_common(cmd_index, index_args.common);
    cmd_index->add_option("--units", index_args.units, "unit inventory (jsonl)")->required();
    cmd_index->add_option("--repo-id", index_args.repo_id, "snapshot repo id")->required();
    cmd_index->add_option("--commit", index_args.commit, "snapshot commit ref")->required();
    cmd_index->add_option("--out", index_args.out, "output index file")->required();

    LocalizeArgs localize_args;
    auto* cmd_localize =
        app.add_subcommand("localize", "rank units for each query, optionally rerank");
    add_common(cmd_localize, localize_args.common);
    cmd_localize->add_option("--index", localize_args.index, "index file")->required();
    cmd_localize->add_option("--benchmark", localize_args.benchmark, "query file (jsonl)")
        ->required();
    cmd_localize->add_option("--units", localize_args.units, "unit inventory (jsonl)")
        ->required();
    cmd_localize->add_option("--top-k", localize_args.top_k, "candidates to retrieve");
    cmd_localize->add_option("--rerank", localize_args.rerank, "on or off");
    cmd_localize->add_option("--out", localize_args.out, "output directory")->required();

    EvalArgs eval_args;
    auto* cmd_eval = app.add_subcommand("eval", "score ranked lists against a benchmark");
    add_common(cmd_eval, eval_args.common);
    cmd_eval->add_option("--benchmark", eval_args.benchmark, "benchmark (jsonl)")->required();
    cmd_eval->add_option("--units", eval_args.units, "unit inventory (jsonl)")->required();
    cmd_eval->add_option("--ranked", eval_args.ranked, "ranked lists (jsonl)")->required();
    cmd_eval->add_option("--out", eval_args.out, "output directory")->required();

    ReportArgs report_args;
    auto* cmd_report =
        app.add_subcommand("report", "k-sweeps and stratified breakdowns from eval outputs");
    add_common(cmd_report, report_args.common);
    cmd_report->add_option("--eval", report_args.eval_files, "eval_report.json files")
        ->required();
    cmd_report->add_option("--benchmark", report_args.benchmark, "benchmark (jsonl)")
        ->required();
    cmd_report->add_option("--units", report_args.units, "unit inventory (jsonl)")
        ->required();
    cmd_report->add_option("--out", report_args.out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (cmd_extract->parsed()) return run_extract(extract_args);
        if (cmd_curate->parsed()) return run_curate(curate_args);
        if (cmd_index->parsed()) return run_index(index_args);
        if (cmd_localize->parsed()) return run_localize(localize_args);
        if (cmd_eval->parsed()) return run_eval(eval_args);
        if (cmd_report->parsed()) return run_report(report_args);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IncompleteRunError& e) {
        std::cerr << "error: " << e.what() << "\n";
        for (const auto& id : e.missing_ids()) {
            std::cerr << "  missing: " << id << "\n";
        }
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
