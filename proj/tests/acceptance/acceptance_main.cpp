// Acceptance suite: runs every criterion end to end and prints one PASS/FAIL
// line per criterion. Exits with the number of failed criteria.
//
// Usage: acceptance <cli-binary> <fixtures-dir>

#include "locrank/code_units.hpp"
#include "locrank/contrastive.hpp"
#include "locrank/corpus.hpp"
#include "locrank/errors.hpp"
#include "locrank/evaluation.hpp"
#include "locrank/io.hpp"
#include "locrank/rerank.hpp"
#include "locrank/retrieval.hpp"
#include "locrank/rng.hpp"
#include "locrank/text.hpp"

#include "support/hand_benchmark.hpp"
#include "support/oracles.hpp"
#include "support/planted.hpp"
#include "support/synthetic.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

namespace fs = std::filesystem;
using namespace locrank;

namespace {

fs::path g_cli;
fs::path g_fixtures;
fs::path g_scratch;

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int run_cli(const std::string& args) {
    const std::string command = g_cli.string() + " " + args + " > /dev/null 2> /dev/null";
    const int status = std::system(command.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

// ---- 1. InfoNCE oracle equivalence ------------------------------------------------

Outcome criterion_info_nce_oracle() {
    const auto start = std::chrono::steady_clock::now();
    std::mt19937 seeds(2024);
    double max_rel = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 1 + int(seeds() % 8);
        const int m = int(seeds() % 9);
        const int dim = 1 + int(seeds() % 64);
        auto batch = test_support::random_batch(n, m, dim, seeds());
        const double got = info_nce_loss(batch);
        const double expected = test_support::oracle_softmax_ce_loss(batch, 1.0);
        const double rel =
            std::abs(got - expected) / std::max({std::abs(got), std::abs(expected), 1e-6});
        max_rel = std::max(max_rel, rel);
    }
    const double elapsed = seconds_since(start);
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "1000 batches, max relative error %.2e (limit 1e-12), %.2fs (limit 5s)",
                  max_rel, elapsed);
    return {max_rel <= 1e-12 && elapsed < 5.0, detail};
}

// ---- 2. Gradient correctness ------------------------------------------------------

Outcome criterion_gradients() {
    const auto start = std::chrono::steady_clock::now();
    std::mt19937 seeds(7);
    const double tau_values[] = {1.0, 0.5, 2.0};
    // Relative error with a 1e-3 magnitude floor: coordinates whose gradient
    // is effectively zero are held to |a - fd| <= 1e-8 absolute instead,
    // which sits well above central-difference roundoff noise (~1e-10).
    double max_rel = 0.0;
    double max_absdiff_small = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        // sizes under the N<=8, M<=8, dim<=64 caps, with a few at the caps
        const bool big = trial % 20 == 0;
        const int n = big ? 8 : 1 + int(seeds() % 6);
        const int m = big ? 8 : int(seeds() % 6);
        const int dim = big ? 64 : 4 + int(seeds() % 24);
        const double tau = tau_values[trial % 3];
        auto batch = test_support::random_batch(n, m, dim, seeds());

        auto analytic = info_nce_grad(batch, tau);
        auto fd = test_support::finite_difference_grad(
            batch, tau, 1e-5,
            [](const ContrastiveBatch& b, double t) { return info_nce_loss(b, t); });

        auto fold = [&](const std::vector<double>& a, const std::vector<double>& f) {
            for (std::size_t i = 0; i < a.size(); ++i) {
                const double magnitude = std::max(std::abs(a[i]), std::abs(f[i]));
                const double diff = std::abs(a[i] - f[i]);
                if (magnitude >= 1e-3) {
                    max_rel = std::max(max_rel, diff / magnitude);
                } else {
                    max_absdiff_small = std::max(max_absdiff_small, diff);
                }
            }
        };
        fold(analytic.query_grads, fd.query_grads);
        fold(analytic.positive_grads, fd.positive_grads);
        fold(analytic.hard_negative_grads, fd.hard_negative_grads);
    }
    const double elapsed = seconds_since(start);
    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "100 batches incl. tau 0.5/2.0, max relative error %.2e (limit 1e-5), "
                  "near-zero coords max |diff| %.2e (limit 1e-8), %.2fs (limit 30s)",
                  max_rel, max_absdiff_small, elapsed);
    return {max_rel < 1e-5 && max_absdiff_small < 1e-8 && elapsed < 30.0, detail};
}

// ---- 3. Training signal -----------------------------------------------------------

Outcome criterion_training_signal() {
    const auto start = std::chrono::steady_clock::now();
    auto corpus = test_support::make_planted_corpus();
    auto initial = make_random_encoder(256, 16, 21, 77);
    const double pre = test_support::planted_acc_at_1(corpus, initial);

    TrainOptions options;
    options.epochs = 4;
    options.learning_rate = 0.5;
    options.batch_size = 16;
    options.seed = 5;
    auto trained = train_toy_encoder(corpus.triples, initial, options);
    const double post = test_support::planted_acc_at_1(corpus, trained.encoder);
    const double elapsed = seconds_since(start);

    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "planted corpus Acc@1 %.4f -> %.4f (frozen margin 0.30), %.2fs (limit 60s)",
                  pre, post, elapsed);
    return {post > pre && post >= pre + 0.30 && elapsed < 60.0, detail};
}

// ---- 4. Consistency filtering and mining oracle -----------------------------------

Outcome criterion_filter_mine_oracle() {
    auto instances = test_support::make_synthetic_instances(100, 64, 777);
    EmbeddingProviderSpec spec;
    spec.provider_name = "hash";
    spec.dimension = 64;
    HashEmbeddingProvider embedder(spec, 42);

    std::size_t mismatches = 0;
    std::size_t invariant_violations = 0;
    for (const auto& inst : instances) {
        auto oracle = test_support::oracle_instance_ranking(inst, embedder);
        for (int k : {1, 5, 20}) {
            if (consistency_filter(inst, embedder, k) != (oracle.positive_rank <= k)) {
                ++mismatches;
            }
        }
        auto triple = mine_hard_negatives(inst, embedder, 15);
        if (triple.negatives.size() != 15) {
            ++mismatches;
            continue;
        }
        for (std::size_t i = 0; i < 15; ++i) {
            if (triple.negatives[i].unit_id !=
                (*inst.candidate_pool)[oracle.pool_order[i]].unit_id) {
                ++mismatches;
            }
        }
        // no-worse-negative: every selected negative scores at least as high
        // as every unselected pool unit
        auto qv = embed_query(inst.query_text, embedder);
        auto sim = [&](const CodeUnit& u) {
            auto v = embed_documents({u.source_text}, embedder)[0];
            return kernels::dot_f32(qv.values.data(), v.values.data(), qv.values.size());
        };
        float min_selected = 2.0f;
        std::set<std::string> selected;
        for (const auto& n : triple.negatives) {
            selected.insert(n.unit_id);
            min_selected = std::min(min_selected, sim(n));
        }
        for (const auto& u : *inst.candidate_pool) {
            if (!selected.count(u.unit_id) && sim(u) > min_selected) {
                ++invariant_violations;
            }
        }
    }
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "100 instances x 64-unit pools: %zu oracle mismatches, %zu "
                  "no-worse-negative violations",
                  mismatches, invariant_violations);
    return {mismatches == 0 && invariant_violations == 0, detail};
}

// ---- 5. Pipeline counts and emitted headers ---------------------------------------

Outcome criterion_pipeline_counts() {
    auto records =
        pr_records_from_jsonl(io::read_file(g_fixtures / "prs.jsonl"));
    auto snapshot = RepoSnapshot::open("pyrepo", g_fixtures / "pyrepo", "c0");
    auto units = extract_units(snapshot).units;

    // N modified functions => N instances, for every selected fixture PR
    bool counts_ok = true;
    for (const auto& rec : select_pull_requests(records)) {
        std::vector<CodeUnit> modified;
        try {
            modified = map_diff_to_units(rec, units);
        } catch (const InputError&) {
            continue; // the malformed-diff record
        }
        auto built = build_instances(rec, units);
        if (built.instances.size() != modified.size()) {
            counts_ok = false;
        }
    }

    const fs::path out = g_scratch / "acc_curate";
    if (run_cli("curate --prs " + (g_fixtures / "prs.jsonl").string() + " --repos " +
                g_fixtures.string() + " --out " + out.string()) != 0) {
        return {false, "cmd_curate failed"};
    }
    std::string header = io::read_file(out / "triples.jsonl");
    header = header.substr(0, header.find('\n'));
    const bool k_ok = header.find("\"consistency_k\":20") != std::string::npos;
    const bool m_ok = header.find("\"negatives_m\":15") != std::string::npos;

    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "instances-per-PR rule %s; header carries K=20 %s and M=15 %s",
                  counts_ok ? "holds" : "violated", k_ok ? "yes" : "no",
                  m_ok ? "yes" : "no");
    return {counts_ok && k_ok && m_ok, detail};
}

// ---- 6. Metric correctness --------------------------------------------------------

Outcome criterion_metrics() {
    std::mt19937 gen(12);
    std::size_t failures = 0;

    // 1000 random acc_at_k cases vs direct subset check
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 1 + int(gen() % 12);
        std::vector<std::string> ids;
        for (int i = 0; i < n; ++i) ids.push_back("u" + std::to_string(gen() % 20));
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        std::shuffle(ids.begin(), ids.end(), gen);
        RankedList list;
        list.query_id = "q";
        for (std::size_t i = 0; i < ids.size(); ++i) {
            list.entries.push_back({ids[i], 1.0 / double(i + 1)});
        }
        std::set<std::string> gold;
        const int gold_n = 1 + int(gen() % 4);
        for (int i = 0; i < gold_n; ++i) gold.insert("u" + std::to_string(gen() % 20));
        const int k = 1 + int(gen() % 14);
        std::set<std::string> prefix;
        for (int i = 0; i < std::min<int>(k, int(ids.size())); ++i) {
            prefix.insert(ids[std::size_t(i)]);
        }
        const bool expected =
            std::includes(prefix.begin(), prefix.end(), gold.begin(), gold.end());
        if (acc_at_k(list, gold, k) != expected) ++failures;
    }

    // aggregation vs a group-by-max oracle on random rankings
    auto universe = test_support::hand_universe();
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::string> ids = {"u1", "u2", "u3", "u4", "u5", "u6", "u7", "u8"};
        std::shuffle(ids.begin(), ids.end(), gen);
        ids.resize(3 + gen() % 6);
        RankedList fns;
        fns.query_id = "q";
        double score = 1.0;
        for (const auto& id : ids) {
            score -= 0.01 * double(1 + gen() % 9);
            fns.entries.push_back({id, score});
        }
        for (auto g : {Granularity::file, Granularity::module}) {
            auto got = aggregate_granularity(fns, universe, g);
            std::map<std::string, double> groups;
            for (const auto& e : fns.entries) {
                for (const auto& u : universe) {
                    if (u.unit_id == e.unit_id) {
                        std::string key =
                            g == Granularity::file ? u.file_path : module_key(u);
                        auto it = groups.find(key);
                        if (it == groups.end() || e.score > it->second) {
                            groups[key] = e.score;
                        }
                    }
                }
            }
            std::vector<std::pair<std::string, double>> expected(groups.begin(),
                                                                 groups.end());
            std::sort(expected.begin(), expected.end(), [](auto& a, auto& b) {
                if (a.second != b.second) return a.second > b.second;
                return a.first < b.first;
            });
            if (got.entries.size() != expected.size()) {
                ++failures;
                continue;
            }
            for (std::size_t i = 0; i < expected.size(); ++i) {
                if (got.entries[i].unit_id != expected[i].first ||
                    got.entries[i].score != expected[i].second) {
                    ++failures;
                }
            }
        }
    }

    // monotonicity and granularity dominance on random benchmarks
    std::size_t violations = 0;
    KSchedule sweep;
    sweep.file = {1, 2, 3, 5, 8};
    sweep.module = {1, 2, 3, 5, 8};
    sweep.function = {1, 2, 3, 5, 8};
    for (int trial = 0; trial < 30; ++trial) {
        Benchmark bench;
        bench.universe = universe;
        std::vector<RankedList> lists;
        const int instances = 4 + int(gen() % 7);
        for (int i = 0; i < instances; ++i) {
            std::vector<std::string> ids = {"u1", "u2", "u3", "u4",
                                            "u5", "u6", "u7", "u8"};
            std::shuffle(ids.begin(), ids.end(), gen);
            BenchmarkInstance inst;
            inst.instance_id = "r" + std::to_string(i);
            inst.query_text = "q";
            const int gold_n = 1 + int(gen() % 3);
            for (int g = 0; g < gold_n; ++g) {
                const auto& id = ids[std::size_t(gen() % 8)];
                for (const auto& u : universe) {
                    if (u.unit_id == id) {
                        inst.gold_function_ids.insert(id);
                        inst.gold_files.insert(u.file_path);
                        inst.gold_modules.insert(module_key(u));
                    }
                }
            }
            bench.instances.push_back(inst);
            ids.resize(4 + gen() % 5);
            RankedList list;
            list.query_id = inst.instance_id;
            for (std::size_t r = 0; r < ids.size(); ++r) {
                list.entries.push_back({ids[r], 1.0 / double(r + 1)});
            }
            lists.push_back(std::move(list));
        }
        auto report = evaluate(bench, lists, sweep);
        for (const auto* g : {&report.file, &report.module, &report.function}) {
            for (std::size_t ki = 1; ki < g->ks.size(); ++ki) {
                if (g->acc_percent[ki - 1] > g->acc_percent[ki]) ++violations;
            }
        }
        for (std::size_t ki = 0; ki < sweep.function.size(); ++ki) {
            for (std::size_t i = 0; i < bench.instances.size(); ++i) {
                if (report.function.per_instance[ki][i] &&
                    !report.module.per_instance[ki][i]) {
                    ++violations;
                }
                if (report.module.per_instance[ki][i] &&
                    !report.file.per_instance[ki][i]) {
                    ++violations;
                }
            }
        }
    }

    // the hand-built 10-instance benchmark reproduces its precomputed table
    auto bench = test_support::hand_benchmark();
    auto report =
        evaluate(bench, test_support::hand_ranked_lists(), test_support::hand_schedule());
    const bool table_ok =
        report.file.acc_percent == std::vector<double>{60.00, 80.00} &&
        report.module.acc_percent == std::vector<double>{40.00, 80.00} &&
        report.function.acc_percent == std::vector<double>{20.00, 70.00, 80.00};

    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "%zu oracle mismatches over 1000+200 cases, %zu "
                  "monotonicity/dominance violations, hand table %s",
                  failures, violations, table_ok ? "exact" : "WRONG");
    return {failures == 0 && violations == 0 && table_ok, detail};
}

// ---- 7. Reranking contracts -------------------------------------------------------

Outcome criterion_rerank_contracts() {
    std::mt19937 gen(99);
    std::size_t violations = 0;

    // 10,000 fuzzed strings always repair to a permutation
    std::vector<CandidateText> seven;
    for (int i = 0; i < 7; ++i) {
        seven.push_back({"c" + std::to_string(i), "def f" + std::to_string(i) + "(): pass"});
    }
    auto window = assign_identifiers("q", seven);
    static const char alphabet[] = "[]0123456789 >abc,\n";
    for (int trial = 0; trial < 10000; ++trial) {
        std::string garbage;
        const int len = int(gen() % 40);
        for (int i = 0; i < len; ++i) {
            garbage += alphabet[gen() % (sizeof(alphabet) - 1)];
        }
        auto perm = parse_permutation(garbage, window).identifiers;
        std::vector<int> sorted = perm;
        std::sort(sorted.begin(), sorted.end());
        if (sorted != std::vector<int>{1, 2, 3, 4, 5, 6, 7}) ++violations;
    }

    // identity-stub sliding rerank is a no-op on a 100-candidate list
    PromptBudget budget;
    RankedList hundred;
    hundred.query_id = "q";
    for (int i = 0; i < 100; ++i) {
        hundred.entries.push_back({"u" + std::to_string(i), 1.0 - 0.001 * i});
    }
    auto text_of = [](const std::string& id) { return "def " + id + "(): pass"; };
    IdentityCompletionStub identity;
    auto noop = sliding_window_rerank("issue", hundred, text_of, budget, identity);
    for (int i = 0; i < 100; ++i) {
        if (noop.ranked.entries[std::size_t(i)].unit_id != "u" + std::to_string(i)) {
            ++violations;
        }
    }

    // oracle-stub rerank lifts a gold from position 18 within 3 window calls
    RankedList twenty;
    twenty.query_id = "q";
    for (int i = 0; i < 20; ++i) {
        twenty.entries.push_back({"u" + std::to_string(i), 1.0 - 0.01 * i});
    }
    auto gold_text_of = [](const std::string& id) {
        return id == "u17" ? std::string("def gold(): GOLDMARK body")
                           : "def " + id + "(): pass";
    };
    OracleCompletionStub oracle({}, "GOLDMARK");
    auto lifted = sliding_window_rerank("issue", twenty, gold_text_of, budget, oracle);
    const bool lift_ok =
        lifted.provider_calls == 3 && lifted.ranked.entries[0].unit_id == "u17";

    // budget discipline on assorted prompts, including worst cases
    auto long_tokens = [](int n) {
        std::string out;
        for (int i = 0; i < n; ++i) {
            if (i > 0) out += ' ';
            out += "t" + std::to_string(i);
        }
        return out;
    };
    std::size_t budget_violations = 0;
    for (int n_cands : {1, 5, 10}) {
        std::vector<CandidateText> candidates;
        for (int i = 0; i < n_cands; ++i) {
            candidates.push_back({"c" + std::to_string(i), long_tokens(2000)});
        }
        auto w = assign_identifiers("q", candidates);
        auto prompt = build_prompt(long_tokens(20000), w, budget);
        if (budget.count(prompt.text) > 16348) ++budget_violations;
        if (prompt.total_tokens() > 16348) ++budget_violations;
        for (auto t : prompt.candidate_tokens) {
            // block token count = identifier marker + candidate text
            if (t > 1024 + 1) ++budget_violations;
        }
    }

    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "%zu permutation/no-op violations; gold lift in 3 calls %s; %zu budget "
                  "violations (1024/16348)",
                  violations, lift_ok ? "yes" : "NO", budget_violations);
    return {violations == 0 && lift_ok && budget_violations == 0, detail};
}

// ---- 8. First-token loss ----------------------------------------------------------

Outcome criterion_first_token_loss() {
    std::vector<double> uniform(10, 1.3);
    const double ln10 = std::log(10.0);
    const bool uniform_ok = std::abs(first_token_loss(uniform, 3) - ln10) <= 1e-12;

    std::mt19937 gen(21);
    std::uniform_real_distribution<double> dist(-5.0, 5.0);
    double max_rel = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 2 + int(gen() % 10);
        std::vector<double> logits(static_cast<std::size_t>(n));
        for (auto& v : logits) v = dist(gen);
        const int target = 1 + int(gen() % unsigned(n));
        double denom = 0.0;
        for (double v : logits) denom += std::exp(v);
        const double expected =
            -std::log(std::exp(logits[std::size_t(target) - 1]) / denom);
        const double got = first_token_loss(logits, target);
        max_rel = std::max(max_rel, std::abs(got - expected) /
                                        std::max({std::abs(got), std::abs(expected), 1.0}));
    }
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "uniform 10-way = ln 10 %s; softmax oracle max rel %.2e (limit 1e-12)",
                  uniform_ok ? "yes" : "NO", max_rel);
    return {uniform_ok && max_rel <= 1e-12, detail};
}

// ---- 9. End-to-end determinism ----------------------------------------------------

Outcome criterion_determinism() {
    const fs::path prs = g_fixtures / "prs.jsonl";
    const fs::path c1 = g_scratch / "det_curate1";
    const fs::path c2 = g_scratch / "det_curate2";
    for (const auto& out : {c1, c2}) {
        if (run_cli("curate --prs " + prs.string() + " --repos " + g_fixtures.string() +
                    " --out " + out.string() + " --stats --rerank-examples") != 0) {
            return {false, "cmd_curate failed"};
        }
    }
    for (const char* name : {"instances.jsonl", "triples.jsonl", "skipped.jsonl",
                             "stats.csv", "rerank_examples.jsonl"}) {
        if (io::read_file(c1 / name) != io::read_file(c2 / name)) {
            return {false, std::string("curate outputs differ: ") + name};
        }
    }

    const fs::path units = g_scratch / "det_units.jsonl";
    const fs::path index = g_scratch / "det_index.bin";
    if (run_cli("extract --repo " + (g_fixtures / "pyrepo").string() +
                " --commit c0 --repo-id pyrepo --out " + units.string()) != 0 ||
        run_cli("index --units " + units.string() +
                " --repo-id pyrepo --commit c0 --out " + index.string()) != 0) {
        return {false, "extract/index failed"};
    }
    const fs::path l1 = g_scratch / "det_loc1";
    const fs::path l2 = g_scratch / "det_loc2";
    for (const auto& out : {l1, l2}) {
        if (run_cli("localize --index " + index.string() + " --benchmark " +
                    (g_fixtures / "benchmark.jsonl").string() + " --units " +
                    units.string() + " --rerank on --out " + out.string()) != 0) {
            return {false, "cmd_localize failed"};
        }
    }
    for (const char* name : {"ranked.jsonl", "usage.jsonl", "eval_report.json",
                             "ksweep.csv"}) {
        if (io::read_file(l1 / name) != io::read_file(l2 / name)) {
            return {false, std::string("localize outputs differ: ") + name};
        }
    }
    return {true, "curate and localize outputs byte-identical across two runs"};
}

// ---- 10. Cost accounting ----------------------------------------------------------

Outcome criterion_cost_accounting() {
    UsageLedger ledger;
    ledger.entries = {{"footprint", 78409, 741, 1}};
    const double in_price = 2e-6;
    const double out_price = 8e-6;
    auto table = cost_report(ledger, in_price, out_price);
    const double expected = 78409.0 * in_price + 741.0 * out_price;
    const bool exact = table.per_instance.size() == 1 &&
                       table.per_instance[0].second == expected &&
                       table.total_cost == expected;

    auto zero = cost_report(ledger, 0.0, 0.0);
    const bool zero_ok = zero.total_cost == 0.0;

    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "78,409 prompt / 741 output tokens -> cost %.6f equals the "
                  "price-token product exactly: %s; zero prices %s",
                  table.total_cost, exact ? "yes" : "NO", zero_ok ? "ok" : "NO");
    return {exact && zero_ok, detail};
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 3) {
        std::cerr << "usage: acceptance <cli-binary> <fixtures-dir>\n";
        return 2;
    }
    g_cli = argv[1];
    g_fixtures = argv[2];
    g_scratch = fs::temp_directory_path() /
                ("locrank_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(g_scratch);
    fs::create_directories(g_scratch);

    struct Criterion {
        int number;
        const char* title;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "InfoNCE oracle equivalence", criterion_info_nce_oracle},
        {2, "gradient correctness vs central finite differences", criterion_gradients},
        {3, "training lifts planted-corpus retrieval Acc@1", criterion_training_signal},
        {4, "consistency filtering and mining match the full-sort oracle",
         criterion_filter_mine_oracle},
        {5, "instances-per-PR counts and K=20/M=15 headers", criterion_pipeline_counts},
        {6, "metric correctness, monotonicity and granularity dominance",
         criterion_metrics},
        {7, "reranking contracts: permutations, no-op, gold lift, budgets",
         criterion_rerank_contracts},
        {8, "first-token loss equals the softmax oracle", criterion_first_token_loss},
        {9, "byte-identical curate and localize reruns", criterion_determinism},
        {10, "token cost accounting is an exact product sum", criterion_cost_accounting},
    };

    int failures = 0;
    for (const auto& criterion : criteria) {
        Outcome outcome;
        try {
            outcome = criterion.run();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        if (!outcome.pass) {
            ++failures;
        }
        std::printf("%s criterion %2d: %s -- %s\n", outcome.pass ? "PASS" : "FAIL",
                    criterion.number, criterion.title, outcome.detail.c_str());
        std::fflush(stdout);
    }
    fs::remove_all(g_scratch);
    return failures;
}
