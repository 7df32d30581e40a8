#pragma once

// Seeded synthetic localization instances: random token texts over a fixed
// vocabulary, one positive plus a pool of distractors per instance.

#include "locrank/corpus.hpp"

#include <memory>
#include <random>
#include <string>
#include <vector>

namespace test_support {

inline std::string random_tokens(std::mt19937& rng, int n, int vocab) {
    std::string out;
    for (int i = 0; i < n; ++i) {
        if (i > 0) out += ' ';
        out += "w" + std::to_string(rng() % static_cast<unsigned>(vocab));
    }
    return out;
}

inline std::vector<locrank::LocalizationInstance> make_synthetic_instances(
    int count, int pool_size, std::uint32_t seed) {
    std::mt19937 rng(seed);
    std::vector<locrank::LocalizationInstance> out;
    for (int i = 0; i < count; ++i) {
        locrank::LocalizationInstance inst;
        inst.instance_id = "syn-" + std::to_string(i);
        inst.pr_id = "syn-pr-" + std::to_string(i);
        inst.repo_id = "syn-repo";
        inst.query_text = random_tokens(rng, 24, 400);

        inst.positive_unit.unit_id = "pos-" + std::to_string(i);
        inst.positive_unit.file_path = "pos.py";
        inst.positive_unit.function_name = "p";
        inst.positive_unit.qualified_name = "pos.py::p";
        inst.positive_unit.span = {1, 2};
        // share some query tokens so the positive is not pure noise
        inst.positive_unit.source_text =
            inst.query_text.substr(0, inst.query_text.size() / 2) + " " +
            random_tokens(rng, 12, 400);

        auto pool = std::make_shared<std::vector<locrank::CodeUnit>>();
        for (int u = 0; u < pool_size; ++u) {
            locrank::CodeUnit unit;
            unit.unit_id = "n" + std::to_string(i) + "-" + std::to_string(u);
            unit.file_path = "pool.py";
            unit.function_name = "f" + std::to_string(u);
            unit.qualified_name = "pool.py::f" + std::to_string(u);
            unit.span = {1, 2};
            unit.source_text = random_tokens(rng, 16, 400);
            pool->push_back(std::move(unit));
        }
        inst.candidate_pool = std::move(pool);
        out.push_back(std::move(inst));
    }
    return out;
}

} // namespace test_support
