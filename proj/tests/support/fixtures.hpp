#pragma once

#include <cstdlib>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace test_support {

// Root of the checked-in fixture tree, passed by CTest via LOCRANK_FIXTURES.
inline std::filesystem::path fixture_dir() {
    const char* env = std::getenv("LOCRANK_FIXTURES");
    if (env == nullptr) {
        throw std::runtime_error("LOCRANK_FIXTURES is not set");
    }
    return std::filesystem::path(env);
}

} // namespace test_support
