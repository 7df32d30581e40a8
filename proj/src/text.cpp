#include "locrank/text.hpp"

#include <cctype>

namespace locrank::text {

std::vector<std::string> alnum_tokens(std::string_view s) {
    std::vector<std::string> out;
    std::string current;
    for (char c : s) {
        unsigned char uc = static_cast<unsigned char>(c);
        if (std::isalnum(uc)) {
            current.push_back(static_cast<char>(std::tolower(uc)));
        } else if (!current.empty()) {
            out.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) {
        out.push_back(std::move(current));
    }
    return out;
}

std::size_t ws_token_count(std::string_view s) {
    std::size_t count = 0;
    bool in_token = false;
    for (char c : s) {
        bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (!space && !in_token) {
            ++count;
            in_token = true;
        } else if (space) {
            in_token = false;
        }
    }
    return count;
}

std::string truncate_ws_tokens(std::string_view s, std::size_t max_tokens) {
    if (max_tokens == 0) {
        return "";
    }
    std::size_t count = 0;
    bool in_token = false;
    std::size_t end = 0; // one past the last kept character
    for (std::size_t i = 0; i < s.size(); ++i) {
        bool space = std::isspace(static_cast<unsigned char>(s[i])) != 0;
        if (!space && !in_token) {
            ++count;
            in_token = true;
            if (count > max_tokens) {
                break;
            }
        } else if (space) {
            in_token = false;
        }
        if (!space) {
            end = i + 1;
        }
    }
    return std::string(s.substr(0, end));
}

std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed) {
    std::uint64_t h = 14695981039346656037ULL ^ (seed * 0x9E3779B97F4A7C15ULL);
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return out;
}

} // namespace locrank::text
