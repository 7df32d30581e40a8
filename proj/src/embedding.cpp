#include "locrank/embedding.hpp"

#include "locrank/errors.hpp"
#include "locrank/text.hpp"

#include <json.hpp>

#define CPPHTTPLIB_NO_EXCEPTIONS
#include <httplib.h>

#include <cmath>
#include <cstdlib>

namespace locrank {

EmbeddingVector normalize(std::vector<float> values) {
    double sq = 0.0;
    for (float v : values) {
        sq += static_cast<double>(v) * static_cast<double>(v);
    }
    if (!(sq > 0.0) || !std::isfinite(sq)) {
        throw DegenerateVectorError("cannot normalize a zero or non-finite vector");
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (float& v : values) {
        v = static_cast<float>(v * inv);
    }
    return EmbeddingVector{std::move(values)};
}

std::vector<double> hash_features(const std::string& text, int dimension,
                                  std::uint64_t seed) {
    if (dimension < 1) {
        throw ConfigError("hash_features: dimension must be positive");
    }
    auto tokens = text::alnum_tokens(text);
    if (tokens.empty()) {
        throw DegenerateVectorError("text has no tokens");
    }
    std::vector<double> acc(static_cast<std::size_t>(dimension), 0.0);
    for (const auto& tok : tokens) {
        std::uint64_t h = text::fnv1a64(tok, seed);
        std::size_t bucket = static_cast<std::size_t>(h % static_cast<std::uint64_t>(dimension));
        double sign = (h >> 63) ? 1.0 : -1.0;
        acc[bucket] += sign;
    }
    return acc;
}

EmbeddingVector hash_embed(const std::string& text, int dimension, std::uint64_t seed) {
    if (dimension < 8) {
        throw ConfigError("hash_embed: dimension must be >= 8");
    }
    auto features = hash_features(text, dimension, seed);
    std::vector<float> values(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        values[i] = static_cast<float>(features[i]);
    }
    return normalize(std::move(values));
}

EmbeddingVector truncate_dimension(const EmbeddingVector& vec, int d) {
    if (d < 1 || d > vec.dimension()) {
        throw ConfigError("truncate_dimension: D must be in [1, dimension]");
    }
    std::vector<float> head(vec.values.begin(), vec.values.begin() + d);
    return normalize(std::move(head));
}

namespace {

std::string prefixed_input(const std::string& prefix, const std::string& text,
                           int max_input_tokens) {
    return text::truncate_ws_tokens(prefix + text,
                                    static_cast<std::size_t>(max_input_tokens));
}

void check_result(const std::vector<EmbeddingVector>& vecs, std::size_t expected,
                  int dimension) {
    if (vecs.size() != expected) {
        throw ProviderError("provider returned " + std::to_string(vecs.size()) +
                                " vectors for " + std::to_string(expected) + " texts",
                            /*retriable=*/false);
    }
    for (const auto& v : vecs) {
        if (v.dimension() != dimension) {
            throw ConfigError("provider returned dimension " +
                              std::to_string(v.dimension()) + ", spec says " +
                              std::to_string(dimension));
        }
    }
}

} // namespace

EmbeddingVector embed_query(const std::string& text, EmbeddingProvider& provider) {
    if (text.empty()) {
        throw InputError("embed_query: empty query text");
    }
    const auto& spec = provider.spec();
    std::vector<std::string> batch{
        prefixed_input(spec.query_prefix, text, spec.max_input_tokens)};
    auto vecs = provider.embed_batch(batch);
    check_result(vecs, 1, spec.dimension);
    return normalize(std::move(vecs[0].values));
}

std::vector<EmbeddingVector> embed_documents(const std::vector<std::string>& texts,
                                             EmbeddingProvider& provider) {
    const auto& spec = provider.spec();
    const std::size_t batch_size =
        spec.max_batch_size > 0 ? static_cast<std::size_t>(spec.max_batch_size) : 64;
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t start = 0; start < texts.size(); start += batch_size) {
        std::vector<std::string> batch;
        for (std::size_t i = start; i < std::min(texts.size(), start + batch_size); ++i) {
            batch.push_back(prefixed_input(spec.document_prefix, texts[i],
                                           spec.max_input_tokens));
        }
        auto vecs = provider.embed_batch(batch);
        check_result(vecs, batch.size(), spec.dimension);
        for (auto& v : vecs) {
            out.push_back(normalize(std::move(v.values)));
        }
    }
    return out;
}

HashEmbeddingProvider::HashEmbeddingProvider(EmbeddingProviderSpec spec, std::uint64_t seed)
    : spec_(std::move(spec)), seed_(seed) {
    if (spec_.dimension < 8) {
        throw ConfigError("hash provider requires dimension >= 8");
    }
}

std::vector<EmbeddingVector> HashEmbeddingProvider::embed_batch(
    const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        out.push_back(hash_embed(t, spec_.dimension, seed_));
    }
    return out;
}

RemoteEmbeddingProvider::RemoteEmbeddingProvider(EmbeddingProviderSpec spec,
                                                 const std::string& url_env,
                                                 const std::string& key_env)
    : spec_(std::move(spec)) {
    const char* url = std::getenv(url_env.c_str());
    if (url == nullptr || *url == '\0') {
        throw ConfigError("remote embedding provider: " + url_env + " is not set");
    }
    base_url_ = url;
    if (const char* key = std::getenv(key_env.c_str())) {
        api_key_ = key;
    }
}

std::vector<EmbeddingVector> RemoteEmbeddingProvider::embed_batch(
    const std::vector<std::string>& texts) {
    httplib::Client client(base_url_);
    client.set_read_timeout(30, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) {
        headers.emplace("Authorization", "Bearer " + api_key_);
    }
    nlohmann::json body;
    body["texts"] = texts;
    auto res = client.Post("/embed", headers, body.dump(), "application/json");
    if (!res) {
        throw ProviderError("embedding endpoint unreachable: " + base_url_,
                            /*retriable=*/true, texts);
    }
    if (res->status >= 500) {
        throw ProviderError("embedding endpoint error " + std::to_string(res->status),
                            /*retriable=*/true, texts);
    }
    if (res->status != 200) {
        throw ProviderError("embedding endpoint rejected request: " +
                                std::to_string(res->status),
                            /*retriable=*/false, texts);
    }
    nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("embeddings")) {
        throw ProviderError("embedding endpoint returned malformed JSON",
                            /*retriable=*/false, texts);
    }
    std::vector<EmbeddingVector> out;
    for (const auto& row : parsed["embeddings"]) {
        out.push_back(EmbeddingVector{row.get<std::vector<float>>()});
    }
    return out;
}

} // namespace locrank
