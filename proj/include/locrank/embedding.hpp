#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace locrank {

// Query prefixes used by the supported encoder families. Documents carry no
// prefix unless a spec sets one.
inline constexpr std::string_view kCodeSearchQueryPrefix =
    "Represent this query for searching relevant code: ";
inline constexpr std::string_view kIssueInstructQueryPrefix =
    "Instruct: Given a github issue, identify the code that needs to be changed "
    "to fix the issue. Query: ";

struct EmbeddingProviderSpec {
    std::string provider_name;
    int dimension = 0;
    std::string query_prefix;
    std::string document_prefix;
    int max_input_tokens = 8192; // whitespace tokens unless the provider counts exactly
    int max_batch_size = 64;
};

// Unit-norm dense vector.
struct EmbeddingVector {
    std::vector<float> values;

    int dimension() const { return static_cast<int>(values.size()); }
    bool operator==(const EmbeddingVector&) const = default;
};

// Scales to unit L2 norm (accumulating the norm in double).
// Throws DegenerateVectorError on a zero vector.
EmbeddingVector normalize(std::vector<float> values);

// Signed bag-of-tokens feature accumulation: lowercase, split on
// non-alphanumerics, hash each token into a bucket with a +/-1 sign.
// Pure function of (text, dimension, seed).
std::vector<double> hash_features(const std::string& text, int dimension,
                                  std::uint64_t seed);

// Deterministic local embedding: normalized hash_features.
// Requires dimension >= 8; throws DegenerateVectorError when the text has no
// tokens or the accumulated signs cancel out.
EmbeddingVector hash_embed(const std::string& text, int dimension, std::uint64_t seed);

// Keeps the first D coordinates and renormalizes.
EmbeddingVector truncate_dimension(const EmbeddingVector& vec, int d);

// Batch-oriented embedding backend. Implementations throw ProviderError on
// failure (retriable for transient transport problems) and ConfigError for
// permanent mismatches such as a wrong dimension.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    virtual const EmbeddingProviderSpec& spec() const = 0;

    // One vector per input text, in order. Batches passed here are already
    // within spec().max_batch_size.
    virtual std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) = 0;
};

// Applies the query prefix and the token budget, then embeds. The provider
// input is (prefix + text) truncated to max_input_tokens whitespace tokens.
EmbeddingVector embed_query(const std::string& text, EmbeddingProvider& provider);

// Document-side counterpart of embed_query, chunked into provider batches.
std::vector<EmbeddingVector> embed_documents(const std::vector<std::string>& texts,
                                             EmbeddingProvider& provider);

// Local provider backed by hash_embed.
class HashEmbeddingProvider : public EmbeddingProvider {
public:
    HashEmbeddingProvider(EmbeddingProviderSpec spec, std::uint64_t seed);

    const EmbeddingProviderSpec& spec() const override { return spec_; }
    std::uint64_t seed() const { return seed_; }
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override;

private:
    EmbeddingProviderSpec spec_;
    std::uint64_t seed_;
};

// HTTP provider: POST {base_url}/embed with {"texts": [...]}, expecting
// {"embeddings": [[...], ...]}. The bearer token is read from an environment
// variable, never from flags or config files.
class RemoteEmbeddingProvider : public EmbeddingProvider {
public:
    // url_env/key_env name the environment variables holding the endpoint and
    // credential (defaults EMBED_API_URL / EMBED_API_KEY).
    RemoteEmbeddingProvider(EmbeddingProviderSpec spec,
                            const std::string& url_env = "EMBED_API_URL",
                            const std::string& key_env = "EMBED_API_KEY");

    const EmbeddingProviderSpec& spec() const override { return spec_; }
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override;

private:
    EmbeddingProviderSpec spec_;
    std::string base_url_;
    std::string api_key_;
};

} // namespace locrank
