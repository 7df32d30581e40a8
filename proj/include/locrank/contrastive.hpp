#pragma once

#include "locrank/corpus.hpp"
#include "locrank/embedding.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace locrank {

// One training batch: N queries, their N positives (the in-batch positive set)
// and N*M hard negatives. All matrices are row-major doubles.
struct ContrastiveBatch {
    int n = 0;
    int m = 0;
    int dim = 0;
    std::vector<double> query_embs;         // n x dim
    std::vector<double> positive_embs;      // n x dim
    std::vector<double> hard_negative_embs; // n x m x dim

    const double* query(int i) const { return query_embs.data() + std::size_t(i) * dim; }
    const double* positive(int i) const {
        return positive_embs.data() + std::size_t(i) * dim;
    }
    const double* negative(int i, int j) const {
        return hard_negative_embs.data() + (std::size_t(i) * m + j) * dim;
    }

    // Shape errors are ConfigError; non-finite entries are InputError.
    void validate() const;
};

// Mean over queries of the contrastive cross-entropy: each query's positive
// is softmax-normalized against all N positives plus all N*M hard negatives
// in the batch (N(M+1) denominator terms). Computed with a max-shifted
// log-sum-exp.
double info_nce_loss(const ContrastiveBatch& batch, double temperature = 1.0);

struct ContrastiveGradients {
    std::vector<double> query_grads;         // n x dim
    std::vector<double> positive_grads;      // n x dim
    std::vector<double> hard_negative_grads; // n x m x dim
};

// Exact analytic gradient of info_nce_loss with respect to every embedding.
ContrastiveGradients info_nce_grad(const ContrastiveBatch& batch,
                                   double temperature = 1.0);

// Linear bag-of-hashed-tokens encoder: embed(text) =
// normalize(weights^T hash_features(text)). A desk-scale bi-encoder whose
// query and document sides share the weights.
struct ToyEncoder {
    int input_features = 0;
    int embedding_dim = 0;
    std::uint64_t hash_seed = 0;
    std::vector<double> weights; // input_features x embedding_dim, row-major

    double weight(int f, int d) const { return weights[std::size_t(f) * embedding_dim + d]; }

    // Flat binary of 64-bit floats behind a small dimension header.
    void save(const std::filesystem::path& path) const;
    static ToyEncoder load(const std::filesystem::path& path);
};

ToyEncoder make_random_encoder(int input_features, int embedding_dim,
                               std::uint64_t hash_seed, std::uint64_t init_seed);

// Pure function of (encoder, text). Throws DegenerateVectorError when the
// pre-normalization vector is zero.
EmbeddingVector toy_encode(const ToyEncoder& encoder, const std::string& text);

// Double-precision encoding used inside training.
std::vector<double> toy_encode_f64(const ToyEncoder& encoder, const std::string& text);

struct TrainOptions {
    int epochs = 1;
    double learning_rate = 0.1;
    int batch_size = 8;
    std::uint64_t seed = 0;
    double temperature = 1.0;
};

struct TrainResult {
    ToyEncoder encoder;
    // (step, loss) per SGD step; serializable with loss_curve_to_csv.
    std::vector<std::pair<std::size_t, double>> loss_curve;
};

// Plain single-threaded SGD on info_nce_loss over shuffled triple batches;
// in-batch positives plus each triple's hard negatives form the denominator.
// Gradients flow through the output normalization. A fixed seed makes the
// final weights bit-reproducible. Throws DivergenceError (with the step
// index) if the loss turns non-finite.
TrainResult train_toy_encoder(const std::vector<TrainingTriple>& triples,
                              const ToyEncoder& initial, const TrainOptions& options);

std::string loss_curve_to_csv(const std::vector<std::pair<std::size_t, double>>& curve);

// Wraps a ToyEncoder as an EmbeddingProvider so retrieval components can use
// it directly.
class ToyEncoderProvider : public EmbeddingProvider {
public:
    explicit ToyEncoderProvider(ToyEncoder encoder, std::string name = "toy");

    const EmbeddingProviderSpec& spec() const override { return spec_; }
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override;

private:
    ToyEncoder encoder_;
    EmbeddingProviderSpec spec_;
};

} // namespace locrank
