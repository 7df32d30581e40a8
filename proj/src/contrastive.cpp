#include "locrank/contrastive.hpp"

#include "locrank/errors.hpp"
#include "locrank/io.hpp"
#include "locrank/kernels/vec_kernels.hpp"
#include "locrank/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace locrank {

void ContrastiveBatch::validate() const {
    if (n < 1 || m < 0 || dim < 1) {
        throw ConfigError("contrastive batch: need n >= 1, m >= 0, dim >= 1");
    }
    const std::size_t nd = std::size_t(n) * dim;
    if (query_embs.size() != nd || positive_embs.size() != nd ||
        hard_negative_embs.size() != std::size_t(n) * m * dim) {
        throw ConfigError("contrastive batch: embedding matrix shapes do not match n/m/dim");
    }
    auto all_finite = [](const std::vector<double>& v) {
        for (double x : v) {
            if (!std::isfinite(x)) return false;
        }
        return true;
    };
    if (!all_finite(query_embs) || !all_finite(positive_embs) ||
        !all_finite(hard_negative_embs)) {
        throw InputError("contrastive batch: non-finite embedding value");
    }
}

namespace {

// Logits of query i against the shared document set: positives first
// (doc k = positive k for k < n), then negatives row-major
// (doc n + i*m + j = negative j of query i). The positive of query i sits at
// index i.
void query_logits(const ContrastiveBatch& batch, int i, double inv_tau,
                  std::vector<double>& z) {
    const int n = batch.n, m = batch.m, dim = batch.dim;
    const double* q = batch.query(i);
    for (int k = 0; k < n; ++k) {
        z[std::size_t(k)] =
            kernels::dot_f64(q, batch.positive(k), std::size_t(dim)) * inv_tau;
    }
    for (int k = 0; k < n; ++k) {
        for (int j = 0; j < m; ++j) {
            z[std::size_t(n) + std::size_t(k) * m + j] =
                kernels::dot_f64(q, batch.negative(k, j), std::size_t(dim)) * inv_tau;
        }
    }
}

double check_temperature(double temperature) {
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw ConfigError("temperature must be positive and finite");
    }
    return 1.0 / temperature;
}

} // namespace

double info_nce_loss(const ContrastiveBatch& batch, double temperature) {
    const double inv_tau = check_temperature(temperature);
    batch.validate();

    const int n = batch.n, m = batch.m;
    const std::size_t docs = std::size_t(n) * (m + 1);
    std::vector<double> z(docs);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        query_logits(batch, i, inv_tau, z);
        const double zmax = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (double v : z) {
            sum += std::exp(v - zmax);
        }
        total += -z[std::size_t(i)] + zmax + std::log(sum);
    }
    return total / n;
}

ContrastiveGradients info_nce_grad(const ContrastiveBatch& batch, double temperature) {
    const double inv_tau = check_temperature(temperature);
    batch.validate();

    const int n = batch.n, m = batch.m, dim = batch.dim;
    const std::size_t docs = std::size_t(n) * (m + 1);

    ContrastiveGradients grads;
    grads.query_grads.assign(batch.query_embs.size(), 0.0);
    grads.positive_grads.assign(batch.positive_embs.size(), 0.0);
    grads.hard_negative_grads.assign(batch.hard_negative_embs.size(), 0.0);

    const double scale = inv_tau / n; // d(mean loss)/d(logit) carries 1/n

    std::vector<double> z(docs);
    std::vector<double> p(docs);
    for (int i = 0; i < n; ++i) {
        query_logits(batch, i, inv_tau, z);
        const double zmax = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (std::size_t k = 0; k < docs; ++k) {
            p[k] = std::exp(z[k] - zmax);
            sum += p[k];
        }
        for (std::size_t k = 0; k < docs; ++k) {
            p[k] /= sum;
        }
        p[std::size_t(i)] -= 1.0; // subtract the one-hot target

        double* qg = grads.query_grads.data() + std::size_t(i) * dim;
        const double* q = batch.query(i);
        for (int k = 0; k < n; ++k) {
            const double w = p[std::size_t(k)] * scale;
            const double* d = batch.positive(k);
            double* dg = grads.positive_grads.data() + std::size_t(k) * dim;
            for (int c = 0; c < dim; ++c) {
                qg[c] += w * d[c];
                dg[c] += w * q[c];
            }
        }
        for (int k = 0; k < n; ++k) {
            for (int j = 0; j < m; ++j) {
                const double w = p[std::size_t(n) + std::size_t(k) * m + j] * scale;
                const double* d = batch.negative(k, j);
                double* dg =
                    grads.hard_negative_grads.data() + (std::size_t(k) * m + j) * dim;
                for (int c = 0; c < dim; ++c) {
                    qg[c] += w * d[c];
                    dg[c] += w * q[c];
                }
            }
        }
    }
    return grads;
}

// ---- Toy encoder --------------------------------------------------------------

ToyEncoder make_random_encoder(int input_features, int embedding_dim,
                               std::uint64_t hash_seed, std::uint64_t init_seed) {
    if (input_features < 1 || embedding_dim < 8) {
        throw ConfigError("toy encoder: input_features >= 1 and embedding_dim >= 8");
    }
    ToyEncoder enc;
    enc.input_features = input_features;
    enc.embedding_dim = embedding_dim;
    enc.hash_seed = hash_seed;
    enc.weights.resize(std::size_t(input_features) * embedding_dim);
    std::mt19937 gen(static_cast<std::uint32_t>(init_seed ^ (init_seed >> 32)));
    const double scale = 1.0 / std::sqrt(static_cast<double>(input_features));
    for (auto& w : enc.weights) {
        w = rng::gaussian(gen) * scale;
    }
    return enc;
}

std::vector<double> toy_encode_f64(const ToyEncoder& encoder, const std::string& text) {
    auto features = hash_features(text, encoder.input_features, encoder.hash_seed);
    std::vector<double> v(std::size_t(encoder.embedding_dim), 0.0);
    for (int f = 0; f < encoder.input_features; ++f) {
        const double phi = features[std::size_t(f)];
        if (phi == 0.0) continue;
        const double* row = encoder.weights.data() + std::size_t(f) * encoder.embedding_dim;
        for (int d = 0; d < encoder.embedding_dim; ++d) {
            v[std::size_t(d)] += phi * row[d];
        }
    }
    double sq = 0.0;
    for (double x : v) {
        sq += x * x;
    }
    if (!(sq > 0.0) || !std::isfinite(sq)) {
        throw DegenerateVectorError("toy_encode: zero pre-normalization vector");
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (double& x : v) {
        x *= inv;
    }
    return v;
}

EmbeddingVector toy_encode(const ToyEncoder& encoder, const std::string& text) {
    auto v = toy_encode_f64(encoder, text);
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = static_cast<float>(v[i]);
    }
    return EmbeddingVector{std::move(out)};
}

namespace {

// d(loss)/d(pre-normalization vector) given e = v/|v| and d(loss)/d(e):
// (g - (e . g) e) / |v|
void backprop_normalize(const std::vector<double>& e, const double* grad_e,
                        double norm, std::vector<double>& grad_v) {
    const std::size_t dim = e.size();
    double dot = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        dot += e[i] * grad_e[i];
    }
    grad_v.resize(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        grad_v[i] = (grad_e[i] - dot * e[i]) / norm;
    }
}

struct EncodedText {
    std::vector<double> features; // input_features
    std::vector<double> embedding; // unit norm
    double prenorm = 0.0;
};

EncodedText encode_for_training(const ToyEncoder& enc, const std::string& text) {
    EncodedText out;
    out.features = hash_features(text, enc.input_features, enc.hash_seed);
    std::vector<double> v(std::size_t(enc.embedding_dim), 0.0);
    for (int f = 0; f < enc.input_features; ++f) {
        const double phi = out.features[std::size_t(f)];
        if (phi == 0.0) continue;
        const double* row = enc.weights.data() + std::size_t(f) * enc.embedding_dim;
        for (int d = 0; d < enc.embedding_dim; ++d) {
            v[std::size_t(d)] += phi * row[d];
        }
    }
    double sq = 0.0;
    for (double x : v) {
        sq += x * x;
    }
    if (!(sq > 0.0) || !std::isfinite(sq)) {
        throw DegenerateVectorError("toy encoder training: zero embedding");
    }
    out.prenorm = std::sqrt(sq);
    out.embedding.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out.embedding[i] = v[i] / out.prenorm;
    }
    return out;
}

// Accumulates d(loss)/d(weights) for one encoded text:
// dW[f, :] += phi_f * grad_v.
void accumulate_weight_grad(const EncodedText& enc_text, const double* grad_e,
                            const ToyEncoder& enc, std::vector<double>& grad_w) {
    std::vector<double> grad_v;
    backprop_normalize(enc_text.embedding, grad_e, enc_text.prenorm, grad_v);
    for (int f = 0; f < enc.input_features; ++f) {
        const double phi = enc_text.features[std::size_t(f)];
        if (phi == 0.0) continue;
        double* row = grad_w.data() + std::size_t(f) * enc.embedding_dim;
        for (int d = 0; d < enc.embedding_dim; ++d) {
            row[d] += phi * grad_v[std::size_t(d)];
        }
    }
}

} // namespace

TrainResult train_toy_encoder(const std::vector<TrainingTriple>& triples,
                              const ToyEncoder& initial, const TrainOptions& options) {
    if (triples.empty()) {
        throw InputError("train_toy_encoder: no triples");
    }
    for (const auto& t : triples) {
        if (t.negatives.empty()) {
            throw InputError("train_toy_encoder: triple without negatives (" + t.pr_id + ")");
        }
    }
    if (options.epochs < 1 || options.batch_size < 1) {
        throw ConfigError("train_toy_encoder: epochs and batch_size must be >= 1");
    }
    if (initial.embedding_dim < 8) {
        throw ConfigError("train_toy_encoder: embedding_dim must be >= 8");
    }

    TrainResult result;
    result.encoder = initial;
    ToyEncoder& enc = result.encoder;

    std::mt19937 gen(static_cast<std::uint32_t>(options.seed ^ (options.seed >> 32)));
    std::size_t step = 0;
    std::vector<double> grad_w(enc.weights.size());

    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        auto order = rng::permutation(triples.size(), gen);
        for (std::size_t start = 0; start < order.size();
             start += std::size_t(options.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + std::size_t(options.batch_size));
            const int n = static_cast<int>(stop - start);

            int m = static_cast<int>(triples[order[start]].negatives.size());
            for (std::size_t b = start + 1; b < stop; ++b) {
                m = std::min(m, static_cast<int>(triples[order[b]].negatives.size()));
            }

            ContrastiveBatch batch;
            batch.n = n;
            batch.m = m;
            batch.dim = enc.embedding_dim;
            batch.query_embs.reserve(std::size_t(n) * enc.embedding_dim);
            batch.positive_embs.reserve(std::size_t(n) * enc.embedding_dim);
            batch.hard_negative_embs.reserve(std::size_t(n) * m * enc.embedding_dim);

            std::vector<EncodedText> queries, positives, negatives;
            try {
                for (std::size_t b = start; b < stop; ++b) {
                    const auto& t = triples[order[b]];
                    queries.push_back(encode_for_training(enc, t.query_text));
                    positives.push_back(encode_for_training(enc, t.positive.source_text));
                    for (int j = 0; j < m; ++j) {
                        negatives.push_back(encode_for_training(
                            enc, t.negatives[std::size_t(j)].source_text));
                    }
                }
            } catch (const DegenerateVectorError& e) {
                if (step == 0) {
                    throw; // weights have not moved yet: this is an input problem
                }
                throw DivergenceError(std::string("training diverged at step ") +
                                          std::to_string(step) + ": " + e.what(),
                                      step);
            }
            for (const auto& e : queries) {
                batch.query_embs.insert(batch.query_embs.end(), e.embedding.begin(),
                                        e.embedding.end());
            }
            for (const auto& e : positives) {
                batch.positive_embs.insert(batch.positive_embs.end(), e.embedding.begin(),
                                           e.embedding.end());
            }
            for (const auto& e : negatives) {
                batch.hard_negative_embs.insert(batch.hard_negative_embs.end(),
                                                e.embedding.begin(), e.embedding.end());
            }

            const double loss = info_nce_loss(batch, options.temperature);
            if (!std::isfinite(loss)) {
                throw DivergenceError("training diverged at step " + std::to_string(step),
                                      step);
            }
            result.loss_curve.emplace_back(step, loss);

            auto grads = info_nce_grad(batch, options.temperature);
            std::fill(grad_w.begin(), grad_w.end(), 0.0);
            for (int i = 0; i < n; ++i) {
                accumulate_weight_grad(queries[std::size_t(i)],
                                       grads.query_grads.data() +
                                           std::size_t(i) * enc.embedding_dim,
                                       enc, grad_w);
                accumulate_weight_grad(positives[std::size_t(i)],
                                       grads.positive_grads.data() +
                                           std::size_t(i) * enc.embedding_dim,
                                       enc, grad_w);
                for (int j = 0; j < m; ++j) {
                    accumulate_weight_grad(
                        negatives[std::size_t(i) * m + j],
                        grads.hard_negative_grads.data() +
                            (std::size_t(i) * m + j) * enc.embedding_dim,
                        enc, grad_w);
                }
            }
            for (std::size_t w = 0; w < enc.weights.size(); ++w) {
                enc.weights[w] -= options.learning_rate * grad_w[w];
            }
            ++step;
        }
    }
    return result;
}

std::string loss_curve_to_csv(const std::vector<std::pair<std::size_t, double>>& curve) {
    std::ostringstream out;
    out << "step,loss\n";
    out.precision(17);
    for (const auto& [step, loss] : curve) {
        out << step << ',' << loss << '\n';
    }
    return out.str();
}

// ---- Persistence --------------------------------------------------------------

namespace {
constexpr char kEncoderMagic[8] = {'L', 'R', 'T', 'E', '0', '0', '0', '1'};
}

void ToyEncoder::save(const std::filesystem::path& path) const {
    static_assert(sizeof(double) == 8, "64-bit float storage assumed");
    std::string buf(kEncoderMagic, sizeof(kEncoderMagic));
    auto append_u64 = [&buf](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
        }
    };
    append_u64(static_cast<std::uint64_t>(input_features));
    append_u64(static_cast<std::uint64_t>(embedding_dim));
    append_u64(hash_seed);
    buf.append(reinterpret_cast<const char*>(weights.data()), weights.size() * sizeof(double));
    io::write_file(path, buf);
}

ToyEncoder ToyEncoder::load(const std::filesystem::path& path) {
    std::string buf = io::read_file(path);
    if (buf.size() < sizeof(kEncoderMagic) + 24 ||
        std::memcmp(buf.data(), kEncoderMagic, sizeof(kEncoderMagic)) != 0) {
        throw InputError("not a toy encoder file: " + path.string());
    }
    std::size_t pos = sizeof(kEncoderMagic);
    auto read_u64 = [&buf, &pos]() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf[pos + std::size_t(i)]))
                 << (8 * i);
        }
        pos += 8;
        return v;
    };
    ToyEncoder enc;
    enc.input_features = static_cast<int>(read_u64());
    enc.embedding_dim = static_cast<int>(read_u64());
    enc.hash_seed = read_u64();
    const std::size_t count = std::size_t(enc.input_features) * enc.embedding_dim;
    if (buf.size() != pos + count * sizeof(double)) {
        throw InputError("toy encoder file has the wrong size: " + path.string());
    }
    enc.weights.resize(count);
    std::memcpy(enc.weights.data(), buf.data() + pos, count * sizeof(double));
    return enc;
}

ToyEncoderProvider::ToyEncoderProvider(ToyEncoder encoder, std::string name)
    : encoder_(std::move(encoder)) {
    spec_.provider_name = std::move(name);
    spec_.dimension = encoder_.embedding_dim;
    spec_.max_input_tokens = 8192;
}

std::vector<EmbeddingVector> ToyEncoderProvider::embed_batch(
    const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        out.push_back(toy_encode(encoder_, t));
    }
    return out;
}

} // namespace locrank
