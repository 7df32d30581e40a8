#include "locrank/retrieval.hpp"

#include "locrank/errors.hpp"
#include "locrank/io.hpp"
#include "locrank/kernels/vec_kernels.hpp"
#include "locrank/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstring>
#include <numeric>
#include <sstream>

namespace locrank {

VectorIndex VectorIndex::build(const std::vector<CodeUnit>& units,
                               EmbeddingProvider& provider, std::string repo_id,
                               std::string commit_ref) {
    const auto& spec = provider.spec();
    const std::size_t batch_size =
        spec.max_batch_size > 0 ? static_cast<std::size_t>(spec.max_batch_size) : 64;

    std::vector<std::string> ids;
    ids.reserve(units.size());
    for (const auto& u : units) {
        ids.push_back(u.unit_id);
    }

    std::vector<EmbeddingVector> vectors;
    vectors.reserve(units.size());
    for (std::size_t start = 0; start < units.size(); start += batch_size) {
        const std::size_t stop = std::min(units.size(), start + batch_size);
        std::vector<std::string> batch;
        batch.reserve(stop - start);
        for (std::size_t i = start; i < stop; ++i) {
            batch.push_back(text::truncate_ws_tokens(
                spec.document_prefix + units[i].source_text,
                static_cast<std::size_t>(spec.max_input_tokens)));
        }
        std::vector<EmbeddingVector> embedded;
        try {
            embedded = provider.embed_batch(batch);
        } catch (const ProviderError& e) {
            std::vector<std::string> failed(ids.begin() + static_cast<std::ptrdiff_t>(start),
                                            ids.begin() + static_cast<std::ptrdiff_t>(stop));
            throw ProviderError(std::string("index build failed: ") + e.what(),
                                e.retriable(), std::move(failed));
        }
        if (embedded.size() != batch.size()) {
            throw ProviderError("provider returned wrong batch size", false,
                                {ids.begin() + static_cast<std::ptrdiff_t>(start),
                                 ids.begin() + static_cast<std::ptrdiff_t>(stop)});
        }
        for (auto& v : embedded) {
            vectors.push_back(normalize(std::move(v.values)));
        }
    }
    return from_entries(std::move(ids), std::move(vectors), spec, std::move(repo_id),
                        std::move(commit_ref));
}

VectorIndex VectorIndex::from_entries(std::vector<std::string> unit_ids,
                                      std::vector<EmbeddingVector> vectors,
                                      EmbeddingProviderSpec spec, std::string repo_id,
                                      std::string commit_ref) {
    if (unit_ids.size() != vectors.size()) {
        throw ConfigError("index entries: ids and vectors differ in length");
    }
    VectorIndex index;
    index.spec_ = std::move(spec);
    index.repo_id_ = std::move(repo_id);
    index.commit_ref_ = std::move(commit_ref);
    index.unit_ids_ = std::move(unit_ids);
    index.data_.resize(index.unit_ids_.size() * static_cast<std::size_t>(index.spec_.dimension));
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        if (vectors[i].dimension() != index.spec_.dimension) {
            throw ConfigError("index entry dimension mismatch at " + index.unit_ids_[i]);
        }
        std::copy(vectors[i].values.begin(), vectors[i].values.end(),
                  index.data_.begin() + static_cast<std::ptrdiff_t>(
                                            i * static_cast<std::size_t>(index.spec_.dimension)));
    }
    return index;
}

float VectorIndex::score_at(const EmbeddingVector& query, std::size_t i) const {
    if (query.dimension() != spec_.dimension) {
        throw ConfigError("query dimension " + std::to_string(query.dimension()) +
                          " does not match index dimension " +
                          std::to_string(spec_.dimension));
    }
    return kernels::dot_f32(query.values.data(), vector_at(i),
                            static_cast<std::size_t>(spec_.dimension));
}

RankedList retrieve(const VectorIndex& index, const EmbeddingVector& query_vec, int top_k,
                    std::string query_id) {
    if (top_k < 1) {
        throw ConfigError("retrieve: top_k must be >= 1");
    }
    if (query_vec.dimension() != index.dimension()) {
        throw ConfigError("retrieve: query dimension " +
                          std::to_string(query_vec.dimension()) +
                          " does not match index dimension " +
                          std::to_string(index.dimension()));
    }

    const std::size_t n = index.size();
    std::vector<float> scores(n);
    if (n > 0) {
        kernels::dot_batch_f32(query_vec.values.data(), index.vector_at(0), n,
                               static_cast<std::size_t>(index.dimension()), scores.data());
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const std::size_t k = std::min(n, static_cast<std::size_t>(top_k));
    auto better = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return index.unit_id_at(a) < index.unit_id_at(b);
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k),
                      order.end(), better);

    RankedList out;
    out.query_id = std::move(query_id);
    out.entries.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        out.entries.push_back({index.unit_id_at(order[i]), scores[order[i]]});
    }
    return out;
}

namespace {
constexpr char kIndexMagic[8] = {'L', 'R', 'I', 'X', '0', '0', '0', '1'};

void append_u32(std::string& buf, std::uint32_t v) {
    char bytes[4];
    bytes[0] = static_cast<char>(v & 0xFF);
    bytes[1] = static_cast<char>((v >> 8) & 0xFF);
    bytes[2] = static_cast<char>((v >> 16) & 0xFF);
    bytes[3] = static_cast<char>((v >> 24) & 0xFF);
    buf.append(bytes, 4);
}

std::uint32_t read_u32(const std::string& buf, std::size_t& pos) {
    if (pos + 4 > buf.size()) {
        throw InputError("index file truncated");
    }
    std::uint32_t v = static_cast<std::uint8_t>(buf[pos]) |
                      (static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[pos + 1])) << 8) |
                      (static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[pos + 2])) << 16) |
                      (static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[pos + 3])) << 24);
    pos += 4;
    return v;
}
} // namespace

void VectorIndex::save(const std::filesystem::path& path) const {
    static_assert(sizeof(float) == 4, "float32 storage assumed");
    nlohmann::ordered_json header;
    header["spec"] = {{"provider_name", spec_.provider_name},
                      {"dimension", spec_.dimension},
                      {"query_prefix", spec_.query_prefix},
                      {"document_prefix", spec_.document_prefix},
                      {"max_input_tokens", spec_.max_input_tokens},
                      {"max_batch_size", spec_.max_batch_size}};
    header["repo_id"] = repo_id_;
    header["commit_ref"] = commit_ref_;
    header["count"] = unit_ids_.size();

    std::string buf(kIndexMagic, sizeof(kIndexMagic));
    std::string header_str = header.dump();
    append_u32(buf, static_cast<std::uint32_t>(header_str.size()));
    buf += header_str;
    // Vectors as raw little-endian float32. Serialization targets
    // little-endian hosts, which this code assumes throughout.
    buf.append(reinterpret_cast<const char*>(data_.data()), data_.size() * sizeof(float));
    for (const auto& id : unit_ids_) {
        append_u32(buf, static_cast<std::uint32_t>(id.size()));
        buf += id;
    }
    io::write_file(path, buf);
}

VectorIndex VectorIndex::load(const std::filesystem::path& path) {
    std::string buf = io::read_file(path);
    if (buf.size() < sizeof(kIndexMagic) ||
        std::memcmp(buf.data(), kIndexMagic, sizeof(kIndexMagic)) != 0) {
        throw InputError("not an index file: " + path.string());
    }
    std::size_t pos = sizeof(kIndexMagic);
    std::uint32_t header_len = read_u32(buf, pos);
    if (pos + header_len > buf.size()) {
        throw InputError("index file truncated: " + path.string());
    }
    nlohmann::json header = nlohmann::json::parse(buf.substr(pos, header_len));
    pos += header_len;

    VectorIndex index;
    index.spec_.provider_name = header["spec"]["provider_name"].get<std::string>();
    index.spec_.dimension = header["spec"]["dimension"].get<int>();
    index.spec_.query_prefix = header["spec"]["query_prefix"].get<std::string>();
    index.spec_.document_prefix = header["spec"]["document_prefix"].get<std::string>();
    index.spec_.max_input_tokens = header["spec"]["max_input_tokens"].get<int>();
    index.spec_.max_batch_size = header["spec"]["max_batch_size"].get<int>();
    index.repo_id_ = header["repo_id"].get<std::string>();
    index.commit_ref_ = header["commit_ref"].get<std::string>();
    const std::size_t count = header["count"].get<std::size_t>();

    const std::size_t vec_bytes =
        count * static_cast<std::size_t>(index.spec_.dimension) * sizeof(float);
    if (pos + vec_bytes > buf.size()) {
        throw InputError("index file truncated: " + path.string());
    }
    index.data_.resize(count * static_cast<std::size_t>(index.spec_.dimension));
    std::memcpy(index.data_.data(), buf.data() + pos, vec_bytes);
    pos += vec_bytes;

    index.unit_ids_.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t len = read_u32(buf, pos);
        if (pos + len > buf.size()) {
            throw InputError("index file truncated: " + path.string());
        }
        index.unit_ids_.push_back(buf.substr(pos, len));
        pos += len;
    }
    return index;
}

std::string ranked_lists_to_jsonl(const std::vector<RankedList>& lists) {
    std::ostringstream out;
    for (const auto& list : lists) {
        nlohmann::ordered_json j;
        j["query_id"] = list.query_id;
        auto ranking = nlohmann::ordered_json::array();
        for (const auto& e : list.entries) {
            ranking.push_back({{"unit_id", e.unit_id}, {"score", e.score}});
        }
        j["ranking"] = std::move(ranking);
        out << j.dump() << '\n';
    }
    return out.str();
}

std::vector<RankedList> ranked_lists_from_jsonl(const std::string& jsonl) {
    std::vector<RankedList> lists;
    std::istringstream in(jsonl);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        if (j.contains("header")) continue;
        RankedList list;
        list.query_id = j.at("query_id").get<std::string>();
        for (const auto& e : j.at("ranking")) {
            list.entries.push_back(
                {e.at("unit_id").get<std::string>(), e.at("score").get<double>()});
        }
        lists.push_back(std::move(list));
    }
    return lists;
}

} // namespace locrank
