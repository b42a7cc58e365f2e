#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <openssl/evp.h>

#include <nlohmann/json.hpp>

#include "flowdisco/common.hpp"

namespace flowdisco {

using Vector = std::vector<double>;

// N vectors of one dimension, row-major and index-aligned with the
// utterance list they embed.
class EmbeddingMatrix {
public:
    EmbeddingMatrix() = default;
    EmbeddingMatrix(std::size_t rows, std::size_t dim)
        : rows_(rows), dim_(dim), data_(rows * dim, 0.0) {}

    static EmbeddingMatrix from_rows(const std::vector<Vector>& rows) {
        if (rows.empty()) return {};
        EmbeddingMatrix m(rows.size(), rows[0].size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != m.dim_)
                throw Error("embedding: row " + std::to_string(i) + " has dim " +
                            std::to_string(rows[i].size()) + ", expected " + std::to_string(m.dim_));
            std::copy(rows[i].begin(), rows[i].end(), m.data_.begin() + i * m.dim_);
        }
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t dim() const { return dim_; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

    Vector row_copy(std::size_t i) const {
        auto r = row(i);
        return Vector(r.begin(), r.end());
    }

private:
    std::size_t rows_ = 0;
    std::size_t dim_ = 0;
    std::vector<double> data_;
};

inline double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline double cosine_similarity(const Vector& a, const Vector& b) {
    if (a.size() != b.size())
        throw Error("embedding: cosine dimension mismatch (" + std::to_string(a.size()) +
                    " vs " + std::to_string(b.size()) + ")");
    const double na = l2_norm(a), nb = l2_norm(b);
    if (na == 0.0 && nb == 0.0) throw Error("embedding: cosine of two zero vectors is undefined");
    if (na == 0.0 || nb == 0.0) return 0.0;
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return std::clamp(dot / (na * nb), -1.0, 1.0);
}

inline std::string sha256_hex(const std::string& text) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("embedding: SHA-256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out(2 * len, '0');
    for (unsigned int i = 0; i < len; ++i) {
        out[2 * i] = hex[digest[i] >> 4];
        out[2 * i + 1] = hex[digest[i] & 0xF];
    }
    return out;
}

namespace detail {

// Fixed hash seeds; changing them changes every hashed embedding.
constexpr std::uint64_t kBucketSeed = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kSignSeed = 0xC2B2AE3D27D4EB4FULL;

inline std::uint64_t fnv1a64(const std::string& s, std::uint64_t seed) {
    std::uint64_t h = 14695981039346656037ULL ^ seed;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace detail

// Feature-hashed term counts with +/-1 sign hashing, L2-normalized.
// Pure function of (text, dim); text with no tokens maps to the zero vector.
inline Vector hash_embed(const std::string& text, std::size_t dim) {
    if (dim < 8) throw Error("embedding: hash_embed dim must be >= 8");
    Vector v(dim, 0.0);
    for (const auto& token : tokenize_lower(text)) {
        const std::size_t bucket = detail::fnv1a64(token, detail::kBucketSeed) % dim;
        const double sign = (detail::fnv1a64(token, detail::kSignSeed) & 1) ? 1.0 : -1.0;
        v[bucket] += sign;
    }
    const double norm = l2_norm(v);
    if (norm > 0.0)
        for (double& x : v) x /= norm;
    return v;
}

// Deterministic map from texts to vectors. Implementations must be safe for
// concurrent read-only use after construction.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::string kind() const = 0;
    virtual std::size_t dim() const = 0;
    // One row per text, in input order, unnormalized.
    virtual EmbeddingMatrix embed(const std::vector<std::string>& texts) const = 0;
};

class HashingProvider final : public EmbeddingProvider {
public:
    explicit HashingProvider(std::size_t dim = 384) : dim_(dim) {
        if (dim_ < 8) throw Error("embedding: hashing provider dim must be >= 8");
    }
    std::string kind() const override { return "hashing"; }
    std::size_t dim() const override { return dim_; }
    EmbeddingMatrix embed(const std::vector<std::string>& texts) const override {
        EmbeddingMatrix m(texts.size(), dim_);
        for (std::size_t i = 0; i < texts.size(); ++i) {
            const Vector v = hash_embed(texts[i], dim_);
            std::copy(v.begin(), v.end(), m.row(i).begin());
        }
        return m;
    }

private:
    std::size_t dim_;
};

// Exact stored vectors keyed by SHA-256 of the utterance text, so lookups do
// not depend on corpus order.
class PrecomputedProvider final : public EmbeddingProvider {
public:
    PrecomputedProvider(std::size_t dim, std::unordered_map<std::string, Vector> store)
        : dim_(dim), store_(std::move(store)) {}

    std::string kind() const override { return "precomputed"; }
    std::size_t dim() const override { return dim_; }
    std::size_t size() const { return store_.size(); }

    EmbeddingMatrix embed(const std::vector<std::string>& texts) const override {
        EmbeddingMatrix m(texts.size(), dim_);
        for (std::size_t i = 0; i < texts.size(); ++i) {
            auto it = store_.find(sha256_hex(texts[i]));
            if (it == store_.end())
                throw Error("embedding: no precomputed vector for text: \"" + texts[i] + "\"");
            std::copy(it->second.begin(), it->second.end(), m.row(i).begin());
        }
        return m;
    }

private:
    std::size_t dim_;
    std::unordered_map<std::string, Vector> store_;
};

// Store file: JSONL with a {"dim", "count"} header line followed by one
// {"key": <hex sha256>, "vector": [...]} record per line.
inline PrecomputedProvider load_precomputed(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("embedding: cannot open precomputed store: " + path.string());
    std::string line;
    if (!std::getline(in, line))
        throw Error("embedding: precomputed store is empty: " + path.string());

    std::size_t dim = 0, count = 0;
    try {
        nlohmann::json header = nlohmann::json::parse(line);
        dim = header.at("dim").get<std::size_t>();
        count = header.at("count").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw Error("embedding: corrupt store header in " + path.string() + ": " + e.what());
    }
    if (dim == 0) throw Error("embedding: precomputed store declares dim 0");

    std::unordered_map<std::string, Vector> store;
    store.reserve(count);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            nlohmann::json j = nlohmann::json::parse(line);
            auto key = j.at("key").get<std::string>();
            auto vec = j.at("vector").get<Vector>();
            if (vec.size() != dim)
                throw Error("embedding: store line " + std::to_string(line_no) + " has dim " +
                            std::to_string(vec.size()) + ", header declares " + std::to_string(dim));
            store[std::move(key)] = std::move(vec);
        } catch (const nlohmann::json::exception& e) {
            throw Error("embedding: corrupt store line " + std::to_string(line_no) + " in " +
                        path.string() + ": " + e.what());
        }
    }
    if (store.size() != count)
        throw Error("embedding: store header declares " + std::to_string(count) +
                    " records, found " + std::to_string(store.size()));
    return PrecomputedProvider(dim, std::move(store));
}

inline void save_precomputed_store(const std::filesystem::path& path,
                                   const std::vector<std::string>& texts,
                                   const EmbeddingMatrix& matrix) {
    if (texts.size() != matrix.rows())
        throw Error("embedding: store text/row count mismatch");
    // Deduplicate by key; identical texts carry identical vectors.
    std::unordered_map<std::string, std::size_t> keys;
    std::ostringstream out;
    std::vector<std::pair<std::string, std::size_t>> records;
    for (std::size_t i = 0; i < texts.size(); ++i)
        if (auto [it, inserted] = keys.emplace(sha256_hex(texts[i]), i); inserted)
            records.emplace_back(it->first, i);
    out << nlohmann::json{{"dim", matrix.dim()}, {"count", records.size()}}.dump() << "\n";
    for (const auto& [key, i] : records) {
        nlohmann::json j{{"key", key}, {"vector", matrix.row_copy(i)}};
        out << j.dump() << "\n";
    }
    write_text_file(path, out.str());
}

// Runs the provider and enforces the output contract: one finite row per
// text, constant dimension, rows rescaled to unit L2 norm (zero rows exempt).
inline EmbeddingMatrix embed_batch(const std::vector<std::string>& texts,
                                   const EmbeddingProvider& provider) {
    if (texts.empty()) throw Error("embedding: embed_batch requires at least one text");
    EmbeddingMatrix m = provider.embed(texts);
    if (m.rows() != texts.size())
        throw Error("embedding: provider '" + provider.kind() + "' returned " +
                    std::to_string(m.rows()) + " rows for " + std::to_string(texts.size()) +
                    " texts; first text: \"" + texts[0] + "\"");
    if (m.dim() != provider.dim())
        throw Error("embedding: provider '" + provider.kind() + "' returned dim " +
                    std::to_string(m.dim()) + ", declared " + std::to_string(provider.dim()));
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto row = m.row(i);
        for (double x : row)
            if (!std::isfinite(x))
                throw Error("embedding: non-finite value in embedding of text: \"" + texts[i] + "\"");
        const double norm = l2_norm(row);
        if (norm > 0.0)
            for (double& x : row) x /= norm;
    }
    return m;
}

} // namespace flowdisco
