#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace divkit {

/// Row-major n x d matrix of embedding rows (one row per token, word or use).
class EmbeddingMatrix {
public:
    EmbeddingMatrix() = default;
    /// Throws InvalidArgument on a shape mismatch or non-finite entry and
    /// ZeroNormRow when any row has zero norm.
    EmbeddingMatrix(std::size_t rows, std::size_t dims, std::vector<double> data,
                    std::string key = {});
    static EmbeddingMatrix from_rows(const std::vector<std::vector<double>>& rows,
                                     std::string key = {});

    std::size_t rows() const noexcept { return rows_; }
    std::size_t dims() const noexcept { return dims_; }
    const std::string& key() const noexcept { return key_; }
    std::span<const double> row(std::size_t i) const {
        return {data_.data() + i * dims_, dims_};
    }
    std::span<const double> data() const noexcept { return data_; }

private:
    std::size_t rows_ = 0;
    std::size_t dims_ = 0;
    std::vector<double> data_;
    std::string key_;
};

/// 1 - dot(u, v) / (|u| |v|). Zero-norm inputs raise ZeroNormRow.
double cosine_distance(std::span<const double> u, std::span<const double> v);

/// Divergent semantic integration: mean cosine distance over all unordered row pairs.
double dsi(const EmbeddingMatrix& m);

/// Mean cosine distance from the object vector to each use row.
double aut_distance(std::span<const double> object_vec, const EmbeddingMatrix& uses);

/// Distinct count / total count. With `normalize`, values are trimmed and lowercased first.
double unique_ratio(std::span<const std::string> values, bool normalize);

/// Binary embedding store.
///
/// Layout (all integers little-endian):
///   magic "DKEMBED\0" (8 bytes)
///   u32 schema_version (1)
///   u32 dims
///   u64 count                   number of entries
///   entries, repeated `count` times:
///     u32 key_len, key bytes (UTF-8, no terminator)
///     u32 n                     row count
///     n * dims float32          row-major
///
/// Opening a store scans the entry headers only; matrices are read on demand.
class EmbeddingStore {
public:
    explicit EmbeddingStore(const std::filesystem::path& path);

    std::size_t dims() const noexcept { return dims_; }
    std::size_t size() const noexcept { return index_.size(); }
    bool contains(std::string_view key) const;
    /// Throws MissingEmbedding for an unknown key.
    EmbeddingMatrix load(std::string_view key) const;
    std::vector<std::string> keys() const;

private:
    struct Entry {
        std::uint64_t offset;  // of the first float
        std::uint32_t rows;
    };
    std::filesystem::path path_;
    std::size_t dims_ = 0;
    std::map<std::string, Entry, std::less<>> index_;
};

/// Writes entries in the given order. All matrices must share `dims`.
void write_embedding_store(const std::filesystem::path& path, std::size_t dims,
                           std::span<const EmbeddingMatrix> matrices);

}  // namespace divkit
