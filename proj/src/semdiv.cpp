#include "divkit/semdiv.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <unordered_set>

#include "divkit/error.hpp"
#include "divkit/jsonl.hpp"

namespace divkit {

static_assert(std::endian::native == std::endian::little,
              "embedding store I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'D', 'K', 'E', 'M', 'B', 'E', 'D', '\0'};

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm_checked(std::span<const double> v) {
    const double n = std::sqrt(dot(v, v));
    if (!(n > 0.0)) fail(ErrorCode::ZeroNormRow, "zero-norm embedding row");
    return n;
}

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) fail(ErrorCode::SchemaViolation, path.string() + ": truncated embedding store");
    return v;
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t dims, std::vector<double> data,
                                 std::string key)
    : rows_(rows), dims_(dims), data_(std::move(data)), key_(std::move(key)) {
    if (rows_ == 0 || dims_ == 0) fail(ErrorCode::InvalidArgument, "empty embedding matrix");
    if (data_.size() != rows_ * dims_) {
        fail(ErrorCode::InvalidArgument, "embedding data size does not match rows x dims");
    }
    for (double v : data_) {
        if (!std::isfinite(v)) fail(ErrorCode::InvalidArgument, "non-finite embedding entry");
    }
    for (std::size_t i = 0; i < rows_; ++i) {
        if (dot(row(i), row(i)) == 0.0) {
            fail(ErrorCode::ZeroNormRow,
                 "row " + std::to_string(i) + (key_.empty() ? "" : " of '" + key_ + "'"));
        }
    }
}

EmbeddingMatrix EmbeddingMatrix::from_rows(const std::vector<std::vector<double>>& rows,
                                           std::string key) {
    if (rows.empty()) fail(ErrorCode::InvalidArgument, "empty embedding matrix");
    const std::size_t d = rows.front().size();
    std::vector<double> data;
    data.reserve(rows.size() * d);
    for (const auto& r : rows) {
        if (r.size() != d) fail(ErrorCode::DimMismatch, "ragged embedding rows");
        data.insert(data.end(), r.begin(), r.end());
    }
    return EmbeddingMatrix(rows.size(), d, std::move(data), std::move(key));
}

double cosine_distance(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) {
        fail(ErrorCode::DimMismatch,
             std::to_string(u.size()) + " vs " + std::to_string(v.size()) + " dims");
    }
    return 1.0 - dot(u, v) / (norm_checked(u) * norm_checked(v));
}

double dsi(const EmbeddingMatrix& m) {
    const std::size_t n = m.rows();
    if (n < 2) fail(ErrorCode::TooFewRows, "dsi needs at least 2 rows");
    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) norms[i] = norm_checked(m.row(i));
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            total += 1.0 - dot(m.row(i), m.row(j)) / (norms[i] * norms[j]);
        }
    }
    const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
    return total / pairs;
}

double aut_distance(std::span<const double> object_vec, const EmbeddingMatrix& uses) {
    if (uses.rows() == 0) fail(ErrorCode::TooFewRows, "no uses");
    if (object_vec.size() != uses.dims()) {
        fail(ErrorCode::DimMismatch, "object has " + std::to_string(object_vec.size()) +
                                         " dims, uses have " + std::to_string(uses.dims()));
    }
    const double obj_norm = norm_checked(object_vec);
    double total = 0.0;
    for (std::size_t i = 0; i < uses.rows(); ++i) {
        total += 1.0 - dot(object_vec, uses.row(i)) / (obj_norm * norm_checked(uses.row(i)));
    }
    return total / static_cast<double>(uses.rows());
}

double unique_ratio(std::span<const std::string> values, bool normalize) {
    if (values.empty()) fail(ErrorCode::EmptyList, "unique_ratio of an empty list");
    std::unordered_set<std::string> seen;
    for (const auto& v : values) {
        if (!normalize) {
            seen.insert(v);
            continue;
        }
        const auto lo = v.find_first_not_of(" \t\r\n\f\v");
        const auto hi = v.find_last_not_of(" \t\r\n\f\v");
        std::string s = lo == std::string::npos ? std::string() : v.substr(lo, hi - lo + 1);
        std::transform(s.begin(), s.end(), s.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        seen.insert(std::move(s));
    }
    return static_cast<double>(seen.size()) / static_cast<double>(values.size());
}

EmbeddingStore::EmbeddingStore(const std::filesystem::path& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::MissingFile, path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) {
        fail(ErrorCode::SchemaViolation, path.string() + ": not an embedding store");
    }
    const auto version = get<std::uint32_t>(in, path);
    if (version != static_cast<std::uint32_t>(kSchemaVersion)) {
        fail(ErrorCode::UnsupportedVersion,
             path.string() + ": embedding store version " + std::to_string(version));
    }
    dims_ = get<std::uint32_t>(in, path);
    if (dims_ == 0) fail(ErrorCode::SchemaViolation, path.string() + ": dims is 0");
    const auto count = get<std::uint64_t>(in, path);
    const auto file_size = static_cast<std::uint64_t>(std::filesystem::file_size(path));
    for (std::uint64_t e = 0; e < count; ++e) {
        const auto key_len = get<std::uint32_t>(in, path);
        std::string key(key_len, '\0');
        in.read(key.data(), key_len);
        const auto rows = get<std::uint32_t>(in, path);
        const auto offset = static_cast<std::uint64_t>(in.tellg());
        const auto bytes = static_cast<std::uint64_t>(rows) * dims_ * sizeof(float);
        if (!in || offset + bytes > file_size) {
            fail(ErrorCode::SchemaViolation, path.string() + ": truncated entry '" + key + "'");
        }
        in.seekg(static_cast<std::streamoff>(bytes), std::ios::cur);
        if (!in) fail(ErrorCode::SchemaViolation, path.string() + ": truncated entry '" + key + "'");
        if (!index_.emplace(std::move(key), Entry{offset, rows}).second) {
            fail(ErrorCode::DuplicateId, path.string() + ": duplicate embedding key");
        }
    }
}

bool EmbeddingStore::contains(std::string_view key) const { return index_.find(key) != index_.end(); }

EmbeddingMatrix EmbeddingStore::load(std::string_view key) const {
    auto it = index_.find(key);
    if (it == index_.end()) {
        fail(ErrorCode::MissingEmbedding, "no embedding for key '" + std::string(key) + "'");
    }
    std::ifstream in(path_, std::ios::binary);
    if (!in) fail(ErrorCode::MissingFile, path_.string());
    in.seekg(static_cast<std::streamoff>(it->second.offset));
    std::vector<float> raw(static_cast<std::size_t>(it->second.rows) * dims_);
    in.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(float)));
    if (!in) fail(ErrorCode::IoFailure, path_.string() + ": short read");
    std::vector<double> data(raw.begin(), raw.end());
    return EmbeddingMatrix(it->second.rows, dims_, std::move(data), std::string(key));
}

std::vector<std::string> EmbeddingStore::keys() const {
    std::vector<std::string> out;
    out.reserve(index_.size());
    for (const auto& [k, _] : index_) out.push_back(k);
    return out;
}

void write_embedding_store(const std::filesystem::path& path, std::size_t dims,
                           std::span<const EmbeddingMatrix> matrices) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoFailure, "cannot open for writing: " + path.string());
    out.write(kMagic, 8);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(kSchemaVersion));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(dims));
    put<std::uint64_t>(out, matrices.size());
    for (const auto& m : matrices) {
        if (m.dims() != dims) fail(ErrorCode::DimMismatch, "entry '" + m.key() + "' dims");
        put<std::uint32_t>(out, static_cast<std::uint32_t>(m.key().size()));
        out.write(m.key().data(), static_cast<std::streamsize>(m.key().size()));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
        for (double v : m.data()) put<float>(out, static_cast<float>(v));
    }
    out.close();
    if (!out) fail(ErrorCode::IoFailure, "write failed: " + path.string());
}

}  // namespace divkit
