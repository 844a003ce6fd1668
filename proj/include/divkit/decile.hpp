#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace divkit {

/// Percentile of sorted data by linear interpolation between closest ranks
/// (inclusive): position h = (n - 1) * pct / 100.
double percentile_sorted(std::span<const double> sorted, double pct);
double percentile(std::vector<double> values, double pct);

inline constexpr std::string_view kPercentileMethod = "linear_inclusive";
inline constexpr std::size_t kDefaultMinBucket = 20;

struct DecileBucket {
    std::array<double, 9> thresholds{};  // 10th..90th percentiles, non-decreasing
    std::size_t sample_count = 0;

    bool operator==(const DecileBucket&) const = default;
};

struct DecileMap {
    std::string metric;
    std::map<std::size_t, DecileBucket> buckets;  // keyed by word count
    std::string built_from;                       // corpus fingerprint
    std::size_t min_bucket = kDefaultMinBucket;

    /// Bucket at `word_count`, else the nearest key (ties to the smaller).
    const DecileBucket& bucket_for(std::size_t word_count) const;
    std::size_t nearest_key(std::size_t word_count) const;

    bool operator==(const DecileMap&) const = default;
};

struct ScorePoint {
    std::size_t word_count = 0;
    double value = 0.0;
};

/// Partial aggregation for build_map. merge() is associative and
/// commutative; finish() sorts each bucket so insertion order never matters.
class DecileAccumulator {
public:
    void add(std::size_t word_count, double value);
    void merge(const DecileAccumulator& other);
    std::size_t size() const noexcept { return total_; }

    /// Sparse buckets (fewer than min_bucket samples) are folded into the
    /// nearest populated word count, ties to the smaller. When no bucket is
    /// populated, everything folds into the largest bucket; InsufficientSamples
    /// if even the total is below min_bucket.
    DecileMap finish(std::string metric, std::size_t min_bucket,
                     std::string built_from = {}) const;

private:
    std::map<std::size_t, std::vector<double>> values_;
    std::size_t total_ = 0;
};

DecileMap build_map(std::span<const ScorePoint> scores, std::string metric,
                    std::size_t min_bucket = kDefaultMinBucket, std::string built_from = {});

/// Number of the bucket's thresholds strictly exceeded by `value` (0..9).
int dd(const DecileMap& map, std::size_t word_count, double value);

/// mean DD(tuned) - mean DD(base).
double delta_dd(const DecileMap& map, std::span<const ScorePoint> base,
                std::span<const ScorePoint> tuned);

double mean_dd(const DecileMap& map, std::span<const ScorePoint> points);

void write_map(const DecileMap& map, const std::filesystem::path& path);
DecileMap read_map(const std::filesystem::path& path);

}  // namespace divkit
