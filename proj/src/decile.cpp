#include "divkit/decile.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>

#include "divkit/error.hpp"
#include "divkit/jsonl.hpp"

namespace divkit {

double percentile_sorted(std::span<const double> sorted, double pct) {
    if (sorted.empty()) fail(ErrorCode::EmptyInput, "percentile of an empty sample");
    if (!(pct >= 0.0 && pct <= 100.0)) fail(ErrorCode::InvalidArgument, "percentile out of range");
    // (n-1)*pct is exact for integral pct, so h is exact whenever it is integral.
    const double h = static_cast<double>(sorted.size() - 1) * pct / 100.0;
    const double lo_f = std::floor(h);
    const auto lo = static_cast<std::size_t>(lo_f);
    const double frac = h - lo_f;
    if (frac == 0.0 || lo + 1 >= sorted.size()) return sorted[lo];
    return std::min(sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]), sorted[lo + 1]);
}

double percentile(std::vector<double> values, double pct) {
    std::sort(values.begin(), values.end());
    return percentile_sorted(values, pct);
}

std::size_t DecileMap::nearest_key(std::size_t word_count) const {
    if (buckets.empty()) fail(ErrorCode::EmptyInput, "decile map has no buckets");
    auto hi = buckets.lower_bound(word_count);
    if (hi != buckets.end() && hi->first == word_count) return word_count;
    if (hi == buckets.begin()) return hi->first;
    auto lo = std::prev(hi);
    if (hi == buckets.end()) return lo->first;
    return (word_count - lo->first) <= (hi->first - word_count) ? lo->first : hi->first;
}

const DecileBucket& DecileMap::bucket_for(std::size_t word_count) const {
    return buckets.at(nearest_key(word_count));
}

void DecileAccumulator::add(std::size_t word_count, double value) {
    if (!std::isfinite(value)) fail(ErrorCode::InvalidArgument, "non-finite metric value");
    values_[word_count].push_back(value);
    ++total_;
}

void DecileAccumulator::merge(const DecileAccumulator& other) {
    for (const auto& [wc, vs] : other.values_) {
        auto& dst = values_[wc];
        dst.insert(dst.end(), vs.begin(), vs.end());
    }
    total_ += other.total_;
}

DecileMap DecileAccumulator::finish(std::string metric, std::size_t min_bucket,
                                    std::string built_from) const {
    if (total_ == 0) fail(ErrorCode::EmptyInput, "no scores to build a decile map from");
    if (min_bucket == 0) min_bucket = 1;

    std::map<std::size_t, std::vector<double>> merged;
    for (const auto& [wc, vs] : values_) {
        if (vs.size() >= min_bucket) merged[wc] = vs;
    }
    if (merged.empty()) {
        if (total_ < min_bucket) {
            fail(ErrorCode::InsufficientSamples,
                 std::to_string(total_) + " samples, min_bucket is " + std::to_string(min_bucket));
        }
        auto largest = values_.begin();
        for (auto it = values_.begin(); it != values_.end(); ++it) {
            if (it->second.size() > largest->second.size()) largest = it;
        }
        auto& dst = merged[largest->first];
        for (const auto& [wc, vs] : values_) dst.insert(dst.end(), vs.begin(), vs.end());
    } else {
        DecileMap keys_only;
        for (const auto& [wc, _] : merged) keys_only.buckets[wc];
        for (const auto& [wc, vs] : values_) {
            if (vs.size() >= min_bucket) continue;
            auto& dst = merged[keys_only.nearest_key(wc)];
            dst.insert(dst.end(), vs.begin(), vs.end());
        }
    }

    DecileMap map;
    map.metric = std::move(metric);
    map.built_from = std::move(built_from);
    map.min_bucket = min_bucket;
    for (auto& [wc, vs] : merged) {
        std::sort(vs.begin(), vs.end());
        DecileBucket b;
        b.sample_count = vs.size();
        for (int k = 1; k <= 9; ++k) {
            b.thresholds[static_cast<std::size_t>(k - 1)] = percentile_sorted(vs, 10.0 * k);
        }
        map.buckets.emplace(wc, b);
    }
    return map;
}

DecileMap build_map(std::span<const ScorePoint> scores, std::string metric,
                    std::size_t min_bucket, std::string built_from) {
    DecileAccumulator acc;
    for (const auto& s : scores) acc.add(s.word_count, s.value);
    return acc.finish(std::move(metric), min_bucket, std::move(built_from));
}

int dd(const DecileMap& map, std::size_t word_count, double value) {
    const auto& b = map.bucket_for(word_count);
    int k = 0;
    for (double t : b.thresholds) {
        if (value > t) ++k;
    }
    return k;
}

double mean_dd(const DecileMap& map, std::span<const ScorePoint> points) {
    if (points.empty()) fail(ErrorCode::EmptyInput, "no responses to score");
    long total = 0;
    for (const auto& p : points) total += dd(map, p.word_count, p.value);
    return static_cast<double>(total) / static_cast<double>(points.size());
}

double delta_dd(const DecileMap& map, std::span<const ScorePoint> base,
                std::span<const ScorePoint> tuned) {
    if (base.empty() || tuned.empty()) fail(ErrorCode::EmptyInput, "delta_dd needs both samples");
    return mean_dd(map, tuned) - mean_dd(map, base);
}

void write_map(const DecileMap& map, const std::filesystem::path& path) {
    nlohmann::ordered_json h;
    h["metric"] = map.metric;
    h["percentile_method"] = std::string(kPercentileMethod);
    h["min_bucket"] = map.min_bucket;
    h["built_from"] = map.built_from;
    h["bucket_count"] = map.buckets.size();
    JsonlWriter w(path, "decile_map", h);
    for (const auto& [wc, b] : map.buckets) {
        nlohmann::ordered_json j;
        j["word_count"] = wc;
        j["sample_count"] = b.sample_count;
        j["thresholds"] = b.thresholds;
        w.write(j);
    }
    w.close();
}

DecileMap read_map(const std::filesystem::path& path) {
    JsonlReader r(path, "decile_map");
    const auto& h = r.header();
    DecileMap map;
    try {
        map.metric = h.at("metric").get<std::string>();
        if (h.at("percentile_method").get<std::string>() != kPercentileMethod) {
            fail(ErrorCode::SchemaViolation, path.string() + ": unsupported percentile method");
        }
        map.min_bucket = h.at("min_bucket").get<std::size_t>();
        map.built_from = h.at("built_from").get<std::string>();
        std::string line;
        while (r.next_line(line)) {
            const auto j = nlohmann::json::parse(line);
            DecileBucket b;
            b.sample_count = j.at("sample_count").get<std::size_t>();
            b.thresholds = j.at("thresholds").get<std::array<double, 9>>();
            if (!std::is_sorted(b.thresholds.begin(), b.thresholds.end())) {
                fail(ErrorCode::SchemaViolation, path.string() + ":" +
                                                     std::to_string(r.line_number()) +
                                                     ": thresholds not ascending");
            }
            map.buckets.emplace(j.at("word_count").get<std::size_t>(), b);
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::SchemaViolation, path.string() + ":" + std::to_string(r.line_number()) +
                                             ": " + e.what());
    }
    if (map.buckets.empty()) fail(ErrorCode::EmptyInput, path.string() + ": map has no buckets");
    return map;
}

}  // namespace divkit
