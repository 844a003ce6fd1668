#pragma once

#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "divkit/ingest.hpp"
#include "divkit/tokenize.hpp"

namespace divkit {

// Lexical diversity and quality-proxy metrics. All functions are pure.
// Lower MAAS means a richer vocabulary; the filtering code treats higher MAAS
// as the lightweight quality signal because it tracks reward scores.

inline constexpr std::size_t kDefaultMattrWindow = 50;
inline constexpr std::size_t kDefaultHddSample = 42;
inline constexpr double kDefaultMtldThreshold = 0.72;
inline constexpr std::size_t kDefaultNgramMax = 4;
inline constexpr int kDeflateLevel = 6;

double ttr(const TokenizedText& t);

/// Mean TTR over every contiguous window; falls back to ttr() when the text
/// is shorter than the window.
double mattr(const TokenizedText& t, std::size_t window = kDefaultMattrWindow);

/// (log10 N - log10 V) / (log10 N)^2.
double maas(const TokenizedText& t);

/// Expected fraction of the sample made up of distinct types under
/// without-replacement sampling of `sample_size` tokens.
double hdd(const TokenizedText& t, std::size_t sample_size = kDefaultHddSample);

enum class MtldMode { Plain, MovingAverage, MovingAverageBi };

/// Plain: mean of forward and backward factor MTLD. MovingAverage: a factor is
/// started at every token and completed factor lengths are averaged.
/// MovingAverageBi: MovingAverage averaged over forward and reversed order.
/// If no factor completes and the final TTR is 1, the result is N.
double mtld(const TokenizedText& t, double threshold = kDefaultMtldThreshold,
            MtldMode mode = MtldMode::Plain);

/// Mean negative log-likelihood per token, in nats.
double entropy(std::span<const double> logprobs);

/// Sum over n = 1..max_n of distinct n-grams / total n-grams.
double ngram_diversity(const TokenizedText& t, std::size_t max_n = kDefaultNgramMax);

/// UTF-8 byte length over raw DEFLATE (level 6, no zlib header) length.
double compression_ratio(std::string_view text);

/// Which metrics to compute and with what parameters.
struct MetricConfig {
    std::set<std::string, std::less<>> metrics;
    std::size_t mattr_window = kDefaultMattrWindow;
    std::size_t hdd_sample = kDefaultHddSample;
    double mtld_threshold = kDefaultMtldThreshold;
    std::size_t ngram_max = kDefaultNgramMax;
};

/// Metric names computed from the response text and logprobs.
const std::vector<std::string>& lexical_metric_names();
bool is_lexical_metric(std::string_view name);

/// Computes every selected lexical metric on tokenize(r.text). Errors carry
/// the metric name in their message; MissingLogprobs is raised when entropy
/// is selected and the record has no logprobs.
MetricVector score_response(const ResponseRecord& r, const MetricConfig& config);

}  // namespace divkit
