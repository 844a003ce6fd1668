#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "divkit/ingest.hpp"

namespace divkit {

/// Which responses of a prompt's records form a DivPO pool.
enum class DivpoPool { First, Second, Both };

struct FilterConfig {
    Method method = Method::Dns;
    std::string diversity_metric = "entropy";
    std::string quality_metric = "quality_score";
    int max_len_delta = 5;
    std::size_t top_k = 3000;
    double divpo_upper_pct = 75.0;
    double divpo_lower_pct = 25.0;
    /// Metric whose chosen-minus-rejected difference ranks pairs for top-k.
    /// Empty selects the method default (see resolve_gain_metric).
    std::string gain_metric;
    /// Drop records lacking a required score before the rule-1 percentile is
    /// computed, instead of failing with MissingScore.
    bool skip_missing = false;
    DivpoPool divpo_pool = DivpoPool::Both;

    /// DNS: (entropy, quality_score). DNS_LITE: (ttr, maas). DIVPO: (entropy, quality_score).
    static FilterConfig for_method(Method m);
    /// Throws InvalidArgument when the invariants on deltas and percentiles fail.
    void validate() const;
};

/// Looks a score up by name: `quality_score` reads the record field, every
/// other name reads the record's metric vector.
std::optional<double> score_of(const ResponseRecord& r, std::string_view metric);

struct FilterStats {
    std::size_t input = 0;
    std::size_t skipped_missing = 0;
    /// DNS rules in application order: quality floor, quality gain,
    /// diversity gain, length parity.
    std::array<std::size_t, 4> dropped_by_rule{};
    std::size_t dropped_nonpositive_gain = 0;
    std::size_t kept = 0;
    double quality_floor = 0.0;  // 50th percentile of first-response quality
    std::string gain_metric;
    // DivPO only
    std::size_t pools = 0;
    std::size_t degenerate_pools = 0;
};

/// Diverse-NS / Diverse-NS-Lite pair construction: rejected = first response,
/// chosen = second response, kept only when every rule passes.
std::vector<PreferencePair> dns_filter(std::span<const GenerationRecord> corpus,
                                       const FilterConfig& cfg, FilterStats* stats = nullptr,
                                       unsigned workers = 1);

/// DivPO on one prompt's pool: most diverse of the top-quality pool versus
/// least diverse of the bottom-quality pool. Empty when either pool is empty
/// or both picks are the same response.
std::optional<PreferencePair> divpo_filter(std::string_view prompt_id,
                                           std::string_view prompt_text,
                                           std::span<const ResponseRecord> pool,
                                           const FilterConfig& cfg);

/// Groups the corpus by prompt_id (first-appearance order) and runs
/// divpo_filter on each pool.
std::vector<PreferencePair> divpo_corpus(std::span<const GenerationRecord> corpus,
                                         const FilterConfig& cfg, FilterStats* stats = nullptr,
                                         unsigned workers = 1);

/// Runs the configured method end to end, without the top-k cut.
std::vector<PreferencePair> run_filter(std::span<const GenerationRecord> corpus,
                                       const FilterConfig& cfg, FilterStats* stats = nullptr,
                                       unsigned workers = 1);

/// Descending diversity_gain, ties by ascending pair id; first min(top_k, n).
std::vector<PreferencePair> select_top_k(std::span<const PreferencePair> pairs,
                                         const FilterConfig& cfg);

struct LengthDelta {
    double mean = 0.0;
    double std = 0.0;  // population
};

/// Moments of word_count(chosen) - word_count(rejected).
LengthDelta length_delta_report(std::span<const PreferencePair> pairs);

}  // namespace divkit
