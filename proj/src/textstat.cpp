#include "divkit/textstat.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include <zlib.h>

namespace divkit {

namespace {

// Token ids in first-occurrence order; ids are dense in [0, types).
struct Interned {
    std::vector<std::uint32_t> ids;
    std::size_t types = 0;
};

Interned intern(const TokenizedText& t) {
    Interned out;
    std::unordered_map<std::string_view, std::uint32_t> index;
    index.reserve(t.tokens.size());
    out.ids.reserve(t.tokens.size());
    for (const auto& tok : t.tokens) {
        auto [it, inserted] = index.try_emplace(tok, static_cast<std::uint32_t>(index.size()));
        out.ids.push_back(it->second);
    }
    out.types = index.size();
    return out;
}

void require_tokens(const TokenizedText& t) {
    if (t.word_count() == 0) fail(ErrorCode::EmptyText, "text has no tokens");
}

// One MTLD pass; returns N / factors with the degenerate rule applied.
double mtld_pass(std::span<const std::uint32_t> ids, std::size_t types, double threshold) {
    std::vector<std::uint32_t> stamp(types, 0);
    std::uint32_t epoch = 1;
    std::size_t distinct = 0;
    std::size_t count = 0;
    double full = 0.0;
    double last_ttr = 1.0;
    for (auto id : ids) {
        if (stamp[id] != epoch) {
            stamp[id] = epoch;
            ++distinct;
        }
        ++count;
        last_ttr = static_cast<double>(distinct) / static_cast<double>(count);
        if (last_ttr < threshold) {
            full += 1.0;
            ++epoch;
            distinct = 0;
            count = 0;
            last_ttr = 1.0;
        }
    }
    const double partial = count > 0 ? (1.0 - last_ttr) / (1.0 - threshold) : 0.0;
    const double factors = full + partial;
    const auto n = static_cast<double>(ids.size());
    if (factors == 0.0) return n;
    return n / factors;
}

// Mean length of the factors started at each position; falls back to the
// plain single-direction pass when no start completes a factor.
double mtld_ma_pass(std::span<const std::uint32_t> ids, std::size_t types, double threshold) {
    std::vector<std::uint32_t> stamp(types, 0);
    std::uint32_t epoch = 0;
    double total = 0.0;
    std::size_t completed = 0;
    for (std::size_t start = 0; start < ids.size(); ++start) {
        ++epoch;
        std::size_t distinct = 0;
        for (std::size_t j = start; j < ids.size(); ++j) {
            if (stamp[ids[j]] != epoch) {
                stamp[ids[j]] = epoch;
                ++distinct;
            }
            const std::size_t len = j - start + 1;
            if (static_cast<double>(distinct) / static_cast<double>(len) < threshold) {
                total += static_cast<double>(len);
                ++completed;
                break;
            }
        }
    }
    if (completed == 0) return mtld_pass(ids, types, threshold);
    return total / static_cast<double>(completed);
}

}  // namespace

double ttr(const TokenizedText& t) {
    require_tokens(t);
    const auto in = intern(t);
    return static_cast<double>(in.types) / static_cast<double>(in.ids.size());
}

double mattr(const TokenizedText& t, std::size_t window) {
    if (window == 0) fail(ErrorCode::InvalidArgument, "mattr window must be >= 1");
    require_tokens(t);
    const auto in = intern(t);
    const std::size_t n = in.ids.size();
    if (n <= window) return static_cast<double>(in.types) / static_cast<double>(n);

    std::vector<std::uint32_t> counts(in.types, 0);
    std::size_t distinct = 0;
    for (std::size_t i = 0; i < window; ++i) {
        if (counts[in.ids[i]]++ == 0) ++distinct;
    }
    // Sum of distinct counts is an exact integer; divide once at the end.
    std::uint64_t distinct_sum = distinct;
    for (std::size_t i = window; i < n; ++i) {
        if (--counts[in.ids[i - window]] == 0) --distinct;
        if (counts[in.ids[i]]++ == 0) ++distinct;
        distinct_sum += distinct;
    }
    const std::size_t windows = n - window + 1;
    return static_cast<double>(distinct_sum) /
           (static_cast<double>(windows) * static_cast<double>(window));
}

double maas(const TokenizedText& t) {
    require_tokens(t);
    if (t.word_count() < 2) fail(ErrorCode::SingleToken, "maas needs at least 2 tokens");
    const auto in = intern(t);
    const double log_n = std::log10(static_cast<double>(in.ids.size()));
    const double log_v = std::log10(static_cast<double>(in.types));
    return (log_n - log_v) / (log_n * log_n);
}

double hdd(const TokenizedText& t, std::size_t sample_size) {
    if (sample_size == 0) fail(ErrorCode::InvalidArgument, "hdd sample size must be >= 1");
    const std::size_t n = t.word_count();
    if (n < sample_size) {
        fail(ErrorCode::TextTooShort, "hdd needs at least " + std::to_string(sample_size) +
                                          " tokens, text has " + std::to_string(n));
    }
    const auto in = intern(t);
    std::vector<std::size_t> freq(in.types, 0);
    for (auto id : in.ids) ++freq[id];

    // P(type absent from sample) = C(N-f, s) / C(N, s) = prod_{i<s} (N-f-i)/(N-i).
    std::unordered_map<std::size_t, double> absent_by_freq;
    double sum = 0.0;
    for (auto f : freq) {
        auto [it, inserted] = absent_by_freq.try_emplace(f, 0.0);
        if (inserted) {
            double absent = 0.0;
            if (n - f >= sample_size) {
                absent = 1.0;
                for (std::size_t i = 0; i < sample_size; ++i) {
                    absent *= static_cast<double>(n - f - i) / static_cast<double>(n - i);
                }
            }
            it->second = absent;
        }
        sum += 1.0 - it->second;
    }
    return sum / static_cast<double>(sample_size);
}

double mtld(const TokenizedText& t, double threshold, MtldMode mode) {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        fail(ErrorCode::InvalidArgument, "mtld threshold must lie in (0, 1)");
    }
    require_tokens(t);
    const auto in = intern(t);
    std::vector<std::uint32_t> reversed(in.ids.rbegin(), in.ids.rend());
    switch (mode) {
        case MtldMode::Plain:
            return 0.5 * (mtld_pass(in.ids, in.types, threshold) +
                          mtld_pass(reversed, in.types, threshold));
        case MtldMode::MovingAverage:
            return mtld_ma_pass(in.ids, in.types, threshold);
        case MtldMode::MovingAverageBi:
            return 0.5 * (mtld_ma_pass(in.ids, in.types, threshold) +
                          mtld_ma_pass(reversed, in.types, threshold));
    }
    fail(ErrorCode::Internal, "unhandled mtld mode");
}

double entropy(std::span<const double> logprobs) {
    if (logprobs.empty()) fail(ErrorCode::EmptyList, "entropy of an empty logprob list");
    double sum = 0.0;
    for (double lp : logprobs) {
        if (!std::isfinite(lp)) fail(ErrorCode::InvalidArgument, "non-finite logprob");
        if (lp > 0.0) fail(ErrorCode::PositiveLogprob, "logprob " + std::to_string(lp) + " > 0");
        sum -= lp;
    }
    return sum / static_cast<double>(logprobs.size());
}

double ngram_diversity(const TokenizedText& t, std::size_t max_n) {
    if (max_n == 0) fail(ErrorCode::InvalidArgument, "ngram max_n must be >= 1");
    const std::size_t n = t.word_count();
    if (n < max_n) {
        fail(ErrorCode::TextTooShort, std::to_string(max_n) + "-gram diversity needs at least " +
                                          std::to_string(max_n) + " tokens, text has " +
                                          std::to_string(n));
    }
    const auto in = intern(t);
    double total = 0.0;
    for (std::size_t order = 1; order <= max_n; ++order) {
        std::unordered_set<std::string> seen;
        const std::size_t grams = n - order + 1;
        seen.reserve(grams);
        for (std::size_t i = 0; i < grams; ++i) {
            seen.emplace(reinterpret_cast<const char*>(in.ids.data() + i),
                         order * sizeof(std::uint32_t));
        }
        total += static_cast<double>(seen.size()) / static_cast<double>(grams);
    }
    return total;
}

double compression_ratio(std::string_view text) {
    if (text.empty()) fail(ErrorCode::EmptyText, "compression ratio of empty text");
    z_stream zs{};
    if (deflateInit2(&zs, kDeflateLevel, Z_DEFLATED, -15, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
        fail(ErrorCode::Internal, "deflateInit2 failed");
    }
    std::vector<unsigned char> out(deflateBound(&zs, static_cast<uLong>(text.size())));
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(text.data()));
    zs.avail_in = static_cast<uInt>(text.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = deflate(&zs, Z_FINISH);
    const auto compressed = zs.total_out;
    deflateEnd(&zs);
    if (rc != Z_STREAM_END) fail(ErrorCode::Internal, "deflate did not finish");
    return static_cast<double>(text.size()) / static_cast<double>(compressed);
}

const std::vector<std::string>& lexical_metric_names() {
    static const std::vector<std::string> names = {
        "ttr",  "mattr",      "maas",    "hdd",       "mtld",
        "mtld_ma", "mtld_ma_bi", "entropy", "ngram_div", "comp_ratio"};
    return names;
}

bool is_lexical_metric(std::string_view name) {
    const auto& names = lexical_metric_names();
    return std::find(names.begin(), names.end(), name) != names.end();
}

MetricVector score_response(const ResponseRecord& r, const MetricConfig& config) {
    MetricVector out;
    const auto tokens = tokenize(r.text);
    for (const auto& name : config.metrics) {
        try {
            double v = 0.0;
            if (name == "ttr") {
                v = ttr(tokens);
            } else if (name == "mattr") {
                v = mattr(tokens, config.mattr_window);
            } else if (name == "maas") {
                v = maas(tokens);
            } else if (name == "hdd") {
                v = hdd(tokens, config.hdd_sample);
            } else if (name == "mtld") {
                v = mtld(tokens, config.mtld_threshold, MtldMode::Plain);
            } else if (name == "mtld_ma") {
                v = mtld(tokens, config.mtld_threshold, MtldMode::MovingAverage);
            } else if (name == "mtld_ma_bi") {
                v = mtld(tokens, config.mtld_threshold, MtldMode::MovingAverageBi);
            } else if (name == "entropy") {
                if (!r.token_logprobs) {
                    fail(ErrorCode::MissingLogprobs, "token_logprobs absent");
                }
                v = entropy(*r.token_logprobs);
            } else if (name == "ngram_div") {
                v = ngram_diversity(tokens, config.ngram_max);
            } else if (name == "comp_ratio") {
                v = compression_ratio(r.text);
            } else {
                fail(ErrorCode::UnknownMetric, "'" + name + "' is not a lexical metric");
            }
            out.set(name, v);
        } catch (const Error& e) {
            throw Error(e.code(), "metric '" + name + "': " + e.detail());
        }
    }
    return out;
}

}  // namespace divkit
