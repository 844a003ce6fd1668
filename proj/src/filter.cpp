#include "divkit/filter.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <unordered_map>

#include "divkit/decile.hpp"
#include "divkit/parallel.hpp"
#include "divkit/tokenize.hpp"

namespace divkit {

FilterConfig FilterConfig::for_method(Method m) {
    FilterConfig cfg;
    cfg.method = m;
    if (m == Method::DnsLite) {
        cfg.diversity_metric = "ttr";
        cfg.quality_metric = "maas";
    }
    return cfg;
}

void FilterConfig::validate() const {
    if (max_len_delta < 0) fail(ErrorCode::InvalidArgument, "max_len_delta must be >= 0");
    if (!(divpo_lower_pct > 0.0 && divpo_lower_pct < divpo_upper_pct && divpo_upper_pct < 100.0)) {
        fail(ErrorCode::InvalidArgument, "need 0 < divpo_lower_pct < divpo_upper_pct < 100");
    }
    if (diversity_metric.empty() || quality_metric.empty()) {
        fail(ErrorCode::InvalidArgument, "diversity and quality metrics must be named");
    }
}

std::optional<double> score_of(const ResponseRecord& r, std::string_view metric) {
    if (metric == "quality_score") return r.quality_score;
    return r.metrics.get(metric);
}

namespace {

std::string field_path(std::string_view side, std::string_view metric) {
    if (metric == "quality_score") return std::string(side) + ".quality_score";
    return std::string(side) + ".metrics." + std::string(metric);
}

[[noreturn]] void missing(std::string_view owner, std::string_view side, std::string_view metric) {
    fail(ErrorCode::MissingScore,
         "'" + std::string(owner) + "' lacks " + field_path(side, metric));
}

double require_score(const ResponseRecord& r, std::string_view owner, std::string_view side,
                     std::string_view metric) {
    auto v = score_of(r, metric);
    if (!v) missing(owner, side, metric);
    return *v;
}

// Per-record scores for the DNS rules.
struct DnsRow {
    bool complete = false;
    std::string missing_field;
    double q1 = 0, q2 = 0, d1 = 0, d2 = 0;
    long wc1 = 0, wc2 = 0;
};

std::string resolve_gain_metric(const FilterConfig& cfg,
                                std::span<const GenerationRecord> corpus,
                                std::span<const std::size_t> kept) {
    if (!cfg.gain_metric.empty()) return cfg.gain_metric;
    if (cfg.method != Method::DnsLite) return cfg.diversity_metric;
    if (kept.empty()) return cfg.diversity_metric;
    for (auto i : kept) {
        if (!corpus[i].first.metrics.get("entropy") || !corpus[i].second.metrics.get("entropy")) {
            return cfg.diversity_metric;
        }
    }
    return "entropy";
}

}  // namespace

std::vector<PreferencePair> dns_filter(std::span<const GenerationRecord> corpus,
                                       const FilterConfig& cfg, FilterStats* stats,
                                       unsigned workers) {
    cfg.validate();
    if (cfg.method == Method::DivPo) {
        fail(ErrorCode::InvalidArgument, "dns_filter called with method DIVPO");
    }
    FilterStats st;
    st.input = corpus.size();

    std::vector<DnsRow> rows(corpus.size());
    parallel_for(corpus.size(), workers, [&](std::size_t i) {
        const auto& g = corpus[i];
        DnsRow row;
        const struct {
            const ResponseRecord* r;
            const char* side;
            const std::string* metric;
            double* out;
        } needed[] = {{&g.first, "first", &cfg.quality_metric, &row.q1},
                      {&g.second, "second", &cfg.quality_metric, &row.q2},
                      {&g.first, "first", &cfg.diversity_metric, &row.d1},
                      {&g.second, "second", &cfg.diversity_metric, &row.d2}};
        for (const auto& n : needed) {
            auto v = score_of(*n.r, *n.metric);
            if (!v) {
                row.missing_field = field_path(n.side, *n.metric);
                rows[i] = std::move(row);
                return;
            }
            *n.out = *v;
        }
        row.wc1 = static_cast<long>(word_count(g.first.text));
        row.wc2 = static_cast<long>(word_count(g.second.text));
        row.complete = true;
        rows[i] = std::move(row);
    });

    std::vector<std::size_t> eligible;
    eligible.reserve(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (rows[i].complete) {
            eligible.push_back(i);
        } else if (cfg.skip_missing) {
            ++st.skipped_missing;
        } else {
            fail(ErrorCode::MissingScore,
                 "record '" + corpus[i].id + "' lacks " + rows[i].missing_field);
        }
    }

    std::vector<std::size_t> kept;
    if (!eligible.empty()) {
        std::vector<double> first_quality;
        first_quality.reserve(eligible.size());
        for (auto i : eligible) first_quality.push_back(rows[i].q1);
        st.quality_floor = percentile(std::move(first_quality), 50.0);

        for (auto i : eligible) {
            const auto& r = rows[i];
            if (!(r.q2 >= st.quality_floor)) {
                ++st.dropped_by_rule[0];
            } else if (!(r.q2 > r.q1)) {
                ++st.dropped_by_rule[1];
            } else if (!(r.d2 > r.d1)) {
                ++st.dropped_by_rule[2];
            } else if (std::labs(r.wc1 - r.wc2) > cfg.max_len_delta) {
                ++st.dropped_by_rule[3];
            } else {
                kept.push_back(i);
            }
        }
    }

    st.gain_metric = resolve_gain_metric(cfg, corpus, kept);
    std::vector<PreferencePair> out;
    out.reserve(kept.size());
    for (auto i : kept) {
        const auto& g = corpus[i];
        PreferencePair p;
        p.id = g.id;
        p.prompt_id = g.prompt_id;
        p.prompt_text = g.prompt_text;
        p.chosen = g.second;
        p.rejected = g.first;
        p.method = cfg.method;
        p.quality_gain = rows[i].q2 - rows[i].q1;
        p.diversity_gain = require_score(g.second, g.id, "second", st.gain_metric) -
                           require_score(g.first, g.id, "first", st.gain_metric);
        if (!(p.diversity_gain > 0.0)) {
            ++st.dropped_nonpositive_gain;
            continue;
        }
        out.push_back(std::move(p));
    }
    st.kept = out.size();
    if (stats) *stats = std::move(st);
    return out;
}

std::optional<PreferencePair> divpo_filter(std::string_view prompt_id,
                                           std::string_view prompt_text,
                                           std::span<const ResponseRecord> pool,
                                           const FilterConfig& cfg) {
    cfg.validate();
    if (pool.empty()) return std::nullopt;
    const std::string& gain_metric =
        cfg.gain_metric.empty() ? cfg.diversity_metric : cfg.gain_metric;

    std::vector<double> quality(pool.size());
    std::vector<double> diversity(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const auto owner = std::string(prompt_id) + "#" + std::to_string(i);
        quality[i] = require_score(pool[i], owner, "response", cfg.quality_metric);
        diversity[i] = require_score(pool[i], owner, "response", cfg.diversity_metric);
    }
    const double upper = percentile(quality, cfg.divpo_upper_pct);
    const double lower = percentile(quality, cfg.divpo_lower_pct);

    std::optional<std::size_t> chosen;
    std::optional<std::size_t> rejected;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (quality[i] >= upper && (!chosen || diversity[i] > diversity[*chosen])) chosen = i;
        if (quality[i] <= lower && (!rejected || diversity[i] < diversity[*rejected])) rejected = i;
    }
    if (!chosen || !rejected || *chosen == *rejected) return std::nullopt;

    const auto& c = pool[*chosen];
    const auto& r = pool[*rejected];
    PreferencePair p;
    p.id = std::string(prompt_id);
    p.prompt_id = std::string(prompt_id);
    p.prompt_text = std::string(prompt_text);
    p.chosen = c;
    p.rejected = r;
    p.method = Method::DivPo;
    p.quality_gain = quality[*chosen] - quality[*rejected];
    p.diversity_gain = require_score(c, p.id, "chosen", gain_metric) -
                       require_score(r, p.id, "rejected", gain_metric);
    return p;
}

std::vector<PreferencePair> divpo_corpus(std::span<const GenerationRecord> corpus,
                                         const FilterConfig& cfg, FilterStats* stats,
                                         unsigned workers) {
    cfg.validate();
    FilterStats st;
    st.input = corpus.size();
    st.gain_metric = cfg.gain_metric.empty() ? cfg.diversity_metric : cfg.gain_metric;

    struct Pool {
        std::string prompt_id;
        std::string prompt_text;
        std::vector<ResponseRecord> responses;
    };
    std::vector<Pool> pools;
    std::unordered_map<std::string, std::size_t> index;
    auto usable = [&](const ResponseRecord& r) {
        return score_of(r, cfg.quality_metric) && score_of(r, cfg.diversity_metric) &&
               score_of(r, st.gain_metric);
    };
    for (const auto& g : corpus) {
        auto [it, inserted] = index.try_emplace(g.prompt_id, pools.size());
        if (inserted) pools.push_back({g.prompt_id, g.prompt_text, {}});
        auto& pool = pools[it->second];
        auto take = [&](const ResponseRecord& r) {
            if (cfg.skip_missing && !usable(r)) {
                ++st.skipped_missing;
                return;
            }
            pool.responses.push_back(r);
        };
        if (cfg.divpo_pool != DivpoPool::Second) take(g.first);
        if (cfg.divpo_pool != DivpoPool::First) take(g.second);
    }

    std::vector<std::optional<PreferencePair>> results(pools.size());
    parallel_for(pools.size(), workers, [&](std::size_t i) {
        results[i] = divpo_filter(pools[i].prompt_id, pools[i].prompt_text, pools[i].responses, cfg);
    });

    std::vector<PreferencePair> out;
    for (auto& r : results) {
        if (r) {
            out.push_back(std::move(*r));
        } else {
            ++st.degenerate_pools;
        }
    }
    st.pools = pools.size();
    st.kept = out.size();
    if (stats) *stats = std::move(st);
    return out;
}

std::vector<PreferencePair> run_filter(std::span<const GenerationRecord> corpus,
                                       const FilterConfig& cfg, FilterStats* stats,
                                       unsigned workers) {
    if (cfg.method == Method::DivPo) return divpo_corpus(corpus, cfg, stats, workers);
    return dns_filter(corpus, cfg, stats, workers);
}

std::vector<PreferencePair> select_top_k(std::span<const PreferencePair> pairs,
                                         const FilterConfig& cfg) {
    std::vector<PreferencePair> out(pairs.begin(), pairs.end());
    std::stable_sort(out.begin(), out.end(), [](const PreferencePair& a, const PreferencePair& b) {
        if (a.diversity_gain != b.diversity_gain) return a.diversity_gain > b.diversity_gain;
        return a.id < b.id;
    });
    if (out.size() > cfg.top_k) out.resize(cfg.top_k);
    return out;
}

LengthDelta length_delta_report(std::span<const PreferencePair> pairs) {
    if (pairs.empty()) fail(ErrorCode::EmptyInput, "no pairs");
    std::vector<double> deltas;
    deltas.reserve(pairs.size());
    for (const auto& p : pairs) {
        deltas.push_back(static_cast<double>(word_count(p.chosen.text)) -
                         static_cast<double>(word_count(p.rejected.text)));
    }
    const auto n = static_cast<double>(deltas.size());
    double mean = 0.0;
    for (double d : deltas) mean += d;
    mean /= n;
    double ss = 0.0;
    for (double d : deltas) ss += (d - mean) * (d - mean);
    return {mean, std::sqrt(ss / n)};
}

}  // namespace divkit
