#include "divkit/analyze.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "divkit/filter.hpp"
#include "divkit/jsonl.hpp"
#include "divkit/tokenize.hpp"

namespace divkit {

namespace {

constexpr int kMaxIterations = 100000;
constexpr double kEps = 1e-16;
constexpr double kTiny = 1e-300;

// Continued fraction for I_x(a, b), modified Lentz.
double beta_continued_fraction(double a, double b, double x) {
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIterations; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) return h;
    }
    fail(ErrorCode::Internal, "incomplete beta continued fraction did not converge");
}

// I_x(a, b) with y = 1 - x supplied separately to avoid cancellation.
double ibeta(double a, double b, double x, double y) {
    if (x <= 0.0) return 0.0;
    if (y <= 0.0) return 1.0;
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                             a * std::log(x) + b * std::log(y);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_continued_fraction(a, b, x) / a;
    }
    return 1.0 - front * beta_continued_fraction(b, a, y) / b;
}

double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Unbiased sample variance, two-pass.
double variance_of(std::span<const double> v, double mean) {
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(v.size() - 1);
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0 && b > 0.0)) fail(ErrorCode::InvalidArgument, "incomplete beta needs a, b > 0");
    if (!(x >= 0.0 && x <= 1.0)) fail(ErrorCode::InvalidArgument, "incomplete beta needs x in [0,1]");
    return ibeta(a, b, x, 1.0 - x);
}

double student_t_two_sided_p(double t, double df) {
    if (!(df > 0.0)) fail(ErrorCode::InvalidArgument, "degrees of freedom must be > 0");
    if (std::isnan(t)) fail(ErrorCode::InvalidArgument, "t statistic is NaN");
    if (std::isinf(t)) return 0.0;
    const double t2 = t * t;
    const double x = df / (df + t2);
    const double y = t2 / (df + t2);
    return std::clamp(ibeta(0.5 * df, 0.5, x, y), 0.0, 1.0);
}

PearsonResult pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        fail(ErrorCode::LengthMismatch,
             std::to_string(x.size()) + " vs " + std::to_string(y.size()) + " values");
    }
    const std::size_t n = x.size();
    if (n < 3) fail(ErrorCode::TooFewSamples, "pearson needs at least 3 pairs");
    const double mx = mean_of(x);
    const double my = mean_of(y);
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) fail(ErrorCode::ZeroVariance, "constant input to pearson");
    PearsonResult res;
    res.n = n;
    res.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    const double df = static_cast<double>(n - 2);
    if (std::fabs(res.r) == 1.0) {
        res.p = 0.0;
    } else {
        const double t = res.r * std::sqrt(df / ((1.0 - res.r) * (1.0 + res.r)));
        res.p = student_t_two_sided_p(t, df);
    }
    return res;
}

TTestReport ttest_ind(std::span<const double> a, std::span<const double> b, bool equal_variance) {
    if (a.size() < 2 || b.size() < 2) {
        fail(ErrorCode::TooFewSamples, "t-test needs at least 2 values per sample");
    }
    TTestReport rep;
    rep.n_a = a.size();
    rep.n_b = b.size();
    rep.equal_variance = equal_variance;
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double ma = mean_of(a);
    const double mb = mean_of(b);
    const double va = variance_of(a, ma);
    const double vb = variance_of(b, mb);

    double se2 = 0.0;
    if (equal_variance) {
        rep.df = na + nb - 2.0;
        const double pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / rep.df;
        se2 = pooled * (1.0 / na + 1.0 / nb);
    } else {
        const double qa = va / na;
        const double qb = vb / nb;
        se2 = qa + qb;
        const double denom = qa * qa / (na - 1.0) + qb * qb / (nb - 1.0);
        rep.df = denom > 0.0 ? se2 * se2 / denom : na + nb - 2.0;
    }
    const double diff = ma - mb;
    if (se2 == 0.0) {
        if (diff == 0.0) {
            rep.t_statistic = 0.0;
            rep.p_value = 1.0;
        } else {
            rep.t_statistic = std::copysign(std::numeric_limits<double>::infinity(), diff);
            rep.p_value = 0.0;
        }
        return rep;
    }
    rep.t_statistic = diff / std::sqrt(se2);
    rep.p_value = student_t_two_sided_p(rep.t_statistic, rep.df);
    return rep;
}

TokenSet token_set(std::string_view text) {
    auto t = tokenize(text);
    return TokenSet(std::make_move_iterator(t.tokens.begin()),
                    std::make_move_iterator(t.tokens.end()));
}

double jaccard(const TokenSet& a, const TokenSet& b) {
    if (a.empty() && b.empty()) fail(ErrorCode::BothEmpty, "jaccard of two empty sets");
    std::size_t inter = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) {
            ++ia;
        } else if (*ib < *ia) {
            ++ib;
        } else {
            ++inter;
            ++ia;
            ++ib;
        }
    }
    const std::size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<SimilarPair> least_similar_pairs(std::span<const std::string> a,
                                             std::span<const std::string> b, std::size_t k) {
    if (a.empty() || b.empty()) fail(ErrorCode::EmptyList, "both response lists must be non-empty");
    std::vector<TokenSet> sa;
    std::vector<TokenSet> sb;
    for (const auto& s : a) sa.push_back(token_set(s));
    for (const auto& s : b) sb.push_back(token_set(s));
    std::vector<SimilarPair> all;
    all.reserve(a.size() * b.size());
    for (std::size_t i = 0; i < sa.size(); ++i) {
        for (std::size_t j = 0; j < sb.size(); ++j) {
            all.push_back({i, j, jaccard(sa[i], sb[j])});
        }
    }
    std::sort(all.begin(), all.end(), [](const SimilarPair& x, const SimilarPair& y) {
        if (x.similarity != y.similarity) return x.similarity < y.similarity;
        if (x.index_a != y.index_a) return x.index_a < y.index_a;
        return x.index_b < y.index_b;
    });
    if (all.size() > k) all.resize(k);
    return all;
}

std::vector<BigramStat> pos_bigram_report(std::span<const TaggedText> corpus, std::size_t top_n) {
    if (corpus.empty()) fail(ErrorCode::EmptyCorpus, "no tagged documents");
    std::map<std::pair<std::string, std::string>, BigramStat> stats;
    for (const auto& doc : corpus) {
        if (doc.tags.size() != doc.tokens.size()) {
            fail(ErrorCode::LengthMismatch, "document '" + doc.doc_id + "' tokens/tags lengths");
        }
        std::set<std::pair<std::string, std::string>> seen_in_doc;
        for (std::size_t i = 0; i + 1 < doc.tags.size(); ++i) {
            std::pair<std::string, std::string> key{doc.tags[i], doc.tags[i + 1]};
            auto& s = stats[key];
            ++s.occurrences;
            if (i == 0) ++s.at_start;
            if (seen_in_doc.insert(key).second) ++s.docs_present;
        }
    }
    std::vector<BigramStat> out;
    out.reserve(stats.size());
    for (auto& [key, s] : stats) {
        s.bigram = key;
        s.pct_at_start = 100.0 * static_cast<double>(s.at_start) / static_cast<double>(s.occurrences);
        out.push_back(std::move(s));
    }
    std::stable_sort(out.begin(), out.end(), [](const BigramStat& x, const BigramStat& y) {
        return x.docs_present > y.docs_present;
    });
    if (out.size() > top_n) out.resize(top_n);
    return out;
}

std::vector<TaggedText> read_tagged(const std::filesystem::path& path) {
    JsonlReader r(path, "tagged");
    std::vector<TaggedText> out;
    std::string line;
    while (r.next_line(line)) {
        try {
            const auto j = nlohmann::json::parse(line);
            TaggedText t;
            t.doc_id = j.at("doc_id").get<std::string>();
            t.tokens = j.at("tokens").get<std::vector<std::string>>();
            t.tags = j.at("tags").get<std::vector<std::string>>();
            if (t.tokens.size() != t.tags.size()) {
                throw SchemaViolation(r.line_number(), "tags", "length differs from tokens");
            }
            out.push_back(std::move(t));
        } catch (const nlohmann::json::exception& e) {
            throw SchemaViolation(r.line_number(), "", e.what());
        }
    }
    return out;
}

WinRate win_rate(std::span<const Judgment> judgments) {
    if (judgments.empty()) fail(ErrorCode::EmptyInput, "no judgments");
    std::size_t a = 0;
    std::size_t b = 0;
    std::size_t tie = 0;
    for (const auto& j : judgments) {
        switch (j.winner) {
            case Winner::A: ++a; break;
            case Winner::B: ++b; break;
            case Winner::Tie: ++tie; break;
        }
    }
    const auto n = static_cast<double>(judgments.size());
    return {100.0 * static_cast<double>(a) / n, 100.0 * static_cast<double>(b) / n,
            100.0 * static_cast<double>(tie) / n, judgments.size()};
}

std::vector<Judgment> read_judgments(const std::filesystem::path& path) {
    JsonlReader r(path, "judgments");
    std::vector<Judgment> out;
    std::string line;
    while (r.next_line(line)) {
        try {
            const auto j = nlohmann::json::parse(line);
            Judgment jd;
            jd.pair_id = j.at("pair_id").get<std::string>();
            const auto w = j.at("winner").get<std::string>();
            if (w == "A") {
                jd.winner = Winner::A;
            } else if (w == "B") {
                jd.winner = Winner::B;
            } else if (w == "TIE") {
                jd.winner = Winner::Tie;
            } else {
                throw SchemaViolation(r.line_number(), "winner", "expected A, B or TIE");
            }
            out.push_back(std::move(jd));
        } catch (const nlohmann::json::exception& e) {
            throw SchemaViolation(r.line_number(), "", e.what());
        }
    }
    return out;
}

SequentialDelta sequential_delta(std::span<const GenerationRecord> corpus, std::string_view metric) {
    if (corpus.empty()) fail(ErrorCode::EmptyCorpus, "no records");
    SequentialDelta d;
    d.metric = std::string(metric);
    double s1 = 0.0;
    double s2 = 0.0;
    for (const auto& g : corpus) {
        const auto a = score_of(g.first, metric);
        const auto b = score_of(g.second, metric);
        if (!a || !b) {
            fail(ErrorCode::MissingScore, "record '" + g.id + "' lacks " + std::string(metric));
        }
        s1 += *a;
        s2 += *b;
    }
    d.n = corpus.size();
    d.first_mean = s1 / static_cast<double>(d.n);
    d.second_mean = s2 / static_cast<double>(d.n);
    d.increase = metric == "maas" ? d.first_mean - d.second_mean : d.second_mean - d.first_mean;
    return d;
}

}  // namespace divkit
