#pragma once

#include <cstddef>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "divkit/ingest.hpp"

namespace divkit {

// ---- special functions ------------------------------------------------------

/// Regularized incomplete beta I_x(a, b). Continued fraction (modified Lentz)
/// with the symmetry swap; relative accuracy around 1e-14 in double.
double incomplete_beta(double a, double b, double x);

/// Two-sided p-value of a Student t statistic with `df` degrees of freedom.
double student_t_two_sided_p(double t, double df);

// ---- correlation and t-tests ------------------------------------------------

struct PearsonResult {
    double r = 0.0;
    double p = 1.0;
    std::size_t n = 0;
};

/// Sample Pearson r with the t-transform two-sided p (df = n - 2).
PearsonResult pearson(std::span<const double> x, std::span<const double> y);

struct CorrelationEntry {
    std::string x_name;
    std::string y_name;
    PearsonResult result;
};

struct CorrelationReport {
    std::vector<CorrelationEntry> pairs;
};

struct TTestReport {
    double t_statistic = 0.0;
    double p_value = 1.0;
    double df = 0.0;
    std::size_t n_a = 0;
    std::size_t n_b = 0;
    bool equal_variance = true;
};

/// Independent two-sample t-test, t = (mean(a) - mean(b)) / se, so a sample
/// with the smaller mean as `a` gives t < 0. Student (pooled) or Welch.
TTestReport ttest_ind(std::span<const double> a, std::span<const double> b,
                      bool equal_variance = true);

// ---- evaluation-pair mining ---------------------------------------------------

using TokenSet = std::set<std::string, std::less<>>;

/// Lowercased token types of a text (textstat tokenizer).
TokenSet token_set(std::string_view text);

/// |a ∩ b| / |a ∪ b|; BothEmpty when both are empty.
double jaccard(const TokenSet& a, const TokenSet& b);

struct SimilarPair {
    std::size_t index_a = 0;
    std::size_t index_b = 0;
    double similarity = 0.0;
};

/// All cross pairs ranked by ascending Jaccard similarity, ties by
/// (index_a, index_b); the first k are returned.
std::vector<SimilarPair> least_similar_pairs(std::span<const std::string> a,
                                             std::span<const std::string> b, std::size_t k);

// ---- POS bigram repetition ------------------------------------------------------

struct TaggedText {
    std::string doc_id;
    std::vector<std::string> tokens;
    std::vector<std::string> tags;
};

struct BigramStat {
    std::pair<std::string, std::string> bigram;
    std::size_t docs_present = 0;
    std::size_t occurrences = 0;
    std::size_t at_start = 0;
    double pct_at_start = 0.0;  // 100 * at_start / occurrences
};

/// Tag-bigram document frequency and share of occurrences at position 0,
/// ranked by docs_present descending (ties by bigram); the first top_n kept.
std::vector<BigramStat> pos_bigram_report(std::span<const TaggedText> corpus, std::size_t top_n);

std::vector<TaggedText> read_tagged(const std::filesystem::path& path);

// ---- win rates ------------------------------------------------------------------

enum class Winner { A, B, Tie };

struct Judgment {
    std::string pair_id;
    Winner winner = Winner::Tie;
};

struct WinRate {
    double win_a_pct = 0.0;
    double win_b_pct = 0.0;
    double tie_pct = 0.0;
    std::size_t n = 0;
};

WinRate win_rate(std::span<const Judgment> judgments);
std::vector<Judgment> read_judgments(const std::filesystem::path& path);

// ---- sequential prompting -------------------------------------------------------

struct SequentialDelta {
    std::string metric;
    double first_mean = 0.0;
    double second_mean = 0.0;
    /// second - first, or first - second when lower values mean more diversity (maas).
    double increase = 0.0;
    std::size_t n = 0;
};

/// Mean of a scored metric over first and second responses. Records lacking
/// the metric on either side raise MissingScore.
SequentialDelta sequential_delta(std::span<const GenerationRecord> corpus, std::string_view metric);

}  // namespace divkit
