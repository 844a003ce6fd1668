#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "divkit/error.hpp"

namespace divkit {

/// Named scores attached to one response, keyed by metric name
/// (ttr, mattr, maas, hdd, mtld, mtld_ma, mtld_ma_bi, entropy, ngram_div,
/// comp_ratio, dsi, aut).
struct MetricVector {
    std::map<std::string, double, std::less<>> values;

    std::optional<double> get(std::string_view name) const;
    void set(std::string name, double v) { values[std::move(name)] = v; }
    bool empty() const { return values.empty(); }
    bool operator==(const MetricVector&) const = default;
};

struct ResponseRecord {
    std::string text;
    std::optional<std::vector<double>> token_logprobs;  // nats, each <= 0
    std::optional<double> quality_score;
    std::optional<std::string> embedding_ref;
    MetricVector metrics;  // filled by scoring

    bool operator==(const ResponseRecord&) const = default;
};

struct GenerationRecord {
    std::string id;
    std::string prompt_id;
    std::string prompt_text;
    std::array<std::string, 3> three_words;
    std::string model_id;
    ResponseRecord first;
    ResponseRecord second;

    bool operator==(const GenerationRecord&) const = default;
};

enum class Method { Dns, DnsLite, DivPo };

std::string_view to_string(Method m);
/// Accepts the file spellings (DNS, DNS_LITE, DIVPO) and CLI spellings
/// (dns, dns-lite, divpo).
Method parse_method(std::string_view s);

struct PreferencePair {
    std::string id;  // source record id (DNS) or prompt id (DivPO)
    std::string prompt_id;
    std::string prompt_text;
    ResponseRecord chosen;
    ResponseRecord rejected;
    double diversity_gain = 0.0;
    double quality_gain = 0.0;
    Method method = Method::Dns;

    bool operator==(const PreferencePair&) const = default;
};

/// A standalone scored response (evaluation outputs of one model or method).
struct ResponseItem {
    std::string id;
    std::string prompt_id;
    ResponseRecord response;

    bool operator==(const ResponseItem&) const = default;
};

/// Thrown for malformed records; carries the physical line and field path.
class SchemaViolation : public Error {
public:
    SchemaViolation(std::size_t line, std::string field, const std::string& detail);
    std::size_t line() const noexcept { return line_; }
    const std::string& field() const noexcept { return field_; }

private:
    std::size_t line_;
    std::string field_;
};

struct ReadStats {
    std::size_t valid = 0;
    std::size_t skipped = 0;
    std::vector<std::string> diagnostics;  // one per skipped line
};

/// Strict mode throws on the first malformed line or duplicate id; lenient
/// mode skips and counts them. A bad header is fatal in both modes.
std::vector<GenerationRecord> read_corpus(const std::filesystem::path& path, bool strict,
                                          ReadStats* stats = nullptr);
std::size_t write_corpus(std::span<const GenerationRecord> records,
                         const std::filesystem::path& path);

std::vector<ResponseItem> read_responses(const std::filesystem::path& path, bool strict,
                                         ReadStats* stats = nullptr);
std::size_t write_responses(std::span<const ResponseItem> items,
                            const std::filesystem::path& path);

/// Loads evaluation responses from either a `responses` file or a `corpus`
/// file (first and second responses flattened, ids suffixed `/first`,
/// `/second`).
std::vector<ResponseItem> load_response_items(const std::filesystem::path& path);

/// Validates every pair, then writes. Nothing is written if any pair fails.
std::size_t write_pairs(std::span<const PreferencePair> pairs, const std::filesystem::path& path,
                        int max_len_delta = 5);
std::vector<PreferencePair> read_pairs(const std::filesystem::path& path);

/// Throws InvariantViolation when a DNS/DNS_LITE pair breaks length parity or
/// has non-positive gains.
void validate_pair(const PreferencePair& pair, int max_len_delta = 5);

}  // namespace divkit
