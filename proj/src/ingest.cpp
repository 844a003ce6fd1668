#include "divkit/ingest.hpp"

#include <cmath>
#include <cstdlib>
#include <unordered_set>

#include "divkit/jsonl.hpp"
#include "divkit/tokenize.hpp"

namespace divkit {

using nlohmann::json;
using nlohmann::ordered_json;

std::optional<double> MetricVector::get(std::string_view name) const {
    auto it = values.find(name);
    if (it == values.end()) return std::nullopt;
    return it->second;
}

std::string_view to_string(Method m) {
    switch (m) {
        case Method::Dns: return "DNS";
        case Method::DnsLite: return "DNS_LITE";
        case Method::DivPo: return "DIVPO";
    }
    return "DNS";
}

Method parse_method(std::string_view s) {
    if (s == "DNS" || s == "dns") return Method::Dns;
    if (s == "DNS_LITE" || s == "dns-lite" || s == "dns_lite") return Method::DnsLite;
    if (s == "DIVPO" || s == "divpo") return Method::DivPo;
    fail(ErrorCode::InvalidArgument, "unknown method '" + std::string(s) + "'");
}

SchemaViolation::SchemaViolation(std::size_t line, std::string field, const std::string& detail)
    : Error(ErrorCode::SchemaViolation,
            "line " + std::to_string(line) + ", field '" + field + "': " + detail),
      line_(line),
      field_(std::move(field)) {}

namespace {

// Parsing context: physical line number plus the dotted field prefix.
struct Ctx {
    std::size_t line;
    std::string prefix;

    std::string path(std::string_view field) const {
        return prefix.empty() ? std::string(field) : prefix + "." + std::string(field);
    }
    [[noreturn]] void bad(std::string_view field, const std::string& why) const {
        throw SchemaViolation(line, path(field), why);
    }
};

const json& require(const json& obj, std::string_view field, const Ctx& ctx) {
    auto it = obj.find(field);
    if (it == obj.end() || it->is_null()) ctx.bad(field, "missing");
    return *it;
}

std::string get_string(const json& obj, std::string_view field, const Ctx& ctx) {
    const auto& v = require(obj, field, ctx);
    if (!v.is_string()) ctx.bad(field, "expected string");
    return v.get<std::string>();
}

double get_real(const json& v, std::string_view field, const Ctx& ctx) {
    if (!v.is_number()) ctx.bad(field, "expected number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) ctx.bad(field, "not finite");
    return d;
}

bool blank(std::string_view s) {
    return s.find_first_not_of(" \t\r\n\f\v") == std::string_view::npos;
}

ResponseRecord parse_response(const json& obj, const Ctx& ctx) {
    if (!obj.is_object()) ctx.bad("", "expected object");
    ResponseRecord r;
    r.text = get_string(obj, "text", ctx);
    if (blank(r.text)) ctx.bad("text", "empty after trimming");

    if (auto it = obj.find("token_logprobs"); it != obj.end() && !it->is_null()) {
        if (!it->is_array()) ctx.bad("token_logprobs", "expected array");
        std::vector<double> lp;
        lp.reserve(it->size());
        for (const auto& e : *it) {
            const double d = get_real(e, "token_logprobs", ctx);
            if (d > 0.0) ctx.bad("token_logprobs", "positive log-probability");
            lp.push_back(d);
        }
        r.token_logprobs = std::move(lp);
    }
    if (auto it = obj.find("quality_score"); it != obj.end() && !it->is_null()) {
        r.quality_score = get_real(*it, "quality_score", ctx);
    }
    if (auto it = obj.find("embedding_ref"); it != obj.end() && !it->is_null()) {
        if (!it->is_string()) ctx.bad("embedding_ref", "expected string");
        r.embedding_ref = it->get<std::string>();
    }
    if (auto it = obj.find("metrics"); it != obj.end() && !it->is_null()) {
        if (!it->is_object()) ctx.bad("metrics", "expected object");
        for (const auto& [name, v] : it->items()) {
            r.metrics.set(name, get_real(v, "metrics." + name, ctx));
        }
    }
    return r;
}

void put_response_fields(ordered_json& out, const ResponseRecord& r) {
    out["text"] = r.text;
    if (r.token_logprobs) out["token_logprobs"] = *r.token_logprobs;
    if (r.quality_score) out["quality_score"] = *r.quality_score;
    if (r.embedding_ref) out["embedding_ref"] = *r.embedding_ref;
    if (!r.metrics.empty()) {
        ordered_json m = ordered_json::object();
        for (const auto& [k, v] : r.metrics.values) m[k] = v;
        out["metrics"] = std::move(m);
    }
}

ordered_json response_to_json(const ResponseRecord& r) {
    ordered_json out;
    put_response_fields(out, r);
    return out;
}

json parse_line(const std::string& line, std::size_t line_no) {
    try {
        json j = json::parse(line);
        if (!j.is_object()) throw SchemaViolation(line_no, "", "line is not a JSON object");
        return j;
    } catch (const json::exception& e) {
        throw SchemaViolation(line_no, "", std::string("malformed JSON: ") + e.what());
    }
}

GenerationRecord parse_generation(const json& j, std::size_t line_no) {
    Ctx ctx{line_no, ""};
    GenerationRecord g;
    g.id = get_string(j, "id", ctx);
    if (g.id.empty()) ctx.bad("id", "empty");
    g.prompt_id = get_string(j, "prompt_id", ctx);
    g.prompt_text = get_string(j, "prompt_text", ctx);
    const auto& words = require(j, "three_words", ctx);
    if (!words.is_array() || words.size() != 3) ctx.bad("three_words", "expected 3 strings");
    for (std::size_t i = 0; i < 3; ++i) {
        if (!words[i].is_string() || words[i].get<std::string>().empty()) {
            ctx.bad("three_words", "entry " + std::to_string(i) + " must be a non-empty string");
        }
        g.three_words[i] = words[i].get<std::string>();
    }
    g.model_id = get_string(j, "model_id", ctx);
    g.first = parse_response(require(j, "first", ctx), Ctx{line_no, "first"});
    g.second = parse_response(require(j, "second", ctx), Ctx{line_no, "second"});
    return g;
}

ResponseItem parse_item(const json& j, std::size_t line_no) {
    Ctx ctx{line_no, ""};
    ResponseItem item;
    item.id = get_string(j, "id", ctx);
    if (item.id.empty()) ctx.bad("id", "empty");
    item.prompt_id = get_string(j, "prompt_id", ctx);
    item.response = parse_response(j, ctx);
    return item;
}

// Shared strict/lenient loop over id-bearing records.
template <typename T, typename Parse>
std::vector<T> read_records(const std::filesystem::path& path, std::string_view kind,
                            bool strict, ReadStats* stats, Parse parse) {
    JsonlReader reader(path, kind);
    std::vector<T> out;
    std::unordered_set<std::string> seen;
    ReadStats local;
    std::string line;
    while (reader.next_line(line)) {
        const auto line_no = reader.line_number();
        try {
            T rec = parse(parse_line(line, line_no), line_no);
            if (!seen.insert(rec.id).second) {
                fail(ErrorCode::DuplicateId,
                     "line " + std::to_string(line_no) + ": duplicate id '" + rec.id + "'");
            }
            out.push_back(std::move(rec));
            ++local.valid;
        } catch (const Error& e) {
            if (strict) throw;
            ++local.skipped;
            local.diagnostics.emplace_back(e.what());
        }
    }
    if (stats) *stats = std::move(local);
    return out;
}

}  // namespace

std::vector<GenerationRecord> read_corpus(const std::filesystem::path& path, bool strict,
                                          ReadStats* stats) {
    return read_records<GenerationRecord>(path, "corpus", strict, stats, parse_generation);
}

std::size_t write_corpus(std::span<const GenerationRecord> records,
                         const std::filesystem::path& path) {
    JsonlWriter w(path, "corpus");
    for (const auto& g : records) {
        ordered_json j;
        j["id"] = g.id;
        j["prompt_id"] = g.prompt_id;
        j["prompt_text"] = g.prompt_text;
        j["three_words"] = g.three_words;
        j["model_id"] = g.model_id;
        j["first"] = response_to_json(g.first);
        j["second"] = response_to_json(g.second);
        w.write(j);
    }
    w.close();
    return records.size();
}

std::vector<ResponseItem> read_responses(const std::filesystem::path& path, bool strict,
                                         ReadStats* stats) {
    return read_records<ResponseItem>(path, "responses", strict, stats, parse_item);
}

std::size_t write_responses(std::span<const ResponseItem> items,
                            const std::filesystem::path& path) {
    JsonlWriter w(path, "responses");
    for (const auto& it : items) {
        ordered_json j;
        j["id"] = it.id;
        j["prompt_id"] = it.prompt_id;
        put_response_fields(j, it.response);
        w.write(j);
    }
    w.close();
    return items.size();
}

std::vector<ResponseItem> load_response_items(const std::filesystem::path& path) {
    const auto kind = peek_header(path)["kind"].get<std::string>();
    if (kind == "responses") return read_responses(path, true);
    if (kind == "corpus") {
        std::vector<ResponseItem> out;
        for (auto& g : read_corpus(path, true)) {
            out.push_back({g.id + "/first", g.prompt_id, std::move(g.first)});
            out.push_back({g.id + "/second", g.prompt_id, std::move(g.second)});
        }
        return out;
    }
    fail(ErrorCode::SchemaViolation,
         path.string() + ": expected a corpus or responses file, found kind '" + kind + "'");
}

void validate_pair(const PreferencePair& p, int max_len_delta) {
    auto bad = [&](const std::string& why) {
        fail(ErrorCode::InvariantViolation, "pair '" + p.id + "': " + why);
    };
    if (!std::isfinite(p.diversity_gain) || !std::isfinite(p.quality_gain)) {
        bad("non-finite gain");
    }
    if (blank(p.chosen.text) || blank(p.rejected.text)) bad("empty response text");
    if (p.method == Method::DivPo) return;
    const auto wc_c = static_cast<long>(word_count(p.chosen.text));
    const auto wc_r = static_cast<long>(word_count(p.rejected.text));
    if (std::labs(wc_c - wc_r) > max_len_delta) {
        bad("word-count difference " + std::to_string(std::labs(wc_c - wc_r)) + " exceeds " +
            std::to_string(max_len_delta));
    }
    if (!(p.diversity_gain > 0.0)) bad("diversity_gain must be > 0");
    if (!(p.quality_gain > 0.0)) bad("quality_gain must be > 0");
}

std::size_t write_pairs(std::span<const PreferencePair> pairs, const std::filesystem::path& path,
                        int max_len_delta) {
    for (const auto& p : pairs) validate_pair(p, max_len_delta);
    JsonlWriter w(path, "pairs");
    for (const auto& p : pairs) {
        ordered_json j;
        j["id"] = p.id;
        j["prompt_id"] = p.prompt_id;
        j["prompt_text"] = p.prompt_text;
        j["chosen"] = response_to_json(p.chosen);
        j["rejected"] = response_to_json(p.rejected);
        j["diversity_gain"] = p.diversity_gain;
        j["quality_gain"] = p.quality_gain;
        j["method"] = std::string(to_string(p.method));
        w.write(j);
    }
    w.close();
    return pairs.size();
}

std::vector<PreferencePair> read_pairs(const std::filesystem::path& path) {
    return read_records<PreferencePair>(
        path, "pairs", true, nullptr, [](const json& j, std::size_t line_no) {
            Ctx ctx{line_no, ""};
            PreferencePair p;
            p.id = get_string(j, "id", ctx);
            p.prompt_id = get_string(j, "prompt_id", ctx);
            p.prompt_text = get_string(j, "prompt_text", ctx);
            p.chosen = parse_response(require(j, "chosen", ctx), Ctx{line_no, "chosen"});
            p.rejected = parse_response(require(j, "rejected", ctx), Ctx{line_no, "rejected"});
            p.diversity_gain = get_real(require(j, "diversity_gain", ctx), "diversity_gain", ctx);
            p.quality_gain = get_real(require(j, "quality_gain", ctx), "quality_gain", ctx);
            const auto method = get_string(j, "method", ctx);
            if (method != "DNS" && method != "DNS_LITE" && method != "DIVPO") {
                ctx.bad("method", "unknown method '" + method + "'");
            }
            p.method = parse_method(method);
            return p;
        });
}

}  // namespace divkit
