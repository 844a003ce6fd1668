#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <unordered_map>

#include <CLI11.hpp>
#include <json.hpp>

#include "divkit/analyze.hpp"
#include "divkit/decile.hpp"
#include "divkit/error.hpp"
#include "divkit/filter.hpp"
#include "divkit/fingerprint.hpp"
#include "divkit/ingest.hpp"
#include "divkit/jsonl.hpp"
#include "divkit/parallel.hpp"
#include "divkit/semdiv.hpp"
#include "divkit/textstat.hpp"
#include "divkit/tokenize.hpp"

namespace divkit::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

const char* kToolVersion = DIVKIT_VERSION;

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, ',')) {
        const auto lo = cur.find_first_not_of(' ');
        const auto hi = cur.find_last_not_of(' ');
        if (lo != std::string::npos) out.push_back(cur.substr(lo, hi - lo + 1));
    }
    return out;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Fixed-precision formatting for report tables; primary outputs use JSON's
// shortest round-trip form instead.
std::string fmt(double v, int precision = 6) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << v;
    return os.str();
}

/// Effective configuration of a subcommand: every option with its parsed or
/// default value.
ordered_json effective_config(const CLI::App& sub) {
    ordered_json cfg = ordered_json::object();
    for (const CLI::Option* opt : sub.get_options()) {
        const std::string name = opt->get_single_name();
        if (name.empty() || name == "help") continue;
        const bool flag = opt->get_expected_max() == 0;
        if (flag) {
            cfg[name] = opt->count() > 0;
        } else if (opt->count() == 0) {
            cfg[name] = opt->get_default_str();
        } else if (opt->get_expected_max() > 1) {
            cfg[name] = opt->results();
        } else {
            cfg[name] = opt->results().back();
        }
    }
    return cfg;
}

struct Manifest {
    std::string command;
    ordered_json config;
    std::vector<fs::path> inputs;
    ordered_json summary = ordered_json::object();

    void write(const fs::path& output) const {
        ordered_json m;
        m["command"] = command;
        m["tool_version"] = kToolVersion;
        m["timestamp"] = utc_timestamp();
        m["config"] = config;
        ordered_json fp = ordered_json::object();
        for (const auto& p : inputs) fp[p.string()] = file_sha256(p);
        m["input_fingerprints"] = fp;
        m["summary"] = summary;
        std::ofstream out(output.string() + ".manifest.json", std::ios::trunc);
        if (!out) fail(ErrorCode::IoFailure, "cannot write manifest for " + output.string());
        out << m.dump(2) << '\n';
    }
};

// Writes a report either to --output or to stdout.
void emit_report(const std::string& text, const std::string& output, std::ostream& out) {
    if (output.empty()) {
        out << text;
        return;
    }
    std::ofstream f(output, std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorCode::IoFailure, "cannot open for writing: " + output);
    f << text;
    if (!f) fail(ErrorCode::IoFailure, "write failed: " + output);
}

bool is_semantic_metric(std::string_view m) { return m == "dsi" || m == "aut"; }

// Options shared by every subcommand.
struct Common {
    std::vector<std::string> inputs;
    std::string output;
    unsigned workers = 1;
};

void add_common(CLI::App* sub, Common& c, bool multi_input = false) {
    if (multi_input) {
        sub->add_option("--input,-i", c.inputs, "Input files")->required();
    } else {
        sub->add_option("--input,-i", c.inputs, "Input file")->required()->expected(1);
    }
    sub->add_option("--output,-o", c.output, "Output file");
    sub->add_option("--workers,-j", c.workers, "Worker threads")
        ->capture_default_str()
        ->check(CLI::Range(1u, 1024u));
    sub->add_option("--config", "Config file (TOML/INI); command-line flags override it");
}

std::optional<std::string> config_path(const std::vector<std::string>& args) {
    std::optional<std::string> path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        }
    }
    return path;
}

bool option_given(const CLI::Option& opt, const std::vector<std::string>& args) {
    for (const auto& a : args) {
        for (const auto& n : opt.get_lnames()) {
            if (a == "--" + n || a.rfind("--" + n + "=", 0) == 0) return true;
        }
        for (const auto& n : opt.get_snames()) {
            if (a.rfind("-" + n, 0) == 0 && a.rfind("--", 0) != 0) return true;
        }
    }
    return false;
}

// Appends config-file values for options not present on the command line.
// Keys may be top level or under a section named after the subcommand.
void merge_config_file(const CLI::App& sub, std::vector<std::string>& args) {
    const auto path = config_path(args);
    if (!path) return;
    if (!fs::exists(*path)) fail(ErrorCode::MissingFile, "config file " + *path);
    const std::vector<std::string> given = args;
    for (const auto& item : CLI::ConfigTOML().from_file(*path)) {
        if (!item.parents.empty() && item.parents != std::vector<std::string>{sub.get_name()}) {
            continue;
        }
        if (item.name == "++" || item.name == "--") continue;
        const std::string key = item.name;
        std::string dashed = key;
        std::replace(dashed.begin(), dashed.end(), '_', '-');
        const CLI::Option* opt = sub.get_option_no_throw("--" + dashed);
        if (opt == nullptr || dashed == "config") {
            fail(ErrorCode::InvalidArgument,
                 "config key '" + key + "' is not an option of " + sub.get_name());
        }
        if (option_given(*opt, given)) continue;
        if (opt->get_expected_max() == 0) {
            args.push_back("--" + dashed + "=" + (item.inputs.empty() ? "true" : item.inputs.front()));
            continue;
        }
        for (const auto& v : item.inputs) {
            args.push_back("--" + dashed);
            args.push_back(v);
        }
    }
}

// ---- score -----------------------------------------------------------------

struct ScoreOpts {
    Common common;
    std::string metrics = "ttr,mattr,maas,hdd,mtld";
    std::size_t mattr_window = kDefaultMattrWindow;
    std::size_t hdd_sample = kDefaultHddSample;
    double mtld_threshold = kDefaultMtldThreshold;
    std::size_t ngram_max = kDefaultNgramMax;
    std::string embeddings;
    bool lenient = false;
};

struct Scorer {
    MetricConfig lexical;
    std::vector<std::string> semantic;
    const EmbeddingStore* store = nullptr;
    std::mutex mu;
    std::map<std::string, std::size_t> soft_failures;

    static bool soft(ErrorCode c) {
        return c == ErrorCode::EmptyText || c == ErrorCode::SingleToken ||
               c == ErrorCode::TextTooShort || c == ErrorCode::TooFewRows;
    }

    void note_soft(const std::string& metric) {
        std::lock_guard lock(mu);
        ++soft_failures[metric];
    }

    // Scores one response in place. `owner` names the record side for errors.
    void score(ResponseRecord& r, const std::string& owner, const std::string& prompt_id) {
        for (const auto& name : lexical.metrics) {
            MetricConfig one = lexical;
            one.metrics = {name};
            try {
                for (auto& [k, v] : score_response(r, one).values) r.metrics.set(k, v);
            } catch (const Error& e) {
                if (!soft(e.code())) {
                    throw Error(e.code(), owner + ": " + e.detail() +
                                              (e.code() == ErrorCode::MissingLogprobs
                                                   ? " (field token_logprobs)"
                                                   : ""));
                }
                note_soft(name);
            }
        }
        for (const auto& name : semantic) {
            if (!r.embedding_ref) {
                fail(ErrorCode::MissingEmbedding,
                     owner + ": metric '" + name + "' needs field embedding_ref");
            }
            try {
                const auto m = store->load(*r.embedding_ref);
                if (name == "dsi") {
                    r.metrics.set(name, dsi(m));
                } else {
                    const auto object = store->load(prompt_id);
                    r.metrics.set(name, aut_distance(object.row(0), m));
                }
            } catch (const Error& e) {
                if (!soft(e.code())) {
                    throw Error(e.code(), owner + ": metric '" + name + "': " + e.detail());
                }
                note_soft(name);
            }
        }
    }
};

int cmd_score(const ScoreOpts& o, const CLI::App& sub, std::ostream& err) {
    const fs::path input = o.common.inputs.front();
    if (o.common.output.empty()) fail(ErrorCode::InvalidArgument, "score needs --output");
    Scorer scorer;
    scorer.lexical.mattr_window = o.mattr_window;
    scorer.lexical.hdd_sample = o.hdd_sample;
    scorer.lexical.mtld_threshold = o.mtld_threshold;
    scorer.lexical.ngram_max = o.ngram_max;
    for (const auto& m : split_list(o.metrics)) {
        if (is_lexical_metric(m)) {
            scorer.lexical.metrics.insert(m);
        } else if (is_semantic_metric(m)) {
            if (std::find(scorer.semantic.begin(), scorer.semantic.end(), m) ==
                scorer.semantic.end()) {
                scorer.semantic.push_back(m);
            }
        } else {
            fail(ErrorCode::UnknownMetric, "'" + m + "'");
        }
    }
    std::sort(scorer.semantic.begin(), scorer.semantic.end());
    std::optional<EmbeddingStore> store;
    Manifest manifest{"score", effective_config(sub), {input}};
    if (!scorer.semantic.empty()) {
        if (o.embeddings.empty()) {
            fail(ErrorCode::MissingEmbedding, "metrics dsi/aut need --embeddings");
        }
        store.emplace(o.embeddings);
        scorer.store = &*store;
        manifest.inputs.emplace_back(o.embeddings);
    }

    const auto kind = peek_header(input)["kind"].get<std::string>();
    ReadStats stats;
    std::size_t records = 0;
    if (kind == "corpus") {
        auto corpus = read_corpus(input, !o.lenient, &stats);
        parallel_for(corpus.size(), o.common.workers, [&](std::size_t i) {
            auto& g = corpus[i];
            scorer.score(g.first, "record '" + g.id + "' first", g.prompt_id);
            scorer.score(g.second, "record '" + g.id + "' second", g.prompt_id);
        });
        records = write_corpus(corpus, o.common.output);
    } else if (kind == "responses") {
        auto items = read_responses(input, !o.lenient, &stats);
        parallel_for(items.size(), o.common.workers, [&](std::size_t i) {
            scorer.score(items[i].response, "response '" + items[i].id + "'", items[i].prompt_id);
        });
        records = write_responses(items, o.common.output);
    } else {
        fail(ErrorCode::SchemaViolation, input.string() + ": cannot score kind '" + kind + "'");
    }

    ordered_json soft = ordered_json::object();
    for (const auto& [k, v] : scorer.soft_failures) soft[k] = v;
    manifest.summary["records"] = records;
    manifest.summary["skipped_lines"] = stats.skipped;
    manifest.summary["soft_failures"] = soft;
    manifest.write(o.common.output);

    ordered_json metrics_manifest;
    metrics_manifest["tool_version"] = kToolVersion;
    std::vector<std::string> selected(scorer.lexical.metrics.begin(), scorer.lexical.metrics.end());
    selected.insert(selected.end(), scorer.semantic.begin(), scorer.semantic.end());
    metrics_manifest["metrics"] = selected;
    metrics_manifest["parameters"] = {
        {"tokenizer", "unicode-whitespace split, punctuation strip, lowercase"},
        {"mattr_window", o.mattr_window},
        {"hdd_sample", o.hdd_sample},
        {"mtld_threshold", o.mtld_threshold},
        {"mtld_rule", "factor ends when TTR < threshold; no factor and final TTR 1 gives N"},
        {"ngram_max", o.ngram_max},
        {"maas_log_base", 10},
        {"entropy", "mean negative log-likelihood per token, nats"},
        {"comp_ratio", "utf8 bytes / raw deflate bytes, level 6"},
        {"deflate_level", kDeflateLevel},
        {"dsi", "mean pairwise cosine distance over embedding rows"},
        {"aut", "mean cosine distance from object vector (store key = prompt_id) to use rows"},
    };
    std::ofstream mm(o.common.output + ".metrics.manifest", std::ios::trunc);
    if (!mm) fail(ErrorCode::IoFailure, "cannot write metrics manifest");
    mm << metrics_manifest.dump(2) << '\n';

    err << "score: " << records << " records written";
    if (stats.skipped) err << ", " << stats.skipped << " malformed lines skipped";
    for (const auto& [k, v] : scorer.soft_failures) err << ", " << k << " unavailable x" << v;
    err << '\n';
    return 0;
}

// ---- build-map -------------------------------------------------------------

struct BuildMapOpts {
    Common common;
    std::string metric;
    std::size_t min_bucket = kDefaultMinBucket;
};

std::vector<ScorePoint> score_points(const std::vector<ResponseItem>& items,
                                     const std::string& metric, unsigned workers,
                                     const std::string& source) {
    std::vector<ScorePoint> points(items.size());
    parallel_for(items.size(), workers, [&](std::size_t i) {
        const auto& r = items[i].response;
        std::optional<double> v;
        if (metric == "word_count") {
            v = static_cast<double>(word_count(r.text));
        } else {
            v = score_of(r, metric);
        }
        if (!v) {
            fail(ErrorCode::MetricAbsent,
                 source + ": response '" + items[i].id + "' has no metric '" + metric + "'");
        }
        points[i] = {word_count(r.text), *v};
    });
    return points;
}

int cmd_build_map(const BuildMapOpts& o, const CLI::App& sub, std::ostream& err) {
    const fs::path input = o.common.inputs.front();
    if (o.common.output.empty()) fail(ErrorCode::InvalidArgument, "build-map needs --output");
    const auto items = load_response_items(input);
    if (items.empty()) fail(ErrorCode::EmptyInput, input.string() + " has no responses");
    const auto points = score_points(items, o.metric, o.common.workers, input.string());
    const auto map = build_map(points, o.metric, o.min_bucket, file_sha256(input));
    write_map(map, o.common.output);
    Manifest manifest{"build-map", effective_config(sub), {input}};
    manifest.summary["responses"] = points.size();
    manifest.summary["buckets"] = map.buckets.size();
    manifest.write(o.common.output);
    err << "build-map: " << map.buckets.size() << " buckets from " << points.size()
        << " responses (metric " << o.metric << ")\n";
    return 0;
}

// ---- filter ----------------------------------------------------------------

struct FilterOpts {
    Common common;
    std::string method = "dns";
    std::optional<int> max_len_delta;
    std::size_t top_k = 3000;
    std::string gain_metric;
    std::string diversity_metric;
    std::string quality_metric;
    double divpo_upper = 75.0;
    double divpo_lower = 25.0;
    std::string divpo_pool = "both";
    bool skip_missing = false;
};

int cmd_filter(const FilterOpts& o, const CLI::App& sub, std::ostream& err) {
    const fs::path input = o.common.inputs.front();
    if (o.common.output.empty()) fail(ErrorCode::InvalidArgument, "filter needs --output");
    auto cfg = FilterConfig::for_method(parse_method(o.method));
    if (o.max_len_delta) cfg.max_len_delta = *o.max_len_delta;
    cfg.top_k = o.top_k;
    cfg.gain_metric = o.gain_metric;
    if (!o.diversity_metric.empty()) cfg.diversity_metric = o.diversity_metric;
    if (!o.quality_metric.empty()) cfg.quality_metric = o.quality_metric;
    cfg.divpo_upper_pct = o.divpo_upper;
    cfg.divpo_lower_pct = o.divpo_lower;
    cfg.skip_missing = o.skip_missing;
    if (o.divpo_pool == "first") {
        cfg.divpo_pool = DivpoPool::First;
    } else if (o.divpo_pool == "second") {
        cfg.divpo_pool = DivpoPool::Second;
    } else if (o.divpo_pool == "both") {
        cfg.divpo_pool = DivpoPool::Both;
    } else {
        fail(ErrorCode::InvalidArgument, "--divpo-pool must be first, second or both");
    }
    cfg.validate();

    const auto corpus = read_corpus(input, true);
    FilterStats stats;
    const auto filtered = run_filter(corpus, cfg, &stats, o.common.workers);
    const auto selected = select_top_k(filtered, cfg);
    write_pairs(selected, o.common.output, cfg.max_len_delta);

    Manifest manifest{"filter", effective_config(sub), {input}};
    auto& s = manifest.summary;
    s["method"] = std::string(to_string(cfg.method));
    s["diversity_metric"] = cfg.diversity_metric;
    s["quality_metric"] = cfg.quality_metric;
    s["gain_metric"] = stats.gain_metric;
    s["input_records"] = stats.input;
    s["skipped_missing"] = stats.skipped_missing;
    s["pairs_after_filter"] = filtered.size();
    s["pairs_written"] = selected.size();

    err << "filter summary (" << to_string(cfg.method) << ")\n";
    err << "  input records        " << stats.input << '\n';
    if (cfg.method == Method::DivPo) {
        s["pools"] = stats.pools;
        s["degenerate_pools"] = stats.degenerate_pools;
        err << "  prompt pools         " << stats.pools << '\n';
        err << "  pools without a pair " << stats.degenerate_pools << '\n';
    } else {
        static const char* kRules[] = {"quality floor", "quality gain", "diversity gain",
                                       "length parity"};
        s["quality_floor"] = stats.quality_floor;
        ordered_json drops = ordered_json::object();
        err << "  quality floor (p50)  " << fmt(stats.quality_floor) << '\n';
        for (std::size_t r = 0; r < 4; ++r) {
            drops[kRules[r]] = stats.dropped_by_rule[r];
            err << "  dropped by rule " << r + 1 << " (" << kRules[r] << ")  "
                << stats.dropped_by_rule[r] << '\n';
        }
        s["dropped_by_rule"] = drops;
        s["dropped_nonpositive_gain"] = stats.dropped_nonpositive_gain;
        if (stats.dropped_nonpositive_gain) {
            err << "  dropped, gain <= 0   " << stats.dropped_nonpositive_gain << '\n';
        }
    }
    if (stats.skipped_missing) err << "  skipped (missing)    " << stats.skipped_missing << '\n';
    err << "  pairs kept           " << filtered.size() << '\n';
    err << "  pairs written        " << selected.size() << " (top-k " << cfg.top_k << ", gain "
        << stats.gain_metric << ")\n";
    if (!selected.empty()) {
        const auto ld = length_delta_report(selected);
        s["length_delta_mean"] = ld.mean;
        s["length_delta_std"] = ld.std;
        err << "  word count delta     " << fmt(ld.mean, 2) << " +/- " << fmt(ld.std, 2) << '\n';
    }
    manifest.write(o.common.output);
    return 0;
}

// ---- dd-report -------------------------------------------------------------

struct DdOpts {
    Common common;  // inputs are decile maps
    std::string base;
    std::string tuned;
    std::string plot_data;
};

int cmd_dd_report(const DdOpts& o, const CLI::App& sub, std::ostream& out) {
    const auto base_items = load_response_items(o.base);
    const auto tuned_items = load_response_items(o.tuned);
    std::ostringstream table;
    std::ostringstream plot;
    table << "metric\tbase_mean_dd\ttuned_mean_dd\tdelta_dd\tn_base\tn_tuned\n";
    plot << "metric\tdelta_dd\n";
    std::vector<fs::path> inputs{o.base, o.tuned};
    for (const auto& map_path : o.common.inputs) {
        const auto map = read_map(map_path);
        inputs.emplace_back(map_path);
        const auto base = score_points(base_items, map.metric, o.common.workers, o.base);
        const auto tuned = score_points(tuned_items, map.metric, o.common.workers, o.tuned);
        const double mb = mean_dd(map, base);
        const double mt = mean_dd(map, tuned);
        const double delta = delta_dd(map, base, tuned);
        table << map.metric << '\t' << fmt(mb) << '\t' << fmt(mt) << '\t' << fmt(delta) << '\t'
              << base.size() << '\t' << tuned.size() << '\n';
        plot << map.metric << '\t' << fmt(delta) << '\n';
    }
    emit_report(table.str(), o.common.output, out);
    if (!o.plot_data.empty()) emit_report(plot.str(), o.plot_data, out);
    if (!o.common.output.empty()) {
        Manifest manifest{"dd-report", effective_config(sub), inputs};
        manifest.write(o.common.output);
    }
    return 0;
}

// ---- correlate -------------------------------------------------------------

struct CorrelateOpts {
    Common common;
    std::string x = "entropy,quality_score";
    std::string y = "word_count,ttr,mattr,hdd,mtld,maas";
    std::string responses = "both";
    bool sequential = false;
};

int cmd_correlate(const CorrelateOpts& o, const CLI::App& sub, std::ostream& out) {
    const fs::path input = o.common.inputs.front();
    auto items = load_response_items(input);
    if (o.responses != "both") {
        const std::string suffix = "/" + o.responses;
        std::erase_if(items, [&](const ResponseItem& it) {
            return it.id.size() < suffix.size() ||
                   it.id.compare(it.id.size() - suffix.size(), suffix.size(), suffix) != 0;
        });
    }
    // Rows lacking a metric (e.g. hdd on short texts) are left out pairwise.
    auto column = [&](const std::string& metric) {
        std::vector<std::optional<double>> v(items.size());
        bool any = false;
        for (std::size_t i = 0; i < items.size(); ++i) {
            const auto& r = items[i].response;
            v[i] = metric == "word_count" ? std::optional<double>(word_count(r.text))
                                          : score_of(r, metric);
            any = any || v[i].has_value();
        }
        if (!any) {
            fail(ErrorCode::MetricAbsent, input.string() + ": no response has metric '" + metric + "'");
        }
        return v;
    };
    std::ostringstream table;
    table << "x\ty\tr\tp\tn\n";
    for (const auto& xn : split_list(o.x)) {
        const auto xs = column(xn);
        for (const auto& yn : split_list(o.y)) {
            const auto ys = column(yn);
            std::vector<double> xv;
            std::vector<double> yv;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                if (xs[i] && ys[i]) {
                    xv.push_back(*xs[i]);
                    yv.push_back(*ys[i]);
                }
            }
            const auto res = pearson(xv, yv);
            std::ostringstream p;
            p << std::setprecision(6) << std::scientific << res.p;
            table << xn << '\t' << yn << '\t' << fmt(res.r) << '\t' << p.str() << '\t' << res.n
                  << '\n';
        }
    }
    if (o.sequential) {
        const auto corpus = read_corpus(input, true);
        table << "\nmetric\tfirst_mean\tsecond_mean\tincrease\tn\n";
        for (const auto& m : split_list(o.y)) {
            if (m == "word_count") continue;
            std::vector<GenerationRecord> scored;
            for (const auto& g : corpus) {
                if (g.first.metrics.get(m) && g.second.metrics.get(m)) scored.push_back(g);
            }
            if (scored.empty()) continue;
            const auto d = sequential_delta(scored, m);
            table << m << '\t' << fmt(d.first_mean, 4) << '\t' << fmt(d.second_mean, 4) << '\t'
                  << fmt(d.increase, 4) << '\t' << d.n << '\n';
        }
    }
    emit_report(table.str(), o.common.output, out);
    if (!o.common.output.empty()) {
        Manifest{"correlate", effective_config(sub), {input}}.write(o.common.output);
    }
    return 0;
}

// ---- ttest -----------------------------------------------------------------

struct TTestOpts {
    Common common;
    std::string metric = "dsi";
    bool welch = false;
};

int cmd_ttest(const TTestOpts& o, const CLI::App& sub, std::ostream& out) {
    if (o.common.inputs.size() != 2) {
        fail(ErrorCode::InvalidArgument, "ttest needs exactly two --input files (A then B)");
    }
    auto values = [&](const std::string& path) {
        const auto pts = score_points(load_response_items(path), o.metric, o.common.workers, path);
        std::vector<double> v;
        for (const auto& p : pts) v.push_back(p.value);
        return v;
    };
    const auto a = values(o.common.inputs[0]);
    const auto b = values(o.common.inputs[1]);
    std::ostringstream table;
    table << "test\tprimary\tt\tdf\tp\tn_a\tn_b\n";
    for (bool equal_var : {true, false}) {
        const auto r = ttest_ind(a, b, equal_var);
        std::ostringstream p;
        p << std::setprecision(6) << std::scientific << r.p_value;
        table << (equal_var ? "student" : "welch") << '\t' << (equal_var != o.welch ? "yes" : "no")
              << '\t' << fmt(r.t_statistic) << '\t' << fmt(r.df, 3) << '\t' << p.str() << '\t'
              << r.n_a << '\t' << r.n_b << '\n';
    }
    emit_report(table.str(), o.common.output, out);
    if (!o.common.output.empty()) {
        Manifest{"ttest",
                 effective_config(sub),
                 {o.common.inputs[0], o.common.inputs[1]}}
            .write(o.common.output);
    }
    return 0;
}

// ---- pairs-for-eval --------------------------------------------------------

struct EvalPairOpts {
    Common common;
    std::size_t k = 20;
};

int cmd_pairs_for_eval(const EvalPairOpts& o, const CLI::App& sub, std::ostream& out) {
    if (o.common.inputs.size() != 2) {
        fail(ErrorCode::InvalidArgument, "pairs-for-eval needs exactly two --input files");
    }
    const auto a = load_response_items(o.common.inputs[0]);
    const auto b = load_response_items(o.common.inputs[1]);
    std::vector<std::string> prompts;
    std::unordered_map<std::string, std::pair<std::vector<const ResponseItem*>,
                                              std::vector<const ResponseItem*>>>
        groups;
    for (const auto& it : a) {
        auto [g, inserted] = groups.try_emplace(it.prompt_id);
        if (inserted) prompts.push_back(it.prompt_id);
        g->second.first.push_back(&it);
    }
    for (const auto& it : b) {
        auto g = groups.find(it.prompt_id);
        if (g != groups.end()) g->second.second.push_back(&it);
    }
    std::erase_if(prompts, [&](const std::string& p) { return groups[p].second.empty(); });

    std::vector<std::vector<SimilarPair>> ranked(prompts.size());
    parallel_for(prompts.size(), o.common.workers, [&](std::size_t i) {
        const auto& [ga, gb] = groups.at(prompts[i]);
        std::vector<std::string> ta;
        std::vector<std::string> tb;
        for (const auto* r : ga) ta.push_back(r->response.text);
        for (const auto* r : gb) tb.push_back(r->response.text);
        ranked[i] = least_similar_pairs(ta, tb, o.k);
    });

    const bool to_file = !o.common.output.empty();
    std::optional<JsonlWriter> writer;
    if (to_file) writer.emplace(o.common.output, "eval_pairs");
    std::size_t total = 0;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        const auto& [ga, gb] = groups.at(prompts[i]);
        for (const auto& sp : ranked[i]) {
            ordered_json j;
            j["prompt_id"] = prompts[i];
            j["a_id"] = ga[sp.index_a]->id;
            j["b_id"] = gb[sp.index_b]->id;
            j["jaccard"] = sp.similarity;
            j["a_text"] = ga[sp.index_a]->response.text;
            j["b_text"] = gb[sp.index_b]->response.text;
            if (to_file) {
                writer->write(j);
            } else {
                out << j.dump() << '\n';
            }
            ++total;
        }
    }
    if (to_file) {
        writer->close();
        Manifest m{"pairs-for-eval", effective_config(sub), {o.common.inputs[0], o.common.inputs[1]}};
        m.summary["prompts"] = prompts.size();
        m.summary["pairs"] = total;
        m.write(o.common.output);
    }
    return 0;
}

// ---- pos-report / win-rate -------------------------------------------------

struct PosOpts {
    Common common;
    std::size_t top_n = 5;
};

int cmd_pos_report(const PosOpts& o, const CLI::App& sub, std::ostream& out) {
    const fs::path input = o.common.inputs.front();
    const auto docs = read_tagged(input);
    const auto rows = pos_bigram_report(docs, o.top_n);
    std::ostringstream table;
    table << "bigram\tdocs_present\tdocs_total\toccurrences\tpct_at_start\n";
    for (const auto& r : rows) {
        table << r.bigram.first << ' ' << r.bigram.second << '\t' << r.docs_present << '\t'
              << docs.size() << '\t' << r.occurrences << '\t' << fmt(r.pct_at_start, 2) << '\n';
    }
    emit_report(table.str(), o.common.output, out);
    if (!o.common.output.empty()) {
        Manifest{"pos-report", effective_config(sub), {input}}.write(o.common.output);
    }
    return 0;
}

int cmd_win_rate(const Common& o, const CLI::App& sub, std::ostream& out) {
    const fs::path input = o.inputs.front();
    const auto wr = win_rate(read_judgments(input));
    std::ostringstream table;
    table << "win_a_pct\twin_b_pct\ttie_pct\tn\n";
    table << fmt(wr.win_a_pct, 2) << '\t' << fmt(wr.win_b_pct, 2) << '\t' << fmt(wr.tie_pct, 2)
          << '\t' << wr.n << '\n';
    emit_report(table.str(), o.output, out);
    if (!o.output.empty()) Manifest{"win-rate", effective_config(sub), {input}}.write(o.output);
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"divkit: text diversity metrics, decile maps and length-controlled preference data",
                 "divkit"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    ScoreOpts score;
    auto* s = app.add_subcommand("score", "Annotate responses with diversity metrics");
    add_common(s, score.common);
    s->add_option("--metrics,-m", score.metrics, "Comma-separated metric names")->capture_default_str();
    s->add_option("--mattr-window", score.mattr_window)->capture_default_str();
    s->add_option("--hdd-sample", score.hdd_sample)->capture_default_str();
    s->add_option("--mtld-threshold", score.mtld_threshold)->capture_default_str();
    s->add_option("--ngram-max", score.ngram_max)->capture_default_str();
    s->add_option("--embeddings", score.embeddings, "Embedding store for dsi/aut");
    s->add_flag("--lenient", score.lenient, "Skip malformed lines instead of failing");

    BuildMapOpts bm;
    auto* b = app.add_subcommand("build-map", "Build a word-count decile map for one metric");
    add_common(b, bm.common);
    b->add_option("--metric", bm.metric, "Metric name (or quality_score)")->required();
    b->add_option("--min-bucket", bm.min_bucket)->capture_default_str();

    FilterOpts fo;
    auto* f = app.add_subcommand("filter", "Build preference pairs (dns, dns-lite, divpo)");
    add_common(f, fo.common);
    f->add_option("--method", fo.method)
        ->capture_default_str()
        ->check(CLI::IsMember({"dns", "dns-lite", "divpo"}));
    f->add_option("--max-len-delta", fo.max_len_delta, "Max word-count difference (default 5)");
    f->add_option("--top-k", fo.top_k)->capture_default_str();
    f->add_option("--gain-metric", fo.gain_metric, "Metric ranking pairs for top-k");
    f->add_option("--diversity-metric", fo.diversity_metric);
    f->add_option("--quality-metric", fo.quality_metric);
    f->add_option("--divpo-upper", fo.divpo_upper)->capture_default_str();
    f->add_option("--divpo-lower", fo.divpo_lower)->capture_default_str();
    f->add_option("--divpo-pool", fo.divpo_pool)->capture_default_str();
    f->add_flag("--skip-missing", fo.skip_missing, "Drop records lacking scores");

    DdOpts ddo;
    auto* d = app.add_subcommand("dd-report", "Mean diversity decile of base vs tuned responses");
    add_common(d, ddo.common, true);
    d->add_option("--base", ddo.base)->required();
    d->add_option("--tuned", ddo.tuned)->required();
    d->add_option("--plot-data", ddo.plot_data, "Write metric/delta columns here");

    CorrelateOpts co;
    auto* c = app.add_subcommand("correlate", "Pearson correlations between metrics");
    add_common(c, co.common);
    c->add_option("--x", co.x)->capture_default_str();
    c->add_option("--y", co.y)->capture_default_str();
    c->add_option("--responses", co.responses)
        ->capture_default_str()
        ->check(CLI::IsMember({"first", "second", "both"}));
    c->add_flag("--sequential", co.sequential, "Also report first vs second response means");

    TTestOpts to;
    auto* t = app.add_subcommand("ttest", "Independent t-test on a metric between two files");
    add_common(t, to.common, true);
    t->add_option("--metric", to.metric)->capture_default_str();
    t->add_flag("--welch", to.welch, "Mark Welch's test as primary");

    EvalPairOpts eo;
    auto* e = app.add_subcommand("pairs-for-eval", "Least similar cross-method pairs per prompt");
    add_common(e, eo.common, true);
    e->add_option("--k", eo.k)->capture_default_str();

    PosOpts po;
    auto* p = app.add_subcommand("pos-report", "Repeating POS bigram statistics");
    add_common(p, po.common);
    p->add_option("--top-n", po.top_n)->capture_default_str();

    Common wo;
    auto* w = app.add_subcommand("win-rate", "Tabulate pairwise judgments");
    add_common(w, wo);

    std::vector<std::string> argv = args;
    try {
        for (const CLI::App* sub : app.get_subcommands({})) {
            if (!args.empty() && args.front() == sub->get_name()) merge_config_file(*sub, argv);
        }
    } catch (const Error& ex) {
        err << "error: " << ex.what() << '\n';
        return exit_code_for(ex.code());
    } catch (const CLI::ParseError& pe) {
        err << "error: config: " << pe.what() << '\n';
        return 2;
    }
    std::vector<std::string> reversed(argv.rbegin(), argv.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& pe) {
        const int rc = app.exit(pe, out, err);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*s) return cmd_score(score, *s, err);
        if (*b) return cmd_build_map(bm, *b, err);
        if (*f) return cmd_filter(fo, *f, err);
        if (*d) return cmd_dd_report(ddo, *d, out);
        if (*c) return cmd_correlate(co, *c, out);
        if (*t) return cmd_ttest(to, *t, out);
        if (*e) return cmd_pairs_for_eval(eo, *e, out);
        if (*p) return cmd_pos_report(po, *p, out);
        if (*w) return cmd_win_rate(wo, *w, out);
    } catch (const Error& ex) {
        err << "error: " << ex.what() << '\n';
        return exit_code_for(ex.code());
    } catch (const fs::filesystem_error& ex) {
        err << "error: " << ex.what() << '\n';
        return 1;
    } catch (const std::exception& ex) {
        err << "internal error: " << ex.what() << '\n';
        return 3;
    }
    return 3;
}

}  // namespace divkit::cli
