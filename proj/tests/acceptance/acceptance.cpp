// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "divkit/analyze.hpp"
#include "divkit/decile.hpp"
#include "divkit/filter.hpp"
#include "divkit/ingest.hpp"
#include "divkit/semdiv.hpp"
#include "divkit/textstat.hpp"
#include "divkit/tokenize.hpp"
#include "oracles.hpp"
#include "synth.hpp"
#include "tempdir.hpp"

using namespace divkit;
using divkit::testing::Rng;
using divkit::testing::TempDir;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) detail = what;
        pass = pass && ok;
    }
};

std::size_t whitespace_words(const std::string& s) {
    std::istringstream in(s);
    std::size_t n = 0;
    std::string w;
    while (in >> w) ++n;
    return n;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

Outcome length_parity() {
    Outcome o;
    TempDir dir;
    divkit::testing::CorpusShape shape;
    shape.records = 10000;
    shape.prompts = 500;
    shape.min_words = 20;
    shape.vocab = 60;
    shape.with_logprobs = true;
    auto raw = divkit::testing::synth_corpus(2024, shape);
    for (auto& r : raw) {
        r.first.metrics = {};
        r.second.metrics = {};
    }
    write_corpus(raw, dir / "corpus.jsonl");

    double seconds = 0.0;
    std::string counts;
    for (auto method : {Method::Dns, Method::DnsLite}) {
        const auto start = std::chrono::steady_clock::now();
        auto corpus = read_corpus(dir / "corpus.jsonl", true);
        MetricConfig mc;
        mc.metrics = method == Method::Dns ? std::set<std::string, std::less<>>{"entropy"}
                                           : std::set<std::string, std::less<>>{"ttr", "maas"};
        for (auto& r : corpus) {
            for (auto* resp : {&r.first, &r.second}) {
                for (const auto& [k, v] : score_response(*resp, mc).values) resp->metrics.set(k, v);
            }
        }
        const auto cfg = FilterConfig::for_method(method);
        const auto kept = select_top_k(run_filter(corpus, cfg), cfg);
        const auto path = dir / (std::string(to_string(method)) + ".jsonl");
        write_pairs(kept, path, cfg.max_len_delta);
        const LengthDelta reported = length_delta_report(kept);
        seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

        const auto back = read_pairs(path);
        o.require(back.size() == kept.size(), "pair file size differs from kept pairs");
        long long sum = 0;
        for (const auto& p : back) {
            const long long d = static_cast<long long>(whitespace_words(p.chosen.text)) -
                                static_cast<long long>(whitespace_words(p.rejected.text));
            o.require(std::llabs(d) <= 5, "pair " + p.id + " has |dwc| = " + std::to_string(d));
            sum += d;
        }
        o.require(!back.empty(), "no pairs produced");
        if (!back.empty()) {
            const double mean = static_cast<double>(sum) / static_cast<double>(back.size());
            o.require(reported.mean == mean, "reported mean " + fmt(reported.mean) +
                                                 " != recomputed " + fmt(mean));
        }
        counts += std::string(to_string(method)) + " " + std::to_string(back.size()) + " pairs, ";
    }
    o.require(seconds < 10.0, "runtime " + fmt(seconds) + " s");
    if (o.pass) o.detail = counts + fmt(seconds) + " s";
    return o;
}

Outcome length_bias() {
    Outcome o;
    const auto corpus = divkit::testing::length_bias_corpus(7, 10000, 200);
    auto cfg = FilterConfig::for_method(Method::DivPo);
    const auto divpo = run_filter(corpus, cfg);
    const auto dns = run_filter(corpus, FilterConfig::for_method(Method::Dns));
    o.require(!divpo.empty() && !dns.empty(), "empty output");
    if (!o.pass) return o;
    const double d_divpo = length_delta_report(divpo).mean;
    const double d_dns = length_delta_report(dns).mean;
    o.require(d_divpo < -10.0, "DivPO mean dwc " + fmt(d_divpo));
    o.require(d_dns >= -5.0 && d_dns <= 5.0, "DNS mean dwc " + fmt(d_dns));
    if (o.pass) o.detail = "DivPO " + fmt(d_divpo) + ", DNS " + fmt(d_dns);
    return o;
}

TokenizedText letters(const std::string& s) {
    TokenizedText t;
    for (char c : s) t.tokens.emplace_back(1, c);
    return t;
}

Outcome metric_oracles() {
    Outcome o;
    Rng rng(31);
    double worst_se = 0.0;
    for (int i = 0; i < 20; ++i) {
        TokenizedText t;
        t.tokens = divkit::testing::random_tokens(rng, 42 + rng() % 159, 5 + rng() % 80);
        const double got = hdd(t, 42);
        const auto mc = oracle::hdd_monte_carlo(t.tokens, 42, 1000000, rng());
        const double diff = std::fabs(got - mc.mean);
        o.require(diff <= 3.0 * mc.standard_error + 1e-12,
                  "HD-D text " + std::to_string(i) + " off by " + fmt(diff / mc.standard_error) +
                      " SE");
        if (mc.standard_error > 0.0) worst_se = std::max(worst_se, diff / mc.standard_error);
        o.require(std::fabs(got - oracle::hdd_exact(t.tokens, 42)) <= 1e-12,
                  "HD-D text " + std::to_string(i) + " differs from the exact sum");
    }

    // Factor counts traced by hand at threshold 0.72.
    struct Traced {
        const char* seq;
        double want;
    };
    const Traced traced[] = {
        {"abcababcab", 5.0},  // forward 2 factors, backward 2 factors
        {"abcdefghij", 10.0},
        {"a", 1.0},
        {"aaaa", 2.0},
        {"abac", 0.5 * (4.0 + 4.0 / ((1.0 - 0.75) / (1.0 - 0.72)))},
    };
    for (const auto& c : traced) {
        const double got = mtld(letters(c.seq), 0.72);
        o.require(got == c.want, std::string("MTLD ") + c.seq + " = " + fmt(got));
    }

    for (int i = 0; i < 100; ++i) {
        TokenizedText t;
        t.tokens = divkit::testing::random_tokens(rng, 1 + rng() % 400, 3 + rng() % 200);
        const std::size_t w = 1 + rng() % 60;
        o.require(std::fabs(mattr(t, w) - oracle::mattr(t.tokens, w)) <= 1e-12,
                  "MATTR text " + std::to_string(i));
    }

    std::normal_distribution<double> g(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        std::vector<std::vector<double>> rows(2 + rng() % 150, std::vector<double>(1 + rng() % 64));
        for (auto& r : rows) {
            for (auto& x : r) x = g(rng);
        }
        o.require(std::fabs(dsi(EmbeddingMatrix::from_rows(rows)) - oracle::dsi(rows)) <= 1e-12,
                  "DSI matrix " + std::to_string(i));
    }
    if (o.pass) o.detail = "worst HD-D deviation " + fmt(worst_se) + " SE";
    return o;
}

Outcome filtering_oracle() {
    Outcome o;
    std::size_t compared = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        divkit::testing::CorpusShape shape;
        shape.records = 1000;
        shape.prompts = 40;
        shape.grid_scores = seed % 2 == 0;
        const auto corpus = divkit::testing::synth_corpus(seed * 7919, shape);
        const std::string tag = "seed " + std::to_string(seed);

        for (auto method : {Method::Dns, Method::DnsLite}) {
            auto cfg = FilterConfig::for_method(method);
            const auto got = dns_filter(corpus, cfg);
            const auto want = oracle::dns(corpus, cfg);
            std::set<std::string> a, b;
            for (const auto& p : got) a.insert(p.id);
            for (const auto& p : want) b.insert(p.id);
            o.require(a == b, tag + ": " + std::string(to_string(method)) + " id sets differ");

            cfg.top_k = 1 + seed * 17 % std::max<std::size_t>(got.size(), 1);
            std::vector<std::string> top;
            for (const auto& p : select_top_k(got, cfg)) top.push_back(p.id);
            o.require(top == oracle::top_k_ids(want, cfg.top_k), tag + ": top-k differs");
            ++compared;
        }

        for (auto pool : {DivpoPool::First, DivpoPool::Second, DivpoPool::Both}) {
            auto cfg = FilterConfig::for_method(Method::DivPo);
            cfg.divpo_pool = pool;
            const auto got = divpo_corpus(corpus, cfg);
            const auto want = oracle::divpo(corpus, cfg);
            std::set<std::string> a, b;
            for (const auto& p : got) {
                a.insert(p.id);
                const auto it = want.find(p.prompt_id);
                o.require(it != want.end() && it->second.chosen_text == p.chosen.text &&
                              it->second.rejected_text == p.rejected.text,
                          tag + ": DivPO choice differs for " + p.prompt_id);
            }
            for (const auto& [prompt, choice] : want) b.insert(prompt);
            o.require(a == b, tag + ": DivPO id sets differ");
            ++compared;
        }
    }
    if (o.pass) o.detail = std::to_string(compared) + " comparisons over 20 seeds";
    return o;
}

Outcome decile() {
    Outcome o;
    Rng rng(41);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 20 + rng() % 500;
        const std::size_t wc = 1 + rng() % 200;
        std::vector<ScorePoint> pts;
        std::vector<double> values(n);
        for (auto& v : values) {
            v = u(rng);
            pts.push_back({wc, v});
        }
        const auto map = build_map(pts, "m", 20);
        std::sort(values.begin(), values.end());
        const std::size_t j = rng() % n;
        const int got = dd(map, wc, values[j]);
        o.require(got == oracle::dd_rank(j, n),
                  "trial " + std::to_string(trial) + ": dd " + std::to_string(got));
    }

    std::vector<ScorePoint> pts;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < 5000; ++i) pts.push_back({5 + rng() % 100, unit(rng)});
    const auto map = build_map(pts, "m", 20);
    for (int i = 0; i < 100000; ++i) {
        const std::size_t wc = rng() % 150;
        double a = unit(rng);
        double b = unit(rng);
        if (a > b) std::swap(a, b);
        o.require(dd(map, wc, a) <= dd(map, wc, b), "monotonicity broken");
    }
    if (o.pass) o.detail = "1000 rank trials, 100000 ordered pairs";
    return o;
}

std::vector<double> load_fixture(const std::string& name) {
    std::ifstream in(std::string(DIVKIT_FIXTURES) + "/" + name);
    std::vector<double> v;
    double x;
    while (in >> x) v.push_back(x);
    return v;
}

Outcome statistics() {
    Outcome o;
    Rng rng(43);
    std::normal_distribution<double> g(0.0, 1.0);
    double worst_stat = 0.0;
    double worst_p = 0.0;
    auto check = [&](const std::vector<double>& a, const std::vector<double>& b,
                     const std::string& tag) {
        for (bool eq : {true, false}) {
            const auto got = ttest_ind(a, b, eq);
            const auto ref = oracle::ttest(a, b, eq);
            worst_stat = std::max(worst_stat, std::fabs(got.t_statistic - ref.t));
            worst_p = std::max(worst_p, std::fabs(got.p_value - ref.p));
            o.require(std::fabs(got.t_statistic - ref.t) <= 1e-9, tag + ": t");
            o.require(std::fabs(got.p_value - ref.p) <= 1e-6, tag + ": t-test p");
            const auto rev = ttest_ind(b, a, eq);
            o.require(rev.t_statistic == -got.t_statistic && rev.p_value == got.p_value,
                      tag + ": antisymmetry");
        }
        if (a.size() == b.size()) {
            const auto got = pearson(a, b);
            const auto ref = oracle::pearson(a, b);
            worst_stat = std::max(worst_stat, std::fabs(got.r - ref.r));
            worst_p = std::max(worst_p, std::fabs(got.p - ref.p));
            o.require(std::fabs(got.r - ref.r) <= 1e-9, tag + ": r");
            o.require(std::fabs(got.p - ref.p) <= 1e-6, tag + ": pearson p");
        }
    };

    const auto fa = load_fixture("dsi_sample_a70.txt");
    const auto fb = load_fixture("dsi_sample_b70.txt");
    o.require(fa.size() == 70 && fb.size() == 70, "n=70 fixtures missing");
    check(fa, fb, "fixture n=70");
    for (int i = 1; i < 50; ++i) {
        const std::size_t n = i % 5 == 0 ? 70 : 3 + rng() % 200;
        const std::size_t m = i % 3 == 0 ? n : 3 + rng() % 200;
        const double shift = 0.5 * g(rng);
        const double spread = 0.2 + std::fabs(g(rng));
        std::vector<double> a(n), b(m);
        for (auto& x : a) x = g(rng);
        for (std::size_t k = 0; k < m; ++k) {
            b[k] = shift + spread * g(rng) + (k < n ? 0.4 * a[k] : 0.0);
        }
        check(a, b, "dataset " + std::to_string(i));
    }
    if (o.pass) {
        o.detail = "worst |dstat| " + fmt(worst_stat) + ", worst |dp| " + fmt(worst_p);
    }
    return o;
}

Outcome determinism() {
    Outcome o;
    TempDir dir;
    divkit::testing::CorpusShape shape;
    shape.records = 2000;
    shape.with_logprobs = true;
    write_corpus(divkit::testing::synth_corpus(99, shape), dir / "corpus.jsonl");
    write_corpus(divkit::testing::synth_corpus(100, shape), dir / "tuned.jsonl");
    auto path = [&](const std::string& n) { return (dir / n).string(); };
    auto run = [&](std::vector<std::string> args, const std::string& what) {
        std::ostringstream out, err;
        const int code = divkit::cli::run(args, out, err);
        o.require(code == 0, what + " exited " + std::to_string(code) + ": " + err.str());
    };

    std::map<std::string, std::vector<std::string>> outputs;
    int idx = 0;
    for (const char* workers : {"1", "1", "8", "8"}) {
        const std::string t = std::to_string(idx++);
        run({"score", "-i", path("corpus.jsonl"), "-o", path("s" + t), "-j", workers, "-m",
             "entropy,ttr,mattr,maas,hdd,mtld,mtld_ma,ngram_div,comp_ratio"},
            "score");
        run({"score", "-i", path("tuned.jsonl"), "-o", path("t" + t), "-j", workers, "-m",
             "mattr"},
            "score");
        run({"filter", "-i", path("s" + t), "-o", path("f" + t), "-j", workers, "--method", "dns"},
            "filter");
        run({"build-map", "-i", path("s" + t), "-o", path("m" + t), "-j", workers, "--metric",
             "mattr"},
            "build-map");
        run({"dd-report", "-i", path("m" + t), "--base", path("s" + t), "--tuned", path("t" + t), "-o", path("d" + t), "-j", workers},
            "dd-report");
        for (const char* prefix : {"s", "t", "f", "m", "d"}) {
            outputs[prefix].push_back(divkit::testing::slurp(dir / (prefix + t)));
        }
    }
    for (const auto& [prefix, runs] : outputs) {
        for (const auto& r : runs) o.require(r == runs[0], std::string(prefix) + " output differs");
        o.require(!runs[0].empty(), std::string(prefix) + " output empty");
    }
    if (o.pass) o.detail = "score, filter, build-map, dd-report x {1,1,8,8} workers";
    return o;
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
    };
    const Criterion criteria[] = {
        {"length-parity", length_parity},
        {"length-bias", length_bias},
        {"metric-oracles", metric_oracles},
        {"filtering-oracle", filtering_oracle},
        {"decile-correctness", decile},
        {"statistics", statistics},
        {"determinism", determinism},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << " (" << o.detail << ")\n"
                  << std::flush;
        failures += o.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
