#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "divkit/error.hpp"
#include "divkit/filter.hpp"
#include "divkit/tokenize.hpp"
#include "expect.hpp"
#include "oracles.hpp"
#include "synth.hpp"

using namespace divkit;
using divkit::testing::error_of;

namespace {

ResponseRecord resp(const std::string& text, double q, double d) {
    ResponseRecord r;
    r.text = text;
    r.quality_score = q;
    r.metrics.set("entropy", d);
    return r;
}

GenerationRecord rec(const std::string& id, ResponseRecord first, ResponseRecord second,
                     const std::string& prompt = "p") {
    GenerationRecord g;
    g.id = id;
    g.prompt_id = prompt;
    g.prompt_text = "prompt " + prompt;
    g.three_words = {"a", "b", "c"};
    g.model_id = "m";
    g.first = std::move(first);
    g.second = std::move(second);
    return g;
}

std::vector<std::string> ids(const std::vector<PreferencePair>& pairs) {
    std::vector<std::string> out;
    for (const auto& p : pairs) out.push_back(p.id);
    return out;
}

std::set<std::string> id_set(const std::vector<PreferencePair>& pairs) {
    const auto v = ids(pairs);
    return {v.begin(), v.end()};
}

std::set<std::string> id_set(const std::vector<oracle::KeptPair>& pairs) {
    std::set<std::string> out;
    for (const auto& p : pairs) out.insert(p.id);
    return out;
}

}  // namespace

TEST_CASE("dns: a record better on every axis is kept") {
    const std::vector<GenerationRecord> corpus = {
        rec("r1", resp("a b c d", 0.2, 1.0), resp("e f g h", 0.9, 2.0)),
    };
    FilterStats stats;
    const auto pairs = dns_filter(corpus, FilterConfig{}, &stats);
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].chosen.text == "e f g h");
    CHECK(pairs[0].rejected.text == "a b c d");
    CHECK(pairs[0].diversity_gain == 1.0);
    CHECK(pairs[0].quality_gain == doctest::Approx(0.7));
    CHECK(pairs[0].method == Method::Dns);
    CHECK(pairs[0].id == "r1");
    CHECK(stats.kept == 1);
    CHECK(stats.quality_floor == 0.2);
}

TEST_CASE("dns: identical responses are dropped") {
    const std::vector<GenerationRecord> corpus = {
        rec("r1", resp("same text", 0.5, 1.0), resp("same text", 0.5, 1.0)),
    };
    FilterStats stats;
    CHECK(dns_filter(corpus, FilterConfig{}, &stats).empty());
    CHECK(stats.dropped_by_rule[1] == 1);
}

TEST_CASE("dns: each rule drops exactly its record, in any arrangement") {
    // First-response qualities {0.1, 0.2, 0.3, 0.4}; median 0.25.
    const std::vector<GenerationRecord> base = {
        rec("q-floor", resp("a b c", 0.1, 1.0), resp("a b d", 0.2, 2.0)),          // rule 1
        rec("q-gain", resp("a b c", 0.4, 1.0), resp("a b d", 0.35, 2.0)),          // rule 2
        rec("d-gain", resp("a b c", 0.2, 2.0), resp("a b d", 0.9, 2.0)),           // rule 3
        rec("length", resp("a", 0.3, 1.0), resp("a b c d e f g", 0.9, 2.0)),       // rule 4
    };
    std::vector<std::size_t> order{0, 1, 2, 3};
    do {
        std::vector<GenerationRecord> corpus;
        for (auto i : order) corpus.push_back(base[i]);
        FilterStats stats;
        CHECK(dns_filter(corpus, FilterConfig{}, &stats).empty());
        CHECK(stats.dropped_by_rule == std::array<std::size_t, 4>{1, 1, 1, 1});
        CHECK(oracle::dns(corpus, FilterConfig{}).empty());
    } while (std::next_permutation(order.begin(), order.end()));
}

TEST_CASE("dns: missing scores") {
    auto r2 = resp("x y", 0.9, 2.0);
    r2.metrics.values.clear();
    const std::vector<GenerationRecord> corpus = {
        rec("ok", resp("a b", 0.1, 1.0), resp("c d", 0.9, 2.0)),
        rec("broken", resp("a b", 0.1, 1.0), r2),
    };
    try {
        dns_filter(corpus, FilterConfig{});
        FAIL("expected MissingScore");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingScore);
        CHECK(std::string(e.what()).find("broken") != std::string::npos);
        CHECK(std::string(e.what()).find("second") != std::string::npos);
        CHECK(std::string(e.what()).find("entropy") != std::string::npos);
    }
    FilterConfig cfg;
    cfg.skip_missing = true;
    FilterStats stats;
    const auto pairs = dns_filter(corpus, cfg, &stats);
    CHECK(stats.skipped_missing == 1);
    CHECK(ids(pairs) == std::vector<std::string>{"ok"});
}

TEST_CASE("dns: rule-1 percentile is computed after dropping records with missing scores") {
    // With the incomplete record dropped, the median of first-response quality is 0.5,
    // which "mid" clears. Counting the dropped record's 0.9 would raise it to 0.7.
    auto d_missing = resp("a b", 0.9, 1.0);
    d_missing.metrics.values.clear();
    const std::vector<GenerationRecord> corpus = {
        rec("low", resp("a b", 0.1, 1.0), resp("c d", 0.2, 2.0)),
        rec("mid", resp("a b", 0.5, 1.0), resp("c d", 0.6, 2.0)),
        rec("high", resp("a b", 0.9, 1.0), resp("c d", 0.95, 2.0)),
        rec("gone", resp("a b", 0.9, 1.0), d_missing),
    };
    FilterConfig cfg;
    cfg.skip_missing = true;
    FilterStats stats;
    const auto pairs = dns_filter(corpus, cfg, &stats);
    CHECK(stats.quality_floor == 0.5);
    CHECK(ids(pairs) == std::vector<std::string>{"mid", "high"});
}

TEST_CASE("dns lite uses ttr and maas, with entropy gain when available") {
    auto lite = FilterConfig::for_method(Method::DnsLite);
    CHECK(lite.diversity_metric == "ttr");
    CHECK(lite.quality_metric == "maas");
    auto mk = [](double maas_v, double ttr_v, std::optional<double> ent) {
        ResponseRecord r;
        r.text = "w x y z";
        r.metrics.set("maas", maas_v);
        r.metrics.set("ttr", ttr_v);
        if (ent) r.metrics.set("entropy", *ent);
        return r;
    };
    std::vector<GenerationRecord> corpus = {
        rec("a", mk(0.1, 0.5, 1.0), mk(0.3, 0.7, 2.0)),
        rec("b", mk(0.1, 0.5, 2.0), mk(0.3, 0.9, 1.5)),  // entropy gain negative
    };
    FilterStats stats;
    auto pairs = dns_filter(corpus, lite, &stats);
    CHECK(stats.gain_metric == "entropy");
    CHECK(ids(pairs) == std::vector<std::string>{"a"});
    CHECK(stats.dropped_nonpositive_gain == 1);
    CHECK(pairs[0].diversity_gain == 1.0);
    CHECK(pairs[0].method == Method::DnsLite);

    corpus[1].second.metrics.values.erase("entropy");
    pairs = dns_filter(corpus, lite, &stats);
    CHECK(stats.gain_metric == "ttr");
    CHECK(pairs.size() == 2);
    CHECK(pairs[1].diversity_gain == doctest::Approx(0.4));

    lite.gain_metric = "maas";
    pairs = dns_filter(corpus, lite, &stats);
    CHECK(stats.gain_metric == "maas");
    CHECK(pairs[0].diversity_gain == doctest::Approx(0.2));
}

TEST_CASE("dns matches the brute-force filter and ignores input order") {
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        divkit::testing::CorpusShape shape;
        shape.records = 400;
        shape.grid_scores = seed % 2 == 0;
        auto corpus = divkit::testing::synth_corpus(seed, shape);
        for (auto method : {Method::Dns, Method::DnsLite}) {
            const auto cfg = FilterConfig::for_method(method);
            const auto got = dns_filter(corpus, cfg);
            const auto want = oracle::dns(corpus, cfg);
            CHECK(id_set(got) == id_set(want));
            for (const auto& p : got) {
                CHECK_NOTHROW(validate_pair(p, cfg.max_len_delta));
            }
            auto shuffled = corpus;
            std::shuffle(shuffled.begin(), shuffled.end(), divkit::testing::Rng(seed));
            CHECK(id_set(dns_filter(shuffled, cfg)) == id_set(got));
            CHECK(dns_filter(corpus, cfg, nullptr, 4) == got);
        }
    }
}

TEST_CASE("divpo examples") {
    FilterConfig cfg = FilterConfig::for_method(Method::DivPo);
    std::vector<ResponseRecord> pool = {resp("q1", 1, 4), resp("q2", 2, 3), resp("q3", 3, 2),
                                        resp("q4", 4, 1)};
    auto pair = divpo_filter("p", "prompt", pool, cfg);
    REQUIRE(pair);
    CHECK(pair->chosen.text == "q4");
    CHECK(pair->rejected.text == "q1");
    CHECK(pair->quality_gain == 3.0);
    CHECK(pair->diversity_gain == -3.0);
    CHECK(pair->id == "p");
    CHECK(pair->method == Method::DivPo);

    CHECK(!divpo_filter("p", "prompt", std::vector<ResponseRecord>{resp("only", 1, 1)}, cfg));
    CHECK(!divpo_filter("p", "prompt", std::vector<ResponseRecord>{}, cfg));

    std::vector<ResponseRecord> flat = {resp("a", 5, 2), resp("b", 5, 9), resp("c", 5, 1),
                                        resp("d", 5, 9)};
    pair = divpo_filter("p", "prompt", flat, cfg);
    REQUIRE(pair);
    CHECK(pair->chosen.text == "b");  // first of the tied maxima
    CHECK(pair->rejected.text == "c");
}

TEST_CASE("divpo with every response tied on both scores yields nothing") {
    FilterConfig cfg = FilterConfig::for_method(Method::DivPo);
    // Both picks fall on index 0.
    std::vector<ResponseRecord> same = {resp("a", 5, 3), resp("b", 5, 3), resp("c", 5, 3)};
    CHECK(!divpo_filter("p", "t", same, cfg));
}

TEST_CASE("divpo matches the brute-force selection") {
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        divkit::testing::CorpusShape shape;
        shape.records = 300;
        shape.prompts = 30;
        shape.grid_scores = seed % 2 == 1;
        const auto corpus = divkit::testing::synth_corpus(100 + seed, shape);
        for (auto pool : {DivpoPool::Both, DivpoPool::First, DivpoPool::Second}) {
            auto cfg = FilterConfig::for_method(Method::DivPo);
            cfg.divpo_pool = pool;
            FilterStats stats;
            const auto got = divpo_corpus(corpus, cfg, &stats, 3);
            const auto want = oracle::divpo(corpus, cfg);
            REQUIRE(got.size() == want.size());
            CHECK(stats.pools == 30);
            for (const auto& p : got) {
                REQUIRE(want.count(p.prompt_id) == 1);
                CHECK(p.chosen.text == want.at(p.prompt_id).chosen_text);
                CHECK(p.rejected.text == want.at(p.prompt_id).rejected_text);
                CHECK(*p.chosen.quality_score >= *p.rejected.quality_score);
            }
        }
    }
}

TEST_CASE("select_top_k") {
    std::vector<PreferencePair> pairs(5);
    for (int i = 0; i < 5; ++i) {
        pairs[i].id = std::string(1, static_cast<char>('a' + i));
        pairs[i].diversity_gain = 5 - i;
    }
    FilterConfig cfg;
    cfg.top_k = 3;
    CHECK(ids(select_top_k(pairs, cfg)) == std::vector<std::string>{"a", "b", "c"});
    cfg.top_k = 50;
    auto reversed = pairs;
    std::reverse(reversed.begin(), reversed.end());
    CHECK(ids(select_top_k(reversed, cfg)) == ids(pairs));

    std::vector<PreferencePair> tied(2);
    tied[0].id = "b";
    tied[1].id = "a";
    tied[0].diversity_gain = tied[1].diversity_gain = 1.0;
    for (int run = 0; run < 3; ++run) {
        CHECK(ids(select_top_k(tied, cfg)) == std::vector<std::string>{"a", "b"});
    }
}

TEST_CASE("property: select_top_k is idempotent and matches repeated extraction") {
    divkit::testing::Rng rng(83);
    std::uniform_int_distribution<int> gain(0, 6);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<PreferencePair> pairs(rng() % 40);
        std::vector<oracle::KeptPair> plain;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            pairs[i].id = "id" + std::to_string(rng() % 1000) + "-" + std::to_string(i);
            pairs[i].diversity_gain = gain(rng) / 2.0;
            plain.push_back({pairs[i].id, pairs[i].diversity_gain, 0});
        }
        FilterConfig cfg;
        cfg.top_k = rng() % 30;
        const auto once = select_top_k(pairs, cfg);
        CHECK(select_top_k(once, cfg) == once);
        CHECK(ids(once) == oracle::top_k_ids(plain, cfg.top_k));
    }
}

TEST_CASE("length_delta_report") {
    auto mk = [](const std::string& c, const std::string& r) {
        PreferencePair p;
        p.chosen.text = c;
        p.rejected.text = r;
        return p;
    };
    const std::vector<PreferencePair> zero = {mk("a b", "c d"), mk("a", "b")};
    auto ld = length_delta_report(zero);
    CHECK(ld.mean == 0.0);
    CHECK(ld.std == 0.0);
    const std::vector<PreferencePair> pm = {mk("a", "b c d"), mk("a b c", "d")};
    ld = length_delta_report(pm);
    CHECK(ld.mean == 0.0);
    CHECK(ld.std == 2.0);
    CHECK(error_of([] { length_delta_report({}); }) == ErrorCode::EmptyInput);
}

TEST_CASE("filter configuration validation") {
    FilterConfig cfg;
    cfg.max_len_delta = -1;
    CHECK(error_of([&] { cfg.validate(); }) == ErrorCode::InvalidArgument);
    cfg = FilterConfig{};
    cfg.divpo_lower_pct = 80;
    CHECK(error_of([&] { cfg.validate(); }) == ErrorCode::InvalidArgument);
    cfg = FilterConfig{};
    cfg.divpo_upper_pct = 100;
    CHECK(error_of([&] { cfg.validate(); }) == ErrorCode::InvalidArgument);
    cfg = FilterConfig{};
    cfg.method = Method::DivPo;
    CHECK(error_of([&] { dns_filter({}, cfg); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("length-bias mechanism: DivPO favours short responses, DNS does not") {
    const auto corpus = divkit::testing::length_bias_corpus(7, 4000, 100);
    const auto divpo = run_filter(corpus, FilterConfig::for_method(Method::DivPo));
    const auto dns = run_filter(corpus, FilterConfig::for_method(Method::Dns));
    REQUIRE(!divpo.empty());
    REQUIRE(!dns.empty());
    CHECK(length_delta_report(divpo).mean < 0.0);
    const double m = length_delta_report(dns).mean;
    CHECK(m >= -5.0);
    CHECK(m <= 5.0);
}
