#include <doctest.h>

#include <chrono>
#include <random>
#include <sstream>
#include <thread>

#include "fvrank/evaluation.hpp"
#include "oracles.hpp"

using namespace fvr;

namespace {

Rank make_rank(const ItemId& query, std::vector<ItemId> order) {
    Rank rank;
    rank.query = query;
    for (std::size_t i = 0; i < order.size(); ++i)
        rank.entries.push_back({order[i], 1.0 / static_cast<double>(i + 1), i + 1});
    return rank;
}

Qrels qrels_of(const ItemId& query, std::vector<ItemId> relevant) {
    Qrels qrels;
    for (const auto& item : relevant) qrels.set(query, item, 1);
    return qrels;
}

} // namespace

TEST_CASE("ndcg hand computation") {
    const Rank rank = make_rank("q", {"d1", "d2", "d3"});
    const Qrels qrels = qrels_of("q", {"d1", "d3"});
    // DCG = 1 + 0 + 1/log2(4) = 1.5; IDCG = 1 + 1/log2(3)
    const double expected = 1.5 / (1.0 + 1.0 / std::log2(3.0));
    CHECK(ndcg_at_k(rank, qrels, 10) == doctest::Approx(expected).epsilon(1e-9));
    CHECK(ndcg_at_k(rank, qrels, 10) == doctest::Approx(0.91972).epsilon(1e-4));
}

TEST_CASE("ndcg bounds and degenerate cases") {
    const Rank perfect = make_rank("q", {"a", "b"});
    CHECK(ndcg_at_k(perfect, qrels_of("q", {"a", "b"}), 10) == doctest::Approx(1.0));

    const Rank miss = make_rank("q", {"x", "y"});
    CHECK(ndcg_at_k(miss, qrels_of("q", {"a"}), 10) == doctest::Approx(0.0));

    bool flagged = false;
    CHECK(ndcg_at_k(miss, Qrels{}, 10, &flagged) == 0.0);
    CHECK(flagged);

    CHECK_THROWS_AS(ndcg_at_k(perfect, Qrels{}, 0), InvalidInputError);
}

TEST_CASE("ndcg is invariant under swaps of equal-relevance items") {
    std::mt19937_64 rng(15);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<ItemId> order;
        for (int i = 0; i < 12; ++i) order.push_back("d" + std::to_string(i));
        std::shuffle(order.begin(), order.end(), rng);
        Qrels qrels;
        std::vector<ItemId> relevant, irrelevant;
        for (const auto& id : order)
            (rng() % 2 ? relevant : irrelevant).push_back(id);
        for (const auto& id : relevant) qrels.set("q", id, 1);

        const double base = ndcg_at_k(make_rank("q", order), qrels, 10);

        // swap two items of equal relevance
        auto swapped = order;
        const auto& pool = rng() % 2 && relevant.size() >= 2 ? relevant : irrelevant;
        if (pool.size() >= 2) {
            const auto a = std::find(swapped.begin(), swapped.end(), pool[0]);
            const auto b = std::find(swapped.begin(), swapped.end(), pool[1]);
            std::iter_swap(a, b);
            CHECK(ndcg_at_k(make_rank("q", swapped), qrels, 10) == doctest::Approx(base));
        }
    }
}

TEST_CASE("ns score counts relevant among the first four") {
    const Qrels qrels = qrels_of("q", {"r1", "r2", "r3", "r4", "r5"});
    CHECK(ns_score(make_rank("q", {"r1", "r2", "r3", "r4"}), qrels) == 4.0);
    CHECK(ns_score(make_rank("q", {"r1", "x", "r2", "y"}), qrels) == 2.0);
    CHECK(ns_score(make_rank("q", {"r1", "x"}), qrels) == 1.0); // shorter than 4
    CHECK(ns_score(make_rank("q", {"r1", "r2", "r3", "r4", "r5"}), qrels) == 4.0);

    std::mt19937_64 rng(77);
    for (int t = 0; t < 20; ++t) {
        std::vector<ItemId> order;
        for (int i = 0; i < 8; ++i) order.push_back("d" + std::to_string(i));
        std::shuffle(order.begin(), order.end(), rng);
        const double v = ns_score(make_rank("q", order), qrels_of("q", {order[rng() % 8]}));
        CHECK(v == std::floor(v));
        CHECK(v >= 0.0);
        CHECK(v <= 4.0);
    }
}

TEST_CASE("winning numbers: hand cases and quadruple-loop oracle") {
    SUBCASE("two methods, one cell") {
        PerformanceTable table;
        table.set("A", "d", "c", 0.9);
        table.set("B", "d", "c", 0.8);
        const auto wins = winning_numbers(table);
        CHECK(wins.at("A") == 1);
        CHECK(wins.at("B") == 0);
    }
    SUBCASE("ties award nothing") {
        PerformanceTable table;
        for (const char* m : {"A", "B", "C"})
            for (const char* c : {"c1", "c2"}) table.set(m, "d", c, 0.5);
        for (const auto& [method, wins] : winning_numbers(table)) {
            (void)method;
            CHECK(wins == 0);
        }
    }
    SUBCASE("incomplete grid is rejected with the missing cell named") {
        PerformanceTable table;
        table.set("A", "d", "c1", 0.9);
        table.set("B", "d", "c1", 0.8);
        table.set("A", "d", "c2", 0.7);
        try {
            winning_numbers(table);
            FAIL("expected InvalidInputError");
        } catch (const InvalidInputError& e) {
            CHECK(std::string(e.what()).find("(B, d, c2)") != std::string::npos);
        }
    }
    SUBCASE("random grids match the oracle and pair-count identity") {
        std::mt19937_64 rng(33);
        std::uniform_real_distribution<double> value(0.0, 1.0);
        for (int trial = 0; trial < 20; ++trial) {
            PerformanceTable table;
            std::size_t strict_pairs = 0;
            std::vector<std::string> methods = {"m1", "m2", "m3", "m4"};
            std::vector<std::pair<std::string, std::string>> cells;
            for (const char* d : {"d1", "d2", "d3"})
                for (const char* c : {"c1", "c2", "c3"}) cells.emplace_back(d, c);
            std::map<std::tuple<std::string, std::string, std::string>, double> raw;
            for (const auto& m : methods)
                for (const auto& [d, c] : cells) {
                    const double v = rng() % 4 == 0 ? 0.5 : value(rng); // inject ties
                    table.set(m, d, c, v);
                    raw[{m, d, c}] = v;
                }
            for (const auto& [d, c] : cells)
                for (const auto& a : methods)
                    for (const auto& b : methods)
                        if (a != b && raw[{a, d, c}] > raw[{b, d, c}]) ++strict_pairs;

            const auto actual = winning_numbers(table);
            const auto expected = oracle::winning_numbers(table);
            CHECK(actual == expected);
            std::size_t total = 0;
            for (const auto& [m, w] : actual) { (void)m; total += w; }
            CHECK(total == strict_pairs);
        }
    }
}

TEST_CASE("timed_query measures ordered stage components") {
    using namespace std::chrono_literals;
    PipelineStages stages;
    stages.extract = [] { std::this_thread::sleep_for(1ms); };
    stages.embed = [] { std::this_thread::sleep_for(2ms); };
    stages.retrieve = [] { std::this_thread::sleep_for(3ms); };

    const TimingReport report = timed_query(stages, 5);
    REQUIRE(report.repetitions.size() == 5);
    const StageTimes mean = report.mean();

    CHECK(mean.extract_ms >= 1.0);
    CHECK(mean.embed_ms >= 2.0);
    CHECK(mean.retrieve_ms >= 3.0);
    CHECK(mean.extract_ms < mean.embed_ms);
    CHECK(mean.embed_ms < mean.retrieve_ms);
    // sleeps overshoot by scheduler latency only; 20%-ish headroom
    CHECK(mean.extract_ms <= 1.0 + 0.8);
    CHECK(mean.embed_ms <= 2.0 + 0.8);
    CHECK(mean.retrieve_ms <= 3.0 + 0.8);

    for (const auto& rep : report.repetitions) {
        const double component_sum = rep.extract_ms + rep.embed_ms + rep.retrieve_ms;
        CHECK(std::abs(rep.total_ms - component_sum) < 1.0);
    }
}

TEST_CASE("run_protocol evaluates every query and aggregates the mean") {
    // two-ranker store over four items; method = pass-through of ranker r0
    std::mt19937_64 rng(55);
    const RankStore store = oracle::random_store(rng, 2, 3, 4);
    Qrels qrels;
    for (const auto& q : store.queries())
        for (const auto& other : store.queries())
            if (q[1] == other[1] || true) qrels.set(q, other, q == other ? 1 : 0);

    ProtocolOptions options;
    options.timing_repetitions = 2;
    options.metric_cutoff = 3;

    const auto factory = [&store](const ItemId& query, Rank& out) {
        PipelineStages stages;
        stages.retrieve = [&store, query, &out] { out = store.rank("r0", query); };
        return stages;
    };
    const ProtocolResult result =
        run_protocol(store, "ranker:r0", factory, qrels, Metric::NdcgAtK, options);

    CHECK(result.method == "ranker:r0");
    REQUIRE(result.per_query.size() == store.queries().size());

    double expected_mean = 0.0;
    for (const auto& query : store.queries())
        expected_mean += ndcg_at_k(store.rank("r0", query), qrels, 3);
    expected_mean /= static_cast<double>(store.queries().size());
    CHECK(result.mean_metric == doctest::Approx(expected_mean));

    // per-query values sorted by query id and individually correct
    for (std::size_t i = 1; i < result.per_query.size(); ++i)
        CHECK(result.per_query[i - 1].first < result.per_query[i].first);
    for (const auto& [query, value] : result.per_query)
        CHECK(value == doctest::Approx(ndcg_at_k(store.rank("r0", query), qrels, 3)));
}

TEST_CASE("run_protocol flags zero-relevant queries instead of skipping them") {
    std::mt19937_64 rng(56);
    const RankStore store = oracle::random_store(rng, 1, 2, 3);
    Qrels qrels; // empty: nothing relevant anywhere

    ProtocolOptions options;
    options.timing_repetitions = 0;
    const auto factory = [&store](const ItemId& query, Rank& out) {
        PipelineStages stages;
        stages.retrieve = [&store, query, &out] { out = store.rank("r0", query); };
        return stages;
    };
    const ProtocolResult result =
        run_protocol(store, "ranker:r0", factory, qrels, Metric::NdcgAtK, options);
    CHECK(result.mean_metric == 0.0);
    CHECK(result.zero_relevant_queries.size() == store.queries().size());
}

TEST_CASE("qrels parsing: explicit and class-derived") {
    std::istringstream explicit_qrels("q1 d1 1\nq1 d2 0\n# comment\nq2 d1 1\n");
    const Qrels a = Qrels::parse(explicit_qrels, "qrels.txt");
    CHECK(a.relevance("q1", "d1") == 1);
    CHECK(a.relevance("q1", "d2") == 0);
    CHECK(a.relevance("q2", "d1") == 1);
    CHECK(a.relevant_count("q1") == 1);

    std::istringstream classes("a k1\nb k1\nc k2\n");
    const Qrels b = Qrels::parse_class_file(classes, "classes.txt");
    CHECK(b.relevance("a", "b") == 1);
    CHECK(b.relevance("a", "a") == 1); // self counts
    CHECK(b.relevance("a", "c") == 0);
    CHECK(b.relevant_count("c") == 1);

    std::istringstream bad("q1 d1 2\n");
    CHECK_THROWS_AS(Qrels::parse(bad, "bad.txt"), ParseError);
    std::istringstream dup("a k1\na k2\n");
    CHECK_THROWS_AS(Qrels::parse_class_file(dup, "dup.txt"), ParseError);
}
