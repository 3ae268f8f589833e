#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "fvrank/core.hpp"
#include "fvrank/manifest.hpp"

using namespace fvr;

namespace {

Rank raw_rank(const std::string& ranker, const ItemId& query,
              std::vector<std::pair<ItemId, double>> scored) {
    Rank rank;
    rank.ranker = ranker;
    rank.query = query;
    for (std::size_t i = 0; i < scored.size(); ++i)
        rank.entries.push_back({scored[i].first, scored[i].second, i + 1});
    return rank;
}

} // namespace

TEST_CASE("normalize_scores min-max endpoints") {
    const Rank rank = raw_rank("r", "q", {{"a", 0.0}, {"b", 2.0}, {"c", 4.0}});
    const Rank out = normalize_scores(rank, NormalizationMode::MinMaxInvert);
    REQUIRE(out.entries.size() == 3);
    CHECK(out.entries[0].score == doctest::Approx(1.0));
    CHECK(out.entries[1].score == doctest::Approx(0.5));
    CHECK(out.entries[2].score == doctest::Approx(0.0));
    CHECK(out.entries[0].item == "a");
    CHECK(out.entries[2].position == 3);
}

TEST_CASE("normalize_scores reciprocal") {
    const Rank out = normalize_scores(raw_rank("r", "q", {{"a", 3.0}}),
                                      NormalizationMode::ReciprocalInvert);
    CHECK(out.entries[0].score == doctest::Approx(0.25));
}

TEST_CASE("normalize_scores already-similarity rescales by max") {
    const Rank out = normalize_scores(raw_rank("r", "q", {{"a", 8.0}, {"b", 4.0}}),
                                      NormalizationMode::AlreadySimilarity);
    CHECK(out.entries[0].score == doctest::Approx(1.0));
    CHECK(out.entries[1].score == doctest::Approx(0.5));
}

TEST_CASE("normalize_scores degenerate and error cases") {
    const Rank constant = raw_rank("r", "q", {{"a", 2.0}, {"b", 2.0}});
    const Rank out = normalize_scores(constant, NormalizationMode::MinMaxInvert);
    CHECK(out.entries[0].score == 1.0);
    CHECK(out.entries[1].score == 1.0);

    CHECK_THROWS_AS(normalize_scores(raw_rank("r", "q", {{"a", -0.5}}),
                                     NormalizationMode::MinMaxInvert),
                    InvalidInputError);
    CHECK_THROWS_AS(normalize_scores(Rank{}, NormalizationMode::MinMaxInvert), InvalidInputError);
}

TEST_CASE("normalize_scores preserves permutation and bounds on random ranks") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> dissim(0.0, 5.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::pair<ItemId, double>> scored;
        const std::size_t n = 1 + rng() % 12;
        for (std::size_t i = 0; i < n; ++i) scored.emplace_back("x" + std::to_string(i), dissim(rng));
        std::sort(scored.begin(), scored.end(),
                  [](const auto& a, const auto& b) { return a.second < b.second; });
        const Rank raw = raw_rank("r", "q", scored);

        for (auto mode : {NormalizationMode::MinMaxInvert, NormalizationMode::ReciprocalInvert}) {
            const Rank out = normalize_scores(raw, mode);
            REQUIRE(out.entries.size() == raw.entries.size());
            for (std::size_t i = 0; i < out.entries.size(); ++i) {
                CHECK(out.entries[i].item == raw.entries[i].item);
                CHECK(out.entries[i].position == raw.entries[i].position);
                CHECK(out.entries[i].score >= 0.0);
                CHECK(out.entries[i].score <= 1.0);
                if (i > 0) CHECK(out.entries[i].score <= out.entries[i - 1].score);
            }
            if (mode == NormalizationMode::MinMaxInvert)
                CHECK(out.entries[0].score == doctest::Approx(1.0));
            CHECK_NOTHROW(out.validate());
        }
    }
}

TEST_CASE("exact_search sorts, breaks ties by id, truncates") {
    const Rank out = exact_search({{"a", 0.3}, {"b", 0.1}, {"c", 0.2}});
    REQUIRE(out.entries.size() == 3);
    CHECK(out.entries[0].item == "b");
    CHECK(out.entries[1].item == "c");
    CHECK(out.entries[2].item == "a");

    const Rank tied = exact_search({{"b", 0.5}, {"a", 0.5}});
    CHECK(tied.entries[0].item == "a");
    CHECK(tied.entries[1].item == "b");

    const Rank cut = exact_search({{"a", 0.3}, {"b", 0.1}, {"c", 0.2}}, 2);
    REQUIRE(cut.entries.size() == 2);
    CHECK(cut.entries[1].position == 2);

    CHECK_THROWS_AS(exact_search({}), InvalidInputError);
}

TEST_CASE("exact_search matches a stable-sort oracle on random instances") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> dissim(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::pair<ItemId, double>> comparisons;
        for (int i = 0; i < 100; ++i)
            comparisons.emplace_back("d" + std::to_string(i), dissim(rng));

        auto expected = comparisons;
        std::stable_sort(expected.begin(), expected.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second < b.second;
            return a.first < b.first;
        });

        const Rank out = exact_search(comparisons);
        REQUIRE(out.entries.size() == expected.size());
        for (std::size_t i = 0; i < expected.size(); ++i) {
            CHECK(out.entries[i].item == expected[i].first);
            CHECK(out.entries[i].score == expected[i].second);
            CHECK(out.entries[i].position == i + 1);
        }
    }
}

TEST_CASE("rank store put/lookup and subset") {
    RankStore store({"r1", "r2"}, 3);
    store.put(raw_rank("r1", "a", {{"a", 1.0}, {"b", 0.5}}));
    store.put(raw_rank("r2", "a", {{"a", 1.0}}));
    store.put(raw_rank("r1", "b", {{"b", 1.0}, {"a", 0.4}}));
    store.put(raw_rank("r2", "b", {{"b", 1.0}}));

    CHECK(store.rank_count() == 4);
    CHECK(store.rank("r1", "b").entries.size() == 2);
    CHECK_THROWS_AS(store.rank("r1", "zz"), IncompleteStoreError);
    CHECK_THROWS_AS(store.put(raw_rank("r9", "a", {{"a", 1.0}})), InvalidInputError);
    CHECK_THROWS_AS(store.put(raw_rank("r1", "a", {{"a", 1.0}})), InvalidInputError);

    const RankSet set = store.rank_set("a");
    REQUIRE(set.ranks.size() == 2);
    CHECK(set.ranks[0].ranker == "r1");
    CHECK(set.ranks[1].ranker == "r2");

    const RankStore narrowed = store.subset({"r2"});
    CHECK(narrowed.rankers().size() == 1);
    CHECK(narrowed.rank_count() == 2);
    CHECK_NOTHROW(narrowed.verify_closed_world());

    CHECK(store.queries() == std::vector<ItemId>{"a", "b"});
}

TEST_CASE("closed-world verification names offenders") {
    RankStore store({"r1"}, 3);
    store.put(raw_rank("r1", "a", {{"a", 1.0}, {"c", 0.5}}));
    try {
        store.verify_closed_world();
        FAIL("expected IncompleteStoreError");
    } catch (const IncompleteStoreError& e) {
        CHECK(std::string(e.what()).find("(r1, c)") != std::string::npos);
    }
}

TEST_CASE("run file parsing: happy path, comments, errors") {
    std::istringstream good(
        "# run for two rankers\n"
        "q1 r1 d1 1 0.1\n"
        "q1 r1 d2 2 0.4\n"
        "\n"
        "q1 r2 d2 1 0.2  # inline comment\n");
    const auto ranks = parse_run_file(good, "good.run");
    REQUIRE(ranks.size() == 2);
    CHECK(ranks[0].ranker == "r1");
    CHECK(ranks[0].entries.size() == 2);
    CHECK(ranks[1].ranker == "r2");

    std::istringstream missing_field("q1 r1 d1 1\n");
    CHECK_THROWS_AS(parse_run_file(missing_field, "bad.run"), ParseError);

    std::istringstream bad_score("q1 r1 d1 1 zebra\n");
    try {
        parse_run_file(bad_score, "bad.run");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("bad.run:1") != std::string::npos);
    }

    std::istringstream gap("q1 r1 d1 1 0.1\nq1 r1 d2 3 0.4\n");
    CHECK_THROWS_AS(parse_run_file(gap, "gap.run"), ParseError);
}

namespace {

/// Writes a complete little fixture: 2 rankers x 4 items, run depth 4.
std::filesystem::path write_tiny_fixture(std::size_t cutoff, std::size_t depth = 4) {
    const auto dir =
        std::filesystem::temp_directory_path() / ("fvr_core_fixture_" + std::to_string(cutoff));
    std::filesystem::create_directories(dir);
    const std::vector<ItemId> items = {"d1", "d2", "d3", "d4"};
    for (const std::string ranker : {"r1", "r2"}) {
        std::ofstream run(dir / (ranker + ".run"));
        for (const auto& query : items) {
            // distances: cyclic shift so every ranker covers every item
            std::vector<ItemId> order = items;
            std::rotate(order.begin(),
                        order.begin() + (std::find(order.begin(), order.end(), query) -
                                         order.begin()),
                        order.end());
            for (std::size_t pos = 0; pos < depth; ++pos)
                run << query << ' ' << ranker << ' ' << order[pos] << ' ' << pos + 1 << ' '
                    << 0.1 * static_cast<double>(pos) << '\n';
        }
    }
    std::ofstream manifest(dir / "manifest.txt");
    manifest << "[collection]\nname = tiny\nL = " << cutoff << "\n\n[items]\n";
    for (const auto& item : items) manifest << "item = " << item << "\n";
    manifest << "\n[ranker r1]\nmode = min-max-invert\nrun = r1.run\n";
    manifest << "\n[ranker r2]\nmode = min-max-invert\nrun = r2.run\n";
    return dir;
}

} // namespace

TEST_CASE("load_rank_store: counts, truncation, completeness") {
    const auto dir = write_tiny_fixture(3);
    const Manifest manifest = parse_manifest(dir / "manifest.txt");
    CHECK(manifest.name == "tiny");
    CHECK(manifest.cutoff == 3);

    const RankStore store = load_rank_store(manifest);
    CHECK(store.rank_count() == 8);
    for (const auto& query : manifest.items)
        for (const auto& ranker : store.rankers())
            CHECK(store.rank(ranker, query).entries.size() == 3); // truncated from 4

    // top entry is the query itself at similarity 1.0 after min-max
    CHECK(store.rank("r1", "d2").entries[0].item == "d2");
    CHECK(store.rank("r1", "d2").entries[0].score == doctest::Approx(1.0));
}

TEST_CASE("load_rank_store: missing (ranker, query) pair is reported") {
    const auto dir = write_tiny_fixture(2);
    // rewrite r2.run without query d3
    {
        std::ifstream in(dir / "r2.run");
        std::stringstream keep;
        std::string line;
        while (std::getline(in, line))
            if (line.rfind("d3 ", 0) != 0) keep << line << '\n';
        std::ofstream out(dir / "r2.run");
        out << keep.str();
    }
    const Manifest manifest = parse_manifest(dir / "manifest.txt");
    try {
        load_rank_store(manifest);
        FAIL("expected IncompleteStoreError");
    } catch (const IncompleteStoreError& e) {
        CHECK(std::string(e.what()).find("(r2, d3)") != std::string::npos);
    }
}

TEST_CASE("global normalization scope shares one transform per ranker") {
    const auto dir = write_tiny_fixture(4);
    {
        std::ofstream manifest(dir / "manifest.txt");
        manifest << "[collection]\nname = tiny\nL = 4\nscope = global\n\n[items]\n";
        for (const auto& item : {"d1", "d2", "d3", "d4"}) manifest << "item = " << item << "\n";
        manifest << "\n[ranker r1]\nmode = min-max-invert\nrun = r1.run\n";
        manifest << "\n[ranker r2]\nmode = min-max-invert\nrun = r2.run\n";
    }
    const RankStore store = load_rank_store(parse_manifest(dir / "manifest.txt"));
    // distances are 0.0/0.1/0.2/0.3 in every rank, so global min/max ==
    // per-rank min/max and scores match the per-rank fixture exactly
    CHECK(store.rank("r1", "d1").entries[0].score == doctest::Approx(1.0));
    CHECK(store.rank("r1", "d1").entries[3].score == doctest::Approx(0.0));
}
