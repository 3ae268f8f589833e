#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "fvrank/sparse_index.hpp"
#include "fvrank/synth.hpp"
#include "oracles.hpp"

using namespace fvr;

namespace {

FusionVector vec_of(std::uint64_t dim, std::vector<std::pair<std::uint64_t, double>> pairs) {
    return FusionVector::from_pairs(dim, std::move(pairs));
}

} // namespace

TEST_CASE("cosine dissimilarity basics") {
    const FusionVector a = vec_of(4, {{0, 1.0}, {2, 2.0}});
    const FusionVector b = vec_of(4, {{1, 3.0}, {3, 1.0}});

    CHECK(cosine_dissimilarity(a, a) == doctest::Approx(0.0));
    CHECK(cosine_dissimilarity(a, b) == doctest::Approx(1.0)); // disjoint supports
    CHECK(cosine_dissimilarity(a, vec_of(4, {})) == 1.0);      // zero vector convention
    CHECK_THROWS_AS(cosine_dissimilarity(a, vec_of(5, {{0, 1.0}})), InvalidInputError);
}

TEST_CASE("cosine dissimilarity matches the dense oracle on random sparse pairs") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const FusionVector a = oracle::random_sparse_vector(rng, 64, 20);
        const FusionVector b = oracle::random_sparse_vector(rng, 64, 20);
        const double actual = cosine_dissimilarity(a, b);
        const double expected = oracle::cosine_dissimilarity(a, b);
        CHECK(actual == doctest::Approx(expected).epsilon(1e-12));
        CHECK(actual >= 0.0);
        CHECK(actual <= 1.0);
        CHECK(actual == doctest::Approx(cosine_dissimilarity(b, a)));
    }
}

TEST_CASE("collection add validates dimension and duplicates") {
    VectorCollection coll(8);
    coll.add("a", vec_of(8, {{1, 1.0}}));
    CHECK_THROWS_AS(coll.add("a", vec_of(8, {{1, 1.0}})), InvalidInputError);
    CHECK_THROWS_AS(coll.add("b", vec_of(9, {{1, 1.0}})), InvalidInputError);
    CHECK(coll.find("a") != nullptr);
    CHECK(coll.find("zz") == nullptr);
    CHECK(coll.norm_at(0) == doctest::Approx(1.0));
}

TEST_CASE("brute force search: self match, full permutation, oracle") {
    std::mt19937_64 rng(19);
    VectorCollection coll(128);
    for (int i = 0; i < 200; ++i) {
        FusionVector v = oracle::random_sparse_vector(rng, 128, 24);
        if (v.empty()) v = vec_of(128, {{static_cast<std::uint64_t>(i % 128), 1.0}});
        coll.add("d" + std::to_string(1000 + i), std::move(v));
    }

    SUBCASE("query in collection comes back first with similarity 1") {
        const Rank out = brute_force_search(coll.vector_at(5), coll, 1);
        REQUIRE(out.entries.size() == 1);
        CHECK(out.entries[0].item == coll.id_at(5));
        CHECK(out.entries[0].score == doctest::Approx(1.0));
    }

    SUBCASE("k beyond the collection returns the full permutation") {
        const Rank out = brute_force_search(coll.vector_at(0), coll, 5000);
        CHECK(out.entries.size() == coll.size());
        std::set<ItemId> unique;
        for (const auto& e : out.entries) unique.insert(e.item);
        CHECK(unique.size() == coll.size());
    }

    SUBCASE("matches a full-sort oracle") {
        for (int t = 0; t < 5; ++t) {
            const FusionVector query = oracle::random_sparse_vector(rng, 128, 24);
            std::vector<std::pair<double, ItemId>> expected;
            for (std::size_t s = 0; s < coll.size(); ++s)
                expected.emplace_back(oracle::cosine_dissimilarity(query, coll.vector_at(s)),
                                      coll.id_at(s));
            std::sort(expected.begin(), expected.end());
            const Rank out = brute_force_search(query, coll, 10);
            REQUIRE(out.entries.size() == 10);
            for (std::size_t i = 0; i < 10; ++i) {
                CHECK(out.entries[i].item == expected[i].second);
                CHECK(1.0 - out.entries[i].score ==
                      doctest::Approx(expected[i].first).epsilon(1e-9));
            }
        }
    }

    SUBCASE("empty collection gives an empty rank") {
        VectorCollection empty(128);
        CHECK(brute_force_search(coll.vector_at(0), empty, 3).entries.empty());
    }
}

namespace {

VectorCollection small_cluster_collection(std::size_t count, std::uint64_t seed) {
    SparseSynthParams params;
    params.count = count;
    params.dim = 512;
    params.clusters = count / 20 + 1;
    params.nnz = 24;
    params.seed = seed;
    return make_sparse_cluster_collection(params);
}

} // namespace

TEST_CASE("ann index: invariants on a seeded build") {
    const VectorCollection coll = small_cluster_collection(400, 7);
    AnnParams params;
    params.M = 8;
    params.ef_construction = 60;
    params.seed = 5;
    const AnnIndex index = AnnIndex::build(coll, params);

    CHECK(index.node_count() == coll.size());
    CHECK(index.ground_layer_connected());
    for (std::size_t slot = 0; slot < coll.size(); ++slot)
        for (std::size_t level = 0; level <= index.level_of(slot); ++level) {
            CHECK(index.neighbors(slot, level).size() <= index.max_degree(level));
            for (std::uint32_t n : index.neighbors(slot, level)) CHECK(n < coll.size());
        }
}

TEST_CASE("ann index: determinism under a fixed seed") {
    const VectorCollection coll = small_cluster_collection(300, 11);
    AnnParams params;
    params.M = 8;
    params.ef_construction = 40;
    params.seed = 42;
    const AnnIndex a = AnnIndex::build(coll, params);
    const AnnIndex b = AnnIndex::build(coll, params);
    CHECK(a.structure_hash() == b.structure_hash());

    params.seed = 43;
    const AnnIndex c = AnnIndex::build(coll, params);
    CHECK(a.structure_hash() != c.structure_hash());
}

TEST_CASE("ann search: single item, identity query, small-collection equivalence") {
    SUBCASE("single-item collection always returns that item") {
        VectorCollection coll(16);
        coll.add("only", vec_of(16, {{3, 1.0}}));
        const AnnIndex index = AnnIndex::build(coll, {});
        const Rank out = index.search(vec_of(16, {{9, 2.0}}), 1, 10);
        REQUIRE(out.entries.size() == 1);
        CHECK(out.entries[0].item == "only");
    }

    SUBCASE("indexed vector returns itself first") {
        const VectorCollection coll = small_cluster_collection(200, 3);
        const AnnIndex index = AnnIndex::build(coll, {});
        for (std::size_t s = 0; s < coll.size(); s += 37) {
            const Rank out = index.search(coll.vector_at(s), 1, 32);
            REQUIRE(!out.entries.empty());
            CHECK(out.entries[0].score == doctest::Approx(1.0));
        }
    }

    SUBCASE("k = collection size is set-equal to brute force") {
        const VectorCollection coll = small_cluster_collection(50, 13);
        const AnnIndex index = AnnIndex::build(coll, {});
        const FusionVector& query = coll.vector_at(7);
        const Rank approx = index.search(query, coll.size(), coll.size());
        const Rank exact = brute_force_search(query, coll, coll.size());
        REQUIRE(approx.entries.size() == exact.entries.size());
        std::set<ItemId> sa, se;
        for (const auto& e : approx.entries) sa.insert(e.item);
        for (const auto& e : exact.entries) se.insert(e.item);
        CHECK(sa == se);
    }

    SUBCASE("empty index gives an empty rank") {
        VectorCollection coll(16);
        const AnnIndex index = AnnIndex::build(coll, {});
        CHECK(index.search(vec_of(16, {{0, 1.0}}), 5, 10).entries.empty());
    }
}

TEST_CASE("ann search results are deduplicated, sorted, and recall improves with ef") {
    const VectorCollection coll = small_cluster_collection(600, 21);
    const AnnIndex index = AnnIndex::build(coll, {});

    double low_recall_total = 0.0, high_recall_total = 0.0;
    for (std::size_t s = 0; s < 40; ++s) {
        const FusionVector& query = coll.vector_at(s * 15);
        const Rank truth = brute_force_search(query, coll, 10);
        std::set<ItemId> truth_set;
        for (const auto& e : truth.entries) truth_set.insert(e.item);

        for (std::size_t ef : {10UL, 120UL}) {
            const Rank out = index.search(query, 10, ef);
            std::set<ItemId> seen;
            for (std::size_t i = 0; i < out.entries.size(); ++i) {
                CHECK(seen.insert(out.entries[i].item).second); // no duplicates
                if (i > 0) CHECK(out.entries[i].score <= out.entries[i - 1].score);
                CHECK(out.entries[i].position == i + 1);
            }
            std::size_t hits = 0;
            for (const auto& e : out.entries) hits += truth_set.count(e.item);
            (ef == 10UL ? low_recall_total : high_recall_total) += static_cast<double>(hits);
        }
    }
    CHECK(high_recall_total >= low_recall_total);
    CHECK(high_recall_total / (40.0 * 10.0) > 0.9);
}

TEST_CASE("index persistence round-trips and rejects corruption") {
    const VectorCollection coll = small_cluster_collection(250, 17);
    AnnParams params;
    params.M = 8;
    params.ef_construction = 50;
    params.seed = 2;
    const AnnIndex index = AnnIndex::build(coll, params);

    const auto dir = std::filesystem::temp_directory_path() / "fvr_index_roundtrip";
    std::filesystem::create_directories(dir);
    const auto path = dir / "test.index";
    persist_index(index, path);
    const AnnIndex loaded = load_index(path, coll);

    CHECK(loaded.structure_hash() == index.structure_hash());
    std::mt19937_64 rng(23);
    for (int t = 0; t < 100; ++t) {
        const FusionVector query = oracle::random_sparse_vector(rng, 512, 24);
        const Rank a = index.search(query, 5, 40);
        const Rank b = loaded.search(query, 5, 40);
        REQUIRE(a.entries.size() == b.entries.size());
        for (std::size_t i = 0; i < a.entries.size(); ++i) {
            CHECK(a.entries[i].item == b.entries[i].item);
            CHECK(a.entries[i].score == b.entries[i].score);
        }
    }

    SUBCASE("truncated file fails to load") {
        const auto broken = dir / "broken.index";
        std::error_code ec;
        const auto size = std::filesystem::file_size(path, ec);
        std::ifstream in(path, std::ios::binary);
        std::string bytes(size / 2, '\0');
        in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        std::ofstream out(broken, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.close();
        CHECK_THROWS_AS(load_index(broken, coll), LoadError);
    }

    SUBCASE("wrong collection fails to load") {
        const VectorCollection other = small_cluster_collection(250, 18);
        CHECK_THROWS_AS(load_index(path, other), LoadError);
    }

    SUBCASE("empty collection round-trips") {
        VectorCollection empty(512);
        const AnnIndex empty_index = AnnIndex::build(empty, {});
        const auto empty_path = dir / "empty.index";
        persist_index(empty_index, empty_path);
        const AnnIndex loaded_empty = load_index(empty_path, empty);
        CHECK(loaded_empty.search(oracle::random_sparse_vector(rng, 512, 8), 3, 10)
                  .entries.empty());
    }
}

TEST_CASE("vector collection persistence round-trips") {
    const VectorCollection coll = small_cluster_collection(120, 29);
    const auto dir = std::filesystem::temp_directory_path() / "fvr_coll_roundtrip";
    std::filesystem::create_directories(dir);
    const auto path = dir / "coll.vectors";
    coll.save(path);
    const VectorCollection loaded = VectorCollection::load(path);
    CHECK(loaded.content_hash() == coll.content_hash());
    CHECK(loaded.size() == coll.size());
    CHECK(loaded.dim() == coll.dim());
}

TEST_CASE("build parameter validation") {
    VectorCollection coll(8);
    AnnParams params;
    params.M = 1;
    CHECK_THROWS_AS(AnnIndex::build(coll, params), InvalidInputError);
    params.M = 16;
    params.ef_construction = 4;
    CHECK_THROWS_AS(AnnIndex::build(coll, params), InvalidInputError);
}
