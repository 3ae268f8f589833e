#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fvrank/core.hpp"
#include "fvrank/evaluation.hpp"
#include "fvrank/manifest.hpp"
#include "fvrank/sparse_index.hpp"

namespace fvr {

/// Planted-cluster retrieval fixture: points in a small latent space, one
/// noisy distance ranker per configured noise level, class-derived qrels.
/// Fully seed-deterministic.
struct SynthParams {
    std::size_t classes = 5;
    std::size_t per_class = 20;
    std::size_t rankers = 3;
    std::vector<double> noise = {0.2}; ///< per ranker; a single value broadcasts
    std::uint64_t seed = 1;
    std::size_t cutoff = 10;    ///< manifest L
    std::size_t run_depth = 0;  ///< entries written per query; 0 = full collection
    std::size_t latent_dim = 8;
    double class_spread = 8.0;  ///< center scale relative to unit cluster radius
    std::string name = "synth";
};

struct SynthFixture {
    Manifest manifest; ///< run paths filled only by the file-writing variant
    RankStore store;
    Qrels qrels;
    std::map<ItemId, std::string> classes;
};

/// Builds the fixture in memory (normalized store, qrels, manifest metadata).
SynthFixture make_synth_fixture(const SynthParams& params);

/// Writes manifest.txt, one run file per ranker, classes.txt and a ready
/// config.txt into `dir`; loading them back reproduces make_synth_fixture
/// bit for bit.
void write_synth_fixture(const SynthParams& params, const std::filesystem::path& dir);

/// Clustered sparse vectors for index fidelity measurements: `clusters`
/// prototype supports of `nnz` dimensions each; members rewire a fraction of
/// the support and jitter the values.
struct SparseSynthParams {
    std::size_t count = 10000;
    std::uint64_t dim = 10000;
    std::size_t clusters = 100;
    std::size_t nnz = 100;
    double rewire = 0.1;
    double jitter = 0.3;
    std::uint64_t seed = 1;
};

VectorCollection make_sparse_cluster_collection(const SparseSynthParams& params);

} // namespace fvr
