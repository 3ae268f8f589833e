#include "fvrank/synth.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>

#include "fvrank/error.hpp"

namespace fvr {

namespace {

struct RawFixture {
    Manifest manifest;
    std::map<ItemId, std::string> classes;
    // raw dissimilarity ranks per ranker, in manifest ranker order
    std::vector<std::vector<Rank>> raw_runs;
};

std::string item_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "s%04zu", index);
    return buf;
}

std::vector<double> resolve_noise(const SynthParams& params) {
    if (params.noise.empty())
        throw UsageError("synth requires at least one noise level");
    if (params.noise.size() == 1)
        return std::vector<double>(params.rankers, params.noise.front());
    if (params.noise.size() != params.rankers)
        throw UsageError("synth noise list must have one value or one per ranker");
    return params.noise;
}

RawFixture generate_raw(const SynthParams& params) {
    if (params.classes == 0 || params.per_class == 0)
        throw UsageError("synth requires at least one class and one item per class");
    if (params.rankers == 0)
        throw UsageError("synth requires at least one ranker");
    if (params.cutoff == 0)
        throw UsageError("synth cut-off L must be positive");
    const std::vector<double> noise = resolve_noise(params);

    const std::size_t n = params.classes * params.per_class;
    std::mt19937_64 rng(params.seed);
    std::normal_distribution<double> unit(0.0, 1.0);

    // Well-separated class centers, unit-radius clusters around them.
    std::vector<std::vector<double>> points(n, std::vector<double>(params.latent_dim));
    RawFixture fixture;
    for (std::size_t c = 0; c < params.classes; ++c) {
        std::vector<double> center(params.latent_dim);
        for (double& x : center) x = params.class_spread * unit(rng);
        for (std::size_t i = 0; i < params.per_class; ++i) {
            const std::size_t item = c * params.per_class + i;
            for (std::size_t d = 0; d < params.latent_dim; ++d)
                points[item][d] = center[d] + unit(rng);
            fixture.classes[item_name(item)] = "k" + std::to_string(c);
        }
    }

    fixture.manifest.name = params.name;
    fixture.manifest.cutoff = params.cutoff;
    for (std::size_t i = 0; i < n; ++i) fixture.manifest.items.push_back(item_name(i));

    const std::size_t depth = params.run_depth == 0 ? n : std::min(params.run_depth, n);
    fixture.raw_runs.resize(params.rankers);
    for (std::size_t r = 0; r < params.rankers; ++r) {
        RankerSpec spec;
        spec.id = "r" + std::to_string(r);
        spec.mode = NormalizationMode::MinMaxInvert;
        spec.run_path = spec.id + ".run";
        fixture.manifest.rankers.push_back(spec);

        fixture.raw_runs[r].reserve(n);
        for (std::size_t q = 0; q < n; ++q) {
            std::vector<std::pair<ItemId, double>> comparisons;
            comparisons.reserve(n);
            for (std::size_t x = 0; x < n; ++x) {
                double dist = 0.0;
                for (std::size_t d = 0; d < params.latent_dim; ++d) {
                    const double diff = points[q][d] - points[x][d];
                    dist += diff * diff;
                }
                dist = std::sqrt(dist);
                // Multiplicative log-normal noise keeps the self-match at 0.
                if (noise[r] > 0.0) dist *= std::exp(noise[r] * unit(rng));
                comparisons.emplace_back(item_name(x), dist);
            }
            Rank rank = exact_search(std::move(comparisons), depth);
            rank.ranker = spec.id;
            rank.query = item_name(q);
            fixture.raw_runs[r].push_back(std::move(rank));
        }
    }
    return fixture;
}

} // namespace

SynthFixture make_synth_fixture(const SynthParams& params) {
    RawFixture raw = generate_raw(params);
    RankStore store(raw.manifest.ranker_ids(), raw.manifest.cutoff);
    for (std::size_t r = 0; r < raw.raw_runs.size(); ++r) {
        const RankerSpec& spec = raw.manifest.rankers[r];
        store.set_normalization(spec.id, spec.mode, std::nullopt);
        for (const Rank& rank : raw.raw_runs[r]) {
            Rank normalized = normalize_scores(rank, spec.mode);
            if (normalized.entries.size() > raw.manifest.cutoff)
                normalized.entries.resize(raw.manifest.cutoff);
            store.put(std::move(normalized));
        }
    }
    SynthFixture fixture{std::move(raw.manifest), std::move(store),
                         Qrels::from_class_labels(raw.classes), std::move(raw.classes)};
    return fixture;
}

void write_synth_fixture(const SynthParams& params, const std::filesystem::path& dir) {
    RawFixture raw = generate_raw(params);
    std::filesystem::create_directories(dir);

    for (std::size_t r = 0; r < raw.raw_runs.size(); ++r) {
        const auto path = dir / raw.manifest.rankers[r].run_path;
        std::ofstream out(path);
        if (!out)
            throw LoadError("cannot write run file '" + path.string() + "'");
        for (const Rank& rank : raw.raw_runs[r]) write_rank(out, rank);
    }

    {
        std::ofstream out(dir / "manifest.txt");
        if (!out)
            throw LoadError("cannot write manifest");
        write_manifest(raw.manifest, out);
    }
    {
        std::ofstream out(dir / "classes.txt");
        if (!out)
            throw LoadError("cannot write classes file");
        for (const auto& [item, cls] : raw.classes) out << item << ' ' << cls << '\n';
    }
    {
        std::ofstream out(dir / "config.txt");
        if (!out)
            throw LoadError("cannot write config file");
        out << "[pipeline]\n"
            << "manifest = manifest.txt\n"
            << "artifacts = artifacts\n"
            << "reports = reports\n\n"
            << "[embedding]\n"
            << "kinds = vertex, hybrid, kernel\n"
            << "codebook_size = 0\n"
            << "sigma = 0.25\n"
            << "strategy = random\n"
            << "seed = " << params.seed << "\n\n"
            << "[index]\n"
            << "M = 16\n"
            << "ef_construction = 200\n"
            << "ef_search = 100\n"
            << "seed = " << params.seed << "\n\n"
            << "[evaluate]\n"
            << "methods = fv-v, fv-v-fast, fv-h, fv-h-fast, fv-k, fv-k-fast, rrf, borda, "
               "combsum, medianrank, best-single\n"
            << "metric = ndcg\n"
            << "metric_cutoff = 10\n"
            << "retrieval_k = 10\n"
            << "repetitions = 5\n"
            << "classes = classes.txt\n\n"
            << "[configs]\n"
            << "all = ";
        for (std::size_t r = 0; r < raw.manifest.rankers.size(); ++r)
            out << (r ? " + " : "") << raw.manifest.rankers[r].id;
        out << "\n";
    }
}

VectorCollection make_sparse_cluster_collection(const SparseSynthParams& params) {
    if (params.clusters == 0 || params.nnz == 0)
        throw UsageError("sparse synth requires clusters >= 1 and nnz >= 1");
    if (params.nnz > params.dim)
        throw UsageError("sparse synth nnz cannot exceed the dimensionality");

    std::mt19937_64 rng(params.seed);
    std::uniform_int_distribution<std::uint64_t> pick_dim(0, params.dim - 1);
    std::uniform_real_distribution<double> value(0.25, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<std::vector<std::pair<std::uint64_t, double>>> prototypes(params.clusters);
    for (auto& proto : prototypes) {
        std::set<std::uint64_t> support;
        while (support.size() < params.nnz) support.insert(pick_dim(rng));
        proto.reserve(params.nnz);
        for (std::uint64_t index : support) proto.emplace_back(index, value(rng));
    }

    VectorCollection coll(params.dim);
    for (std::size_t i = 0; i < params.count; ++i) {
        const auto& proto = prototypes[i % params.clusters];
        std::vector<std::pair<std::uint64_t, double>> pairs;
        pairs.reserve(proto.size());
        for (const auto& [index, v] : proto) {
            const std::uint64_t target = unit(rng) < params.rewire ? pick_dim(rng) : index;
            pairs.emplace_back(target, v * (1.0 + params.jitter * (2.0 * unit(rng) - 1.0)));
        }
        char buf[16];
        std::snprintf(buf, sizeof buf, "v%06zu", i);
        coll.add(buf, FusionVector::from_pairs(params.dim, std::move(pairs)));
    }
    return coll;
}

} // namespace fvr
