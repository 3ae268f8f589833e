#include "fvrank/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>
#include <unordered_map>

#include "fvrank/serialize.hpp"

namespace fvr {

double FusionVector::value_at(std::uint64_t index) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), index,
                               [](const auto& e, std::uint64_t i) { return e.first < i; });
    return (it != entries.end() && it->first == index) ? it->second : 0.0;
}

double FusionVector::norm() const {
    double sum = 0.0;
    for (const auto& [i, v] : entries) {
        (void)i;
        sum += v * v;
    }
    return std::sqrt(sum);
}

FusionVector FusionVector::from_pairs(std::uint64_t dim,
                                      std::vector<std::pair<std::uint64_t, double>> pairs) {
    std::sort(pairs.begin(), pairs.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    FusionVector vec;
    vec.dim = dim;
    vec.entries.reserve(pairs.size());
    for (const auto& [index, value] : pairs) {
        if (index >= dim)
            throw InvalidInputError("vector index " + std::to_string(index) +
                                    " out of range for dimension " + std::to_string(dim));
        if (value < 0.0)
            throw InvalidInputError("negative vector value at index " + std::to_string(index));
        if (value == 0.0) continue;
        if (!vec.entries.empty() && vec.entries.back().first == index)
            vec.entries.back().second += value;
        else
            vec.entries.emplace_back(index, value);
    }
    return vec;
}

void dump_vector(const FusionVector& vec, std::ostream& out) {
    char buf[64];
    bool first = true;
    for (const auto& [index, value] : vec.entries) {
        std::snprintf(buf, sizeof buf, "%.12g", value);
        out << (first ? "" : " ") << index << ':' << buf;
        first = false;
    }
    out << '\n';
}

CodebookStrategy parse_codebook_strategy(const std::string& text) {
    if (text == "random") return CodebookStrategy::Random;
    if (text == "medoid") return CodebookStrategy::Medoid;
    throw InvalidInputError("unknown codebook strategy '" + text + "'");
}

std::string to_string(CodebookStrategy strategy) {
    return strategy == CodebookStrategy::Random ? "random" : "medoid";
}

EmbeddingKind parse_embedding_kind(const std::string& text) {
    if (text == "vertex") return EmbeddingKind::Vertex;
    if (text == "hybrid") return EmbeddingKind::Hybrid;
    if (text == "kernel") return EmbeddingKind::Kernel;
    throw InvalidInputError("unknown embedding kind '" + text + "'");
}

std::string to_string(EmbeddingKind kind) {
    switch (kind) {
        case EmbeddingKind::Vertex: return "vertex";
        case EmbeddingKind::Hybrid: return "hybrid";
        case EmbeddingKind::Kernel: return "kernel";
    }
    return "?";
}

EmbeddingSpace EmbeddingSpace::vertex(std::vector<ItemId> items) {
    EmbeddingSpace s;
    s.kind_ = EmbeddingKind::Vertex;
    s.items_ = std::move(items);
    std::sort(s.items_.begin(), s.items_.end());
    return s;
}

EmbeddingSpace EmbeddingSpace::hybrid(std::vector<ItemId> items) {
    EmbeddingSpace s = vertex(std::move(items));
    s.kind_ = EmbeddingKind::Hybrid;
    return s;
}

EmbeddingSpace EmbeddingSpace::kernel(std::vector<ItemId> items, Codebook codebook) {
    if (codebook.codewords.empty())
        throw InvalidInputError("kernel space requires a non-empty codebook");
    EmbeddingSpace s = vertex(std::move(items));
    s.kind_ = EmbeddingKind::Kernel;
    s.codebook_ = std::move(codebook);
    return s;
}

const Codebook& EmbeddingSpace::codebook() const {
    if (kind_ != EmbeddingKind::Kernel)
        throw InvalidInputError("only kernel spaces carry a codebook");
    return codebook_;
}

std::uint64_t EmbeddingSpace::attribute_count() const noexcept {
    const std::uint64_t n = items_.size();
    switch (kind_) {
        case EmbeddingKind::Vertex: return n;
        case EmbeddingKind::Hybrid: return n + n * (n - 1) / 2;
        case EmbeddingKind::Kernel: return codebook_.codewords.size();
    }
    return 0;
}

std::uint64_t EmbeddingSpace::declared_dimension() const noexcept {
    const std::uint64_t n = items_.size();
    switch (kind_) {
        case EmbeddingKind::Vertex: return n;
        case EmbeddingKind::Hybrid: return n * n / 2;
        case EmbeddingKind::Kernel: return codebook_.codewords.size();
    }
    return 0;
}

std::size_t EmbeddingSpace::item_index(const ItemId& id) const {
    auto it = std::lower_bound(items_.begin(), items_.end(), id);
    if (it == items_.end() || *it != id)
        throw UnknownItemError("item '" + id + "' is not in the embedding space");
    return static_cast<std::size_t>(it - items_.begin());
}

bool EmbeddingSpace::has_item(const ItemId& id) const {
    return std::binary_search(items_.begin(), items_.end(), id);
}

std::uint64_t EmbeddingSpace::pair_attribute(std::uint64_t i, std::uint64_t j) const {
    const std::uint64_t n = items_.size();
    return n + i * (2 * n - i - 1) / 2 + (j - i - 1);
}

FusionVector embed_vertex(const FusionGraph& fg, const EmbeddingSpace& space) {
    std::vector<std::pair<std::uint64_t, double>> pairs;
    pairs.reserve(fg.vertices.size());
    for (const auto& [id, weight] : fg.vertices)
        pairs.emplace_back(space.item_index(id), weight);
    return FusionVector::from_pairs(space.collection_size(), pairs);
}

FusionVector embed_hybrid(const FusionGraph& fg, const EmbeddingSpace& space) {
    std::vector<std::pair<std::uint64_t, double>> pairs;
    pairs.reserve(fg.vertices.size() + fg.edges.size());
    for (const auto& [id, weight] : fg.vertices)
        pairs.emplace_back(space.item_index(id), weight);
    // Inverted edge pairs land on the same attribute, as if undirected.
    for (const auto& [key, weight] : fg.edges) {
        std::uint64_t i = space.item_index(key.first);
        std::uint64_t j = space.item_index(key.second);
        if (i > j) std::swap(i, j);
        pairs.emplace_back(space.pair_attribute(i, j), weight);
    }
    return FusionVector::from_pairs(space.attribute_count(), pairs);
}

FusionVector embed_kernel(const FusionGraph& fg, const EmbeddingSpace& space) {
    const Codebook& codebook = space.codebook();
    const std::vector<Subgraph> subgraphs = extract_subgraphs(fg);
    FusionVector vec;
    vec.dim = codebook.codewords.size();
    if (subgraphs.empty()) return vec;

    std::vector<double> pooled(codebook.codewords.size(), 0.0);
    for (const auto& g : subgraphs) {
        const std::vector<double> assignment = soft_assign(g, codebook);
        for (std::size_t j = 0; j < pooled.size(); ++j) pooled[j] += assignment[j];
    }
    std::vector<std::pair<std::uint64_t, double>> pairs;
    pairs.reserve(pooled.size());
    for (std::size_t j = 0; j < pooled.size(); ++j)
        pairs.emplace_back(j, pooled[j] / static_cast<double>(subgraphs.size()));
    return FusionVector::from_pairs(vec.dim, pairs);
}

FusionVector embed(const FusionGraph& fg, const EmbeddingSpace& space) {
    switch (space.kind()) {
        case EmbeddingKind::Vertex: return embed_vertex(fg, space);
        case EmbeddingKind::Hybrid: return embed_hybrid(fg, space);
        case EmbeddingKind::Kernel: return embed_kernel(fg, space);
    }
    throw InvalidInputError("unknown embedding kind");
}

std::vector<Subgraph> extract_subgraphs(const FusionGraph& fg) {
    // Out-adjacency once, reused by every per-vertex neighborhood.
    std::unordered_map<ItemId, std::vector<const std::pair<const std::pair<ItemId, ItemId>, double>*>>
        out_edges;
    for (const auto& edge : fg.edges) out_edges[edge.first.first].push_back(&edge);

    std::vector<Subgraph> subgraphs;
    subgraphs.reserve(fg.vertices.size());
    for (const auto& [center, center_weight] : fg.vertices) {
        Subgraph g;
        g.center = center;
        g.vertices[center] = center_weight;
        auto it = out_edges.find(center);
        if (it != out_edges.end()) {
            for (const auto* edge : it->second) {
                const ItemId& neighbor = edge->first.second;
                g.vertices[neighbor] = fg.vertex_weight(neighbor);
            }
        }
        // Every fusion-graph edge linking two members is preserved.
        for (const auto& [member, weight] : g.vertices) {
            (void)weight;
            auto mit = out_edges.find(member);
            if (mit == out_edges.end()) continue;
            for (const auto* edge : mit->second)
                if (g.vertices.count(edge->first.second)) g.edges[edge->first] = edge->second;
        }
        subgraphs.push_back(std::move(g));
    }
    return subgraphs;
}

namespace {

template <typename Map>
std::size_t sorted_key_intersection(const Map& a, const Map& b) {
    std::size_t shared = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (ia->first < ib->first) ++ia;
        else if (ib->first < ia->first) ++ib;
        else { ++shared; ++ia; ++ib; }
    }
    return shared;
}

} // namespace

double mcs_dissimilarity(const Subgraph& g1, const Subgraph& g2) {
    if (g1.vertices.empty() || g2.vertices.empty())
        throw InvalidInputError("mcs_dissimilarity on an empty subgraph");
    const std::size_t shared =
        sorted_key_intersection(g1.vertices, g2.vertices) + sorted_key_intersection(g1.edges, g2.edges);
    const std::size_t larger = std::max(g1.size(), g2.size());
    return 1.0 - static_cast<double>(shared) / static_cast<double>(larger);
}

namespace {

/// Partial Fisher-Yates: the first `count` slots of a seeded shuffle.
std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t count,
                                                    std::mt19937_64& rng) {
    std::vector<std::size_t> indices(population);
    std::iota(indices.begin(), indices.end(), 0);
    for (std::size_t i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, population - 1);
        std::swap(indices[i], indices[pick(rng)]);
    }
    indices.resize(count);
    return indices;
}

std::vector<std::size_t> k_medoids(const std::vector<Subgraph>& subgraphs, std::size_t k,
                                   std::mt19937_64& rng) {
    const std::size_t n = subgraphs.size();
    std::vector<double> dist(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            dist[i * n + j] = dist[j * n + i] = mcs_dissimilarity(subgraphs[i], subgraphs[j]);

    // Farthest-point seeding: random first medoid, then repeatedly the point
    // farthest from the chosen set. Spreads the seeds across clusters, which
    // plain random initialization does not guarantee.
    std::vector<std::size_t> medoids;
    medoids.push_back(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
    while (medoids.size() < k) {
        std::size_t farthest = 0;
        double farthest_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (std::find(medoids.begin(), medoids.end(), i) != medoids.end()) continue;
            double nearest = 2.0;
            for (std::size_t m : medoids) nearest = std::min(nearest, dist[i * n + m]);
            if (nearest > farthest_d) {
                farthest_d = nearest;
                farthest = i;
            }
        }
        medoids.push_back(farthest);
    }
    std::vector<std::size_t> assignment(n, 0);

    for (int iteration = 0; iteration < 20; ++iteration) {
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_d = dist[i * n + medoids[0]];
            for (std::size_t c = 1; c < k; ++c) {
                const double d = dist[i * n + medoids[c]];
                if (d < best_d) { best_d = d; best = c; }
            }
            assignment[i] = best;
        }

        bool changed = false;
        for (std::size_t c = 0; c < k; ++c) {
            std::vector<std::size_t> members;
            for (std::size_t i = 0; i < n; ++i)
                if (assignment[i] == c) members.push_back(i);
            if (members.empty()) continue; // keep the previous medoid
            std::size_t best = medoids[c];
            double best_cost = -1.0;
            for (std::size_t candidate : members) {
                double cost = 0.0;
                for (std::size_t other : members) cost += dist[candidate * n + other];
                if (best_cost < 0.0 || cost < best_cost ||
                    (cost == best_cost && candidate < best)) {
                    best_cost = cost;
                    best = candidate;
                }
            }
            if (best != medoids[c]) { medoids[c] = best; changed = true; }
        }
        if (!changed) break;
    }
    return medoids;
}

} // namespace

Codebook build_codebook(const std::vector<Subgraph>& subgraphs, std::size_t size,
                        CodebookStrategy strategy, double sigma, std::uint64_t seed) {
    if (size == 0 || size > subgraphs.size())
        throw InvalidInputError("codebook size " + std::to_string(size) +
                                " out of range for a population of " +
                                std::to_string(subgraphs.size()));
    if (sigma <= 0.0)
        throw InvalidInputError("sigma must be positive");

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> selected;
    if (strategy == CodebookStrategy::Random)
        selected = sample_without_replacement(subgraphs.size(), size, rng);
    else
        selected = k_medoids(subgraphs, size, rng);

    Codebook codebook;
    codebook.sigma = sigma;
    codebook.seed = seed;
    codebook.strategy = strategy;
    codebook.codewords.reserve(size);
    for (std::size_t index : selected) codebook.codewords.push_back(subgraphs[index]);
    return codebook;
}

std::vector<double> soft_assign(const Subgraph& g, const Codebook& codebook) {
    if (codebook.codewords.empty())
        throw InvalidInputError("soft_assign against an empty codebook");
    const double sigma = codebook.sigma;
    const double gauss_norm = 1.0 / (sigma * std::sqrt(2.0 * std::acos(-1.0)));

    std::vector<double> scores(codebook.codewords.size());
    double total = 0.0;
    for (std::size_t j = 0; j < scores.size(); ++j) {
        const double delta = mcs_dissimilarity(g, codebook.codewords[j]);
        scores[j] = gauss_norm * std::exp(-delta * delta / (2.0 * sigma * sigma));
        total += scores[j];
    }
    for (double& s : scores) s /= total;
    return scores;
}

void EmbeddingSpace::save(std::ostream& out) const {
    BinaryWriter w(out);
    w.magic("FVSP");
    w.u32(1);
    w.u8(static_cast<std::uint8_t>(kind_));
    w.u64(items_.size());
    for (const auto& id : items_) w.str(id);
    if (kind_ == EmbeddingKind::Kernel) {
        w.f64(codebook_.sigma);
        w.u64(codebook_.seed);
        w.u8(static_cast<std::uint8_t>(codebook_.strategy));
        w.u64(codebook_.codewords.size());
        for (const auto& g : codebook_.codewords) {
            w.str(g.center);
            w.u64(g.vertices.size());
            for (const auto& [id, weight] : g.vertices) {
                w.str(id);
                w.f64(weight);
            }
            w.u64(g.edges.size());
            for (const auto& [key, weight] : g.edges) {
                w.str(key.first);
                w.str(key.second);
                w.f64(weight);
            }
        }
    }
}

EmbeddingSpace EmbeddingSpace::load(std::istream& in) {
    BinaryReader r(in);
    r.expect_magic("FVSP", "embedding space");
    const std::uint32_t version = r.u32();
    if (version != 1)
        throw LoadError("embedding space: unsupported format version " + std::to_string(version));

    EmbeddingSpace s;
    const std::uint8_t kind = r.u8();
    if (kind > 2) throw LoadError("embedding space: bad kind");
    s.kind_ = static_cast<EmbeddingKind>(kind);
    const std::uint64_t item_count = r.u64();
    s.items_.reserve(item_count);
    for (std::uint64_t i = 0; i < item_count; ++i) s.items_.push_back(r.str());
    if (!std::is_sorted(s.items_.begin(), s.items_.end()))
        throw LoadError("embedding space: item index not sorted");

    if (s.kind_ == EmbeddingKind::Kernel) {
        s.codebook_.sigma = r.f64();
        s.codebook_.seed = r.u64();
        const std::uint8_t strategy = r.u8();
        if (strategy > 1) throw LoadError("embedding space: bad codebook strategy");
        s.codebook_.strategy = static_cast<CodebookStrategy>(strategy);
        const std::uint64_t codeword_count = r.u64();
        s.codebook_.codewords.reserve(codeword_count);
        for (std::uint64_t c = 0; c < codeword_count; ++c) {
            Subgraph g;
            g.center = r.str();
            const std::uint64_t vertex_count = r.u64();
            for (std::uint64_t v = 0; v < vertex_count; ++v) {
                std::string id = r.str();
                g.vertices[std::move(id)] = r.f64();
            }
            const std::uint64_t edge_count = r.u64();
            for (std::uint64_t e = 0; e < edge_count; ++e) {
                std::string from = r.str();
                std::string to = r.str();
                g.edges[{std::move(from), std::move(to)}] = r.f64();
            }
            s.codebook_.codewords.push_back(std::move(g));
        }
        if (s.codebook_.codewords.empty())
            throw LoadError("embedding space: kernel space without codewords");
    }
    return s;
}

} // namespace fvr
