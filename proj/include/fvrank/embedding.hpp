#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fvrank/core.hpp"
#include "fvrank/fusion_graph.hpp"

namespace fvr {

/// Sparse non-negative vector produced by embedding a fusion graph; the unit
/// of indexing and search. Entries are (attribute index, value) pairs sorted
/// by index; zero values are never stored.
struct FusionVector {
    std::uint64_t dim = 0;
    std::vector<std::pair<std::uint64_t, double>> entries;

    bool empty() const noexcept { return entries.empty(); }
    double value_at(std::uint64_t index) const;
    double norm() const;

    /// Sorts, merges duplicates, drops zeros and checks bounds/signs.
    static FusionVector from_pairs(std::uint64_t dim,
                                   std::vector<std::pair<std::uint64_t, double>> pairs);
};

/// `idx:value` pairs, 12 significant digits, single line.
void dump_vector(const FusionVector& vec, std::ostream& out);

/// Neighborhood subgraph used by the kernel embedding: a center vertex, its
/// direct successors, and every graph edge among those members. Vertex and
/// edge weights are preserved from the fusion graph.
struct Subgraph {
    ItemId center;
    std::map<ItemId, double> vertices;
    std::map<std::pair<ItemId, ItemId>, double> edges;

    /// Structure size used by the MCS dissimilarity: vertices plus edges.
    std::size_t size() const noexcept { return vertices.size() + edges.size(); }
};

enum class CodebookStrategy { Random, Medoid };

CodebookStrategy parse_codebook_strategy(const std::string& text);
std::string to_string(CodebookStrategy strategy);

/// Vocabulary of representative subgraphs; codeword order defines the kernel
/// embedding's attribute indices. Immutable after construction.
struct Codebook {
    std::vector<Subgraph> codewords;
    double sigma = 0.25;
    std::uint64_t seed = 0;
    CodebookStrategy strategy = CodebookStrategy::Random;
};

enum class EmbeddingKind { Vertex, Hybrid, Kernel };

EmbeddingKind parse_embedding_kind(const std::string& text);
std::string to_string(EmbeddingKind kind);

/// Attribute space of one embedding formulation over a fixed collection.
///
/// Vertex and hybrid spaces index items 0..n-1 in sorted item-id order. The
/// hybrid space adds one attribute per unordered item pair at
/// k = n + i*(2n-i-1)/2 + (j-i-1) for i < j; attribute_count() is the exact
/// bound n + n(n-1)/2 that all stored indices respect, while
/// declared_dimension() reports the conventional n^2/2 figure. Kernel spaces
/// have one attribute per codeword.
class EmbeddingSpace {
public:
    EmbeddingSpace() = default; ///< empty vertex space; assign before use

    static EmbeddingSpace vertex(std::vector<ItemId> items);
    static EmbeddingSpace hybrid(std::vector<ItemId> items);
    static EmbeddingSpace kernel(std::vector<ItemId> items, Codebook codebook);

    EmbeddingKind kind() const noexcept { return kind_; }
    std::size_t collection_size() const noexcept { return items_.size(); }
    const std::vector<ItemId>& items() const noexcept { return items_; }
    const Codebook& codebook() const;

    std::uint64_t attribute_count() const noexcept;
    std::uint64_t declared_dimension() const noexcept;

    /// Throws UnknownItemError for items outside the collection.
    std::size_t item_index(const ItemId& id) const;
    bool has_item(const ItemId& id) const;

    /// Pair attribute index for item indices i < j (hybrid spaces).
    std::uint64_t pair_attribute(std::uint64_t i, std::uint64_t j) const;

    void save(std::ostream& out) const;
    static EmbeddingSpace load(std::istream& in);

private:
    EmbeddingKind kind_ = EmbeddingKind::Vertex;
    std::vector<ItemId> items_; ///< sorted; position = item index
    Codebook codebook_;         ///< kernel kind only
};

FusionVector embed_vertex(const FusionGraph& fg, const EmbeddingSpace& space);
FusionVector embed_hybrid(const FusionGraph& fg, const EmbeddingSpace& space);
FusionVector embed_kernel(const FusionGraph& fg, const EmbeddingSpace& space);

/// Dispatches on space.kind().
FusionVector embed(const FusionGraph& fg, const EmbeddingSpace& space);

/// One subgraph per vertex: the vertex, its direct successors and the edges
/// linking the members.
std::vector<Subgraph> extract_subgraphs(const FusionGraph& fg);

/// Maximum-common-subgraph dissimilarity in [0, 1]. Vertices carry unique
/// item-id labels, so the MCS size is the count of shared vertex ids plus
/// shared directed edge id pairs; weights are ignored. delta = 1 - |mcs| /
/// max(|g1|, |g2|) with |g| = vertices + edges, computed by sorted id-set
/// intersection in linear time.
double mcs_dissimilarity(const Subgraph& g1, const Subgraph& g2);

/// Selects `size` codewords from the population. Random strategy samples
/// without replacement; medoid runs seeded k-medoids under mcs_dissimilarity
/// (at most 20 refinement iterations). Deterministic for a fixed seed.
Codebook build_codebook(const std::vector<Subgraph>& subgraphs, std::size_t size,
                        CodebookStrategy strategy, double sigma, std::uint64_t seed);

/// Gaussian soft assignment of a subgraph against every codeword; the result
/// sums to 1 and every component is strictly positive.
std::vector<double> soft_assign(const Subgraph& g, const Codebook& codebook);

} // namespace fvr
