#pragma once

#include <cstdint>
#include <filesystem>
#include <unordered_map>
#include <vector>

#include "fvrank/core.hpp"
#include "fvrank/embedding.hpp"

namespace fvr {

/// Cosine dissimilarity 1 - a.b / (|a||b|) over sparse vectors, computed by
/// merge-intersection of the sorted index lists. Both inputs are non-negative
/// here, so the result lives in [0, 1]; rounding spill is clamped. A zero
/// vector is maximally dissimilar to everything (1.0 by convention).
double cosine_dissimilarity(const FusionVector& a, const FusionVector& b);

/// Fusion vectors of a collection keyed by item id, with cached norms.
/// Immutable after the adds complete; slot order is insertion order and is
/// what the index serialization refers to.
class VectorCollection {
public:
    explicit VectorCollection(std::uint64_t dim) : dim_(dim) {}

    void add(ItemId id, FusionVector vec);

    std::uint64_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return ids_.size(); }
    bool empty() const noexcept { return ids_.empty(); }

    const ItemId& id_at(std::size_t slot) const { return ids_[slot]; }
    const FusionVector& vector_at(std::size_t slot) const { return vectors_[slot]; }
    double norm_at(std::size_t slot) const { return norms_[slot]; }

    const FusionVector* find(const ItemId& id) const;

    /// Order-sensitive digest of the full contents; persisted indexes store
    /// it so a stale index cannot be paired with the wrong vector store.
    std::uint64_t content_hash() const;

    void save(std::ostream& out) const;
    void save(const std::filesystem::path& path) const;
    static VectorCollection load(std::istream& in);
    static VectorCollection load(const std::filesystem::path& path);

private:
    std::uint64_t dim_ = 0;
    std::vector<ItemId> ids_;
    std::vector<FusionVector> vectors_;
    std::vector<double> norms_;
    std::unordered_map<ItemId, std::size_t> slots_;
};

/// Exact top-k by ascending cosine dissimilarity (ties by item id). Reported
/// scores are similarities (1 - dissimilarity); positions run 1..k.
Rank brute_force_search(const FusionVector& query, const VectorCollection& coll, std::size_t k);

struct AnnParams {
    std::size_t M = 16;
    std::size_t ef_construction = 200;
    std::uint64_t seed = 1;
};

/// Hierarchical navigable small-world graph over a vector collection.
///
/// Built by incremental insertion with seeded geometric level assignment,
/// greedy descent and heuristic neighbor selection; the build is sequential
/// and fully deterministic for a fixed seed and insertion order. The index
/// stores adjacency only; distances are evaluated against the collection it
/// was built from, which must outlive it. Searches are const and safe to run
/// concurrently.
class AnnIndex {
public:
    static AnnIndex build(const VectorCollection& coll, const AnnParams& params);

    /// Approximate top-k; the beam width is max(ef_search, k).
    Rank search(const FusionVector& query, std::size_t k, std::size_t ef_search) const;

    const AnnParams& params() const noexcept { return params_; }
    const VectorCollection& collection() const noexcept { return *coll_; }
    std::size_t node_count() const noexcept { return links_.size(); }
    int max_level() const noexcept { return max_level_; }
    std::size_t max_degree(std::size_t level) const noexcept {
        return level == 0 ? 2 * params_.M : params_.M;
    }
    const std::vector<std::uint32_t>& neighbors(std::size_t slot, std::size_t level) const {
        return links_[slot][level];
    }
    std::size_t level_of(std::size_t slot) const { return links_[slot].size() - 1; }

    /// Weak connectivity of the ground layer (undirected BFS from the entry).
    bool ground_layer_connected() const;

    /// Digest of the adjacency structure; equal seeds must reproduce it.
    std::uint64_t structure_hash() const;

    friend void persist_index(const AnnIndex& index, std::ostream& out);
    friend AnnIndex load_index(std::istream& in, const VectorCollection& coll);

private:
    explicit AnnIndex(const VectorCollection& coll);

    struct Candidate {
        double dist;
        std::uint32_t slot;
        bool operator<(const Candidate& o) const {
            return dist < o.dist || (dist == o.dist && slot < o.slot);
        }
        bool operator>(const Candidate& o) const { return o < *this; }
    };

    /// Borrowed view of one sparse vector (index/value arrays split so the
    /// merge loop touches values only on matches).
    struct VectorView {
        const std::uint64_t* indices;
        const double* values;
        std::size_t size;
        double norm;
    };

    /// Epoch-stamped visited marks; reset is a counter bump, not a memset.
    struct VisitedSet {
        std::vector<std::uint32_t> stamps;
        std::uint32_t epoch = 0;
        void begin(std::size_t n) {
            if (stamps.size() != n) stamps.assign(n, 0);
            ++epoch;
        }
        bool test_and_set(std::uint32_t slot) {
            if (stamps[slot] == epoch) return true;
            stamps[slot] = epoch;
            return false;
        }
    };

    VectorView slot_view(std::uint32_t slot) const {
        const std::size_t begin = flat_offsets_[slot];
        return {flat_indices_.data() + begin, flat_values_.data() + begin,
                flat_offsets_[slot + 1] - begin, coll_->norm_at(slot)};
    }

    double dissim(const VectorView& query, std::uint32_t slot) const;
    int random_level();
    void insert(std::uint32_t slot, VisitedSet& visited);
    std::uint32_t greedy_descent(const VectorView& query, std::uint32_t start, int level) const;
    std::vector<Candidate> search_layer(const VectorView& query, std::uint32_t start,
                                        std::size_t ef, int level, VisitedSet& visited) const;
    std::vector<Candidate> select_neighbors(std::vector<Candidate> candidates,
                                            std::size_t max_count) const;
    void shrink_links(std::uint32_t slot, int level);

    const VectorCollection* coll_ = nullptr;
    AnnParams params_;
    double level_factor_ = 0.0; ///< 1 / ln(M)
    std::int64_t entry_ = -1;
    int max_level_ = -1;
    std::uint64_t rng_state_ = 0;
    // links_[slot][level] = neighbor slots; a node exists on levels 0..level_of(slot)
    std::vector<std::vector<std::vector<std::uint32_t>>> links_;
    // flat copy of the collection's sparse entries, CSR-style
    std::vector<std::uint64_t> flat_indices_;
    std::vector<double> flat_values_;
    std::vector<std::size_t> flat_offsets_;
};

/// Versioned binary round-trip of the adjacency structure. The file records
/// the collection's content hash; loading against a different collection
/// fails rather than pairing mismatched artifacts.
void persist_index(const AnnIndex& index, std::ostream& out);
void persist_index(const AnnIndex& index, const std::filesystem::path& path);
AnnIndex load_index(std::istream& in, const VectorCollection& coll);
AnnIndex load_index(const std::filesystem::path& path, const VectorCollection& coll);

} // namespace fvr
