#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fvrank/error.hpp"

namespace fvr {

/// Opaque identifier of a response item. Queries use the same id space in the
/// ad-hoc protocol (every collection item is queried in turn).
using ItemId = std::string;

/// One row of a rank: item, similarity score, 1-based position.
struct RankEntry {
    ItemId item;
    double score = 0.0;
    std::size_t position = 0;
};

/// Ordered result list produced by one ranker for one query, cut at L.
///
/// A well-formed similarity rank has positions 1..len with no gaps, entries
/// sorted by non-increasing score (ties broken by item id ascending) and no
/// duplicate items. Ranks parsed from run files or returned by exact_search()
/// may still carry raw dissimilarity scores; pass them through
/// normalize_scores() before treating scores as similarities.
struct Rank {
    std::string ranker;
    ItemId query;
    std::vector<RankEntry> entries;

    bool empty() const noexcept { return entries.empty(); }
    std::size_t size() const noexcept { return entries.size(); }

    /// Position of `item` in this rank, or 0 when absent.
    std::size_t position_of(const ItemId& item) const;

    /// Throws InvalidInputError unless the similarity-rank shape invariants
    /// hold (contiguous positions, non-increasing scores with id tie-break,
    /// no duplicates, non-negative scores).
    void validate() const;
};

/// The m ranks obtained for one query, in fixed ranker order.
struct RankSet {
    ItemId query;
    std::vector<Rank> ranks;
};

enum class NormalizationMode {
    AlreadySimilarity, ///< scores are similarities; rescale so the top is 1.0
    MinMaxInvert,      ///< dissimilarities; s' = (max - d) / (max - min)
    ReciprocalInvert,  ///< dissimilarities; s' = 1 / (1 + d)
};

NormalizationMode parse_normalization_mode(const std::string& text);
std::string to_string(NormalizationMode mode);

/// Min/max observed over a score population; drives globally-scoped
/// normalization (one transform per ranker instead of one per rank).
struct ScoreStats {
    double min = 0.0;
    double max = 0.0;
};

/// Converts a rank's scores into similarities in a comparable range without
/// touching item order or positions. Constant ranks map to all-1.0 under
/// min-max (instead of dividing by zero), and an all-zero already-similarity
/// rank is treated the same way. Negative input scores are rejected.
Rank normalize_scores(const Rank& rank, NormalizationMode mode);

/// Same transform but with the min/max taken from `stats` rather than from
/// the rank itself (globally-scoped normalization).
Rank normalize_scores(const Rank& rank, NormalizationMode mode, const ScoreStats& stats);

/// Sorts descriptor comparisons by ascending dissimilarity (argsort, ties by
/// item id), assigns positions 1..n and truncates to `cutoff` entries when
/// cutoff > 0. The returned rank keeps the raw dissimilarities as scores.
Rank exact_search(std::vector<std::pair<ItemId, double>> comparisons, std::size_t cutoff = 0);

/// Offline-precomputed table of ranks: one rank per (ranker, response item).
/// Immutable after load; safe for unrestricted concurrent reads.
class RankStore {
public:
    RankStore(std::vector<std::string> rankers, std::size_t cutoff);

    /// Inserts a rank keyed by (rank.ranker, rank.query). Unknown rankers and
    /// duplicate keys are invalid input.
    void put(Rank rank);

    const std::vector<std::string>& rankers() const noexcept { return rankers_; }
    std::size_t cutoff() const noexcept { return cutoff_; }

    bool has_rank(const std::string& ranker, const ItemId& query) const;
    const Rank* find_rank(const std::string& ranker, const ItemId& query) const;

    /// Throws IncompleteStoreError naming (ranker, query) when absent.
    const Rank& rank(const std::string& ranker, const ItemId& query) const;

    /// The query's m ranks in fixed ranker order.
    RankSet rank_set(const ItemId& query) const;

    bool has_query(const ItemId& query) const;

    /// All query ids with at least one stored rank, sorted ascending.
    std::vector<ItemId> queries() const;

    std::size_t rank_count() const noexcept { return rank_count_; }

    /// View of this store restricted to a subset of rankers, in the order
    /// given. Unknown ranker ids are invalid input.
    RankStore subset(const std::vector<std::string>& rankers) const;

    /// Checks that every item appearing in any stored rank has a full rank
    /// set (m ranks) of its own; throws IncompleteStoreError listing the
    /// missing (ranker, item) pairs otherwise.
    void verify_closed_world() const;

    /// Normalization context recorded at load time, used to normalize raw
    /// external query ranks consistently with the stored ones.
    void set_normalization(const std::string& ranker, NormalizationMode mode,
                           std::optional<ScoreStats> global_stats);
    Rank normalize_external(const Rank& raw, const std::string& ranker) const;

private:
    std::size_t ranker_slot(const std::string& ranker) const;

    std::vector<std::string> rankers_;
    std::unordered_map<std::string, std::size_t> slots_;
    std::size_t cutoff_ = 0;
    std::size_t rank_count_ = 0;
    // per query: one optional rank per ranker slot
    std::unordered_map<ItemId, std::vector<std::optional<Rank>>> table_;
    std::vector<NormalizationMode> modes_;
    std::vector<std::optional<ScoreStats>> global_stats_;
};

} // namespace fvr
