#pragma once

#include <string>
#include <vector>

#include "fvrank/core.hpp"

namespace fvr {

/// Combined rank produced by a reference aggregation function.
struct AggregatedRank {
    ItemId query;
    std::vector<RankEntry> entries;
    std::string method;

    Rank to_rank() const {
        Rank r;
        r.ranker = method;
        r.query = query;
        r.entries = entries;
        return r;
    }
};

/// Reciprocal rank fusion: score(x) = sum over ranks of 1 / (k + position).
AggregatedRank rrf(const RankSet& rank_set, double k = 60.0);

/// Positional method: score(x) = sum over ranks of (L + 1 - position),
/// absent items contribute 0. cutoff == 0 derives L from the longest rank.
AggregatedRank borda(const RankSet& rank_set, std::size_t cutoff = 0);

/// Sum of normalized similarity scores across ranks.
AggregatedRank comb_sum(const RankSet& rank_set);

/// Items keyed by the median of their positions across ranks (absent counts
/// as L + 1), ascending; reported score is L + 1 - median.
AggregatedRank median_rank(const RankSet& rank_set, std::size_t cutoff = 0);

} // namespace fvr
