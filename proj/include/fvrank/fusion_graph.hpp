#pragma once

#include <iosfwd>
#include <map>
#include <utility>

#include "fvrank/core.hpp"

namespace fvr {

/// Weighted directed graph encoding one query's rank set.
///
/// Vertices are the response items of the query's ranks; a vertex weight sums
/// the item's similarity scores to the query across all ranks that contain
/// it. An edge (A, B) accumulates, for every occurrence of A at position p in
/// a query rank and every rank of A's own precomputed rank set that contains
/// B, the contribution score(A, B) / p. Edges are directed because the
/// divisor uses A's position; the hybrid embedding symmetrizes them later.
///
/// Conventions: self-loops are never created; the query itself stays a vertex
/// when it appears in its own ranks; an edge is only created when its target
/// already is a vertex (closure over the query's rank set); zero-weight edges
/// are never stored. Immutable after extraction and freely shareable.
struct FusionGraph {
    ItemId query;
    std::map<ItemId, double> vertices;
    std::map<std::pair<ItemId, ItemId>, double> edges;

    double vertex_weight(const ItemId& v) const {
        auto it = vertices.find(v);
        return it == vertices.end() ? 0.0 : it->second;
    }

    double edge_weight(const ItemId& from, const ItemId& to) const {
        auto it = edges.find({from, to});
        return it == edges.end() ? 0.0 : it->second;
    }
};

/// Builds the query's fusion graph from its rank set and the precomputed
/// store. Cost is O(m^2 L^2) rank-entry visits. Throws IncompleteStoreError
/// if the store lacks the rank set of any vertex.
FusionGraph extract_fusion_graph(const RankSet& rank_set, const RankStore& store);

struct GraphStats {
    std::size_t vertex_count = 0;
    std::size_t edge_count = 0;
    double vertex_weight_total = 0.0;
    double edge_weight_total = 0.0;
};

GraphStats graph_stats(const FusionGraph& fg);

/// Text dump for debugging and cross-implementation diffing:
/// `v <item-id> <weight>` then `e <src> <dst> <weight>` lines, 12 significant
/// digits, both sections sorted by id.
void dump_graph(const FusionGraph& fg, std::ostream& out);

} // namespace fvr
