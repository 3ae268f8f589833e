#include "fvrank/fusion_graph.hpp"

#include <cstdio>
#include <ostream>

namespace fvr {

FusionGraph extract_fusion_graph(const RankSet& rank_set, const RankStore& store) {
    FusionGraph fg;
    fg.query = rank_set.query;

    // Vertex pass: union of items over all ranks, weights summed per rank.
    for (const auto& rank : rank_set.ranks)
        for (const auto& entry : rank.entries)
            fg.vertices[entry.item] += entry.score;

    // Edge pass: for each occurrence of A in a query rank, walk A's own
    // precomputed rank set and credit every co-member B that is a vertex.
    for (const auto& rank : rank_set.ranks) {
        for (const auto& occurrence : rank.entries) {
            const ItemId& a = occurrence.item;
            const double divisor = static_cast<double>(occurrence.position);
            for (const auto& ranker : store.rankers()) {
                const Rank* rank_of_a = store.find_rank(ranker, a);
                if (!rank_of_a)
                    throw IncompleteStoreError("no rank for (" + ranker + ", " + a +
                                               ") while extracting the graph of '" +
                                               rank_set.query + "'");
                for (const auto& candidate : rank_of_a->entries) {
                    const ItemId& b = candidate.item;
                    if (b == a) continue;
                    if (!fg.vertices.count(b)) continue;
                    const double contribution = candidate.score / divisor;
                    if (contribution > 0.0) fg.edges[{a, b}] += contribution;
                }
            }
        }
    }
    return fg;
}

GraphStats graph_stats(const FusionGraph& fg) {
    GraphStats s;
    s.vertex_count = fg.vertices.size();
    s.edge_count = fg.edges.size();
    for (const auto& [id, w] : fg.vertices) {
        (void)id;
        s.vertex_weight_total += w;
    }
    for (const auto& [key, w] : fg.edges) {
        (void)key;
        s.edge_weight_total += w;
    }
    return s;
}

void dump_graph(const FusionGraph& fg, std::ostream& out) {
    char buf[64];
    for (const auto& [id, w] : fg.vertices) {
        std::snprintf(buf, sizeof buf, "%.12g", w);
        out << "v " << id << ' ' << buf << '\n';
    }
    for (const auto& [key, w] : fg.edges) {
        std::snprintf(buf, sizeof buf, "%.12g", w);
        out << "e " << key.first << ' ' << key.second << ' ' << buf << '\n';
    }
}

} // namespace fvr
