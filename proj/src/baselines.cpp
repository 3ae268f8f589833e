#include "fvrank/baselines.hpp"

#include <algorithm>
#include <map>

#include "fvrank/error.hpp"

namespace fvr {

namespace {

// Ordered map keeps tie handling and output deterministic.
using ScoreMap = std::map<ItemId, double>;

AggregatedRank finish_descending(const RankSet& rank_set, ScoreMap scores, std::string method) {
    std::vector<std::pair<ItemId, double>> items(scores.begin(), scores.end());
    std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    AggregatedRank out;
    out.query = rank_set.query;
    out.method = std::move(method);
    out.entries.reserve(items.size());
    for (std::size_t i = 0; i < items.size(); ++i)
        out.entries.push_back({items[i].first, items[i].second, i + 1});
    return out;
}

std::size_t effective_cutoff(const RankSet& rank_set, std::size_t cutoff) {
    if (cutoff > 0) return cutoff;
    std::size_t longest = 0;
    for (const auto& rank : rank_set.ranks) longest = std::max(longest, rank.size());
    return longest;
}

} // namespace

AggregatedRank rrf(const RankSet& rank_set, double k) {
    if (k <= 0.0)
        throw InvalidInputError("rrf smoothing constant must be positive");
    ScoreMap scores;
    for (const auto& rank : rank_set.ranks)
        for (const auto& entry : rank.entries)
            scores[entry.item] += 1.0 / (k + static_cast<double>(entry.position));
    return finish_descending(rank_set, std::move(scores), "rrf");
}

AggregatedRank borda(const RankSet& rank_set, std::size_t cutoff) {
    const std::size_t L = effective_cutoff(rank_set, cutoff);
    ScoreMap scores;
    for (const auto& rank : rank_set.ranks)
        for (const auto& entry : rank.entries)
            scores[entry.item] += static_cast<double>(L + 1 - entry.position);
    return finish_descending(rank_set, std::move(scores), "borda");
}

AggregatedRank comb_sum(const RankSet& rank_set) {
    ScoreMap scores;
    for (const auto& rank : rank_set.ranks)
        for (const auto& entry : rank.entries)
            scores[entry.item] += entry.score;
    return finish_descending(rank_set, std::move(scores), "combsum");
}

AggregatedRank median_rank(const RankSet& rank_set, std::size_t cutoff) {
    const std::size_t L = effective_cutoff(rank_set, cutoff);
    const double absent = static_cast<double>(L + 1);

    std::map<ItemId, std::vector<double>> positions;
    for (const auto& rank : rank_set.ranks)
        for (const auto& entry : rank.entries)
            positions[entry.item].push_back(static_cast<double>(entry.position));

    ScoreMap medians;
    const std::size_t rank_count = rank_set.ranks.size();
    for (auto& [item, observed] : positions) {
        observed.resize(rank_count, absent); // absent from a rank counts as L + 1
        std::sort(observed.begin(), observed.end());
        const std::size_t mid = observed.size() / 2;
        medians[item] = observed.size() % 2 == 1
                            ? observed[mid]
                            : 0.5 * (observed[mid - 1] + observed[mid]);
    }

    std::vector<std::pair<ItemId, double>> items(medians.begin(), medians.end());
    std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second < b.second;
        return a.first < b.first;
    });
    AggregatedRank out;
    out.query = rank_set.query;
    out.method = "medianrank";
    out.entries.reserve(items.size());
    for (std::size_t i = 0; i < items.size(); ++i)
        out.entries.push_back({items[i].first, absent - items[i].second, i + 1});
    return out;
}

} // namespace fvr
