#include "fvrank/core.hpp"

#include <algorithm>
#include <set>

namespace fvr {

std::size_t Rank::position_of(const ItemId& item) const {
    for (const auto& e : entries)
        if (e.item == item) return e.position;
    return 0;
}

void Rank::validate() const {
    std::set<ItemId> seen;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        if (e.position != i + 1)
            throw InvalidInputError("rank for '" + query + "': position gap at index " +
                                    std::to_string(i));
        if (e.score < 0.0)
            throw InvalidInputError("rank for '" + query + "': negative score for '" + e.item + "'");
        if (!seen.insert(e.item).second)
            throw InvalidInputError("rank for '" + query + "': duplicate item '" + e.item + "'");
        if (i > 0) {
            const auto& prev = entries[i - 1];
            if (e.score > prev.score ||
                (e.score == prev.score && e.item < prev.item))
                throw InvalidInputError("rank for '" + query + "': entries out of order at '" +
                                        e.item + "'");
        }
    }
}

NormalizationMode parse_normalization_mode(const std::string& text) {
    if (text == "already-similarity") return NormalizationMode::AlreadySimilarity;
    if (text == "min-max-invert") return NormalizationMode::MinMaxInvert;
    if (text == "reciprocal-invert") return NormalizationMode::ReciprocalInvert;
    throw InvalidInputError("unknown normalization mode '" + text + "'");
}

std::string to_string(NormalizationMode mode) {
    switch (mode) {
        case NormalizationMode::AlreadySimilarity: return "already-similarity";
        case NormalizationMode::MinMaxInvert: return "min-max-invert";
        case NormalizationMode::ReciprocalInvert: return "reciprocal-invert";
    }
    return "?";
}

namespace {

ScoreStats stats_of(const Rank& rank) {
    ScoreStats s{rank.entries.front().score, rank.entries.front().score};
    for (const auto& e : rank.entries) {
        s.min = std::min(s.min, e.score);
        s.max = std::max(s.max, e.score);
    }
    return s;
}

Rank apply_normalization(const Rank& rank, NormalizationMode mode, const ScoreStats& stats) {
    Rank out = rank;
    for (auto& e : out.entries) {
        if (e.score < 0.0)
            throw InvalidInputError("negative score " + std::to_string(e.score) + " for item '" +
                                    e.item + "' in rank of '" + rank.query + "'");
        switch (mode) {
            case NormalizationMode::AlreadySimilarity:
                // Constant all-zero rank degenerates like the min-max case.
                e.score = stats.max > 0.0 ? e.score / stats.max : 1.0;
                break;
            case NormalizationMode::MinMaxInvert:
                e.score = stats.max > stats.min
                              ? (stats.max - e.score) / (stats.max - stats.min)
                              : 1.0;
                break;
            case NormalizationMode::ReciprocalInvert:
                e.score = 1.0 / (1.0 + e.score);
                break;
        }
    }
    return out;
}

} // namespace

Rank normalize_scores(const Rank& rank, NormalizationMode mode) {
    if (rank.empty())
        throw InvalidInputError("cannot normalize an empty rank");
    return apply_normalization(rank, mode, stats_of(rank));
}

Rank normalize_scores(const Rank& rank, NormalizationMode mode, const ScoreStats& stats) {
    if (rank.empty())
        throw InvalidInputError("cannot normalize an empty rank");
    return apply_normalization(rank, mode, stats);
}

Rank exact_search(std::vector<std::pair<ItemId, double>> comparisons, std::size_t cutoff) {
    if (comparisons.empty())
        throw InvalidInputError("exact_search on an empty comparison list");
    std::sort(comparisons.begin(), comparisons.end(),
              [](const auto& a, const auto& b) {
                  if (a.second != b.second) return a.second < b.second;
                  return a.first < b.first;
              });
    if (cutoff > 0 && comparisons.size() > cutoff)
        comparisons.resize(cutoff);

    Rank rank;
    rank.entries.reserve(comparisons.size());
    for (std::size_t i = 0; i < comparisons.size(); ++i)
        rank.entries.push_back({std::move(comparisons[i].first), comparisons[i].second, i + 1});
    return rank;
}

RankStore::RankStore(std::vector<std::string> rankers, std::size_t cutoff)
    : rankers_(std::move(rankers)), cutoff_(cutoff) {
    for (std::size_t i = 0; i < rankers_.size(); ++i) {
        if (!slots_.emplace(rankers_[i], i).second)
            throw InvalidInputError("duplicate ranker id '" + rankers_[i] + "'");
    }
    modes_.assign(rankers_.size(), NormalizationMode::MinMaxInvert);
    global_stats_.assign(rankers_.size(), std::nullopt);
}

std::size_t RankStore::ranker_slot(const std::string& ranker) const {
    auto it = slots_.find(ranker);
    if (it == slots_.end())
        throw InvalidInputError("unknown ranker '" + ranker + "'");
    return it->second;
}

void RankStore::put(Rank rank) {
    const std::size_t slot = ranker_slot(rank.ranker);
    auto& row = table_[rank.query];
    if (row.empty()) row.resize(rankers_.size());
    if (row[slot].has_value())
        throw InvalidInputError("duplicate rank for ranker '" + rank.ranker + "', query '" +
                                rank.query + "'");
    row[slot] = std::move(rank);
    ++rank_count_;
}

bool RankStore::has_rank(const std::string& ranker, const ItemId& query) const {
    return find_rank(ranker, query) != nullptr;
}

const Rank* RankStore::find_rank(const std::string& ranker, const ItemId& query) const {
    auto slot_it = slots_.find(ranker);
    if (slot_it == slots_.end()) return nullptr;
    auto row_it = table_.find(query);
    if (row_it == table_.end()) return nullptr;
    const auto& opt = row_it->second[slot_it->second];
    return opt.has_value() ? &*opt : nullptr;
}

const Rank& RankStore::rank(const std::string& ranker, const ItemId& query) const {
    const Rank* r = find_rank(ranker, query);
    if (!r)
        throw IncompleteStoreError("no rank for (" + ranker + ", " + query + ")");
    return *r;
}

RankSet RankStore::rank_set(const ItemId& query) const {
    RankSet set;
    set.query = query;
    set.ranks.reserve(rankers_.size());
    for (const auto& ranker : rankers_)
        set.ranks.push_back(rank(ranker, query));
    return set;
}

bool RankStore::has_query(const ItemId& query) const {
    auto it = table_.find(query);
    if (it == table_.end()) return false;
    for (const auto& opt : it->second)
        if (opt.has_value()) return true;
    return false;
}

std::vector<ItemId> RankStore::queries() const {
    std::vector<ItemId> out;
    out.reserve(table_.size());
    for (const auto& [query, row] : table_) {
        (void)row;
        out.push_back(query);
    }
    std::sort(out.begin(), out.end());
    return out;
}

RankStore RankStore::subset(const std::vector<std::string>& rankers) const {
    RankStore out(rankers, cutoff_);
    for (const auto& ranker : rankers) {
        const std::size_t slot = ranker_slot(ranker);
        for (const auto& [query, row] : table_) {
            (void)query;
            if (row[slot].has_value()) out.put(*row[slot]);
        }
        out.set_normalization(ranker, modes_[slot], global_stats_[slot]);
    }
    return out;
}

void RankStore::verify_closed_world() const {
    std::set<std::pair<std::string, ItemId>> missing;
    for (const auto& [query, row] : table_) {
        (void)query;
        for (const auto& opt : row) {
            if (!opt.has_value()) continue;
            for (const auto& entry : opt->entries) {
                for (const auto& ranker : rankers_) {
                    if (!has_rank(ranker, entry.item))
                        missing.emplace(ranker, entry.item);
                }
            }
        }
    }
    if (!missing.empty()) {
        std::string detail = "store is not closed under rank lookup; missing:";
        for (const auto& [ranker, item] : missing)
            detail += " (" + ranker + ", " + item + ")";
        throw IncompleteStoreError(detail);
    }
}

void RankStore::set_normalization(const std::string& ranker, NormalizationMode mode,
                                  std::optional<ScoreStats> global_stats) {
    const std::size_t slot = ranker_slot(ranker);
    modes_[slot] = mode;
    global_stats_[slot] = global_stats;
}

Rank RankStore::normalize_external(const Rank& raw, const std::string& ranker) const {
    const std::size_t slot = ranker_slot(ranker);
    Rank normalized = global_stats_[slot].has_value()
                          ? normalize_scores(raw, modes_[slot], *global_stats_[slot])
                          : normalize_scores(raw, modes_[slot]);
    if (cutoff_ > 0 && normalized.entries.size() > cutoff_)
        normalized.entries.resize(cutoff_);
    return normalized;
}

} // namespace fvr
