#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "fvrank/core.hpp"

namespace fvr {

/// Binary relevance judgments. Pairs default to 0; class-derived qrels mark
/// same-class items (including the query itself) as relevant.
class Qrels {
public:
    void set(const ItemId& query, const ItemId& item, int relevance);
    int relevance(const ItemId& query, const ItemId& item) const;
    std::size_t relevant_count(const ItemId& query) const;

    static Qrels from_class_labels(const std::map<ItemId, std::string>& labels);

    /// `<query-id> <item-id> <0|1>` lines, '#' comments.
    static Qrels parse(std::istream& in, const std::string& source_name);

    /// `<item-id> <class>` lines turned into class-derived binary qrels.
    static Qrels parse_class_file(std::istream& in, const std::string& source_name);

    static Qrels load(const std::filesystem::path& path, bool class_labels);

private:
    std::unordered_map<ItemId, std::unordered_set<ItemId>> relevant_;
};

/// Binary-gain NDCG at cutoff k with log2(i + 1) discount. Queries with no
/// relevant items at all score 0; `no_relevant` reports that degenerate case
/// so callers can flag it.
double ndcg_at_k(const Rank& rank, const Qrels& qrels, std::size_t k,
                 bool* no_relevant = nullptr);

/// Number of relevant items among the first four positions (0..4).
double ns_score(const Rank& rank, const Qrels& qrels);

/// Grid of metric values: one per (method, dataset, configuration).
class PerformanceTable {
public:
    void set(const std::string& method, const std::string& dataset, const std::string& config,
             double value);
    double get(const std::string& method, const std::string& dataset,
               const std::string& config) const;

    const std::set<std::string>& methods() const noexcept { return methods_; }
    const std::set<std::pair<std::string, std::string>>& cells() const noexcept { return cells_; }

private:
    std::set<std::string> methods_;
    std::set<std::pair<std::string, std::string>> cells_; ///< (dataset, config)
    std::map<std::tuple<std::string, std::string, std::string>, double> values_;
};

/// Winning number of every method: the count of (dataset, configuration,
/// competitor) cells where it strictly outperforms the competitor; ties award
/// nothing. The grid must be complete.
std::map<std::string, std::size_t> winning_numbers(const PerformanceTable& table);

/// Wall-clock components of one query, milliseconds.
struct StageTimes {
    double extract_ms = 0.0;
    double embed_ms = 0.0;
    double retrieve_ms = 0.0;
    double total_ms = 0.0;
};

struct TimingReport {
    std::vector<StageTimes> repetitions;
    StageTimes mean() const;
};

/// The three online stages of one query, in execution order. State flows
/// between stages through whatever the closures capture.
struct PipelineStages {
    std::function<void()> extract;
    std::function<void()> embed;
    std::function<void()> retrieve;
};

/// Runs the stages once unrecorded (warm-up), then `repetitions` recorded
/// times on a monotonic clock. Total is measured around the whole run, so it
/// matches the component sum up to timer resolution.
TimingReport timed_query(const PipelineStages& stages, std::size_t repetitions = 5);

enum class Metric { NdcgAtK, NsScore };

Metric parse_metric(const std::string& text);
std::string to_string(Metric metric);

double evaluate_metric(Metric metric, const Rank& rank, const Qrels& qrels, std::size_t cutoff,
                       bool* no_relevant = nullptr);

/// Per-method outcome of the ad-hoc protocol over every stored query.
struct ProtocolResult {
    std::string method;
    double mean_metric = 0.0;
    std::vector<std::pair<ItemId, double>> per_query; ///< sorted by query id
    StageTimes mean_times;                            ///< mean over queries and repetitions
    std::vector<ItemId> zero_relevant_queries;
};

struct ProtocolOptions {
    std::size_t retrieval_k = 10;
    std::size_t metric_cutoff = 10;
    std::size_t timing_repetitions = 5; ///< 0 disables timing
    std::size_t threads = 1;            ///< used only when timing is disabled
};

/// Produces a rank for one query; the protocol driver times its stages.
/// Implementations fill the stage closures; unused stages may be no-ops.
using QueryPipelineFactory =
    std::function<PipelineStages(const ItemId& query, Rank& out)>;

/// Evaluates one method over every query of the store: builds the per-query
/// pipeline, times it (5 repetitions by default, one discarded warm-up),
/// scores the produced rank and aggregates. Queries without relevant items
/// score 0 and are flagged, not skipped. Deterministic output order.
ProtocolResult run_protocol(const RankStore& store, const std::string& method_name,
                            const QueryPipelineFactory& factory, const Qrels& qrels,
                            Metric metric, const ProtocolOptions& options);

} // namespace fvr
