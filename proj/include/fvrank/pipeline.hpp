#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fvrank/embedding.hpp"
#include "fvrank/evaluation.hpp"
#include "fvrank/manifest.hpp"
#include "fvrank/sparse_index.hpp"
#include "fvrank/synth.hpp"

namespace fvr {

struct CodebookConfig {
    std::size_t size = 0; ///< 0 = min(500, population)
    double sigma = 0.25;
    CodebookStrategy strategy = CodebookStrategy::Random;
    std::uint64_t seed = 1;
};

/// Everything the offline and online stages need. Parsed from a sectioned
/// key = value config file; the CLI overrides individual fields afterwards.
struct PipelineConfig {
    std::filesystem::path manifest_path;
    std::filesystem::path artifacts_dir = "artifacts";
    std::filesystem::path reports_dir = "reports";

    std::vector<EmbeddingKind> kinds = {EmbeddingKind::Vertex};
    CodebookConfig codebook;
    AnnParams index;
    std::size_t ef_search = 100;

    /// Named ranker subsets; empty = one "all" configuration.
    std::vector<std::pair<std::string, std::vector<std::string>>> configs;

    std::vector<std::string> methods;
    Metric metric = Metric::NdcgAtK;
    std::size_t metric_cutoff = 10;
    std::size_t retrieval_k = 10;
    std::size_t timing_repetitions = 5;
    std::size_t threads = 0; ///< 0 = hardware concurrency

    std::filesystem::path relevance_path;
    bool relevance_is_classes = true;
};

PipelineConfig parse_pipeline_config(const std::filesystem::path& path);

/// In-memory artifacts for one (ranker configuration, embedding kind) pair.
/// The collection sits behind a stable pointer because the index refers to it.
struct KindArtifacts {
    EmbeddingSpace space;
    std::unique_ptr<VectorCollection> vectors;
    std::unique_ptr<AnnIndex> index;
};

/// Offline stage for one ranker configuration: extracts every item's fusion
/// graph, builds the requested embedding spaces (quantizing a codebook for
/// the kernel kind), embeds all items and indexes the vectors.
std::map<EmbeddingKind, KindArtifacts> build_config_artifacts(
    const RankStore& store, const std::vector<ItemId>& items,
    const std::vector<EmbeddingKind>& kinds, const CodebookConfig& codebook,
    const AnnParams& index_params, std::size_t threads);

/// Content address of the pipeline inputs and parameters; persisted inside
/// every artifact and re-derived at load time so stale artifact/input
/// pairings fail fast.
std::uint64_t pipeline_hash(const PipelineConfig& config, const Manifest& manifest,
                            const std::string& config_name,
                            const std::vector<std::string>& rankers, EmbeddingKind kind);

void cmd_build(const PipelineConfig& config, std::ostream& log);

struct SearchRequest {
    std::string config_name; ///< empty = first configured subset
    EmbeddingKind kind = EmbeddingKind::Vertex;
    bool approximate = true;
    std::optional<ItemId> query_id;
    std::optional<std::filesystem::path> query_rank_file;
    std::size_t k = 10;
};

void cmd_search(const PipelineConfig& config, const SearchRequest& request, std::ostream& out);

void cmd_evaluate(const PipelineConfig& config, std::ostream& log);

void cmd_dump_graph(const PipelineConfig& config, const std::string& config_name,
                    const ItemId& query, std::ostream& out);
void cmd_dump_vector(const PipelineConfig& config, const std::string& config_name,
                     EmbeddingKind kind, const ItemId& item, std::ostream& out);

/// Recall/latency comparison of the approximate index against brute force on
/// seeded clustered sparse vectors.
struct BenchParams {
    SparseSynthParams data;
    AnnParams index;
    std::vector<std::size_t> ef_search = {10, 20, 50, 100, 200};
    std::size_t queries = 100;
    std::size_t k = 10;
};

struct FidelityReport {
    double recall_at_k = 0.0;
    double ann_mean_ms = 0.0;
    double brute_mean_ms = 0.0;
    double speedup() const { return ann_mean_ms > 0.0 ? brute_mean_ms / ann_mean_ms : 0.0; }
};

/// Measures recall@k of the index against brute-force ground truth plus mean
/// per-query latencies, over `queries` evenly spaced collection vectors.
FidelityReport measure_index_fidelity(const VectorCollection& coll, const AnnIndex& index,
                                      std::size_t queries, std::size_t k, std::size_t ef_search);

void cmd_bench(const BenchParams& params, std::ostream& out);

/// Method grid of one evaluate run, exposed for tests: (method, config) ->
/// protocol result plus the derived winning numbers.
struct EvaluateOutcome {
    std::vector<std::pair<std::string, std::vector<ProtocolResult>>> per_config;
    std::map<std::string, std::size_t> winning;
};

EvaluateOutcome run_evaluation(const PipelineConfig& config);

} // namespace fvr
