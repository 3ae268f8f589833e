// fvrank: build, search and evaluate fusion-vector rank aggregation.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "fvrank/pipeline.hpp"

namespace {

struct CommonFlags {
    std::string config_file;
    std::string manifest;
    std::string artifacts;
    std::string reports;
    std::string kinds;
    std::optional<std::size_t> threads;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> M;
    std::optional<std::size_t> ef_construction;
    std::optional<std::size_t> ef_search;
    std::optional<std::size_t> codebook_size;
    std::optional<double> sigma;
    std::string strategy;
    std::string methods;
    std::string metric;
    std::optional<std::size_t> metric_cutoff;
    std::optional<std::size_t> retrieval_k;
    std::optional<std::size_t> repetitions;
    std::string qrels;
    std::string classes;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("-c,--config", flags.config_file, "Sectioned key = value config file");
    cmd->add_option("--manifest", flags.manifest, "Collection manifest path");
    cmd->add_option("--artifacts", flags.artifacts, "Artifact directory");
    cmd->add_option("--reports", flags.reports, "Report directory");
    cmd->add_option("--kinds", flags.kinds, "Embedding kinds, comma-separated");
    cmd->add_option("--threads", flags.threads, "Worker threads (0 = hardware)");
    cmd->add_option("--seed", flags.seed, "Seed for all stochastic stages");
    cmd->add_option("--M", flags.M, "Index max neighbors per node");
    cmd->add_option("--ef-construction", flags.ef_construction, "Index build beam width");
    cmd->add_option("--ef-search", flags.ef_search, "Index search beam width");
    cmd->add_option("--codebook-size", flags.codebook_size, "Codebook size (0 = auto)");
    cmd->add_option("--sigma", flags.sigma, "Soft-assignment smoothing");
    cmd->add_option("--strategy", flags.strategy, "Codebook strategy: random | medoid");
    cmd->add_option("--methods", flags.methods, "Methods to evaluate, comma-separated");
    cmd->add_option("--metric", flags.metric, "Effectiveness metric: ndcg | ns");
    cmd->add_option("--metric-cutoff", flags.metric_cutoff, "Metric cutoff (NDCG@k)");
    cmd->add_option("--retrieval-k", flags.retrieval_k, "Items retrieved per query");
    cmd->add_option("--repetitions", flags.repetitions, "Timing repetitions per query");
    cmd->add_option("--qrels", flags.qrels, "Explicit qrels file");
    cmd->add_option("--classes", flags.classes, "Class-label file for derived qrels");
}

std::vector<std::string> split_csv(const std::string& text) {
    std::vector<std::string> out;
    std::string token;
    std::istringstream in(text);
    while (std::getline(in, token, ',')) {
        const auto b = token.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        const auto e = token.find_last_not_of(" \t");
        out.push_back(token.substr(b, e - b + 1));
    }
    return out;
}

fvr::PipelineConfig resolve_config(const CommonFlags& flags) {
    fvr::PipelineConfig config;
    if (!flags.config_file.empty()) config = fvr::parse_pipeline_config(flags.config_file);
    if (!flags.manifest.empty()) config.manifest_path = flags.manifest;
    if (!flags.artifacts.empty()) config.artifacts_dir = flags.artifacts;
    if (!flags.reports.empty()) config.reports_dir = flags.reports;
    if (!flags.kinds.empty()) {
        config.kinds.clear();
        for (const auto& kind : split_csv(flags.kinds))
            config.kinds.push_back(fvr::parse_embedding_kind(kind));
    }
    if (flags.threads) config.threads = *flags.threads;
    if (flags.seed) {
        config.codebook.seed = *flags.seed;
        config.index.seed = *flags.seed;
    }
    if (flags.M) config.index.M = *flags.M;
    if (flags.ef_construction) config.index.ef_construction = *flags.ef_construction;
    if (flags.ef_search) config.ef_search = *flags.ef_search;
    if (flags.codebook_size) config.codebook.size = *flags.codebook_size;
    if (flags.sigma) config.codebook.sigma = *flags.sigma;
    if (!flags.strategy.empty())
        config.codebook.strategy = fvr::parse_codebook_strategy(flags.strategy);
    if (!flags.methods.empty()) config.methods = split_csv(flags.methods);
    if (!flags.metric.empty()) config.metric = fvr::parse_metric(flags.metric);
    if (flags.metric_cutoff) config.metric_cutoff = *flags.metric_cutoff;
    if (flags.retrieval_k) config.retrieval_k = *flags.retrieval_k;
    if (flags.repetitions) config.timing_repetitions = *flags.repetitions;
    if (!flags.qrels.empty()) {
        config.relevance_path = flags.qrels;
        config.relevance_is_classes = false;
    }
    if (!flags.classes.empty()) {
        config.relevance_path = flags.classes;
        config.relevance_is_classes = true;
    }
    return config;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fusion-vector rank aggregation pipeline"};
    app.require_subcommand(1);

    CommonFlags flags;

    auto* build = app.add_subcommand("build", "Offline stage: extract, embed and index");
    add_common_flags(build, flags);

    auto* search = app.add_subcommand("search", "Online stage: retrieve for one query");
    add_common_flags(search, flags);
    std::string search_config_name, search_kind = "vertex", search_mode = "ann";
    std::string query_id, query_file;
    std::size_t search_k = 10;
    search->add_option("--config-name", search_config_name, "Ranker configuration name");
    search->add_option("--kind", search_kind, "Embedding kind: vertex | hybrid | kernel");
    search->add_option("--mode", search_mode, "ann | exact");
    search->add_option("--query", query_id, "Query item id");
    search->add_option("--query-file", query_file, "Run-format file with the query's ranks");
    search->add_option("-k", search_k, "Number of results");

    auto* evaluate = app.add_subcommand("evaluate", "Run the ad-hoc protocol and write CSVs");
    add_common_flags(evaluate, flags);

    auto* bench = app.add_subcommand("bench", "Index recall/latency benchmark");
    fvr::BenchParams bench_params;
    std::string bench_ef = "10,20,50,100,200";
    bench->add_option("--count", bench_params.data.count, "Vector count");
    bench->add_option("--dim", bench_params.data.dim, "Dimensionality");
    bench->add_option("--clusters", bench_params.data.clusters, "Planted cluster count");
    bench->add_option("--nnz", bench_params.data.nnz, "Non-zeros per vector");
    bench->add_option("--seed", bench_params.data.seed, "Data and build seed");
    bench->add_option("--M", bench_params.index.M, "Index max neighbors");
    bench->add_option("--ef-construction", bench_params.index.ef_construction,
                      "Index build beam width");
    bench->add_option("--ef-search", bench_ef, "Search beam widths, comma-separated");
    bench->add_option("--queries", bench_params.queries, "Queries sampled");
    bench->add_option("-k", bench_params.k, "Neighbors per query");

    auto* synth = app.add_subcommand("synth", "Generate a planted-cluster fixture");
    fvr::SynthParams synth_params;
    std::string synth_noise = "0.2,0.35,0.5";
    std::string synth_out = "fixture";
    synth->add_option("--classes", synth_params.classes, "Number of classes");
    synth->add_option("--per-class", synth_params.per_class, "Items per class");
    synth->add_option("--rankers", synth_params.rankers, "Number of rankers");
    synth->add_option("--noise", synth_noise, "Noise levels, comma-separated");
    synth->add_option("--spread", synth_params.class_spread,
                      "Class-center scale (unit cluster radius)");
    synth->add_option("--seed", synth_params.seed, "Generation seed");
    synth->add_option("--L", synth_params.cutoff, "Rank cut-off L");
    synth->add_option("--run-depth", synth_params.run_depth, "Entries per query (0 = all)");
    synth->add_option("--name", synth_params.name, "Dataset name");
    synth->add_option("-o,--out", synth_out, "Output directory");

    auto* dump_graph_cmd = app.add_subcommand("dump-graph", "Print a query's fusion graph");
    add_common_flags(dump_graph_cmd, flags);
    std::string dump_config_name, dump_query;
    dump_graph_cmd->add_option("--config-name", dump_config_name, "Ranker configuration name");
    dump_graph_cmd->add_option("--query", dump_query, "Query item id")->required();

    auto* dump_vector_cmd = app.add_subcommand("dump-vector", "Print an item's fusion vector");
    add_common_flags(dump_vector_cmd, flags);
    std::string dumpv_config_name, dumpv_kind = "vertex", dumpv_item;
    dump_vector_cmd->add_option("--config-name", dumpv_config_name, "Ranker configuration name");
    dump_vector_cmd->add_option("--kind", dumpv_kind, "Embedding kind");
    dump_vector_cmd->add_option("--item", dumpv_item, "Item id")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (build->parsed()) {
            fvr::cmd_build(resolve_config(flags), std::cout);
        } else if (search->parsed()) {
            fvr::SearchRequest request;
            request.config_name = search_config_name;
            request.kind = fvr::parse_embedding_kind(search_kind);
            if (search_mode == "ann") request.approximate = true;
            else if (search_mode == "exact") request.approximate = false;
            else throw fvr::UsageError("mode must be 'ann' or 'exact'");
            if (!query_id.empty()) request.query_id = query_id;
            if (!query_file.empty()) request.query_rank_file = query_file;
            request.k = search_k;
            fvr::cmd_search(resolve_config(flags), request, std::cout);
        } else if (evaluate->parsed()) {
            fvr::cmd_evaluate(resolve_config(flags), std::cout);
        } else if (bench->parsed()) {
            bench_params.index.seed = bench_params.data.seed;
            bench_params.ef_search.clear();
            for (const auto& ef : split_csv(bench_ef))
                bench_params.ef_search.push_back(std::stoull(ef));
            fvr::cmd_bench(bench_params, std::cout);
        } else if (synth->parsed()) {
            synth_params.noise.clear();
            for (const auto& level : split_csv(synth_noise))
                synth_params.noise.push_back(std::stod(level));
            fvr::write_synth_fixture(synth_params, synth_out);
            std::cout << "fixture written to " << synth_out << "\n";
        } else if (dump_graph_cmd->parsed()) {
            fvr::cmd_dump_graph(resolve_config(flags), dump_config_name, dump_query, std::cout);
        } else if (dump_vector_cmd->parsed()) {
            fvr::cmd_dump_vector(resolve_config(flags), dumpv_config_name,
                                 fvr::parse_embedding_kind(dumpv_kind), dumpv_item, std::cout);
        }
    } catch (const fvr::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
