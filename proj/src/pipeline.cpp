#include "fvrank/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "fvrank/baselines.hpp"
#include "fvrank/fusion_graph.hpp"
#include "fvrank/parallel.hpp"
#include "fvrank/serialize.hpp"

namespace fvr {

namespace {

std::string format_value(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string strip(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text, char separator) {
    std::vector<std::string> out;
    std::string current;
    std::istringstream in(text);
    while (std::getline(in, current, separator)) {
        std::string token = strip(current);
        if (!token.empty()) out.push_back(token);
    }
    return out;
}

std::size_t parse_size_value(const std::string& text, const std::string& where) {
    try {
        std::size_t consumed = 0;
        long long v = std::stoll(text, &consumed);
        if (consumed != text.size() || v < 0) throw std::invalid_argument(text);
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw ParseError(where + ": expected a non-negative integer, got '" + text + "'");
    }
}

double parse_double_value(const std::string& text, const std::string& where) {
    try {
        std::size_t consumed = 0;
        double v = std::stod(text, &consumed);
        if (consumed != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw ParseError(where + ": expected a number, got '" + text + "'");
    }
}

} // namespace

PipelineConfig parse_pipeline_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open config '" + path.string() + "'");
    const std::filesystem::path base = path.parent_path();

    PipelineConfig config;
    config.kinds.clear();
    std::string section;
    std::string line;
    std::size_t line_no = 0;

    while (std::getline(in, line)) {
        ++line_no;
        const std::string where = path.filename().string() + ":" + std::to_string(line_no);
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::string text = strip(line);
        if (text.empty()) continue;

        if (text.front() == '[') {
            if (text.back() != ']')
                throw ParseError(where + ": unterminated section header");
            section = strip(text.substr(1, text.size() - 2));
            continue;
        }
        std::size_t eq = text.find('=');
        if (eq == std::string::npos)
            throw ParseError(where + ": expected 'key = value'");
        const std::string key = strip(text.substr(0, eq));
        const std::string value = strip(text.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ParseError(where + ": empty key or value");

        if (section == "pipeline") {
            if (key == "manifest") config.manifest_path = base / value;
            else if (key == "artifacts") config.artifacts_dir = base / value;
            else if (key == "reports") config.reports_dir = base / value;
            else if (key == "threads") config.threads = parse_size_value(value, where);
            else throw ParseError(where + ": unknown pipeline key '" + key + "'");
        } else if (section == "embedding") {
            if (key == "kinds") {
                for (const auto& kind : split_list(value, ','))
                    config.kinds.push_back(parse_embedding_kind(kind));
            } else if (key == "codebook_size") {
                config.codebook.size = parse_size_value(value, where);
            } else if (key == "sigma") {
                config.codebook.sigma = parse_double_value(value, where);
            } else if (key == "strategy") {
                config.codebook.strategy = parse_codebook_strategy(value);
            } else if (key == "seed") {
                config.codebook.seed = parse_size_value(value, where);
            } else {
                throw ParseError(where + ": unknown embedding key '" + key + "'");
            }
        } else if (section == "index") {
            if (key == "M") config.index.M = parse_size_value(value, where);
            else if (key == "ef_construction")
                config.index.ef_construction = parse_size_value(value, where);
            else if (key == "ef_search") config.ef_search = parse_size_value(value, where);
            else if (key == "seed") config.index.seed = parse_size_value(value, where);
            else throw ParseError(where + ": unknown index key '" + key + "'");
        } else if (section == "evaluate") {
            if (key == "methods") config.methods = split_list(value, ',');
            else if (key == "metric") config.metric = parse_metric(value);
            else if (key == "metric_cutoff") config.metric_cutoff = parse_size_value(value, where);
            else if (key == "retrieval_k") config.retrieval_k = parse_size_value(value, where);
            else if (key == "repetitions")
                config.timing_repetitions = parse_size_value(value, where);
            else if (key == "qrels") {
                config.relevance_path = base / value;
                config.relevance_is_classes = false;
            } else if (key == "classes") {
                config.relevance_path = base / value;
                config.relevance_is_classes = true;
            } else {
                throw ParseError(where + ": unknown evaluate key '" + key + "'");
            }
        } else if (section == "configs") {
            std::vector<std::string> rankers = split_list(value, '+');
            if (rankers.empty())
                throw ParseError(where + ": configuration '" + key + "' lists no rankers");
            config.configs.emplace_back(key, std::move(rankers));
        } else {
            throw ParseError(where + ": key outside a known section");
        }
    }
    if (config.kinds.empty()) config.kinds.push_back(EmbeddingKind::Vertex);
    return config;
}

namespace {

std::vector<std::pair<std::string, std::vector<std::string>>> resolve_configs(
    const PipelineConfig& config, const Manifest& manifest) {
    if (!config.configs.empty()) {
        for (const auto& [name, rankers] : config.configs) {
            (void)name;
            for (const auto& ranker : rankers) manifest.ranker(ranker); // existence check
        }
        return config.configs;
    }
    return {{"all", manifest.ranker_ids()}};
}

std::filesystem::path artifact_path(const PipelineConfig& config, const std::string& config_name,
                                    EmbeddingKind kind, const char* what) {
    return config.artifacts_dir / (config_name + "-" + to_string(kind) + "." + what);
}

constexpr std::uint32_t kEnvelopeVersion = 1;

void write_envelope(BinaryWriter& w, std::uint64_t hash) {
    w.magic("FVAR");
    w.u32(kEnvelopeVersion);
    w.u64(hash);
}

void check_envelope(BinaryReader& r, std::uint64_t expected_hash, const std::string& what) {
    r.expect_magic("FVAR", what);
    const std::uint32_t version = r.u32();
    if (version != kEnvelopeVersion)
        throw LoadError(what + ": unsupported artifact version " + std::to_string(version));
    const std::uint64_t hash = r.u64();
    if (hash != expected_hash)
        throw LoadError(what + ": artifact does not match the current inputs and parameters; "
                               "rerun build");
}

} // namespace

std::uint64_t pipeline_hash(const PipelineConfig& config, const Manifest& manifest,
                            const std::string& config_name,
                            const std::vector<std::string>& rankers, EmbeddingKind kind) {
    Fnv1a64 hash;
    hash.update_file(config.manifest_path);
    for (const auto& ranker : rankers) {
        hash.update(ranker);
        hash.update_file(manifest.run_file(manifest.ranker(ranker)));
    }
    hash.update(config_name);
    hash.update_u64(manifest.cutoff);
    hash.update(to_string(kind));
    if (kind == EmbeddingKind::Kernel) {
        hash.update_u64(config.codebook.size);
        hash.update_f64(config.codebook.sigma);
        hash.update(to_string(config.codebook.strategy));
        hash.update_u64(config.codebook.seed);
    }
    hash.update_u64(config.index.M);
    hash.update_u64(config.index.ef_construction);
    hash.update_u64(config.index.seed);
    return hash.digest();
}

std::map<EmbeddingKind, KindArtifacts> build_config_artifacts(
    const RankStore& store, const std::vector<ItemId>& items,
    const std::vector<EmbeddingKind>& kinds, const CodebookConfig& codebook,
    const AnnParams& index_params, std::size_t threads) {
    // Fusion graphs once per configuration; shared by every embedding kind.
    std::vector<FusionGraph> graphs(items.size());
    parallel_for(0, items.size(), threads, [&](std::size_t i) {
        graphs[i] = extract_fusion_graph(store.rank_set(items[i]), store);
    });

    std::map<EmbeddingKind, KindArtifacts> out;
    for (EmbeddingKind kind : kinds) {
        EmbeddingSpace space = [&] {
            switch (kind) {
                case EmbeddingKind::Vertex: return EmbeddingSpace::vertex(items);
                case EmbeddingKind::Hybrid: return EmbeddingSpace::hybrid(items);
                case EmbeddingKind::Kernel: {
                    std::vector<Subgraph> population;
                    for (const auto& fg : graphs) {
                        auto subgraphs = extract_subgraphs(fg);
                        population.insert(population.end(),
                                          std::make_move_iterator(subgraphs.begin()),
                                          std::make_move_iterator(subgraphs.end()));
                    }
                    if (population.empty())
                        throw InvalidInputError("no subgraphs available to quantize a codebook");
                    const std::size_t size =
                        codebook.size == 0 ? std::min<std::size_t>(500, population.size())
                                           : codebook.size;
                    return EmbeddingSpace::kernel(
                        items, build_codebook(population, size, codebook.strategy, codebook.sigma,
                                              codebook.seed));
                }
            }
            throw InvalidInputError("unknown embedding kind");
        }();

        auto vectors = std::make_unique<VectorCollection>(space.attribute_count());
        {
            std::vector<FusionVector> embedded(items.size());
            parallel_for(0, items.size(), threads,
                         [&](std::size_t i) { embedded[i] = embed(graphs[i], space); });
            for (std::size_t i = 0; i < items.size(); ++i)
                vectors->add(items[i], std::move(embedded[i]));
        }
        auto index = std::make_unique<AnnIndex>(AnnIndex::build(*vectors, index_params));

        KindArtifacts artifacts;
        artifacts.space = std::move(space);
        artifacts.vectors = std::move(vectors);
        artifacts.index = std::move(index);
        out.emplace(kind, std::move(artifacts));
    }
    return out;
}

void cmd_build(const PipelineConfig& config, std::ostream& log) {
    if (config.manifest_path.empty())
        throw UsageError("build requires a manifest");
    const Manifest manifest = parse_manifest(config.manifest_path);
    const RankStore store = load_rank_store(manifest);
    const auto configs = resolve_configs(config, manifest);

    std::filesystem::create_directories(config.artifacts_dir);

    // Everything lands in temp files first; final names appear only when the
    // whole build has succeeded.
    std::vector<std::pair<std::filesystem::path, std::filesystem::path>> pending;
    auto stage_file = [&pending](const std::filesystem::path& final_path) {
        std::filesystem::path tmp = final_path;
        tmp += ".tmp";
        pending.emplace_back(tmp, final_path);
        return tmp;
    };

    try {
        for (const auto& [config_name, rankers] : configs) {
            const RankStore subset = store.subset(rankers);
            auto artifacts = build_config_artifacts(subset, manifest.items, config.kinds,
                                                    config.codebook, config.index, config.threads);
            for (const auto& [kind, built] : artifacts) {
                const std::uint64_t hash =
                    pipeline_hash(config, manifest, config_name, rankers, kind);
                {
                    std::ofstream out(stage_file(artifact_path(config, config_name, kind, "space")),
                                      std::ios::binary);
                    BinaryWriter w(out);
                    write_envelope(w, hash);
                    built.space.save(out);
                    if (!out) throw LoadError("failed writing space artifact");
                }
                {
                    std::ofstream out(
                        stage_file(artifact_path(config, config_name, kind, "vectors")),
                        std::ios::binary);
                    BinaryWriter w(out);
                    write_envelope(w, hash);
                    built.vectors->save(out);
                    if (!out) throw LoadError("failed writing vectors artifact");
                }
                {
                    std::ofstream out(stage_file(artifact_path(config, config_name, kind, "index")),
                                      std::ios::binary);
                    BinaryWriter w(out);
                    write_envelope(w, hash);
                    persist_index(*built.index, out);
                    if (!out) throw LoadError("failed writing index artifact");
                }
                log << "built " << config_name << "/" << to_string(kind) << ": "
                    << built.vectors->size() << " vectors, dim " << built.space.attribute_count()
                    << "\n";
            }
        }
    } catch (...) {
        for (const auto& [tmp, final_path] : pending) {
            (void)final_path;
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
        }
        throw;
    }
    for (const auto& [tmp, final_path] : pending)
        std::filesystem::rename(tmp, final_path);
}

namespace {

struct LoadedArtifacts {
    EmbeddingSpace space;
    std::unique_ptr<VectorCollection> vectors;
    std::unique_ptr<AnnIndex> index; ///< loaded on demand
};

LoadedArtifacts load_artifacts(const PipelineConfig& config, const Manifest& manifest,
                               const std::string& config_name,
                               const std::vector<std::string>& rankers, EmbeddingKind kind,
                               bool with_index) {
    const std::uint64_t hash = pipeline_hash(config, manifest, config_name, rankers, kind);
    LoadedArtifacts loaded;
    {
        const auto path = artifact_path(config, config_name, kind, "space");
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw LoadError("missing artifact '" + path.string() + "'; run build first");
        BinaryReader r(in);
        check_envelope(r, hash, "space artifact");
        loaded.space = EmbeddingSpace::load(in);
        r.expect_eof("space artifact");
    }
    {
        const auto path = artifact_path(config, config_name, kind, "vectors");
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw LoadError("missing artifact '" + path.string() + "'; run build first");
        BinaryReader r(in);
        check_envelope(r, hash, "vectors artifact");
        loaded.vectors = std::make_unique<VectorCollection>(VectorCollection::load(in));
        r.expect_eof("vectors artifact");
    }
    if (with_index) {
        const auto path = artifact_path(config, config_name, kind, "index");
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw LoadError("missing artifact '" + path.string() + "'; run build first");
        BinaryReader r(in);
        check_envelope(r, hash, "index artifact");
        loaded.index = std::make_unique<AnnIndex>(load_index(in, *loaded.vectors));
        r.expect_eof("index artifact");
    }
    return loaded;
}

struct MethodSpec {
    enum class Family { FvExact, FvFast, Rrf, Borda, CombSum, MedianRank, SingleRanker, BestSingle };
    Family family = Family::FvExact;
    EmbeddingKind kind = EmbeddingKind::Vertex;
    std::string ranker;
    std::string name;
};

MethodSpec parse_method(const std::string& name) {
    MethodSpec spec;
    spec.name = name;
    if (name == "rrf") spec.family = MethodSpec::Family::Rrf;
    else if (name == "borda") spec.family = MethodSpec::Family::Borda;
    else if (name == "combsum") spec.family = MethodSpec::Family::CombSum;
    else if (name == "medianrank") spec.family = MethodSpec::Family::MedianRank;
    else if (name == "best-single") spec.family = MethodSpec::Family::BestSingle;
    else if (name.rfind("ranker:", 0) == 0) {
        spec.family = MethodSpec::Family::SingleRanker;
        spec.ranker = name.substr(7);
        if (spec.ranker.empty())
            throw UsageError("method 'ranker:' needs a ranker id");
    } else if (name.rfind("fv-", 0) == 0) {
        std::string tail = name.substr(3);
        spec.family = MethodSpec::Family::FvExact;
        if (tail.size() > 5 && tail.substr(tail.size() - 5) == "-fast") {
            spec.family = MethodSpec::Family::FvFast;
            tail = tail.substr(0, tail.size() - 5);
        }
        if (tail == "v") spec.kind = EmbeddingKind::Vertex;
        else if (tail == "h") spec.kind = EmbeddingKind::Hybrid;
        else if (tail == "k") spec.kind = EmbeddingKind::Kernel;
        else throw UsageError("unknown method '" + name + "'");
    } else {
        throw UsageError("unknown method '" + name + "'");
    }
    return spec;
}

void truncate_rank(Rank& rank, std::size_t k) {
    if (k > 0 && rank.entries.size() > k) rank.entries.resize(k);
}

QueryPipelineFactory make_fv_factory(const RankStore& store, const LoadedArtifacts& artifacts,
                                     bool fast, std::size_t k, std::size_t ef_search) {
    return [&store, &artifacts, fast, k, ef_search](const ItemId& query, Rank& out) {
        auto graph = std::make_shared<FusionGraph>();
        auto vec = std::make_shared<FusionVector>();
        PipelineStages stages;
        stages.extract = [&store, query, graph] {
            *graph = extract_fusion_graph(store.rank_set(query), store);
        };
        stages.embed = [&artifacts, graph, vec] { *vec = embed(*graph, artifacts.space); };
        stages.retrieve = [&artifacts, vec, fast, k, ef_search, &out] {
            out = fast ? artifacts.index->search(*vec, k, ef_search)
                       : brute_force_search(*vec, *artifacts.vectors, k);
        };
        return stages;
    };
}

QueryPipelineFactory make_baseline_factory(const RankStore& store, MethodSpec::Family family,
                                           std::size_t k) {
    const std::size_t cutoff = store.cutoff();
    return [&store, family, k, cutoff](const ItemId& query, Rank& out) {
        auto rank_set = std::make_shared<RankSet>();
        PipelineStages stages;
        stages.extract = [&store, query, rank_set] { *rank_set = store.rank_set(query); };
        stages.retrieve = [rank_set, family, k, cutoff, &out] {
            AggregatedRank aggregated;
            switch (family) {
                case MethodSpec::Family::Rrf: aggregated = rrf(*rank_set); break;
                case MethodSpec::Family::Borda: aggregated = borda(*rank_set, cutoff); break;
                case MethodSpec::Family::CombSum: aggregated = comb_sum(*rank_set); break;
                case MethodSpec::Family::MedianRank:
                    aggregated = median_rank(*rank_set, cutoff);
                    break;
                default: throw InvalidInputError("not a baseline method");
            }
            out = aggregated.to_rank();
            truncate_rank(out, k);
        };
        return stages;
    };
}

QueryPipelineFactory make_single_ranker_factory(const RankStore& store, const std::string& ranker,
                                                std::size_t k) {
    return [&store, ranker, k](const ItemId& query, Rank& out) {
        PipelineStages stages;
        stages.retrieve = [&store, ranker, query, k, &out] {
            out = store.rank(ranker, query);
            truncate_rank(out, k);
        };
        return stages;
    };
}

} // namespace

EvaluateOutcome run_evaluation(const PipelineConfig& config) {
    if (config.manifest_path.empty())
        throw UsageError("evaluate requires a manifest");
    if (config.methods.empty())
        throw UsageError("evaluate requires a non-empty method list");
    if (config.relevance_path.empty())
        throw UsageError("evaluate requires qrels or a class-label file");

    const Manifest manifest = parse_manifest(config.manifest_path);
    const RankStore store = load_rank_store(manifest);
    const Qrels qrels = Qrels::load(config.relevance_path, config.relevance_is_classes);
    const auto configs = resolve_configs(config, manifest);

    std::vector<MethodSpec> methods;
    methods.reserve(config.methods.size());
    for (const auto& name : config.methods) methods.push_back(parse_method(name));

    ProtocolOptions options;
    options.retrieval_k = config.retrieval_k;
    options.metric_cutoff = config.metric_cutoff;
    options.timing_repetitions = config.timing_repetitions;
    options.threads = config.threads;

    EvaluateOutcome outcome;
    PerformanceTable table;

    for (const auto& [config_name, rankers] : configs) {
        const RankStore subset = store.subset(rankers);

        std::map<EmbeddingKind, LoadedArtifacts> loaded;
        for (const auto& method : methods) {
            if (method.family != MethodSpec::Family::FvExact &&
                method.family != MethodSpec::Family::FvFast)
                continue;
            const bool with_index = method.family == MethodSpec::Family::FvFast;
            auto it = loaded.find(method.kind);
            if (it == loaded.end()) {
                loaded.emplace(method.kind, load_artifacts(config, manifest, config_name, rankers,
                                                           method.kind, with_index));
            } else if (with_index && !it->second.index) {
                it->second = load_artifacts(config, manifest, config_name, rankers, method.kind,
                                            true);
            }
        }

        std::vector<ProtocolResult> results;
        for (const auto& method : methods) {
            ProtocolResult result;
            switch (method.family) {
                case MethodSpec::Family::FvExact:
                case MethodSpec::Family::FvFast: {
                    const auto& artifacts = loaded.at(method.kind);
                    result = run_protocol(
                        subset, method.name,
                        make_fv_factory(subset, artifacts,
                                        method.family == MethodSpec::Family::FvFast,
                                        config.retrieval_k, config.ef_search),
                        qrels, config.metric, options);
                    break;
                }
                case MethodSpec::Family::Rrf:
                case MethodSpec::Family::Borda:
                case MethodSpec::Family::CombSum:
                case MethodSpec::Family::MedianRank:
                    result = run_protocol(subset, method.name,
                                          make_baseline_factory(subset, method.family,
                                                                config.retrieval_k),
                                          qrels, config.metric, options);
                    break;
                case MethodSpec::Family::SingleRanker:
                    result = run_protocol(subset, method.name,
                                          make_single_ranker_factory(subset, method.ranker,
                                                                     config.retrieval_k),
                                          qrels, config.metric, options);
                    break;
                case MethodSpec::Family::BestSingle: {
                    // Standalone evaluation of every ranker in the subset;
                    // the best mean wins.
                    bool first = true;
                    for (const auto& ranker : rankers) {
                        ProtocolResult candidate = run_protocol(
                            subset, method.name,
                            make_single_ranker_factory(subset, ranker, config.retrieval_k), qrels,
                            config.metric, options);
                        if (first || candidate.mean_metric > result.mean_metric) {
                            result = std::move(candidate);
                            first = false;
                        }
                    }
                    break;
                }
            }
            table.set(method.name, manifest.name, config_name, result.mean_metric);
            results.push_back(std::move(result));
        }
        outcome.per_config.emplace_back(config_name, std::move(results));
    }

    outcome.winning = winning_numbers(table);
    return outcome;
}

void cmd_evaluate(const PipelineConfig& config, std::ostream& log) {
    const EvaluateOutcome outcome = run_evaluation(config);
    const Manifest manifest = parse_manifest(config.manifest_path);
    std::filesystem::create_directories(config.reports_dir);

    const std::string metric_name = to_string(config.metric) == "ndcg"
                                        ? "ndcg@" + std::to_string(config.metric_cutoff)
                                        : "ns";
    {
        std::ofstream out(config.reports_dir / "effectiveness.csv");
        out << "method,dataset,config,metric,value\n";
        for (const auto& [config_name, results] : outcome.per_config)
            for (const auto& result : results)
                out << result.method << ',' << manifest.name << ',' << config_name << ','
                    << metric_name << ',' << format_value(result.mean_metric) << '\n';
    }
    {
        std::ofstream out(config.reports_dir / "timing.csv");
        out << "method,config,stage,mean_ms\n";
        for (const auto& [config_name, results] : outcome.per_config) {
            for (const auto& result : results) {
                out << result.method << ',' << config_name << ",extract,"
                    << format_value(result.mean_times.extract_ms) << '\n';
                out << result.method << ',' << config_name << ",embed,"
                    << format_value(result.mean_times.embed_ms) << '\n';
                out << result.method << ',' << config_name << ",retrieve,"
                    << format_value(result.mean_times.retrieve_ms) << '\n';
                out << result.method << ',' << config_name << ",total,"
                    << format_value(result.mean_times.total_ms) << '\n';
            }
        }
    }
    {
        std::ofstream out(config.reports_dir / "winning.csv");
        out << "method,winning_number\n";
        for (const auto& [method, wins] : outcome.winning)
            out << method << ',' << wins << '\n';
    }
    {
        std::ofstream out(config.reports_dir / "flags.csv");
        out << "method,config,query,flag\n";
        for (const auto& [config_name, results] : outcome.per_config)
            for (const auto& result : results)
                for (const auto& query : result.zero_relevant_queries)
                    out << result.method << ',' << config_name << ',' << query
                        << ",no-relevant-items\n";
    }

    for (const auto& [config_name, results] : outcome.per_config)
        for (const auto& result : results)
            log << config_name << " " << result.method << " " << metric_name << " = "
                << format_value(result.mean_metric) << "\n";
}

void cmd_search(const PipelineConfig& config, const SearchRequest& request, std::ostream& out) {
    const Manifest manifest = parse_manifest(config.manifest_path);
    const RankStore store = load_rank_store(manifest);
    const auto configs = resolve_configs(config, manifest);

    const auto* selected = &configs.front();
    if (!request.config_name.empty()) {
        selected = nullptr;
        for (const auto& entry : configs)
            if (entry.first == request.config_name) selected = &entry;
        if (!selected)
            throw UsageError("unknown configuration '" + request.config_name + "'");
    }
    const auto& [config_name, rankers] = *selected;
    const RankStore subset = store.subset(rankers);

    const LoadedArtifacts artifacts = load_artifacts(config, manifest, config_name, rankers,
                                                     request.kind, request.approximate);

    RankSet rank_set;
    ItemId query;
    if (request.query_id.has_value()) {
        query = *request.query_id;
        if (!subset.has_query(query))
            throw UnknownItemError("query '" + query + "' is not in the collection");
        rank_set = subset.rank_set(query);
    } else if (request.query_rank_file.has_value()) {
        const auto raw_ranks = parse_run_file(*request.query_rank_file);
        if (raw_ranks.empty())
            throw InvalidInputError("query rank file contains no entries");
        query = raw_ranks.front().query;
        rank_set.query = query;
        for (const auto& ranker : rankers) {
            const Rank* raw = nullptr;
            for (const auto& candidate : raw_ranks) {
                if (candidate.query != query)
                    throw InvalidInputError("query rank file mixes several queries");
                if (candidate.ranker == ranker) raw = &candidate;
            }
            if (!raw)
                throw IncompleteStoreError("query rank file lacks a rank from '" + ranker + "'");
            rank_set.ranks.push_back(subset.normalize_external(*raw, ranker));
            rank_set.ranks.back().query = query;
        }
    } else {
        throw UsageError("search needs --query or --query-file");
    }

    const FusionGraph graph = extract_fusion_graph(rank_set, subset);
    const FusionVector vec = embed(graph, artifacts.space);
    const std::size_t k = std::min(request.k, artifacts.vectors->size());
    Rank result = request.approximate
                      ? artifacts.index->search(vec, std::max<std::size_t>(k, 1), config.ef_search)
                      : brute_force_search(vec, *artifacts.vectors, std::max<std::size_t>(k, 1));
    result.query = query;
    result.ranker = "fv-" + std::string(1, to_string(request.kind)[0]) +
                    (request.approximate ? "-fast" : "");
    write_rank(out, result);
}

void cmd_dump_graph(const PipelineConfig& config, const std::string& config_name,
                    const ItemId& query, std::ostream& out) {
    const Manifest manifest = parse_manifest(config.manifest_path);
    const RankStore store = load_rank_store(manifest);
    const auto configs = resolve_configs(config, manifest);
    const auto* selected = &configs.front();
    if (!config_name.empty()) {
        selected = nullptr;
        for (const auto& entry : configs)
            if (entry.first == config_name) selected = &entry;
        if (!selected)
            throw UsageError("unknown configuration '" + config_name + "'");
    }
    const RankStore subset = store.subset(selected->second);
    if (!subset.has_query(query))
        throw UnknownItemError("query '" + query + "' is not in the collection");
    dump_graph(extract_fusion_graph(subset.rank_set(query), subset), out);
}

void cmd_dump_vector(const PipelineConfig& config, const std::string& config_name,
                     EmbeddingKind kind, const ItemId& item, std::ostream& out) {
    const Manifest manifest = parse_manifest(config.manifest_path);
    const auto configs = resolve_configs(config, manifest);
    const auto* selected = &configs.front();
    if (!config_name.empty()) {
        selected = nullptr;
        for (const auto& entry : configs)
            if (entry.first == config_name) selected = &entry;
        if (!selected)
            throw UsageError("unknown configuration '" + config_name + "'");
    }
    const LoadedArtifacts artifacts =
        load_artifacts(config, manifest, selected->first, selected->second, kind, false);
    const FusionVector* vec = artifacts.vectors->find(item);
    if (!vec)
        throw UnknownItemError("item '" + item + "' has no stored vector");
    out << item << ' ';
    dump_vector(*vec, out);
}

FidelityReport measure_index_fidelity(const VectorCollection& coll, const AnnIndex& index,
                                      std::size_t queries, std::size_t k,
                                      std::size_t ef_search) {
    using Clock = std::chrono::steady_clock;
    FidelityReport report;
    if (coll.empty() || queries == 0) return report;
    queries = std::min(queries, coll.size());
    const std::size_t stride = coll.size() / queries;

    double recall_sum = 0.0;
    double ann_ms = 0.0;
    double brute_ms = 0.0;
    for (std::size_t qi = 0; qi < queries; ++qi) {
        const FusionVector& query = coll.vector_at(qi * stride);

        const auto brute_start = Clock::now();
        const Rank truth = brute_force_search(query, coll, k);
        brute_ms += std::chrono::duration<double, std::milli>(Clock::now() - brute_start).count();

        const auto ann_start = Clock::now();
        const Rank approx = index.search(query, k, ef_search);
        ann_ms += std::chrono::duration<double, std::milli>(Clock::now() - ann_start).count();

        std::set<ItemId> truth_items;
        for (const auto& e : truth.entries) truth_items.insert(e.item);
        std::size_t hits = 0;
        for (const auto& e : approx.entries) hits += truth_items.count(e.item);
        recall_sum += static_cast<double>(hits) / static_cast<double>(truth.entries.size());
    }
    report.recall_at_k = recall_sum / static_cast<double>(queries);
    report.ann_mean_ms = ann_ms / static_cast<double>(queries);
    report.brute_mean_ms = brute_ms / static_cast<double>(queries);
    return report;
}

void cmd_bench(const BenchParams& params, std::ostream& out) {
    const VectorCollection coll = make_sparse_cluster_collection(params.data);
    const auto build_start = std::chrono::steady_clock::now();
    const AnnIndex index = AnnIndex::build(coll, params.index);
    const double build_ms = std::chrono::duration<double, std::milli>(
                                std::chrono::steady_clock::now() - build_start)
                                .count();
    out << "# vectors=" << coll.size() << " dim=" << coll.dim() << " build_ms="
        << format_value(build_ms) << "\n";
    out << "ef_search,recall_at_" << params.k << ",ann_mean_ms,brute_mean_ms,speedup\n";
    for (std::size_t ef : params.ef_search) {
        const FidelityReport report =
            measure_index_fidelity(coll, index, params.queries, params.k, ef);
        out << ef << ',' << format_value(report.recall_at_k) << ','
            << format_value(report.ann_mean_ms) << ',' << format_value(report.brute_mean_ms)
            << ',' << format_value(report.speedup()) << '\n';
    }
}

} // namespace fvr
