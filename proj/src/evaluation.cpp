#include "fvrank/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fvrank/error.hpp"
#include "fvrank/parallel.hpp"

namespace fvr {

void Qrels::set(const ItemId& query, const ItemId& item, int relevance) {
    if (relevance != 0 && relevance != 1)
        throw InvalidInputError("relevance must be 0 or 1");
    if (relevance == 1)
        relevant_[query].insert(item);
    else {
        auto it = relevant_.find(query);
        if (it != relevant_.end()) it->second.erase(item);
    }
}

int Qrels::relevance(const ItemId& query, const ItemId& item) const {
    auto it = relevant_.find(query);
    return it != relevant_.end() && it->second.count(item) ? 1 : 0;
}

std::size_t Qrels::relevant_count(const ItemId& query) const {
    auto it = relevant_.find(query);
    return it == relevant_.end() ? 0 : it->second.size();
}

Qrels Qrels::from_class_labels(const std::map<ItemId, std::string>& labels) {
    std::map<std::string, std::vector<ItemId>> by_class;
    for (const auto& [item, cls] : labels) by_class[cls].push_back(item);
    Qrels qrels;
    for (const auto& [cls, members] : by_class) {
        (void)cls;
        for (const auto& query : members)
            for (const auto& item : members) qrels.relevant_[query].insert(item);
    }
    return qrels;
}

namespace {

std::string strip_line(const std::string& line) {
    std::string text = line;
    std::size_t hash = text.find('#');
    if (hash != std::string::npos) text.resize(hash);
    std::size_t b = text.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = text.find_last_not_of(" \t\r\n");
    return text.substr(b, e - b + 1);
}

} // namespace

Qrels Qrels::parse(std::istream& in, const std::string& source_name) {
    Qrels qrels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string text = strip_line(line);
        if (text.empty()) continue;
        std::istringstream fields(text);
        std::string query, item, rel;
        if (!(fields >> query >> item >> rel) || (rel != "0" && rel != "1"))
            throw ParseError(source_name + ":" + std::to_string(line_no) +
                             ": expected '<query> <item> <0|1>'");
        if (rel == "1") qrels.relevant_[query].insert(item);
    }
    return qrels;
}

Qrels Qrels::parse_class_file(std::istream& in, const std::string& source_name) {
    std::map<ItemId, std::string> labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string text = strip_line(line);
        if (text.empty()) continue;
        std::istringstream fields(text);
        std::string item, cls;
        if (!(fields >> item >> cls))
            throw ParseError(source_name + ":" + std::to_string(line_no) +
                             ": expected '<item> <class>'");
        if (!labels.emplace(item, cls).second)
            throw ParseError(source_name + ":" + std::to_string(line_no) +
                             ": duplicate item '" + item + "'");
    }
    return from_class_labels(labels);
}

Qrels Qrels::load(const std::filesystem::path& path, bool class_labels) {
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open '" + path.string() + "'");
    return class_labels ? parse_class_file(in, path.filename().string())
                        : parse(in, path.filename().string());
}

double ndcg_at_k(const Rank& rank, const Qrels& qrels, std::size_t k, bool* no_relevant) {
    if (k == 0)
        throw InvalidInputError("ndcg cutoff must be at least 1");
    const std::size_t total_relevant = qrels.relevant_count(rank.query);
    if (no_relevant) *no_relevant = total_relevant == 0;
    if (total_relevant == 0) return 0.0;

    double dcg = 0.0;
    const std::size_t depth = std::min(k, rank.entries.size());
    for (std::size_t i = 0; i < depth; ++i) {
        if (qrels.relevance(rank.query, rank.entries[i].item))
            dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    }
    double idcg = 0.0;
    const std::size_t ideal_depth = std::min(k, total_relevant);
    for (std::size_t i = 0; i < ideal_depth; ++i)
        idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    return dcg / idcg;
}

double ns_score(const Rank& rank, const Qrels& qrels) {
    const std::size_t depth = std::min<std::size_t>(4, rank.entries.size());
    double hits = 0.0;
    for (std::size_t i = 0; i < depth; ++i)
        hits += qrels.relevance(rank.query, rank.entries[i].item);
    return hits;
}

void PerformanceTable::set(const std::string& method, const std::string& dataset,
                           const std::string& config, double value) {
    methods_.insert(method);
    cells_.insert({dataset, config});
    values_[{method, dataset, config}] = value;
}

double PerformanceTable::get(const std::string& method, const std::string& dataset,
                             const std::string& config) const {
    auto it = values_.find({method, dataset, config});
    if (it == values_.end())
        throw InvalidInputError("no value for (" + method + ", " + dataset + ", " + config + ")");
    return it->second;
}

std::map<std::string, std::size_t> winning_numbers(const PerformanceTable& table) {
    std::vector<std::string> missing;
    for (const auto& method : table.methods())
        for (const auto& [dataset, config] : table.cells()) {
            try {
                table.get(method, dataset, config);
            } catch (const InvalidInputError&) {
                missing.push_back("(" + method + ", " + dataset + ", " + config + ")");
            }
        }
    if (!missing.empty()) {
        std::string detail = "performance grid incomplete; missing cells:";
        for (const auto& cell : missing) detail += " " + cell;
        throw InvalidInputError(detail);
    }

    std::map<std::string, std::size_t> wins;
    for (const auto& method : table.methods()) wins[method] = 0;
    for (const auto& [dataset, config] : table.cells()) {
        for (const auto& method : table.methods()) {
            const double mine = table.get(method, dataset, config);
            for (const auto& competitor : table.methods()) {
                if (competitor == method) continue;
                if (mine > table.get(competitor, dataset, config)) ++wins[method];
            }
        }
    }
    return wins;
}

StageTimes TimingReport::mean() const {
    StageTimes m;
    if (repetitions.empty()) return m;
    for (const auto& r : repetitions) {
        m.extract_ms += r.extract_ms;
        m.embed_ms += r.embed_ms;
        m.retrieve_ms += r.retrieve_ms;
        m.total_ms += r.total_ms;
    }
    const double n = static_cast<double>(repetitions.size());
    m.extract_ms /= n;
    m.embed_ms /= n;
    m.retrieve_ms /= n;
    m.total_ms /= n;
    return m;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_between(Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
}

StageTimes run_stages_once(const PipelineStages& stages) {
    StageTimes t;
    const auto start = Clock::now();
    if (stages.extract) stages.extract();
    const auto after_extract = Clock::now();
    if (stages.embed) stages.embed();
    const auto after_embed = Clock::now();
    if (stages.retrieve) stages.retrieve();
    const auto end = Clock::now();
    t.extract_ms = ms_between(start, after_extract);
    t.embed_ms = ms_between(after_extract, after_embed);
    t.retrieve_ms = ms_between(after_embed, end);
    t.total_ms = ms_between(start, end);
    return t;
}

} // namespace

TimingReport timed_query(const PipelineStages& stages, std::size_t repetitions) {
    run_stages_once(stages); // warm-up, discarded
    TimingReport report;
    report.repetitions.reserve(repetitions);
    for (std::size_t rep = 0; rep < repetitions; ++rep)
        report.repetitions.push_back(run_stages_once(stages));
    return report;
}

Metric parse_metric(const std::string& text) {
    if (text == "ndcg") return Metric::NdcgAtK;
    if (text == "ns") return Metric::NsScore;
    throw InvalidInputError("unknown metric '" + text + "'");
}

std::string to_string(Metric metric) {
    return metric == Metric::NdcgAtK ? "ndcg" : "ns";
}

double evaluate_metric(Metric metric, const Rank& rank, const Qrels& qrels, std::size_t cutoff,
                       bool* no_relevant) {
    if (metric == Metric::NdcgAtK) return ndcg_at_k(rank, qrels, cutoff, no_relevant);
    if (no_relevant) *no_relevant = qrels.relevant_count(rank.query) == 0;
    return ns_score(rank, qrels);
}

ProtocolResult run_protocol(const RankStore& store, const std::string& method_name,
                            const QueryPipelineFactory& factory, const Qrels& qrels,
                            Metric metric, const ProtocolOptions& options) {
    const std::vector<ItemId> queries = store.queries();
    ProtocolResult result;
    result.method = method_name;
    result.per_query.resize(queries.size());

    std::vector<StageTimes> times(queries.size());
    std::vector<char> flagged(queries.size(), 0);

    auto evaluate_one = [&](std::size_t qi) {
        const ItemId& query = queries[qi];
        Rank produced;
        produced.query = query;
        const PipelineStages stages = factory(query, produced);
        if (options.timing_repetitions > 0) {
            const TimingReport report = timed_query(stages, options.timing_repetitions);
            times[qi] = report.mean();
        } else {
            run_stages_once(stages);
        }
        produced.query = query;
        bool no_relevant = false;
        const double value =
            evaluate_metric(metric, produced, qrels, options.metric_cutoff, &no_relevant);
        result.per_query[qi] = {query, value};
        flagged[qi] = no_relevant ? 1 : 0;
    };

    // Timing runs stay sequential so measurements do not interfere.
    if (options.timing_repetitions > 0)
        for (std::size_t qi = 0; qi < queries.size(); ++qi) evaluate_one(qi);
    else
        parallel_for(0, queries.size(), options.threads, evaluate_one);

    double metric_sum = 0.0;
    StageTimes time_sum;
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        metric_sum += result.per_query[qi].second;
        time_sum.extract_ms += times[qi].extract_ms;
        time_sum.embed_ms += times[qi].embed_ms;
        time_sum.retrieve_ms += times[qi].retrieve_ms;
        time_sum.total_ms += times[qi].total_ms;
        if (flagged[qi]) result.zero_relevant_queries.push_back(queries[qi]);
    }
    if (!queries.empty()) {
        const double n = static_cast<double>(queries.size());
        result.mean_metric = metric_sum / n;
        result.mean_times = {time_sum.extract_ms / n, time_sum.embed_ms / n,
                             time_sum.retrieve_ms / n, time_sum.total_ms / n};
    }
    return result;
}

} // namespace fvr
