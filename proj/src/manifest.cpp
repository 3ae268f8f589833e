#include "fvrank/manifest.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace fvr {

NormalizationScope parse_normalization_scope(const std::string& text) {
    if (text == "per-rank") return NormalizationScope::PerRank;
    if (text == "global") return NormalizationScope::Global;
    throw InvalidInputError("unknown normalization scope '" + text + "'");
}

std::string to_string(NormalizationScope scope) {
    return scope == NormalizationScope::PerRank ? "per-rank" : "global";
}

std::vector<std::string> Manifest::ranker_ids() const {
    std::vector<std::string> ids;
    ids.reserve(rankers.size());
    for (const auto& r : rankers) ids.push_back(r.id);
    return ids;
}

const RankerSpec& Manifest::ranker(const std::string& id) const {
    for (const auto& r : rankers)
        if (r.id == id) return r;
    throw InvalidInputError("manifest has no ranker '" + id + "'");
}

bool Manifest::has_item(const ItemId& id) const {
    return std::binary_search(items.begin(), items.end(), id);
}

std::filesystem::path Manifest::run_file(const RankerSpec& spec) const {
    std::filesystem::path p(spec.run_path);
    return p.is_absolute() ? p : base_dir / p;
}

namespace {

std::string strip(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& line) {
    std::size_t pos = line.find('#');
    return pos == std::string::npos ? line : line.substr(0, pos);
}

std::size_t parse_size(const std::string& text, const std::string& where) {
    try {
        std::size_t consumed = 0;
        long long v = std::stoll(text, &consumed);
        if (consumed != text.size() || v < 0) throw std::invalid_argument(text);
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw ParseError(where + ": expected a non-negative integer, got '" + text + "'");
    }
}

} // namespace

Manifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir) {
    Manifest m;
    m.base_dir = base_dir;
    std::string section;
    std::string line;
    std::size_t line_no = 0;
    std::set<ItemId> seen_items;
    RankerSpec* current_ranker = nullptr;

    while (std::getline(in, line)) {
        ++line_no;
        const std::string where = "manifest line " + std::to_string(line_no);
        std::string text = strip(strip_comment(line));
        if (text.empty()) continue;

        if (text.front() == '[') {
            if (text.back() != ']')
                throw ParseError(where + ": unterminated section header");
            section = strip(text.substr(1, text.size() - 2));
            current_ranker = nullptr;
            if (section.rfind("ranker ", 0) == 0) {
                RankerSpec spec;
                spec.id = strip(section.substr(7));
                if (spec.id.empty())
                    throw ParseError(where + ": empty ranker id");
                for (const auto& r : m.rankers)
                    if (r.id == spec.id)
                        throw ParseError(where + ": duplicate ranker '" + spec.id + "'");
                m.rankers.push_back(spec);
                current_ranker = &m.rankers.back();
            }
            continue;
        }

        std::size_t eq = text.find('=');
        if (eq == std::string::npos)
            throw ParseError(where + ": expected 'key = value'");
        std::string key = strip(text.substr(0, eq));
        std::string value = strip(text.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ParseError(where + ": empty key or value");

        if (section == "collection") {
            if (key == "name") m.name = value;
            else if (key == "L") m.cutoff = parse_size(value, where);
            else if (key == "scope") m.scope = parse_normalization_scope(value);
            else throw ParseError(where + ": unknown collection key '" + key + "'");
        } else if (section == "items") {
            if (key != "item")
                throw ParseError(where + ": unknown items key '" + key + "'");
            if (!seen_items.insert(value).second)
                throw ParseError(where + ": duplicate item '" + value + "'");
            m.items.push_back(value);
        } else if (current_ranker != nullptr) {
            if (key == "mode") current_ranker->mode = parse_normalization_mode(value);
            else if (key == "run") current_ranker->run_path = value;
            else throw ParseError(where + ": unknown ranker key '" + key + "'");
        } else {
            throw ParseError(where + ": key outside a known section");
        }
    }

    if (m.cutoff == 0)
        throw ParseError("manifest: missing or zero cut-off L");
    if (m.items.empty())
        throw ParseError("manifest: no items declared");
    if (m.rankers.empty())
        throw ParseError("manifest: no rankers declared");
    for (const auto& r : m.rankers)
        if (r.run_path.empty())
            throw ParseError("manifest: ranker '" + r.id + "' has no run file");
    std::sort(m.items.begin(), m.items.end());
    return m;
}

Manifest parse_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open manifest '" + path.string() + "'");
    return parse_manifest(in, path.parent_path());
}

void write_manifest(const Manifest& manifest, std::ostream& out) {
    out << "[collection]\n";
    out << "name = " << manifest.name << "\n";
    out << "L = " << manifest.cutoff << "\n";
    out << "scope = " << to_string(manifest.scope) << "\n\n";
    out << "[items]\n";
    for (const auto& id : manifest.items) out << "item = " << id << "\n";
    for (const auto& r : manifest.rankers) {
        out << "\n[ranker " << r.id << "]\n";
        out << "mode = " << to_string(r.mode) << "\n";
        out << "run = " << r.run_path << "\n";
    }
}

std::vector<Rank> parse_run_file(std::istream& in, const std::string& source_name) {
    // (ranker, query) -> entries; ordered map keeps output deterministic.
    std::map<std::pair<std::string, ItemId>, std::vector<RankEntry>> groups;
    std::string line;
    std::size_t line_no = 0;

    while (std::getline(in, line)) {
        ++line_no;
        std::string text = strip(strip_comment(line));
        if (text.empty()) continue;
        const std::string where = source_name + ":" + std::to_string(line_no);

        std::istringstream fields(text);
        std::string query, ranker, item, pos_text, score_text, extra;
        if (!(fields >> query >> ranker >> item >> pos_text >> score_text))
            throw ParseError(where + ": expected '<query> <ranker> <item> <position> <score>'");
        if (fields >> extra)
            throw ParseError(where + ": trailing field '" + extra + "'");

        RankEntry entry;
        entry.item = item;
        entry.position = parse_size(pos_text, where);
        if (entry.position == 0)
            throw ParseError(where + ": positions are 1-based");
        try {
            std::size_t consumed = 0;
            entry.score = std::stod(score_text, &consumed);
            if (consumed != score_text.size()) throw std::invalid_argument(score_text);
        } catch (const std::exception&) {
            throw ParseError(where + ": bad score '" + score_text + "'");
        }
        groups[{ranker, query}].push_back(std::move(entry));
    }

    std::vector<Rank> ranks;
    ranks.reserve(groups.size());
    for (auto& [key, entries] : groups) {
        std::sort(entries.begin(), entries.end(),
                  [](const RankEntry& a, const RankEntry& b) { return a.position < b.position; });
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (entries[i].position != i + 1)
                throw ParseError(source_name + ": rank (" + key.first + ", " + key.second +
                                 ") has a gap or duplicate at position " +
                                 std::to_string(entries[i].position));
        }
        Rank rank;
        rank.ranker = key.first;
        rank.query = key.second;
        rank.entries = std::move(entries);
        ranks.push_back(std::move(rank));
    }
    return ranks;
}

std::vector<Rank> parse_run_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open run file '" + path.string() + "'");
    return parse_run_file(in, path.filename().string());
}

void write_run_entry(std::ostream& out, const ItemId& query, const std::string& ranker,
                     const RankEntry& entry) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", entry.score);
    out << query << ' ' << ranker << ' ' << entry.item << ' ' << entry.position << ' ' << buf
        << '\n';
}

void write_rank(std::ostream& out, const Rank& rank) {
    for (const auto& entry : rank.entries)
        write_run_entry(out, rank.query, rank.ranker, entry);
}

RankStore load_rank_store(const Manifest& manifest) {
    RankStore store(manifest.ranker_ids(), manifest.cutoff);

    // Load each distinct run file once; several rankers may share one file.
    std::map<std::string, std::vector<Rank>> by_file;
    for (const auto& spec : manifest.rankers) {
        std::string path = manifest.run_file(spec).string();
        if (!by_file.count(path)) by_file[path] = parse_run_file(manifest.run_file(spec));
    }

    const std::vector<std::string> ranker_ids = manifest.ranker_ids();
    std::set<std::string> known_rankers(ranker_ids.begin(), ranker_ids.end());
    std::map<std::string, std::vector<Rank>> raw_by_ranker;
    for (auto& [path, ranks] : by_file) {
        for (auto& rank : ranks) {
            if (!known_rankers.count(rank.ranker))
                throw ParseError(path + ": run names ranker '" + rank.ranker +
                                 "' absent from the manifest");
            if (!manifest.has_item(rank.query))
                throw ParseError(path + ": query '" + rank.query +
                                 "' is not a manifest item");
            for (const auto& e : rank.entries)
                if (!manifest.has_item(e.item))
                    throw ParseError(path + ": item '" + e.item + "' is not a manifest item");
            raw_by_ranker[rank.ranker].push_back(std::move(rank));
        }
    }

    for (const auto& spec : manifest.rankers) {
        auto& raw_ranks = raw_by_ranker[spec.id];

        std::optional<ScoreStats> global;
        if (manifest.scope == NormalizationScope::Global &&
            spec.mode != NormalizationMode::ReciprocalInvert) {
            for (const auto& rank : raw_ranks) {
                for (const auto& e : rank.entries) {
                    if (!global) global = ScoreStats{e.score, e.score};
                    global->min = std::min(global->min, e.score);
                    global->max = std::max(global->max, e.score);
                }
            }
        }
        store.set_normalization(spec.id, spec.mode, global);

        for (auto& raw : raw_ranks) {
            Rank normalized = global ? normalize_scores(raw, spec.mode, *global)
                                     : normalize_scores(raw, spec.mode);
            for (std::size_t i = 1; i < normalized.entries.size(); ++i) {
                if (normalized.entries[i].score > normalized.entries[i - 1].score)
                    throw ParseError("rank (" + spec.id + ", " + raw.query +
                                     "): positions do not follow score order");
            }
            if (normalized.entries.size() > manifest.cutoff)
                normalized.entries.resize(manifest.cutoff);
            store.put(std::move(normalized));
        }
    }

    std::vector<std::pair<std::string, ItemId>> missing;
    for (const auto& spec : manifest.rankers)
        for (const auto& item : manifest.items)
            if (!store.has_rank(spec.id, item)) missing.emplace_back(spec.id, item);
    if (!missing.empty()) {
        std::string detail = "missing ranks:";
        for (const auto& [ranker, item] : missing)
            detail += " (" + ranker + ", " + item + ")";
        throw IncompleteStoreError(detail);
    }

    store.verify_closed_world();
    return store;
}

} // namespace fvr
