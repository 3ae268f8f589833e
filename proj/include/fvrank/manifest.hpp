#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "fvrank/core.hpp"

namespace fvr {

enum class NormalizationScope { PerRank, Global };

NormalizationScope parse_normalization_scope(const std::string& text);
std::string to_string(NormalizationScope scope);

struct RankerSpec {
    std::string id;
    NormalizationMode mode = NormalizationMode::MinMaxInvert;
    std::string run_path; ///< relative to the manifest directory unless absolute
};

/// Collection manifest: item universe, rankers with their normalization mode
/// and run file, and the rank cut-off L.
///
/// File format: '#' comments, `[section]` headers, `key = value` lines.
///   [collection]   name, L, scope (per-rank | global)
///   [items]        one `item = <id>` line per item
///   [ranker <id>]  mode, run
struct Manifest {
    std::string name = "collection";
    std::size_t cutoff = 0;
    NormalizationScope scope = NormalizationScope::PerRank;
    std::vector<ItemId> items;        ///< sorted, duplicate-free
    std::vector<RankerSpec> rankers;  ///< in declaration order
    std::filesystem::path base_dir;

    std::vector<std::string> ranker_ids() const;
    const RankerSpec& ranker(const std::string& id) const;
    bool has_item(const ItemId& id) const;
    std::filesystem::path run_file(const RankerSpec& spec) const;
};

Manifest parse_manifest(const std::filesystem::path& path);
Manifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir);
void write_manifest(const Manifest& manifest, std::ostream& out);

/// Parses one run file. Line format:
///   <query-id> <ranker-id> <item-id> <position> <score>
/// Entries may appear in any order; they are grouped by (ranker, query) and
/// sorted by position. Returns raw (un-normalized) ranks.
std::vector<Rank> parse_run_file(std::istream& in, const std::string& source_name);
std::vector<Rank> parse_run_file(const std::filesystem::path& path);

void write_run_entry(std::ostream& out, const ItemId& query, const std::string& ranker,
                     const RankEntry& entry);
void write_rank(std::ostream& out, const Rank& rank);

/// Loads every run file named by the manifest, normalizes scores per ranker
/// mode (normalization sees the full run-depth rank; truncation to L happens
/// afterwards) and verifies the closed-world requirement: every ranker covers
/// every manifest item as a query. Global scope computes one min/max per
/// ranker over all its runs before normalizing.
RankStore load_rank_store(const Manifest& manifest);

} // namespace fvr
