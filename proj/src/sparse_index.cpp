#include "fvrank/sparse_index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>

#include "fvrank/serialize.hpp"

namespace fvr {

namespace {

double sparse_dot(const FusionVector& a, const FusionVector& b) {
    double sum = 0.0;
    auto ia = a.entries.begin();
    auto ib = b.entries.begin();
    while (ia != a.entries.end() && ib != b.entries.end()) {
        if (ia->first < ib->first) ++ia;
        else if (ib->first < ia->first) ++ib;
        else { sum += ia->second * ib->second; ++ia; ++ib; }
    }
    return sum;
}

double cosine_from_parts(const FusionVector& a, double norm_a, const FusionVector& b,
                         double norm_b) {
    if (norm_a == 0.0 || norm_b == 0.0) return 1.0;
    const double d = 1.0 - sparse_dot(a, b) / (norm_a * norm_b);
    return std::clamp(d, 0.0, 1.0);
}

Rank rank_from_candidates(std::vector<std::pair<double, const ItemId*>> hits, std::size_t k) {
    std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return *a.second < *b.second;
    });
    if (hits.size() > k) hits.resize(k);
    Rank rank;
    rank.entries.reserve(hits.size());
    for (std::size_t i = 0; i < hits.size(); ++i)
        rank.entries.push_back({*hits[i].second, 1.0 - hits[i].first, i + 1});
    return rank;
}

} // namespace

double cosine_dissimilarity(const FusionVector& a, const FusionVector& b) {
    if (a.dim != b.dim)
        throw InvalidInputError("cosine on mismatched dimensions " + std::to_string(a.dim) +
                                " vs " + std::to_string(b.dim));
    return cosine_from_parts(a, a.norm(), b, b.norm());
}

void VectorCollection::add(ItemId id, FusionVector vec) {
    if (vec.dim != dim_)
        throw InvalidInputError("vector for '" + id + "' has dimension " +
                                std::to_string(vec.dim) + ", collection expects " +
                                std::to_string(dim_));
    if (slots_.count(id))
        throw InvalidInputError("duplicate vector for item '" + id + "'");
    slots_.emplace(id, ids_.size());
    norms_.push_back(vec.norm());
    ids_.push_back(std::move(id));
    vectors_.push_back(std::move(vec));
}

const FusionVector* VectorCollection::find(const ItemId& id) const {
    auto it = slots_.find(id);
    return it == slots_.end() ? nullptr : &vectors_[it->second];
}

std::uint64_t VectorCollection::content_hash() const {
    Fnv1a64 hash;
    hash.update_u64(dim_);
    hash.update_u64(ids_.size());
    for (std::size_t slot = 0; slot < ids_.size(); ++slot) {
        hash.update(ids_[slot]);
        hash.update_u64(vectors_[slot].entries.size());
        for (const auto& [index, value] : vectors_[slot].entries) {
            hash.update_u64(index);
            hash.update_f64(value);
        }
    }
    return hash.digest();
}

void VectorCollection::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw LoadError("cannot write vector store '" + path.string() + "'");
    save(out);
    if (!out)
        throw LoadError("write failed for '" + path.string() + "'");
}

void VectorCollection::save(std::ostream& out) const {
    BinaryWriter w(out);
    w.magic("FVVC");
    w.u32(1);
    w.u64(dim_);
    w.u64(ids_.size());
    for (std::size_t slot = 0; slot < ids_.size(); ++slot) {
        w.str(ids_[slot]);
        w.u64(vectors_[slot].entries.size());
        for (const auto& [index, value] : vectors_[slot].entries) {
            w.u64(index);
            w.f64(value);
        }
    }
}

VectorCollection VectorCollection::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw LoadError("cannot read vector store '" + path.string() + "'");
    VectorCollection coll = load(in);
    BinaryReader(in).expect_eof("vector store");
    return coll;
}

VectorCollection VectorCollection::load(std::istream& in) {
    BinaryReader r(in);
    r.expect_magic("FVVC", "vector store");
    const std::uint32_t version = r.u32();
    if (version != 1)
        throw LoadError("vector store: unsupported format version " + std::to_string(version));
    VectorCollection coll(r.u64());
    const std::uint64_t count = r.u64();
    try {
        for (std::uint64_t i = 0; i < count; ++i) {
            ItemId id = r.str();
            const std::uint64_t nnz = r.u64();
            std::vector<std::pair<std::uint64_t, double>> pairs;
            pairs.reserve(nnz);
            for (std::uint64_t e = 0; e < nnz; ++e) {
                const std::uint64_t index = r.u64();
                pairs.emplace_back(index, r.f64());
            }
            coll.add(std::move(id), FusionVector::from_pairs(coll.dim(), std::move(pairs)));
        }
    } catch (const InvalidInputError& e) {
        throw LoadError(std::string("vector store payload invalid: ") + e.what());
    }
    return coll;
}

Rank brute_force_search(const FusionVector& query, const VectorCollection& coll, std::size_t k) {
    if (k == 0)
        throw InvalidInputError("brute_force_search requires k >= 1");
    if (query.dim != coll.dim())
        throw InvalidInputError("query dimension does not match the collection");
    const double query_norm = query.norm();
    std::vector<std::pair<double, const ItemId*>> hits;
    hits.reserve(coll.size());
    for (std::size_t slot = 0; slot < coll.size(); ++slot) {
        const double d =
            cosine_from_parts(query, query_norm, coll.vector_at(slot), coll.norm_at(slot));
        hits.emplace_back(d, &coll.id_at(slot));
    }
    return rank_from_candidates(std::move(hits), k);
}

AnnIndex::AnnIndex(const VectorCollection& coll) : coll_(&coll) {
    flat_offsets_.reserve(coll.size() + 1);
    flat_offsets_.push_back(0);
    std::size_t total = 0;
    for (std::size_t slot = 0; slot < coll.size(); ++slot) {
        total += coll.vector_at(slot).entries.size();
        flat_offsets_.push_back(total);
    }
    flat_indices_.reserve(total);
    flat_values_.reserve(total);
    for (std::size_t slot = 0; slot < coll.size(); ++slot) {
        for (const auto& [index, value] : coll.vector_at(slot).entries) {
            flat_indices_.push_back(index);
            flat_values_.push_back(value);
        }
    }
}

double AnnIndex::dissim(const VectorView& query, std::uint32_t slot) const {
    const VectorView other = slot_view(slot);
    if (query.norm == 0.0 || other.norm == 0.0) return 1.0;
    double sum = 0.0;
    std::size_t i = 0, j = 0;
    while (i < query.size && j < other.size) {
        const std::uint64_t a = query.indices[i];
        const std::uint64_t b = other.indices[j];
        if (a == b) {
            sum += query.values[i] * other.values[j];
            ++i;
            ++j;
        } else if (a < b) {
            ++i;
        } else {
            ++j;
        }
    }
    return std::clamp(1.0 - sum / (query.norm * other.norm), 0.0, 1.0);
}

int AnnIndex::random_level() {
    // xorshift64* keeps the level stream platform-independent.
    rng_state_ ^= rng_state_ >> 12;
    rng_state_ ^= rng_state_ << 25;
    rng_state_ ^= rng_state_ >> 27;
    const std::uint64_t bits = rng_state_ * 0x2545F4914F6CDD1Dull;
    const double u = (static_cast<double>(bits >> 11) + 1.0) / 9007199254740993.0; // (0,1]
    return static_cast<int>(-std::log(u) * level_factor_);
}

AnnIndex AnnIndex::build(const VectorCollection& coll, const AnnParams& params) {
    if (params.M < 2)
        throw InvalidInputError("index parameter M must be at least 2");
    if (params.ef_construction < params.M)
        throw InvalidInputError("ef_construction must be at least M");
    AnnIndex index(coll);
    index.params_ = params;
    index.level_factor_ = 1.0 / std::log(static_cast<double>(params.M));
    index.rng_state_ = params.seed ? params.seed : 0x9E3779B97F4A7C15ull;
    index.links_.resize(coll.size());
    VisitedSet visited;
    for (std::uint32_t slot = 0; slot < coll.size(); ++slot) index.insert(slot, visited);
    return index;
}

std::uint32_t AnnIndex::greedy_descent(const VectorView& query, std::uint32_t start,
                                       int level) const {
    std::uint32_t current = start;
    double current_dist = dissim(query, current);
    bool improved = true;
    while (improved) {
        improved = false;
        for (std::uint32_t neighbor : links_[current][level]) {
            const double d = dissim(query, neighbor);
            if (d < current_dist) {
                current = neighbor;
                current_dist = d;
                improved = true;
            }
        }
    }
    return current;
}

std::vector<AnnIndex::Candidate> AnnIndex::search_layer(const VectorView& query,
                                                        std::uint32_t start, std::size_t ef,
                                                        int level, VisitedSet& visited) const {
    visited.begin(links_.size());
    visited.test_and_set(start);

    std::priority_queue<Candidate, std::vector<Candidate>, std::greater<Candidate>> frontier;
    std::priority_queue<Candidate> best; // max-heap, worst of the ef best on top

    const Candidate first{dissim(query, start), start};
    frontier.push(first);
    best.push(first);

    while (!frontier.empty()) {
        const Candidate current = frontier.top();
        if (current.dist > best.top().dist && best.size() >= ef) break;
        frontier.pop();

        for (std::uint32_t neighbor : links_[current.slot][level]) {
            if (visited.test_and_set(neighbor)) continue;
            const double d = dissim(query, neighbor);
            if (best.size() < ef || d < best.top().dist) {
                frontier.push({d, neighbor});
                best.push({d, neighbor});
                if (best.size() > ef) best.pop();
            }
        }
    }

    std::vector<Candidate> out;
    out.reserve(best.size());
    while (!best.empty()) {
        out.push_back(best.top());
        best.pop();
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<AnnIndex::Candidate> AnnIndex::select_neighbors(std::vector<Candidate> candidates,
                                                            std::size_t max_count) const {
    // Keep a candidate only if it is closer to the base point than to every
    // neighbor already kept; spreads links across directions.
    std::sort(candidates.begin(), candidates.end());
    std::vector<Candidate> picked;
    for (const Candidate& c : candidates) {
        if (picked.size() >= max_count) break;
        const VectorView view = slot_view(c.slot);
        bool keep = true;
        for (const Candidate& p : picked) {
            if (dissim(view, p.slot) < c.dist) {
                keep = false;
                break;
            }
        }
        if (keep) picked.push_back(c);
    }
    return picked;
}

void AnnIndex::shrink_links(std::uint32_t slot, int level) {
    auto& adjacency = links_[slot][level];
    const VectorView view = slot_view(slot);
    std::vector<Candidate> candidates;
    candidates.reserve(adjacency.size());
    for (std::uint32_t neighbor : adjacency)
        candidates.push_back({dissim(view, neighbor), neighbor});
    const auto picked = select_neighbors(std::move(candidates), max_degree(level));
    adjacency.clear();
    for (const Candidate& c : picked) adjacency.push_back(c.slot);
}

void AnnIndex::insert(std::uint32_t slot, VisitedSet& visited) {
    const int level = random_level();
    links_[slot].assign(level + 1, {});

    if (entry_ < 0) {
        entry_ = slot;
        max_level_ = level;
        return;
    }

    const VectorView vec = slot_view(slot);
    std::uint32_t current = static_cast<std::uint32_t>(entry_);

    for (int l = max_level_; l > level; --l)
        current = greedy_descent(vec, current, l);

    for (int l = std::min(level, max_level_); l >= 0; --l) {
        auto candidates = search_layer(vec, current, params_.ef_construction, l, visited);
        current = candidates.front().slot; // nearest found on this layer
        const auto neighbors = select_neighbors(candidates, params_.M);
        for (const Candidate& neighbor : neighbors) {
            links_[slot][l].push_back(neighbor.slot);
            auto& back = links_[neighbor.slot][l];
            back.push_back(slot);
            if (back.size() > max_degree(l)) shrink_links(neighbor.slot, l);
        }
    }

    if (level > max_level_) {
        entry_ = slot;
        max_level_ = level;
    }
}

Rank AnnIndex::search(const FusionVector& query, std::size_t k, std::size_t ef_search) const {
    if (k == 0)
        throw InvalidInputError("ann search requires k >= 1");
    if (entry_ < 0) return Rank{};
    if (query.dim != coll_->dim())
        throw InvalidInputError("query dimension does not match the collection");

    // local flat copy of the query; searches stay concurrency-safe
    std::vector<std::uint64_t> query_indices;
    std::vector<double> query_values;
    query_indices.reserve(query.entries.size());
    query_values.reserve(query.entries.size());
    for (const auto& [index, value] : query.entries) {
        query_indices.push_back(index);
        query_values.push_back(value);
    }
    const VectorView view{query_indices.data(), query_values.data(), query_indices.size(),
                          query.norm()};

    std::uint32_t current = static_cast<std::uint32_t>(entry_);
    for (int l = max_level_; l > 0; --l)
        current = greedy_descent(view, current, l);

    const std::size_t ef = std::max(ef_search, k);
    VisitedSet visited;
    const auto found = search_layer(view, current, ef, 0, visited);

    std::vector<std::pair<double, const ItemId*>> hits;
    hits.reserve(found.size());
    for (const Candidate& c : found) hits.emplace_back(c.dist, &coll_->id_at(c.slot));
    return rank_from_candidates(std::move(hits), k);
}

bool AnnIndex::ground_layer_connected() const {
    if (links_.empty()) return true;
    std::vector<std::vector<std::uint32_t>> undirected(links_.size());
    for (std::uint32_t slot = 0; slot < links_.size(); ++slot) {
        for (std::uint32_t neighbor : links_[slot][0]) {
            undirected[slot].push_back(neighbor);
            undirected[neighbor].push_back(slot);
        }
    }
    std::vector<char> seen(links_.size(), 0);
    std::vector<std::uint32_t> stack{static_cast<std::uint32_t>(entry_)};
    seen[entry_] = 1;
    std::size_t reached = 1;
    while (!stack.empty()) {
        const std::uint32_t node = stack.back();
        stack.pop_back();
        for (std::uint32_t neighbor : undirected[node]) {
            if (!seen[neighbor]) {
                seen[neighbor] = 1;
                ++reached;
                stack.push_back(neighbor);
            }
        }
    }
    return reached == links_.size();
}

std::uint64_t AnnIndex::structure_hash() const {
    Fnv1a64 hash;
    hash.update_u64(static_cast<std::uint64_t>(entry_ + 1));
    hash.update_u64(static_cast<std::uint64_t>(max_level_ + 1));
    for (const auto& node : links_) {
        hash.update_u64(node.size());
        for (const auto& layer : node) {
            hash.update_u64(layer.size());
            for (std::uint32_t neighbor : layer) hash.update_u64(neighbor);
        }
    }
    return hash.digest();
}

void persist_index(const AnnIndex& index, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw LoadError("cannot write index '" + path.string() + "'");
    persist_index(index, out);
    if (!out)
        throw LoadError("write failed for '" + path.string() + "'");
}

void persist_index(const AnnIndex& index, std::ostream& out) {
    BinaryWriter w(out);
    w.magic("FVIX");
    w.u32(1);
    w.u64(index.params_.M);
    w.u64(index.params_.ef_construction);
    w.u64(index.params_.seed);
    w.i64(index.entry_);
    w.i64(index.max_level_);
    w.u64(index.coll_->content_hash());
    w.u64(index.links_.size());
    for (const auto& node : index.links_) {
        w.u64(node.size());
        for (const auto& layer : node) {
            w.u64(layer.size());
            for (std::uint32_t neighbor : layer) w.u32(neighbor);
        }
    }
}

AnnIndex load_index(const std::filesystem::path& path, const VectorCollection& coll) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw LoadError("cannot read index '" + path.string() + "'");
    AnnIndex index = load_index(in, coll);
    BinaryReader(in).expect_eof("index");
    return index;
}

AnnIndex load_index(std::istream& in, const VectorCollection& coll) {
    BinaryReader r(in);
    r.expect_magic("FVIX", "index");
    const std::uint32_t version = r.u32();
    if (version != 1)
        throw LoadError("index: unsupported format version " + std::to_string(version));

    AnnIndex index(coll);
    index.params_.M = r.u64();
    index.params_.ef_construction = r.u64();
    index.params_.seed = r.u64();
    index.level_factor_ = 1.0 / std::log(static_cast<double>(index.params_.M));
    index.entry_ = r.i64();
    index.max_level_ = static_cast<int>(r.i64());
    const std::uint64_t expected_hash = r.u64();
    if (expected_hash != coll.content_hash())
        throw LoadError("index was built for a different vector store");

    const std::uint64_t node_count = r.u64();
    if (node_count != coll.size())
        throw LoadError("index node count does not match the vector store");
    index.links_.resize(node_count);
    for (auto& node : index.links_) {
        const std::uint64_t levels = r.u64();
        if (levels > 4096)
            throw LoadError("index: implausible level count, file corrupt");
        node.resize(levels);
        for (auto& layer : node) {
            const std::uint64_t degree = r.u64();
            if (degree > node_count)
                throw LoadError("index: implausible adjacency size, file corrupt");
            layer.resize(degree);
            for (auto& neighbor : layer) {
                neighbor = r.u32();
                if (neighbor >= node_count)
                    throw LoadError("index adjacency references a missing node");
            }
        }
    }
    return index;
}

} // namespace fvr
