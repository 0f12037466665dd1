#include "hexlens/lod.hpp"

#include <algorithm>
#include <chrono>
#include <deque>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace hexlens {

std::vector<Sheet> extract_sheets(const HexMesh& mesh) {
    std::vector<Sheet> sheets;
    constexpr Index kUnvisited = ~Index(0);
    std::vector<Index> edge_sheet(mesh.num_edges(), kUnvisited);
    std::vector<Index> cell_stamp(mesh.num_cells(), kUnvisited);
    std::deque<Index> frontier;

    for (Index seed = 0; seed < mesh.num_edges(); ++seed) {
        if (edge_sheet[seed] != kUnvisited) continue;
        Sheet sheet;
        sheet.id = static_cast<Index>(sheets.size());
        edge_sheet[seed] = sheet.id;
        frontier.push_back(seed);
        while (!frontier.empty()) {
            Index e = frontier.front();
            frontier.pop_front();
            sheet.edges.push_back(e);
            for (Index c : mesh.edge_cells(e)) {
                if (cell_stamp[c] != sheet.id) {
                    cell_stamp[c] = sheet.id;
                    sheet.cells.push_back(c);
                }
                for (Index p : topologically_parallel_edges(mesh, c, e)) {
                    if (edge_sheet[p] != kUnvisited) continue;
                    edge_sheet[p] = sheet.id;
                    frontier.push_back(p);
                }
            }
        }
        std::sort(sheet.cells.begin(), sheet.cells.end());
        std::sort(sheet.edges.begin(), sheet.edges.end());
        sheets.push_back(std::move(sheet));
    }
    return sheets;
}

const char* to_string(Relation r) {
    switch (r) {
        case Relation::None: return "none";
        case Relation::Intersecting: return "intersecting";
        case Relation::Hybrid: return "hybrid";
        case Relation::Adjacent: return "adjacent";
    }
    return "unknown";
}

namespace {

std::vector<Index> boundary_faces_of(const HexMesh& mesh, const std::vector<Index>& cells,
                                     std::vector<std::uint32_t>& stamp, std::uint32_t token) {
    for (Index c : cells) stamp[c] = token;
    std::vector<Index> faces;
    for (Index c : cells)
        for (Index f : mesh.cell_faces(c)) {
            std::int64_t other = mesh.opposite_cell(f, c);
            if (other < 0 || stamp[static_cast<Index>(other)] != token) faces.push_back(f);
        }
    std::sort(faces.begin(), faces.end());
    return faces;
}

/// Cell membership scratch buffer reused across relation queries.
struct Scratch {
    std::vector<std::uint32_t> cell_stamp;
    std::uint32_t token = 0;

    explicit Scratch(std::size_t cells) : cell_stamp(cells, 0) {}
    std::uint32_t mark(const std::vector<Index>& cells) {
        if (++token == 0) {
            std::fill(cell_stamp.begin(), cell_stamp.end(), 0);
            token = 1;
        }
        for (Index c : cells) cell_stamp[c] = token;
        return token;
    }
    bool has(Index c) const { return cell_stamp[c] == token; }
};

/// Relation of `b` to the component currently marked in `s` (cells of `a`).
/// `shared` receives the merged-away faces when non-null.
RelationInfo relate_marked(const HexMesh& mesh, const Scratch& s, const SheetComponent& b,
                           std::vector<Index>* shared) {
    RelationInfo info;
    for (Index c : b.cells)
        if (s.has(c)) ++info.shared_cells;
    // f in dB has exactly one cell inside B. It is shared and becomes interior
    // iff the other cell is in A while the inside cell is not.
    for (Index f : b.boundary_faces) {
        auto cells = mesh.face_cells(f);
        if (cells.size() != 2) continue;
        bool in_b0 = std::binary_search(b.cells.begin(), b.cells.end(), cells[0]);
        Index inside = in_b0 ? cells[0] : cells[1];
        Index outside = in_b0 ? cells[1] : cells[0];
        if (s.has(outside) && !s.has(inside)) {
            ++info.shared_faces;
            if (shared) shared->push_back(f);
        }
    }
    if (info.shared_cells > 0 && info.shared_faces > 0)
        info.relation = Relation::Hybrid;
    else if (info.shared_faces > 0)
        info.relation = Relation::Adjacent;
    else if (info.shared_cells > 0)
        info.relation = Relation::Intersecting;
    return info;
}

}  // namespace

SheetComponent make_component(const HexMesh& mesh, Index id, std::vector<Index> cells, std::vector<Index> sheets) {
    SheetComponent comp;
    comp.id = id;
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    std::vector<std::uint32_t> stamp(mesh.num_cells(), 0);
    comp.boundary_faces = boundary_faces_of(mesh, cells, stamp, 1);
    comp.cells = std::move(cells);
    comp.sheets = std::move(sheets);
    return comp;
}

RelationInfo classify_relation(const HexMesh& mesh, const SheetComponent& a, const SheetComponent& b) {
    if (a.id == b.id) throw std::invalid_argument("cannot relate component " + std::to_string(a.id) + " to itself");
    Scratch s(mesh.num_cells());
    s.mark(a.cells);
    return relate_marked(mesh, s, b, nullptr);
}

std::strong_ordering MergeWeight::operator<=>(const MergeWeight& o) const {
    unsigned __int128 lhs = static_cast<unsigned __int128>(numerator) * o.denominator;
    unsigned __int128 rhs = static_cast<unsigned __int128>(o.numerator) * denominator;
    if (lhs < rhs) return std::strong_ordering::less;
    if (lhs > rhs) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
}

MergeWeight make_weight(std::uint64_t shared_faces, std::uint64_t boundary_sum, std::uint64_t cell_sum) {
    MergeWeight w;
    if (shared_faces == 0) return w;
    w.numerator = shared_faces;
    w.denominator = boundary_sum * cell_sum;
    std::uint64_t g = std::gcd(w.numerator, w.denominator);
    w.numerator /= g;
    w.denominator /= g;
    return w;
}

MergeWeight merge_weight(const HexMesh& mesh, const SheetComponent& a, const SheetComponent& b) {
    auto info = classify_relation(mesh, a, b);
    return make_weight(info.shared_faces, a.boundary_faces.size() + b.boundary_faces.size(),
                       a.cells.size() + b.cells.size());
}

std::vector<Index> LodEdgeStructure::visible_edges(int level) const {
    std::vector<Index> out;
    for (Index e = 0; e < edge_level.size(); ++e)
        if (edge_level[e] >= level) out.push_back(e);
    return out;
}

std::vector<SheetComponent> initial_components(const HexMesh& mesh, std::span<const Sheet> sheets) {
    std::vector<SheetComponent> comps;
    std::map<std::vector<Index>, std::size_t> by_cells;
    for (const auto& sheet : sheets) {
        auto it = by_cells.find(sheet.cells);
        if (it != by_cells.end()) {
            comps[it->second].sheets.push_back(sheet.id);
            continue;
        }
        by_cells.emplace(sheet.cells, comps.size());
        comps.push_back(make_component(mesh, static_cast<Index>(comps.size()), sheet.cells, {sheet.id}));
    }
    return comps;
}

namespace {

struct QueueKey {
    Relation relation;
    MergeWeight weight;
    Index first, second;

    // "less" means "merged earlier"
    bool operator<(const QueueKey& o) const {
        if (relation != o.relation) return relation > o.relation;
        if (auto c = weight <=> o.weight; c != 0) return c > 0;
        if (first != o.first) return first < o.first;
        return second < o.second;
    }
};

class LodBuilder {
public:
    explicit LodBuilder(const HexMesh& mesh) : mesh_(mesh), scratch_(mesh.num_cells()), cell_comps_(mesh.num_cells()) {}

    LodEdgeStructure run(std::span<const Sheet> sheets) {
        LodEdgeStructure lod;
        auto comps = initial_components(mesh_, sheets);
        lod.initial_components = comps.size();
        for (auto& c : comps) add_live(std::move(c));
        for (Index id = 0; id < comps_.size(); ++id) connect(id, /*only_higher=*/true);

        constexpr int kVisible = -1;
        std::vector<int> hidden_in(mesh_.num_edges(), kVisible);
        std::vector<EdgeValenceClass> kind(mesh_.num_edges());
        for (Index e = 0; e < mesh_.num_edges(); ++e) kind[e] = classify_edge(mesh_, e).kind;

        std::size_t level_start_max = 0, live_max = 0;
        for (Index id : live_ids()) live_max = std::max(live_max, comps_[id].cells.size());
        level_start_max = live_max;
        int level = 0;
        bool level_open = false;

        while (live_count_ > 1 && !queue_.empty()) {
            QueueKey top = *queue_.begin();
            const auto& a = comps_[top.first];
            const auto& b = comps_[top.second];

            scratch_.mark(a.cells);
            std::vector<Index> shared;
            relate_marked(mesh_, scratch_, b, &shared);

            MergeRecord rec;
            rec.first = top.first;
            rec.second = top.second;
            rec.relation = top.relation;
            rec.weight = top.weight;
            rec.level = level;
            for (Index f : shared)
                for (Index e : mesh_.face_edges(f)) {
                    if (kind[e] != EdgeValenceClass::Regular || hidden_in[e] != kVisible) continue;
                    hidden_in[e] = level;
                    ++rec.hidden_edges;
                }

            std::vector<Index> cells;
            cells.reserve(a.cells.size() + b.cells.size());
            std::set_union(a.cells.begin(), a.cells.end(), b.cells.begin(), b.cells.end(), std::back_inserter(cells));
            std::vector<Index> sheet_ids = a.sheets;
            sheet_ids.insert(sheet_ids.end(), b.sheets.begin(), b.sheets.end());

            Index merged_id = static_cast<Index>(comps_.size());
            retire(top.first);
            retire(top.second);
            add_live(make_component(mesh_, merged_id, std::move(cells), std::move(sheet_ids)));
            connect(merged_id, /*only_higher=*/false);

            rec.merged = merged_id;
            rec.merged_cells = comps_[merged_id].cells.size();
            lod.merges.push_back(rec);
            level_open = true;

            live_max = std::max(live_max, rec.merged_cells);
            if (rec.merged_cells > 2 * level_start_max) {
                ++level;
                level_open = false;
                level_start_max = live_max;
            }
        }

        const int groups = level + (level_open ? 1 : 0);
        lod.level_count = groups + 1;
        lod.edge_level.resize(mesh_.num_edges());
        for (Index e = 0; e < mesh_.num_edges(); ++e) {
            if (hidden_in[e] != kVisible)
                lod.edge_level[e] = hidden_in[e];
            else if (kind[e] == EdgeValenceClass::Singular)
                lod.edge_level[e] = std::max(0, groups - 1);
            else
                lod.edge_level[e] = groups;
        }
        return lod;
    }

private:
    std::vector<Index> live_ids() const {
        std::vector<Index> ids;
        for (Index i = 0; i < comps_.size(); ++i)
            if (alive_[i]) ids.push_back(i);
        return ids;
    }

    void add_live(SheetComponent comp) {
        Index id = comp.id;
        for (Index c : comp.cells) cell_comps_[c].push_back(id);
        comps_.push_back(std::move(comp));
        alive_.push_back(1);
        pairs_.emplace_back();
        ++live_count_;
    }

    void retire(Index id) {
        for (Index other : pairs_[id]) {
            Index lo = std::min(id, other), hi = std::max(id, other);
            auto it = keys_.find({lo, hi});
            queue_.erase(it->second);
            keys_.erase(it);
            pairs_[other].erase(id);
        }
        pairs_[id].clear();
        for (Index c : comps_[id].cells) {
            auto& list = cell_comps_[c];
            list.erase(std::remove(list.begin(), list.end(), id), list.end());
        }
        alive_[id] = 0;
        --live_count_;
    }

    /// Finds all components related to `id` and queues the pairs.
    void connect(Index id, bool only_higher) {
        const auto& comp = comps_[id];
        std::set<Index> candidates;
        for (Index c : comp.cells) {
            for (Index other : cell_comps_[c]) candidates.insert(other);
            for (Index f : mesh_.cell_faces(c)) {
                std::int64_t n = mesh_.opposite_cell(f, c);
                if (n < 0) continue;
                for (Index other : cell_comps_[static_cast<Index>(n)]) candidates.insert(other);
            }
        }
        candidates.erase(id);
        scratch_.mark(comp.cells);
        for (Index other : candidates) {
            if (only_higher && other < id) continue;
            auto info = relate_marked(mesh_, scratch_, comps_[other], nullptr);
            if (info.relation == Relation::None) continue;
            const auto& o = comps_[other];
            QueueKey key{info.relation,
                         make_weight(info.shared_faces, comp.boundary_faces.size() + o.boundary_faces.size(),
                                     comp.cells.size() + o.cells.size()),
                         std::min(id, other), std::max(id, other)};
            auto [it, inserted] = queue_.insert(key);
            keys_.emplace(std::pair{key.first, key.second}, it);
            pairs_[id].insert(other);
            pairs_[other].insert(id);
        }
    }

    const HexMesh& mesh_;
    Scratch scratch_;
    std::vector<std::vector<Index>> cell_comps_;
    std::vector<SheetComponent> comps_;
    std::vector<std::uint8_t> alive_;
    std::vector<std::set<Index>> pairs_;
    std::set<QueueKey> queue_;
    std::map<std::pair<Index, Index>, std::set<QueueKey>::iterator> keys_;
    std::size_t live_count_ = 0;
};

}  // namespace

LodEdgeStructure build_lod(const HexMesh& mesh, std::span<const Sheet> sheets) {
    auto t0 = std::chrono::steady_clock::now();
    LodBuilder builder(mesh);
    auto lod = builder.run(sheets);
    lod.build_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return lod;
}

void write_lod_obj(std::ostream& out, const HexMesh& mesh, const LodEdgeStructure& lod) {
    out.precision(17);
    out << "# hexlens LoD line set: " << lod.level_count << " levels\n";
    for (const auto& v : mesh.vertices()) out << "v " << v.x << ' ' << v.y << ' ' << v.z << '\n';
    for (int level = 0; level < lod.level_count; ++level) {
        out << "g lod_" << level << '\n';
        for (Index e = 0; e < mesh.num_edges(); ++e)
            if (lod.edge_level[e] == level) out << "l " << mesh.edge(e)[0] + 1 << ' ' << mesh.edge(e)[1] + 1 << '\n';
    }
}

std::string merge_log_json(const LodEdgeStructure& lod, int indent) {
    nlohmann::json j;
    j["level_count"] = lod.level_count;
    j["initial_components"] = lod.initial_components;
    j["build_seconds"] = lod.build_seconds;
    auto& merges = j["merges"] = nlohmann::json::array();
    for (const auto& m : lod.merges) {
        merges.push_back({{"first", m.first},
                          {"second", m.second},
                          {"merged", m.merged},
                          {"relation", to_string(m.relation)},
                          {"weight", {m.weight.numerator, m.weight.denominator}},
                          {"level", m.level},
                          {"merged_cells", m.merged_cells},
                          {"hidden_edges", m.hidden_edges}});
    }
    return j.dump(indent);
}

}  // namespace hexlens
