#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "support.hpp"

#include "hexlens/lod.hpp"

using namespace hexlens;
using test::Rng;

namespace {

// ---- union-find sheet oracle: edges parallel within some cell are joined

struct Dsu {
    std::vector<Index> p;
    explicit Dsu(std::size_t n) : p(n) { std::iota(p.begin(), p.end(), 0); }
    Index find(Index x) { return p[x] == x ? x : p[x] = find(p[x]); }
    void unite(Index a, Index b) { p[find(a)] = find(b); }
};

std::set<std::pair<std::vector<Index>, std::vector<Index>>> oracle_sheets(const HexMesh& m) {
    Dsu dsu(m.num_edges());
    for (Index c = 0; c < m.num_cells(); ++c)
        for (int k = 0; k < 3; ++k)
            for (int i = 1; i < 4; ++i) dsu.unite(m.cell_edges(c)[4 * k], m.cell_edges(c)[4 * k + i]);
    std::map<Index, std::pair<std::set<Index>, std::set<Index>>> groups;
    for (Index e = 0; e < m.num_edges(); ++e) {
        auto& g = groups[dsu.find(e)];
        g.second.insert(e);
        for (Index c : m.edge_cells(e)) g.first.insert(c);
    }
    std::set<std::pair<std::vector<Index>, std::vector<Index>>> out;
    for (auto& [root, g] : groups)
        out.insert({{g.first.begin(), g.first.end()}, {g.second.begin(), g.second.end()}});
    return out;
}

// ---- brute-force relation oracle: faces counted by sorted vertex key

using FaceKey = std::array<Index, 4>;

std::map<FaceKey, int> face_counts(const HexMesh& m, const std::set<Index>& cells) {
    std::map<FaceKey, int> out;
    for (Index c : cells)
        for (const auto& f : hex::kFaces) {
            FaceKey k{m.cell(c)[f[0]], m.cell(c)[f[1]], m.cell(c)[f[2]], m.cell(c)[f[3]]};
            std::sort(k.begin(), k.end());
            ++out[k];
        }
    return out;
}

std::set<FaceKey> boundary(const HexMesh& m, const std::set<Index>& cells) {
    std::set<FaceKey> out;
    for (auto& [k, n] : face_counts(m, cells))
        if (n == 1) out.insert(k);
    return out;
}

struct OracleRelation {
    Relation relation;
    std::uint64_t shared_cells, shared_faces, boundary_sum, cell_sum;
};

OracleRelation oracle_relation(const HexMesh& m, const std::set<Index>& a, const std::set<Index>& b) {
    std::set<Index> uni = a;
    uni.insert(b.begin(), b.end());
    auto ba = boundary(m, a), bb = boundary(m, b), bu = boundary(m, uni);
    std::uint64_t shared_faces = 0;
    for (const auto& f : ba)
        if (bb.count(f) && !bu.count(f)) ++shared_faces;
    std::uint64_t shared_cells = 0;
    for (Index c : a) shared_cells += b.count(c);
    Relation r = Relation::None;
    if (shared_cells && shared_faces) r = Relation::Hybrid;
    else if (shared_faces) r = Relation::Adjacent;
    else if (shared_cells) r = Relation::Intersecting;
    return {r, shared_cells, shared_faces, ba.size() + bb.size(), a.size() + b.size()};
}

// w1 > w2 for fractions n1/d1, n2/d2 with plain 128-bit products
int compare_fraction(std::uint64_t n1, std::uint64_t d1, std::uint64_t n2, std::uint64_t d2) {
    unsigned __int128 l = (unsigned __int128)n1 * d2, r = (unsigned __int128)n2 * d1;
    return l < r ? -1 : (l > r ? 1 : 0);
}

Index edge_id(const HexMesh& m, Index a, Index b) {
    std::array<Index, 2> k{std::min(a, b), std::max(a, b)};
    auto it = std::lower_bound(m.edges().begin(), m.edges().end(), k);
    REQUIRE((it != m.edges().end() && *it == k));
    return Index(it - m.edges().begin());
}

struct Run {
    std::vector<Sheet> sheets;
    LodEdgeStructure lod;
};

Run run(const HexMesh& m) {
    Run r;
    r.sheets = extract_sheets(m);
    r.lod = build_lod(m, r.sheets);
    return r;
}

bool connected(const HexMesh& m) {
    Dsu dsu(m.num_cells());
    for (Index f = 0; f < m.num_faces(); ++f)
        if (m.face_cells(f).size() == 2) dsu.unite(m.face_cells(f)[0], m.face_cells(f)[1]);
    for (Index e = 0; e < m.num_edges(); ++e)
        for (Index c : m.edge_cells(e)) dsu.unite(c, m.edge_cells(e)[0]);
    for (Index c = 0; c < m.num_cells(); ++c)
        if (dsu.find(c) != dsu.find(0)) return false;
    return true;
}

void check_invariants(const HexMesh& m, const Run& r) {
    const auto& lod = r.lod;
    REQUIRE(lod.edge_level.size() == m.num_edges());
    // nestedness: visible(L+1) is a subset of visible(L)
    for (int L = 0; L + 1 < lod.level_count; ++L) {
        auto lo = lod.visible_edges(L), hi = lod.visible_edges(L + 1);
        CHECK(std::includes(lo.begin(), lo.end(), hi.begin(), hi.end()));
    }
    CHECK(lod.visible_edges(0).size() == m.num_edges());
    for (int level : lod.edge_level) {
        CHECK(level >= 0);
        CHECK(level < lod.level_count);
    }
    for (Index e = 0; e < m.num_edges(); ++e) {
        auto ev = classify_edge(m, e);
        if (ev.kind == EdgeValenceClass::Valence1) {
            CHECK(lod.edge_level[e] == lod.level_count - 1);
        } else if (ev.kind == EdgeValenceClass::Singular) {
            // hidden only at the coarsest level
            CHECK(lod.edge_level[e] >= std::max(0, lod.level_count - 2));
        }
    }
    if (connected(m)) CHECK(lod.merges.size() + 1 == lod.initial_components);
    // determinism
    Run again = run(m);
    CHECK(again.lod.merges == lod.merges);
    CHECK(again.lod.edge_level == lod.edge_level);
    CHECK(again.lod.level_count == lod.level_count);
}

// Replays the merge log with brute-force relations: every merge must be the
// best available pair (rank, then weight, then lowest (min id, max id)).
void replay(const HexMesh& m, const Run& r) {
    auto init = initial_components(m, r.sheets);
    std::map<Index, std::set<Index>> live;
    for (const auto& c : init) live[c.id] = {c.cells.begin(), c.cells.end()};
    for (const auto& rec : r.lod.merges) {
        int best_rank = -1;
        std::uint64_t bn = 0, bd = 1;
        std::pair<Index, Index> best{0, 0};
        for (auto i = live.begin(); i != live.end(); ++i)
            for (auto j = std::next(i); j != live.end(); ++j) {
                auto o = oracle_relation(m, i->second, j->second);
                if (o.relation == Relation::None) continue;
                int rank = static_cast<int>(o.relation);
                std::uint64_t n = o.shared_faces, d = o.boundary_sum * o.cell_sum;
                bool better = rank > best_rank ||
                              (rank == best_rank && compare_fraction(n, d, bn, bd) > 0);
                // ids ascend in map order, so the first best pair wins ties
                if (better) best_rank = rank, bn = n, bd = d, best = {i->first, j->first};
            }
        REQUIRE(best_rank >= 0);
        CHECK(rec.first == best.first);
        CHECK(rec.second == best.second);
        CHECK(static_cast<int>(rec.relation) == best_rank);
        CHECK(compare_fraction(rec.weight.numerator, rec.weight.denominator, bn, bd) == 0);
        std::set<Index> merged = live[rec.first];
        merged.insert(live[rec.second].begin(), live[rec.second].end());
        CHECK(rec.merged_cells == merged.size());
        live.erase(rec.first);
        live.erase(rec.second);
        live[rec.merged] = merged;
    }
}

std::vector<std::pair<std::string, HexMesh>> synthetic_meshes() {
    std::vector<std::pair<std::string, HexMesh>> out;
    out.emplace_back("grid 1x1x1", make_grid(1, 1, 1));
    out.emplace_back("grid 2x2x2", make_grid(2, 2, 2));
    out.emplace_back("grid 3x3x3", make_grid(3, 3, 3));
    out.emplace_back("grid 4x4x4", make_grid(4, 4, 4));
    out.emplace_back("grid 2x3x4", make_grid(2, 3, 4));
    out.emplace_back("grid 5x1x1", make_grid(5, 1, 1));
    out.emplace_back("jittered grid 3x2x2", jitter_interior(make_grid(3, 2, 2), 0.2, 3));
    out.emplace_back("demo", make_demo_mesh());
    out.emplace_back("twisted L 2x3", make_twisted_l(2, 3, 0.5));
    out.emplace_back("grid 8x8x8", make_grid(8, 8, 8));
    return out;
}

std::vector<std::pair<std::string, HexMesh>> irregular_meshes() {
    std::vector<std::pair<std::string, HexMesh>> out;
    out.emplace_back("ball 6x7", make_ball(6, 7));
    out.emplace_back("twisted L 4x6", make_twisted_l(4, 6, 0.8));
    out.emplace_back("ball 3x2", make_ball(3, 2));
    return out;
}

std::filesystem::path golden_dir() { return HEXLENS_GOLDEN_DIR; }

bool regenerate() {
    const char* v = std::getenv("HEXLENS_REGEN_GOLDEN");
    return v && std::string(v) == "1";
}

}  // namespace

TEST_SUITE("sheet-lod") {

TEST_CASE("single cube: three one-cell sheets with disjoint edge sets") {
    HexMesh m = make_grid(1, 1, 1);
    auto sheets = extract_sheets(m);
    REQUIRE(sheets.size() == 3);
    std::set<Index> all;
    for (const auto& s : sheets) {
        CHECK(s.cells == std::vector<Index>{0});
        CHECK(s.edges.size() == 4);
        all.insert(s.edges.begin(), s.edges.end());
    }
    CHECK(all.size() == 12);
}

TEST_CASE("2x1x1 grid has four sheets") {
    HexMesh m = make_grid(2, 1, 1);
    auto sheets = extract_sheets(m);
    REQUIRE(sheets.size() == 4);
    std::multiset<std::size_t> sizes;
    for (const auto& s : sheets) sizes.insert(s.cells.size());
    CHECK(sizes == std::multiset<std::size_t>{1, 1, 2, 2});
}

TEST_CASE("n^3 grids: 3n slab sheets of n^2 cells, in under a second") {
    for (int n = 2; n <= 4; ++n) {
        HexMesh m = make_grid(n, n, n);
        auto t0 = std::chrono::steady_clock::now();
        auto sheets = extract_sheets(m);
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        CHECK(secs < 1.0);
        REQUIRE(sheets.size() == std::size_t(3 * n));
        std::vector<int> covered(m.num_cells(), 0);
        for (const auto& s : sheets) {
            CHECK(s.cells.size() == std::size_t(n * n));
            for (Index c : s.cells) ++covered[c];
        }
        for (int c : covered) CHECK(c == 3);
    }
}

TEST_CASE("property: sheets match the union-find oracle") {
    Rng rng(8);
    std::vector<HexMesh> meshes{make_ball(3, 2), make_twisted_l(2, 2, 0.3)};
    for (int i = 0; i < 15; ++i) meshes.push_back(test::random_mesh(rng, 4, 0.3));
    for (const auto& m : meshes) {
        auto sheets = extract_sheets(m);
        std::set<std::pair<std::vector<Index>, std::vector<Index>>> got;
        std::vector<int> edge_hits(m.num_edges(), 0);
        Index prev_seed = 0;
        for (std::size_t i = 0; i < sheets.size(); ++i) {
            CHECK(sheets[i].id == i);
            got.insert({sheets[i].cells, sheets[i].edges});
            for (Index e : sheets[i].edges) ++edge_hits[e];
            // seeds in ascending edge order
            if (i > 0) CHECK(sheets[i].edges.front() > prev_seed);
            prev_seed = sheets[i].edges.front();
        }
        CHECK(got == oracle_sheets(m));
        for (int h : edge_hits) CHECK(h == 1);
    }
}

TEST_CASE("relation examples on a 2x2x2 grid") {
    HexMesh m = make_grid(2, 2, 2);
    auto cell = [](int i, int j, int k) { return Index(i + 2 * (j + 2 * k)); };
    std::vector<Index> bottom, top, front;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            bottom.push_back(cell(i, j, 0));
            top.push_back(cell(i, j, 1));
        }
    for (int i = 0; i < 2; ++i)
        for (int k = 0; k < 2; ++k) front.push_back(cell(i, 0, k));
    std::sort(bottom.begin(), bottom.end());
    std::sort(top.begin(), top.end());
    std::sort(front.begin(), front.end());
    auto a = make_component(m, 0, bottom), b = make_component(m, 1, top), c = make_component(m, 2, front);
    CHECK(a.boundary_faces.size() == 16);

    auto ab = classify_relation(m, a, b);
    CHECK(ab.relation == Relation::Adjacent);
    CHECK(ab.shared_faces == 4);
    CHECK(ab.shared_cells == 0);
    MergeWeight w = merge_weight(m, a, b);
    CHECK(w.numerator == 1);
    CHECK(w.denominator == 64);

    auto ac = classify_relation(m, a, c);
    CHECK(ac.relation == Relation::Intersecting);
    CHECK(ac.shared_cells == 2);
    CHECK(merge_weight(m, a, c).numerator == 0);

    CHECK_THROWS_AS(classify_relation(m, a, a), std::invalid_argument);
}

TEST_CASE("relation examples: single cells and far-apart components") {
    HexMesh m = make_grid(3, 1, 1);
    auto a = make_component(m, 0, {0}), b = make_component(m, 1, {1}), c = make_component(m, 2, {2});
    CHECK(classify_relation(m, a, b).relation == Relation::Adjacent);
    MergeWeight w = merge_weight(m, a, b);
    CHECK(w == make_weight(1, 24, 1));
    CHECK(w.numerator == 1);
    CHECK(w.denominator == 24);
    CHECK(classify_relation(m, a, c).relation == Relation::None);
}

TEST_CASE("hybrid relation") {
    HexMesh m = make_grid(3, 1, 1);
    auto a = make_component(m, 0, {0, 1}), b = make_component(m, 1, {1, 2});
    auto r = classify_relation(m, a, b);
    // cell 1 is shared and no face is on both boundaries
    CHECK(r.relation == Relation::Intersecting);
    HexMesh g = make_grid(2, 2, 1);
    auto x = make_component(g, 0, {0, 1}), y = make_component(g, 1, {1, 2, 3});
    auto h = classify_relation(g, x, y);
    CHECK(h.relation == Relation::Hybrid);
    CHECK(h.shared_cells == 1);
    CHECK(h.shared_faces == 1);
}

TEST_CASE("weights compare exactly") {
    CHECK(make_weight(2, 64, 2) == make_weight(1, 64, 1));
    CHECK(make_weight(1, 3, 1) > make_weight(1, 4, 1));
    CHECK(make_weight(0, 5, 7) == make_weight(0, 1, 1));
    // values too close for doubles still order correctly
    MergeWeight a{1'000'000'000'000'001ull, 3'000'000'000'000'000ull};
    MergeWeight b{1'000'000'000'000'000ull, 3'000'000'000'000'000ull};
    CHECK(a > b);
}

TEST_CASE("property: relation and weight match the brute-force oracle on 50 random pairs") {
    Rng rng(4242);
    std::map<Relation, int> seen;
    for (int trial = 0; trial < 50; ++trial) {
        CAPTURE(trial);
        HexMesh m = trial % 2 ? make_grid(4, 4, 3) : jitter_interior(make_grid(3, 4, 3), 0.2, trial);
        auto random_block = [&]() {
            int i0 = rng.integer(0, 2), j0 = rng.integer(0, 2), k0 = rng.integer(0, 1);
            int i1 = rng.integer(i0, 2), j1 = rng.integer(j0, 3), k1 = rng.integer(k0, 2);
            int n1 = trial % 2 ? 4 : 3;
            std::set<Index> cells;
            for (int i = i0; i <= i1; ++i)
                for (int j = j0; j <= j1; ++j)
                    for (int k = k0; k <= k1; ++k) cells.insert(Index(i + n1 * (j + 4 * k)));
            // scatter a few extra cells so shapes are not only boxes
            for (int extra = rng.integer(0, 3); extra > 0; --extra) cells.insert(Index(rng.integer(0, int(m.num_cells()) - 1)));
            return cells;
        };
        std::set<Index> sa = random_block(), sb = random_block();
        auto a = make_component(m, 0, {sa.begin(), sa.end()});
        auto b = make_component(m, 1, {sb.begin(), sb.end()});
        auto got = classify_relation(m, a, b);
        auto want = oracle_relation(m, sa, sb);
        CHECK(got.relation == want.relation);
        CHECK(got.shared_cells == want.shared_cells);
        CHECK(got.shared_faces == want.shared_faces);
        CHECK(boundary(m, sa).size() == a.boundary_faces.size());
        MergeWeight w = merge_weight(m, a, b);
        CHECK(compare_fraction(w.numerator, w.denominator, want.shared_faces, want.boundary_sum * want.cell_sum) == 0);
        CHECK(std::gcd(w.numerator, w.denominator) == 1);
        // symmetric
        auto back = classify_relation(m, b, a);
        CHECK(back.relation == got.relation);
        CHECK(back.shared_faces == got.shared_faces);
        ++seen[want.relation];
    }
    CHECK(seen[Relation::Adjacent] > 0);
    CHECK(seen[Relation::Intersecting] + seen[Relation::Hybrid] > 0);
}

TEST_CASE("single cube: one level, nothing merged") {
    HexMesh m = make_grid(1, 1, 1);
    Run r = run(m);
    CHECK(r.lod.level_count == 1);
    CHECK(r.lod.merges.empty());
    CHECK(r.lod.initial_components == 1);
    for (int l : r.lod.edge_level) CHECK(l == 0);
}

TEST_CASE("2x2x2 grid: five merges, centre edges hidden before frame edges") {
    HexMesh m = make_grid(2, 2, 2);
    Run r = run(m);
    CHECK(r.lod.initial_components == 6);
    CHECK(r.lod.merges.size() == 5);
    Index centre = 1 + 3 * (1 + 3 * 1);
    int frame = 0;
    for (Index e = 0; e < m.num_edges(); ++e) {
        if (classify_edge(m, e).kind == EdgeValenceClass::Valence1) {
            ++frame;
            CHECK(r.lod.edge_level[e] == r.lod.level_count - 1);
        }
    }
    CHECK(frame == 24);
    for (Index nb : {centre - 1, centre + 1, centre - 3, centre + 3, centre - 9, centre + 9}) {
        Index e = edge_id(m, centre, nb);
        CHECK(r.lod.edge_level[e] < r.lod.level_count - 1);
    }
}

TEST_CASE("2x2x2 merge log matches the frozen golden") {
    HexMesh m = make_grid(2, 2, 2);
    Run r = run(m);
    auto log = nlohmann::json::parse(merge_log_json(r.lod));
    log.erase("build_seconds");
    auto path = golden_dir() / "lod_grid2.json";
    if (regenerate()) {
        std::ofstream(path) << log.dump(2) << "\n";
        MESSAGE("regenerated " << path.string());
    }
    std::ifstream in(path);
    REQUIRE_MESSAGE(in.good(), "missing golden " << path.string());
    CHECK(nlohmann::json::parse(in) == log);
}

TEST_CASE("LoD invariants on synthetic meshes") {
    for (const auto& [name, m] : synthetic_meshes()) {
        CAPTURE(name);
        Run r = run(m);
        check_invariants(m, r);
    }
}

TEST_CASE("LoD invariants on irregular multi-block meshes") {
    for (const auto& [name, m] : irregular_meshes()) {
        CAPTURE(name);
        Run r = run(m);
        CHECK(singular_edges(m).size() > 0);
        check_invariants(m, r);
    }
}

TEST_CASE("merge replay: every merge is the best available pair") {
    std::vector<HexMesh> meshes{make_grid(2, 2, 2), make_grid(3, 3, 3), make_grid(2, 3, 4), make_ball(2, 2),
                                make_twisted_l(2, 2, 0.4), make_demo_mesh()};
    for (const auto& m : meshes) replay(m, run(m));
}

TEST_CASE("desk-scale ball reaches at least four levels") {
    HexMesh m = make_ball(6, 7);
    CHECK(m.num_cells() == 1728);
    Run r = run(m);
    CHECK(r.lod.level_count >= 4);
}

TEST_CASE("disconnected mesh stops merging without a relation") {
    HexMesh g = make_grid(3, 1, 1);
    HexMesh m = build_topology(g.vertices(), {g.cell(0), g.cell(2)});
    Run r = run(m);
    // each cell's three sheets coincide, leaving two unrelated components
    CHECK(r.lod.initial_components == 2);
    CHECK(r.lod.merges.empty());
    check_invariants(m, r);
}

TEST_CASE("OBJ export groups edges by level") {
    HexMesh m = make_grid(2, 2, 2);
    Run r = run(m);
    std::ostringstream out;
    write_lod_obj(out, m, r.lod);
    std::istringstream in(out.str());
    std::string line;
    std::size_t v = 0, l = 0, groups = 0;
    while (std::getline(in, line)) {
        if (line.rfind("v ", 0) == 0) ++v;
        if (line.rfind("l ", 0) == 0) ++l;
        if (line.rfind("g lod_", 0) == 0) ++groups;
    }
    CHECK(v == m.num_vertices());
    CHECK(l == m.num_edges());
    CHECK(groups == std::size_t(r.lod.level_count));
}

}  // TEST_SUITE
