#include "hexlens/mesh_io.hpp"

#include <charconv>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "hexlens/quality.hpp"

namespace hexlens {

const char* to_string(ParseErrorKind kind) {
    switch (kind) {
        case ParseErrorKind::Io: return "i/o error";
        case ParseErrorKind::MalformedHeader: return "malformed header";
        case ParseErrorKind::MalformedBody: return "malformed body";
        case ParseErrorKind::UnsupportedCellType: return "unsupported cell type";
        case ParseErrorKind::IndexOutOfRange: return "vertex index out of range";
        case ParseErrorKind::EmptyMesh: return "empty mesh";
        case ParseErrorKind::Topology: return "invalid topology";
    }
    return "unknown";
}

const char* code(ParseErrorKind kind) {
    switch (kind) {
        case ParseErrorKind::Io: return "io";
        case ParseErrorKind::MalformedHeader: return "malformed_header";
        case ParseErrorKind::MalformedBody: return "malformed_body";
        case ParseErrorKind::UnsupportedCellType: return "unsupported_cell_type";
        case ParseErrorKind::IndexOutOfRange: return "index_out_of_range";
        case ParseErrorKind::EmptyMesh: return "empty_mesh";
        case ParseErrorKind::Topology: return "topology";
    }
    return "unknown";
}

const char* to_string(Orientation o) {
    switch (o) {
        case Orientation::Positive: return "positive";
        case Orientation::Negative: return "negative";
        case Orientation::Mixed: return "mixed";
        case Orientation::Degenerate: return "degenerate";
    }
    return "unknown";
}

const ScalarField* MeshFile::find_field(const std::string& name) const {
    for (const auto& f : fields)
        if (f.name == name) return &f;
    return nullptr;
}

namespace {

/// Whitespace tokenizer over a whole buffer, skipping '#' comments when asked.
class Tokens {
public:
    Tokens(std::string text, bool hash_comments) : text_(std::move(text)), comments_(hash_comments) {}

    bool next(std::string_view& tok) {
        for (;;) {
            while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            if (pos_ >= text_.size()) return false;
            if (comments_ && text_[pos_] == '#') {
                while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
                continue;
            }
            break;
        }
        std::size_t start = pos_;
        while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        tok = std::string_view(text_).substr(start, pos_ - start);
        return true;
    }

    std::string_view expect(const char* what) {
        std::string_view tok;
        if (!next(tok)) throw MeshParseError(ParseErrorKind::MalformedBody, std::string("unexpected end of file, expected ") + what);
        return tok;
    }

    template <typename T>
    T number(const char* what) {
        auto tok = expect(what);
        T value{};
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
        if (ec != std::errc() || ptr != tok.data() + tok.size())
            throw MeshParseError(ParseErrorKind::MalformedBody, std::string("expected ") + what + ", got '" + std::string(tok) + "'");
        return value;
    }

private:
    std::string text_;
    bool comments_;
    std::size_t pos_ = 0;
};

std::string slurp(std::istream& in) {
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw MeshParseError(ParseErrorKind::Io, "failed to read stream");
    return ss.str();
}

MeshFile finish(std::vector<Vec3> vertices, std::vector<CellCorners> cells, std::vector<ScalarField> fields) {
    if (cells.empty()) throw MeshParseError(ParseErrorKind::EmptyMesh, "no hexahedra in file");
    for (std::size_t c = 0; c < cells.size(); ++c)
        for (Index v : cells[c])
            if (v >= vertices.size())
                throw MeshParseError(ParseErrorKind::IndexOutOfRange,
                                     "cell " + std::to_string(c) + " references vertex " + std::to_string(v) + " of " +
                                         std::to_string(vertices.size()));
    MeshFile out;
    try {
        out.mesh = build_topology(std::move(vertices), std::move(cells));
    } catch (const TopologyError& e) {
        throw MeshParseError(ParseErrorKind::Topology, e.what());
    }
    out.fields = std::move(fields);
    out.orientation = mesh_orientation(out.mesh);
    return out;
}

int medit_entry_width(std::string_view kw) {
    // tokens per entry, including the trailing reference tag
    if (kw == "Corners" || kw == "RequiredVertices" || kw == "Ridges" || kw == "RequiredEdges") return 1;
    if (kw == "NormalAtVertices" || kw == "TangentAtVertices") return 2;
    if (kw == "Edges" || kw == "Normals" || kw == "Tangents") return 3;
    if (kw == "Triangles" || kw == "RequiredTriangles") return 4;
    if (kw == "Quadrilaterals" || kw == "RequiredQuadrilaterals") return 5;
    return -1;
}

bool medit_unsupported_volume(std::string_view kw) {
    return kw == "Tetrahedra" || kw == "Prisms" || kw == "Pyramids" || kw == "Tetrahedra10";
}

MeshFile load_medit(std::istream& in) {
    Tokens t(slurp(in), true);
    std::string_view tok;
    if (!t.next(tok) || tok != "MeshVersionFormatted")
        throw MeshParseError(ParseErrorKind::MalformedHeader, "expected 'MeshVersionFormatted'");
    int version = t.number<int>("format version");
    if (version < 1 || version > 4) throw MeshParseError(ParseErrorKind::MalformedHeader, "unsupported MEDIT version " + std::to_string(version));

    std::vector<Vec3> vertices;
    std::vector<CellCorners> cells;
    bool have_dimension = false;
    while (t.next(tok)) {
        if (tok == "End") break;
        if (tok == "Dimension") {
            int dim = t.number<int>("dimension");
            if (dim != 3) throw MeshParseError(ParseErrorKind::MalformedHeader, "only 3D meshes are supported");
            have_dimension = true;
        } else if (tok == "Vertices") {
            if (!have_dimension) throw MeshParseError(ParseErrorKind::MalformedHeader, "'Vertices' before 'Dimension'");
            auto n = t.number<std::size_t>("vertex count");
            vertices.reserve(n);
            for (std::size_t i = 0; i < n; ++i) {
                double x = t.number<double>("coordinate"), y = t.number<double>("coordinate"), z = t.number<double>("coordinate");
                t.expect("reference");
                vertices.push_back({x, y, z});
            }
        } else if (tok == "Hexahedra") {
            auto n = t.number<std::size_t>("hexahedron count");
            cells.reserve(n);
            for (std::size_t i = 0; i < n; ++i) {
                CellCorners c;
                for (auto& v : c) {
                    auto idx = t.number<long long>("vertex index");
                    if (idx < 1 || static_cast<std::size_t>(idx) > vertices.size())
                        throw MeshParseError(ParseErrorKind::IndexOutOfRange,
                                             "hexahedron " + std::to_string(i + 1) + " references vertex " + std::to_string(idx));
                    v = static_cast<Index>(idx - 1);
                }
                t.expect("reference");
                cells.push_back(c);
            }
        } else if (medit_unsupported_volume(tok)) {
            auto n = t.number<std::size_t>("element count");
            if (n > 0) throw MeshParseError(ParseErrorKind::UnsupportedCellType, "section '" + std::string(tok) + "' is not supported");
        } else if (int w = medit_entry_width(tok); w > 0) {
            auto n = t.number<std::size_t>("element count");
            for (std::size_t i = 0; i < n * static_cast<std::size_t>(w); ++i) t.expect("element data");
        } else {
            throw MeshParseError(ParseErrorKind::MalformedBody, "unknown MEDIT keyword '" + std::string(tok) + "'");
        }
    }
    if (!have_dimension) throw MeshParseError(ParseErrorKind::MalformedHeader, "missing 'Dimension'");
    return finish(std::move(vertices), std::move(cells), {});
}

void read_vtk_attributes(Tokens& t, FieldLocation loc, std::size_t n, std::vector<ScalarField>& fields,
                         std::string_view& pending) {
    std::string_view tok;
    while (t.next(tok)) {
        if (tok == "SCALARS") {
            ScalarField f;
            f.name = std::string(t.expect("scalar name"));
            f.location = loc;
            t.expect("scalar type");
            // optional component count, then LOOKUP_TABLE
            auto next = t.expect("LOOKUP_TABLE");
            int ncomp = 1;
            if (next != "LOOKUP_TABLE") {
                std::from_chars(next.data(), next.data() + next.size(), ncomp);
                if (t.expect("LOOKUP_TABLE") != "LOOKUP_TABLE")
                    throw MeshParseError(ParseErrorKind::MalformedBody, "expected LOOKUP_TABLE");
            }
            t.expect("table name");
            f.values.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                f.values[i] = t.number<double>("scalar value");
                for (int k = 1; k < ncomp; ++k) t.number<double>("scalar value");
            }
            fields.push_back(std::move(f));
        } else if (tok == "FIELD") {
            t.expect("field data name");
            auto arrays = t.number<int>("array count");
            for (int a = 0; a < arrays; ++a) {
                std::string name(t.expect("array name"));
                auto ncomp = t.number<std::size_t>("component count");
                auto ntuples = t.number<std::size_t>("tuple count");
                t.expect("array type");
                std::vector<double> values(ncomp * ntuples);
                for (auto& v : values) v = t.number<double>("field value");
                if (ncomp == 1 && ntuples == n) fields.push_back({name, loc, std::move(values)});
            }
        } else if (tok == "VECTORS" || tok == "NORMALS") {
            t.expect("name");
            t.expect("type");
            for (std::size_t i = 0; i < 3 * n; ++i) t.number<double>("vector value");
        } else if (tok == "TENSORS") {
            t.expect("name");
            t.expect("type");
            for (std::size_t i = 0; i < 9 * n; ++i) t.number<double>("tensor value");
        } else {
            pending = tok;
            return;
        }
    }
    pending = {};
}

MeshFile load_vtk(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("# vtk DataFile Version", 0) != 0)
        throw MeshParseError(ParseErrorKind::MalformedHeader, "missing '# vtk DataFile Version' line");
    if (!std::getline(in, line)) throw MeshParseError(ParseErrorKind::MalformedHeader, "missing title line");
    if (!std::getline(in, line)) throw MeshParseError(ParseErrorKind::MalformedHeader, "missing format line");
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    if (line != "ASCII") throw MeshParseError(ParseErrorKind::MalformedHeader, "only ASCII legacy VTK is supported, got '" + line + "'");

    Tokens t(slurp(in), false);
    if (t.expect("DATASET") != "DATASET" || t.expect("dataset type") != "UNSTRUCTURED_GRID")
        throw MeshParseError(ParseErrorKind::MalformedHeader, "expected 'DATASET UNSTRUCTURED_GRID'");

    std::vector<Vec3> vertices;
    std::vector<CellCorners> cells;
    std::vector<std::vector<long long>> raw_cells;
    std::vector<ScalarField> fields;
    bool have_types = false;

    std::string_view tok;
    bool has = t.next(tok);
    while (has) {
        if (tok == "POINTS") {
            auto n = t.number<std::size_t>("point count");
            t.expect("point type");
            vertices.resize(n);
            for (auto& v : vertices) v = {t.number<double>("x"), t.number<double>("y"), t.number<double>("z")};
        } else if (tok == "CELLS") {
            auto n = t.number<std::size_t>("cell count");
            t.number<std::size_t>("cell list size");
            raw_cells.resize(n);
            for (auto& c : raw_cells) {
                auto k = t.number<std::size_t>("cell size");
                c.resize(k);
                for (auto& v : c) v = t.number<long long>("vertex index");
            }
        } else if (tok == "CELL_TYPES") {
            auto n = t.number<std::size_t>("cell type count");
            if (n != raw_cells.size()) throw MeshParseError(ParseErrorKind::MalformedBody, "CELL_TYPES count differs from CELLS");
            for (std::size_t i = 0; i < n; ++i) {
                int type = t.number<int>("cell type");
                if (type != 12)
                    throw MeshParseError(ParseErrorKind::UnsupportedCellType,
                                         "cell " + std::to_string(i) + " has VTK type " + std::to_string(type) + " (only 12 is supported)");
            }
            have_types = true;
        } else if (tok == "CELL_DATA" || tok == "POINT_DATA") {
            auto loc = tok == "CELL_DATA" ? FieldLocation::Cell : FieldLocation::Vertex;
            auto n = t.number<std::size_t>("attribute count");
            std::size_t expected = loc == FieldLocation::Cell ? raw_cells.size() : vertices.size();
            if (n != expected) throw MeshParseError(ParseErrorKind::MalformedBody, std::string(tok) + " count mismatch");
            read_vtk_attributes(t, loc, n, fields, tok);
            has = !tok.empty();
            continue;
        } else {
            throw MeshParseError(ParseErrorKind::MalformedBody, "unexpected VTK keyword '" + std::string(tok) + "'");
        }
        has = t.next(tok);
    }
    if (!have_types && !raw_cells.empty()) throw MeshParseError(ParseErrorKind::MalformedBody, "missing CELL_TYPES section");

    cells.reserve(raw_cells.size());
    for (std::size_t i = 0; i < raw_cells.size(); ++i) {
        if (raw_cells[i].size() != 8)
            throw MeshParseError(ParseErrorKind::UnsupportedCellType, "cell " + std::to_string(i) + " does not have 8 vertices");
        CellCorners c;
        for (int k = 0; k < 8; ++k) {
            auto idx = raw_cells[i][k];
            if (idx < 0 || static_cast<std::size_t>(idx) >= vertices.size())
                throw MeshParseError(ParseErrorKind::IndexOutOfRange, "cell " + std::to_string(i) + " references vertex " + std::to_string(idx));
            c[k] = static_cast<Index>(idx);
        }
        cells.push_back(c);
    }
    return finish(std::move(vertices), std::move(cells), std::move(fields));
}

}  // namespace

std::optional<MeshFormat> format_from_extension(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (ext == ".mesh") return MeshFormat::Medit;
    if (ext == ".vtk") return MeshFormat::VtkLegacy;
    return std::nullopt;
}

MeshFile load_mesh(std::istream& in, MeshFormat format) {
    return format == MeshFormat::Medit ? load_medit(in) : load_vtk(in);
}

MeshFile load_mesh_file(const std::filesystem::path& path) {
    auto format = format_from_extension(path);
    if (!format) throw MeshParseError(ParseErrorKind::Io, "unknown mesh file extension '" + path.extension().string() + "' (expected .mesh or .vtk)");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MeshParseError(ParseErrorKind::Io, "cannot open '" + path.string() + "'");
    return load_mesh(in, *format);
}

void write_mesh(std::ostream& out, const HexMesh& mesh) {
    out << std::setprecision(17);
    out << "MeshVersionFormatted 2\nDimension 3\n\nVertices\n" << mesh.num_vertices() << "\n";
    for (const auto& v : mesh.vertices()) out << v.x << ' ' << v.y << ' ' << v.z << " 0\n";
    out << "\nHexahedra\n" << mesh.num_cells() << "\n";
    for (const auto& c : mesh.cells()) {
        for (Index v : c) out << (v + 1) << ' ';
        out << "0\n";
    }
    out << "\nEnd\n";
}

void write_mesh_file(const std::filesystem::path& path, const HexMesh& mesh) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MeshParseError(ParseErrorKind::Io, "cannot write '" + path.string() + "'");
    write_mesh(out, mesh);
}

void write_vtk(std::ostream& out, const HexMesh& mesh, const std::vector<ScalarField>& fields) {
    out << std::setprecision(17);
    out << "# vtk DataFile Version 3.0\nhexlens\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << mesh.num_vertices() << " double\n";
    for (const auto& v : mesh.vertices()) out << v.x << ' ' << v.y << ' ' << v.z << '\n';
    out << "CELLS " << mesh.num_cells() << ' ' << mesh.num_cells() * 9 << '\n';
    for (const auto& c : mesh.cells()) {
        out << 8;
        for (Index v : c) out << ' ' << v;
        out << '\n';
    }
    out << "CELL_TYPES " << mesh.num_cells() << '\n';
    for (std::size_t i = 0; i < mesh.num_cells(); ++i) out << "12\n";
    for (auto loc : {FieldLocation::Cell, FieldLocation::Vertex}) {
        bool header = false;
        for (const auto& f : fields) {
            if (f.location != loc) continue;
            if (!header) {
                out << (loc == FieldLocation::Cell ? "CELL_DATA " : "POINT_DATA ")
                    << (loc == FieldLocation::Cell ? mesh.num_cells() : mesh.num_vertices()) << '\n';
                header = true;
            }
            out << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
            for (double v : f.values) out << v << '\n';
        }
    }
}

}  // namespace hexlens
