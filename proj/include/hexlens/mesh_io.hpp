#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hexlens/mesh.hpp"

namespace hexlens {

enum class MeshFormat { Medit, VtkLegacy };

enum class ParseErrorKind {
    Io,
    MalformedHeader,
    MalformedBody,
    UnsupportedCellType,
    IndexOutOfRange,
    EmptyMesh,
    Topology,
};

const char* to_string(ParseErrorKind kind);
/// Stable snake_case identifier for APIs: "io", "malformed_header", ...
const char* code(ParseErrorKind kind);

class MeshParseError : public std::runtime_error {
public:
    MeshParseError(ParseErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
    ParseErrorKind kind() const { return kind_; }

private:
    ParseErrorKind kind_;
};

enum class FieldLocation { Cell, Vertex };

/// A named scalar array read from (or written to) a mesh file.
struct ScalarField {
    std::string name;
    FieldLocation location = FieldLocation::Cell;
    std::vector<double> values;
};

/// Sign of the cell volumes under our corner convention. Files that use a
/// mirrored convention load as `Negative`; nothing is flipped.
enum class Orientation { Positive, Negative, Mixed, Degenerate };

const char* to_string(Orientation o);

struct MeshFile {
    HexMesh mesh;
    std::vector<ScalarField> fields;
    Orientation orientation = Orientation::Positive;

    const ScalarField* find_field(const std::string& name) const;
};

/// Parses a mesh from `in`. MEDIT indices are 1-based and reference tags are
/// dropped; VTK cell types must all be 12 (hexahedron).
MeshFile load_mesh(std::istream& in, MeshFormat format);
MeshFile load_mesh_file(const std::filesystem::path& path);
std::optional<MeshFormat> format_from_extension(const std::filesystem::path& path);

/// Writes MEDIT ASCII with round-trip precision.
void write_mesh(std::ostream& out, const HexMesh& mesh);
void write_mesh_file(const std::filesystem::path& path, const HexMesh& mesh);

/// Writes VTK legacy ASCII with the given fields as CELL_DATA/POINT_DATA.
void write_vtk(std::ostream& out, const HexMesh& mesh, const std::vector<ScalarField>& fields);

}  // namespace hexlens
