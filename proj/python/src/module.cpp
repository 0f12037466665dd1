#include <cstring>
#include <memory>
#include <sstream>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hexlens/generators.hpp"
#include "hexlens/lod.hpp"
#include "hexlens/mesh_io.hpp"
#include "hexlens/params_json.hpp"
#include "hexlens/quality.hpp"
#include "hexlens/render.hpp"

namespace py = pybind11;
using namespace hexlens;

namespace {

// Loaded or generated mesh plus the fields that came with its file.
struct PyMesh {
    MeshFile file;
    const HexMesh& mesh() const { return file.mesh; }
};

PyMesh wrap(HexMesh m) {
    PyMesh out;
    out.file.mesh = std::move(m);
    out.file.orientation = mesh_orientation(out.file.mesh);
    return out;
}

py::array_t<double> doubles(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

py::array_t<double> positions(const HexMesh& m) {
    py::array_t<double> out({m.num_vertices(), std::size_t{3}});
    auto r = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < m.num_vertices(); ++i) {
        r(i, 0) = m.vertex(Index(i)).x;
        r(i, 1) = m.vertex(Index(i)).y;
        r(i, 2) = m.vertex(Index(i)).z;
    }
    return out;
}

template <std::size_t N>
py::array_t<std::uint32_t> index_table(const std::vector<std::array<Index, N>>& rows) {
    py::array_t<std::uint32_t> out({rows.size(), N});
    if (!rows.empty()) std::memcpy(out.mutable_data(), rows.data(), rows.size() * N * sizeof(Index));
    return out;
}

// Scene with the view state the render calls mutate.
struct PyScene {
    std::shared_ptr<const Scene> scene;
    ViewState state;
};

py::array_t<std::uint8_t> rgba_array(const Image& img) {
    auto bytes = to_rgba8(img);
    py::array_t<std::uint8_t> out({std::size_t(img.height), std::size_t(img.width), std::size_t{4}});
    std::memcpy(out.mutable_data(), bytes.data(), bytes.size());
    return out;
}

json parse(const std::string& text) {
    try {
        return text.empty() ? json(nullptr) : json::parse(text);
    } catch (const json::exception& e) {
        throw ParamsError(std::string("malformed JSON: ") + e.what());
    }
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "hexlens core: hex meshes, quality metrics, sheet LoD and focus+context rendering";

    py::register_exception<MeshParseError>(m, "MeshParseError", PyExc_ValueError);
    py::register_exception<ParamsError>(m, "ParamsError", PyExc_ValueError);
    static py::exception<CapacityError> capacity_error(m, "CapacityError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const CapacityError& e) {
            py::object err = py::handle(capacity_error)(e.what());
            // PyErr_SetObject keeps the instance, so the hint survives
            err.attr("required") = e.required();
            err.attr("capacity") = e.capacity();
            PyErr_SetObject(capacity_error.ptr(), err.ptr());
        }
    });

    py::class_<PyMesh>(m, "Mesh")
        .def_property_readonly("num_vertices", [](const PyMesh& s) { return s.mesh().num_vertices(); })
        .def_property_readonly("num_cells", [](const PyMesh& s) { return s.mesh().num_cells(); })
        .def_property_readonly("num_edges", [](const PyMesh& s) { return s.mesh().num_edges(); })
        .def_property_readonly("num_faces", [](const PyMesh& s) { return s.mesh().num_faces(); })
        .def_property_readonly("vertices", [](const PyMesh& s) { return positions(s.mesh()); })
        .def_property_readonly("cells", [](const PyMesh& s) { return index_table(s.mesh().cells()); })
        .def_property_readonly("edges", [](const PyMesh& s) { return index_table(s.mesh().edges()); })
        .def_property_readonly("faces", [](const PyMesh& s) { return index_table(s.mesh().faces()); })
        .def_property_readonly("orientation", [](const PyMesh& s) { return std::string(to_string(s.file.orientation)); })
        .def_property_readonly("field_names",
                               [](const PyMesh& s) {
                                   std::vector<std::string> names;
                                   for (const auto& f : s.file.fields) names.push_back(f.name);
                                   return names;
                               })
        .def("field",
             [](const PyMesh& s, const std::string& name) {
                 const ScalarField* f = s.file.find_field(name);
                 if (!f) throw py::key_error(name);
                 return doubles(f->values);
             })
        .def("edge_valence",
             [](const PyMesh& s) {
                 std::vector<std::uint32_t> v(s.mesh().num_edges());
                 for (Index e = 0; e < v.size(); ++e) v[e] = std::uint32_t(s.mesh().edge_valence(e));
                 return py::array_t<std::uint32_t>(v.size(), v.data());
             })
        .def("to_medit",
             [](const PyMesh& s) {
                 std::ostringstream out;
                 write_mesh(out, s.mesh());
                 return out.str();
             })
        .def("__repr__", [](const PyMesh& s) {
            return "<hexlens.Mesh cells=" + std::to_string(s.mesh().num_cells()) +
                   " vertices=" + std::to_string(s.mesh().num_vertices()) + ">";
        });

    m.def("load_mesh", [](const std::string& path) { return PyMesh{load_mesh_file(path)}; }, py::arg("path"),
          "Loads a MEDIT (.mesh) or legacy VTK (.vtk) hexahedral mesh.");
    m.def(
        "parse_mesh",
        [](const std::string& text, const std::string& format) {
            std::istringstream in(text);
            if (format != "medit" && format != "vtk") throw py::value_error("format must be 'medit' or 'vtk'");
            return PyMesh{load_mesh(in, format == "medit" ? MeshFormat::Medit : MeshFormat::VtkLegacy)};
        },
        py::arg("text"), py::arg("format"));

    m.def("grid", [](int a, int b, int c, double h) { return wrap(make_grid(a, b, c, h)); }, py::arg("n1"),
          py::arg("n2"), py::arg("n3"), py::arg("h") = 1.0);
    m.def("ball", [](int n, int layers, double radius) { return wrap(make_ball(n, layers, radius)); }, py::arg("n"),
          py::arg("layers"), py::arg("radius") = 1.0);
    m.def("twisted_l", [](int n, int depth, double twist) { return wrap(make_twisted_l(n, depth, twist)); },
          py::arg("n"), py::arg("depth"), py::arg("twist"));
    m.def("demo_mesh", [] { return wrap(make_demo_mesh()); });
    m.def("perf_mesh", [] { return wrap(make_perf_mesh()); });

    m.def("scaled_jacobian", [](const PyMesh& s) { return doubles(scaled_jacobian(s.mesh()).values); });
    m.def("cell_volumes", [](const PyMesh& s) { return doubles(cell_volumes(s.mesh()).values); });
    m.def(
        "importance",
        [](const PyMesh& s, const std::string& metric) {
            AttributeField f = importance_for_metric(s.file, metric);
            py::dict d;
            d["cell"] = doubles(f.per_cell);
            d["vertex"] = doubles(f.per_vertex);
            d["edge"] = doubles(f.per_edge);
            return d;
        },
        py::arg("mesh"), py::arg("metric") = "scaled-jacobian");

    m.def("sheets", [](const PyMesh& s) {
        py::list out;
        for (const Sheet& sh : extract_sheets(s.mesh())) out.append(py::make_tuple(sh.cells, sh.edges));
        return out;
    }, "List of (cells, edges) per sheet.");

    py::class_<PyScene>(m, "Scene")
        .def(py::init([](const PyMesh& s, const std::string& metric) {
                 AttributeField imp = importance_for_metric(s.file, metric);
                 PyScene out;
                 out.scene = std::make_shared<const Scene>(Scene::build(s.mesh(), std::move(imp)));
                 return out;
             }),
             py::arg("mesh"), py::arg("metric") = "scaled-jacobian")
        .def_property_readonly("level_count", [](const PyScene& s) { return s.scene->lod.level_count; })
        .def_property_readonly("sheet_count", [](const PyScene& s) { return s.scene->sheet_count; })
        .def_property_readonly("edge_level",
                               [](const PyScene& s) {
                                   const auto& l = s.scene->lod.edge_level;
                                   return py::array_t<std::int32_t>(l.size(), l.data());
                               })
        .def("merge_log", [](const PyScene& s) { return merge_log_json(s.scene->lod); })
        .def("visible_edges", [](const PyScene& s, int level) { return s.scene->lod.visible_edges(level); })
        .def("state", [](const PyScene& s) { return to_json(s.state).dump(); },
             "The current view state as a JSON document.")
        .def("apply", [](PyScene& s, const std::string& delta) { apply_json(parse(delta), s.state); },
             py::arg("delta"), "Applies a JSON delta; invalid deltas raise ParamsError and change nothing.")
        .def(
            "render",
            [](const PyScene& s) {
                RenderResult r;
                {
                    py::gil_scoped_release release;
                    r = render(*s.scene, s.state.params, s.state.lens);
                }
                return py::make_tuple(rgba_array(r.image), to_json(r.stats).dump());
            },
            "Renders the current state; returns (HxWx4 uint8 array, stats JSON).")
        .def("render_png", [](const PyScene& s) {
            std::vector<std::uint8_t> png;
            {
                py::gil_scoped_release release;
                png = encode_png(render(*s.scene, s.state.params, s.state.lens).image);
            }
            return py::bytes(reinterpret_cast<const char*>(png.data()), png.size());
        })
        .def(
            "pick",
            [](PyScene& s, double x, double y, double radius) {
                return pick_object_lens(x, y, *s.scene, s.state.params, radius, s.state.lens);
            },
            py::arg("x"), py::arg("y"), py::arg("radius"),
            "Anchors the object lens under pixel (x, y); False (lens unchanged) on a miss.");
}
