// hexlens command line: batch rendering, LoD export, mesh info, the session
// service and synthetic mesh generation.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "hexlens/generators.hpp"
#include "hexlens/params_json.hpp"
#include "hexlens/service.hpp"

using namespace hexlens;

namespace {

constexpr int kExitError = 2;     // I/O, parse and argument errors
constexpr int kExitCapacity = 3;  // fragment capacity exceeded

struct CliError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<int> parse_dims(const std::string& s, char sep) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, sep)) {
        try {
            std::size_t used = 0;
            int v = std::stoi(part, &used);
            if (used != part.size() || v < 1) throw std::invalid_argument(part);
            out.push_back(v);
        } catch (const std::exception&) {
            throw CliError("bad dimension '" + part + "' in '" + s + "'");
        }
    }
    return out;
}

std::vector<double> parse_numbers(const std::string& s, std::size_t count, const std::string& flag) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(part, &used));
            if (used != part.size()) throw std::invalid_argument(part);
        } catch (const std::exception&) {
            throw CliError(flag + ": '" + part + "' is not a number");
        }
    }
    if (out.size() != count) throw CliError(flag + " expects " + std::to_string(count) + " comma-separated numbers");
    return out;
}

/// A mesh path, or a generated mesh: gen:cube, gen:demo, gen:perf,
/// gen:grid:AxBxC, gen:ball:NxL, gen:twisted-l:NxD.
MeshFile load_input(const std::string& spec) {
    MeshFile file;
    if (spec.rfind("gen:", 0) != 0) return load_mesh_file(spec);
    std::string rest = spec.substr(4);
    auto arg = [&](const std::string& kind) {
        return rest.size() > kind.size() + 1 ? rest.substr(kind.size() + 1) : std::string();
    };
    if (rest == "cube") file.mesh = make_grid(1, 1, 1);
    else if (rest == "demo") file.mesh = make_demo_mesh();
    else if (rest == "perf") file.mesh = make_perf_mesh();
    else if (rest.rfind("grid:", 0) == 0) {
        auto d = parse_dims(arg("grid"), 'x');
        if (d.size() != 3) throw CliError("gen:grid needs AxBxC");
        file.mesh = make_grid(d[0], d[1], d[2]);
    } else if (rest.rfind("ball:", 0) == 0) {
        auto d = parse_dims(arg("ball"), 'x');
        if (d.size() != 2) throw CliError("gen:ball needs NxL");
        file.mesh = make_ball(d[0], d[1]);
    } else if (rest.rfind("twisted-l:", 0) == 0) {
        auto d = parse_dims(arg("twisted-l"), 'x');
        if (d.size() != 2) throw CliError("gen:twisted-l needs NxD");
        file.mesh = make_twisted_l(d[0], d[1], 0.8);
    } else {
        throw CliError("unknown generator '" + spec + "'");
    }
    return file;
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CliError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw CliError(path + ": " + e.what());
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text)) throw CliError("cannot write " + path);
}

struct RenderOptions {
    std::string mesh, output = "out.png", size, metric = "scaled-jacobian", lens, lens_obj, background, stats,
                params;
    std::optional<int> lod, threads;
    std::optional<double> delta, wbase, accent, face_alpha;
    std::optional<std::size_t> capacity;
};

int run_render(const RenderOptions& o) {
    MeshFile file = load_input(o.mesh);
    AttributeField importance = importance_for_metric(file, o.metric);
    Scene scene = Scene::build(std::move(file.mesh), std::move(importance));

    ViewState state;
    if (!o.params.empty()) apply_json(read_json_file(o.params), state);
    json delta = json::object();
    if (!o.size.empty()) {
        auto d = parse_dims(o.size, 'x');
        if (d.size() != 2) throw CliError("--size expects WxH");
        delta["width"] = d[0];
        delta["height"] = d[1];
    }
    if (o.lod) delta["lod"] = *o.lod;
    if (o.delta) delta["delta"] = *o.delta;
    if (o.wbase) delta["w_base"] = *o.wbase;
    if (o.accent) delta["accent"] = *o.accent;
    if (o.face_alpha) delta["face_alpha"] = *o.face_alpha;
    if (o.threads) delta["threads"] = *o.threads;
    if (o.capacity) delta["fragment_capacity"] = *o.capacity;
    if (!o.background.empty()) delta["background"] = o.background;
    if (!o.lens.empty()) {
        auto v = parse_numbers(o.lens, 3, "--lens");
        delta["lens"] = {{"mode", "screen"}, {"center", {v[0], v[1]}}, {"radius", v[2]}};
    }
    if (!o.lens_obj.empty()) {
        auto v = parse_numbers(o.lens_obj, 4, "--lens-obj");
        delta["lens"] = {{"mode", "object"}, {"point", {v[0], v[1], v[2]}}, {"radius", v[3]}};
    }
    apply_json(delta, state);

    RenderResult r = render(scene, state.params, state.lens);
    write_png(o.output, r.image);

    if (!o.stats.empty()) {
        const HexMesh& m = scene.mesh;
        std::size_t bytes = mesh_buffer_bytes(m);
        json stats{{"mesh", o.mesh},
                   {"metric", o.metric},
                   {"cells", m.num_cells()},
                   {"vertices", m.num_vertices()},
                   {"edges", m.num_edges()},
                   {"faces", m.num_faces()},
                   {"mesh_buffer_bytes", bytes},
                   {"mesh_buffer_mib", static_cast<double>(bytes) / (1024.0 * 1024.0)},
                   {"sheet_count", scene.sheet_count},
                   {"level_count", scene.lod.level_count},
                   {"lod_seconds", scene.lod.build_seconds},
                   {"lod", r.stats.lod},
                   {"width", state.params.width},
                   {"height", state.params.height},
                   {"fragments", r.stats.fragments},
                   {"triangles", r.stats.triangles},
                   {"threads", r.stats.threads},
                   {"timings",
                    {{"setup_ms", r.stats.setup_ms},
                     {"shade_ms", r.stats.shade_ms},
                     {"composite_ms", r.stats.composite_ms},
                     {"silhouette_ms", r.stats.silhouette_ms},
                     {"total_ms", r.stats.total_ms}}}};
        write_text(o.stats, stats.dump(2) + "\n");
    }
    return 0;
}

int run_lod(const std::string& mesh, const std::string& obj, const std::string& log) {
    MeshFile file = load_input(mesh);
    auto sheets = extract_sheets(file.mesh);
    LodEdgeStructure lod = build_lod(file.mesh, sheets);
    if (!obj.empty()) {
        std::ostringstream out;
        write_lod_obj(out, file.mesh, lod);
        write_text(obj, out.str());
    }
    if (!log.empty()) write_text(log, merge_log_json(lod) + "\n");
    std::cout << "sheets " << sheets.size() << "\ncomponents " << lod.initial_components << "\nmerges "
              << lod.merges.size() << "\nlevel_count " << lod.level_count << "\nbuild_seconds " << lod.build_seconds
              << "\n";
    return 0;
}

int run_info(const std::string& mesh) {
    MeshFile file = load_input(mesh);
    const HexMesh& m = file.mesh;
    std::size_t singular = 0, valence1 = 0;
    for (const auto& e : singular_edges(m)) {
        ++singular;
        valence1 += e.kind == EdgeValenceClass::Valence1;
    }
    auto sj = scaled_jacobian(m);
    auto vol = cell_volumes(m);
    FieldSummary q = summarize(sj.values);
    std::size_t inverted = 0, degenerate = 0;
    for (auto f : vol.inverted) inverted += f;
    for (auto f : sj.degenerate) degenerate += f;
    auto sheets = extract_sheets(m);

    std::cout << "vertices " << m.num_vertices() << "\ncells " << m.num_cells() << "\nedges " << m.num_edges()
              << "\nfaces " << m.num_faces() << "\nsingular_edges " << singular << "\nsingular_valence1 " << valence1
              << "\nnon_conforming " << (m.non_conforming() ? "yes" : "no") << "\norientation "
              << to_string(mesh_orientation(m)) << "\nscaled_jacobian_min " << q.min << "\nscaled_jacobian_max "
              << q.max << "\nscaled_jacobian_mean " << q.mean << "\ninverted_cells " << inverted
              << "\ndegenerate_cells " << degenerate << "\nsheets " << sheets.size() << "\nmesh_buffer_bytes "
              << mesh_buffer_bytes(m) << "\n";
    for (const auto& f : file.fields)
        std::cout << "field " << f.name << " (" << (f.location == FieldLocation::Cell ? "cell" : "vertex") << ", "
                  << f.values.size() << " values)\n";
    return 0;
}

int run_generate(const std::string& spec, const std::string& output) {
    MeshFile file = load_input(spec.rfind("gen:", 0) == 0 ? spec : "gen:" + spec);
    std::ofstream out(output);
    if (!out) throw CliError("cannot write " + output);
    if (std::filesystem::path(output).extension() == ".vtk") {
        auto sj = scaled_jacobian(file.mesh);
        write_vtk(out, file.mesh, {{"scaled_jacobian", FieldLocation::Cell, sj.values}});
    } else {
        write_mesh(out, file.mesh);
    }
    return out ? 0 : kExitError;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hexlens: focus+context inspection of hexahedral meshes"};
    app.require_subcommand(1);
    const std::string mesh_help = "mesh file (.mesh MEDIT, .vtk legacy) or gen:cube|demo|perf|grid:AxBxC|ball:NxL|twisted-l:NxD";

    RenderOptions ro;
    auto* render_cmd = app.add_subcommand("render", "render one PNG");
    render_cmd->add_option("mesh", ro.mesh, mesh_help)->required();
    render_cmd->add_option("-o,--output", ro.output, "output PNG")->capture_default_str();
    render_cmd->add_option("--size", ro.size, "image size WxH (default 1280x720)");
    render_cmd->add_option("--metric", ro.metric, "scaled-jacobian or field:<name>")->capture_default_str();
    render_cmd->add_option("--lod", ro.lod, "LoD level (default level_count - 2)");
    render_cmd->add_option("--delta", ro.delta, "importance threshold for focus edges");
    render_cmd->add_option("--wbase", ro.wbase, "base edge width in model units");
    render_cmd->add_option("--accent", ro.accent, "accentuation factor s");
    render_cmd->add_option("--face-alpha", ro.face_alpha, "face opacity scale");
    auto* lens_opt = render_cmd->add_option("--lens", ro.lens, "screen lens cx,cy,r (pixels)");
    render_cmd->add_option("--lens-obj", ro.lens_obj, "object lens x,y,z,r (model units)")->excludes(lens_opt);
    render_cmd->add_option("--background", ro.background, "black or white")
        ->check(CLI::IsMember({"black", "white"}));
    render_cmd->add_option("--stats", ro.stats, "write a JSON stats report");
    render_cmd->add_option("--threads", ro.threads, "worker threads (capped by HEXLENS_THREADS)");
    render_cmd->add_option("--capacity", ro.capacity, "fragment capacity per tile buffer (0 = unbounded)");
    render_cmd->add_option("--params", ro.params, "JSON render parameters applied before the flags");

    std::string lod_mesh, lod_obj, lod_log;
    auto* lod_cmd = app.add_subcommand("lod", "build the LoD edge hierarchy");
    lod_cmd->add_option("mesh", lod_mesh, mesh_help)->required();
    lod_cmd->add_option("--export", lod_obj, "OBJ line set with one group per level");
    lod_cmd->add_option("--log", lod_log, "JSON merge log");

    std::string info_mesh;
    auto* info_cmd = app.add_subcommand("info", "print mesh statistics");
    info_cmd->add_option("mesh", info_mesh, mesh_help)->required();

    ServiceConfig sc;
    double max_upload_mib = 512;
    bool no_path = false;
    auto* serve_cmd = app.add_subcommand("serve", "run the HTTP/WebSocket session service");
    serve_cmd->add_option("--host", sc.address, "bind address")->capture_default_str();
    serve_cmd->add_option("--port", sc.port, "port (0 = any free port)")->capture_default_str();
    serve_cmd->add_option("--workers", sc.worker_threads, "request/render worker threads")->capture_default_str();
    serve_cmd->add_option("--max-upload-mib", max_upload_mib, "mesh upload cap")->capture_default_str();
    serve_cmd->add_flag("--no-path", no_path, "reject POST /sessions path references");

    std::string gen_spec, gen_out;
    auto* gen_cmd = app.add_subcommand("generate", "write a synthetic mesh (.mesh or .vtk)");
    gen_cmd->add_option("kind", gen_spec, "cube|demo|perf|grid:AxBxC|ball:NxL|twisted-l:NxD")->required();
    gen_cmd->add_option("-o,--output", gen_out, "output file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*render_cmd) return run_render(ro);
        if (*lod_cmd) return run_lod(lod_mesh, lod_obj, lod_log);
        if (*info_cmd) return run_info(info_mesh);
        if (*gen_cmd) return run_generate(gen_spec, gen_out);
        if (*serve_cmd) {
            sc.max_upload_bytes = static_cast<std::size_t>(max_upload_mib * 1024 * 1024);
            sc.allow_path_reference = !no_path;
            Server server(sc);
            unsigned short port = server.start();
            std::cout << "listening on http://" << sc.address << ":" << port << std::endl;
            server.wait();
            server.stop();
            return 0;
        }
    } catch (const CapacityError& e) {
        std::cerr << "hexlens: " << e.what() << "\nhint: pass --capacity " << e.required()
                  << " or --capacity 0 for unbounded\n";
        return kExitCapacity;
    } catch (const std::exception& e) {
        std::cerr << "hexlens: " << e.what() << "\n";
        return kExitError;
    }
    return 0;
}
