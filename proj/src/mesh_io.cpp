#include "gsreg/mesh_io.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gsreg {

void save_mesh_obj(const TriangleMesh& mesh, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("save_mesh_obj: cannot open " + path.string());
    }
    out << "# gsreg mesh\n";
    char buf[128];
    for (const Vec3& v : mesh.vertices) {
        std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
        out << buf;
    }
    for (const auto& t : mesh.triangles) {
        out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
    }
    if (!out) {
        throw std::runtime_error("save_mesh_obj: write failed for " + path.string());
    }
}

TriangleMesh load_mesh_obj(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("load_mesh_obj: cannot open " + path.string());
    }
    TriangleMesh mesh;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        if (tag == "v") {
            Vec3 v;
            if (!(ls >> v.x() >> v.y() >> v.z())) {
                throw std::runtime_error("load_mesh_obj: bad vertex at line " +
                                         std::to_string(line_no));
            }
            mesh.vertices.push_back(v);
        } else if (tag == "f") {
            std::array<int, 3> tri{};
            for (int i = 0; i < 3; ++i) {
                std::string tok;
                if (!(ls >> tok)) {
                    throw std::runtime_error("load_mesh_obj: bad face at line " +
                                             std::to_string(line_no));
                }
                // Accept v, v/vt, v//vn, v/vt/vn.
                tri[i] = std::stoi(tok.substr(0, tok.find('/'))) - 1;
            }
            mesh.triangles.push_back(tri);
        }
    }
    mesh.validate();
    return mesh;
}

void save_mesh_ply(const TriangleMesh& mesh, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("save_mesh_ply: cannot open " + path.string());
    }
    out << "ply\nformat binary_little_endian 1.0\n";
    out << "comment gsreg mesh\n";
    out << "element vertex " << mesh.vertices.size() << "\n";
    out << "property float x\nproperty float y\nproperty float z\n";
    out << "element face " << mesh.triangles.size() << "\n";
    out << "property list uchar int vertex_indices\n";
    out << "end_header\n";
    for (const Vec3& v : mesh.vertices) {
        const float xyz[3] = {static_cast<float>(v.x()), static_cast<float>(v.y()),
                              static_cast<float>(v.z())};
        out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
    }
    for (const auto& t : mesh.triangles) {
        const std::uint8_t n = 3;
        const std::int32_t idx[3] = {t[0], t[1], t[2]};
        out.write(reinterpret_cast<const char*>(&n), 1);
        out.write(reinterpret_cast<const char*>(idx), sizeof(idx));
    }
    if (!out) {
        throw std::runtime_error("save_mesh_ply: write failed for " + path.string());
    }
}

TriangleMesh load_mesh_ply(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("load_mesh_ply: cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line) || (line != "ply" && line != "ply\r")) {
        throw std::runtime_error("load_mesh_ply: " + path.string() + " is not a PLY file");
    }
    std::size_t n_vertices = 0, n_faces = 0;
    bool binary = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "format") {
            std::string fmt;
            ls >> fmt;
            binary = fmt == "binary_little_endian";
            if (!binary && fmt != "ascii") {
                throw std::runtime_error("load_mesh_ply: unsupported format " + fmt);
            }
        } else if (tok == "element") {
            std::string kind;
            std::size_t count;
            ls >> kind >> count;
            if (kind == "vertex") n_vertices = count;
            if (kind == "face") n_faces = count;
        } else if (tok == "end_header") {
            break;
        }
    }
    TriangleMesh mesh;
    mesh.vertices.reserve(n_vertices);
    mesh.triangles.reserve(n_faces);
    if (binary) {
        for (std::size_t i = 0; i < n_vertices; ++i) {
            float xyz[3];
            in.read(reinterpret_cast<char*>(xyz), sizeof(xyz));
            if (!in) throw std::runtime_error("load_mesh_ply: truncated vertices");
            mesh.vertices.emplace_back(xyz[0], xyz[1], xyz[2]);
        }
        for (std::size_t i = 0; i < n_faces; ++i) {
            std::uint8_t n = 0;
            in.read(reinterpret_cast<char*>(&n), 1);
            if (!in || n != 3) throw std::runtime_error("load_mesh_ply: non-triangle face");
            std::int32_t idx[3];
            in.read(reinterpret_cast<char*>(idx), sizeof(idx));
            if (!in) throw std::runtime_error("load_mesh_ply: truncated faces");
            mesh.triangles.push_back({idx[0], idx[1], idx[2]});
        }
    } else {
        for (std::size_t i = 0; i < n_vertices; ++i) {
            Vec3 v;
            if (!(in >> v.x() >> v.y() >> v.z())) {
                throw std::runtime_error("load_mesh_ply: truncated vertices");
            }
            mesh.vertices.push_back(v);
        }
        for (std::size_t i = 0; i < n_faces; ++i) {
            int n = 0;
            std::array<int, 3> tri{};
            if (!(in >> n >> tri[0] >> tri[1] >> tri[2]) || n != 3) {
                throw std::runtime_error("load_mesh_ply: non-triangle face");
            }
            mesh.triangles.push_back(tri);
        }
    }
    mesh.validate();
    return mesh;
}

TriangleMesh load_mesh(const std::filesystem::path& path) {
    const std::string ext = path.extension().string();
    if (ext == ".obj") return load_mesh_obj(path);
    if (ext == ".ply") return load_mesh_ply(path);
    throw std::runtime_error("load_mesh: unsupported extension '" + ext + "'");
}

void save_grid_raw(std::span<const double> field, const GridSpec& grid, double iso,
                   const std::filesystem::path& path) {
    if (field.size() != grid.field_size()) {
        throw std::invalid_argument("save_grid_raw: field size does not match grid");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("save_grid_raw: cannot open " + path.string());
    }
    std::vector<float> block(field.size());
    for (std::size_t i = 0; i < field.size(); ++i) block[i] = static_cast<float>(field[i]);
    out.write(reinterpret_cast<const char*>(block.data()),
              static_cast<std::streamsize>(block.size() * sizeof(float)));
    if (!out) {
        throw std::runtime_error("save_grid_raw: write failed for " + path.string());
    }

    nlohmann::json sidecar;
    sidecar["dtype"] = "float32";
    sidecar["order"] = "x-fastest";
    sidecar["corners"] = {grid.nx + 1, grid.ny + 1, grid.nz + 1};
    sidecar["cells"] = {grid.nx, grid.ny, grid.nz};
    sidecar["bounds"] = {{"min", {grid.bounds.min.x(), grid.bounds.min.y(), grid.bounds.min.z()}},
                         {"max", {grid.bounds.max.x(), grid.bounds.max.y(), grid.bounds.max.z()}}};
    sidecar["iso"] = iso;
    std::ofstream side(path.string() + ".json", std::ios::binary);
    side << sidecar.dump(2) << '\n';
    if (!side) {
        throw std::runtime_error("save_grid_raw: sidecar write failed");
    }
}

}  // namespace gsreg
