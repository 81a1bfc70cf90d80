#include "gsreg/ply_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gsreg {
namespace {

constexpr std::array<const char*, 11> kProperties = {
    "x", "y", "z", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3", "opacity"};

std::array<float, 11> pack(const Gaussian& g) {
    return {static_cast<float>(g.mean.x()),      static_cast<float>(g.mean.y()),
            static_cast<float>(g.mean.z()),      static_cast<float>(g.scales.x()),
            static_cast<float>(g.scales.y()),    static_cast<float>(g.scales.z()),
            static_cast<float>(g.rotation.w()),  static_cast<float>(g.rotation.x()),
            static_cast<float>(g.rotation.y()),  static_cast<float>(g.rotation.z()),
            static_cast<float>(g.opacity)};
}

void format_float(std::ostream& os, float v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
    os << buf;
}

}  // namespace

void save_scene_ply(const GaussianScene& scene, const std::filesystem::path& path,
                    PlyFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("save_scene_ply: cannot open " + path.string());
    }
    out << "ply\n";
    out << (format == PlyFormat::Ascii ? "format ascii 1.0\n"
                                       : "format binary_little_endian 1.0\n");
    out << "comment gsreg gaussian scene\n";
    char buf[256];
    std::snprintf(buf, sizeof(buf), "comment bounds_min %.17g %.17g %.17g\n", scene.bounds.min.x(),
                  scene.bounds.min.y(), scene.bounds.min.z());
    out << buf;
    std::snprintf(buf, sizeof(buf), "comment bounds_max %.17g %.17g %.17g\n", scene.bounds.max.x(),
                  scene.bounds.max.y(), scene.bounds.max.z());
    out << buf;
    out << "comment seed " << scene.seed << "\n";
    out << "element vertex " << scene.size() << "\n";
    for (const char* prop : kProperties) {
        out << "property float " << prop << "\n";
    }
    out << "end_header\n";

    for (const Gaussian& g : scene.gaussians) {
        const std::array<float, 11> row = pack(g);
        if (format == PlyFormat::Ascii) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                if (i) out << ' ';
                format_float(out, row[i]);
            }
            out << '\n';
        } else {
            // Little-endian host assumed; static_assert below guards the build.
            out.write(reinterpret_cast<const char*>(row.data()),
                      static_cast<std::streamsize>(row.size() * sizeof(float)));
        }
    }
    if (!out) {
        throw std::runtime_error("save_scene_ply: write failed for " + path.string());
    }
}

static_assert(std::endian::native == std::endian::little,
              "binary PLY writer assumes a little-endian host");

namespace {

struct PlyHeader {
    bool ascii = false;
    std::size_t vertex_count = 0;
    std::vector<std::string> properties;  // declared order
    Aabb bounds;
    bool have_bounds = false;
    std::uint64_t seed = 0;
};

PlyHeader parse_header(std::istream& in, const std::string& origin) {
    PlyHeader h;
    std::string line;
    if (!std::getline(in, line) || (line != "ply" && line != "ply\r")) {
        throw std::runtime_error("load_scene_ply: " + origin + " is not a PLY file");
    }
    bool saw_min = false, saw_max = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt == "ascii") {
                h.ascii = true;
            } else if (fmt == "binary_little_endian") {
                h.ascii = false;
            } else {
                throw std::runtime_error("load_scene_ply: unsupported format " + fmt);
            }
        } else if (tok == "comment") {
            std::string key;
            ls >> key;
            if (key == "bounds_min") {
                ls >> h.bounds.min.x() >> h.bounds.min.y() >> h.bounds.min.z();
                saw_min = true;
            } else if (key == "bounds_max") {
                ls >> h.bounds.max.x() >> h.bounds.max.y() >> h.bounds.max.z();
                saw_max = true;
            } else if (key == "seed") {
                ls >> h.seed;
            }
        } else if (tok == "element") {
            std::string kind;
            ls >> kind >> h.vertex_count;
            if (kind != "vertex") {
                throw std::runtime_error("load_scene_ply: unexpected element '" + kind + "'");
            }
        } else if (tok == "property") {
            std::string type, name;
            ls >> type >> name;
            if (type != "float" && type != "float32") {
                throw std::runtime_error("load_scene_ply: property " + name +
                                         " has unsupported type " + type);
            }
            h.properties.push_back(name);
        } else if (tok == "end_header") {
            h.have_bounds = saw_min && saw_max;
            return h;
        }
    }
    throw std::runtime_error("load_scene_ply: missing end_header in " + origin);
}

}  // namespace

GaussianScene load_scene_ply(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("load_scene_ply: cannot open " + path.string());
    }
    const PlyHeader header = parse_header(in, path.string());

    // Map each required property to its column in the file.
    std::array<int, 11> column{};
    for (std::size_t i = 0; i < kProperties.size(); ++i) {
        auto it = std::find(header.properties.begin(), header.properties.end(), kProperties[i]);
        if (it == header.properties.end()) {
            throw std::runtime_error(std::string("load_scene_ply: missing property ") +
                                     kProperties[i]);
        }
        column[i] = static_cast<int>(it - header.properties.begin());
    }

    const std::size_t stride = header.properties.size();
    std::vector<Gaussian> gaussians;
    gaussians.reserve(header.vertex_count);
    std::vector<float> row(stride);

    for (std::size_t v = 0; v < header.vertex_count; ++v) {
        if (header.ascii) {
            for (std::size_t c = 0; c < stride; ++c) {
                if (!(in >> row[c])) {
                    throw std::runtime_error("load_scene_ply: truncated ASCII data");
                }
            }
        } else {
            in.read(reinterpret_cast<char*>(row.data()),
                    static_cast<std::streamsize>(stride * sizeof(float)));
            if (!in) {
                throw std::runtime_error("load_scene_ply: truncated binary data");
            }
        }
        Gaussian g;
        g.mean = Vec3{row[column[0]], row[column[1]], row[column[2]]};
        g.scales = Vec3{row[column[3]], row[column[4]], row[column[5]]};
        g.rotation = Quat{row[column[6]], row[column[7]], row[column[8]], row[column[9]]};
        if (g.rotation.norm() < 1e-9) {
            throw std::runtime_error("load_scene_ply: zero quaternion at vertex " +
                                     std::to_string(v));
        }
        g.rotation.normalize();
        g.opacity = row[column[10]];
        gaussians.push_back(g);
    }

    Aabb bounds = header.bounds;
    if (!header.have_bounds) {
        // Legacy file: derive bounds from the means with a small margin.
        Vec3 lo = Vec3::Constant(std::numeric_limits<double>::max());
        Vec3 hi = Vec3::Constant(std::numeric_limits<double>::lowest());
        for (const Gaussian& g : gaussians) {
            lo = lo.cwiseMin(g.mean);
            hi = hi.cwiseMax(g.mean);
        }
        if (gaussians.empty()) {
            lo = Vec3::Constant(-1.0);
            hi = Vec3::Constant(1.0);
        }
        bounds = Aabb{lo - Vec3::Constant(0.1), hi + Vec3::Constant(0.1)};
    }
    return GaussianScene::create(std::move(gaussians), bounds, header.seed);
}

}  // namespace gsreg
