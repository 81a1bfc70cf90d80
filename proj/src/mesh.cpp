#include "gsreg/mesh.hpp"

#include "gsreg/mc_tables.hpp"
#include "gsreg/nn_index.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>

namespace gsreg {

double TriangleMesh::total_area() const {
    double area = 0.0;
    for (const auto& tri : triangles) {
        const Vec3& a = vertices[static_cast<std::size_t>(tri[0])];
        const Vec3& b = vertices[static_cast<std::size_t>(tri[1])];
        const Vec3& c = vertices[static_cast<std::size_t>(tri[2])];
        area += 0.5 * (b - a).cross(c - a).norm();
    }
    return area;
}

void TriangleMesh::validate() const {
    const int n = static_cast<int>(vertices.size());
    for (std::size_t t = 0; t < triangles.size(); ++t) {
        const auto& tri = triangles[t];
        for (int i = 0; i < 3; ++i) {
            if (tri[i] < 0 || tri[i] >= n) {
                throw std::domain_error("TriangleMesh: index out of range in triangle " +
                                        std::to_string(t));
            }
        }
        if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
            throw std::domain_error("TriangleMesh: repeated index in triangle " +
                                    std::to_string(t));
        }
    }
}

void GridSpec::validate() const {
    if (nx < 8 || ny < 8 || nz < 8) {
        throw std::domain_error("GridSpec: resolution must be >= 8 per axis");
    }
    if (!((bounds.max.array() > bounds.min.array()).all())) {
        throw std::domain_error("GridSpec: bounds must have positive extent");
    }
}

std::vector<double> sample_field(const std::function<double(const Vec3&)>& fn,
                                 const GridSpec& grid, int threads) {
    grid.validate();
    const int cx = grid.nx + 1, cy = grid.ny + 1, cz = grid.nz + 1;
    const Vec3 step = grid.cell_size();
    std::vector<double> field(grid.field_size());

    auto fill_rows = [&](int z0, int z1) {
        for (int k = z0; k < z1; ++k) {
            for (int j = 0; j < cy; ++j) {
                for (int i = 0; i < cx; ++i) {
                    const Vec3 p = grid.bounds.min +
                                   Vec3{i * step.x(), j * step.y(), k * step.z()};
                    field[static_cast<std::size_t>(i) +
                          static_cast<std::size_t>(cx) *
                              (j + static_cast<std::size_t>(cy) * k)] = fn(p);
                }
            }
        }
    };

    threads = std::max(1, std::min(threads, cz));
    if (threads == 1) {
        fill_rows(0, cz);
    } else {
        // Each worker owns disjoint z-slabs; results are identical to the
        // sequential fill.
        std::vector<std::thread> pool;
        const int per = (cz + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            const int z0 = t * per;
            const int z1 = std::min(cz, z0 + per);
            if (z0 >= z1) break;
            pool.emplace_back(fill_rows, z0, z1);
        }
        for (std::thread& th : pool) th.join();
    }
    return field;
}

namespace {

// Bourke corner layout: offsets of the 8 cube corners.
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};

// For each of the 12 edges: lattice offset of the canonical lower corner and
// the axis along which the edge runs.
struct EdgeSlot {
    int dx, dy, dz, axis;
};
constexpr EdgeSlot kEdge[12] = {
    {0, 0, 0, 0},  // e0:  v0-v1, +x
    {1, 0, 0, 1},  // e1:  v1-v2, +y
    {0, 1, 0, 0},  // e2:  v3-v2, +x
    {0, 0, 0, 1},  // e3:  v0-v3, +y
    {0, 0, 1, 0},  // e4:  v4-v5, +x
    {1, 0, 1, 1},  // e5:  v5-v6, +y
    {0, 1, 1, 0},  // e6:  v7-v6, +x
    {0, 0, 1, 1},  // e7:  v4-v7, +y
    {0, 0, 0, 2},  // e8:  v0-v4, +z
    {1, 0, 0, 2},  // e9:  v1-v5, +z
    {1, 1, 0, 2},  // e10: v2-v6, +z
    {0, 1, 0, 2},  // e11: v3-v7, +z
};

}  // namespace

TriangleMesh marching_cubes(std::span<const double> field, double iso, const GridSpec& grid) {
    grid.validate();
    if (field.size() != grid.field_size()) {
        throw std::invalid_argument("marching_cubes: field size does not match grid");
    }
    for (double v : field) {
        if (!std::isfinite(v)) {
            throw std::domain_error("marching_cubes: field contains non-finite values");
        }
    }

    const int cx = grid.nx + 1, cy = grid.ny + 1;
    const Vec3 step = grid.cell_size();
    auto value_at = [&](int i, int j, int k) {
        return field[static_cast<std::size_t>(i) +
                     static_cast<std::size_t>(cx) * (j + static_cast<std::size_t>(cy) * k)];
    };
    auto point_at = [&](int i, int j, int k) {
        return Vec3{grid.bounds.min.x() + i * step.x(), grid.bounds.min.y() + j * step.y(),
                    grid.bounds.min.z() + k * step.z()};
    };

    TriangleMesh mesh;
    std::unordered_map<std::uint64_t, int> edge_vertices;
    edge_vertices.reserve(1024);

    // Interpolated vertex on the lattice edge starting at corner (i,j,k)
    // along `axis`, computed in the canonical direction so every adjacent
    // cell agrees bit-for-bit.
    auto edge_vertex = [&](int i, int j, int k, int axis) {
        const std::uint64_t key =
            3 * (static_cast<std::uint64_t>(i) +
                 static_cast<std::uint64_t>(cx) *
                     (static_cast<std::uint64_t>(j) +
                      static_cast<std::uint64_t>(cy) * static_cast<std::uint64_t>(k))) +
            static_cast<std::uint64_t>(axis);
        auto it = edge_vertices.find(key);
        if (it != edge_vertices.end()) return it->second;

        const int i2 = i + (axis == 0), j2 = j + (axis == 1), k2 = k + (axis == 2);
        const double f1 = value_at(i, j, k);
        const double f2 = value_at(i2, j2, k2);
        const double denom = f2 - f1;
        const double t = std::abs(denom) < 1e-300 ? 0.5 : std::clamp((iso - f1) / denom, 0.0, 1.0);
        const Vec3 p1 = point_at(i, j, k);
        const Vec3 p2 = point_at(i2, j2, k2);
        const int index = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back(p1 + t * (p2 - p1));
        edge_vertices.emplace(key, index);
        return index;
    };

    for (int k = 0; k < grid.nz; ++k) {
        for (int j = 0; j < grid.ny; ++j) {
            for (int i = 0; i < grid.nx; ++i) {
                int cube_index = 0;
                for (int c = 0; c < 8; ++c) {
                    if (value_at(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2]) < iso) {
                        cube_index |= 1 << c;
                    }
                }
                if (detail::kEdgeTable[cube_index] == 0) continue;

                int verts[12];
                for (int e = 0; e < 12; ++e) {
                    if (detail::kEdgeTable[cube_index] & (1 << e)) {
                        verts[e] = edge_vertex(i + kEdge[e].dx, j + kEdge[e].dy, k + kEdge[e].dz,
                                               kEdge[e].axis);
                    }
                }
                const int* tri = detail::kTriTable[cube_index];
                for (int t = 0; tri[t] != -1; t += 3) {
                    const std::array<int, 3> indices = {verts[tri[t]], verts[tri[t + 1]],
                                                        verts[tri[t + 2]]};
                    if (indices[0] == indices[1] || indices[1] == indices[2] ||
                        indices[0] == indices[2]) {
                        continue;
                    }
                    const Vec3& a = mesh.vertices[static_cast<std::size_t>(indices[0])];
                    const Vec3& b = mesh.vertices[static_cast<std::size_t>(indices[1])];
                    const Vec3& c = mesh.vertices[static_cast<std::size_t>(indices[2])];
                    if (0.5 * (b - a).cross(c - a).norm() <= 1e-12) continue;
                    mesh.triangles.push_back(indices);
                }
            }
        }
    }
    return mesh;
}

TriangleMesh marching_cubes(const std::function<double(const Vec3&)>& fn, double iso,
                            const GridSpec& grid, int threads) {
    return marching_cubes(sample_field(fn, grid, threads), iso, grid);
}

std::vector<Vec3> sample_mesh_surface(const TriangleMesh& mesh, int count, RandomEngine& rng) {
    if (mesh.empty()) {
        throw std::domain_error("sample_mesh_surface: mesh is empty");
    }
    if (count < 1) {
        throw std::domain_error("sample_mesh_surface: count must be >= 1");
    }
    std::vector<double> cumulative(mesh.triangles.size());
    double total = 0.0;
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        const Vec3& a = mesh.vertices[static_cast<std::size_t>(tri[0])];
        const Vec3& b = mesh.vertices[static_cast<std::size_t>(tri[1])];
        const Vec3& c = mesh.vertices[static_cast<std::size_t>(tri[2])];
        total += 0.5 * (b - a).cross(c - a).norm();
        cumulative[t] = total;
    }
    if (!(total > 0.0)) {
        throw std::domain_error("sample_mesh_surface: mesh has zero total area");
    }

    std::vector<Vec3> samples;
    samples.reserve(static_cast<std::size_t>(count));
    for (int s = 0; s < count; ++s) {
        const double pick = rng.uniform() * total;
        const std::size_t t = static_cast<std::size_t>(
            std::upper_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin());
        const auto& tri = mesh.triangles[std::min(t, mesh.triangles.size() - 1)];
        const Vec3& a = mesh.vertices[static_cast<std::size_t>(tri[0])];
        const Vec3& b = mesh.vertices[static_cast<std::size_t>(tri[1])];
        const Vec3& c = mesh.vertices[static_cast<std::size_t>(tri[2])];
        double u = rng.uniform();
        double v = rng.uniform();
        if (u + v > 1.0) {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        samples.push_back(a + u * (b - a) + v * (c - a));
    }
    return samples;
}

namespace {

double mean_sq_nearest(std::span<const Vec3> from, const NearestNeighborIndex& index) {
    double sum = 0.0;
    for (const Vec3& p : from) sum += index.nearest(p).dist2;
    return sum / static_cast<double>(from.size());
}

}  // namespace

double chamfer_distance(const TriangleMesh& mesh, std::span<const Vec3> reference_points,
                        int samples, RandomEngine& rng) {
    if (mesh.empty()) {
        throw std::domain_error("chamfer_distance: mesh is empty");
    }
    if (reference_points.empty()) {
        throw std::domain_error("chamfer_distance: reference point set is empty");
    }
    const std::vector<Vec3> mesh_samples = sample_mesh_surface(mesh, samples, rng);
    const NearestNeighborIndex ref_index(
        std::vector<Vec3>(reference_points.begin(), reference_points.end()));
    const NearestNeighborIndex mesh_index(mesh_samples);
    const double to_ref = mean_sq_nearest(mesh_samples, ref_index);
    const double to_mesh = mean_sq_nearest(reference_points, mesh_index);
    return 0.5 * (to_ref + to_mesh);
}

double chamfer_distance(const TriangleMesh& mesh,
                        const std::function<double(const Vec3&)>& reference_sdf,
                        std::span<const Vec3> reference_points, int samples, RandomEngine& rng) {
    if (mesh.empty()) {
        throw std::domain_error("chamfer_distance: mesh is empty");
    }
    if (reference_points.empty()) {
        throw std::domain_error("chamfer_distance: reference point set is empty");
    }
    const std::vector<Vec3> mesh_samples = sample_mesh_surface(mesh, samples, rng);
    double to_ref = 0.0;
    for (const Vec3& p : mesh_samples) {
        const double d = reference_sdf(p);
        to_ref += d * d;
    }
    to_ref /= static_cast<double>(mesh_samples.size());
    const NearestNeighborIndex mesh_index(mesh_samples);
    const double to_mesh = mean_sq_nearest(reference_points, mesh_index);
    return 0.5 * (to_ref + to_mesh);
}

}  // namespace gsreg
