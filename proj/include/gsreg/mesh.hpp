#pragma once

#include "gsreg/geometry.hpp"
#include "gsreg/rng.hpp"

#include <array>
#include <functional>
#include <span>
#include <vector>

namespace gsreg {

/// Indexed triangle soup; watertightness is not required.
struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;

    bool empty() const { return triangles.empty(); }
    double total_area() const;

    /// Throws std::domain_error on out-of-range indices or triangles with
    /// repeated indices.
    void validate() const;
};

struct GridSpec {
    int nx = 64, ny = 64, nz = 64;  // cells per axis
    Aabb bounds;

    Vec3 cell_size() const {
        return Vec3{bounds.extent().x() / nx, bounds.extent().y() / ny,
                    bounds.extent().z() / nz};
    }
    /// Corner-lattice sizes are nx+1 etc.
    std::size_t field_size() const {
        return static_cast<std::size_t>(nx + 1) * (ny + 1) * (nz + 1);
    }

    void validate() const;  // every resolution >= 8
};

/// Samples fn on the corner lattice (x fastest, then y, then z). Cells are
/// independent, so evaluation fans out over `threads` workers; output order
/// does not depend on thread count.
std::vector<double> sample_field(const std::function<double(const Vec3&)>& fn,
                                 const GridSpec& grid, int threads = 1);

/// Classic marching cubes at the given iso level with linear edge
/// interpolation. Shared edge vertices are welded; triangles are emitted in
/// cell-index order; degenerate (zero-area) triangles are dropped. A field
/// with no zero crossing yields an empty mesh.
TriangleMesh marching_cubes(std::span<const double> field, double iso, const GridSpec& grid);

TriangleMesh marching_cubes(const std::function<double(const Vec3&)>& fn, double iso,
                            const GridSpec& grid, int threads = 1);

/// Area-weighted uniform surface sampling via barycentric draws.
/// Throws std::domain_error on an empty or zero-area mesh.
std::vector<Vec3> sample_mesh_surface(const TriangleMesh& mesh, int count, RandomEngine& rng);

/// Symmetric chamfer distance between the mesh surface (area-weighted
/// `samples` draws) and a reference point set: mean of the two directional
/// mean squared nearest distances.
double chamfer_distance(const TriangleMesh& mesh, std::span<const Vec3> reference_points,
                        int samples, RandomEngine& rng);

/// Analytic-reference variant: the mesh-to-reference term uses exact SDF
/// values at the mesh samples; the reference-to-mesh term measures the given
/// reference surface points against the same mesh samples.
double chamfer_distance(const TriangleMesh& mesh,
                        const std::function<double(const Vec3&)>& reference_sdf,
                        std::span<const Vec3> reference_points, int samples, RandomEngine& rng);

}  // namespace gsreg
