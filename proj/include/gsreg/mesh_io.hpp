#pragma once

#include "gsreg/mesh.hpp"

#include <filesystem>
#include <span>

namespace gsreg {

void save_mesh_obj(const TriangleMesh& mesh, const std::filesystem::path& path);
TriangleMesh load_mesh_obj(const std::filesystem::path& path);

/// Binary little-endian PLY with float vertices and uchar-counted int faces.
void save_mesh_ply(const TriangleMesh& mesh, const std::filesystem::path& path);
TriangleMesh load_mesh_ply(const std::filesystem::path& path);

/// Loads either format, keyed on the file extension (.obj / .ply).
TriangleMesh load_mesh(const std::filesystem::path& path);

/// Raw float32 dump of a sampled grid plus a JSON sidecar (<path>.json)
/// recording dimensions, bounds and iso value.
void save_grid_raw(std::span<const double> field, const GridSpec& grid, double iso,
                   const std::filesystem::path& path);

}  // namespace gsreg
