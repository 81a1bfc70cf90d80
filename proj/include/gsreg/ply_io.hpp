#pragma once

#include "gsreg/gaussian.hpp"

#include <filesystem>

namespace gsreg {

enum class PlyFormat { BinaryLittleEndian, Ascii };

/// Writes a scene as PLY with per-vertex properties
/// x, y, z, scale_0..2, rot_0..3 (w, x, y, z), opacity (all float32).
/// Bounds and seed ride along as header comments.
void save_scene_ply(const GaussianScene& scene, const std::filesystem::path& path,
                    PlyFormat format = PlyFormat::BinaryLittleEndian);

/// Reads either binary little-endian or ASCII PLY written by save_scene_ply
/// (or any PLY exposing the same properties). Throws std::runtime_error on
/// malformed input.
GaussianScene load_scene_ply(const std::filesystem::path& path);

}  // namespace gsreg
