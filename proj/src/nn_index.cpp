#include "gsreg/nn_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gsreg {

NearestNeighborIndex::NearestNeighborIndex(std::vector<Vec3> points)
    : points_(std::move(points)) {
    if (points_.empty()) {
        throw std::domain_error("NearestNeighborIndex: empty point set");
    }
    use_grid_ = points_.size() >= kGridThreshold;
    if (!use_grid_) return;

    Vec3 lo = points_[0], hi = points_[0];
    for (const Vec3& p : points_) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const Vec3 extent = (hi - lo).cwiseMax(1e-9);
    const int cells_per_axis = std::max(
        1, static_cast<int>(std::cbrt(static_cast<double>(points_.size()))));
    cell_ = extent.maxCoeff() / static_cast<double>(cells_per_axis);
    origin_ = lo;
    nx_ = std::max(1, static_cast<int>(std::floor(extent.x() / cell_)) + 1);
    ny_ = std::max(1, static_cast<int>(std::floor(extent.y() / cell_)) + 1);
    nz_ = std::max(1, static_cast<int>(std::floor(extent.z() / cell_)) + 1);

    const std::size_t n_cells = static_cast<std::size_t>(nx_) * ny_ * nz_;
    std::vector<int> counts(n_cells, 0);
    auto cell_of = [&](const Vec3& p) {
        const int cx = std::clamp(static_cast<int>((p.x() - origin_.x()) / cell_), 0, nx_ - 1);
        const int cy = std::clamp(static_cast<int>((p.y() - origin_.y()) / cell_), 0, ny_ - 1);
        const int cz = std::clamp(static_cast<int>((p.z() - origin_.z()) / cell_), 0, nz_ - 1);
        return static_cast<std::size_t>(cx) + static_cast<std::size_t>(nx_) * (cy + static_cast<std::size_t>(ny_) * cz);
    };
    for (const Vec3& p : points_) ++counts[cell_of(p)];
    cell_start_.assign(n_cells + 1, 0);
    for (std::size_t c = 0; c < n_cells; ++c) cell_start_[c + 1] = cell_start_[c] + counts[c];
    cell_items_.resize(points_.size());
    std::vector<int> cursor(cell_start_.begin(), cell_start_.end() - 1);
    for (std::size_t i = 0; i < points_.size(); ++i) {
        cell_items_[static_cast<std::size_t>(cursor[cell_of(points_[i])]++)] =
            static_cast<int>(i);
    }
}

NearestNeighborIndex::Result NearestNeighborIndex::brute_force(const Vec3& query) const {
    Result best{-1, std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i < points_.size(); ++i) {
        const double d2 = (points_[i] - query).squaredNorm();
        if (d2 < best.dist2) {
            best = {static_cast<int>(i), d2};
        }
    }
    return best;
}

NearestNeighborIndex::Result NearestNeighborIndex::nearest(const Vec3& query) const {
    if (!use_grid_) return brute_force(query);

    const int qx = std::clamp(static_cast<int>(std::floor((query.x() - origin_.x()) / cell_)),
                              0, nx_ - 1);
    const int qy = std::clamp(static_cast<int>(std::floor((query.y() - origin_.y()) / cell_)),
                              0, ny_ - 1);
    const int qz = std::clamp(static_cast<int>(std::floor((query.z() - origin_.z()) / cell_)),
                              0, nz_ - 1);

    Result best{-1, std::numeric_limits<double>::infinity()};
    const int max_ring = std::max({nx_, ny_, nz_});
    for (int ring = 0; ring <= max_ring; ++ring) {
        // A cell at Chebyshev distance `ring` cannot hold anything closer
        // than (ring - 1) cell widths.
        if (best.index >= 0) {
            const double lower = (ring - 1) * cell_;
            if (lower > 0.0 && lower * lower > best.dist2) break;
        }
        const int x0 = qx - ring, x1 = qx + ring;
        const int y0 = qy - ring, y1 = qy + ring;
        const int z0 = qz - ring, z1 = qz + ring;
        for (int cz = std::max(z0, 0); cz <= std::min(z1, nz_ - 1); ++cz) {
            for (int cy = std::max(y0, 0); cy <= std::min(y1, ny_ - 1); ++cy) {
                for (int cx = std::max(x0, 0); cx <= std::min(x1, nx_ - 1); ++cx) {
                    const bool on_shell = cx == x0 || cx == x1 || cy == y0 || cy == y1 ||
                                          cz == z0 || cz == z1;
                    if (!on_shell) continue;
                    const std::size_t c = static_cast<std::size_t>(cx) +
                                          static_cast<std::size_t>(nx_) *
                                              (cy + static_cast<std::size_t>(ny_) * cz);
                    for (int k = cell_start_[c]; k < cell_start_[c + 1]; ++k) {
                        const int idx = cell_items_[static_cast<std::size_t>(k)];
                        const double d2 = (points_[static_cast<std::size_t>(idx)] - query)
                                              .squaredNorm();
                        if (d2 < best.dist2 || (d2 == best.dist2 && idx < best.index)) {
                            best = {idx, d2};
                        }
                    }
                }
            }
        }
    }
    return best;
}

}  // namespace gsreg
