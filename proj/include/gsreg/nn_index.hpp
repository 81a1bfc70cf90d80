#pragma once

#include "gsreg/geometry.hpp"

#include <vector>

namespace gsreg {

/// Exact nearest-neighbor queries over a fixed point set. Small sets are
/// scanned directly; larger ones go through a uniform grid with an expanding
/// ring search. Both paths return the same (distance, lowest index) answer.
class NearestNeighborIndex {
public:
    /// Point count at or above which the grid is used.
    static constexpr std::size_t kGridThreshold = 2000;

    explicit NearestNeighborIndex(std::vector<Vec3> points);

    struct Result {
        int index = -1;
        double dist2 = 0.0;
    };

    Result nearest(const Vec3& query) const;

    std::size_t size() const { return points_.size(); }
    const std::vector<Vec3>& points() const { return points_; }

private:
    Result brute_force(const Vec3& query) const;

    std::vector<Vec3> points_;
    bool use_grid_ = false;
    Vec3 origin_ = Vec3::Zero();
    double cell_ = 1.0;
    int nx_ = 0, ny_ = 0, nz_ = 0;
    std::vector<int> cell_start_;  // CSR offsets, size nx*ny*nz + 1
    std::vector<int> cell_items_;  // point indices, ascending within each cell
};

}  // namespace gsreg
