#pragma once

#include <string>
#include <vector>

#include "rtr/math.hpp"

namespace rtr {

/// Voxel grid of directional sky visibility: each voxel stores a
/// 3-band, single-channel SH expansion of "how much background is seen
/// along each direction" (1 = fully open, 0 = fully blocked), baked by
/// rendering white-background/black-splat cubemaps at voxel centers.
/// Texel records are float32 so the binary file round-trips exactly.
struct VisibilityGrid {
    int res = 0;  // voxels per axis
    Vec3 bbox_min{0, 0, 0};
    Vec3 bbox_max{0, 0, 0};
    std::vector<float> sh;  // res^3 * 9, x-fastest voxel order

    static constexpr int kBands = 3;
    static constexpr int kCoeffs = 9;

    bool empty() const { return sh.empty(); }
    size_t voxel_count() const { return size_t(res) * res * res; }
    size_t voxel_offset(int ix, int iy, int iz) const {
        return ((size_t(iz) * res + iy) * res + ix) * kCoeffs;
    }
    Vec3 voxel_center(int ix, int iy, int iz) const {
        const Vec3 cell = (bbox_max - bbox_min) / Real(res);
        return bbox_min + Vec3{(ix + 0.5) * cell.x, (iy + 0.5) * cell.y,
                               (iz + 0.5) * cell.z};
    }
};

/// Versioned little-endian binary format: magic "RTRVISG1", int32
/// resolution, bbox as 6 doubles, then res^3 x 9 float32 SH records in
/// x-fastest order.
void save_visgrid(const std::string& path, const VisibilityGrid& grid);
VisibilityGrid load_visgrid(const std::string& path);

}  // namespace rtr
