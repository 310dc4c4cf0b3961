#pragma once

#include <cstdint>
#include <vector>

#include "rtr/camera.hpp"
#include "rtr/image.hpp"
#include "rtr/math.hpp"
#include "rtr/scene.hpp"

namespace rtr {

/// Tunables of the tiled alpha-compositing rasterizer.
struct RasterConfig {
    int tile_size = 16;
    /// Screen-space footprint radius in standard deviations. Large
    /// enough that the truncated tail cannot perturb finite-difference
    /// gradient checks.
    Real footprint_sigma = 4.0;
    Real near_clip = 0.01;
    /// Per-splat alpha ceiling; keeps 1 - alpha away from zero.
    Real alpha_max = 0.99;
    /// Front-to-back blending stops once transmittance drops below this.
    Real transmittance_cutoff = 1e-4;
};

/// Screen-space footprint of one splat, cached between the forward and
/// backward passes.
struct ProjectedSplat {
    bool visible = false;
    Vec2 center{0, 0};     // pixel coordinates of the projected mean
    Real z = 0;            // camera-space depth
    Real conic_a = 0, conic_b = 0, conic_c = 0;  // inverse 2d covariance
    Real opacity = 0;      // sigmoid(opacity_logit)
    int x0 = 0, x1 = -1, y0 = 0, y1 = -1;        // inclusive pixel bounds
};

ProjectedSplat project_splat(const GaussianSplat& splat, const Camera& cam,
                             const RasterConfig& cfg);

/// Per-splat geometry gradients produced by the backward pass.
struct GeomGrads {
    std::vector<Vec3> position;
    std::vector<Vec3> log_scale;
    std::vector<Quat> rotation;
    std::vector<Real> opacity_logit;

    void resize(size_t n) {
        position.assign(n, Vec3{0, 0, 0});
        log_scale.assign(n, Vec3{0, 0, 0});
        rotation.assign(n, Quat{0, 0, 0, 0});
        opacity_logit.assign(n, 0.0);
    }
    void add(const GeomGrads& o);
};

/// Result of the forward pass. `payload` carries the composited splat
/// payload channels plus one extra channel holding the alpha-weighted
/// depth sum; `alpha` is the accumulated coverage. Tile lists are kept
/// so the backward pass can replay blending in the identical order.
struct RasterForward {
    Image payload;               // channels = K + 1 (depth sum last)
    Image alpha;                 // 1 channel
    std::vector<ProjectedSplat> proj;
    std::vector<std::vector<int32_t>> tiles;
    std::vector<int32_t> order;  // depth-sorted splat indices
    int tiles_x = 0, tiles_y = 0;
    int payload_channels = 0;    // K, excluding the depth channel

    int depth_channel() const { return payload_channels; }
};

/// Composites `payload` (n_splats x K, row-major per splat) front to
/// back: out[k] = sum_i payload[i][k] * alpha_i * T_i. Splats are
/// depth-sorted with ties broken by splat index.
RasterForward rasterize(const std::vector<GaussianSplat>& splats,
                        const std::vector<Real>& payload, int payload_channels,
                        const Camera& cam, const RasterConfig& cfg);

/// Backward pass of `rasterize`. `grad_payload_img` must have K + 1
/// channels (gradient w.r.t. the depth-sum channel last), `grad_alpha`
/// one channel. Outputs are accumulated.
void rasterize_backward(const std::vector<GaussianSplat>& splats,
                        const std::vector<Real>& payload,
                        const RasterForward& fwd, const Camera& cam,
                        const RasterConfig& cfg, const Image& grad_payload_img,
                        const Image& grad_alpha,
                        std::vector<Real>* grad_payload, GeomGrads* grad_geom);

/// Index of the smallest-scale principal axis (ties -> lowest index).
int shortest_axis(const Vec3& log_scale);

/// Unit normal of a splat: the principal axis with the smallest scale,
/// flipped so it faces the camera (n . view_dir <= 0 for view_dir
/// pointing from the camera toward the splat).
Vec3 compute_normal(const GaussianSplat& splat, const Vec3& view_dir);

/// Accumulates d(dot(grad_n, compute_normal()))/d(rotation). The flip
/// sign and axis choice are treated as locally constant.
void compute_normal_backward(const GaussianSplat& splat, const Vec3& view_dir,
                             const Vec3& grad_n, Quat* grad_rotation);

/// Screen-space normals reconstructed from a rendered depth map: cross
/// products of forward differences of back-projected surface points,
/// oriented toward the camera. `depth` holds camera-space z (already
/// normalized by alpha); pixels with alpha < 0.5 or missing neighbors
/// are marked invalid (0) in `valid` and get a zero normal.
void depth_to_pseudo_normals(const Image& depth, const Image& alpha,
                             const Camera& cam, Image* normals, Image* valid);

/// Backward pass of depth_to_pseudo_normals: scatters d(loss)/d(normals)
/// into d(loss)/d(depth). The validity mask is treated as constant.
void depth_to_pseudo_normals_backward(const Image& depth, const Image& alpha,
                                      const Camera& cam,
                                      const Image& grad_normals,
                                      Image* grad_depth);

}  // namespace rtr
