#pragma once

#include <vector>

#include "rtr/camera.hpp"
#include "rtr/ibl.hpp"
#include "rtr/image.hpp"
#include "rtr/math.hpp"
#include "rtr/scene.hpp"
#include "rtr/visibility.hpp"

namespace rtr {

// The physically-based deferred branch: split-sum image lighting with
// the microfacet reflectance model, diffuse irradiance from a
// precomputed texture, baked voxel visibility, and a learned indirect
// diffuse term.

/// Controls for the visibility bake.
struct BakeConfig {
    int grid_res = 128;  // voxels per axis
    int face_res = 32;   // occupancy cubemap face resolution
    Real dilate = 0.10;  // bounding-box margin, fraction of the extent
};

/// Renders a white-background/black-splat occupancy cubemap at every
/// voxel center and projects it onto 3-band harmonics: per voxel, a
/// directional map of how much background stays visible.
VisibilityGrid bake_visibility(const std::vector<GaussianSplat>& splats,
                               const BakeConfig& cfg = {});

/// Cosine-weighted average visibility about `n` at point `x`:
/// trilinear interpolation of the 8 neighboring harmonic records,
/// dotted with the clamped-cosine kernel and normalized by pi.
/// Clamped to [0, 1]; points outside the grid are fully visible.
Real query_visibility(const VisibilityGrid& grid, const Vec3& x, const Vec3& n);

/// Microfacet BRDF value D*F*G / (4 (n.v)(n.i)) with the trowbridge-
/// reitz distribution (alpha = roughness^2), the Schlick fresnel term
/// around f0 = 0.04(1-m) + m*c, and the Smith geometry factor with
/// k = roughness^4 / 2. Grazing denominators are clamped at 1e-6.
Vec3 microfacet_eval(const Vec3& n, const Vec3& v, const Vec3& i, const Vec3& albedo,
                     Real metallic, Real roughness);

/// Diffuse lobe: (c/pi) [V * irradiance(n) + (1-V) * indirect] (1-m),
/// with V the baked cosine-lobe visibility at x about n.
Vec3 pbr_diffuse(const Vec3& albedo, Real metallic, const Vec3& n, const Vec3& x,
                 const Vec3& indirect, const VisibilityGrid& grid,
                 const IrradianceTexture& irradiance);

/// Specular lobe: [F0 * A(n.v, r) + B(n.v, r)] * prefiltered(reflect(v, n), r),
/// optionally attenuated by the baked visibility queried about the
/// reflection direction. Back-facing pixels (n.v <= 0) return zero.
Vec3 pbr_specular(const Vec3& n, const Vec3& v, const Vec3& albedo, Real metallic,
                  Real roughness, const Vec3& x, const Cubemap& env_prefiltered,
                  const BrdfLut& lut, const VisibilityGrid& grid, bool spec_occlusion);

/// Blended G-buffer planes consumed by the deferred shading pass.
/// `normal` holds raw alpha-weighted normal sums; `depth` holds
/// coverage-normalized camera-space z, used only to place the
/// visibility query point.
struct PbrGBuffer {
    Image normal;    // 3 channels
    Image albedo;    // 3
    Image metallic;  // 1
    Image rough;     // 1
    Image indirect;  // 3
    Image depth;     // 1
    Image alpha;     // 1
};

struct PbrShadeConfig {
    bool spec_occlusion = true;
    Vec3 background{0, 0, 0};
};

/// Full deferred shading: diffuse plus specular per covered pixel,
/// background elsewhere. The visibility grid must be baked first.
Image pbr_shade(const PbrGBuffer& g, const Camera& cam, const Cubemap& env_prefiltered,
                const IrradianceTexture& irradiance, const BrdfLut& lut,
                const VisibilityGrid& grid, const PbrShadeConfig& cfg);

/// Gradients of pbr_shade. Baked visibility and the query point are
/// treated as constants (no depth gradient). `grad_env_mips` follows
/// the mip-chain layout for PrefilterOperator::backward;
/// `grad_irradiance` accumulates texel gradients of the irradiance
/// texture. Null slots are skipped.
struct PbrGBufferGrads {
    Image normal, albedo, metallic, rough, indirect;
    void init(int w, int h);
};
void pbr_shade_backward(const PbrGBuffer& g, const Camera& cam,
                        const Cubemap& env_prefiltered,
                        const IrradianceTexture& irradiance, const BrdfLut& lut,
                        const VisibilityGrid& grid, const PbrShadeConfig& cfg,
                        const Image& grad_out, PbrGBufferGrads* grads,
                        std::vector<std::vector<Vec3>>* grad_env_mips,
                        Image* grad_irradiance);

}  // namespace rtr
