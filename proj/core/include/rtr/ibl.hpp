#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "rtr/cubemap.hpp"
#include "rtr/image.hpp"
#include "rtr/math.hpp"

namespace rtr {

/// Split-sum environment BRDF table: scale (A) and bias (B) applied to
/// F0, tabulated over (n.v, roughness) with GGX importance sampling.
struct BrdfLut {
    static constexpr int kRes = 64;
    static constexpr int kSamples = 1024;

    std::vector<Real> a, b;  // kRes * kRes, index = iv * kRes + ir

    bool empty() const { return a.empty(); }
    void build();

    /// Bilinear lookup with clamp-to-edge; optional derivatives.
    void sample(Real n_dot_v, Real roughness, Real* out_a, Real* out_b,
                Real* da_dnv = nullptr, Real* da_dr = nullptr,
                Real* db_dnv = nullptr, Real* db_dr = nullptr) const;
};

/// Single-texel split-sum integral, the integrand BrdfLut tabulates.
void brdf_integral(Real n_dot_v, Real roughness, int n_samples, uint64_t seed,
                   Real* out_a, Real* out_b);

/// Number of prefiltered mip levels for a base resolution (halving
/// down to 4x4, the base level included).
int prefilter_levels(int base_res);

/// Builds the GGX-prefiltered roughness chain in place: mip k targets
/// roughness k/(levels-1); mip 0 is the base (mirror) level. Sampling
/// uses a fixed internal seed.
void prefilter_cubemap(Cubemap* cube, int levels);

/// The prefilter as an explicit sparse linear operator over base
/// texels. Built once per resolution so training can re-filter the
/// learned base map every step and push gradients back through it.
struct PrefilterOperator {
    struct Level {
        int res = 0;
        std::vector<int64_t> row_offset;  // 6*res*res + 1
        std::vector<int32_t> col;         // base texel indices
        std::vector<Real> w;
    };

    int base_res = 0;
    int levels = 0;
    std::vector<Level> level;  // entries 1..levels-1; level 0 = identity

    void build(int base_res, int levels);

    /// Recomputes every mip of `cube` from its base level.
    void apply(Cubemap* cube) const;

    /// Accumulates d(loss)/d(base texel) from per-level texel
    /// gradients. grad_mips[k] has 6*res_k^2 entries; level 0
    /// gradients pass straight through.
    void backward(const std::vector<std::vector<Vec3>>& grad_mips,
                  std::vector<Vec3>* grad_base) const;
};

/// Taps recorded by sample_prefiltered for the backward pass.
struct MipTaps {
    int level0 = 0, level1 = 0;
    Real t = 0;  // lerp weight of level1
    Cubemap::BilinearTaps taps0, taps1;
    Vec3 v0{0, 0, 0}, v1{0, 0, 0};
    Mat3 dvalue_ddir;          // per output channel rows, dir columns
    Vec3 dvalue_droughness{0, 0, 0};
};

/// Trilinear-in-mip lookup: bilinear within the two mips bracketing
/// `roughness`, then linear across them. Requires a built mip chain.
Vec3 sample_prefiltered(const Cubemap& cube, const Vec3& dir, Real roughness,
                        MipTaps* taps = nullptr);

/// Diffuse irradiance tabulated over the octahedrally-mapped normal
/// sphere, built from 3-band SH lighting.
struct IrradianceTexture {
    static constexpr int kRes = 64;
    Image img;  // kRes x kRes x 3

    bool empty() const { return img.data_size() == 0; }

    struct Taps {
        std::array<int, 4> texel;  // flattened y * kRes + x
        std::array<Real, 4> weight;
        Mat3 dvalue_dn;
    };
    Vec3 sample(const Vec3& n, Taps* taps = nullptr) const;

    static void octa_encode(const Vec3& n, Real* u, Real* v);
    static Vec3 octa_decode(Real u, Real v);
    static Vec3 texel_dir(int x, int y);
    /// Octahedral wrap of integer texel coordinates just outside the map.
    static void octa_wrap(int* x, int* y);
};

IrradianceTexture build_irradiance(const std::vector<Vec3>& env_sh);

/// Adjoint of build_irradiance: scatters texel gradients back onto the
/// harmonic lighting coefficients, re-deriving the non-negativity gate
/// from `env_sh`. Accumulates into `grad_env_sh` (sized 9).
void build_irradiance_backward(const std::vector<Vec3>& env_sh,
                               const Image& grad_texture,
                               std::vector<Vec3>* grad_env_sh);

/// Imports a latitude-longitude environment image: +y is up, u wraps
/// azimuth starting at -z, v spans pole to pole.
Cubemap cubemap_from_equirect(const Image& img, int res);

}  // namespace rtr
