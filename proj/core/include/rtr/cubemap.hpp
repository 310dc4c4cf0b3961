#pragma once

#include <array>
#include <vector>

#include "rtr/math.hpp"

namespace rtr {

/// Face order +x, -x, +y, -y, +z, -z with the usual cubemap layout:
/// for face-local coordinates (u, v) in [-1, 1]^2,
///   +x: ( 1, -v, -u)   -x: (-1, -v,  u)
///   +y: ( u,  1,  v)   -y: ( u, -1, -v)
///   +z: ( u, -v,  1)   -z: (-u, -v, -1)
Vec3 cube_face_uv_to_dir(int face, Real u, Real v);
void cube_dir_to_face_uv(const Vec3& dir, int* face, Real* u, Real* v);

/// Exact solid angle of texel (tx, ty) on a res x res face, via the
/// antiderivative atan2(x*y, sqrt(x^2 + y^2 + 1)) evaluated at corners.
Real cube_texel_solid_angle(int res, int tx, int ty);

/// RGB environment cube. Texels are float32 so that the 6-face
/// portable-float-map serialization round-trips bit-exactly; all
/// sampling math runs in double. Texels are addressed (face, x, y)
/// with x rightward and y downward per face; texel centers map to
/// u = (2x+1)/res - 1. An optional mip chain holds roughness-
/// prefiltered levels (level 0 = mirror = base), not box filters.
class Cubemap {
public:
    Cubemap() = default;
    explicit Cubemap(int res, const Vec3& fill = Vec3{0, 0, 0});

    int resolution() const { return res_; }
    size_t texel_count() const { return size_t(6) * res_ * res_; }
    bool empty() const { return texels_.empty(); }

    Vec3 get(int face, int x, int y) const {
        const float* p = &texels_[texel_index(face, x, y) * 3];
        return {Real(p[0]), Real(p[1]), Real(p[2])};
    }
    Vec3 get(size_t texel) const {
        const float* p = &texels_[texel * 3];
        return {Real(p[0]), Real(p[1]), Real(p[2])};
    }
    void set(int face, int x, int y, const Vec3& v) { set(texel_index(face, x, y), v); }
    void set(size_t texel, const Vec3& v) {
        float* p = &texels_[texel * 3];
        p[0] = float(v.x);
        p[1] = float(v.y);
        p[2] = float(v.z);
    }

    float* raw() { return texels_.data(); }
    const float* raw() const { return texels_.data(); }

    /// Flat texel index shared with gradient buffers and the prefilter
    /// operator: (face * res + y) * res + x.
    size_t texel_index(int face, int x, int y) const {
        return (size_t(face) * res_ + y) * res_ + x;
    }

    /// Unit direction through the center of a texel.
    Vec3 texel_dir(int face, int x, int y) const;

    Vec3 sample_nearest(const Vec3& dir) const;

    /// Bilinear sample within the hit face, clamped at face edges.
    Vec3 sample_bilinear(const Vec3& dir) const;

    /// Bilinear sample that also reports its taps (value = sum of
    /// weight_i * texel(index_i)) and the derivative of the value with
    /// respect to the direction (invariant to the length of dir).
    struct BilinearTaps {
        std::array<size_t, 4> index;
        std::array<Real, 4> weight;
        Mat3 dvalue_ddir;  // row r = d value[r] / d dir
    };
    Vec3 sample_bilinear_grad(const Vec3& dir, BilinearTaps* taps) const;

    /// Roughness-prefiltered levels, coarsest face 4x4. Level k of n
    /// corresponds to roughness k/(n-1). Empty until prefiltered.
    const std::vector<Cubemap>& mips() const { return mips_; }
    std::vector<Cubemap>& mips() { return mips_; }
    bool has_mips() const { return !mips_.empty(); }

private:
    int res_ = 0;
    std::vector<float> texels_;  // 6 * res * res * 3, interleaved rgb
    std::vector<Cubemap> mips_;
};

/// Projects the cubemap onto bands^2 SH coefficients per channel using
/// exact per-texel solid angles.
std::vector<Vec3> cubemap_to_sh(const Cubemap& cube, int bands);

/// Adjoint of cubemap_to_sh: maps coefficient gradients to texel
/// gradients (the projection is linear, so texel values are unused).
/// Returned layout matches texel_index order.
std::vector<Vec3> cubemap_to_sh_backward(int res, int bands,
                                         const std::vector<Vec3>& grad_coeffs);

/// Fills a cubemap by evaluating an SH expansion at texel centers.
Cubemap cubemap_from_sh(const std::vector<Vec3>& coeffs, int res);

}  // namespace rtr
