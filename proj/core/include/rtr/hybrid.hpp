#pragma once

#include <array>
#include <vector>

#include "rtr/camera.hpp"
#include "rtr/ibl.hpp"
#include "rtr/image.hpp"
#include "rtr/math.hpp"
#include "rtr/scene.hpp"

namespace rtr {

// The hybrid rendering branch. Radiance is shaded per splat against
// the shared harmonic lighting (forward), while reflections are shaded
// per pixel from the blended G-buffer (deferred) and mixed in by the
// splatted reflection intensity.

/// Diffuse radiance of one splat: the per-channel dot product of the
/// lighting coefficients with the splat's transfer vector, scaled by
/// the diffuse color and clamped non-negative.
Vec3 shade_diffuse_rt(const GaussianSplat& splat, const std::vector<Vec3>& sh_light);

/// Gradient of shade_diffuse_rt. `grad_sh_light` may be null when the
/// lighting is frozen. Accumulates into all outputs.
void shade_diffuse_rt_backward(const GaussianSplat& splat,
                               const std::vector<Vec3>& sh_light, const Vec3& grad_out,
                               Vec3* grad_diffuse_color,
                               std::array<Real, kShCoeffs>* grad_transfer,
                               std::vector<Vec3>* grad_sh_light);

/// View-dependent transfer vector for a reflection direction: the
/// decoder network applied to (direction, per-splat feature).
std::array<Real, kShCoeffs> decode_transfer(const TransferDecoder& decoder,
                                            const std::array<Real, kFeatureDim>& feature,
                                            const Vec3& out_dir,
                                            TransferDecoder::Eval* eval = nullptr);

/// Specular radiance of one splat: lighting dotted with the decoded
/// view-dependent transfer vector, rectified after the dot product,
/// scaled by the specular color. `out_dir` is the reflection of the
/// view direction about the splat normal, unit length.
struct SpecularRtEval {
    TransferDecoder::Eval decoder;
    Vec3 dot{0, 0, 0};  // pre-rectifier per-channel dot product
};
Vec3 shade_specular_rt(const GaussianSplat& splat, const std::vector<Vec3>& sh_light,
                       const TransferDecoder& decoder, const Vec3& out_dir,
                       SpecularRtEval* eval = nullptr);

/// Gradient of shade_specular_rt given the cached forward evaluation.
/// Null output slots are skipped. `grad_out_dir` feeds the chain into
/// the splat normal.
void shade_specular_rt_backward(const GaussianSplat& splat,
                                const std::vector<Vec3>& sh_light,
                                const TransferDecoder& decoder,
                                const SpecularRtEval& eval, const Vec3& grad_out,
                                Vec3* grad_specular_color,
                                std::array<Real, kFeatureDim>* grad_feature,
                                Vec3* grad_out_dir, TransferDecoder::Grads* grad_decoder,
                                std::vector<Vec3>* grad_sh_light);

/// Deferred split-sum reflection over a blended G-buffer. Per covered
/// pixel (coverage >= 0.5):
///   C_ref = tint * prefiltered(reflect(v, n), rough) * (A + B)
/// where (A, B) come from the scale/bias table at (n.v, rough) and the
/// normalized-incidence reflectance inside the split sum is folded
/// into the tint. Uncovered pixels get the background color.
/// `normal` holds the raw alpha-weighted normal sums (normalized
/// here), `refl_map` must carry a prefiltered mip chain.
Image deferred_reflection(const Image& normal, const Image& tint, const Image& rough,
                          const Image& alpha, const Camera& cam, const Cubemap& refl_map,
                          const BrdfLut& lut, const Vec3& background);

/// Gradient of deferred_reflection. `grad_mips` is resized to the mip
/// chain layout ([level][face texels], level 0 = base) and accumulated;
/// pipe it through PrefilterOperator::backward to reach the learnable
/// base map. Null slots are skipped. Uncovered pixels propagate
/// nothing (the coverage test is not differentiated).
void deferred_reflection_backward(const Image& normal, const Image& tint,
                                  const Image& rough, const Image& alpha,
                                  const Camera& cam, const Cubemap& refl_map,
                                  const BrdfLut& lut, const Image& grad_out,
                                  Image* grad_normal, Image* grad_tint,
                                  Image* grad_rough,
                                  std::vector<std::vector<Vec3>>* grad_mips);

/// Intensity-weighted mix of the two branches:
///   out = radiance * (1 - intensity) + reflection * intensity.
/// `intensity` is single-channel; the color images have 3 channels.
Image blend_hybrid(const Image& radiance, const Image& reflection,
                   const Image& intensity);

/// Exact gradients of the affine blend. Null slots are skipped.
void blend_hybrid_backward(const Image& radiance, const Image& reflection,
                           const Image& intensity, const Image& grad_out,
                           Image* grad_radiance, Image* grad_reflection,
                           Image* grad_intensity);

}  // namespace rtr
