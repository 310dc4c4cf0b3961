#pragma once

#include <vector>

#include "rtr/cubemap.hpp"
#include "rtr/image.hpp"

namespace rtr {

/// Stage-gated weights for the combined training objective.
struct LossWeights {
    Real dssim = 0.2;   // structural share of each rendering loss
    Real light = 0.003; // white-light regularizer on the environment map
    Real metal = 0.1;   // metallic vs reflection-intensity consistency
    Real normal = 0.02; // splat normals vs depth pseudo-normals
    Real smooth = 0.01; // per attribute-buffer bilateral smoothness
    Real mask = 0.1;    // object-mask cross entropy on coverage
};

/// Raw (unweighted) loss components of one frame. Components that a
/// stage disables are simply left at zero by the caller.
struct LossTerms {
    Real render_hybrid = 0;
    Real render_pbr = 0;
    Real light = 0;
    Real metal = 0;
    Real normal = 0;
    Real smooth = 0;  // already summed over attribute buffers
    Real mask = 0;
};

/// Weighted total. `pbr_active` gates the physically-based branch and
/// the regularizers that only constrain it (light, metal).
Real total_loss(const LossTerms& terms, const LossWeights& weights, bool pbr_active);

/// Rendering loss: (1-w) L1 + w (1 - SSIM)/2 with an 11x11 Gaussian
/// window (sigma 1.5, clamp-to-edge). Mean over pixels and channels.
Real loss_render(const Image& pred, const Image& gt, Real dssim_weight = 0.2);
void loss_render_backward(const Image& pred, const Image& gt, Real dssim_weight,
                          Real grad_scale, Image* grad_pred);

/// Mean Euclidean distance between the two normal buffers over pixels
/// where `mask` is positive; 0 when nothing is selected.
Real loss_normal(const Image& normal, const Image& pseudo, const Image& mask);
void loss_normal_backward(const Image& normal, const Image& pseudo, const Image& mask,
                          Real grad_scale, Image* grad_normal, Image* grad_pseudo);

/// White-light prior on the base level of the environment map: mean
/// over texels of the summed per-channel deviation from the channel
/// mean.
Real loss_light(const Cubemap& env);
void loss_light_backward(const Cubemap& env, Real grad_scale,
                         std::vector<Vec3>* grad_texels);

/// Mean |m - intensity| over pixels where `mask` is positive.
Real loss_metal(const Image& metallic, const Image& intensity, const Image& mask);
void loss_metal_backward(const Image& metallic, const Image& intensity,
                         const Image& mask, Real grad_scale, Image* grad_metallic,
                         Image* grad_intensity);

/// Bilateral smoothness: mean over pixels of the forward-difference
/// gradient magnitude of `attr`, damped by exp(-|grad gt|).
Real loss_smooth(const Image& attr, const Image& gt);
void loss_smooth_backward(const Image& attr, const Image& gt, Real grad_scale,
                          Image* grad_attr);

/// Binary cross entropy between the coverage image and a mask in
/// [0,1]; coverage is clamped to [1e-5, 1-1e-5].
Real loss_mask(const Image& coverage, const Image& mask);
void loss_mask_backward(const Image& coverage, const Image& mask, Real grad_scale,
                        Image* grad_coverage);

}  // namespace rtr
