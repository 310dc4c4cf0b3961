#pragma once

#include <array>
#include <string>
#include <vector>

#include "rtr/cubemap.hpp"
#include "rtr/math.hpp"
#include "rtr/visibility.hpp"

namespace rtr {

constexpr int kShBands = 3;
constexpr int kShCoeffs = kShBands * kShBands;  // 9
constexpr int kFeatureDim = 16;
constexpr int kDecoderHidden = 64;

/// One anisotropic 3D Gaussian with the attributes of both rendering
/// branches. 55 scalars total, serialized in declaration order.
struct GaussianSplat {
    Vec3 position{0, 0, 0};
    Vec3 log_scale{0, 0, 0};
    Quat rotation{1, 0, 0, 0};
    Real opacity_logit = 0;

    // Forward radiance-transfer shading.
    Vec3 diffuse_color{0.5, 0.5, 0.5};            // >= 0
    std::array<Real, kShCoeffs> transfer{};       // diffuse transfer vector
    Vec3 specular_color{0, 0, 0};                 // >= 0
    std::array<Real, kFeatureDim> feature{};      // decoder input

    // Deferred reflection.
    Vec3 reflection_tint{1, 1, 1};  // [0,1]
    Real reflection_roughness = 0.5;
    Real reflection_intensity = 0.01;

    // Physically-based branch.
    Vec3 albedo{0.5, 0.5, 0.5};  // [0,1]
    Real metallic = 0.5;
    Real roughness = 0.5;
    Vec3 indirect_light{0, 0, 0};  // [0,1]

    Real opacity() const { return sigmoid(opacity_logit); }

    /// World-space covariance R diag(exp(log_scale))^2 R^T.
    Mat3 covariance() const;
};

/// Accumulates d(sum(grad_cov .* covariance()))/d{log_scale, rotation}.
void covariance_backward(const GaussianSplat& s, const Mat3& grad_cov,
                         Vec3* grad_log_scale, Quat* grad_rotation);

constexpr int kSplatScalars = 55;

/// Three-layer perceptron decoding (reflection direction, per-splat
/// feature) into a 9-entry view-dependent transfer vector. Layer 1
/// takes the direction, layer 2 concatenates the feature, rectifiers
/// on the first two layers, linear output.
struct TransferDecoder {
    static constexpr int kIn1 = 3;
    static constexpr int kIn2 = kDecoderHidden + kFeatureDim;  // 80
    static constexpr int kOut = kShCoeffs;

    std::vector<Real> w1, b1;  // [64 x 3], [64]
    std::vector<Real> w2, b2;  // [64 x 80], [64]
    std::vector<Real> w3, b3;  // [9 x 64], [9]

    TransferDecoder();
    static TransferDecoder random_init(uint64_t seed);

    bool zero_weights() const;

    /// Forward activations cached for the backward pass.
    struct Eval {
        Vec3 dir;
        std::array<Real, kFeatureDim> feature;
        std::array<Real, kDecoderHidden> z1, h1, z2, h2;
        std::array<Real, kOut> out;
    };
    void forward(const std::array<Real, kFeatureDim>& feature, const Vec3& dir,
                 Eval* eval) const;

    /// Gradient accumulator matching the weight layout.
    struct Grads {
        std::vector<Real> w1, b1, w2, b2, w3, b3;
        Grads();
        void clear();
        void add(const Grads& o);
    };

    /// Accumulates weight gradients and returns input gradients.
    /// `grad_dir` may be null when the direction is constant.
    void backward(const Eval& eval, const std::array<Real, kOut>& grad_out,
                  Grads* grads, std::array<Real, kFeatureDim>* grad_feature,
                  Vec3* grad_dir) const;
};

/// Full scene: splats, the shared SH lighting both radiance-transfer
/// terms dot against, the transfer decoder, and the two learnable
/// environment cubes (reflection for the hybrid branch, environment
/// for the physically-based branch).
struct Scene {
    std::vector<GaussianSplat> splats;
    std::vector<Vec3> sh_light = std::vector<Vec3>(kShCoeffs, Vec3{0, 0, 0});
    TransferDecoder decoder;
    Cubemap reflection_map;
    Cubemap env_map;
    VisibilityGrid visibility;  // empty until baked

    /// Axis-aligned bounds of splat centers (zero box when empty).
    void bounds(Vec3* lo, Vec3* hi) const;
};

/// Text scene file plus 6-face portable-float-map sidecars per cubemap
/// and a .visgrid sidecar when visibility is baked. Round-trips every
/// field bit-exactly. Grammar documented in the README.
void scene_save(const Scene& scene, const std::string& path);
Scene scene_load(const std::string& path);

/// Synthetic initialization on a primitive surface.
struct SyntheticSpec {
    enum class Primitive { kSphere, kPlane, kBox };
    Primitive primitive = Primitive::kSphere;
    int count = 1000;
    uint64_t seed = 1;
    Real radius = 1.0;  // sphere radius; half-extent for plane and box

    // Tangent scale is scale_fill times the mean surface spacing; the
    // normal axis is flattened relative to it so the shortest axis of
    // every splat starts aligned with the local surface normal.
    Real scale_fill = 0.7;
    Real flatten = 0.5;

    Real opacity = 0.8;
    Vec3 diffuse_color{0.5, 0.5, 0.5};
    Vec3 specular_color{0, 0, 0};
    Vec3 reflection_tint{1, 1, 1};
    Real reflection_roughness = 0.5;
    Real reflection_intensity = 0.01;
    Vec3 albedo{0.5, 0.5, 0.5};
    Real metallic = 0.5;
    Real roughness = 0.5;
    Vec3 indirect_light{0, 0, 0};
    Real feature_sigma = 0.1;  // transfer features ~ N(0, sigma^2)

    int cubemap_res = 128;
    Real cubemap_value = 0.5;
    Real ambient = 0.5;  // DC-only init of the shared SH light

    static SyntheticSpec::Primitive parse_primitive(const std::string& name);
};

Scene init_synthetic(const SyntheticSpec& spec);

/// Enforces all box constraints and invariants in place (quaternion
/// renormalization, [0,1] clamps, non-negative colors); used after
/// every optimizer step and on load.
void clamp_splat(GaussianSplat* splat);

}  // namespace rtr
